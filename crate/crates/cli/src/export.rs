//! 8-bit PNG previews. Export only; nothing reads these back.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use attnwarp::{DepthMap, Error, FeatureMap, Mask};

fn write(path: &Path, width: usize, height: usize, color: png::ColorType, bytes: &[u8]) -> Result<(), Error> {
    let file = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(file, width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc.write_header().map_err(|e| Error::Io(std::io::Error::other(e)))?;
    w.write_image_data(bytes).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(())
}

fn to_byte(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn mask_png(m: &Mask, path: &Path) -> Result<(), Error> {
    let bytes: Vec<u8> = m.data().iter().map(|&v| to_byte(v)).collect();
    write(path, m.width(), m.height(), png::ColorType::Grayscale, &bytes)
}

/// Nearer is brighter; empty pixels are black.
pub fn depth_png(d: &DepthMap, path: &Path) -> Result<(), Error> {
    let covered = d.data().iter().copied().filter(|&v| v > 0.0);
    let (lo, hi) = covered.fold((f32::INFINITY, 0.0f32), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let span = (hi - lo).max(1e-6);
    let bytes: Vec<u8> = d
        .data()
        .iter()
        .map(|&v| if v > 0.0 { to_byte(0.2 + 0.8 * (hi - v) / span) } else { 0 })
        .collect();
    write(path, d.width(), d.height(), png::ColorType::Grayscale, &bytes)
}

/// One channel as grey, three as RGB; values are clamped to [0, 1].
pub fn feature_png(f: &FeatureMap, path: &Path) -> Result<(), Error> {
    let (c, h, w) = f.shape();
    match c {
        1 => write(path, w, h, png::ColorType::Grayscale, &f.data().iter().map(|&v| to_byte(v)).collect::<Vec<_>>()),
        3 => {
            let mut bytes = Vec::with_capacity(3 * w * h);
            for y in 0..h {
                for x in 0..w {
                    bytes.extend((0..3).map(|ch| to_byte(f.get(ch, y, x))));
                }
            }
            write(path, w, h, png::ColorType::Rgb, &bytes)
        }
        _ => Err(Error::Config(format!("PNG preview needs 1 or 3 channels, got {c}"))),
    }
}
