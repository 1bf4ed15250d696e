use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use attnwarp::synth::Surface;
use attnwarp::{Camera, FeatureMap, Mask};
use nalgebra::Vector3;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_attnwarp"))
}

fn ok(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn error_json(cmd: &mut Command) -> Value {
    let out = cmd.output().unwrap();
    assert!(!out.status.success());
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(v["error"]["message"].is_string());
    v
}

const SCENE: &str = r#"{
  "surface": {"type": "plane", "z": 4.0, "half_extent": 3.0},
  "rig": {"type": "arc", "count": 8, "half_angle_deg": 20, "radius": 4, "target": [0, 0, 4],
          "width": 128, "height": 128, "fov_deg": 50},
  "splat_spacing": 0.02
}"#;

fn synth(dir: &Path) -> PathBuf {
    std::fs::write(dir.join("scene.json"), SCENE).unwrap();
    let out = dir.join("scene");
    ok(bin().args(["synth", "--spec"]).arg(dir.join("scene.json")).arg("--out").arg(&out));
    out
}

#[test]
fn warp_with_identical_cameras_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let scene = synth(dir.path());
    let cam = scene.join("camera_002.json");
    let out = dir.path().join("w.fwt");
    ok(bin()
        .arg("warp")
        .arg("--src-camera")
        .arg(&cam)
        .arg("--tgt-camera")
        .arg(&cam)
        .arg("--depth")
        .arg(scene.join("depth_002.fwt"))
        .arg("--input")
        .arg(scene.join("image_002.fwt"))
        .arg("--output")
        .arg(&out)
        .arg("--mask-out")
        .arg(dir.path().join("m.fwt")));
    let a = FeatureMap::load(&out).unwrap();
    let b = FeatureMap::load(scene.join("image_002.fwt")).unwrap();
    let worst = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0f32, f32::max);
    assert!(worst <= 1e-6);
    assert_eq!(Mask::load(dir.path().join("m.fwt")).unwrap().count_valid(), 128 * 128);
}

#[test]
fn blend_alpha_zero_returns_fresh_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let scene = synth(dir.path());
    let out = dir.path().join("b.fwt");
    ok(bin()
        .arg("blend")
        .arg("--warped")
        .arg(scene.join("image_000.fwt"))
        .arg("--fresh")
        .arg(scene.join("image_001.fwt"))
        .args(["--alpha", "0"])
        .arg("--output")
        .arg(&out));
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(scene.join("image_001.fwt")).unwrap());

    // schedule form: t = T gives alpha 0 as well
    let out2 = dir.path().join("b2.fwt");
    ok(bin()
        .arg("blend")
        .arg("--warped")
        .arg(scene.join("image_000.fwt"))
        .arg("--fresh")
        .arg(scene.join("image_001.fwt"))
        .args(["--step", "50", "--total-steps", "50"])
        .arg("--output")
        .arg(&out2));
    assert_eq!(std::fs::read(&out2).unwrap(), std::fs::read(&out).unwrap());
}

#[test]
fn eval_reports_inf_psnr_for_identical_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let scene = synth(dir.path());
    let img = scene.join("image_003.fwt");
    let out = ok(bin().arg("eval").arg(&img).arg(&img));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["psnr"], "inf");
    assert_eq!(v["l1"], 0.0);
    let out = ok(bin().arg("eval").arg(&img).arg(scene.join("image_004.fwt")));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["psnr"].as_f64().unwrap() > 0.0);
}

#[test]
fn contract_violations_exit_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let scene = synth(dir.path());
    let v = error_json(bin().arg("eval").arg(scene.join("image_000.fwt")).arg(scene.join("depth_000.fwt")));
    assert_eq!(v["error"]["kind"], "DimensionMismatch");
    std::fs::write(dir.path().join("junk.fwt"), b"nope").unwrap();
    let v = error_json(bin().arg("eval").arg(dir.path().join("junk.fwt")).arg(dir.path().join("junk.fwt")));
    assert_eq!(v["error"]["kind"], "BadMagic");
    std::fs::write(dir.path().join("short.fwt"), b"FWT1\x02\x04\x00").unwrap();
    let v = error_json(bin().arg("eval").arg(dir.path().join("short.fwt")).arg(dir.path().join("short.fwt")));
    assert_eq!(v["error"]["kind"], "Truncated");
    let v = error_json(bin().args(["blend", "--alpha", "0.5"]));
    assert_eq!(v["error"]["kind"], "Usage");
    let v = error_json(
        bin()
            .arg("blend")
            .arg("--warped")
            .arg(scene.join("image_000.fwt"))
            .arg("--fresh")
            .arg(scene.join("image_001.fwt"))
            .args(["--alpha", "1.5", "--output"])
            .arg(dir.path().join("x.fwt")),
    );
    assert_eq!(v["error"]["kind"], "OutOfRange");
}

#[test]
fn mask_and_render_depth_write_files_and_previews() {
    let dir = tempfile::tempdir().unwrap();
    let scene = synth(dir.path());
    let d = dir.path();
    let args = |cmd: &mut Command| {
        cmd.arg("mask")
            .arg("--src-camera")
            .arg(scene.join("camera_000.json"))
            .arg("--tgt-camera")
            .arg(scene.join("camera_007.json"))
            .arg("--depth")
            .arg(scene.join("depth_007.fwt"))
            .args(["--resolution", "64"]);
    };
    let mut c = bin();
    args(&mut c);
    ok(c.arg("--output").arg(d.join("m1.fwt")).arg("--png").arg(d.join("m.png")));
    let mut c = bin();
    args(&mut c);
    ok(c.arg("--output").arg(d.join("m2.fwt")));
    assert_eq!(std::fs::read(d.join("m1.fwt")).unwrap(), std::fs::read(d.join("m2.fwt")).unwrap());
    let m = Mask::load(d.join("m1.fwt")).unwrap();
    assert_eq!((m.width(), m.height()), (64, 64));
    assert!(m.coverage() > 0.5 && m.coverage() < 1.0);
    assert_eq!(&std::fs::read(d.join("m.png")).unwrap()[1..4], b"PNG");

    ok(bin()
        .arg("render-depth")
        .arg("--splats")
        .arg(scene.join("splats.fwt"))
        .arg("--camera")
        .arg(scene.join("camera_005.json"))
        .arg("--source-camera")
        .arg(scene.join("camera_000.json"))
        .arg("--output")
        .arg(d.join("r.fwt"))
        .arg("--png")
        .arg(d.join("r.png")));
    let rendered = attnwarp::DepthMap::load(d.join("r.fwt")).unwrap();
    let analytic = attnwarp::DepthMap::load(scene.join("depth_005.fwt")).unwrap();
    let close = rendered
        .data()
        .iter()
        .zip(analytic.data())
        .filter(|(r, a)| **r > 0.0 && (**r - **a).abs() < 0.02)
        .count();
    assert!(close as f64 > 0.95 * (128.0 * 128.0));
}

fn write_config(dir: &Path, editor: &str) -> PathBuf {
    let cfg = format!(
        r#"{{"views": "scene/views.json", "source": "view_000", "splats": "scene/splats.fwt",
            "depth": "splats", "editor": {editor}, "output_dir": "out"}}"#
    );
    let p = dir.join("pipeline.json");
    std::fs::write(&p, cfg).unwrap();
    p
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn run_with_stamp_propagates_the_edit() {
    let dir = tempfile::tempdir().unwrap();
    let scene = synth(dir.path());
    let cfg = write_config(dir.path(), r#"{"stamp": {"center": [64, 64], "radius": 32}}"#);
    let out = ok(bin().arg("run").arg("--config").arg(&cfg).arg("--no-timing"));
    let manifest: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(manifest["views"].as_array().unwrap().len(), 7);
    assert!(manifest.get("timing").is_none());

    let src = Camera::load(scene.join("camera_000.json")).unwrap();
    let surface = Surface::plane(4.0, 0.0);
    for i in 1..8 {
        let cam = Camera::load(scene.join(format!("camera_{i:03}.json"))).unwrap();
        let vdir = dir.path().join("out/views").join(format!("view_{i:03}"));
        let mask = Mask::load(vdir.join("mask_64x64.fwt")).unwrap();
        let bundle = attnwarp::warp::load_bundle(vdir.join("warped_bundle")).unwrap();
        let ind = &bundle.layer("stamp.64").unwrap().self_attn;
        let (mut inter, mut union) = (0, 0);
        for y in 0..64 {
            for x in 0..64 {
                let predicted = mask.get(x, y) == 1.0 && ind.get(0, y, x) >= 0.5;
                let q = ((x as f64 + 0.5) * 2.0, (y as f64 + 0.5) * 2.0);
                let analytic = surface.depth_at(&cam, q).is_some_and(|d| {
                    let k = cam.intrinsics;
                    let pc = Vector3::new((q.0 - k.cx) / k.fx * d, (q.1 - k.cy) / k.fy * d, d);
                    let ps = src.extrinsics.world_to_camera(&cam.extrinsics.camera_to_world(&pc));
                    let (u, v) = (src.intrinsics.fx * ps.x / ps.z + src.intrinsics.cx, src.intrinsics.fy * ps.y / ps.z + src.intrinsics.cy);
                    (u - 64.0).hypot(v - 64.0) <= 32.0
                });
                inter += (predicted && analytic) as usize;
                union += (predicted || analytic) as usize;
            }
        }
        let iou = inter as f64 / union as f64;
        assert!(iou >= 0.95, "view {i}: IoU {iou}");
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let cfg = write_config(dir.path(), r#""identity""#);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let ja = ok(bin().arg("run").arg("--config").arg(&cfg).arg("--no-timing").arg("--out").arg(&a)).stdout;
    let jb = ok(bin().arg("run").arg("--config").arg(&cfg).arg("--no-timing").arg("--out").arg(&b)).stdout;
    assert_eq!(ja, jb);
    assert_eq!(tree(&a), tree(&b));
    // identity editor: every edited image equals its input
    for i in 1..8 {
        let edited = std::fs::read(a.join(format!("views/view_{i:03}/edited.fwt"))).unwrap();
        let input = std::fs::read(dir.path().join(format!("scene/image_{i:03}.fwt"))).unwrap();
        assert_eq!(edited, input);
    }
}
