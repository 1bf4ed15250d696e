use attnwarp::Sampling;
use attnwarp_web::{depth_rgba, image_rgba, mask_rgba, Demo, WebDemo};

const N: usize = 48;

fn demo() -> Demo {
    Demo::new(N).unwrap()
}

#[test]
fn warping_into_the_source_pose_reproduces_the_source() {
    let d = demo();
    let v = d.warp_view(0.0, Sampling::Bilinear).unwrap();
    let src = d.source_image();
    let mut checked = 0;
    for y in 0..N {
        for x in 0..N {
            if v.mask.get(x, y) == 1.0 {
                checked += 1;
                for c in 0..3 {
                    assert!((v.warped.get(c, y, x) - src.get(c, y, x)).abs() < 1e-5);
                }
            }
        }
    }
    assert!(checked > N * N / 4);
}

#[test]
fn nearest_mask_is_the_target_silhouette() {
    // the whole sphere stays inside the source frame, and the mask does not
    // test visibility, so every covered target pixel is valid
    let d = demo();
    let sphere = attnwarp::synth::Surface::Sphere { center: [0.0, 0.0, 4.0], radius: 1.0 };
    for yaw in [0.0, 30.0, 60.0, 90.0] {
        let mask = d.warp_view(yaw, Sampling::Nearest).unwrap().mask;
        let depth = sphere.depth_map(&d.target(yaw).unwrap());
        for (m, z) in mask.data().iter().zip(depth.data()) {
            assert_eq!(*m == 1.0, *z > 0.0);
        }
    }
}

#[test]
fn filter_count_grows_with_the_angle() {
    let d = demo();
    let kept: Vec<usize> = [10.0, 45.0, 90.0, 180.0]
        .iter()
        .map(|&t| d.filter_view(40.0, t).unwrap().kept)
        .collect();
    assert!(kept.windows(2).all(|w| w[0] <= w[1]), "{kept:?}");
    assert_eq!(kept[3], d.splat_count());
    assert!(kept[0] < kept[2]);
}

#[test]
fn blend_follows_the_schedule() {
    let d = demo();
    let (end, alpha) = d.blend_view(20.0, 50, 50, 0.9).unwrap();
    assert_eq!(alpha, 0.0);
    let fresh = attnwarp::synth::Surface::Sphere { center: [0.0, 0.0, 4.0], radius: 1.0 }
        .render_texture(&d.target(20.0).unwrap())
        .unwrap();
    assert_eq!(end.data(), fresh.data());

    // identical pose: the edit lands at weight alpha0 inside the mask
    let (start, alpha) = d.blend_view(0.0, 0, 50, 0.9).unwrap();
    assert!((alpha - 0.9).abs() < 1e-12);
    let (src, edited) = (d.source_image(), d.edited_source());
    let mask = d.warp_view(0.0, Sampling::Bilinear).unwrap().mask;
    for y in 0..N {
        for x in 0..N {
            for c in 0..3 {
                let want = if mask.get(x, y) == 1.0 {
                    src.get(c, y, x) + 0.9 * (edited.get(c, y, x) - src.get(c, y, x))
                } else {
                    src.get(c, y, x)
                };
                assert!((start.get(c, y, x) - want).abs() < 1e-5);
            }
        }
    }
}

#[test]
fn rgba_buffers_have_canvas_shape() {
    let d = demo();
    let v = d.warp_view(15.0, Sampling::Bilinear).unwrap();
    assert_eq!(image_rgba(&v.warped, Some(&v.mask)).len(), 4 * N * N);
    assert_eq!(mask_rgba(&v.mask).len(), 4 * N * N);
    let depth = d.filter_view(15.0, 60.0).unwrap().depth;
    let px = depth_rgba(&depth);
    assert_eq!(px.len(), 4 * N * N);
    assert!(px.chunks(4).all(|p| p[3] == 255));
}

#[test]
fn web_handle_reports_status() {
    let mut w = WebDemo::new(N).ok().unwrap();
    assert_eq!(w.warp(10.0, false).ok().unwrap().len(), 4 * N * N);
    assert!(w.status().starts_with("valid"));
    w.filter(10.0, 60.0).ok().unwrap();
    assert!(w.status().ends_with("splats kept"));
    w.blend(10.0, 25, 50, 0.9).ok().unwrap();
    assert_eq!(w.status(), "alpha 0.450");
}
