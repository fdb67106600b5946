use image::RgbImage;
use panonav_core::projector::{pixel_ray, project, source_coordinates, Projector, ViewSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise_pano(seed: u64, h: u32) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = RgbImage::new(2 * h, h);
    rng.fill(&mut img.as_mut()[..]);
    img
}

/// Source pixel for a camera ray built from explicit camera axes in the
/// (east, north, up) frame, then converted to equirectangular pixels.
fn ray_trace(yaw: f64, pitch: f64, fov: f64, n: u32, px: u32, py: u32, w: u32, h: u32) -> (f64, f64) {
    let (sy, cy) = yaw.to_radians().sin_cos();
    let (sp, cp) = pitch.to_radians().sin_cos();
    let forward = [sy * cp, cy * cp, sp];
    let right = [cy, -sy, 0.0];
    let up = [-sy * sp, -cy * sp, cp];
    let f = n as f64 / 2.0 / (fov.to_radians() / 2.0).tan();
    let u = px as f64 + 0.5 - n as f64 / 2.0;
    let v = n as f64 / 2.0 - (py as f64 + 0.5);
    let d: Vec<f64> = (0..3).map(|i| f * forward[i] + u * right[i] + v * up[i]).collect();
    let bearing = d[0].atan2(d[1]).to_degrees();
    let elevation = d[2].atan2(d[0].hypot(d[1])).to_degrees();
    let x = ((bearing + 180.0) / 360.0 * w as f64 - 0.5).rem_euclid(w as f64);
    let y = ((90.0 - elevation) / 180.0 * h as f64 - 0.5).clamp(0.0, h as f64 - 1.0);
    (x, y)
}

fn wrapped_diff(a: f64, b: f64, w: f64) -> f64 {
    let d = (a - b).abs();
    d.min(w - d)
}

#[test]
fn source_coordinates_match_ray_trace() {
    let (w, h) = (1024, 512);
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let yaw = rng.gen_range(0.0..360.0);
        let pitch = rng.gen_range(-60.0..60.0);
        let view = ViewSpec::new(yaw, pitch, 60.0, 84).unwrap();
        let coords = source_coordinates(&view, w, h);
        assert_eq!(coords.len(), 84 * 84);
        for (i, &(x, y)) in coords.iter().enumerate() {
            let (px, py) = ((i % 84) as u32, (i / 84) as u32);
            let (ex, ey) = ray_trace(yaw, pitch, 60.0, 84, px, py, w, h);
            assert!((0.0..w as f64).contains(&x));
            worst = worst.max(wrapped_diff(x, ex, w as f64)).max((y - ey).abs());
        }
    }
    assert!(worst <= 1e-6, "max error {worst} px");
}

#[test]
fn pixel_rays_match_ray_trace_bearings() {
    let view = ViewSpec::new(350.0, 10.0, 90.0, 32).unwrap();
    for py in 0..32 {
        for px in 0..32 {
            let (b, e) = pixel_ray(&view, px, py);
            let (x, y) = ray_trace(350.0, 10.0, 90.0, 32, px, py, 3600, 1800);
            assert!(wrapped_diff((b + 180.0) * 10.0 - 0.5, x, 3600.0) < 1e-6);
            assert!(((90.0 - e) * 10.0 - 0.5 - y).abs() < 1e-6);
        }
    }
}

fn shift_columns(img: &RgbImage, k: u32) -> RgbImage {
    let w = img.width();
    RgbImage::from_fn(w, img.height(), |c, r| *img.get_pixel((c + w - k % w) % w, r))
}

fn flip(img: &RgbImage) -> RgbImage {
    image::imageops::flip_horizontal(img)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn yaw_equivariance(seed in any::<u64>(), j in 0u32..512, k in 0u32..512, pitch in -45.0f64..45.0, fov in 30.0f64..120.0) {
        let h = 256;
        let w = 2 * h;
        let pano = noise_pano(seed, h);
        let col = 360.0 / w as f64;
        let yaw = j as f64 * col;
        let mut p = Projector::new();
        let base = p.project(&pano, &ViewSpec::new(yaw, pitch, fov, 48).unwrap()).unwrap();
        let shifted = p
            .project(&shift_columns(&pano, k), &ViewSpec::new(yaw + k as f64 * col, pitch, fov, 48).unwrap())
            .unwrap();
        prop_assert_eq!(base, shifted);
    }

    #[test]
    fn mirror_symmetry(seed in any::<u64>(), yaw in 0.0f64..360.0, pitch in -45.0f64..45.0, fov in 30.0f64..120.0) {
        let pano = noise_pano(seed, 256);
        let view = project(&pano, &ViewSpec::new(yaw, pitch, fov, 48).unwrap()).unwrap();
        let mirrored = project(&flip(&pano), &ViewSpec::new(-yaw, pitch, fov, 48).unwrap()).unwrap();
        prop_assert_eq!(flip(&view), mirrored);
    }

    #[test]
    fn full_turn_is_identity(seed in any::<u64>(), yaw in 0.0f64..360.0, turns in -3i32..3) {
        let pano = noise_pano(seed, 128);
        let a = project(&pano, &ViewSpec::new(yaw, 0.0, 60.0, 32).unwrap()).unwrap();
        let b = project(&pano, &ViewSpec::new(yaw + 360.0 * turns as f64, 0.0, 60.0, 32).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn output_has_requested_size() {
    let pano = noise_pano(1, 64);
    for n in [1, 7, 84, 160] {
        let view = project(&pano, &ViewSpec::new(0.0, 0.0, 60.0, n).unwrap()).unwrap();
        assert_eq!(view.dimensions(), (n, n));
    }
}

#[test]
fn equivariance_at_full_resolution() {
    let pano = noise_pano(9, 512);
    let col = 360.0 / 1024.0;
    let mut p = Projector::new();
    for k in [1, 17, 511, 1000] {
        let a = p.project(&pano, &ViewSpec::new(0.0, 0.0, 60.0, 84).unwrap()).unwrap();
        let b = p
            .project(&shift_columns(&pano, k), &ViewSpec::new(k as f64 * col, 0.0, 60.0, 84).unwrap())
            .unwrap();
        assert_eq!(a, b, "shift {k}");
    }
}
