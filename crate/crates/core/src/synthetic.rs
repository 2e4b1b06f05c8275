//! Seeded synthetic test scenes and texture patches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::distortions::gaussian_blur;
use crate::error::Result;
use crate::image::GrayImage;

/// Piecewise-smooth scene: a tilted background ramp, 6 to 13 random
/// ellipses or rectangles, three faint sinusoidal textures, slight blur,
/// values kept inside [0.02, 0.98].
pub fn scene(size: usize, seed: u64) -> Result<GrayImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = size as f64;
    let (ga, gb) = (rng.random::<f64>(), rng.random::<f64>());
    let mut data: Vec<f64> = (0..size * size)
        .map(|k| {
            let (y, x) = ((k / size) as f64 / n, (k % size) as f64 / n);
            0.3 + 0.3 * (ga * x + gb * y)
        })
        .collect();
    for _ in 0..rng.random_range(6..14) {
        let (cx, cy) = (rng.random::<f64>(), rng.random::<f64>());
        let a = 0.05 + 0.25 * rng.random::<f64>();
        let b = 0.05 + 0.25 * rng.random::<f64>();
        let th = rng.random::<f64>() * std::f64::consts::PI;
        let v = rng.random_range(-0.35..0.35);
        let ellipse = rng.random::<f64>() < 0.5;
        let (s, c) = th.sin_cos();
        for (k, px) in data.iter_mut().enumerate() {
            let (y, x) = ((k / size) as f64 / n, (k % size) as f64 / n);
            let xr = (x - cx) * c + (y - cy) * s;
            let yr = -(x - cx) * s + (y - cy) * c;
            let inside = if ellipse {
                (xr / a).powi(2) + (yr / b).powi(2) <= 1.0
            } else {
                xr.abs() < a && yr.abs() < b
            };
            if inside {
                *px += v;
            }
        }
    }
    for _ in 0..3 {
        let f = rng.random_range(4.0..20.0);
        let th = rng.random::<f64>() * std::f64::consts::PI;
        let amp = rng.random_range(0.01..0.04);
        let phase = rng.random::<f64>() * 6.0;
        let (s, c) = th.sin_cos();
        for (k, px) in data.iter_mut().enumerate() {
            let (y, x) = ((k / size) as f64 / n, (k % size) as f64 / n);
            *px += amp * (2.0 * std::f64::consts::PI * f * (x * c + y * s) + phase).sin();
        }
    }
    let img = gaussian_blur(&GrayImage::new(size, size, data)?, 0.7);
    img.map(|v| v.clamp(0.02, 0.98))
}

/// Homogeneous texture: smoothed white noise with random correlation
/// length in [0.6, 3), amplitude in [0.02, 0.12) and mean in [0.4, 0.6).
pub fn texture_patch(size: usize, seed: u64) -> Result<GrayImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corr = rng.random_range(0.6..3.0);
    let amp = rng.random_range(0.02..0.12);
    let mean = rng.random_range(0.4..0.6);
    let pad = 10;
    let big = size + 2 * pad;
    let noise: Vec<f64> = (0..big * big).map(|_| StandardNormal.sample(&mut rng)).collect();
    let smooth = gaussian_blur(&GrayImage::new(big, big, noise)?, corr);
    let mut z = Vec::with_capacity(size * size);
    for i in pad..pad + size {
        for j in pad..pad + size {
            z.push(smooth.get(i, j));
        }
    }
    let m = z.iter().sum::<f64>() / z.len() as f64;
    let sd = (z.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / z.len() as f64).sqrt();
    let data = z.iter().map(|v| (mean + amp * (v - m) / sd).clamp(0.0, 1.0)).collect();
    GrayImage::new(size, size, data)
}
