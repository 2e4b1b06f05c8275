//! Analytic ellipse phantoms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Additive ellipse: value, semi-axes, center and rotation in degrees, on
/// the `[-1, 1]²` square with y pointing up.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipse {
    pub value: f64,
    pub a: f64,
    pub b: f64,
    pub x0: f64,
    pub y0: f64,
    pub phi_deg: f64,
}

const fn e(value: f64, a: f64, b: f64, x0: f64, y0: f64, phi_deg: f64) -> Ellipse {
    Ellipse { value, a, b, x0, y0, phi_deg }
}

/// Modified (contrast-enhanced) Shepp-Logan ellipses.
pub const SHEPP_LOGAN: [Ellipse; 10] = [
    e(1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    e(-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    e(-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    e(-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    e(0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    e(0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    e(0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    e(0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    e(0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    e(0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// Rasterizes additive ellipses at pixel centers, clipped to [0, 1].
pub fn render(size: usize, ellipses: &[Ellipse]) -> Result<GrayImage> {
    if size < 2 {
        return Err(Error::invalid("phantom size must be at least 2"));
    }
    let n = size as f64;
    GrayImage::from_fn(size, size, |i, j| {
        let x = (2.0 * j as f64 - (n - 1.0)) / n;
        let y = ((n - 1.0) - 2.0 * i as f64) / n;
        let mut v = 0.0;
        for el in ellipses {
            let (s, c) = el.phi_deg.to_radians().sin_cos();
            let xr = (x - el.x0) * c + (y - el.y0) * s;
            let yr = -(x - el.x0) * s + (y - el.y0) * c;
            if (xr / el.a).powi(2) + (yr / el.b).powi(2) <= 1.0 {
                v += el.value;
            }
        }
        v.clamp(0.0, 1.0)
    })
}

pub fn shepp_logan(size: usize) -> Result<GrayImage> {
    render(size, &SHEPP_LOGAN)
}

/// Head-like phantom: skull ring, soft-tissue interior and 4 to 7 random
/// inclusions.
pub fn random_phantom(size: usize, seed: u64) -> Result<GrayImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ells = vec![e(0.8, 0.85, 0.95, 0.0, 0.0, 0.0), e(-0.5, 0.78, 0.88, 0.0, 0.0, 0.0)];
    for _ in 0..rng.random_range(4..8) {
        ells.push(Ellipse {
            value: rng.random_range(-0.2..0.5),
            a: rng.random_range(0.05..0.3),
            b: rng.random_range(0.05..0.3),
            x0: rng.random_range(-0.45..0.45),
            y0: rng.random_range(-0.45..0.45),
            phi_deg: rng.random_range(0.0..180.0),
        });
    }
    render(size, &ells)
}

/// Phantom `k` of the test suite: Shepp-Logan for 0, random otherwise.
pub fn suite_phantom(size: usize, k: u64) -> Result<GrayImage> {
    if k == 0 {
        shepp_logan(size)
    } else {
        random_phantom(size, k)
    }
}
