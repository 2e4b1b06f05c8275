//! Seeded generators for the four distortion families and calibrated ladders.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::selection::DistortionLadder;
use crate::ssim::{ssim, SsimParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DistortionKind {
    /// Additive i.i.d. Gaussian noise, level = standard deviation.
    IidGn,
    /// Gaussian noise with variance `level * intensity`.
    IdGn,
    /// Gaussian blur, level = kernel standard deviation in pixels.
    Gb,
    /// Bilateral filter with parameter k.
    Bb,
}

impl DistortionKind {
    pub const ALL: [DistortionKind; 4] = [Self::IidGn, Self::IdGn, Self::Gb, Self::Bb];

    /// Largest level searched when calibrating a ladder.
    pub fn max_level(self) -> f64 {
        match self {
            Self::IidGn => 1.0,
            Self::IdGn => 1.0,
            Self::Gb => 20.0,
            Self::Bb => 10.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::IidGn => "iid_gn",
            Self::IdGn => "id_gn",
            Self::Gb => "gb",
            Self::Bb => "bb",
        }
    }
}

impl fmt::Display for DistortionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistortionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "iid_gn" | "iid" => Ok(Self::IidGn),
            "id_gn" | "id" => Ok(Self::IdGn),
            "gb" | "blur" => Ok(Self::Gb),
            "bb" | "bilateral" => Ok(Self::Bb),
            other => Err(Error::invalid(format!("unknown distortion kind {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistortionSpec {
    pub kind: DistortionKind,
    pub level: f64,
    pub seed: u64,
}

impl DistortionSpec {
    pub fn apply(&self, img: &GrayImage) -> Result<GrayImage> {
        if !(self.level >= 0.0) || !self.level.is_finite() {
            return Err(Error::invalid(format!(
                "distortion level must be finite and >= 0, got {}",
                self.level
            )));
        }
        Ok(match self.kind {
            DistortionKind::IidGn => iid_gaussian_noise(img, self.level, self.seed),
            DistortionKind::IdGn => intensity_dependent_noise(img, self.level, self.seed),
            DistortionKind::Gb => gaussian_blur(img, self.level),
            DistortionKind::Bb => bilateral_filter(img, self.level),
        })
    }
}

fn noise_field(len: usize, seed: u64) -> impl Iterator<Item = f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(move |_| StandardNormal.sample(&mut rng))
}

fn rebuild(img: &GrayImage, data: Vec<f64>) -> GrayImage {
    GrayImage::new(img.width(), img.height(), data).expect("shape preserved")
}

/// `clamp(img + N(0, sigma^2), 0, 1)`.
pub fn iid_gaussian_noise(img: &GrayImage, sigma: f64, seed: u64) -> GrayImage {
    if sigma == 0.0 {
        return img.clone();
    }
    let data = img
        .data()
        .iter()
        .zip(noise_field(img.len(), seed))
        .map(|(&p, z)| (p + sigma * z).clamp(0.0, 1.0))
        .collect();
    rebuild(img, data)
}

/// Noise with per-pixel variance `k * p`, clamped to [0, 1].
pub fn intensity_dependent_noise(img: &GrayImage, k: f64, seed: u64) -> GrayImage {
    if k == 0.0 {
        return img.clone();
    }
    let data = img
        .data()
        .iter()
        .zip(noise_field(img.len(), seed))
        .map(|(&p, z)| (p + (k * p.max(0.0)).sqrt() * z).clamp(0.0, 1.0))
        .collect();
    rebuild(img, data)
}

pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as usize;
    let mut k: Vec<f64> = (0..=2 * r)
        .map(|i| {
            let x = i as f64 - r as f64;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur, radius `ceil(3 sigma)`, replicated borders.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    if !(sigma > 1e-6) {
        return img.clone();
    }
    let k = gaussian_kernel(sigma);
    let r = k.len() / 2;
    let (w, h) = (img.width(), img.height());
    let src = img.data();
    let clampi = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let horiz: Vec<f64> = (0..h)
        .into_par_iter()
        .flat_map_iter(|i| {
            let k = &k;
            (0..w).map(move |j| {
                k.iter()
                    .enumerate()
                    .map(|(t, kt)| kt * src[i * w + clampi(j as isize + t as isize - r as isize, w)])
                    .sum::<f64>()
            })
        })
        .collect();
    let out: Vec<f64> = (0..h)
        .into_par_iter()
        .flat_map_iter(|i| {
            let (k, horiz) = (&k, &horiz);
            (0..w).map(move |j| {
                k.iter()
                    .enumerate()
                    .map(|(t, kt)| kt * horiz[clampi(i as isize + t as isize - r as isize, h) * w + j])
                    .sum::<f64>()
            })
        })
        .collect();
    rebuild(img, out)
}

/// Bilateral filter with range std `0.1 k`, spatial std `3 k` and window
/// radius `ceil(6 k)`, replicated borders.
pub fn bilateral_filter(img: &GrayImage, k: f64) -> GrayImage {
    if !(k > 0.0) {
        return img.clone();
    }
    let sr = 0.1 * k;
    let sd = 3.0 * k;
    let rad = (2.0 * sd).ceil() as isize;
    let side = (2 * rad + 1) as usize;
    let mut spatial = vec![0.0; side * side];
    for di in -rad..=rad {
        for dj in -rad..=rad {
            let d2 = (di * di + dj * dj) as f64;
            spatial[((di + rad) as usize) * side + (dj + rad) as usize] = (-d2 / (2.0 * sd * sd)).exp();
        }
    }
    let (w, h) = (img.width() as isize, img.height() as isize);
    let src = img.data();
    let inv2r = 1.0 / (2.0 * sr * sr);
    let out: Vec<f64> = (0..h)
        .into_par_iter()
        .flat_map_iter(|i| {
            let spatial = &spatial;
            (0..w).map(move |j| {
                let c = src[(i * w + j) as usize];
                let (mut num, mut den) = (0.0, 0.0);
                for di in -rad..=rad {
                    let ii = (i + di).clamp(0, h - 1);
                    let srow = ((di + rad) as usize) * side;
                    for dj in -rad..=rad {
                        let jj = (j + dj).clamp(0, w - 1);
                        let v = src[(ii * w + jj) as usize];
                        let wgt = spatial[srow + (dj + rad) as usize] * (-(v - c) * (v - c) * inv2r).exp();
                        num += wgt * v;
                        den += wgt;
                    }
                }
                num / den
            })
        })
        .collect();
    rebuild(img, out)
}

/// Bisects the level of `kind` so that SSIM against `img` lands in
/// `target ± 0.01`, then spaces `count` levels uniformly in `[0, level]`.
/// With `count == 1` only the calibrated endpoint is returned.
///
/// All noise levels share `seed`, so a noise ladder scales one field.
pub fn make_ladder(
    img: &GrayImage,
    kind: DistortionKind,
    target_ssim: f64,
    count: usize,
    seed: u64,
) -> Result<DistortionLadder> {
    let level = calibrate_level(img, kind, target_ssim, seed)?;
    ladder_at(img, kind, level, count, seed)
}

/// Ladder of `count` images at levels `linspace(0, level, count)`.
pub fn ladder_at(img: &GrayImage, kind: DistortionKind, level: f64, count: usize, seed: u64) -> Result<DistortionLadder> {
    if count == 0 {
        return Err(Error::invalid("ladder count must be positive"));
    }
    let levels: Vec<f64> = if count == 1 {
        vec![level]
    } else {
        (0..count).map(|i| level * i as f64 / (count - 1) as f64).collect()
    };
    let images = levels
        .iter()
        .map(|&l| DistortionSpec { kind, level: l, seed }.apply(img))
        .collect::<Result<Vec<_>>>()?;
    DistortionLadder::new(images, levels)
}

/// Level at which `SSIM(distort(img), img)` falls within `target ± 0.01`.
pub fn calibrate_level(img: &GrayImage, kind: DistortionKind, target_ssim: f64, seed: u64) -> Result<f64> {
    if !(target_ssim > 0.0 && target_ssim < 1.0) {
        return Err(Error::invalid("target SSIM must lie in (0, 1)"));
    }
    let params = SsimParams::default();
    let score = |level: f64| -> Result<f64> {
        let d = DistortionSpec { kind, level, seed }.apply(img)?;
        ssim(&d, img, &params)
    };
    let tol = 0.01;
    let (mut lo, mut hi) = (0.0, kind.max_level());
    let s_hi = score(hi)?;
    if s_hi > target_ssim + tol {
        return Err(Error::invalid(format!(
            "{kind}: target SSIM {target_ssim} unreachable, achieved range [{s_hi:.4}, 1] for levels [0, {hi}]"
        )));
    }
    if (s_hi - target_ssim).abs() <= tol {
        return Ok(hi);
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let s = score(mid)?;
        if (s - target_ssim).abs() <= tol {
            return Ok(mid);
        }
        if s > target_ssim {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numerical(format!(
        "{kind}: bisection did not reach SSIM {target_ssim} ± {tol}"
    )))
}
