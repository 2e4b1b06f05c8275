//! Single-image local content and coherence indices.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{gradient_field, GrayImage, Svd2};

/// 99.9th percentile of the coherence index over 9x9 white-noise patches,
/// from [`calibrate_tau`] with 200 000 trials and seed 0.
pub const DEFAULT_TAU: f64 = 0.2444;

#[derive(Clone, Debug, PartialEq)]
pub struct MetricQResult {
    pub width: usize,
    pub height: usize,
    /// Image content index per pixel, 0 on the margin.
    pub q_map: Vec<f64>,
    /// Coherence index per pixel, 0 on the margin.
    pub r_map: Vec<f64>,
    pub aq: f64,
}

/// `s1 (s1 - s2) / (s1 + s2)`.
pub fn image_content_index(svd: &Svd2) -> f64 {
    svd.s1 * svd.coherence()
}

/// `(s1 - s2) / (s1 + s2)`.
pub fn coherence_index(svd: &Svd2) -> f64 {
    svd.coherence()
}

/// Mean of Q over pixels whose patch has R above `tau`, normalized by the
/// full image size.
pub fn overall_aq(img: &GrayImage, n: usize, tau: f64) -> Result<MetricQResult> {
    if n == 0 || n.is_multiple_of(2) {
        return Err(Error::invalid(format!("patch side must be odd, got {n}")));
    }
    let (w, h) = (img.width(), img.height());
    if w < n || h < n {
        return Err(Error::invalid(format!("image {w}x{h} smaller than patch {n}x{n}")));
    }
    let g = gradient_field(img);
    let r = n / 2;
    let rows: Vec<Vec<(f64, f64)>> = (0..h)
        .into_par_iter()
        .map(|i| {
            if i < r || i + r >= h {
                return vec![(0.0, 0.0); w];
            }
            (0..w)
                .map(|j| {
                    if j < r || j + r >= w {
                        return (0.0, 0.0);
                    }
                    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
                    for ii in i - r..=i + r {
                        for jj in j - r..=j + r {
                            let [x, y] = g.at(ii, jj);
                            a += x * x;
                            b += x * y;
                            c += y * y;
                        }
                    }
                    let svd = Svd2::from_gram(a, b, c);
                    (image_content_index(&svd), coherence_index(&svd))
                })
                .collect()
        })
        .collect();
    let mut q_map = Vec::with_capacity(w * h);
    let mut r_map = Vec::with_capacity(w * h);
    let mut total = 0.0;
    for (q, rr) in rows.into_iter().flatten() {
        if rr > tau {
            total += q;
        }
        q_map.push(q);
        r_map.push(rr);
    }
    Ok(MetricQResult {
        width: w,
        height: h,
        q_map,
        r_map,
        aq: total / (w * h) as f64,
    })
}

/// Coherence indices of `trials` white-noise patches of side `n`, with
/// gradients taken away from any border.
pub fn noise_coherence_samples(n: usize, trials: usize, seed: u64) -> Vec<f64> {
    let side = n + 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let data: Vec<f64> = (0..side * side).map(|_| StandardNormal.sample(&mut rng)).collect();
        let img = GrayImage::new(side, side, data).expect("finite noise");
        let g = gradient_field(&img);
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for i in 1..=n {
            for j in 1..=n {
                let [x, y] = g.at(i, j);
                a += x * x;
                b += x * y;
                c += y * y;
            }
        }
        out.push(Svd2::from_gram(a, b, c).coherence());
    }
    out
}

/// 99.9th percentile of the coherence index over white-noise patches.
pub fn calibrate_tau(n: usize, trials: usize, seed: u64) -> f64 {
    let mut s = noise_coherence_samples(n, trials, seed);
    s.sort_by(f64::total_cmp);
    let k = ((s.len() as f64) * 0.999).ceil() as usize;
    s[k.clamp(1, s.len()) - 1]
}
