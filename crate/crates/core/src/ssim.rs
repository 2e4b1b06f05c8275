//! Full-reference SSIM with a Gaussian window.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<()> {
        if self.window.is_multiple_of(2) || self.window == 0 {
            return Err(Error::invalid("SSIM window side must be odd"));
        }
        if !(self.k1 > 0.0 && self.k2 > 0.0 && self.sigma > 0.0 && self.dynamic_range > 0.0) {
            return Err(Error::invalid("SSIM constants must be positive"));
        }
        Ok(())
    }

    /// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
    pub fn kernel(&self) -> Vec<f64> {
        let r = (self.window / 2) as f64;
        let mut k: Vec<f64> = (0..self.window)
            .map(|i| {
                let x = i as f64 - r;
                (-x * x / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let s: f64 = k.iter().sum();
        k.iter_mut().for_each(|v| *v /= s);
        k
    }
}

/// Local SSIM values over every fully contained window, row-major,
/// with dimensions `(width - window + 1) x (height - window + 1)`.
pub fn ssim_map(a: &GrayImage, b: &GrayImage, params: &SsimParams) -> Result<(usize, usize, Vec<f64>)> {
    params.validate()?;
    a.check_same_shape(b)?;
    let (w, h, win) = (a.width(), a.height(), params.window);
    if w < win || h < win {
        return Err(Error::invalid(format!(
            "SSIM needs at least {win}x{win} pixels, got {w}x{h}"
        )));
    }
    let k = params.kernel();
    let (ow, oh) = (w - win + 1, h - win + 1);
    let (da, db) = (a.data(), b.data());

    // Horizontal pass of the five moment images.
    let horiz: Vec<[f64; 5]> = (0..h)
        .into_par_iter()
        .flat_map_iter(|i| {
            let row = i * w;
            let k = &k;
            (0..ow).map(move |j| {
                let mut m = [0.0; 5];
                for (t, &kt) in k.iter().enumerate() {
                    let x = da[row + j + t];
                    let y = db[row + j + t];
                    m[0] += kt * x;
                    m[1] += kt * y;
                    m[2] += kt * x * x;
                    m[3] += kt * y * y;
                    m[4] += kt * x * y;
                }
                m
            })
        })
        .collect();

    let c1 = (params.k1 * params.dynamic_range).powi(2);
    let c2 = (params.k2 * params.dynamic_range).powi(2);
    let map: Vec<f64> = (0..oh)
        .into_par_iter()
        .flat_map_iter(|i| {
            let horiz = &horiz;
            let k = &k;
            (0..ow).map(move |j| {
                let mut m = [0.0; 5];
                for (t, &kt) in k.iter().enumerate() {
                    let src = &horiz[(i + t) * ow + j];
                    for c in 0..5 {
                        m[c] += kt * src[c];
                    }
                }
                let (mx, my) = (m[0], m[1]);
                let vx = m[2] - mx * mx;
                let vy = m[3] - my * my;
                let cxy = m[4] - mx * my;
                ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
            })
        })
        .collect();
    Ok((ow, oh, map))
}

/// Mean local SSIM.
pub fn ssim(a: &GrayImage, b: &GrayImage, params: &SsimParams) -> Result<f64> {
    let (_, _, map) = ssim_map(a, b, params)?;
    Ok(map.iter().sum::<f64>() / map.len() as f64)
}

/// SSIM with default parameters.
pub fn ssim_default(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    ssim(a, b, &SsimParams::default())
}
