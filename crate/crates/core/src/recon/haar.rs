//! Single-level orthonormal 2-D Haar transform.
//!
//! Coefficients are stored as four quarter-size planes, LL then LH, HL, HH,
//! each row-major with `(width/2) x (height/2)` entries.

use crate::error::{Error, Result};

pub fn check_even(width: usize, height: usize) -> Result<()> {
    if !width.is_multiple_of(2) || !height.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "Haar transform needs even dimensions, got {width}x{height}"
        )));
    }
    Ok(())
}

/// `W x`.
pub fn forward(x: &[f64], width: usize, height: usize) -> Vec<f64> {
    let (hw, hh) = (width / 2, height / 2);
    let q = hw * hh;
    let mut out = vec![0.0; width * height];
    for i in 0..hh {
        for j in 0..hw {
            let a = x[2 * i * width + 2 * j];
            let b = x[2 * i * width + 2 * j + 1];
            let c = x[(2 * i + 1) * width + 2 * j];
            let d = x[(2 * i + 1) * width + 2 * j + 1];
            let k = i * hw + j;
            out[k] = 0.5 * (a + b + c + d);
            out[q + k] = 0.5 * (a - b + c - d);
            out[2 * q + k] = 0.5 * (a + b - c - d);
            out[3 * q + k] = 0.5 * (a - b - c + d);
        }
    }
    out
}

/// `Wᵀ c`, which is also the inverse.
pub fn adjoint(c: &[f64], width: usize, height: usize) -> Vec<f64> {
    let (hw, hh) = (width / 2, height / 2);
    let q = hw * hh;
    let mut out = vec![0.0; width * height];
    for i in 0..hh {
        for j in 0..hw {
            let k = i * hw + j;
            let (ll, lh, hl, hh_) = (c[k], c[q + k], c[2 * q + k], c[3 * q + k]);
            out[2 * i * width + 2 * j] = 0.5 * (ll + lh + hl + hh_);
            out[2 * i * width + 2 * j + 1] = 0.5 * (ll - lh + hl - hh_);
            out[(2 * i + 1) * width + 2 * j] = 0.5 * (ll + lh - hl - hh_);
            out[(2 * i + 1) * width + 2 * j + 1] = 0.5 * (ll - lh - hl + hh_);
        }
    }
    out
}

/// Index range of the detail coefficients inside a coefficient vector.
pub fn detail_range(width: usize, height: usize) -> std::ops::Range<usize> {
    (width / 2) * (height / 2)..width * height
}
