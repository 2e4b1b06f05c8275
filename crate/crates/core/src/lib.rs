//! Comparison-based no-reference image quality assessment and
//! regularization parameter selection.
//!
//! [`ciqa::compare`] scores two degraded images of the same scene against
//! each other; a positive score means the first is better. The selection
//! and trimming modules use that comparator to rank image series and to cut
//! losing candidates early in a sweep of Split Bregman reconstructions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ciqa;
pub mod config;
pub mod distortions;
pub mod error;
pub mod image;
pub mod io;
pub mod metricq;
pub mod recon;
pub mod selection;
pub mod ssim;
pub mod synthetic;
pub mod trimming;

pub use ciqa::{compare, CiqaParams, ComparisonResult, QualityMap, Variant};
pub use error::{Error, Result};
pub use image::{GradientField, GrayImage, Patch, Svd2};

/// Formats with 9 significant digits, trimming trailing zeros.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let e = v.abs().log10().floor() as i32;
    if (-5..=9).contains(&e) {
        let prec = (8 - e).max(0) as usize;
        let s = format!("{v:.prec$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{v:.8e}")
    }
}
