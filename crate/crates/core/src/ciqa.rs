//! Comparison-based quality index (C-IQA) and its texture-compensated
//! variant (CT-IQA).
//!
//! A positive score means the first image is better than the second.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{check_sides, gradient_field, patch_cov, patch_mean, patch_tv, GrayImage, Patch, Svd2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    C,
    Ct,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::C => "C",
            Variant::Ct => "CT",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "C" | "CIQA" => Ok(Variant::C),
            "CT" | "CTIQA" => Ok(Variant::Ct),
            other => Err(Error::invalid(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CiqaParams {
    pub n: usize,
    pub c_thresh: f64,
    pub c1: f64,
    pub variant: Variant,
    pub stride: usize,
    /// Uses `weight = -S_ind` on the noise branch and multiplies it in
    /// directly, which flips the sign of noise penalties.
    pub literal_weight_sign: bool,
}

impl Default for CiqaParams {
    fn default() -> Self {
        Self {
            n: 9,
            c_thresh: 0.12,
            c1: 4.6,
            variant: Variant::Ct,
            stride: 1,
            literal_weight_sign: false,
        }
    }
}

impl CiqaParams {
    pub fn with_variant(variant: Variant) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 || self.n.is_multiple_of(2) {
            return Err(Error::invalid(format!("patch side must be odd and >= 3, got {}", self.n)));
        }
        if !(self.c_thresh > 0.0 && self.c_thresh < 1.0) {
            return Err(Error::invalid(format!("c_thresh must lie in (0, 1), got {}", self.c_thresh)));
        }
        if !(self.c1 > 0.0) || !self.c1.is_finite() {
            return Err(Error::invalid(format!("c1 must be positive, got {}", self.c1)));
        }
        if self.stride == 0 {
            return Err(Error::invalid("stride must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContentDetection {
    pub is_stru: i8,
    pub c_ind: f64,
}

fn detect(gram: (f64, f64, f64), c_thresh: f64) -> ContentDetection {
    let c_ind = Svd2::from_gram(gram.0, gram.1, gram.2).coherence();
    ContentDetection {
        is_stru: if c_ind > c_thresh { 1 } else { -1 },
        c_ind,
    }
}

/// Decides whether `p1 - p2` holds coherent structure or noise.
pub fn content_detection(p1: &Patch, p2: &Patch, c_thresh: f64) -> Result<ContentDetection> {
    let d = p1.difference(p2)?;
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for g in &d.grads {
        a += g[0] * g[0];
        b += g[0] * g[1];
        c += g[1] * g[1];
    }
    Ok(detect((a, b, c), c_thresh))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contribution {
    pub ctri: f64,
    pub ctri1: f64,
    pub ctri2: f64,
}

fn luminance_floor(side: usize) -> f64 {
    1.0 / (side * side) as f64
}

/// Which input contributes more to the difference patch, luminance normalized.
pub fn contribution(p1: &Patch, p2: &Patch) -> Result<Contribution> {
    check_sides(p1, p2)?;
    let d: Vec<f64> = p1.values.iter().zip(&p2.values).map(|(a, b)| a - b).collect();
    let neg: Vec<f64> = d.iter().map(|v| -v).collect();
    let ctri1 = patch_cov(&p1.values, &d)?;
    let ctri2 = patch_cov(&p2.values, &neg)?;
    let mp = (0.5 * (patch_mean(p1) + patch_mean(p2))).max(luminance_floor(p1.side));
    Ok(Contribution {
        ctri: (ctri1 - ctri2) / mp,
        ctri1,
        ctri2,
    })
}

/// Mean gradient magnitude over mean luminance (floored at `1/n²`).
pub fn texture_index(p: &Patch) -> f64 {
    let m = (p.side * p.side) as f64;
    patch_tv(p) / (m * patch_mean(p).max(luminance_floor(p.side)))
}

/// Lower bound on the texture index on the noise branch, keeping the
/// smoothness weight finite on perfectly flat patches.
pub const TEXTURE_FLOOR: f64 = 1e-6;

/// `ln(1 + 1/(c1 T))`; infinite when `T = 0`.
pub fn smoothness_index(t: f64, c1: f64) -> f64 {
    (1.0 / (c1 * t)).ln_1p()
}

/// Weight applied to `is_stru * ctri`: 1 on the structure branch and
/// `S_ind` on the noise branch (`-S_ind` in literal mode).
pub fn texture_compensation(p1: &Patch, p2: &Patch, is_stru: i8, c1: f64) -> Result<f64> {
    check_sides(p1, p2)?;
    Ok(weight_from_textures(texture_index(p1), texture_index(p2), is_stru, c1, false))
}

fn weight_from_textures(t1: f64, t2: f64, is_stru: i8, c1: f64, literal: bool) -> f64 {
    if is_stru > 0 {
        return 1.0;
    }
    let s = smoothness_index(t1.min(t2).max(TEXTURE_FLOOR), c1);
    if literal {
        -s
    } else {
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchDiagnostics {
    pub is_stru: i8,
    pub c_ind: f64,
    pub ctri: f64,
    pub weight: f64,
}

fn combine(det: ContentDetection, ctri: f64, t1: f64, t2: f64, params: &CiqaParams) -> (f64, PatchDiagnostics) {
    let s = det.is_stru as f64;
    let (value, weight) = match params.variant {
        Variant::C => (s * ctri, 1.0),
        Variant::Ct => {
            let w = weight_from_textures(t1, t2, det.is_stru, params.c1, params.literal_weight_sign);
            let wv = if params.literal_weight_sign { w } else { w.abs() };
            (s * ctri * wv, w)
        }
    };
    (
        value,
        PatchDiagnostics {
            is_stru: det.is_stru,
            c_ind: det.c_ind,
            ctri,
            weight,
        },
    )
}

/// Local score from patches. Reference path for [`compare`].
pub fn local_score(p1: &Patch, p2: &Patch, params: &CiqaParams) -> Result<f64> {
    Ok(local_score_diag(p1, p2, params)?.0)
}

pub fn local_score_diag(p1: &Patch, p2: &Patch, params: &CiqaParams) -> Result<(f64, PatchDiagnostics)> {
    let det = content_detection(p1, p2, params.c_thresh)?;
    let ctri = contribution(p1, p2)?.ctri;
    Ok(combine(det, ctri, texture_index(p1), texture_index(p2), params))
}

/// Local scores on the grid of interior patch centers.
#[derive(Clone, Debug, PartialEq)]
pub struct QualityMap {
    /// Map columns and rows.
    pub cols: usize,
    pub rows: usize,
    /// Pixel coordinate of the first center in each axis.
    pub origin: usize,
    pub stride: usize,
    pub values: Vec<f64>,
}

impl QualityMap {
    /// Pixel coordinates `(row, col)` of map entry `k`.
    pub fn center(&self, k: usize) -> (usize, usize) {
        (
            self.origin + (k / self.cols) * self.stride,
            self.origin + (k % self.cols) * self.stride,
        )
    }

    pub fn range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Affine rescale to [0, 1] (max to 1, min to 0); constant maps become 0.
    pub fn to_image(&self) -> GrayImage {
        let (lo, hi) = self.range();
        let span = hi - lo;
        let data = self
            .values
            .iter()
            .map(|&v| if span > 0.0 { (v - lo) / span } else { 0.0 })
            .collect();
        GrayImage::new(self.cols, self.rows, data).expect("map dimensions are positive")
    }

    /// Writes the rescaled map as PGM plus a `<path>.scale` sidecar holding
    /// the value range.
    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        crate::io::write_pgm(path, &self.to_image())?;
        let (lo, hi) = self.range();
        let mut side = path.as_os_str().to_owned();
        side.push(".scale");
        let text = format!(
            "min={}\nmax={}\norigin={}\nstride={}\n",
            crate::fmt_sig(lo),
            crate::fmt_sig(hi),
            self.origin,
            self.stride
        );
        fs::write(&side, text).map_err(|e| Error::io(side, e))
    }

    /// CSV with header `i,j,value`, one line per map entry.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::with_capacity(self.values.len() * 24);
        out.push_str("i,j,value\n");
        for (k, v) in self.values.iter().enumerate() {
            let (i, j) = self.center(k);
            out.push_str(&format!("{i},{j},{}\n", crate::fmt_sig(*v)));
        }
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonResult {
    pub score: f64,
    pub map: QualityMap,
    pub diagnostics: Vec<PatchDiagnostics>,
}

// Per-pixel quantities whose window sums determine every local score.
const A: usize = 0;
const B: usize = 1;
const D: usize = 2;
const AD: usize = 3;
const BND: usize = 4;
const GXX: usize = 5;
const GXY: usize = 6;
const GYY: usize = 7;
const TA: usize = 8;
const TB: usize = 9;
const NQ: usize = 10;

fn pixel_quantities(i1: &GrayImage, i2: &GrayImage) -> Vec<Vec<f64>> {
    let d = i1.zip_map(i2, |a, b| a - b).expect("shapes checked");
    let ga = gradient_field(i1);
    let gb = gradient_field(i2);
    let gd = gradient_field(&d);
    let (a, b, dd) = (i1.data(), i2.data(), d.data());
    let len = a.len();
    let mut q: Vec<Vec<f64>> = (0..NQ).map(|_| Vec::with_capacity(len)).collect();
    for k in 0..len {
        q[A].push(a[k]);
        q[B].push(b[k]);
        q[D].push(dd[k]);
        q[AD].push(a[k] * dd[k]);
        q[BND].push(b[k] * -dd[k]);
        q[GXX].push(gd.gx[k] * gd.gx[k]);
        q[GXY].push(gd.gx[k] * gd.gy[k]);
        q[GYY].push(gd.gy[k] * gd.gy[k]);
        q[TA].push(ga.gx[k].hypot(ga.gy[k]));
        q[TB].push(gb.gx[k].hypot(gb.gy[k]));
    }
    q
}

fn map_row(
    q: &[Vec<f64>],
    width: usize,
    ci: usize,
    cols: &[usize],
    params: &CiqaParams,
) -> Vec<(f64, PatchDiagnostics)> {
    let n = params.n;
    let r = n / 2;
    let m = (n * n) as f64;
    let floor = luminance_floor(n);
    // Horizontal window sums for the n rows of this band, per column center.
    let mut s = vec![[0.0f64; NQ]; cols.len()];
    for row in ci - r..=ci + r {
        let base = row * width;
        for (c, &cj) in cols.iter().enumerate() {
            let acc = &mut s[c];
            for (qi, plane) in q.iter().enumerate() {
                let mut t = 0.0;
                for v in &plane[base + cj - r..=base + cj + r] {
                    t += v;
                }
                acc[qi] += t;
            }
        }
    }
    s.iter()
        .map(|w| {
            let det = detect((w[GXX], w[GXY], w[GYY]), params.c_thresh);
            let ctri1 = (w[AD] - w[A] * w[D] / m) / (m - 1.0);
            let ctri2 = (w[BND] - w[B] * -w[D] / m) / (m - 1.0);
            let (ma, mb) = (w[A] / m, w[B] / m);
            let mp = (0.5 * (ma + mb)).max(floor);
            let ctri = (ctri1 - ctri2) / mp;
            let t1 = w[TA] / (m * ma.max(floor));
            let t2 = w[TB] / (m * mb.max(floor));
            combine(det, ctri, t1, t2, params)
        })
        .collect()
}

fn compare_impl(i1: &GrayImage, i2: &GrayImage, params: &CiqaParams, parallel: bool) -> Result<ComparisonResult> {
    params.validate()?;
    i1.check_same_shape(i2)?;
    let (w, h, n) = (i1.width(), i1.height(), params.n);
    if w < n || h < n {
        return Err(Error::invalid(format!(
            "images of {w}x{h} are smaller than the {n}x{n} patch"
        )));
    }
    let r = n / 2;
    let centers = |len: usize| -> Vec<usize> { (r..len - r).step_by(params.stride).collect() };
    let (rows, cols) = (centers(h), centers(w));
    let q = pixel_quantities(i1, i2);
    let per_row: Vec<Vec<(f64, PatchDiagnostics)>> = if parallel {
        rows.par_iter().map(|&ci| map_row(&q, w, ci, &cols, params)).collect()
    } else {
        rows.iter().map(|&ci| map_row(&q, w, ci, &cols, params)).collect()
    };
    let mut values = Vec::with_capacity(rows.len() * cols.len());
    let mut diagnostics = Vec::with_capacity(rows.len() * cols.len());
    for row in per_row {
        for (v, d) in row {
            values.push(v);
            diagnostics.push(d);
        }
    }
    let mut total = 0.0;
    for v in &values {
        total += v;
    }
    Ok(ComparisonResult {
        score: total / (w * h) as f64,
        map: QualityMap {
            cols: cols.len(),
            rows: rows.len(),
            origin: r,
            stride: params.stride,
            values,
        },
        diagnostics,
    })
}

/// Compares two images of the same scene.
pub fn compare(i1: &GrayImage, i2: &GrayImage, params: &CiqaParams) -> Result<ComparisonResult> {
    compare_impl(i1, i2, params, true)
}

/// Single-threaded [`compare`]; produces a bitwise identical result.
pub fn compare_serial(i1: &GrayImage, i2: &GrayImage, params: &CiqaParams) -> Result<ComparisonResult> {
    compare_impl(i1, i2, params, false)
}

/// Scalar score of [`compare`].
pub fn score(i1: &GrayImage, i2: &GrayImage, params: &CiqaParams) -> Result<f64> {
    Ok(compare(i1, i2, params)?.score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::gradient_field;

    fn patch(img: &GrayImage, c: (usize, usize)) -> Patch {
        Patch::extract(img, &gradient_field(img), c, 9).unwrap()
    }

    #[test]
    fn step_difference_is_structure() {
        let base = GrayImage::from_fn(15, 15, |i, j| 0.3 + 0.01 * ((i * 7 + j * 3) % 5) as f64).unwrap();
        let stepped = base.zip_map(&GrayImage::from_fn(15, 15, |_, j| if j >= 7 { 0.2 } else { 0.0 }).unwrap(), |a, b| a + b).unwrap();
        let det = content_detection(&patch(&stepped, (7, 7)), &patch(&base, (7, 7)), 0.12).unwrap();
        assert_eq!(det.is_stru, 1);
        assert!((det.c_ind - 1.0).abs() < 1e-9);
    }

    #[test]
    fn identical_patches() {
        let img = GrayImage::from_fn(11, 11, |i, j| (i as f64 * 0.05 + j as f64 * 0.02).sin().abs()).unwrap();
        let p = patch(&img, (5, 5));
        let det = content_detection(&p, &p, 0.12).unwrap();
        assert_eq!((det.is_stru, det.c_ind), (-1, 0.0));
        assert_eq!(contribution(&p, &p).unwrap().ctri, 0.0);
        for v in [Variant::C, Variant::Ct] {
            assert_eq!(local_score(&p, &p, &CiqaParams::with_variant(v)).unwrap(), 0.0);
        }
    }

    #[test]
    fn smoothness_at_reciprocal() {
        assert!((smoothness_index(1.0 / 4.6, 4.6) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(smoothness_index(1e300, 4.6) < 1e-299);
    }

    #[test]
    fn params_validation() {
        let bad = [
            CiqaParams { n: 8, ..Default::default() },
            CiqaParams { c_thresh: 1.0, ..Default::default() },
            CiqaParams { c1: 0.0, ..Default::default() },
            CiqaParams { stride: 0, ..Default::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err());
        }
    }
}
