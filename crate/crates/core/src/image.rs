//! Grayscale image container, gradients and per-patch statistics.

use crate::error::{Error, Result};

/// Row-major grayscale image with nominal luminance range [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite pixel at row {}, col {}",
                pos / width,
                pos % width
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds an image from `f(row, col)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for i in 0..height {
            for j in 0..width {
                data.push(f(i, j));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn same_shape(&self, other: &GrayImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_same_shape(&self, other: &GrayImage) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "image size mismatch: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    /// Applies `f` to every pixel. Fails if the result is not finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.width, self.height, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Pixelwise combination of two images of equal shape.
    pub fn zip_map(&self, other: &GrayImage, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::new(self.width, self.height, data)
    }

    pub fn clamped(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Isotropic total variation using the image-core gradient scheme.
    pub fn total_variation(&self) -> f64 {
        let g = gradient_field(self);
        g.gx.iter().zip(&g.gy).map(|(x, y)| x.hypot(*y)).sum()
    }
}

/// Per-pixel x and y gradients, same shape as the source image.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl GradientField {
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> [f64; 2] {
        let k = row * self.width + col;
        [self.gx[k], self.gy[k]]
    }
}

/// Central differences with replicated borders.
///
/// `gx(i,j) = (img(i, j+1) - img(i, j-1)) / 2` where out-of-range indices
/// clamp to the nearest edge, and likewise for `gy` along rows.
pub fn gradient_field(img: &GrayImage) -> GradientField {
    let (w, h) = (img.width, img.height);
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for i in 0..h {
        let up = i.saturating_sub(1);
        let down = (i + 1).min(h - 1);
        for j in 0..w {
            let left = j.saturating_sub(1);
            let right = (j + 1).min(w - 1);
            gx[i * w + j] = 0.5 * (img.get(i, right) - img.get(i, left));
            gy[i * w + j] = 0.5 * (img.get(down, j) - img.get(up, j));
        }
    }
    GradientField {
        width: w,
        height: h,
        gx,
        gy,
    }
}

/// Singular values and right singular vectors of an `m x 2` gradient matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Svd2 {
    pub s1: f64,
    pub s2: f64,
    /// Dominant gradient direction.
    pub v1: [f64; 2],
    /// Edge direction, orthogonal to `v1`.
    pub v2: [f64; 2],
}

impl Svd2 {
    /// Closed-form decomposition from the entries of the Gram matrix
    /// `[[a, b], [b, c]] = GᵀG`.
    pub fn from_gram(a: f64, b: f64, c: f64) -> Svd2 {
        let half_tr = 0.5 * (a + c);
        let half_diff = 0.5 * (a - c);
        let rad = half_diff.hypot(b);
        let l1 = half_tr + rad;
        let l2 = (half_tr - rad).max(0.0);
        if !(l1 > 0.0) {
            return Svd2 {
                s1: 0.0,
                s2: 0.0,
                v1: [1.0, 0.0],
                v2: [0.0, 1.0],
            };
        }
        // Both (l1 - c, b) and (b, l1 - a) span the eigenvector; pick the
        // better conditioned one.
        let p = [l1 - c, b];
        let q = [b, l1 - a];
        let np = p[0].hypot(p[1]);
        let nq = q[0].hypot(q[1]);
        let v1 = if np == 0.0 && nq == 0.0 {
            [1.0, 0.0]
        } else if np >= nq {
            [p[0] / np, p[1] / np]
        } else {
            [q[0] / nq, q[1] / nq]
        };
        Svd2 {
            s1: l1.sqrt(),
            s2: l2.sqrt().min(l1.sqrt()),
            v1,
            v2: [-v1[1], v1[0]],
        }
    }

    pub fn from_gradients(grads: &[[f64; 2]]) -> Svd2 {
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for g in grads {
            a += g[0] * g[0];
            b += g[0] * g[1];
            c += g[1] * g[1];
        }
        Svd2::from_gram(a, b, c)
    }

    /// `(s1 - s2) / (s1 + s2)`, zero for the zero matrix.
    pub fn coherence(&self) -> f64 {
        let sum = self.s1 + self.s2;
        if sum > 0.0 {
            (self.s1 - self.s2) / sum
        } else {
            0.0
        }
    }
}

/// An `n x n` window of values and gradients gathered from image-wide data.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub side: usize,
    pub center: (usize, usize),
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
}

impl Patch {
    /// Extracts the window centered at `(row, col)`.
    pub fn extract(img: &GrayImage, field: &GradientField, center: (usize, usize), side: usize) -> Result<Patch> {
        if side.is_multiple_of(2) || side == 0 {
            return Err(Error::invalid(format!("patch side must be odd, got {side}")));
        }
        if !img.same_shape_field(field) {
            return Err(Error::invalid("gradient field shape does not match image"));
        }
        let r = side / 2;
        let (ci, cj) = center;
        if ci < r || cj < r || ci + r >= img.height || cj + r >= img.width {
            return Err(Error::invalid(format!(
                "patch of side {side} at ({ci}, {cj}) does not fit in {}x{}",
                img.width, img.height
            )));
        }
        let mut values = Vec::with_capacity(side * side);
        let mut grads = Vec::with_capacity(side * side);
        for i in ci - r..=ci + r {
            for j in cj - r..=cj + r {
                values.push(img.get(i, j));
                grads.push(field.at(i, j));
            }
        }
        Ok(Patch {
            side,
            center,
            values,
            grads,
        })
    }

    /// Pixelwise difference `self - other` including gradients.
    pub fn difference(&self, other: &Patch) -> Result<Patch> {
        check_sides(self, other)?;
        Ok(Patch {
            side: self.side,
            center: self.center,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            grads: self
                .grads
                .iter()
                .zip(&other.grads)
                .map(|(a, b)| [a[0] - b[0], a[1] - b[1]])
                .collect(),
        })
    }
}

impl GrayImage {
    fn same_shape_field(&self, f: &GradientField) -> bool {
        self.width == f.width && self.height == f.height
    }
}

pub(crate) fn check_sides(a: &Patch, b: &Patch) -> Result<()> {
    if a.side != b.side || a.values.len() != b.values.len() {
        return Err(Error::invalid(format!(
            "patch side mismatch: {} vs {}",
            a.side, b.side
        )));
    }
    Ok(())
}

pub fn svd2_of_gradients(patch: &Patch) -> Svd2 {
    Svd2::from_gradients(&patch.grads)
}

/// Sample covariance with divisor `len - 1`.
pub fn patch_cov(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "covariance length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::invalid("covariance needs at least two samples"));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    Ok(s / (n - 1.0))
}

/// Sum of gradient magnitudes over the patch.
pub fn patch_tv(patch: &Patch) -> f64 {
    patch.grads.iter().map(|g| g[0].hypot(g[1])).sum()
}

pub fn patch_mean(patch: &Patch) -> f64 {
    patch.values.iter().sum::<f64>() / patch.values.len() as f64
}

/// Mean squared difference on the native [0, 1] scale.
pub fn mse(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    a.check_same_shape(b)?;
    let s: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(s / a.data.len() as f64)
}
