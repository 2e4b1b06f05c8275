//! Total-variation (optionally TV + Haar) reconstruction from subsampled
//! noisy Fourier samples by Split Bregman iteration.
//!
//! Internally images are held in 8-bit units (`255 x` the [0, 1] value)
//! and the forward operator is `F = DFT / (M N)`. Public image accessors
//! convert back to [0, 1].

mod fft;
pub mod haar;
pub mod phantom;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use fft::Fft2;

/// Factor from [0, 1] luminance to internal units.
pub const INTENSITY_SCALE: f64 = 255.0;

/// Added to every x-update denominator.
pub const DENOM_EPS: f64 = 1e-12;

/// Subsampled noisy Fourier measurements `y = R F x + noise`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSystem {
    pub width: usize,
    pub height: usize,
    pub mask: Vec<bool>,
    /// Measured samples in internal units, zero off the mask.
    pub y: Vec<Complex64>,
    pub snr_db: f64,
    pub seed: u64,
}

impl FourierSystem {
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    /// Fraction of frequencies kept.
    pub fn sample_fraction(&self) -> f64 {
        self.mask.iter().filter(|&&m| m).count() as f64 / self.mask.len() as f64
    }

    /// `F x` for `x` in internal units.
    pub fn forward(&self, x: &[f64]) -> Vec<Complex64> {
        let n = self.len() as f64;
        let mut c = Fft2::new(self.width, self.height).forward_real(x);
        c.iter_mut().for_each(|v| *v /= n);
        c
    }

    /// `½ ‖R F x − y‖²` for `x` in internal units.
    pub fn data_residual(&self, x: &[f64]) -> f64 {
        let fx = self.forward(x);
        0.5 * fx
            .iter()
            .zip(&self.y)
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|((a, b), _)| (a - b).norm_sqr())
            .sum::<f64>()
    }

    /// Inverse DFT of the zero-filled samples, in [0, 1] units.
    pub fn zero_filled(&self) -> GrayImage {
        let mut c = self.y.clone();
        Fft2::new(self.width, self.height).inverse(&mut c);
        let data = c.iter().map(|v| v.re / INTENSITY_SCALE).collect();
        GrayImage::new(self.width, self.height, data).expect("finite samples")
    }
}

/// Samples the spectrum of `img` on a uniform random mask that always keeps
/// DC, then adds complex Gaussian noise scaled so that the realized
/// signal-to-noise ratio over kept samples equals `snr_db` exactly. An
/// infinite `snr_db` adds no noise.
pub fn simulate_measurements(img: &GrayImage, sample_fraction: f64, snr_db: f64, seed: u64) -> Result<FourierSystem> {
    if !(sample_fraction > 0.0 && sample_fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "sample fraction must lie in (0, 1], got {sample_fraction}"
        )));
    }
    if snr_db.is_nan() {
        return Err(Error::invalid("SNR must not be NaN"));
    }
    let (w, h) = (img.width(), img.height());
    let x: Vec<f64> = img.data().iter().map(|v| v * INTENSITY_SCALE).collect();
    let mut sys = FourierSystem {
        width: w,
        height: h,
        mask: Vec::new(),
        y: Vec::new(),
        snr_db,
        seed,
    };
    let clean = sys.forward(&x);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask: Vec<bool> = (0..w * h).map(|_| rng.random::<f64>() < sample_fraction).collect();
    mask[0] = true;
    let mut y: Vec<Complex64> = clean
        .iter()
        .zip(&mask)
        .map(|(&v, &m)| if m { v } else { Complex64::new(0.0, 0.0) })
        .collect();
    if snr_db.is_finite() {
        let z: Vec<Complex64> = mask
            .iter()
            .map(|&m| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                if m {
                    Complex64::new(re, im)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        let signal: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        let noise: f64 = z.iter().map(|v| v.norm_sqr()).sum();
        if noise > 0.0 && signal > 0.0 {
            let scale = (signal * 10f64.powf(-snr_db / 10.0) / noise).sqrt();
            for (v, n) in y.iter_mut().zip(&z) {
                *v += n * scale;
            }
        }
    }
    sys.mask = mask;
    sys.y = y;
    Ok(sys)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReconParams {
    pub beta: f64,
    /// Haar weight; 0 disables the wavelet term.
    pub gamma: f64,
    pub mu: f64,
    pub mu2: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// Shrink with threshold `1/μ` instead of `β/μ`.
    pub literal_threshold: bool,
}

impl ReconParams {
    pub fn new(beta: f64) -> Self {
        Self::with_gamma(beta, 0.0)
    }

    pub fn with_gamma(beta: f64, gamma: f64) -> Self {
        Self {
            beta,
            gamma,
            mu: 0.01 * beta,
            mu2: 0.01 * gamma,
            max_iters: 200,
            tol: 1e-5,
            literal_threshold: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.gamma > 0.0 && !(self.mu2 > 0.0 && self.mu2.is_finite()) {
            return Err(Error::invalid("mu2 must be positive when gamma > 0"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid("tol must be >= 0"));
        }
        Ok(())
    }

    fn uses_haar(&self) -> bool {
        self.gamma > 0.0
    }

    fn tv_threshold(&self) -> f64 {
        if self.literal_threshold {
            1.0 / self.mu
        } else {
            self.beta / self.mu
        }
    }

    fn haar_threshold(&self) -> f64 {
        if self.literal_threshold {
            1.0 / self.mu2
        } else {
            self.gamma / self.mu2
        }
    }
}

/// Split Bregman iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct BregmanState {
    pub width: usize,
    pub height: usize,
    /// Image estimate in internal units.
    pub x: Vec<f64>,
    /// Split gradient variable, x then y channel.
    pub d: [Vec<f64>; 2],
    pub b: [Vec<f64>; 2],
    /// Split Haar variable and its dual, empty when the term is disabled.
    pub dw: Vec<f64>,
    pub bw: Vec<f64>,
    pub k: usize,
    pub cost: f64,
    /// Relative change of x in the last step.
    pub rel_change: f64,
}

impl BregmanState {
    pub fn zeros(width: usize, height: usize, haar: bool) -> Self {
        let z = vec![0.0; width * height];
        let hz = if haar { z.clone() } else { Vec::new() };
        Self {
            width,
            height,
            x: z.clone(),
            d: [z.clone(), z.clone()],
            b: [z.clone(), z],
            dw: hz.clone(),
            bw: hz,
            k: 0,
            cost: 0.0,
            rel_change: f64::INFINITY,
        }
    }

    /// Current estimate in [0, 1] units, unclamped.
    pub fn image(&self) -> GrayImage {
        let data = self.x.iter().map(|v| v / INTENSITY_SCALE).collect();
        GrayImage::new(self.width, self.height, data).expect("finite iterate")
    }
}

/// Periodic forward differences.
pub fn periodic_gradient(x: &[f64], width: usize, height: usize) -> [Vec<f64>; 2] {
    let mut gx = vec![0.0; width * height];
    let mut gy = vec![0.0; width * height];
    for i in 0..height {
        let down = (i + 1) % height;
        for j in 0..width {
            let right = (j + 1) % width;
            let v = x[i * width + j];
            gx[i * width + j] = x[i * width + right] - v;
            gy[i * width + j] = x[down * width + j] - v;
        }
    }
    [gx, gy]
}

/// Adjoint of [`periodic_gradient`].
pub fn periodic_gradient_adjoint(gx: &[f64], gy: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut out = vec![0.0; width * height];
    for i in 0..height {
        let up = (i + height - 1) % height;
        for j in 0..width {
            let left = (j + width - 1) % width;
            let k = i * width + j;
            out[k] = (gx[i * width + left] - gx[k]) + (gy[up * width + j] - gy[k]);
        }
    }
    out
}

fn isotropic_tv(x: &[f64], width: usize, height: usize) -> f64 {
    let [gx, gy] = periodic_gradient(x, width, height);
    gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).sum()
}

/// `β TV(x) + ½ ‖S x − y‖²` on the internal scale, for `x` in [0, 1] units.
pub fn tv_cost(x: &GrayImage, sys: &FourierSystem, beta: f64) -> Result<f64> {
    check_system_shape(sys, x.width(), x.height())?;
    let xi: Vec<f64> = x.data().iter().map(|v| v * INTENSITY_SCALE).collect();
    Ok(internal_cost(&xi, sys, beta, 0.0))
}

fn internal_cost(x: &[f64], sys: &FourierSystem, beta: f64, gamma: f64) -> f64 {
    let mut c = beta * isotropic_tv(x, sys.width, sys.height) + sys.data_residual(x);
    if gamma > 0.0 {
        let wx = haar::forward(x, sys.width, sys.height);
        c += gamma * wx[haar::detail_range(sys.width, sys.height)].iter().map(|v| v.abs()).sum::<f64>();
    }
    c
}

fn check_system_shape(sys: &FourierSystem, width: usize, height: usize) -> Result<()> {
    if sys.width != width || sys.height != height || sys.mask.len() != width * height || sys.y.len() != width * height {
        return Err(Error::invalid("state and system shapes differ"));
    }
    Ok(())
}

/// Precomputed Fourier-domain solver for one (system, parameters) pair.
#[derive(Clone)]
pub struct Solver<'a> {
    sys: &'a FourierSystem,
    params: ReconParams,
    fft: Fft2,
    /// Spectrum of `Re(Sᴴ y)`.
    sty_hat: Vec<Complex64>,
    denom: Vec<f64>,
}

impl<'a> Solver<'a> {
    pub fn new(sys: &'a FourierSystem, params: &ReconParams) -> Result<Self> {
        params.validate()?;
        let (w, h) = (sys.width, sys.height);
        check_system_shape(sys, w, h)?;
        if params.uses_haar() {
            haar::check_even(w, h)?;
        }
        let n = (w * h) as f64;
        let fft = Fft2::new(w, h);

        // Re(Sᴴ y) = Re(IDFT(y)) / N with y zero off the mask.
        let mut sty = sys.y.clone();
        fft.inverse(&mut sty);
        let sty_real: Vec<f64> = sty.iter().map(|v| v.re / n).collect();
        let sty_hat = fft.forward_real(&sty_real);

        // Real x turns the mask term into its even part m(k) + m(-k) over 2.
        let lap_axis = |len: usize, k: usize| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / len as f64).cos();
        let mut denom = vec![0.0; w * h];
        for ki in 0..h {
            let mi = (h - ki) % h;
            for kj in 0..w {
                let mj = (w - kj) % w;
                let m = sys.mask[ki * w + kj] as u8 as f64;
                let mm = sys.mask[mi * w + mj] as u8 as f64;
                let wsym = 0.5 * (m + mm);
                let mut d = wsym / n + params.mu * (lap_axis(w, kj) + lap_axis(h, ki)) + DENOM_EPS;
                if params.uses_haar() {
                    d += params.mu2;
                }
                denom[ki * w + kj] = d;
            }
        }
        Ok(Self {
            sys,
            params: *params,
            fft,
            sty_hat,
            denom,
        })
    }

    pub fn params(&self) -> &ReconParams {
        &self.params
    }

    pub fn initial_state(&self) -> BregmanState {
        let mut s = BregmanState::zeros(self.sys.width, self.sys.height, self.params.uses_haar());
        s.cost = internal_cost(&s.x, self.sys, self.params.beta, self.params.gamma);
        s
    }

    /// Solves `(SᵀS + μ DᵀD + μ₂ I) x = Sᵀy + μ Dᵀ(d − b) + μ₂ Wᵀ(dw − bw)`.
    pub fn x_update(&self, d: &[Vec<f64>; 2], b: &[Vec<f64>; 2], haar_split: Option<(&[f64], &[f64])>) -> Vec<f64> {
        let (w, h) = (self.sys.width, self.sys.height);
        let n = (w * h) as f64;
        let ex: Vec<f64> = d[0].iter().zip(&b[0]).map(|(d, b)| d - b).collect();
        let ey: Vec<f64> = d[1].iter().zip(&b[1]).map(|(d, b)| d - b).collect();
        let mut r = periodic_gradient_adjoint(&ex, &ey, w, h);
        r.iter_mut().for_each(|v| *v *= self.params.mu);
        if let Some((dw, bw)) = haar_split {
            let diff: Vec<f64> = dw.iter().zip(bw).map(|(d, b)| d - b).collect();
            let back = haar::adjoint(&diff, w, h);
            for (v, t) in r.iter_mut().zip(back) {
                *v += self.params.mu2 * t;
            }
        }
        let mut spec = self.fft.forward_real(&r);
        for ((s, &y), &den) in spec.iter_mut().zip(&self.sty_hat).zip(&self.denom) {
            *s = (*s + y) / den;
        }
        self.fft.inverse(&mut spec);
        spec.iter().map(|v| v.re / n).collect()
    }

    /// One Split Bregman iteration.
    pub fn step(&self, state: &BregmanState) -> Result<BregmanState> {
        let (w, h) = (self.sys.width, self.sys.height);
        if state.width != w || state.height != h || state.x.len() != w * h {
            return Err(Error::invalid("state and system shapes differ"));
        }
        let haar_on = self.params.uses_haar();
        if haar_on && state.dw.len() != w * h {
            return Err(Error::invalid("state lacks the Haar split variable"));
        }
        let split = haar_on.then_some((state.dw.as_slice(), state.bw.as_slice()));
        let x = self.x_update(&state.d, &state.b, split);

        let [gx, gy] = periodic_gradient(&x, w, h);
        let thr = self.params.tv_threshold();
        let mut d = [vec![0.0; w * h], vec![0.0; w * h]];
        let mut b = [vec![0.0; w * h], vec![0.0; w * h]];
        for k in 0..w * h {
            let sx = gx[k] + state.b[0][k];
            let sy = gy[k] + state.b[1][k];
            let s = sx.hypot(sy);
            let f = if s > 0.0 { (s - thr).max(0.0) / s } else { 0.0 };
            d[0][k] = f * sx;
            d[1][k] = f * sy;
            b[0][k] = sx - d[0][k];
            b[1][k] = sy - d[1][k];
        }

        let (mut dw, mut bw) = (Vec::new(), Vec::new());
        if haar_on {
            let wx = haar::forward(&x, w, h);
            let details = haar::detail_range(w, h);
            let thr2 = self.params.haar_threshold();
            dw = vec![0.0; w * h];
            bw = vec![0.0; w * h];
            for k in 0..w * h {
                let v = wx[k] + state.bw[k];
                // The approximation band is not penalized.
                dw[k] = if details.contains(&k) {
                    v.signum() * (v.abs() - thr2).max(0.0)
                } else {
                    v
                };
                bw[k] = v - dw[k];
            }
        }

        let dx: f64 = x.iter().zip(&state.x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let nx: f64 = state.x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rel_change = dx / nx.max(1e-12);
        let cost = internal_cost(&x, self.sys, self.params.beta, self.params.gamma);
        if !cost.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite iterate at step {} (beta {})",
                state.k + 1,
                self.params.beta
            )));
        }
        Ok(BregmanState {
            width: w,
            height: h,
            x,
            d,
            b,
            dw,
            bw,
            k: state.k + 1,
            cost,
            rel_change,
        })
    }

    pub fn is_converged(&self, state: &BregmanState) -> bool {
        state.k >= self.params.max_iters || (state.k > 0 && state.rel_change < self.params.tol)
    }
}

/// One iteration from `state`. Builds a fresh [`Solver`]; use the solver
/// directly when iterating.
pub fn bregman_step(state: &BregmanState, sys: &FourierSystem, params: &ReconParams) -> Result<BregmanState> {
    Solver::new(sys, params)?.step(state)
}

/// Iterates from zero until the relative change drops below `tol` or
/// `max_iters` is reached, calling `callback` after every iteration.
pub fn reconstruct(
    sys: &FourierSystem,
    params: &ReconParams,
    mut callback: impl FnMut(usize, &BregmanState),
) -> Result<BregmanState> {
    let solver = Solver::new(sys, params)?;
    let mut state = solver.initial_state();
    while !solver.is_converged(&state) {
        state = solver.step(&state)?;
        callback(state.k, &state);
    }
    Ok(state)
}

/// `count` values log-spaced over `[lo, hi]`.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}
