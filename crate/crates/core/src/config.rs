//! Flat `key = value` configuration covering every tunable parameter.

use std::fs;
use std::path::Path;

use crate::ciqa::{CiqaParams, Variant};
use crate::error::{Error, Result};
use crate::fmt_sig;
use crate::metricq::DEFAULT_TAU;
use crate::recon::ReconParams;
use crate::selection::MSE_SCALE;
use crate::trimming::TrimConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub ciqa: CiqaParams,
    pub tau: f64,
    pub k_thresh: f64,
    pub mse_scale: f64,
    pub target_ssim: f64,
    pub ladder_count: usize,
    pub trim: TrimConfig,
    pub sample_fraction: f64,
    pub snr_db: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// `μ = mu_factor · β` and `μ₂ = mu_factor · γ`.
    pub mu_factor: f64,
    pub literal_threshold: bool,
    pub beta: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_count: usize,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub gamma_count: usize,
    pub seed: u64,
    pub output_dir: Option<String>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            ciqa: CiqaParams::default(),
            tau: DEFAULT_TAU,
            k_thresh: 3.0,
            mse_scale: MSE_SCALE,
            target_ssim: 0.85,
            ladder_count: 15,
            trim: TrimConfig::default(),
            sample_fraction: 0.7,
            snr_db: 20.0,
            max_iters: 200,
            tol: 1e-5,
            mu_factor: 0.01,
            literal_threshold: false,
            beta: 1e-3,
            beta_min: 1e-5,
            beta_max: 1e-1,
            beta_count: 30,
            gamma_min: 1e-8,
            gamma_max: 1e-1,
            gamma_count: 6,
            seed: 0,
            output_dir: None,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn float(key: &str, v: &str) -> Result<f64> {
    match v {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        _ => num(key, v),
    }
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

impl Config {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::default();
        c.apply_text(&text)?;
        Ok(c)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        self.validate()
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "ciqa.n" => self.ciqa.n = num(key, v)?,
            "ciqa.c_thresh" => self.ciqa.c_thresh = float(key, v)?,
            "ciqa.c1" => self.ciqa.c1 = float(key, v)?,
            "ciqa.variant" => self.ciqa.variant = v.parse::<Variant>().map_err(|e| Error::Config(e.to_string()))?,
            "ciqa.stride" => self.ciqa.stride = num(key, v)?,
            "ciqa.literal_weight_sign" => self.ciqa.literal_weight_sign = flag(key, v)?,
            "metricq.tau" => self.tau = float(key, v)?,
            "selection.k_thresh" => self.k_thresh = float(key, v)?,
            "selection.mse_scale" => self.mse_scale = float(key, v)?,
            "distort.target_ssim" => self.target_ssim = float(key, v)?,
            "distort.count" => self.ladder_count = num(key, v)?,
            "trim.pre_len" => self.trim.pre_len = float(key, v)?,
            "trim.warmup" => self.trim.warmup = num(key, v)?,
            "trim.margin" => self.trim.margin = float(key, v)?,
            "recon.sample_fraction" => self.sample_fraction = float(key, v)?,
            "recon.snr_db" => self.snr_db = float(key, v)?,
            "recon.max_iters" => self.max_iters = num(key, v)?,
            "recon.tol" => self.tol = float(key, v)?,
            "recon.mu_factor" => self.mu_factor = float(key, v)?,
            "recon.literal_threshold" => self.literal_threshold = flag(key, v)?,
            "recon.beta" => self.beta = float(key, v)?,
            "recon.beta_min" => self.beta_min = float(key, v)?,
            "recon.beta_max" => self.beta_max = float(key, v)?,
            "recon.beta_count" => self.beta_count = num(key, v)?,
            "recon.gamma_min" => self.gamma_min = float(key, v)?,
            "recon.gamma_max" => self.gamma_max = float(key, v)?,
            "recon.gamma_count" => self.gamma_count = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "output_dir" => self.output_dir = Some(v.to_string()),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        self.ciqa.validate().map_err(cfg)?;
        self.trim.validate().map_err(cfg)?;
        let positive = [
            ("selection.mse_scale", self.mse_scale),
            ("recon.mu_factor", self.mu_factor),
            ("recon.beta", self.beta),
            ("recon.beta_min", self.beta_min),
            ("recon.beta_max", self.beta_max),
            ("recon.gamma_min", self.gamma_min),
            ("recon.gamma_max", self.gamma_max),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{k} must be positive, got {v}")));
            }
        }
        if !(self.k_thresh >= 0.0) {
            return Err(Error::Config("selection.k_thresh must be >= 0".into()));
        }
        if !(self.target_ssim > 0.0 && self.target_ssim < 1.0) {
            return Err(Error::Config("distort.target_ssim must lie in (0, 1)".into()));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(Error::Config("recon.sample_fraction must lie in (0, 1]".into()));
        }
        if self.ladder_count == 0 || self.beta_count == 0 || self.gamma_count == 0 || self.max_iters == 0 {
            return Err(Error::Config("counts must be positive".into()));
        }
        Ok(())
    }

    pub fn recon_params(&self, beta: f64, gamma: f64) -> ReconParams {
        ReconParams {
            beta,
            gamma,
            mu: self.mu_factor * beta,
            mu2: self.mu_factor * gamma,
            max_iters: self.max_iters,
            tol: self.tol,
            literal_threshold: self.literal_threshold,
        }
    }

    /// Every key with its current value, one per line, in a fixed order.
    pub fn to_text(&self) -> String {
        let f = |v: f64| if v.is_infinite() { "inf".to_string() } else { fmt_sig(v) };
        let mut lines = vec![
            format!("ciqa.n = {}", self.ciqa.n),
            format!("ciqa.c_thresh = {}", f(self.ciqa.c_thresh)),
            format!("ciqa.c1 = {}", f(self.ciqa.c1)),
            format!("ciqa.variant = {}", self.ciqa.variant),
            format!("ciqa.stride = {}", self.ciqa.stride),
            format!("ciqa.literal_weight_sign = {}", self.ciqa.literal_weight_sign),
            format!("metricq.tau = {}", f(self.tau)),
            format!("selection.k_thresh = {}", f(self.k_thresh)),
            format!("selection.mse_scale = {}", f(self.mse_scale)),
            format!("distort.target_ssim = {}", f(self.target_ssim)),
            format!("distort.count = {}", self.ladder_count),
            format!("trim.pre_len = {}", f(self.trim.pre_len)),
            format!("trim.warmup = {}", self.trim.warmup),
            format!("trim.margin = {}", f(self.trim.margin)),
            format!("recon.sample_fraction = {}", f(self.sample_fraction)),
            format!("recon.snr_db = {}", f(self.snr_db)),
            format!("recon.max_iters = {}", self.max_iters),
            format!("recon.tol = {}", f(self.tol)),
            format!("recon.mu_factor = {}", f(self.mu_factor)),
            format!("recon.literal_threshold = {}", self.literal_threshold),
            format!("recon.beta = {}", f(self.beta)),
            format!("recon.beta_min = {}", f(self.beta_min)),
            format!("recon.beta_max = {}", f(self.beta_max)),
            format!("recon.beta_count = {}", self.beta_count),
            format!("recon.gamma_min = {}", f(self.gamma_min)),
            format!("recon.gamma_max = {}", f(self.gamma_max)),
            format!("recon.gamma_count = {}", self.gamma_count),
            format!("seed = {}", self.seed),
        ];
        if let Some(d) = &self.output_dir {
            lines.push(format!("output_dir = {d}"));
        }
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }
}
