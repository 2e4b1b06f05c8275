//! Lockstep sweeps over regularization candidates with early termination
//! of candidates that cannot win.

use rayon::prelude::*;

use crate::ciqa::{score, CiqaParams};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::recon::{BregmanState, FourierSystem, ReconParams, Solver};
use crate::ssim::ssim_default;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrimConfig {
    /// First round at which trimming may happen.
    pub warmup: usize,
    /// Trim when `p < -margin`; infinity disables trimming.
    pub margin: f64,
    pub pre_len: f64,
}

impl Default for TrimConfig {
    fn default() -> Self {
        Self {
            warmup: 20,
            margin: 0.0,
            pre_len: 4.0,
        }
    }
}

impl TrimConfig {
    pub fn untrimmed() -> Self {
        Self {
            margin: f64::INFINITY,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.margin >= 0.0) {
            return Err(Error::invalid(format!("margin must be >= 0, got {}", self.margin)));
        }
        if !self.pre_len.is_finite() {
            return Err(Error::invalid("pre_len must be finite"));
        }
        Ok(())
    }

    fn trims(&self) -> bool {
        self.margin.is_finite()
    }
}

/// Neighbor structure over candidate indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    /// Candidates ordered by one parameter.
    Line(usize),
    /// Row-major grid, rows indexed by the first parameter.
    Grid { rows: usize, cols: usize },
}

impl Topology {
    pub fn len(&self) -> usize {
        match *self {
            Topology::Line(n) => n,
            Topology::Grid { rows, cols } => rows * cols,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nearest alive candidate in each axis direction.
    pub fn neighbors(&self, m: usize, alive: &[bool]) -> Vec<usize> {
        let mut out = Vec::with_capacity(4);
        match *self {
            Topology::Line(n) => {
                if let Some(j) = (0..m).rev().find(|&j| alive[j]) {
                    out.push(j);
                }
                if let Some(j) = (m + 1..n).find(|&j| alive[j]) {
                    out.push(j);
                }
            }
            Topology::Grid { rows, cols } => {
                let (r, c) = (m / cols, m % cols);
                let at = |r: usize, c: usize| r * cols + c;
                if let Some(j) = (0..r).rev().map(|rr| at(rr, c)).find(|&j| alive[j]) {
                    out.push(j);
                }
                if let Some(j) = (r + 1..rows).map(|rr| at(rr, c)).find(|&j| alive[j]) {
                    out.push(j);
                }
                if let Some(j) = (0..c).rev().map(|cc| at(r, cc)).find(|&j| alive[j]) {
                    out.push(j);
                }
                if let Some(j) = (c + 1..cols).map(|cc| at(r, cc)).find(|&j| alive[j]) {
                    out.push(j);
                }
            }
        }
        out
    }
}

/// First alive candidate, in index order, whose score against every alive
/// neighbor is non-negative. Falls back to `prev_best`, or to the first
/// alive candidate when there is none.
pub fn find_best_by(
    topology: Topology,
    alive: &[bool],
    prev_best: Option<usize>,
    mut cmp: impl FnMut(usize, usize) -> Result<f64>,
) -> Result<usize> {
    let first_alive = alive
        .iter()
        .position(|&a| a)
        .ok_or_else(|| Error::invalid("no alive candidate"))?;
    for m in (0..alive.len()).filter(|&m| alive[m]) {
        let mut ok = true;
        for nb in topology.neighbors(m, alive) {
            if cmp(m, nb)? < 0.0 {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(m);
        }
    }
    Ok(prev_best.filter(|&b| alive[b]).unwrap_or(first_alive))
}

/// [`find_best_by`] on a line of images using the comparison index.
pub fn find_best(images: &[GrayImage], alive: &[bool], params: &CiqaParams, prev_best: Option<usize>) -> Result<usize> {
    if images.len() != alive.len() {
        return Err(Error::invalid("images and alive flags differ in length"));
    }
    find_best_by(Topology::Line(images.len()), alive, prev_best, |a, b| score(&images[a], &images[b], params))
}

/// Trimming indices of one candidate at one round.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Indices {
    pub s: f64,
    pub g: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub params: ReconParams,
    pub state: BregmanState,
    pub alive: bool,
    pub converged: bool,
    pub trimmed_at: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub round: usize,
    pub candidate: usize,
    pub beta: f64,
    pub gamma: f64,
    pub s: f64,
    pub g: Option<f64>,
    pub p: Option<f64>,
    pub alive: bool,
    pub cost: f64,
    pub ssim: Option<f64>,
}

impl TraceRow {
    pub const CSV_HEADER: &'static str = "round,candidate,beta,gamma,s,g,p,alive,cost,ssim";

    pub fn csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(crate::fmt_sig).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.round,
            self.candidate,
            crate::fmt_sig(self.beta),
            crate::fmt_sig(self.gamma),
            crate::fmt_sig(self.s),
            opt(self.g),
            opt(self.p),
            self.alive as u8,
            crate::fmt_sig(self.cost),
            opt(self.ssim)
        )
    }
}

/// Sweep state between rounds.
pub struct TrimState<'a> {
    solvers: Vec<Solver<'a>>,
    pub candidates: Vec<Candidate>,
    pub topology: Topology,
    pub best_index: Option<usize>,
    pub prev_best: Option<usize>,
    /// Per candidate, indices for every round it was alive.
    pub history: Vec<Vec<Indices>>,
    pub iterations_spent: usize,
    pub round: usize,
    images: Vec<GrayImage>,
    prev_images: Vec<Option<GrayImage>>,
    prev_s: Vec<Option<f64>>,
}

impl<'a> TrimState<'a> {
    pub fn new(sys: &'a FourierSystem, params: &[ReconParams], topology: Topology) -> Result<Self> {
        if params.len() != topology.len() {
            return Err(Error::invalid(format!(
                "{} candidates for a topology of {}",
                params.len(),
                topology.len()
            )));
        }
        if params.is_empty() {
            return Err(Error::invalid("no candidates"));
        }
        let solvers = params.iter().map(|p| Solver::new(sys, p)).collect::<Result<Vec<_>>>()?;
        let candidates: Vec<Candidate> = solvers
            .iter()
            .zip(params)
            .map(|(s, p)| Candidate {
                params: *p,
                state: s.initial_state(),
                alive: true,
                converged: false,
                trimmed_at: None,
            })
            .collect();
        let images = candidates.iter().map(|c| c.state.image().clamped()).collect();
        let n = params.len();
        Ok(Self {
            solvers,
            candidates,
            topology,
            best_index: None,
            prev_best: None,
            history: vec![Vec::new(); n],
            iterations_spent: 0,
            round: 0,
            images,
            prev_images: vec![None; n],
            prev_s: vec![None; n],
        })
    }

    pub fn alive(&self) -> Vec<bool> {
        self.candidates.iter().map(|c| c.alive).collect()
    }

    /// Clamped current image of candidate `m`.
    pub fn image(&self, m: usize) -> &GrayImage {
        &self.images[m]
    }

    pub fn all_converged(&self) -> bool {
        self.candidates.iter().filter(|c| c.alive).all(|c| c.converged)
    }

    /// Steps every alive unconverged candidate once. Returns the step count.
    pub fn step_candidates(&mut self) -> Result<usize> {
        let stepped: Vec<Option<Result<BregmanState>>> = self
            .candidates
            .par_iter()
            .zip(self.solvers.par_iter())
            .map(|(c, s)| (c.alive && !c.converged).then(|| s.step(&c.state)))
            .collect();
        let mut count = 0;
        for (m, r) in stepped.into_iter().enumerate() {
            self.prev_images[m] = self.candidates[m].alive.then(|| self.images[m].clone());
            if let Some(r) = r {
                let st = r?;
                self.candidates[m].converged = self.solvers[m].is_converged(&st);
                self.images[m] = st.image().clamped();
                self.candidates[m].state = st;
                count += 1;
            }
        }
        self.iterations_spent += count;
        self.round += 1;
        Ok(count)
    }

    pub fn find_best(&mut self, params: &CiqaParams) -> Result<usize> {
        let alive = self.alive();
        let images = &self.images;
        let best = find_best_by(self.topology, &alive, self.best_index, |a, b| score(&images[a], &images[b], params))?;
        self.prev_best = self.best_index;
        self.best_index = Some(best);
        Ok(best)
    }

    /// Computes `s`, `g` and `p` for every alive candidate at this round.
    pub fn update_indices(&mut self, params: &CiqaParams, pre_len: f64) -> Result<Vec<Option<Indices>>> {
        let best = self
            .best_index
            .ok_or_else(|| Error::Internal("update_indices before find_best".into()))?;
        let pb = self.prev_best;
        let pb_img = match pb {
            Some(b) => Some(
                self.prev_images[b]
                    .as_ref()
                    .ok_or_else(|| Error::Internal(format!("missing previous snapshot of candidate {b}")))?,
            ),
            None => None,
        };
        let images = &self.images;
        let prev_s = &self.prev_s;
        let out: Vec<Option<Indices>> = (0..self.candidates.len())
            .into_par_iter()
            .map(|m| -> Result<Option<Indices>> {
                if !self.candidates[m].alive {
                    return Ok(None);
                }
                let s = if m == best { 0.0 } else { score(&images[m], &images[best], params)? };
                let g = match pb_img {
                    Some(pi) => {
                        let before = prev_s[m].ok_or_else(|| {
                            Error::Internal(format!("missing previous index of candidate {m}"))
                        })?;
                        Some(score(&images[m], pi, params)? - before)
                    }
                    None => None,
                };
                Ok(Some(Indices {
                    s,
                    g,
                    p: g.map(|g| s + pre_len * g),
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        for (m, ix) in out.iter().enumerate() {
            if let Some(ix) = ix {
                self.history[m].push(*ix);
                self.prev_s[m] = Some(ix.s);
            }
        }
        Ok(out)
    }

    /// Applies the cut rule; returns the candidates trimmed this round.
    pub fn trim_decision(&mut self, indices: &[Option<Indices>], config: &TrimConfig) -> Vec<usize> {
        if !config.trims() || self.round < config.warmup {
            return Vec::new();
        }
        let Some(best) = self.best_index else {
            return Vec::new();
        };
        let alive = self.alive();
        let mut protected = self.topology.neighbors(best, &alive);
        protected.push(best);
        let mut cut = Vec::new();
        for (m, ix) in indices.iter().enumerate() {
            let Some(Indices { p: Some(p), .. }) = ix else {
                continue;
            };
            if alive[m] && *p < -config.margin && !protected.contains(&m) {
                cut.push(m);
            }
        }
        for &m in &cut {
            self.candidates[m].alive = false;
            self.candidates[m].trimmed_at = Some(self.round);
            self.prev_images[m] = None;
        }
        cut
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    pub selected: usize,
    pub iterations_spent: usize,
    pub rounds: usize,
    pub trace: Vec<TraceRow>,
    /// Final (or trim-time) estimate of each candidate, unclamped.
    pub final_images: Vec<GrayImage>,
    pub trimmed_at: Vec<Option<usize>>,
}

/// Runs one sweep to completion under `config`.
pub fn run_sweep(
    sys: &FourierSystem,
    candidate_params: &[ReconParams],
    topology: Topology,
    ciqa: &CiqaParams,
    config: &TrimConfig,
    reference: Option<&GrayImage>,
) -> Result<SweepOutcome> {
    config.validate()?;
    ciqa.validate()?;
    let mut st = TrimState::new(sys, candidate_params, topology)?;
    let mut trace = Vec::new();
    while !st.all_converged() {
        let was_alive = st.alive();
        st.step_candidates()?;
        st.find_best(ciqa)?;
        let ix = st.update_indices(ciqa, config.pre_len)?;
        st.trim_decision(&ix, config);
        for (m, ix) in ix.iter().enumerate() {
            let Some(ix) = ix else { continue };
            debug_assert!(was_alive[m]);
            let c = &st.candidates[m];
            let ssim = match reference {
                Some(r) => Some(ssim_default(st.image(m), r)?),
                None => None,
            };
            trace.push(TraceRow {
                round: st.round,
                candidate: m,
                beta: c.params.beta,
                gamma: c.params.gamma,
                s: ix.s,
                g: ix.g,
                p: ix.p,
                alive: c.alive,
                cost: c.state.cost,
                ssim,
            });
        }
        log::debug!(
            "round {} best {:?} alive {} spent {}",
            st.round,
            st.best_index,
            st.alive().iter().filter(|&&a| a).count(),
            st.iterations_spent
        );
    }
    let selected = st
        .best_index
        .ok_or_else(|| Error::Internal("sweep finished without a best candidate".into()))?;
    Ok(SweepOutcome {
        selected,
        iterations_spent: st.iterations_spent,
        rounds: st.round,
        trace,
        final_images: st.candidates.iter().map(|c| c.state.image()).collect(),
        trimmed_at: st.candidates.iter().map(|c| c.trimmed_at).collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrimmedSweep {
    pub selected: usize,
    pub selected_params: ReconParams,
    pub iterations_spent: usize,
    pub untrimmed_selected: usize,
    pub untrimmed_iterations: usize,
    pub savings_fraction: f64,
    pub trimmed: SweepOutcome,
    pub untrimmed: SweepOutcome,
}

fn run_both(
    sys: &FourierSystem,
    candidate_params: &[ReconParams],
    topology: Topology,
    ciqa: &CiqaParams,
    config: &TrimConfig,
    reference: Option<&GrayImage>,
) -> Result<TrimmedSweep> {
    if candidate_params.len() < 2 {
        return Err(Error::invalid("a sweep needs at least two candidates"));
    }
    let untrimmed = run_sweep(sys, candidate_params, topology, ciqa, &TrimConfig::untrimmed(), reference)?;
    let trimmed = if config.trims() {
        run_sweep(sys, candidate_params, topology, ciqa, config, reference)?
    } else {
        untrimmed.clone()
    };
    Ok(TrimmedSweep {
        selected: trimmed.selected,
        selected_params: candidate_params[trimmed.selected],
        iterations_spent: trimmed.iterations_spent,
        untrimmed_selected: untrimmed.selected,
        untrimmed_iterations: untrimmed.iterations_spent,
        savings_fraction: 1.0 - trimmed.iterations_spent as f64 / untrimmed.iterations_spent as f64,
        trimmed,
        untrimmed,
    })
}

/// Trimmed sweep over candidates ordered by one parameter, with the
/// untrimmed sweep run alongside to measure savings.
pub fn run_trimmed_sweep(
    sys: &FourierSystem,
    candidate_params: &[ReconParams],
    ciqa: &CiqaParams,
    config: &TrimConfig,
    reference: Option<&GrayImage>,
) -> Result<TrimmedSweep> {
    run_both(sys, candidate_params, Topology::Line(candidate_params.len()), ciqa, config, reference)
}

/// Trimmed sweep over the `betas x gammas` grid, rows indexed by beta.
pub fn run_trimmed_sweep_2d(
    sys: &FourierSystem,
    betas: &[f64],
    gammas: &[f64],
    ciqa: &CiqaParams,
    config: &TrimConfig,
    reference: Option<&GrayImage>,
) -> Result<TrimmedSweep> {
    let params: Vec<ReconParams> = betas
        .iter()
        .flat_map(|&b| gammas.iter().map(move |&g| ReconParams::with_gamma(b, g)))
        .collect();
    let topo = Topology::Grid {
        rows: betas.len(),
        cols: gammas.len(),
    };
    run_both(sys, &params, topo, ciqa, config, reference)
}
