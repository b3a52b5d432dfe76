//! Monte Carlo estimate of the growth rate from the random matrix product
//! `exp(Omega_{X_0} xi_0) exp(Omega_{X_1} xi_1) ...`, tracked in log space.
//!
//! Each factor is applied as `exp(lambda xi) * Delta exp(Theta xi) Delta^-1`:
//! the scalar part goes straight into a log accumulator and the matrix part
//! is renormalized by its largest entry after every step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, GeneratorExp, Matrix};
use crate::spectral::DualPrep;
use crate::stats::{exponential, Moments};

const PATHS_PER_CHUNK: usize = 16;
/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub paths: usize,
    pub jumps: usize,
    pub seed: u64,
    /// Tracked product entry, 1-based `(row, column)`.
    pub entry: (usize, usize),
    pub record_every: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            paths: 2000,
            jumps: 2000,
            seed: 0,
            entry: (1, 1),
            record_every: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, r: usize) -> Result<()> {
        let (i, j) = self.entry;
        if i == 0 || j == 0 || i > r || j > r {
            return Err(Error::InvalidArgument(format!(
                "entry ({i},{j}) out of range for {r} types"
            )));
        }
        if self.paths == 0 || self.jumps == 0 || self.record_every == 0 {
            return Err(Error::InvalidArgument(
                "paths, jumps and record_every must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Jump counts at which the series is recorded.
    pub fn record_points(&self) -> Vec<usize> {
        let mut pts: Vec<usize> = (1..=self.jumps / self.record_every)
            .map(|k| k * self.record_every)
            .collect();
        if !self.jumps.is_multiple_of(self.record_every) {
            pts.push(self.jumps);
        }
        pts
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub n: usize,
    pub cesaro_mean: f64,
    pub ci95_halfwidth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub series: Vec<SeriesPoint>,
    pub omega_sim: f64,
    pub ci95: f64,
    pub seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PathStep {
    pub state: usize,
    pub sojourn: f64,
}

fn sample_index(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = k;
            if u < acc {
                return k;
            }
        }
    }
    last
}

/// Draws the environment trajectory: start from the jump chain's stationary
/// law, then alternate sojourn and transition draws.
pub fn sample_path(prep: &DualPrep, rng: &mut ChaCha8Rng, jumps: usize) -> Vec<PathStep> {
    let mut walk = EnvironmentWalk::new(prep, rng);
    (0..jumps).map(|_| walk.next(prep, rng)).collect()
}

struct EnvironmentWalk {
    state: usize,
}

impl EnvironmentWalk {
    fn new(prep: &DualPrep, rng: &mut ChaCha8Rng) -> Self {
        Self {
            state: sample_index(rng, &prep.pi_hat),
        }
    }

    fn next(&mut self, prep: &DualPrep, rng: &mut ChaCha8Rng) -> PathStep {
        let state = self.state;
        let sojourn = exponential(rng, prep.states[state].rate);
        self.state = sample_index(rng, prep.p_hat.row(state));
        PathStep { state, sojourn }
    }
}

/// Running renormalized product for one path.
pub struct ProductTracker<'a> {
    prep: &'a DualPrep,
    exps: Vec<GeneratorExp>,
    product: Matrix,
    factor: Matrix,
    scratch: Matrix,
    log_scale: f64,
    entry: (usize, usize),
}

impl<'a> ProductTracker<'a> {
    /// `entry` is 0-based.
    pub fn new(prep: &'a DualPrep, entry: (usize, usize)) -> Self {
        let r = prep.r();
        Self {
            prep,
            exps: prep
                .states
                .iter()
                .map(|s| GeneratorExp::new(&s.theta))
                .collect(),
            product: Matrix::identity(r),
            factor: Matrix::zeros(r, r),
            scratch: Matrix::zeros(r, r),
            log_scale: 0.0,
            entry,
        }
    }

    /// Multiplies in one factor and returns the log of the tracked entry
    /// of the full (unnormalized) product.
    pub fn push(&mut self, step: PathStep) -> Result<f64> {
        let s = &self.prep.states[step.state];
        s.centered_exp_into(&mut self.exps[step.state], step.sojourn, &mut self.factor)?;
        linalg::matmul_into(&self.product, &self.factor, &mut self.scratch);
        std::mem::swap(&mut self.product, &mut self.scratch);
        self.log_scale += s.lambda() * step.sojourn;
        let top = self.product.max_entry();
        if !(top > 0.0) || !top.is_finite() {
            return Err(Error::Internal("product lost positivity".into()));
        }
        self.product.div_assign_scalar(top);
        self.log_scale += top.ln();
        let e = self.product[self.entry];
        if !(e > 0.0) {
            return Err(Error::Internal("entry underflow".into()));
        }
        Ok(self.log_scale + e.ln())
    }
}

/// Log of the tracked entry after each step of `path`.
pub fn renormalized_log_entries(
    prep: &DualPrep,
    path: &[PathStep],
    entry: (usize, usize),
) -> Result<Vec<f64>> {
    let mut t = ProductTracker::new(prep, entry);
    path.iter().map(|&s| t.push(s)).collect()
}

/// Per-path estimates `log(entry) / n` at the recorded jump counts.
pub fn simulate_path(
    prep: &DualPrep,
    cfg: &SimConfig,
    path_index: u64,
    points: &[usize],
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(path_index);
    let entry = (cfg.entry.0 - 1, cfg.entry.1 - 1);
    let mut walk = EnvironmentWalk::new(prep, &mut rng);
    let mut tracker = ProductTracker::new(prep, entry);
    let mut out = Vec::with_capacity(points.len());
    let mut next = points.iter().peekable();
    for n in 1..=cfg.jumps {
        let log_entry = tracker.push(walk.next(prep, &mut rng))?;
        if next.peek() == Some(&&n) {
            out.push(log_entry / n as f64);
            next.next();
        }
    }
    Ok(out)
}

pub fn simulate_omega(prep: &DualPrep, cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate(prep.r())?;
    let points = cfg.record_points();
    let chunks = cfg.paths.div_ceil(PATHS_PER_CHUNK);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Moments::new(points.len());
            let end = ((c + 1) * PATHS_PER_CHUNK).min(cfg.paths);
            for p in c * PATHS_PER_CHUNK..end {
                acc.push(&simulate_path(prep, cfg, p as u64, &points)?);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = Moments::new(points.len());
    for p in &parts {
        total.merge(p);
    }
    let series: Vec<SeriesPoint> = points
        .iter()
        .enumerate()
        .map(|(i, &n)| SeriesPoint {
            n,
            cesaro_mean: total.mean[i],
            ci95_halfwidth: Z95 * total.std_error(i),
        })
        .collect();
    let last = series.last().expect("at least one recorded point");
    Ok(SimResult {
        omega_sim: last.cesaro_mean,
        ci95: last.ci95_halfwidth,
        series,
        seed: cfg.seed,
    })
}
