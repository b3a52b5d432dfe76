//! Closed-form upper and lower bounds on the growth rate and the one-sided
//! extinction verdicts they support.

use serde::{Deserialize, Serialize};

use crate::cyclic::StarEstimate;
use crate::error::{Error, Result};
use crate::linalg::{self, dot, ChainKind, Matrix};
use crate::spectral::DualPrep;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpperVerdict {
    ExtinctAlmostSurely,
    InconclusiveFromAbove,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowerVerdict {
    SurvivesWithPositiveProbability,
    InconclusiveFromBelow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarBound {
    pub value: f64,
    pub std_error: f64,
    /// Path-weighted variant; see [`crate::cyclic`].
    pub weighted_value: f64,
    pub weighted_std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub growth_term: f64,
    pub omega_upper: f64,
    pub omega_lower: f64,
    pub omega_lower_alt: f64,
    pub omega_lower_star: Option<StarBound>,
    pub verdict_upper: UpperVerdict,
    pub verdict_lower: LowerVerdict,
    pub pi1: Vec<f64>,
    pub pi1_tilde: Vec<f64>,
}

impl BoundsReport {
    /// Largest lower bound. Of the cyclic estimates only the path-weighted
    /// one counts, at three standard errors below its estimate.
    pub fn best_lower(&self) -> f64 {
        let star = self
            .omega_lower_star
            .as_ref()
            .map_or(f64::NEG_INFINITY, |s| {
                s.weighted_value - 3.0 * s.weighted_std_error
            });
        self.omega_lower.max(self.omega_lower_alt).max(star)
    }
}

/// `P^ (x) I_r`.
fn lifted(p: &Matrix, r: usize) -> Matrix {
    linalg::kron(p, &Matrix::identity(r))
}

/// `sp[M (P^ (x) I_r)]`.
pub fn upper_radius(prep: &DualPrep) -> Result<f64> {
    let k = prep.m_block().matmul(&lifted(&prep.p_hat, prep.r()));
    linalg::spectral_radius_nonneg(&k)
}

/// `sp[M^T (P~ (x) I_r)]`, the same radius reached through the time-reversed dual.
pub fn dual_upper_radius(prep: &DualPrep) -> Result<f64> {
    let k = prep
        .m_block()
        .transpose()
        .matmul(&lifted(&prep.p_tilde, prep.r()));
    linalg::spectral_radius_nonneg(&k)
}

pub fn omega_upper(prep: &DualPrep) -> Result<f64> {
    Ok(prep.growth_term() + upper_radius(prep)?.ln())
}

/// `P(1) = N (P^ (x) I_r)`.
pub fn p1(prep: &DualPrep) -> Matrix {
    prep.n_block().matmul(&lifted(&prep.p_hat, prep.r()))
}

/// `P(2) = (P^ (x) I_r) N`.
pub fn p2(prep: &DualPrep) -> Matrix {
    lifted(&prep.p_hat, prep.r()).matmul(&prep.n_block())
}

/// `P~(1) = N~ (P~ (x) I_r)`.
pub fn p1_tilde(prep: &DualPrep) -> Matrix {
    prep.n_tilde_block()
        .matmul(&lifted(&prep.p_tilde, prep.r()))
}

fn stationary_of(p: &Matrix, label: &str) -> Result<Vec<f64>> {
    linalg::stationary_vector(p, ChainKind::Discrete).map_err(|e| match e {
        Error::NotIrreducible => Error::Reducible(format!(": {label}")),
        other => other,
    })
}

/// `pi (I - N) log w`.
fn information_term(pi: &[f64], n: &Matrix, w: &[f64]) -> f64 {
    let logw: Vec<f64> = w.iter().map(|x| x.ln()).collect();
    let n_logw = n.mul_vec(&logw);
    let diff: Vec<f64> = logw.iter().zip(&n_logw).map(|(a, b)| a - b).collect();
    dot(pi, &diff)
}

/// Lower bound from the right-eigenvector dual, with the stationary vector of `P(1)`.
pub fn omega_lower_with_pi(prep: &DualPrep) -> Result<(f64, Vec<f64>)> {
    let pi1 = stationary_of(&p1(prep), "P(1)")?;
    let value = prep.growth_term() + information_term(&pi1, &prep.n_block(), &prep.v_bar);
    Ok((value, pi1))
}

pub fn omega_lower(prep: &DualPrep) -> Result<f64> {
    omega_lower_with_pi(prep).map(|(v, _)| v)
}

/// Lower bound from the left-eigenvector dual under time reversal.
pub fn omega_lower_alt_with_pi(prep: &DualPrep) -> Result<(f64, Vec<f64>)> {
    let pi1 = stationary_of(&p1_tilde(prep), "P~(1)")?;
    let value = prep.growth_term() + information_term(&pi1, &prep.n_tilde_block(), &prep.u_bar);
    Ok((value, pi1))
}

pub fn omega_lower_alt(prep: &DualPrep) -> Result<f64> {
    omega_lower_alt_with_pi(prep).map(|(v, _)| v)
}

pub fn compute_bounds(prep: &DualPrep, star: Option<&StarEstimate>) -> Result<BoundsReport> {
    let omega_upper = omega_upper(prep)?;
    let (omega_lower, pi1) = omega_lower_with_pi(prep)?;
    let (omega_lower_alt, pi1_tilde) = omega_lower_alt_with_pi(prep)?;
    let mut report = BoundsReport {
        growth_term: prep.growth_term(),
        omega_upper,
        omega_lower,
        omega_lower_alt,
        omega_lower_star: star.map(|s| StarBound {
            value: s.omega_lower_star,
            std_error: s.std_error,
            weighted_value: s.omega_lower_star_weighted,
            weighted_std_error: s.weighted_std_error,
        }),
        verdict_upper: if omega_upper <= 0.0 {
            UpperVerdict::ExtinctAlmostSurely
        } else {
            UpperVerdict::InconclusiveFromAbove
        },
        verdict_lower: LowerVerdict::InconclusiveFromBelow,
        pi1,
        pi1_tilde,
    };
    if report.best_lower() > 0.0 {
        report.verdict_lower = LowerVerdict::SurvivesWithPositiveProbability;
    }
    Ok(report)
}
