//! Per-state Perron data and every derived matrix the bounds and the
//! simulators need.
//!
//! For each environment state `l` with growth matrix `Omega_l` and Perron
//! triple `(lambda_l, u_l, v_l)`:
//!
//! * `Theta_l = diag(v)^-1 (Omega_l - lambda_l I) diag(v)` and
//!   `Theta'_l = diag(u)^-1 (Omega_l - lambda_l I)^T diag(u)` are generators;
//! * `N_l = c_l (c_l I - Theta_l)^-1` and `N~_l = c_l (c_l I - Theta'_l)^-1`
//!   are stochastic;
//! * `M_l = diag(v) N_l diag(v)^-1`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, ChainKind, GeneratorExp, GeneratorMatrix, Matrix, ROW_SUM_TOL};
use crate::model::EnvironmentModel;

pub use crate::linalg::PerronTriple;

/// Smallest eigenvector entry accepted before taking logs.
pub const MIN_EIGENVECTOR_ENTRY: f64 = 1e-300;

#[derive(Clone, Debug)]
pub struct StateDual {
    pub triple: PerronTriple,
    pub rate: f64,
    pub omega_star: Matrix,
    pub theta: GeneratorMatrix,
    pub theta_prime: GeneratorMatrix,
    pub n: Matrix,
    pub n_tilde: Matrix,
    pub m: Matrix,
}

impl StateDual {
    pub fn lambda(&self) -> f64 {
        self.triple.lambda
    }

    /// `Delta = diag(v)`.
    pub fn delta(&self) -> Matrix {
        Matrix::diag(&self.triple.v)
    }

    /// `Delta' = diag(u)`.
    pub fn delta_prime(&self) -> Matrix {
        Matrix::diag(&self.triple.u)
    }

    /// Writes `Delta exp(Theta t) Delta^-1 = exp((Omega - lambda I) t)` into `out`.
    pub fn centered_exp_into(
        &self,
        exp: &mut GeneratorExp,
        t: f64,
        out: &mut Matrix,
    ) -> Result<()> {
        exp.eval_into(t, out)?;
        let v = &self.triple.v;
        let r = v.len();
        for i in 0..r {
            for j in 0..r {
                out[(i, j)] *= v[i] / v[j];
            }
        }
        Ok(())
    }
}

/// Everything derived from a model that the bounds need.
#[derive(Clone, Debug)]
pub struct DualPrep {
    pub states: Vec<StateDual>,
    pub p_hat: Matrix,
    pub pi_hat: Vec<f64>,
    pub p_tilde: Matrix,
    pub v_bar: Vec<f64>,
    pub u_bar: Vec<f64>,
}

impl DualPrep {
    pub fn m(&self) -> usize {
        self.states.len()
    }

    pub fn r(&self) -> usize {
        self.states[0].triple.v.len()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.states.iter().map(StateDual::lambda).collect()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.rate).collect()
    }

    /// Block-diagonal `M`.
    pub fn m_block(&self) -> Matrix {
        linalg::block_diag(&self.states.iter().map(|s| s.m.clone()).collect::<Vec<_>>())
    }

    /// Block-diagonal `N`.
    pub fn n_block(&self) -> Matrix {
        linalg::block_diag(&self.states.iter().map(|s| s.n.clone()).collect::<Vec<_>>())
    }

    /// Block-diagonal `N~`.
    pub fn n_tilde_block(&self) -> Matrix {
        linalg::block_diag(
            &self
                .states
                .iter()
                .map(|s| s.n_tilde.clone())
                .collect::<Vec<_>>(),
        )
    }

    /// Expected long-run growth `sum_l pi^_l lambda_l / c_l`.
    pub fn growth_term(&self) -> f64 {
        self.pi_hat
            .iter()
            .zip(&self.states)
            .map(|(p, s)| p * s.lambda() / s.rate)
            .sum()
    }
}

/// `Theta_ij = A_ij w_j / w_i`, i.e. `diag(w)^-1 A diag(w)`.
fn similarity(a: &Matrix, w: &[f64]) -> Matrix {
    let mut out = a.clone();
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            out[(i, j)] *= w[j] / w[i];
        }
    }
    out
}

/// `c (c I - theta)^-1`, checked stochastic and cleaned of rounding.
fn resolvent(theta: &GeneratorMatrix, c: f64) -> Result<Matrix> {
    let r = theta.dim();
    let ci = Matrix::identity(r).scale(c);
    let a = ci.sub(theta.as_matrix());
    let mut n =
        linalg::solve(&a, &ci).map_err(|_| Error::Internal("resolvent solve singular".into()))?;
    for i in 0..r {
        let s: f64 = n.row(i).iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL || n.row(i).iter().any(|&x| x < -1e-12) {
            return Err(Error::Internal(format!(
                "resolvent row {} is not stochastic (sum {s})",
                i + 1
            )));
        }
        let mut s = 0.0;
        for j in 0..r {
            n[(i, j)] = n[(i, j)].max(0.0);
            s += n[(i, j)];
        }
        for j in 0..r {
            n[(i, j)] /= s;
        }
    }
    Ok(n)
}

fn prepare_state(omega: &Matrix, rate: f64) -> Result<StateDual> {
    let triple = linalg::perron_triple(omega)?;
    if triple
        .u
        .iter()
        .chain(&triple.v)
        .any(|&x| !(x > MIN_EIGENVECTOR_ENTRY))
    {
        return Err(Error::Internal("Perron vector entry underflow".into()));
    }
    let r = omega.rows();
    let omega_star = omega.sub(&Matrix::identity(r).scale(triple.lambda));
    let theta = GeneratorMatrix::new_projected(similarity(&omega_star, &triple.v))
        .map_err(|e| Error::Internal(format!("Theta is not a generator: {e}")))?;
    let theta_prime =
        GeneratorMatrix::new_projected(similarity(&omega_star.transpose(), &triple.u))
            .map_err(|e| Error::Internal(format!("Theta' is not a generator: {e}")))?;
    let n = resolvent(&theta, rate)?;
    let n_tilde = resolvent(&theta_prime, rate)?;
    // M = Delta N Delta^-1 is similarity with 1/v
    let inv_v: Vec<f64> = triple.v.iter().map(|x| 1.0 / x).collect();
    let m = similarity(&n, &inv_v);
    if m.as_slice().iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Internal("M has a non-positive entry".into()));
    }
    Ok(StateDual {
        triple,
        rate,
        omega_star,
        theta,
        theta_prime,
        n,
        n_tilde,
        m,
    })
}

pub fn prepare(model: &EnvironmentModel) -> Result<DualPrep> {
    let states = model
        .omegas()
        .par_iter()
        .zip(model.rates().par_iter())
        .map(|(o, &c)| prepare_state(o, c))
        .collect::<Result<Vec<_>>>()?;
    let p_hat = model.jump_matrix();
    let pi_hat = linalg::stationary_vector(&p_hat, ChainKind::Discrete)?;
    let m = model.m();
    let mut p_tilde = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            p_tilde[(i, j)] = pi_hat[j] * p_hat[(j, i)] / pi_hat[i];
        }
        let s: f64 = p_tilde.row(i).iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::Internal(
                "time-reversed chain is not stochastic".into(),
            ));
        }
        for j in 0..m {
            p_tilde[(i, j)] /= s;
        }
    }
    let v_bar = states
        .iter()
        .flat_map(|s| s.triple.v.iter().copied())
        .collect();
    let u_bar = states
        .iter()
        .flat_map(|s| s.triple.u.iter().copied())
        .collect();
    Ok(DualPrep {
        states,
        p_hat,
        pi_hat,
        p_tilde,
        v_bar,
        u_bar,
    })
}

/// Free-function form of [`DualPrep::growth_term`].
pub fn growth_term(prep: &DualPrep) -> f64 {
    prep.growth_term()
}
