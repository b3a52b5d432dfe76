//! The environment model: a generator `Q` for the environment and one
//! growth matrix per environment state.
//!
//! Model files are JSON:
//!
//! ```json
//! { "name": "optional", "Q": [[-5, 5], [2, -2]], "Omega": [[[..]], [[..]]] }
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, GeneratorMatrix, Matrix};

/// Relative threshold under which an entry of `Q` is structurally zero.
pub const STRUCTURAL_ZERO_REL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct EnvironmentModel {
    name: Option<String>,
    q: GeneratorMatrix,
    omegas: Vec<Matrix>,
    rates: Vec<f64>,
}

#[derive(Deserialize)]
struct RawModel {
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "Omega")]
    omega: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    name: Option<String>,
    #[serde(flatten)]
    extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Serialize)]
struct RawModelOut<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<&'a str>,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "Omega")]
    omega: Vec<Vec<Vec<f64>>>,
}

fn model_err(msg: impl Into<String>) -> Error {
    Error::Model(msg.into())
}

fn matrix_from_rows(label: &str, rows: &[Vec<f64>]) -> Result<Matrix> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(model_err(format!("dimension mismatch: {label} is empty")));
    }
    let n = rows[0].len();
    if let Some(i) = rows.iter().position(|r| r.len() != n) {
        return Err(model_err(format!(
            "dimension mismatch: {label} row {} has {} entries, expected {n}",
            i + 1,
            rows[i].len()
        )));
    }
    let m = Matrix::from_rows(rows).map_err(|e| model_err(format!("{label}: {e}")))?;
    if !m.is_square() {
        return Err(model_err(format!(
            "dimension mismatch: {label} is {}x{}, expected square",
            m.rows(),
            m.cols()
        )));
    }
    Ok(m)
}

impl EnvironmentModel {
    /// Validates and builds a model. Sojourn rates are read off `Q`'s diagonal.
    pub fn new(name: Option<String>, q: Matrix, omegas: Vec<Matrix>) -> Result<Self> {
        let m = q.rows();
        if !q.is_square() {
            return Err(model_err(format!(
                "dimension mismatch: Q is {}x{}, expected square",
                q.rows(),
                q.cols()
            )));
        }
        if omegas.len() != m {
            return Err(model_err(format!(
                "dimension mismatch: Q has {m} states but {} Omega matrices were given",
                omegas.len()
            )));
        }
        let r = omegas[0].rows();
        for (l, o) in omegas.iter().enumerate() {
            if o.rows() != r || o.cols() != r {
                return Err(model_err(format!(
                    "dimension mismatch: Omega[{}] is {}x{}, expected {r}x{r}",
                    l + 1,
                    o.rows(),
                    o.cols()
                )));
            }
        }
        let q = GeneratorMatrix::new(q).map_err(|e| match e {
            Error::NotGenerator(detail) => model_err(format!("Q not a generator: {detail}")),
            other => other,
        })?;
        let rates: Vec<f64> = q.as_matrix().diagonal().iter().map(|d| d.abs()).collect();
        if let Some(l) = rates.iter().position(|&c| c <= 0.0) {
            return Err(model_err(format!(
                "c_{} = 0 not allowed: environment state {} is absorbing",
                l + 1,
                l + 1
            )));
        }
        let zero = STRUCTURAL_ZERO_REL * q.as_matrix().max_abs();
        if !linalg::is_irreducible(q.as_matrix(), zero) {
            return Err(model_err("Q reducible"));
        }
        for (l, o) in omegas.iter().enumerate() {
            for i in 0..r {
                for j in 0..r {
                    if i != j && o[(i, j)] < 0.0 {
                        return Err(model_err(format!(
                            "Omega[{}] has negative off-diagonal at ({},{}): {}",
                            l + 1,
                            i + 1,
                            j + 1,
                            o[(i, j)]
                        )));
                    }
                }
            }
            if !linalg::is_irreducible(o, linalg::PATTERN_ZERO_TOL) {
                return Err(model_err(format!("Omega[{}] reducible", l + 1)));
            }
        }
        Ok(Self {
            name,
            q,
            omegas,
            rates,
        })
    }

    /// Number of environment states.
    pub fn m(&self) -> usize {
        self.q.dim()
    }

    /// Number of individual types.
    pub fn r(&self) -> usize {
        self.omegas[0].rows()
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn q(&self) -> &GeneratorMatrix {
        &self.q
    }

    pub fn omegas(&self) -> &[Matrix] {
        &self.omegas
    }

    /// Sojourn rates `c_l = |Q_ll|`.
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Jump chain transition matrix `I + C^-1 Q`.
    pub fn jump_matrix(&self) -> Matrix {
        let q = self.q.as_matrix();
        let m = self.m();
        let mut p = Matrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    p[(i, j)] = q[(i, j)] / self.rates[i];
                }
            }
        }
        p
    }

    /// Model with states renumbered so that new state `k` is old state `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let m = self.m();
        let mut seen = vec![false; m];
        if order.len() != m
            || order
                .iter()
                .any(|&k| k >= m || std::mem::replace(&mut seen[k], true))
        {
            return Err(Error::InvalidArgument(
                "not a permutation of the states".into(),
            ));
        }
        let q = self.q.as_matrix();
        let mut pq = Matrix::zeros(m, m);
        for (a, &i) in order.iter().enumerate() {
            for (b, &j) in order.iter().enumerate() {
                pq[(a, b)] = q[(i, j)];
            }
        }
        let omegas = order.iter().map(|&i| self.omegas[i].clone()).collect();
        Self::new(self.name.clone(), pq, omegas)
    }

    /// If the jump chain deterministically cycles through all states,
    /// returns the visiting order starting from state 0.
    pub fn detect_cycle(&self) -> Option<Vec<usize>> {
        let m = self.m();
        let q = self.q.as_matrix();
        let zero = STRUCTURAL_ZERO_REL * q.max_abs();
        let mut next = Vec::with_capacity(m);
        for i in 0..m {
            let succ: Vec<usize> = (0..m)
                .filter(|&j| j != i && q[(i, j)].abs() > zero)
                .collect();
            if succ.len() != 1 {
                return None;
            }
            next.push(succ[0]);
        }
        let mut order = vec![0];
        let mut s = next[0];
        while s != 0 {
            if order.len() == m {
                return None;
            }
            order.push(s);
            s = next[s];
        }
        (order.len() == m).then_some(order)
    }

    pub fn to_json(&self) -> String {
        let out = RawModelOut {
            name: self.name.as_deref(),
            q: self.q.as_matrix().to_rows(),
            omega: self.omegas.iter().map(Matrix::to_rows).collect(),
        };
        serde_json::to_string_pretty(&out).expect("model serialization cannot fail")
    }
}

/// Parses and validates a model document. With `strict`, unknown top-level
/// fields are rejected.
pub fn parse_model(document: &str, strict: bool) -> Result<EnvironmentModel> {
    let raw: RawModel = serde_json::from_str(document).map_err(|e| {
        use serde_json::error::Category;
        match e.classify() {
            Category::Syntax | Category::Eof | Category::Io => Error::Syntax {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            },
            Category::Data => model_err(format!("invalid model document: {e}")),
        }
    })?;
    if strict {
        if let Some(k) = raw.extra.keys().next() {
            return Err(model_err(format!("unknown field \"{k}\"")));
        }
    }
    let q = matrix_from_rows("Q", &raw.q)?;
    if raw.omega.is_empty() {
        return Err(model_err("dimension mismatch: Omega is empty"));
    }
    let omegas = raw
        .omega
        .iter()
        .enumerate()
        .map(|(l, o)| matrix_from_rows(&format!("Omega[{}]", l + 1), o))
        .collect::<Result<Vec<_>>>()?;
    EnvironmentModel::new(raw.name, q, omegas)
}
