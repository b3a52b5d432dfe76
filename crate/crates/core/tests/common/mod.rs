//! Fixtures, random model generators and brute-force oracles shared by the
//! integration tests. The oracles deliberately avoid the crate's own
//! numerics.

#![allow(dead_code, clippy::needless_range_loop)]

use blyap::linalg::Matrix;
use blyap::model::{parse_model, EnvironmentModel};
use blyap::spectral::{self, DualPrep};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const EX41: &str = include_str!("../../../cli/examples/ex41.json");
pub const EX42: &str = include_str!("../../../cli/examples/ex42.json");
pub const CYCLIC3: &str = include_str!("../../../cli/examples/cyclic3.json");
pub const SCALAR: &str = include_str!("../../../cli/examples/scalar.json");

pub fn model(doc: &str) -> EnvironmentModel {
    parse_model(doc, true).expect("fixture parses")
}

pub fn prep(doc: &str) -> DualPrep {
    spectral::prepare(&model(doc)).expect("fixture prepares")
}

/// Square matrix with nonnegative off-diagonals that always contains the
/// cycle `0 -> 1 -> ... -> n-1 -> 0`, hence irreducible.
fn metzler(rng: &mut ChaCha8Rng, n: usize, density: f64, off: (f64, f64)) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let on_cycle = n > 1 && j == (i + 1) % n;
            if i != j && (on_cycle || rng.gen_bool(density)) {
                a[i][j] = rng.gen_range(off.0..off.1);
            }
        }
    }
    a
}

fn generator_rows(rng: &mut ChaCha8Rng, m: usize, density: f64) -> Vec<Vec<f64>> {
    let mut q = metzler(rng, m, density, (0.2, 5.0));
    for (i, row) in q.iter_mut().enumerate() {
        let s: f64 = row.iter().sum();
        row[i] = -s;
    }
    q
}

fn omega_rows(rng: &mut ChaCha8Rng, r: usize) -> Vec<Vec<f64>> {
    let mut w = metzler(rng, r, 0.7, (0.1, 10.0));
    for (i, row) in w.iter_mut().enumerate() {
        row[i] = rng.gen_range(-20.0..5.0);
    }
    w
}

fn build(q: Vec<Vec<f64>>, omegas: Vec<Vec<Vec<f64>>>) -> EnvironmentModel {
    let q = Matrix::from_rows(&q).unwrap();
    let omegas = omegas
        .iter()
        .map(|w| Matrix::from_rows(w).unwrap())
        .collect();
    EnvironmentModel::new(None, q, omegas).expect("generated model is valid")
}

pub fn random_model(rng: &mut ChaCha8Rng, m: usize, r: usize) -> EnvironmentModel {
    let q = generator_rows(rng, m, 0.6);
    let omegas = (0..m).map(|_| omega_rows(rng, r)).collect();
    build(q, omegas)
}

/// Environment that visits `0, 1, ..., m-1` in turn.
pub fn random_cyclic_model(rng: &mut ChaCha8Rng, m: usize, r: usize) -> EnvironmentModel {
    let q = generator_rows(rng, m, 0.0);
    let omegas = (0..m).map(|_| omega_rows(rng, r)).collect();
    build(q, omegas)
}

/// Every `Omega_l` is `a I + b A + c A^2` for a shared nonnegative `A`.
pub fn random_commuting_model(
    rng: &mut ChaCha8Rng,
    m: usize,
    r: usize,
    cyclic: bool,
) -> EnvironmentModel {
    let q = generator_rows(rng, m, if cyclic { 0.0 } else { 0.6 });
    let a = Matrix::from_rows(&metzler(rng, r, 0.5, (0.1, 3.0))).unwrap();
    let a2 = a.matmul(&a);
    let omegas = (0..m)
        .map(|_| {
            let shift = rng.gen_range(-15.0..5.0);
            let b = rng.gen_range(0.5..3.0);
            let c = rng.gen_range(0.0..1.0);
            Matrix::identity(r)
                .scale(shift)
                .add(&a.scale(b))
                .add(&a2.scale(c))
                .to_rows()
        })
        .collect();
    build(q, omegas)
}

pub fn scalar_model(rng: &mut ChaCha8Rng, m: usize, cyclic: bool) -> EnvironmentModel {
    let q = generator_rows(rng, m, if cyclic { 0.0 } else { 0.6 });
    let omegas = (0..m)
        .map(|_| vec![vec![rng.gen_range(-10.0..10.0)]])
        .collect();
    build(q, omegas)
}

/// `sum_k pi^_k lambda_k / c_k` computed from scratch for r = 1, and from
/// the preparation's own eigenvalues otherwise.
pub fn growth_term_of(prep: &DualPrep) -> f64 {
    prep.pi_hat
        .iter()
        .zip(&prep.states)
        .map(|(p, s)| p * s.lambda() / s.rate)
        .sum()
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let p = b[0].len();
    let mut out = vec![vec![0.0; p]; n];
    for i in 0..n {
        for k in 0..b.len() {
            for j in 0..p {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn to_vecs(m: &Matrix) -> Vec<Vec<f64>> {
    m.to_rows()
}

pub fn product(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    mat_mul(a, b)
}

/// `exp(A)` by scaling and squaring around a `terms`-term Taylor series.
pub fn taylor_expm(a: &[Vec<f64>], terms: usize) -> Vec<Vec<f64>> {
    let n = a.len();
    let norm = a
        .iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0;
    while norm / f64::powi(2.0, squarings) > 0.5 {
        squarings += 1;
    }
    let s = f64::powi(2.0, squarings);
    let scaled: Vec<Vec<f64>> = a
        .iter()
        .map(|r| r.iter().map(|x| x / s).collect())
        .collect();
    let mut sum = vec![vec![0.0; n]; n];
    let mut term = vec![vec![0.0; n]; n];
    for i in 0..n {
        sum[i][i] = 1.0;
        term[i][i] = 1.0;
    }
    for k in 1..terms {
        term = mat_mul(&term, &scaled);
        for row in term.iter_mut() {
            for x in row.iter_mut() {
                *x /= k as f64;
            }
        }
        for i in 0..n {
            for j in 0..n {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        sum = mat_mul(&sum, &sum);
    }
    sum
}

/// Gauss-Jordan inverse with full pivoting.
pub fn dense_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut w: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    let mut col_perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (mut pi, mut pj, mut best) = (k, k, -1.0);
        for i in k..n {
            for j in k..n {
                if w[i][j].abs() > best {
                    best = w[i][j].abs();
                    pi = i;
                    pj = j;
                }
            }
        }
        assert!(best > 0.0, "singular matrix in oracle");
        w.swap(k, pi);
        if pj != k {
            for row in w.iter_mut() {
                row.swap(k, pj);
            }
            col_perm.swap(k, pj);
        }
        let p = w[k][k];
        for x in w[k].iter_mut() {
            *x /= p;
        }
        for i in 0..n {
            if i != k {
                let f = w[i][k];
                if f != 0.0 {
                    for j in 0..2 * n {
                        w[i][j] -= f * w[k][j];
                    }
                }
            }
        }
    }
    // Column swaps on the left block permute the rows of the inverse.
    let mut inv = vec![vec![0.0; n]; n];
    for k in 0..n {
        inv[col_perm[k]] = w[k][n..].to_vec();
    }
    inv
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &Matrix) -> f64 {
    let mut d: f64 = 0.0;
    for (i, row) in a.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            d = d.max((x - b[(i, j)]).abs());
        }
    }
    d
}
