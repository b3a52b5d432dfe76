//! Dense linear algebra for the small matrices this crate works with.
//!
//! Everything here assumes `rows, cols` in the low hundreds at most. The
//! eigen routines only cover the nonnegative / Metzler irreducible case, where
//! Perron-Frobenius guarantees a real simple dominant eigenvalue.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Off-diagonal entries of a generator may dip this far below zero.
pub const GENERATOR_OFFDIAG_TOL: f64 = 1e-12;
/// Row sums of a generator (or stochastic matrix, minus one) must be this close to zero.
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Entries with magnitude at or below this count as zero in reachability checks.
pub const PATTERN_ZERO_TOL: f64 = 1e-12;

const POWER_MAX_ITER: usize = 100_000;
const PERRON_TOL: f64 = 1e-13;
const POISSON_TRUNC: f64 = 1e-18;

/// Row-major dense matrix with finite entries.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("matrix must be non-empty".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite entry at ({},{})",
                k / cols + 1,
                k % cols + 1
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n * m);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != m {
                return Err(Error::InvalidArgument(format!(
                    "row {} has {} entries, expected {m}",
                    i + 1,
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(n, m, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(v: &[f64]) -> Self {
        let mut m = Self::zeros(v.len(), v.len());
        for (i, &x) in v.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.rows, other.cols);
        matmul_into(self, other, &mut out);
        out
    }

    pub fn scale(&self, c: f64) -> Matrix {
        self.map(|x| c * x)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self * x` for a column vector `x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `x * self` for a row vector `x`.
    pub fn vec_mul(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += xi * a;
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn fill_identity(&mut self) {
        self.data.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] = 1.0;
        }
    }

    /// Divides every entry by `c`.
    pub fn div_assign_scalar(&mut self, c: f64) {
        self.data.iter_mut().for_each(|x| *x /= c);
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.data.chunks(self.cols)).finish()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(&rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.to_rows()
    }
}

/// `out = a * b` without allocating.
pub fn matmul_into(a: &Matrix, b: &Matrix, out: &mut Matrix) {
    assert_eq!(a.cols, b.rows);
    assert_eq!((out.rows, out.cols), (a.rows, b.cols));
    out.data.iter_mut().for_each(|x| *x = 0.0);
    for i in 0..a.rows {
        let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in a.row(i).iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for (o, &bkj) in orow.iter_mut().zip(b.row(k)) {
                *o += aik * bkj;
            }
        }
    }
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows * b.rows, a.cols * b.cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for k in 0..b.rows {
                for l in 0..b.cols {
                    out[(i * b.rows + k, j * b.cols + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn block_diag(blocks: &[Matrix]) -> Matrix {
    let rows = blocks.iter().map(Matrix::rows).sum();
    let cols = blocks.iter().map(Matrix::cols).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        for i in 0..b.rows {
            for j in 0..b.cols {
                out[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
        r0 += b.rows;
        c0 += b.cols;
    }
    out
}

/// Square Markov generator: nonnegative off-diagonals, zero row sums.
#[derive(Clone, PartialEq, Debug)]
pub struct GeneratorMatrix(Matrix);

impl GeneratorMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        check_generator(&m)?;
        Ok(Self(m))
    }

    /// Validates within tolerance, then clamps tiny negative off-diagonals
    /// to zero and resets the diagonal so rows sum to zero.
    pub fn new_projected(mut m: Matrix) -> Result<Self> {
        check_generator(&m)?;
        for i in 0..m.rows {
            let mut off = 0.0;
            for j in 0..m.cols {
                if i != j {
                    if m[(i, j)] < 0.0 {
                        m[(i, j)] = 0.0;
                    }
                    off += m[(i, j)];
                }
            }
            m[(i, i)] = -off;
        }
        Ok(Self(m))
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }
}

fn check_generator(m: &Matrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotGenerator(format!(
            "{}x{} matrix is not square",
            m.rows, m.cols
        )));
    }
    for i in 0..m.rows {
        for j in 0..m.cols {
            if i != j && m[(i, j)] < -GENERATOR_OFFDIAG_TOL {
                return Err(Error::NotGenerator(format!(
                    "negative off-diagonal {} at ({},{})",
                    m[(i, j)],
                    i + 1,
                    j + 1
                )));
            }
        }
        let s: f64 = m.row(i).iter().sum();
        if s.abs() > ROW_SUM_TOL {
            return Err(Error::NotGenerator(format!("row {} sums to {s}", i + 1)));
        }
    }
    Ok(())
}

/// Strong connectivity of the off-diagonal pattern `|m_ij| > zero_tol`.
pub fn is_irreducible(m: &Matrix, zero_tol: f64) -> bool {
    let n = m.rows;
    if n == 1 {
        return true;
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let e = if forward { m[(i, j)] } else { m[(j, i)] };
                if i != j && !seen[j] && e.abs() > zero_tol {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Normalized Poisson(`mean`) weights from `left` on, truncated where the
/// remaining mass is negligible. Starts at the mode so large means do not
/// underflow `exp(-mean)`.
fn poisson_weights(mean: f64) -> (usize, Vec<f64>) {
    if mean == 0.0 {
        return (0, vec![1.0]);
    }
    let mode = mean.floor() as usize;
    let mut down = Vec::new();
    let mut w = 1.0;
    let mut k = mode;
    while k > 0 {
        w *= k as f64 / mean;
        if w < POISSON_TRUNC {
            break;
        }
        down.push(w);
        k -= 1;
    }
    let left = mode - down.len();
    let mut weights: Vec<f64> = down.into_iter().rev().collect();
    weights.push(1.0);
    let mut w = 1.0;
    let mut k = mode;
    loop {
        k += 1;
        w *= mean / k as f64;
        if w < POISSON_TRUNC {
            break;
        }
        weights.push(w);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    (left, weights)
}

/// Reusable evaluator of `exp(theta * t)` for one generator, by uniformization.
///
/// Holds its scratch buffers so repeated calls do not allocate.
#[derive(Clone, Debug)]
pub struct GeneratorExp {
    rate: f64,
    kernel: Matrix,
    power: Matrix,
    scratch: Matrix,
}

impl GeneratorExp {
    pub fn new(theta: &GeneratorMatrix) -> Self {
        let g = theta.as_matrix();
        let n = g.rows;
        let rate = g.diagonal().iter().fold(0.0, |m: f64, d| m.max(d.abs()));
        let mut kernel = Matrix::identity(n);
        if rate > 0.0 {
            for i in 0..n {
                for j in 0..n {
                    kernel[(i, j)] += g[(i, j)] / rate;
                }
                // the uniformized kernel is stochastic and nonnegative
                kernel[(i, i)] = kernel[(i, i)].max(0.0);
            }
        }
        Self {
            rate,
            kernel,
            power: Matrix::zeros(n, n),
            scratch: Matrix::zeros(n, n),
        }
    }

    /// Writes `exp(theta * t)` into `out`.
    pub fn eval_into(&mut self, t: f64, out: &mut Matrix) -> Result<()> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "exponential time must be finite and nonnegative, got {t}"
            )));
        }
        if self.rate == 0.0 || t == 0.0 {
            out.fill_identity();
            return Ok(());
        }
        let (left, weights) = poisson_weights(self.rate * t);
        out.data.iter_mut().for_each(|x| *x = 0.0);
        self.power.fill_identity();
        for k in 0..left + weights.len() {
            if k > 0 {
                matmul_into(&self.power, &self.kernel, &mut self.scratch);
                std::mem::swap(&mut self.power, &mut self.scratch);
            }
            if k >= left {
                let w = weights[k - left];
                for (o, &p) in out.data.iter_mut().zip(&self.power.data) {
                    *o += w * p;
                }
            }
        }
        Ok(())
    }

    pub fn eval(&mut self, t: f64) -> Result<Matrix> {
        let n = self.kernel.rows;
        let mut out = Matrix::zeros(n, n);
        self.eval_into(t, &mut out)?;
        Ok(out)
    }
}

/// `exp(theta * t)` for a generator; the result is row-stochastic.
pub fn expm_generator(theta: &GeneratorMatrix, t: f64) -> Result<Matrix> {
    GeneratorExp::new(theta).eval(t)
}

/// Dominant eigenvalue with positive left and right eigenvectors,
/// normalized by `u.1 = 1` and `u.v = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerronTriple {
    pub lambda: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Normalized power iteration on a nonnegative primitive matrix, starting
/// from the all-ones vector. Returns the limit vector scaled to max 1.
fn power_vector(b: &Matrix) -> Result<Vec<f64>> {
    let n = b.rows;
    let mut x = vec![1.0; n];
    for _ in 0..POWER_MAX_ITER {
        let mut y = b.mul_vec(&x);
        let top = y.iter().copied().fold(0.0, f64::max);
        if !(top > 0.0) || !top.is_finite() {
            break;
        }
        y.iter_mut().for_each(|v| *v /= top);
        let change = x
            .iter()
            .zip(&y)
            .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        x = y;
        if change <= PERRON_TOL {
            return Ok(x);
        }
    }
    Err(Error::Convergence("Perron iteration failed".into()))
}

pub fn perron_triple(omega: &Matrix) -> Result<PerronTriple> {
    if !omega.is_square() {
        return Err(Error::InvalidArgument(
            "Perron triple needs a square matrix".into(),
        ));
    }
    let n = omega.rows;
    for i in 0..n {
        for j in 0..n {
            if i != j && omega[(i, j)] < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "negative off-diagonal at ({},{})",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    if !is_irreducible(omega, PATTERN_ZERO_TOL) {
        return Err(Error::Reducible(String::new()));
    }
    let shift = omega
        .diagonal()
        .iter()
        .fold(0.0, |m: f64, d| m.max(d.abs()))
        + 1.0;
    let b = omega.add(&Matrix::identity(n).scale(shift));
    let mut v = power_vector(&b)?;
    let mut u = power_vector(&b.transpose())?;
    let us: f64 = u.iter().sum();
    u.iter_mut().for_each(|x| *x /= us);
    let uv: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    v.iter_mut().for_each(|x| *x /= uv);
    let lambda = dot(&omega.vec_mul(&u), &v);
    Ok(PerronTriple { lambda, u, v })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ChainKind {
    /// Row-stochastic transition matrix.
    Discrete,
    /// Generator matrix.
    Continuous,
}

/// Stationary row vector of an irreducible chain.
pub fn stationary_vector(p: &Matrix, kind: ChainKind) -> Result<Vec<f64>> {
    if !p.is_square() {
        return Err(Error::InvalidArgument(
            "stationary vector needs a square matrix".into(),
        ));
    }
    let n = p.rows;
    let mut a = match kind {
        ChainKind::Discrete => {
            for i in 0..n {
                if p.row(i).iter().any(|&x| x < -GENERATOR_OFFDIAG_TOL) {
                    return Err(Error::InvalidArgument(format!(
                        "row {} has a negative probability",
                        i + 1
                    )));
                }
                let s: f64 = p.row(i).iter().sum();
                if (s - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "row {} sums to {s}, expected 1",
                        i + 1
                    )));
                }
            }
            p.sub(&Matrix::identity(n)).transpose()
        }
        ChainKind::Continuous => {
            check_generator(p)?;
            p.transpose()
        }
    };
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = Matrix::zeros(n, 1);
    rhs[(n - 1, 0)] = 1.0;
    let pi = solve(&a, &rhs).map_err(|_| Error::NotIrreducible)?;
    let mut pi = pi.data;
    if pi.iter().any(|&x| x < -1e-10) {
        return Err(Error::NotIrreducible);
    }
    pi.iter_mut().for_each(|x| *x = x.max(0.0));
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= s);
    Ok(pi)
}

/// Spectral radius of an entrywise nonnegative square matrix.
pub fn spectral_radius_nonneg(k: &Matrix) -> Result<f64> {
    if !k.is_square() {
        return Err(Error::InvalidArgument(
            "spectral radius needs a square matrix".into(),
        ));
    }
    if k.data.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidArgument("matrix has a negative entry".into()));
    }
    let n = k.rows;
    // K + I is aperiodic and sp(K + I) = sp(K) + 1
    let b = k.add(&Matrix::identity(n));
    let mut x = vec![1.0; n];
    let mut prev_est = f64::NAN;
    for _ in 0..POWER_MAX_ITER {
        let y = b.mul_vec(&x);
        // Collatz-Wielandt bracket, valid since x > 0
        let (lo, hi) = x
            .iter()
            .zip(&y)
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), (xi, yi)| {
                let r = yi / xi;
                (lo.min(r), hi.max(r))
            });
        if hi - lo <= 1e-14 * hi {
            return Ok(0.5 * (hi + lo) - 1.0);
        }
        let top = y.iter().copied().fold(0.0, f64::max);
        let change = x
            .iter()
            .zip(&y)
            .fold(0.0, |m: f64, (a, b)| m.max((a - b / top).abs()));
        x = y
            .into_iter()
            .map(|v| (v / top).max(f64::MIN_POSITIVE))
            .collect();
        // reducible input: the bracket may never close, fall back on the norm
        if change <= 1e-15 && (top - prev_est).abs() <= 1e-14 * top {
            return Ok(top - 1.0);
        }
        prev_est = top;
    }
    Err(Error::Convergence("spectral iteration failed".into()))
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !a.is_square() || a.rows != b.rows {
        return Err(Error::InvalidArgument("solve dimension mismatch".into()));
    }
    let n = a.rows;
    let nrhs = b.cols;
    let mut lu = a.clone();
    let mut x = b.clone();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| lu[(i, col)].abs().total_cmp(&lu[(j, col)].abs()))
            .unwrap();
        if lu[(piv, col)].abs() <= 1e-13 * scale {
            return Err(Error::Internal("singular linear system".into()));
        }
        if piv != col {
            for j in 0..n {
                lu.data.swap(piv * n + j, col * n + j);
            }
            for j in 0..nrhs {
                x.data.swap(piv * nrhs + j, col * nrhs + j);
            }
        }
        let p = lu[(col, col)];
        for i in col + 1..n {
            let f = lu[(i, col)] / p;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                lu[(i, j)] -= f * lu[(col, j)];
            }
            for j in 0..nrhs {
                x[(i, j)] -= f * x[(col, j)];
            }
        }
    }
    for col in (0..n).rev() {
        let p = lu[(col, col)];
        for j in 0..nrhs {
            let mut s = x[(col, j)];
            for k in col + 1..n {
                s -= lu[(col, k)] * x[(k, j)];
            }
            x[(col, j)] = s / p;
        }
    }
    Ok(x)
}
