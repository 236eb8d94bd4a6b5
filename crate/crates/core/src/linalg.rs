//! Dense linear-algebra helpers shared by the estimators, risks and
//! diagnostics. Factorizations come from `nalgebra`; the tridiagonal
//! eigen-solver and the power iteration are local.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // math methods without std
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

/// Relative singular/eigen-value cutoff used by every pseudoinverse.
pub const PINV_RTOL: f64 = 1e-10;

/// Left-to-right dot product. The summation order is part of the contract
/// of [`crate::inner_products`].
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Solves `(A + shift I) x = b` for symmetric positive semi-definite `A` via
/// Cholesky. On failure retries once with jitter `1e-10 * trace / dim`.
pub fn solve_spd_shifted(a: &DMatrix<f64>, shift: f64, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "system {}x{} with rhs of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let mut m = a.clone();
    for i in 0..n {
        m[(i, i)] += shift;
    }
    if let Some(ch) = m.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    let jitter = 1e-10 * m.trace().abs().max(f64::MIN_POSITIVE) / n.max(1) as f64;
    for i in 0..n {
        m[(i, i)] += jitter;
    }
    m.cholesky()
        .map(|ch| ch.solve(b))
        .ok_or_else(|| Error::Numeric(format!("Cholesky failed on {n}x{n} system after jitter {jitter:e}")))
}

/// Minimum-norm least-squares solution of `A x = b` through a truncated SVD
/// that drops singular values below `rtol * sigma_max`.
pub fn pinv_solve(a: &DMatrix<f64>, b: &DVector<f64>, rtol: f64) -> Result<DVector<f64>> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} rows, rhs has {}",
            a.nrows(),
            b.len()
        )));
    }
    let svd = a.clone().try_svd(true, true, f64::EPSILON, 0).ok_or_else(|| {
        Error::Numeric(format!("SVD did not converge on {}x{} matrix", a.nrows(), a.ncols()))
    })?;
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = rtol * smax;
    let utb = u.transpose() * b;
    let mut scaled = DVector::zeros(utb.len());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            scaled[i] = utb[i] / s;
        }
    }
    Ok(vt.transpose() * scaled)
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// non-increasing order.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap_or(core::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// `v^T M^+ v` for symmetric positive semi-definite `M`, dropping eigenvalues
/// below `rtol * lambda_max`.
pub fn sym_pinv_quadratic(m: &DMatrix<f64>, v: &DVector<f64>, rtol: f64) -> Result<f64> {
    let x = sym_pinv_apply(m, v, rtol)?;
    Ok(v.dot(&x))
}

/// `M^+ v` for symmetric positive semi-definite `M`.
pub fn sym_pinv_apply(m: &DMatrix<f64>, v: &DVector<f64>, rtol: f64) -> Result<DVector<f64>> {
    if m.nrows() != v.len() || m.ncols() != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix against vector of length {}",
            m.nrows(),
            m.ncols(),
            v.len()
        )));
    }
    let eig = m.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let cut = rtol * lmax;
    let qtv = eig.eigenvectors.transpose() * v;
    let mut scaled = DVector::zeros(qtv.len());
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > cut && l > 0.0 {
            scaled[i] = qtv[i] / l;
        }
    }
    Ok(&eig.eigenvectors * scaled)
}

/// Symmetric matrix stored as its packed upper triangle (row-major), for
/// large operators that only need mat-vec products.
#[derive(Debug, Clone)]
pub struct PackedSym {
    n: usize,
    data: Vec<f64>,
}

impl PackedSym {
    pub fn zeros(n: usize) -> Self {
        PackedSym { n, data: vec![0.0; n * (n + 1) / 2] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.row_start(i.min(j)) + (i.max(j) - i.min(j))]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.row_start(i.min(j)) + (i.max(j) - i.min(j));
        self.data[k] = v;
    }

    #[inline]
    fn row_start(&self, i: usize) -> usize {
        // rows 0..i hold n, n-1, ..., n-i+1 entries
        i * self.n - i * i.saturating_sub(1) / 2
    }

    /// Mutable view of row `i` of the upper triangle: entries `(i, i..n)`.
    pub fn upper_row_mut(&mut self, i: usize) -> &mut [f64] {
        let s = self.row_start(i);
        let len = self.n - i;
        &mut self.data[s..s + len]
    }

    pub fn upper_row(&self, i: usize) -> &[f64] {
        let s = self.row_start(i);
        &self.data[s..s + self.n - i]
    }

    /// `out = self * x`
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..self.n {
            let row = self.upper_row(i);
            let xi = x[i];
            let mut acc = row[0] * xi;
            for (k, &a) in row.iter().enumerate().skip(1) {
                let j = i + k;
                acc += a * x[j];
                out[j] += a * xi;
            }
            out[i] += acc;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            let row = self.upper_row(i);
            acc += row[0] * row[0];
            acc += 2.0 * row[1..].iter().map(|v| v * v).sum::<f64>();
        }
        acc.sqrt()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

/// Outcome of a power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    pub norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Settings for [`op_norm_symmetric`].
#[derive(Debug, Clone, Copy)]
pub struct PowerSettings {
    pub rtol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for PowerSettings {
    fn default() -> Self {
        PowerSettings { rtol: 1e-6, max_iter: 1000, restarts: 3, seed: 0x5eed }
    }
}

/// Operator norm of a symmetric operator given by its action, by power
/// iteration from `restarts` Gaussian starts; returns the largest estimate.
pub fn op_norm_symmetric<F>(dim: usize, mut apply: F, settings: PowerSettings) -> PowerEstimate
where
    F: FnMut(&[f64], &mut [f64]),
{
    if dim == 0 {
        return PowerEstimate { norm: 0.0, converged: true, iterations: 0 };
    }
    let mut best = PowerEstimate { norm: 0.0, converged: true, iterations: 0 };
    let mut v = vec![0.0; dim];
    let mut w = vec![0.0; dim];
    for restart in 0..settings.restarts.max(1) {
        let mut r = rng::stream(settings.seed, "power-iteration", &[restart as u64]);
        for x in v.iter_mut() {
            *x = r.sample(StandardNormal);
        }
        let nv = norm2(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let mut est = 0.0;
        let mut converged = false;
        let mut iters = 0;
        for it in 0..settings.max_iter {
            iters = it + 1;
            apply(&v, &mut w);
            let nw = norm2(&w);
            if nw == 0.0 {
                est = 0.0;
                converged = true;
                break;
            }
            let prev = est;
            est = nw;
            for (a, b) in v.iter_mut().zip(&w) {
                *a = b / nw;
            }
            if it > 0 && (est - prev).abs() <= settings.rtol * est {
                converged = true;
                break;
            }
        }
        if est > best.norm || restart == 0 {
            best = PowerEstimate { norm: est, converged, iterations: iters };
        }
    }
    best
}

/// Operator norm of a dense (possibly rectangular) matrix via power
/// iteration on `A^T A`.
pub fn op_norm_dense(a: &DMatrix<f64>, settings: PowerSettings) -> PowerEstimate {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return PowerEstimate { norm: 0.0, converged: true, iterations: 0 };
    }
    let mut tmp = DVector::zeros(r);
    let est = op_norm_symmetric(
        c,
        |x, out| {
            let xv = DVector::from_column_slice(x);
            a.mul_to(&xv, &mut tmp);
            let y = a.tr_mul(&tmp);
            out.copy_from_slice(y.as_slice());
        },
        settings,
    );
    PowerEstimate { norm: est.norm.sqrt(), ..est }
}

/// Eigenvalues and squared first eigenvector components of a symmetric
/// tridiagonal matrix (implicit QL with Wilkinson shifts). `off[i]` couples
/// rows `i` and `i + 1`; only the first row of the eigenvector matrix is
/// tracked, which is what Golub-Welsch quadrature needs.
pub fn tridiagonal_eigen_first(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&off[..n - 1]);
    let mut z = vec![0.0; n];
    z[0] = 1.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Numeric(format!(
                    "tridiagonal eigen-solver did not converge for {n} nodes"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = libm::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = libm::hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap_or(core::cmp::Ordering::Equal));
    let nodes = idx.iter().map(|&i| d[i]).collect();
    let w = idx.iter().map(|&i| z[i] * z[i]).collect();
    Ok((nodes, w))
}
