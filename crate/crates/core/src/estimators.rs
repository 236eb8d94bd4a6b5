//! Feature and kernel matrices, and the ridge solvers for random features
//! (RFRR) and kernel (KRR) regression.
//!
//! RFRR coefficients are stored as `b = a / N`, so the predictor is
//! `f(x) = sum_j b_j sigma(<x, theta_j> / sqrt(d))` and `b` minimizes
//! `|y - Z b|^2 + lambda N |b|^2`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // math methods without std
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::domains::{DomainKind, DomainSpec, PointMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, PINV_RTOL};
use crate::orthopoly::{
    activation_coeffs_with, degeneracy_f64, Activation, CoeffSettings, Gegenbauer, GegenbauerCoeffs, Recurrence,
};
use crate::rng;
use crate::spectrum::TargetFunction;

/// `Z_{ij} = sigma(<x_i, theta_j> / sqrt(d))`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub z: DMatrix<f64>,
    pub x_seed: u64,
    pub theta_seed: u64,
    pub activation: String,
}

pub fn build_feature_matrix(
    domain: &DomainSpec,
    x: &PointMatrix,
    theta: &PointMatrix,
    act: &Activation,
) -> Result<FeatureMatrix> {
    if x.dim() != theta.dim() || x.dim() != domain.d {
        return Err(Error::DimensionMismatch(format!(
            "points of dimension {} and {} on a d = {} domain",
            x.dim(),
            theta.dim(),
            domain.d
        )));
    }
    let bound = act.on(domain);
    let scale = 1.0 / (domain.d as f64).sqrt();
    let mut z = DMatrix::zeros(x.rows(), theta.rows());
    for (j, th) in theta.iter_rows().enumerate() {
        let mut col = z.column_mut(j);
        for (i, xi) in x.iter_rows().enumerate() {
            col[i] = bound.eval(linalg::dot(xi, th) * scale);
        }
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("non-finite feature values for {}", act.description)));
    }
    Ok(FeatureMatrix { z, x_seed: x.seed(), theta_seed: theta.seed(), activation: act.description.clone() })
}

/// Controls the Gegenbauer truncation of kernel series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSettings {
    /// Target `tail_trace <= tail_rtol * total_trace`.
    pub tail_rtol: f64,
    /// Largest degree used on the sphere.
    pub sphere_kmax_cap: usize,
    /// Largest degree used on the hypercube.
    pub hypercube_kmax_cap: usize,
    /// Error out instead of truncating at the cap when the tail target is missed.
    pub strict: bool,
    pub coeffs: CoeffSettings,
}

impl Default for KernelSettings {
    fn default() -> Self {
        KernelSettings {
            tail_rtol: 1e-10,
            sphere_kmax_cap: 60,
            hypercube_kmax_cap: 4096,
            strict: false,
            coeffs: CoeffSettings::default(),
        }
    }
}

/// Coefficients truncated at the smallest degree meeting the tail target,
/// or at the cap.
pub fn kernel_coeffs(domain: &DomainSpec, act: &Activation, settings: &KernelSettings) -> Result<GegenbauerCoeffs> {
    let cap = match domain.kind {
        DomainKind::Sphere => settings.sphere_kmax_cap,
        DomainKind::Hypercube => settings.hypercube_kmax_cap.min(domain.d),
    };
    let full = activation_coeffs_with(domain, act, cap, &settings.coeffs)?;
    let target = settings.tail_rtol * full.total_l2;
    let traces = full.level_traces();
    let mut tail = full.tail_trace;
    let mut kmax = cap;
    while kmax > 0 && tail + traces[kmax] <= target {
        tail += traces[kmax];
        kmax -= 1;
    }
    if tail > target && settings.strict {
        return Err(Error::Numeric(format!(
            "kernel tail {:e} exceeds {:e} at degree cap {cap}",
            tail, target
        )));
    }
    let mut out = full;
    out.xi.truncate(kmax + 1);
    out.kmax = kmax;
    out.tail_trace = tail;
    Ok(out)
}

/// A zonal kernel `K(x, x') = sum_k c_k Q_k(<x, x'>)` with a fixed diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSeries {
    pub domain: DomainSpec,
    pub coeffs: Vec<f64>,
    /// Value used for `K(x, x)`; includes the folded tail.
    pub diagonal: f64,
    /// Trace omitted off the diagonal; bounds the off-diagonal truncation error.
    pub tail: f64,
}

impl KernelSeries {
    /// `H`: `c_k = xi_k^2 B_k`, diagonal equal to the total trace.
    pub fn activation_kernel(coeffs: &GegenbauerCoeffs) -> Self {
        let c: Vec<f64> = (0..=coeffs.kmax).map(|k| coeffs.level_trace(k)).collect();
        KernelSeries {
            domain: coeffs.domain,
            diagonal: c.iter().sum::<f64>() + coeffs.tail_trace,
            coeffs: c,
            tail: coeffs.tail_trace,
        }
    }

    /// `M(x, x') = E_z[H(x, z) H(z, x')]`: `c_k = xi_k^4 B_k`.
    pub fn second_moment_kernel(coeffs: &GegenbauerCoeffs) -> Self {
        let c: Vec<f64> = (0..=coeffs.kmax).map(|k| coeffs.xi[k].powi(4) * coeffs.degeneracy(k)).collect();
        let last = coeffs.xi[coeffs.kmax].powi(2);
        KernelSeries { domain: coeffs.domain, diagonal: c.iter().sum(), coeffs: c, tail: last * coeffs.tail_trace }
    }

    /// Cross kernel `sum_k w_k Q_k(<v, x>)` against a target:
    /// `w_k = xi_k(g) xi_k^power B_k`.
    pub fn target_cross(coeffs: &GegenbauerCoeffs, target: &TargetFunction, power: i32) -> Self {
        let top = coeffs.kmax.min(target.max_level());
        let c: Vec<f64> =
            (0..=top).map(|k| target.xi(k) * coeffs.xi[k].powi(power) * coeffs.degeneracy(k)).collect();
        KernelSeries { domain: coeffs.domain, diagonal: Gegenbauer::new(&coeffs.domain).series(coeffs.domain.d as f64, &c), coeffs: c, tail: 0.0 }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        Gegenbauer::new(&self.domain).series(t, &self.coeffs)
    }

    /// Precomputed recurrence through the series degree.
    pub fn recurrence(&self) -> Recurrence {
        Recurrence::new(&self.domain, self.coeffs.len().saturating_sub(1))
    }

    /// Symmetric Gram matrix on `pts`, with [`Self::diagonal`] on the diagonal.
    pub fn gram(&self, pts: &PointMatrix) -> DMatrix<f64> {
        let n = pts.rows();
        let g = self.recurrence();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diagonal;
            let xi = pts.row(i);
            for j in i + 1..n {
                let v = g.series(linalg::dot(xi, pts.row(j)), &self.coeffs);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// `K(a_i, b_j)` for distinct point sets (no diagonal correction).
    pub fn cross(&self, a: &PointMatrix, b: &PointMatrix) -> DMatrix<f64> {
        let g = self.recurrence();
        let mut m = DMatrix::zeros(a.rows(), b.rows());
        for (j, y) in b.iter_rows().enumerate() {
            for (i, x) in a.iter_rows().enumerate() {
                m[(i, j)] = g.series(linalg::dot(x, y), &self.coeffs);
            }
        }
        m
    }

    /// `K(v, p_i)` for one fixed point `v`.
    pub fn against(&self, v: &[f64], pts: &PointMatrix) -> DVector<f64> {
        let g = self.recurrence();
        DVector::from_iterator(pts.rows(), pts.iter_rows().map(|x| g.series(linalg::dot(v, x), &self.coeffs)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// Activation kernel on data points.
    H,
    /// Second-moment kernel on data points.
    M,
    /// Activation kernel on feature directions.
    U,
}

/// Kernel matrices on one point set. `h` and `u` are the same series,
/// evaluated on data points and feature directions respectively.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrices {
    pub h: Option<DMatrix<f64>>,
    pub m: Option<DMatrix<f64>>,
    pub u: Option<DMatrix<f64>>,
    pub kmax: usize,
    /// Off-diagonal truncation bound.
    pub tail_trace: f64,
}

pub fn build_kernels(pts: &PointMatrix, coeffs: &GegenbauerCoeffs, which: &[KernelKind]) -> Result<KernelMatrices> {
    if pts.dim() != coeffs.domain.d {
        return Err(Error::DimensionMismatch(format!(
            "points of dimension {} for a d = {} kernel",
            pts.dim(),
            coeffs.domain.d
        )));
    }
    let h = KernelSeries::activation_kernel(coeffs);
    let mut out = KernelMatrices { h: None, m: None, u: None, kmax: coeffs.kmax, tail_trace: coeffs.tail_trace };
    for kind in which {
        match kind {
            KernelKind::H => out.h = Some(h.gram(pts)),
            KernelKind::U => out.u = Some(h.gram(pts)),
            KernelKind::M => out.m = Some(KernelSeries::second_moment_kernel(coeffs).gram(pts)),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Rfrr,
    Krr,
}

/// Fitted coefficients: `b` (length N) for RFRR, `zeta` (length n) for KRR.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub kind: ModelKind,
    pub coeffs: DVector<f64>,
    pub lambda: f64,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Config(format!("ridge parameter must be finite and >= 0, got {lambda}")));
    }
    Ok(())
}

/// Solves `min |y - Z b|^2 + lambda N |b|^2`. For `lambda > 0` Cholesky on
/// the smaller Gram side; for `lambda = 0` the minimum-norm least-squares
/// solution through a truncated SVD of `Z`.
pub fn fit_rfrr(z: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<FittedModel> {
    check_lambda(lambda)?;
    let (n, big_n) = z.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("{n} rows in Z, {} labels", y.len())));
    }
    let yv = DVector::from_column_slice(y);
    let b = if lambda == 0.0 {
        linalg::pinv_solve(z, &yv, PINV_RTOL)?
    } else {
        let shift = lambda * big_n as f64;
        if big_n <= n {
            let g = z.tr_mul(z);
            linalg::solve_spd_shifted(&g, shift, &z.tr_mul(&yv))?
        } else {
            let g = z * z.transpose();
            let alpha = linalg::solve_spd_shifted(&g, shift, &yv)?;
            z.tr_mul(&alpha)
        }
    };
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite RFRR coefficients".into()));
    }
    Ok(FittedModel { kind: ModelKind::Rfrr, coeffs: b, lambda })
}

/// `zeta = (H + lambda I)^{-1} y`; at `lambda = 0` the eigenvalue
/// pseudoinverse of `H`.
pub fn fit_krr(h: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<FittedModel> {
    check_lambda(lambda)?;
    if h.nrows() != y.len() || h.ncols() != y.len() {
        return Err(Error::DimensionMismatch(format!("{}x{} kernel, {} labels", h.nrows(), h.ncols(), y.len())));
    }
    let yv = DVector::from_column_slice(y);
    let zeta = if lambda == 0.0 {
        linalg::sym_pinv_apply(h, &yv, PINV_RTOL)?
    } else {
        linalg::solve_spd_shifted(h, lambda, &yv)?
    };
    if zeta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite KRR coefficients".into()));
    }
    Ok(FittedModel { kind: ModelKind::Krr, coeffs: zeta, lambda })
}

/// Anything that predicts a scalar at a domain point.
pub trait Predictor {
    fn predict(&self, x: &[f64]) -> f64;

    fn predict_points(&self, pts: &PointMatrix) -> Vec<f64> {
        pts.iter_rows().map(|x| self.predict(x)).collect()
    }
}

/// `x -> sum_j b_j sigma(<x, theta_j> / sqrt(d))`.
#[derive(Debug, Clone)]
pub struct RfrrPredictor<'a> {
    pub domain: DomainSpec,
    pub theta: &'a PointMatrix,
    pub act: &'a Activation,
    pub b: &'a [f64],
}

impl Predictor for RfrrPredictor<'_> {
    fn predict(&self, x: &[f64]) -> f64 {
        let bound = self.act.on(&self.domain);
        let scale = 1.0 / (self.domain.d as f64).sqrt();
        self.theta.iter_rows().zip(self.b).map(|(th, bj)| bj * bound.eval(linalg::dot(x, th) * scale)).sum()
    }
}

/// `x -> sum_i zeta_i H(x, x_i)` (off-diagonal kernel values).
#[derive(Debug, Clone)]
pub struct KrrPredictor<'a> {
    pub x: &'a PointMatrix,
    pub kernel: &'a KernelSeries,
    pub zeta: &'a [f64],
}

impl Predictor for KrrPredictor<'_> {
    fn predict(&self, x: &[f64]) -> f64 {
        let g = self.kernel.recurrence();
        self.x.iter_rows().zip(self.zeta).map(|(xi, z)| z * g.series(linalg::dot(x, xi), &self.kernel.coeffs)).sum()
    }
}

impl Predictor for TargetFunction {
    fn predict(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
}

/// The zero function.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPredictor;

impl Predictor for ZeroPredictor {
    fn predict(&self, _x: &[f64]) -> f64 {
        0.0
    }
}

/// `y_i = f(x_i) + eps_i` with `eps_i ~ N(0, sigma_eps^2)`.
pub fn make_labels(x: &PointMatrix, target: &TargetFunction, sigma_eps: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma_eps >= 0.0) || !sigma_eps.is_finite() {
        return Err(Error::Config(format!("noise level must be finite and >= 0, got {sigma_eps}")));
    }
    if x.dim() != target.domain.d {
        return Err(Error::DimensionMismatch(format!("points of dimension {} for a d = {} target", x.dim(), target.domain.d)));
    }
    let mut r = rng::rng_from_seed(seed);
    Ok(x.iter_rows()
        .map(|xi| {
            let f = target.eval(xi);
            if sigma_eps == 0.0 {
                f
            } else {
                let e: f64 = r.sample(StandardNormal);
                f + sigma_eps * e
            }
        })
        .collect())
}

/// Sum of `B_k` for `k <= s`.
pub fn low_degree_count(domain: &DomainSpec, s: usize) -> usize {
    (0..=s).map(|k| degeneracy_f64(domain, k)).sum::<f64>().round() as usize
}
