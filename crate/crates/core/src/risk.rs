//! Test risks: Monte Carlo, closed forms from the Gegenbauer product
//! formula, the approximation risk of a feature set, the kernel floor and the
//! effective-ridge prediction.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DVector;
#[allow(unused_imports)] // math methods without std
use num_traits::Float;

use crate::domains::{sample_points, PointMatrix};
use crate::error::{Error, Result};
use crate::estimators::{FittedModel, KernelSeries, ModelKind, Predictor};
use crate::linalg::{self, PINV_RTOL};
use crate::orthopoly::GegenbauerCoeffs;
use crate::rng::derive_seed;
use crate::spectrum::{SpectrumProfile, TargetFunction};

/// Closed-form risks below this are treated as round-off and clipped to 0.
pub const RISK_CLIP: f64 = 1e-8;

/// Test points are drawn in batches of this size, batch `b` from
/// `derive_seed(seed, "mc-test", [b])`.
pub const MC_BATCH: usize = 1024;

/// Minimum test-set size for [`mc_risk`].
pub const MIN_TEST: usize = 100;

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RiskReport {
    pub mc_risk: f64,
    pub mc_se: f64,
    pub closed_form_risk: Option<f64>,
    pub theory_risk: Option<f64>,
    pub effective_ridge_risk: Option<f64>,
    pub floor_risk: Option<f64>,
    pub n_test: usize,
    pub runtime_ms: u64,
    pub warnings: Vec<String>,
}

/// Running sums of squared errors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct McAccum {
    pub count: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl McAccum {
    pub fn push(&mut self, e2: f64) {
        self.count += 1;
        self.sum += e2;
        self.sum_sq += e2 * e2;
    }

    pub fn merge(&mut self, other: &McAccum) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    /// `(mean, sample standard deviation / sqrt(count))`.
    pub fn finish(&self) -> (f64, f64) {
        let n = self.count as f64;
        let mean = self.sum / n;
        if self.count < 2 {
            return (mean, 0.0);
        }
        let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (mean, (var / n).sqrt())
    }
}

/// Number of batches covering `n_test` points.
pub fn mc_batches(n_test: usize) -> usize {
    n_test.div_ceil(MC_BATCH)
}

/// Squared errors on batch `batch` of the test stream.
pub fn mc_batch<P: Predictor + ?Sized>(
    pred: &P,
    target: &TargetFunction,
    n_test: usize,
    seed: u64,
    batch: usize,
) -> Result<McAccum> {
    let start = batch * MC_BATCH;
    let size = MC_BATCH.min(n_test.saturating_sub(start));
    let mut acc = McAccum::default();
    if size == 0 {
        return Ok(acc);
    }
    let pts = sample_points(&target.domain, size, derive_seed(seed, "mc-test", &[batch as u64]))?;
    for x in pts.iter_rows() {
        let e = target.eval(x) - pred.predict(x);
        acc.push(e * e);
    }
    Ok(acc)
}

/// `E[(f(x) - fhat(x))^2]` over `n_test` fresh points, with its standard error.
pub fn mc_risk<P: Predictor + ?Sized>(pred: &P, target: &TargetFunction, n_test: usize, seed: u64) -> Result<(f64, f64)> {
    if n_test < MIN_TEST {
        return Err(Error::Config(format!("n_test must be at least {MIN_TEST}, got {n_test}")));
    }
    let mut acc = McAccum::default();
    for b in 0..mc_batches(n_test) {
        acc.merge(&mc_batch(pred, target, n_test, seed, b)?);
    }
    Ok(acc.finish())
}

fn clip(r: f64, what: &str) -> Result<f64> {
    if !r.is_finite() {
        return Err(Error::Numeric(format!("{what} is not finite")));
    }
    if r < -RISK_CLIP * 1f64.max(r.abs().sqrt()) && r < -RISK_CLIP {
        return Err(Error::Numeric(format!("{what} is negative ({r:e})")));
    }
    Ok(r.max(0.0))
}

/// `c^T K c` for a kernel Gram matrix on `pts`, without storing it.
fn quad_form(kernel: &KernelSeries, pts: &PointMatrix, c: &[f64]) -> f64 {
    let g = kernel.recurrence();
    let mut acc = 0.0;
    for i in 0..pts.rows() {
        let xi = pts.row(i);
        let mut row = 0.0;
        for j in i + 1..pts.rows() {
            row += c[j] * g.series(linalg::dot(xi, pts.row(j)), &kernel.coeffs);
        }
        acc += c[i] * (kernel.diagonal * c[i] + 2.0 * row);
    }
    acc
}

/// `V_i = E_x[f(x) sigma(x, theta_i)]`.
pub fn target_feature_vector(theta: &PointMatrix, target: &TargetFunction, coeffs: &GegenbauerCoeffs) -> DVector<f64> {
    KernelSeries::target_cross(coeffs, target, 1).against(&target.direction, theta)
}

/// `E_i = E_x[f(x) H(x, x_i)]`.
pub fn target_kernel_vector(x: &PointMatrix, target: &TargetFunction, coeffs: &GegenbauerCoeffs) -> DVector<f64> {
    KernelSeries::target_cross(coeffs, target, 2).against(&target.direction, x)
}

fn check_anchors(anchors: &PointMatrix, len: usize, target: &TargetFunction) -> Result<()> {
    if anchors.rows() != len {
        return Err(Error::DimensionMismatch(format!("{} anchors for {len} coefficients", anchors.rows())));
    }
    if anchors.dim() != target.domain.d {
        return Err(Error::DimensionMismatch(format!("anchors of dimension {} for d = {}", anchors.dim(), target.domain.d)));
    }
    Ok(())
}

/// Population risk of a fitted model. RFRR: `|f|^2 - 2 b^T V + b^T U b` with
/// anchors `Theta`; KRR: `|f|^2 - 2 zeta^T E + zeta^T M zeta` with anchors `X`.
pub fn closed_form_risk(
    model: &FittedModel,
    anchors: &PointMatrix,
    target: &TargetFunction,
    coeffs: &GegenbauerCoeffs,
) -> Result<f64> {
    check_anchors(anchors, model.coeffs.len(), target)?;
    let c = model.coeffs.as_slice();
    let (lin, quad) = match model.kind {
        ModelKind::Rfrr => (
            target_feature_vector(anchors, target, coeffs),
            quad_form(&KernelSeries::activation_kernel(coeffs), anchors, c),
        ),
        ModelKind::Krr => (
            target_kernel_vector(anchors, target, coeffs),
            quad_form(&KernelSeries::second_moment_kernel(coeffs), anchors, c),
        ),
    };
    clip(target.norm2() - 2.0 * lin.dot(&model.coeffs) + quad, "closed-form risk")
}

/// Warning text when the kernel series drops more than `1e-10` of the trace.
pub fn truncation_warning(coeffs: &GegenbauerCoeffs) -> Option<String> {
    (coeffs.tail_trace > 1e-10 * coeffs.total_l2).then(|| {
        format!(
            "kernel series truncated at degree {} with tail trace {:.3e} ({:.2e} of total)",
            coeffs.kmax,
            coeffs.tail_trace,
            coeffs.tail_trace / coeffs.total_l2
        )
    })
}

/// Best population risk in the span of the features:
/// `|f|^2 - V^T U^+ V`.
pub fn approx_risk(theta: &PointMatrix, target: &TargetFunction, coeffs: &GegenbauerCoeffs) -> Result<f64> {
    let v = target_feature_vector(theta, target, coeffs);
    let u = KernelSeries::activation_kernel(coeffs).gram(theta);
    let q = linalg::sym_pinv_quadratic(&u, &v, PINV_RTOL)?;
    clip(target.norm2() - q, "approximation risk")
}

/// The population minimizer `b* = U^+ V` behind [`approx_risk`].
pub fn approx_coefficients(theta: &PointMatrix, target: &TargetFunction, coeffs: &GegenbauerCoeffs) -> Result<DVector<f64>> {
    let v = target_feature_vector(theta, target, coeffs);
    let u = KernelSeries::activation_kernel(coeffs).gram(theta);
    linalg::sym_pinv_apply(&u, &v, PINV_RTOL)
}

/// Lowest population risk of any predictor `sum_i zeta_i H(., x_i)`:
/// `|f|^2 - E^T M^+ E`.
pub fn kernel_floor(x: &PointMatrix, target: &TargetFunction, coeffs: &GegenbauerCoeffs) -> Result<f64> {
    let e = target_kernel_vector(x, target, coeffs);
    let m = KernelSeries::second_moment_kernel(coeffs).gram(x);
    let q = linalg::sym_pinv_quadratic(&m, &e, PINV_RTOL)?;
    clip(target.norm2() - q, "kernel floor")
}

/// Risk of the population ridge estimator at regularization `gamma`:
/// `sum_l ((gamma/n) / (xi_l^2 + gamma/n))^2 beta_l^2`.
pub fn effective_ridge_risk(target: &TargetFunction, profile: &SpectrumProfile, gamma: f64, n: usize) -> f64 {
    let g = gamma / n as f64;
    let zero = crate::spectrum::ZERO_LEVEL_RTOL * profile.total_trace;
    target
        .masses
        .iter()
        .enumerate()
        .filter(|(_, m)| **m > 0.0)
        .map(|(l, m)| {
            let x2 = profile.levels.get(l).filter(|v| v.trace() > zero).map_or(0.0, |v| v.xi2);
            let shrink = if x2 + g > 0.0 { g / (x2 + g) } else { 1.0 };
            shrink * shrink * m
        })
        .sum()
}
