//! Quadrature rules for the one-dimensional marginals.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // math methods without std
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::tridiagonal_eigen_first;

/// Nodes and probability weights (summing to one).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Enforces the mirror symmetry of an even weight (nodes sorted).
    fn symmetrize(&mut self) {
        let n = self.nodes.len();
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (self.nodes[j] - self.nodes[i]);
            let w = 0.5 * (self.weights[i] + self.weights[j]);
            self.nodes[i] = -x;
            self.nodes[j] = x;
            self.weights[i] = w;
            self.weights[j] = w;
        }
        if n % 2 == 1 {
            self.nodes[n / 2] = 0.0;
        }
    }

    fn normalize(&mut self) {
        let total: f64 = self.weights.iter().sum();
        self.weights.iter_mut().for_each(|w| *w /= total);
    }
}

/// Gauss rule for the sphere marginal `u = <x, e>/d`, whose density on
/// `[-1, 1]` is proportional to `(1 - u^2)^((d-3)/2)`. Built by Golub-Welsch
/// on the Jacobi matrix with `alpha = beta = (d-3)/2`; exact for polynomials
/// of degree below `2 count`.
pub fn marginal_quadrature(d: usize, count: usize) -> Result<QuadratureRule> {
    if d < 3 {
        return Err(Error::Config(format!("sphere marginal needs d >= 3, got {d}")));
    }
    if count < 2 {
        return Err(Error::Config(format!("sphere marginal rule needs count >= 2, got {count}")));
    }
    let a = (d as f64 - 3.0) / 2.0;
    let diag = alloc::vec![0.0; count];
    let off: Vec<f64> = (1..count)
        .map(|n| {
            let n = n as f64;
            let num = n * (n + 2.0 * a);
            let den = (2.0 * n + 2.0 * a + 1.0) * (2.0 * n + 2.0 * a - 1.0);
            (num / den).sqrt()
        })
        .collect();
    let (nodes, weights) = tridiagonal_eigen_first(&diag, &off)
        .map_err(|e| Error::Numeric(format!("Gauss-Jacobi rule with {count} nodes: {e}")))?;
    let mut rule = QuadratureRule { nodes, weights };
    rule.symmetrize();
    rule.normalize();
    Ok(rule)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (weights sum to 2), by
/// Newton iteration on `P_n`.
pub fn gauss_legendre(count: usize) -> Result<QuadratureRule> {
    if count == 0 {
        return Err(Error::Config("quadrature needs count >= 1".into()));
    }
    let n = count;
    let nf = n as f64;
    let mut nodes = alloc::vec![0.0; n];
    let mut weights = alloc::vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 1..n {
                let kf = k as f64;
                let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Gauss rule for the standard Gaussian (probabilists' Hermite weight).
pub fn gauss_hermite(count: usize) -> Result<QuadratureRule> {
    if count == 0 {
        return Err(Error::Config("quadrature needs count >= 1".into()));
    }
    let diag = alloc::vec![0.0; count];
    let off: Vec<f64> = (1..count).map(|k| (k as f64).sqrt()).collect();
    let (nodes, weights) = tridiagonal_eigen_first(&diag, &off)?;
    let mut rule = QuadratureRule { nodes, weights };
    rule.symmetrize();
    rule.normalize();
    Ok(rule)
}

/// Composite rule for the sphere marginal, split at the kinks `breaks`
/// (given in `u`). Works in the angle `phi` with `u = sin(phi)`, where the
/// density becomes `cos(phi)^(d-2)`; `per_piece` Legendre nodes per interval.
/// The angular range is cut where the density drops below `1e-40` of its peak.
pub fn sphere_marginal_piecewise(d: usize, breaks: &[f64], per_piece: usize) -> Result<QuadratureRule> {
    if d < 3 {
        return Err(Error::Config(format!("sphere marginal needs d >= 3, got {d}")));
    }
    let p = (d - 2) as f64;
    // cos(phi)^p = 1e-40
    let edge = (1e-40f64.ln() / p).exp().min(1.0).acos();
    let mut cuts: Vec<f64> = breaks
        .iter()
        .filter(|b| b.abs() < 1.0)
        .map(|b| b.asin())
        .filter(|phi| phi.abs() < edge)
        .collect();
    cuts.push(-edge);
    cuts.push(edge);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let gl = gauss_legendre(per_piece)?;
    let mut nodes = Vec::with_capacity(gl.len() * (cuts.len() - 1));
    let mut weights = Vec::with_capacity(nodes.capacity());
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (&x, &gw) in gl.nodes.iter().zip(&gl.weights) {
            let phi = mid + half * x;
            nodes.push(phi.sin());
            weights.push(gw * half * phi.cos().powf(p));
        }
    }
    let mut rule = QuadratureRule { nodes, weights };
    rule.normalize();
    Ok(rule)
}

/// Exact law of `<x, e>/d` on the hypercube: node `(d - 2w)/d` with weight
/// `C(d, w) / 2^d`, for `w = 0..=d`.
pub fn hypercube_marginal(d: usize) -> Result<QuadratureRule> {
    if d == 0 {
        return Err(Error::Config("hypercube needs d >= 1".into()));
    }
    // Log-weights relative to the mode avoid overflow for large d.
    let mode = d / 2;
    let mut logw = alloc::vec![0.0f64; d + 1];
    for w in mode + 1..=d {
        logw[w] = logw[w - 1] + ((d - w + 1) as f64 / w as f64).ln();
    }
    for w in (0..mode).rev() {
        logw[w] = logw[w + 1] + ((w + 1) as f64 / (d - w) as f64).ln();
    }
    let nodes = (0..=d).map(|w| (d as f64 - 2.0 * w as f64) / d as f64).collect();
    let weights = logw.iter().map(|l| l.exp()).collect();
    let mut rule = QuadratureRule { nodes, weights };
    rule.normalize();
    Ok(rule)
}

/// Composite Gauss-Legendre rule for the standard Gaussian on
/// `[-38.5, 38.5]`, split at `breaks`.
pub(crate) fn gaussian_piecewise(breaks: &[f64], per_piece: usize) -> Result<QuadratureRule> {
    const L: f64 = 38.5;
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|b| b.abs() < L).collect();
    cuts.push(-L);
    cuts.push(L);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let gl = gauss_legendre(per_piece)?;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (&x, &gw) in gl.nodes.iter().zip(&gl.weights) {
            let t = mid + half * x;
            nodes.push(t);
            weights.push(gw * half * (-0.5 * t * t).exp());
        }
    }
    let mut rule = QuadratureRule { nodes, weights };
    rule.normalize();
    Ok(rule)
}
