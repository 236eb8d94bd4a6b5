use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // math methods without std
use num_traits::Float;

use super::quadrature::{gaussian_piecewise, gauss_hermite, hypercube_marginal, marginal_quadrature, sphere_marginal_piecewise};
use super::{degeneracy_f64, hermite_fill, Activation, ActivationKind, Gegenbauer, QuadratureRule};
use crate::domains::{DomainKind, DomainSpec};
use crate::error::{Error, Result};

/// Refinement controls for coefficient quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffSettings {
    /// Stop once every coefficient moves by less than this between refinements.
    pub tol: f64,
    /// Largest total node count tried.
    pub node_cap: usize,
}

impl Default for CoeffSettings {
    fn default() -> Self {
        CoeffSettings { tol: 1e-10, node_cap: 1 << 14 }
    }
}

/// Gegenbauer coefficients `xi_k` of an activation on a domain, with the
/// total squared norm and the trace left above `kmax`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GegenbauerCoeffs {
    pub domain: DomainSpec,
    pub kmax: usize,
    pub xi: Vec<f64>,
    pub total_l2: f64,
    pub tail_trace: f64,
    pub activation: String,
    pub nodes_used: usize,
}

impl GegenbauerCoeffs {
    pub fn degeneracy(&self, k: usize) -> f64 {
        degeneracy_f64(&self.domain, k)
    }

    /// `xi_k^2 B_k`, the share of the squared norm carried by level `k`.
    pub fn level_trace(&self, k: usize) -> f64 {
        self.xi.get(k).map_or(0.0, |x| x * x * self.degeneracy(k))
    }

    pub fn level_traces(&self) -> Vec<f64> {
        (0..=self.kmax).map(|k| self.level_trace(k)).collect()
    }

    /// `sum_k xi_k^2 B_k + tail_trace - total_l2`.
    pub fn parseval_residual(&self) -> f64 {
        self.level_traces().iter().sum::<f64>() + self.tail_trace - self.total_l2
    }
}

fn integrate(rule: &QuadratureRule, domain: &DomainSpec, act: &Activation, kmax: usize) -> (Vec<f64>, f64) {
    let bound = act.on(domain);
    let geg = Gegenbauer::new(domain);
    let d = domain.d as f64;
    let sd = d.sqrt();
    let mut xi = vec![0.0; kmax + 1];
    let mut q = vec![0.0; kmax + 1];
    let mut total = 0.0;
    for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
        let f = bound.eval(sd * u);
        if f == 0.0 {
            continue;
        }
        geg.fill(d * u, &mut q);
        let wf = w * f;
        for (x, qk) in xi.iter_mut().zip(&q) {
            *x += wf * qk;
        }
        total += wf * f;
    }
    (xi, total)
}

fn max_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn finish(
    domain: &DomainSpec,
    act: &Activation,
    kmax: usize,
    xi: Vec<f64>,
    total_l2: f64,
    nodes_used: usize,
) -> Result<GegenbauerCoeffs> {
    if !total_l2.is_finite() || xi.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric(format!("non-finite coefficients for {}", act.description)));
    }
    let mut out = GegenbauerCoeffs {
        domain: *domain,
        kmax,
        xi,
        total_l2,
        tail_trace: 0.0,
        activation: act.description.clone(),
        nodes_used,
    };
    let tail = total_l2 - out.level_traces().iter().sum::<f64>();
    let slack = 1e-10 * total_l2.max(1.0);
    if tail < -slack {
        return Err(Error::Numeric(format!(
            "negative tail trace {tail:e} for {} (level traces exceed the squared norm)",
            act.description
        )));
    }
    out.tail_trace = tail.max(0.0);
    Ok(out)
}

/// [`activation_coeffs_with`] at the default node cap.
pub fn activation_coeffs(domain: &DomainSpec, act: &Activation, kmax: usize, tol: f64) -> Result<GegenbauerCoeffs> {
    activation_coeffs_with(domain, act, kmax, &CoeffSettings { tol, ..CoeffSettings::default() })
}

/// `xi_k = E[sigma(sqrt(d) u) Q_k(d u)]` for `k <= kmax`, with `u` the
/// marginal of `<x, e>/d`.
///
/// The hypercube marginal has `d + 1` atoms and is summed exactly. On the
/// sphere the node count doubles until the coefficients settle: Gauss-Jacobi
/// for smooth activations, a composite rule split at the kinks otherwise.
pub fn activation_coeffs_with(
    domain: &DomainSpec,
    act: &Activation,
    kmax: usize,
    settings: &CoeffSettings,
) -> Result<GegenbauerCoeffs> {
    domain.validate()?;
    if !(settings.tol > 0.0) {
        return Err(Error::Config(format!("coefficient tolerance must be positive, got {}", settings.tol)));
    }
    match domain.kind {
        DomainKind::Hypercube => {
            if kmax > domain.d {
                return Err(Error::Domain(format!("hypercube level {kmax} exceeds d = {}", domain.d)));
            }
            let rule = hypercube_marginal(domain.d)?;
            let (xi, total) = integrate(&rule, domain, act, kmax);
            finish(domain, act, kmax, xi, total, rule.len())
        }
        DomainKind::Sphere => {
            let d = domain.d as f64;
            let breaks: Vec<f64> = act.breakpoints().iter().map(|c| c / d.sqrt()).filter(|u| u.abs() < 1.0).collect();
            let pieces = breaks.len() + 1;
            let build = |per: usize| {
                if breaks.is_empty() {
                    marginal_quadrature(domain.d, per)
                } else {
                    sphere_marginal_piecewise(domain.d, &breaks, per)
                }
            };
            let mut per = (kmax + 2).max(32);
            if let Some(p) = act.polynomial_degree() {
                per = per.max((p + kmax) / 2 + 2);
            }
            let rule = build(per)?;
            let (mut xi, mut total) = integrate(&rule, domain, act, kmax);
            loop {
                let next = per * 2;
                if next * pieces > settings.node_cap {
                    return Err(Error::Numeric(format!(
                        "coefficients of {} did not converge to {:e} within {} nodes",
                        act.description, settings.tol, settings.node_cap
                    )));
                }
                let rule = build(next)?;
                let (xi2, total2) = integrate(&rule, domain, act, kmax);
                let dx = max_change(&xi, &xi2).max((total - total2).abs());
                xi = xi2;
                total = total2;
                per = next;
                if dx < settings.tol {
                    return finish(domain, act, kmax, xi, total, per * pieces);
                }
            }
        }
    }
}

/// [`hermite_coeffs_with`] at default settings.
pub fn hermite_coeffs(act: &Activation, kmax: usize) -> Result<Vec<f64>> {
    hermite_coeffs_with(act, kmax, &CoeffSettings::default())
}

/// `mu_k = E[sigma(G) He_k(G)]` for a standard Gaussian `G`.
pub fn hermite_coeffs_with(act: &Activation, kmax: usize, settings: &CoeffSettings) -> Result<Vec<f64>> {
    if matches!(act.kind, ActivationKind::GegenbauerPure(_)) {
        return Err(Error::Config(format!("{} depends on d and has no Hermite expansion", act.description)));
    }
    let f = |t: f64| act.eval_standard(t).unwrap_or(f64::NAN);
    let breaks = act.breakpoints();
    let pieces = breaks.len() + 1;
    let run = |rule: &QuadratureRule| {
        let mut mu = vec![0.0; kmax + 1];
        let mut he = vec![0.0; kmax + 1];
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            if w < 1e-300 {
                continue;
            }
            hermite_fill(x, &mut he);
            let wf = w * f(x);
            for (m, h) in mu.iter_mut().zip(&he) {
                *m += wf * h;
            }
        }
        mu
    };
    let build = |per: usize| if breaks.is_empty() { gauss_hermite(per) } else { gaussian_piecewise(&breaks, per) };
    let mut per = (kmax + 2).max(64);
    if let Some(p) = act.polynomial_degree() {
        per = per.max((p + kmax) / 2 + 2);
    }
    let mut mu = run(&build(per)?);
    loop {
        let next = per * 2;
        if next * pieces > settings.node_cap {
            return Err(Error::Numeric(format!(
                "Hermite coefficients of {} did not converge within {} nodes",
                act.description, settings.node_cap
            )));
        }
        let mu2 = run(&build(next)?);
        let dx = max_change(&mu, &mu2);
        if mu2.iter().any(|m| !m.is_finite()) {
            return Err(Error::Numeric(format!("non-finite Hermite coefficients for {}", act.description)));
        }
        mu = mu2;
        per = next;
        if dx < settings.tol {
            return Ok(mu);
        }
    }
}
