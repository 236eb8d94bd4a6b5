//! Orthogonal-polynomial machinery on the sphere and the hypercube:
//! degeneracies, normalized Gegenbauer (sphere) and hypercubic Gegenbauer
//! (Kravchuk) polynomials, Hermite polynomials, quadrature for the
//! one-dimensional marginals, and coefficient extraction.

mod activation;
mod coeffs;
mod quadrature;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;


pub use activation::{Activation, ActivationKind, BoundActivation, ScalarMap};
pub use coeffs::{
    activation_coeffs, activation_coeffs_with, hermite_coeffs, hermite_coeffs_with, CoeffSettings,
    GegenbauerCoeffs,
};
pub use quadrature::{
    gauss_hermite, gauss_legendre, hypercube_marginal, marginal_quadrature, sphere_marginal_piecewise,
    QuadratureRule,
};

use crate::domains::{DomainKind, DomainSpec};
use crate::error::{Error, Result};
use crate::spectrum::TargetFunction;

fn binomial_checked(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n.saturating_sub(k));
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.checked_mul(u128::from(n - i))? / u128::from(i + 1);
    }
    Some(c)
}

/// Dimension of the degree-`level` eigenspace: spherical harmonics count
/// `((d-2+2l)/(d-2)) C(d-3+l, l)` on the sphere, `C(d, l)` on the hypercube.
pub fn degeneracy(domain: &DomainSpec, level: usize) -> Result<u64> {
    domain.validate()?;
    let d = domain.d as u64;
    let l = level as u64;
    let overflow = || Error::Overflow(format!("degeneracy of level {level} at d = {d} exceeds u64"));
    let value: u128 = match domain.kind {
        DomainKind::Sphere => {
            let c = binomial_checked(d - 3 + l, l).ok_or_else(overflow)?;
            let num = c.checked_mul(u128::from(d - 2 + 2 * l)).ok_or_else(overflow)?;
            num / u128::from(d - 2)
        }
        DomainKind::Hypercube => {
            if level > domain.d {
                return Err(Error::Domain(format!(
                    "hypercube level {level} exceeds d = {}",
                    domain.d
                )));
            }
            binomial_checked(d, l).ok_or_else(overflow)?
        }
    };
    u64::try_from(value).map_err(|_| overflow())
}

/// Degeneracy in floating point; finite far beyond the `u64` range. Zero for
/// hypercube levels above `d`.
pub fn degeneracy_f64(domain: &DomainSpec, level: usize) -> f64 {
    let d = domain.d as f64;
    match domain.kind {
        DomainKind::Sphere => {
            let mut c = 1.0;
            for i in 1..=level {
                c *= (d - 3.0 + i as f64) / i as f64;
            }
            c * (d - 2.0 + 2.0 * level as f64) / (d - 2.0)
        }
        DomainKind::Hypercube => {
            if level > domain.d {
                return 0.0;
            }
            let k = level.min(domain.d - level);
            let mut c = 1.0;
            for i in 1..=k {
                c *= (d - k as f64 + i as f64) / i as f64;
            }
            c
        }
    }
}

/// Normalized Gegenbauer family `Q_k^{(d)}` on `[-d, d]` with `Q_k(d) = 1`.
///
/// Sphere: ultraspherical polynomials with parameter `(d-2)/2` in `s = t/d`,
/// via `P_{k+1} = ((2k+d-2) s P_k - k P_{k-1}) / (k+d-2)`.
/// Hypercube: `Q_{k+1} = (t Q_k - k Q_{k-1}) / (d-k)`, the Kravchuk
/// recurrence divided by `C(d, k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gegenbauer {
    kind: DomainKind,
    d: usize,
}

impl Gegenbauer {
    pub fn new(domain: &DomainSpec) -> Self {
        Gegenbauer { kind: domain.kind, d: domain.d }
    }

    pub fn max_level(&self) -> usize {
        match self.kind {
            DomainKind::Sphere => usize::MAX,
            DomainKind::Hypercube => self.d,
        }
    }

    #[inline]
    fn step(&self, k: usize, t: f64, q: f64, q_prev: f64) -> f64 {
        let d = self.d as f64;
        let kf = k as f64;
        match self.kind {
            DomainKind::Sphere => ((2.0 * kf + d - 2.0) * (t / d) * q - kf * q_prev) / (kf + d - 2.0),
            DomainKind::Hypercube => (t * q - kf * q_prev) / (d - kf),
        }
    }

    /// Writes `Q_0(t), ..., Q_{out.len()-1}(t)`.
    pub fn fill(&self, t: f64, out: &mut [f64]) {
        if out.is_empty() {
            return;
        }
        out[0] = 1.0;
        if out.len() == 1 {
            return;
        }
        out[1] = t / self.d as f64;
        for k in 1..out.len() - 1 {
            out[k + 1] = if k >= self.max_level() { 0.0 } else { self.step(k, t, out[k], out[k - 1]) };
        }
    }

    /// `Q_k(t)` without allocation.
    pub fn value(&self, k: usize, t: f64) -> f64 {
        if k == 0 {
            return 1.0;
        }
        if k > self.max_level() {
            return 0.0;
        }
        let (mut prev, mut cur) = (1.0, t / self.d as f64);
        for j in 1..k {
            let next = self.step(j, t, cur, prev);
            prev = cur;
            cur = next;
        }
        cur
    }

    /// `sum_k coeffs[k] Q_k(t)` in one recurrence pass.
    #[inline]
    pub fn series(&self, t: f64, coeffs: &[f64]) -> f64 {
        let Some(&c0) = coeffs.first() else {
            return 0.0;
        };
        let mut acc = c0;
        if coeffs.len() == 1 {
            return acc;
        }
        let (mut prev, mut cur) = (1.0, t / self.d as f64);
        acc += coeffs[1] * cur;
        let top = (coeffs.len() - 1).min(self.max_level());
        for k in 1..top {
            let next = self.step(k, t, cur, prev);
            prev = cur;
            cur = next;
            acc += coeffs[k + 1] * cur;
        }
        acc
    }
}

/// The recurrence of [`Gegenbauer`] with its coefficients precomputed through
/// a fixed degree: `Q_{k+1} = a_k t Q_k - b_k Q_{k-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Recurrence {
    a: Vec<f64>,
    b: Vec<f64>,
    inv_d: f64,
}

impl Recurrence {
    /// Coefficients through degree `kmax` (capped at `d` on the hypercube).
    pub fn new(domain: &DomainSpec, kmax: usize) -> Self {
        let d = domain.d as f64;
        let top = match domain.kind {
            DomainKind::Sphere => kmax,
            DomainKind::Hypercube => kmax.min(domain.d),
        };
        let (mut a, mut b) = (vec![0.0; top.max(1)], vec![0.0; top.max(1)]);
        for k in 1..top {
            let kf = k as f64;
            match domain.kind {
                DomainKind::Sphere => {
                    a[k] = (2.0 * kf + d - 2.0) / (d * (kf + d - 2.0));
                    b[k] = kf / (kf + d - 2.0);
                }
                DomainKind::Hypercube => {
                    a[k] = 1.0 / (d - kf);
                    b[k] = kf / (d - kf);
                }
            }
        }
        Recurrence { a, b, inv_d: 1.0 / d }
    }

    /// Highest degree available.
    pub fn kmax(&self) -> usize {
        self.a.len()
    }

    /// `sum_k coeffs[k] Q_k(t)`; terms above [`Self::kmax`] are dropped.
    #[inline]
    pub fn series(&self, t: f64, coeffs: &[f64]) -> f64 {
        let (lo, hi) = self.split_series(t, coeffs, coeffs.len());
        lo + hi
    }

    /// `(sum_{k < split}, sum_{k >= split})` of `coeffs[k] Q_k(t)`.
    #[inline]
    pub fn split_series(&self, t: f64, coeffs: &[f64], split: usize) -> (f64, f64) {
        let top = coeffs.len().min(self.kmax() + 1);
        if top == 0 {
            return (0.0, 0.0);
        }
        let mut acc = [0.0f64; 2];
        acc[usize::from(split == 0)] += coeffs[0];
        if top == 1 {
            return (acc[0], acc[1]);
        }
        let (mut prev, mut cur) = (1.0, t * self.inv_d);
        acc[usize::from(1 >= split)] += coeffs[1] * cur;
        for k in 1..top - 1 {
            let next = self.a[k] * t * cur - self.b[k] * prev;
            prev = cur;
            cur = next;
            acc[usize::from(k + 1 >= split)] += coeffs[k + 1] * cur;
        }
        (acc[0], acc[1])
    }
}

/// `Q_0(t), ..., Q_kmax(t)` for `|t| <= d` (with slack `1e-9 d`).
pub fn gegenbauer_eval(domain: &DomainSpec, kmax: usize, t: f64) -> Result<Vec<f64>> {
    domain.validate()?;
    let d = domain.d as f64;
    if !(t.abs() <= d + 1e-9 * d) {
        return Err(Error::Domain(format!("argument {t} outside [-{d}, {d}]")));
    }
    if domain.kind == DomainKind::Hypercube && kmax > domain.d {
        return Err(Error::Domain(format!("hypercube level {kmax} exceeds d = {}", domain.d)));
    }
    let mut out = vec![0.0; kmax + 1];
    Gegenbauer::new(domain).fill(t, &mut out);
    Ok(out)
}

/// Probabilists' Hermite polynomials `He_0(x), ..., He_{out.len()-1}(x)`.
pub fn hermite_fill(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for k in 1..out.len().saturating_sub(1) {
        out[k + 1] = x * out[k] - k as f64 * out[k - 1];
    }
}

/// Ridge target `f(x) = sum_l sqrt(masses[l] B_l) Q_l(<v, x>)` with direction
/// `v` drawn on the domain from `direction_seed`. `masses[l]` is the squared
/// norm of the degree-`l` component.
pub fn target_from_masses(domain: &DomainSpec, direction_seed: u64, masses: &[f64]) -> Result<TargetFunction> {
    let v = crate::domains::sample_points(domain, 1, direction_seed)?;
    TargetFunction::new(*domain, v.row(0).to_vec(), masses.to_vec())
}

#[cfg(test)]
mod tests;
