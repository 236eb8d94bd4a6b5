use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)] // math methods without std
use num_traits::Float;

use super::Gegenbauer;
use crate::domains::DomainSpec;
use crate::error::{Error, Result};

pub type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum ActivationKind {
    /// `max(t - c, 0)`.
    ShiftedRelu(f64),
    /// `Q_k^{(d)}(sqrt(d) t)`; depends on the domain.
    GegenbauerPure(usize),
    /// `sum_i coeffs[i] t^i`.
    PolynomialMonomial(Vec<f64>),
    /// Arbitrary map with optional kink locations (in `t`) for quadrature.
    Tabulated { map: ScalarMap, breakpoints: Vec<f64> },
}

impl fmt::Debug for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActivationKind::ShiftedRelu(c) => f.debug_tuple("ShiftedRelu").field(c).finish(),
            ActivationKind::GegenbauerPure(k) => f.debug_tuple("GegenbauerPure").field(k).finish(),
            ActivationKind::PolynomialMonomial(c) => f.debug_tuple("PolynomialMonomial").field(c).finish(),
            ActivationKind::Tabulated { breakpoints, .. } => {
                f.debug_struct("Tabulated").field("breakpoints", breakpoints).finish_non_exhaustive()
            }
        }
    }
}

/// Scalar nonlinearity applied to the standardized argument
/// `t = <x, theta> / sqrt(d)`.
#[derive(Clone, Debug)]
pub struct Activation {
    pub kind: ActivationKind,
    pub description: String,
}

fn fmt_real(v: f64) -> String {
    format!("{v}")
}

impl Activation {
    pub fn shifted_relu(c: f64) -> Self {
        Activation { kind: ActivationKind::ShiftedRelu(c), description: format!("shifted_relu:{}", fmt_real(c)) }
    }

    pub fn relu() -> Self {
        Self::shifted_relu(0.0)
    }

    pub fn gegenbauer(k: usize) -> Self {
        Activation { kind: ActivationKind::GegenbauerPure(k), description: format!("gegenbauer:{k}") }
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        let desc = coeffs.iter().map(|c| fmt_real(*c)).collect::<Vec<_>>().join(",");
        Activation { kind: ActivationKind::PolynomialMonomial(coeffs), description: format!("poly:{desc}") }
    }

    pub fn constant(c: f64) -> Self {
        Self::polynomial(alloc::vec![c])
    }

    pub fn tabulated<F>(name: &str, map: F, breakpoints: Vec<f64>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Activation {
            kind: ActivationKind::Tabulated { map: Arc::new(map), breakpoints },
            description: format!("tabulated:{name}"),
        }
    }

    /// Parses `shifted_relu:<c>`, `relu`, `gegenbauer:<k>` or
    /// `poly:<c0>,<c1>,...`.
    pub fn parse(desc: &str) -> Result<Self> {
        let desc = desc.trim();
        let (head, arg) = match desc.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (desc, None),
        };
        let bad = |why: &str| Error::Config(format!("activation `{desc}`: {why}"));
        let real = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite());
        match (head.to_ascii_lowercase().as_str(), arg) {
            ("relu", None) => Ok(Self::relu()),
            ("shifted_relu", Some(a)) => real(a).map(Self::shifted_relu).ok_or_else(|| bad("shift must be a finite real")),
            ("gegenbauer", Some(a)) => {
                a.parse::<usize>().map(Self::gegenbauer).map_err(|_| bad("degree must be a nonnegative integer"))
            }
            ("poly", Some(a)) => {
                let coeffs: Option<Vec<f64>> = a.split(',').map(real).collect();
                match coeffs {
                    Some(c) if !c.is_empty() => Ok(Self::polynomial(c)),
                    _ => Err(bad("coefficients must be finite reals")),
                }
            }
            _ => Err(bad("expected shifted_relu:<c>, relu, gegenbauer:<k> or poly:<c0>,<c1>,...")),
        }
    }

    pub fn descriptor(&self) -> &str {
        &self.description
    }

    /// Kinks in the standardized argument.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            ActivationKind::ShiftedRelu(c) => alloc::vec![*c],
            ActivationKind::Tabulated { breakpoints, .. } => breakpoints.clone(),
            _ => Vec::new(),
        }
    }

    /// Polynomial degree when the activation is a polynomial in `t`.
    pub fn polynomial_degree(&self) -> Option<usize> {
        match &self.kind {
            ActivationKind::GegenbauerPure(k) => Some(*k),
            ActivationKind::PolynomialMonomial(c) => Some(c.len().saturating_sub(1)),
            _ => None,
        }
    }

    /// Value at `t` when it does not depend on the domain.
    pub fn eval_standard(&self, t: f64) -> Option<f64> {
        match &self.kind {
            ActivationKind::ShiftedRelu(c) => Some((t - c).max(0.0)),
            ActivationKind::GegenbauerPure(_) => None,
            ActivationKind::PolynomialMonomial(c) => Some(c.iter().rev().fold(0.0, |acc, &a| acc * t + a)),
            ActivationKind::Tabulated { map, .. } => Some(map(t)),
        }
    }

    /// Binds the activation to a domain for repeated evaluation.
    pub fn on(&self, domain: &DomainSpec) -> BoundActivation<'_> {
        BoundActivation { act: self, geg: Gegenbauer::new(domain), sqrt_d: (domain.d as f64).sqrt() }
    }

    /// Value at `t` on `domain`.
    pub fn eval(&self, domain: &DomainSpec, t: f64) -> f64 {
        self.on(domain).eval(t)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.description)
    }
}

#[derive(Clone, Copy)]
pub struct BoundActivation<'a> {
    act: &'a Activation,
    geg: Gegenbauer,
    sqrt_d: f64,
}

impl BoundActivation<'_> {
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match &self.act.kind {
            ActivationKind::ShiftedRelu(c) => (t - c).max(0.0),
            ActivationKind::GegenbauerPure(k) => self.geg.value(*k, self.sqrt_d * t),
            _ => self.act.eval_standard(t).unwrap_or(f64::NAN),
        }
    }
}

impl fmt::Debug for BoundActivation<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundActivation").field("act", &self.act.description).finish()
    }
}

impl PartialEq for Activation {
    /// Activations compare by descriptor.
    fn eq(&self, other: &Self) -> bool {
        self.description == other.description
    }
}

impl core::str::FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn parse_round_trip() {
        for s in ["shifted_relu:0.5", "relu", "gegenbauer:3", "poly:1,0,-2.5"] {
            let a = Activation::parse(s).unwrap();
            let b = Activation::parse(a.descriptor()).unwrap();
            assert_eq!(a, b);
        }
        assert_eq!(Activation::parse("relu").unwrap().descriptor(), "shifted_relu:0");
        assert!(Activation::parse("tanh").is_err());
        assert!(Activation::parse("shifted_relu:x").is_err());
        assert!(Activation::parse("poly:").is_err());
        assert!(Activation::parse("shifted_relu:inf").is_err());
    }

    #[test]
    fn shifted_relu_values() {
        let a = Activation::shifted_relu(0.5);
        assert_eq!(a.eval_standard(0.2), Some(0.0));
        assert_eq!(a.eval_standard(0.5), Some(0.0));
        assert_eq!(a.eval_standard(2.0), Some(1.5));
        assert_eq!(a.breakpoints(), alloc::vec![0.5]);
    }

    #[test]
    fn polynomial_horner() {
        let a = Activation::polynomial(alloc::vec![1.0, -1.0, 2.0]);
        assert_eq!(a.eval_standard(3.0), Some(1.0 - 3.0 + 18.0));
        assert_eq!(a.polynomial_degree(), Some(2));
    }

    #[test]
    fn gegenbauer_depends_on_domain() {
        let a = Activation::gegenbauer(1);
        let dom = DomainSpec::sphere(16).unwrap();
        assert!(a.eval_standard(1.0).is_none());
        // Q_1(sqrt(d) t) = t / sqrt(d)
        assert!((a.eval(&dom, 2.0) - 0.5).abs() < 1e-15);
        let t = Activation::tabulated("sq", |x| x * x, Vec::new());
        assert_eq!(t.eval(&dom, 3.0), 9.0);
        assert_eq!(t.to_string(), "tabulated:sq");
    }
}
