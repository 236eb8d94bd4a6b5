//! Kernel eigenstructure by level: traces, level selection, effective
//! regularization, assumption checks and the staircase prediction.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // math methods without std
use num_traits::Float;

use crate::domains::{DomainKind, DomainSpec};
use crate::error::{Error, Result};
use crate::orthopoly::{degeneracy_f64, Gegenbauer, GegenbauerCoeffs};

/// Level traces below this fraction of the total count as exact zeros.
pub const ZERO_LEVEL_RTOL: f64 = 1e-14;

/// One eigenspace: degree `k`, eigenvalue `xi2 = xi_k^2`, multiplicity
/// `degeneracy = B_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Level {
    pub k: usize,
    pub xi2: f64,
    pub degeneracy: f64,
}

impl Level {
    pub fn trace(&self) -> f64 {
        self.xi2 * self.degeneracy
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpectrumProfile {
    pub domain: DomainSpec,
    /// Levels `0..=kmax`.
    pub levels: Vec<Level>,
    /// `cumulative_trace[l] = kappa_{>l}` for `l = 0..=kmax`, tail included.
    pub cumulative_trace: Vec<f64>,
    /// Trace beyond `kmax`, kept as one isotropic remainder.
    pub tail_trace: f64,
    pub total_trace: f64,
}

impl SpectrumProfile {
    pub fn kmax(&self) -> usize {
        self.levels.len() - 1
    }

    /// `kappa_{>l}`; `l = -1` gives the total trace.
    pub fn kappa_above(&self, l: isize) -> f64 {
        if l < 0 {
            self.total_trace
        } else {
            self.cumulative_trace.get(l as usize).copied().unwrap_or(self.tail_trace)
        }
    }

    pub fn xi2(&self, k: usize) -> f64 {
        self.levels.get(k).map_or(0.0, |l| l.xi2)
    }

    /// Levels carrying a nonzero share of the trace.
    pub fn nonzero_levels(&self) -> Vec<Level> {
        let floor = ZERO_LEVEL_RTOL * self.total_trace;
        self.levels.iter().copied().filter(|l| l.trace() > floor).collect()
    }

    /// Sum of degeneracies up to level `s` (eigenvalue count of the low part).
    pub fn count_through(&self, s: usize) -> f64 {
        (0..=s).map(|k| degeneracy_f64(&self.domain, k)).sum()
    }

    /// `min_{k<=s} xi_k^2`.
    pub fn min_xi2_through(&self, s: usize) -> f64 {
        (0..=s).map(|k| self.xi2(k)).fold(f64::INFINITY, f64::min)
    }

    /// `max_{k>s} xi_k^2` over the explicit levels, or a bound from the
    /// tail when `s >= kmax`. The flag is set when the tail bound was used.
    pub fn max_xi2_above(&self, s: usize) -> (f64, bool) {
        let explicit = self.levels.iter().skip(s + 1).map(|l| l.xi2).fold(0.0, f64::max);
        let tail_level = self.kmax() + 1;
        let tail_exists = match self.domain.kind {
            DomainKind::Sphere => true,
            DomainKind::Hypercube => tail_level <= self.domain.d,
        };
        if tail_exists && self.tail_trace > 0.0 {
            let bound = self.tail_trace / degeneracy_f64(&self.domain, tail_level);
            if bound > explicit || s >= self.kmax() {
                return (explicit.max(bound), true);
            }
        }
        (explicit, false)
    }
}

/// Assembles levels and suffix traces from coefficients.
pub fn profile(coeffs: &GegenbauerCoeffs) -> SpectrumProfile {
    let levels: Vec<Level> = coeffs
        .xi
        .iter()
        .enumerate()
        .map(|(k, x)| Level { k, xi2: x * x, degeneracy: degeneracy_f64(&coeffs.domain, k) })
        .collect();
    let mut cumulative = alloc::vec![0.0; levels.len()];
    let mut acc = coeffs.tail_trace;
    for k in (0..levels.len()).rev() {
        cumulative[k] = acc;
        acc += levels[k].trace();
    }
    SpectrumProfile {
        domain: coeffs.domain,
        levels,
        cumulative_trace: cumulative,
        tail_trace: coeffs.tail_trace,
        total_trace: coeffs.total_l2,
    }
}

/// Ridge target `f(x) = sum_l beta_l sqrt(B_l) Q_l(<v, x>)` with
/// `beta_l^2 = masses[l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetFunction {
    pub domain: DomainSpec,
    pub direction: Vec<f64>,
    pub masses: Vec<f64>,
    series: Vec<f64>,
}

impl TargetFunction {
    pub fn new(domain: DomainSpec, direction: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        domain.validate()?;
        if direction.len() != domain.d {
            return Err(Error::DimensionMismatch(format!(
                "direction has length {}, domain has d = {}",
                direction.len(),
                domain.d
            )));
        }
        if !domain.contains(&direction) {
            return Err(Error::Domain("target direction is not a domain point".into()));
        }
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::Config("level masses must be finite and nonnegative".into()));
        }
        if !masses.iter().any(|m| *m > 0.0) {
            return Err(Error::Config("at least one level mass must be positive".into()));
        }
        let top = masses.iter().rposition(|m| *m > 0.0).unwrap_or(0);
        if domain.kind == DomainKind::Hypercube && top > domain.d {
            return Err(Error::Domain(format!("target level {top} exceeds d = {}", domain.d)));
        }
        let mut masses = masses;
        masses.truncate(top + 1);
        let series = masses.iter().enumerate().map(|(l, m)| (m * degeneracy_f64(&domain, l)).sqrt()).collect();
        Ok(TargetFunction { domain, direction, masses, series })
    }

    /// `||f||^2 = sum_l beta_l^2`.
    pub fn norm2(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn max_level(&self) -> usize {
        self.masses.len() - 1
    }

    pub fn mass(&self, l: usize) -> f64 {
        self.masses.get(l).copied().unwrap_or(0.0)
    }

    /// `||P_{>l} f||^2`; `l = -1` gives the full norm.
    pub fn mass_above(&self, l: isize) -> f64 {
        self.masses.iter().enumerate().filter(|(k, _)| (*k as isize) > l).map(|(_, m)| m).sum()
    }

    /// Gegenbauer coefficient of the profile: `beta_l / sqrt(B_l)`.
    pub fn xi(&self, l: usize) -> f64 {
        let b = degeneracy_f64(&self.domain, l);
        if b == 0.0 {
            0.0
        } else {
            self.mass(l).sqrt() / b.sqrt()
        }
    }

    /// Value at `x`; `x` is not checked against the domain.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let t = crate::linalg::dot(&self.direction, x);
        Gegenbauer::new(&self.domain).series(t, &self.series)
    }

    pub fn eval_points(&self, pts: &crate::domains::PointMatrix) -> Vec<f64> {
        pts.iter_rows().map(|x| self.eval(x)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Regime {
    Over,
    Under,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Over => "over",
            Regime::Under => "under",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LevelSelection {
    pub s: usize,
    #[cfg_attr(feature = "serde", serde(rename = "S"))]
    pub big_s: usize,
    pub regime: Regime,
    pub log_d_n: f64,
    pub log_d_big_n: f64,
    pub ambiguous_s: bool,
    pub ambiguous_big_s: bool,
    pub ambiguous_regime: bool,
}

impl LevelSelection {
    pub fn min_level(&self) -> usize {
        self.s.min(self.big_s)
    }

    pub fn any_ambiguous(&self) -> bool {
        self.ambiguous_s || self.ambiguous_big_s || self.ambiguous_regime
    }
}

/// Default guard band on log-ratios.
pub const LEVEL_GUARD: f64 = 0.1;

fn near_integer(x: f64, guard: f64) -> bool {
    let frac = x - x.floor();
    frac < guard || frac > 1.0 - guard
}

/// `s = floor(log_d n)`, `S = floor(log_d N)`; overparametrized iff
/// `N >= n d^guard`.
pub fn select_levels(d: usize, n: usize, big_n: usize, guard: f64) -> Result<LevelSelection> {
    if n == 0 || big_n == 0 {
        return Err(Error::Config("n and N must be at least 1".into()));
    }
    if d < 2 {
        return Err(Error::Config(format!("level selection needs d >= 2, got {d}")));
    }
    let ld = (d as f64).ln();
    let a = (n as f64).ln() / ld;
    let b = (big_n as f64).ln() / ld;
    // Round-off in the log ratio must not push d^k just below k.
    let fl = |x: f64| (x + 1e-12).floor().max(0.0) as usize;
    let regime = if b >= a + guard { Regime::Over } else { Regime::Under };
    Ok(LevelSelection {
        s: fl(a),
        big_s: fl(b),
        regime,
        log_d_n: a,
        log_d_big_n: b,
        ambiguous_s: near_integer(a + 1e-12, guard),
        ambiguous_big_s: near_integer(b + 1e-12, guard),
        ambiguous_regime: (b - a).abs() < guard,
    })
}

/// `||P_{>min(s,S)} f||^2`.
pub fn theory_risk(target: &TargetFunction, sel: &LevelSelection) -> f64 {
    target.mass_above(sel.min_level() as isize)
}

/// `lambda + kappa_{>s}`.
pub fn effective_gamma(profile: &SpectrumProfile, s: usize, lambda: f64) -> f64 {
    lambda + profile.kappa_above(s as isize)
}

/// One inequality `lhs <= rhs`, with `margin = ln(rhs / lhs)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AssumptionCheck {
    pub name: String,
    pub delta: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
    pub ambiguous: bool,
}

impl AssumptionCheck {
    fn new(name: &str, delta: Option<f64>, lhs: f64, rhs: f64, ambiguous: bool) -> Self {
        let margin = if lhs <= 0.0 && rhs > 0.0 {
            f64::INFINITY
        } else if rhs <= 0.0 {
            f64::NEG_INFINITY
        } else {
            (rhs / lhs).ln()
        };
        let margin = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        AssumptionCheck { name: name.into(), delta, lhs, rhs, margin, pass: margin >= 0.0, ambiguous }
    }
}

/// Measured ratio for a clause that is asymptotic only.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasuredRatio {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AssumptionReport {
    pub d: usize,
    pub n: usize,
    #[cfg_attr(feature = "serde", serde(rename = "N"))]
    pub big_n: usize,
    pub selection: LevelSelection,
    pub checks: Vec<AssumptionCheck>,
    pub ratios: Vec<MeasuredRatio>,
    pub hard_failures: Vec<String>,
}

impl AssumptionReport {
    pub fn check(&self, name: &str, delta: Option<f64>) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name && c.delta == delta)
    }

    /// Whether every check at `delta` (and every delta-free check) passes
    /// and there is no hard failure.
    pub fn all_pass(&self, delta: f64) -> bool {
        self.hard_failures.is_empty()
            && self.checks.iter().filter(|c| c.delta.is_none() || c.delta == Some(delta)).all(|c| c.pass)
    }
}

/// Default grid for the exponent slack.
pub const DEFAULT_DELTAS: [f64; 3] = [0.1, 0.2, 0.3];

/// Evaluates the spectral-gap and activation conditions at finite `d`.
///
/// Level cutoffs are degree cutoffs: `m = sum_{k<=s} B_k`, `M = sum_{k<=S}
/// B_k`, the smallest retained eigenvalue is `min_{k<=s} xi_k^2` and the
/// largest discarded one `max_{k>s} xi_k^2`. The ordering of the two is
/// itself reported as a check.
pub fn check_assumptions(
    profile: &SpectrumProfile,
    n: usize,
    big_n: usize,
    deltas: &[f64],
) -> Result<AssumptionReport> {
    let d = profile.domain.d;
    let sel = select_levels(d, n, big_n, LEVEL_GUARD)?;
    let (s, big_s) = (sel.s, sel.big_s);
    let df = d as f64;
    let nf = n as f64;
    let bigf = big_n as f64;
    let mut checks = Vec::new();
    let mut ratios = Vec::new();
    let mut hard = Vec::new();
    let top = s.max(big_s);
    if top >= profile.kmax() && !(profile.domain.kind == DomainKind::Hypercube && profile.kmax() == d) {
        return Err(Error::Config(format!(
            "profile has kmax = {} but levels up to {} are needed",
            profile.kmax(),
            top + 1
        )));
    }
    let zero = ZERO_LEVEL_RTOL * profile.total_trace;

    // Eigenvalue ordering behind the degree cutoffs.
    for (label, cut, amb) in [("ordering_s", s, sel.ambiguous_s), ("ordering_S", big_s, sel.ambiguous_big_s)] {
        let (hi, tail) = profile.max_xi2_above(cut);
        checks.push(AssumptionCheck::new(label, None, hi, profile.min_xi2_through(cut), amb || tail));
    }

    let m = profile.count_through(s);
    let big_m = profile.count_through(big_s);
    let ka_s = profile.kappa_above(s as isize);
    let ka_big = profile.kappa_above(big_s as isize);
    let (max_above_s, tail_s) = profile.max_xi2_above(s);
    let (max_above_big, tail_big) = profile.max_xi2_above(big_s);
    let lo_ratio_s = ka_s / profile.min_xi2_through(s);
    let hi_ratio_s = ka_s / max_above_s;
    let lo_ratio_big = ka_big / profile.min_xi2_through(big_s);
    let hi_ratio_big = ka_big / max_above_big;
    let amb_s = sel.ambiguous_s || sel.ambiguous_regime;
    let amb_big = sel.ambiguous_big_s || sel.ambiguous_regime;

    for &delta in deltas {
        let dl = Some(delta);
        match sel.regime {
            Regime::Over => {
                checks.push(AssumptionCheck::new("samples_count", dl, m, nf.powf(1.0 - delta), amb_s));
                checks.push(AssumptionCheck::new("samples_low", dl, lo_ratio_s, nf.powf(1.0 - delta), amb_s));
                checks.push(AssumptionCheck::new("samples_high", dl, nf.powf(1.0 + delta), hi_ratio_s, amb_s || tail_s));
                checks.push(AssumptionCheck::new("features_count", dl, big_m, bigf.powf(1.0 - delta), amb_big));
                checks.push(AssumptionCheck::new("features_nested", dl, m, big_m, amb_big));
                checks.push(AssumptionCheck::new(
                    "features_high",
                    dl,
                    bigf.powf(1.0 + delta),
                    hi_ratio_big,
                    amb_big || tail_big,
                ));
            }
            Regime::Under => {
                checks.push(AssumptionCheck::new("features_count", dl, big_m, bigf.powf(1.0 - delta), amb_big));
                checks.push(AssumptionCheck::new("features_low", dl, lo_ratio_big, bigf.powf(1.0 - delta), amb_big));
                checks.push(AssumptionCheck::new(
                    "features_high",
                    dl,
                    bigf.powf(1.0 + delta),
                    hi_ratio_big,
                    amb_big || tail_big,
                ));
                checks.push(AssumptionCheck::new("samples_count", dl, m, nf.powf(1.0 - delta), amb_s));
                checks.push(AssumptionCheck::new("samples_nested", dl, big_m, m, amb_s));
                checks.push(AssumptionCheck::new("samples_high", dl, nf.powf(1.0 + delta), hi_ratio_s, amb_s || tail_s));
            }
        }
        // Separation between n and N.
        let (small, large) = if nf <= bigf { (nf, bigf) } else { (bigf, nf) };
        checks.push(AssumptionCheck::new("separation", dl, small, large.powf(1.0 - delta), sel.ambiguous_regime));
    }

    // Non-vanishing low levels, scaled as d^{s-k} xi_k^2 B_k.
    for (label, cut, amb) in [("b1", s, sel.ambiguous_s), ("b1p", big_s, sel.ambiguous_big_s)] {
        let mut worst = f64::INFINITY;
        for k in 0..=cut {
            let tr = profile.levels[k].trace();
            if tr <= zero {
                hard.push(format!("{label}: level {k} of the activation vanishes"));
            }
            worst = worst.min(df.powi((cut - k) as i32) * tr);
        }
        checks.push(AssumptionCheck::new(label, None, zero, worst, amb));
        ratios.push(MeasuredRatio { name: format!("{label}_min_scaled_trace"), value: worst });
    }

    // Mass above 2 max(s, S) + 1.
    let b2_level = 2 * top + 1;
    let b2 = profile.kappa_above(b2_level as isize);
    if b2 <= zero {
        hard.push(format!("b2: no activation mass above level {b2_level}"));
    }
    checks.push(AssumptionCheck::new("b2", None, zero, b2, b2_level > profile.kmax()));
    ratios.push(MeasuredRatio { name: "b2_tail_trace".into(), value: b2 });

    if profile.domain.kind == DomainKind::Hypercube {
        let span = (2 * top + 2).min(d);
        let mut worst = 0.0f64;
        let mut bounded = false;
        for k in 0..=span {
            let level = d - k;
            let tr = if level <= profile.kmax() {
                profile.levels[level].trace()
            } else {
                bounded = true;
                profile.tail_trace
            };
            worst = worst.max(df.powi(-(k as i32)) * tr);
        }
        checks.push(AssumptionCheck::new("c_last_levels", None, worst, df.powi(-(2 * top as i32) - 2), bounded));
    }

    ratios.push(MeasuredRatio { name: "m_over_n".into(), value: m / nf });
    ratios.push(MeasuredRatio { name: "M_over_N".into(), value: big_m / bigf });
    ratios.push(MeasuredRatio { name: "n_over_N".into(), value: nf / bigf });
    ratios.push(MeasuredRatio { name: "kappa_s_over_total".into(), value: ka_s / profile.total_trace });

    Ok(AssumptionReport { d, n, big_n, selection: sel, checks, ratios, hard_failures: hard })
}
