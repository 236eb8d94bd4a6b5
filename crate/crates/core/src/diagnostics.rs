//! Concentration diagnostics: the spike-plus-bulk structure of the feature
//! Gram matrix, near-orthonormality of sampled low-degree eigenfunctions,
//! the singular-value layout of the feature matrix, and hypercontractivity
//! spot checks.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // math methods without std
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::domains::{sample_points, DomainKind, DomainSpec, PointMatrix};
use crate::error::{Error, Result};
pub use crate::estimators::low_degree_count;
use crate::linalg::{self, op_norm_symmetric, PackedSym, PowerSettings};
use crate::orthopoly::{degeneracy_f64, Gegenbauer, GegenbauerCoeffs, Recurrence};
use crate::rng;
use crate::spectrum::ZERO_LEVEL_RTOL;

/// Full diagnostics; fields not computed by a given probe stay `None`.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiagnosticsReport {
    pub phi_gram_dev: Option<f64>,
    pub delta_op: Option<f64>,
    pub delta_converged: Option<bool>,
    pub bulk_sv_dev: Option<f64>,
    pub spike_min: Option<f64>,
    pub cross_dev: Option<f64>,
    pub left_overlap: Option<f64>,
    pub right_overlap: Option<f64>,
    pub diag_dev: Option<f64>,
    pub m_used: usize,
    pub u_used: usize,
    pub degenerate: bool,
    pub hyper_ratios: Vec<(usize, f64, f64)>,
}

fn max_level(domain: &DomainSpec) -> usize {
    match domain.kind {
        DomainKind::Sphere => usize::MAX,
        DomainKind::Hypercube => domain.d,
    }
}

/// `u(d)`: eigenfunction count through degree `2 max(s, S) + 1`.
pub fn u_count(domain: &DomainSpec, s: usize, big_s: usize) -> usize {
    low_degree_count(domain, 2 * s.max(big_s) + 1)
}

/// Largest basis built explicitly.
pub const BASIS_CAP: usize = 20_000;

fn subsets(d: usize, k: usize, out: &mut Vec<Vec<usize>>) {
    fn rec(start: usize, d: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            rec(i + 1, d, k, cur, out);
            cur.pop();
        }
    }
    rec(0, d, k, &mut Vec::new(), out);
}

/// Orthonormal eigenfunctions of degree `<= s` evaluated at `pts`
/// (rows = points). Sphere: `1`, `x_i`, `sqrt((d+2)/d) x_i x_j` and Helmert
/// contrasts of the `x_i^2`, so `s <= 2`. Hypercube: monomials `x^S`.
pub fn low_degree_basis(domain: &DomainSpec, s: usize, pts: &PointMatrix) -> Result<DMatrix<f64>> {
    let d = domain.d;
    if pts.dim() != d {
        return Err(Error::DimensionMismatch(format!("points of dimension {} for d = {d}", pts.dim())));
    }
    let m = low_degree_count(domain, s);
    if m > BASIS_CAP {
        return Err(Error::Config(format!("{m} basis functions exceed the cap {BASIS_CAP}")));
    }
    let mut phi = DMatrix::zeros(pts.rows(), m);
    match domain.kind {
        DomainKind::Sphere => {
            if s > 2 {
                return Err(Error::Config(format!("explicit sphere harmonics only through degree 2, got {s}")));
            }
            let df = d as f64;
            let off = ((df + 2.0) / df).sqrt();
            let diag = ((df + 2.0) / (2.0 * df)).sqrt();
            for (r, x) in pts.iter_rows().enumerate() {
                let mut c = 0;
                phi[(r, c)] = 1.0;
                c += 1;
                if s >= 1 {
                    for &xi in x {
                        phi[(r, c)] = xi;
                        c += 1;
                    }
                }
                if s >= 2 {
                    for i in 0..d {
                        for j in i + 1..d {
                            phi[(r, c)] = off * x[i] * x[j];
                            c += 1;
                        }
                    }
                    let mut partial = 0.0;
                    for k in 1..d {
                        partial += x[k - 1] * x[k - 1];
                        let kf = k as f64;
                        phi[(r, c)] = diag * (partial - kf * x[k] * x[k]) / (kf * (kf + 1.0)).sqrt();
                        c += 1;
                    }
                }
                debug_assert_eq!(c, m);
            }
        }
        DomainKind::Hypercube => {
            let mut sets = Vec::with_capacity(m);
            for k in 0..=s.min(d) {
                subsets(d, k, &mut sets);
            }
            for (r, x) in pts.iter_rows().enumerate() {
                for (c, set) in sets.iter().enumerate() {
                    phi[(r, c)] = set.iter().map(|&i| x[i]).product();
                }
            }
        }
    }
    Ok(phi)
}

fn symmetric_op_norm(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// `|Phi^T Phi / N - I_m|_op` for the degree-`<= s` eigenfunctions sampled at
/// `pts`.
pub fn eigenfunction_gram(domain: &DomainSpec, pts: &PointMatrix, s: usize) -> Result<f64> {
    match low_degree_basis(domain, s, pts) {
        Ok(phi) => {
            let n = pts.rows() as f64;
            let mut g = phi.tr_mul(&phi) / n;
            for i in 0..g.nrows() {
                g[(i, i)] -= 1.0;
            }
            Ok(symmetric_op_norm(&g))
        }
        Err(Error::Config(_)) => eigenfunction_gram_by_kernel(domain, pts, s),
        Err(e) => Err(e),
    }
}

/// Largest point count for the level-kernel route.
pub const LEVEL_KERNEL_CAP: usize = 4000;

/// Same quantity through `Phi Phi^T = sum_{k<=s} B_k Q_k(<x_i, x_j>)`: the
/// nonzero spectrum of `Phi^T Phi / N` is that of the `N x N` level kernel
/// over `N`.
pub fn eigenfunction_gram_by_kernel(domain: &DomainSpec, pts: &PointMatrix, s: usize) -> Result<f64> {
    let n = pts.rows();
    if n > LEVEL_KERNEL_CAP {
        return Err(Error::Config(format!("level-kernel route limited to {LEVEL_KERNEL_CAP} points, got {n}")));
    }
    let m = low_degree_count(domain, s);
    let c: Vec<f64> = (0..=s.min(max_level(domain))).map(|k| degeneracy_f64(domain, k)).collect();
    let g = Recurrence::new(domain, s);
    let k = DMatrix::from_fn(n, n, |i, j| g.series(linalg::dot(pts.row(i), pts.row(j)), &c) / n as f64);
    let (ev, _) = linalg::sym_eigen_sorted(&k);
    let top = (ev[0] - 1.0).abs();
    if m > n {
        return Ok(top.max(1.0));
    }
    Ok(top.max((ev[m - 1] - 1.0).abs()))
}

/// Settings shared by the diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct DiagSettings {
    pub power: PowerSettings,
    /// Recompose every entry of `U` when at most this many points.
    pub recompose_cap: usize,
}

impl Default for DiagSettings {
    fn default() -> Self {
        DiagSettings { power: PowerSettings::default(), recompose_cap: 4000 }
    }
}

/// Decomposition `U = Phi D^2 Phi^T + kappa (Lambda + Delta)` of the Gram
/// matrix of the activation kernel on `pts`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramStructure {
    pub kappa: f64,
    pub m_used: usize,
    pub delta_op: f64,
    pub delta_converged: bool,
    pub delta_frobenius: f64,
    pub delta_max_col: f64,
    /// `max_i |Lambda_ii - 1|`.
    pub diag_dev: f64,
    /// `max |Phi D^2 Phi^T + kappa (Lambda + Delta) - U|`, when computed.
    pub recomposition_err: Option<f64>,
    pub degenerate: bool,
}

/// Builds `Delta` (off-diagonal part of the degree-`> s` kernel over
/// `kappa_{>s}`), its operator norm by power iteration, and the diagonal
/// deviation of `Lambda` from the identity.
pub fn gram_structure(pts: &PointMatrix, coeffs: &GegenbauerCoeffs, s: usize, settings: &DiagSettings) -> Result<GramStructure> {
    let domain = coeffs.domain;
    if pts.dim() != domain.d {
        return Err(Error::DimensionMismatch(format!("points of dimension {} for d = {}", pts.dim(), domain.d)));
    }
    if s >= coeffs.kmax && coeffs.tail_trace > 0.0 {
        return Err(Error::Config(format!("level {s} is not below the series degree {}", coeffs.kmax)));
    }
    let n = pts.rows();
    let c: Vec<f64> = (0..=coeffs.kmax).map(|k| coeffs.level_trace(k)).collect();
    let split = (s + 1).min(c.len());
    let low_diag: f64 = c[..split].iter().sum();
    let full_diag: f64 = c.iter().sum::<f64>() + coeffs.tail_trace;
    let kappa = full_diag - low_diag;
    let m_used = low_degree_count(&domain, s);
    if kappa <= ZERO_LEVEL_RTOL * coeffs.total_l2.max(f64::MIN_POSITIVE) {
        return Ok(GramStructure {
            kappa,
            m_used,
            delta_op: 0.0,
            delta_converged: true,
            delta_frobenius: 0.0,
            delta_max_col: 0.0,
            diag_dev: 0.0,
            recomposition_err: Some(0.0),
            degenerate: true,
        });
    }
    let g = Recurrence::new(&domain, coeffs.kmax);
    let exact = Gegenbauer::new(&domain);
    let recompose = n <= settings.recompose_cap;
    let mut delta = PackedSym::zeros(n);
    let mut col_sq = vec![0.0; n];
    let mut recomp = 0.0f64;
    for i in 0..n {
        let xi = pts.row(i);
        let row = delta.upper_row_mut(i);
        row[0] = 0.0;
        for j in i + 1..n {
            let t = linalg::dot(xi, pts.row(j));
            let (low, high) = g.split_series(t, &c, split);
            let v = high / kappa;
            row[j - i] = v;
            col_sq[i] += v * v;
            col_sq[j] += v * v;
            if recompose {
                let u = exact.series(t, &c);
                recomp = recomp.max((low + kappa * v - u).abs());
            }
        }
    }
    // Lambda_ii = (U_ii - (Phi D^2 Phi^T)_ii) / kappa; both diagonals are constant.
    let diag_dev = ((full_diag - low_diag) / kappa - 1.0).abs();
    let est = op_norm_symmetric(n, |x, y| delta.matvec(x, y), settings.power);
    Ok(GramStructure {
        kappa,
        m_used,
        delta_op: est.norm,
        delta_converged: est.converged,
        delta_frobenius: delta.frobenius(),
        delta_max_col: col_sq.iter().fold(0.0f64, |a, &b| a.max(b)).sqrt(),
        diag_dev,
        recomposition_err: recompose.then_some(recomp),
        degenerate: false,
    })
}

/// Singular-value layout of `Z / sqrt(N)` against `sqrt(kappa_{>s})`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSvdStructure {
    pub kappa: f64,
    pub m_used: usize,
    /// `sigma_i(Z / sqrt(N)) / sqrt(kappa)`, descending.
    pub normalized_sv: Vec<f64>,
    pub spike_min: f64,
    pub bulk_sv_dev: f64,
    /// `|Psi^T P_2|_op / sqrt(n)`, with `P_2` the bulk left singular vectors.
    pub left_overlap: f64,
    /// `|Phi^T Q_2|_op / sqrt(N)`, with `Q_2` the bulk right singular vectors.
    pub right_overlap: f64,
    /// `|Z_{>m} Phi / N|_op / sqrt(kappa)`.
    pub cross_dev: f64,
    pub degenerate: bool,
}

fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let g = if m.nrows() <= m.ncols() { m * m.transpose() } else { m.tr_mul(m) };
    symmetric_op_norm(&g).sqrt()
}

/// Full SVD of `Z / sqrt(N)` split at `m = sum_{k<=s} B_k`.
pub fn feature_svd_structure(
    z: &DMatrix<f64>,
    x: &PointMatrix,
    theta: &PointMatrix,
    coeffs: &GegenbauerCoeffs,
    s: usize,
) -> Result<FeatureSvdStructure> {
    let domain = coeffs.domain;
    let (n, big_n) = z.shape();
    if x.rows() != n || theta.rows() != big_n {
        return Err(Error::DimensionMismatch(format!(
            "Z is {n}x{big_n}, points are {} and {}",
            x.rows(),
            theta.rows()
        )));
    }
    let kappa = {
        let low: f64 = (0..=s.min(coeffs.kmax)).map(|k| coeffs.level_trace(k)).sum();
        coeffs.total_l2 - low
    };
    let m = low_degree_count(&domain, s);
    let scaled = z / (big_n as f64).sqrt();
    let svd = scaled
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric(format!("SVD did not converge on a {n}x{big_n} feature matrix")))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let r = sv.len();
    let degenerate = kappa <= ZERO_LEVEL_RTOL * coeffs.total_l2.max(f64::MIN_POSITIVE);
    if degenerate {
        return Ok(FeatureSvdStructure {
            kappa,
            m_used: m,
            normalized_sv: sv,
            spike_min: 0.0,
            bulk_sv_dev: 0.0,
            left_overlap: 0.0,
            right_overlap: 0.0,
            cross_dev: 0.0,
            degenerate: true,
        });
    }
    let sk = kappa.sqrt();
    let normalized: Vec<f64> = sv.iter().map(|v| v / sk).collect();
    let mm = m.min(r);
    let spike_min = normalized[..mm].iter().cloned().fold(f64::INFINITY, f64::min);
    let bulk_sv_dev = normalized[mm..].iter().fold(0.0f64, |a, v| a.max((v - 1.0).abs()));

    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let bulk: Vec<usize> = order[mm..].to_vec();
    let psi = low_degree_basis(&domain, s, x)?;
    let phi = low_degree_basis(&domain, s, theta)?;
    let p2 = DMatrix::from_fn(n, bulk.len(), |i, c| u[(i, bulk[c])]);
    let q2 = DMatrix::from_fn(big_n, bulk.len(), |j, c| vt[(bulk[c], j)]);
    let left_overlap = op_norm(&psi.tr_mul(&p2)) / (n as f64).sqrt();
    let right_overlap = op_norm(&phi.tr_mul(&q2)) / (big_n as f64).sqrt();

    // Z_{>m} = Z - Z_{<=m}, Z_{<=m}(x, theta) = sum_{k<=s} xi_k B_k Q_k(<x, theta>).
    let g = Recurrence::new(&domain, s);
    let low_c: Vec<f64> = (0..=s.min(coeffs.kmax)).map(|k| coeffs.xi[k] * coeffs.degeneracy(k)).collect();
    let mut high = z.clone();
    for j in 0..big_n {
        let th = theta.row(j);
        for i in 0..n {
            high[(i, j)] -= g.series(linalg::dot(x.row(i), th), &low_c);
        }
    }
    let cross = (&high * &phi) / big_n as f64;
    let cross_dev = op_norm(&cross) / sk;
    Ok(FeatureSvdStructure {
        kappa,
        m_used: m,
        normalized_sv: normalized,
        spike_min,
        bulk_sv_dev,
        left_overlap,
        right_overlap,
        cross_dev,
        degenerate: false,
    })
}

/// Largest hypercube dimension handled by exact enumeration.
pub const ENUMERATION_MAX_D: usize = 12;

/// Max over `trials` random degree-`level` functions `g` of
/// `|g|_{L^q}^2 / |g|_{L^2}^2`.
///
/// Sphere: `g = sum_j c_j Q_level(<v_j, x>)` over five random directions,
/// both norms estimated on `mc_points` shared points. Hypercube with
/// `d <= 12`: `g = sum_{|S| = level} c_S x^S`, norms by full enumeration;
/// larger `d` uses `mc_points` samples.
pub fn hypercontractivity_probe(
    domain: &DomainSpec,
    level: usize,
    q: f64,
    trials: usize,
    mc_points: usize,
    seed: u64,
) -> Result<f64> {
    domain.validate()?;
    if !(q >= 2.0) {
        return Err(Error::Config(format!("exponent q must be >= 2, got {q}")));
    }
    if trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    if level > max_level(domain) {
        return Err(Error::Domain(format!("level {level} exceeds d = {}", domain.d)));
    }
    let d = domain.d;
    let pts = match domain.kind {
        DomainKind::Hypercube if d <= ENUMERATION_MAX_D => {
            let rows: Vec<Vec<f64>> = (0..1usize << d)
                .map(|mask| (0..d).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect())
                .collect();
            PointMatrix::from_rows(domain, &rows, 0)?
        }
        _ => sample_points(domain, mc_points.max(1), rng::derive_seed(seed, "hyper-points", &[]))?,
    };
    let g = Gegenbauer::new(domain);
    let mut sets = Vec::new();
    if domain.kind == DomainKind::Hypercube {
        subsets(d, level, &mut sets);
    }
    let mut best = 0.0f64;
    let mut vals = vec![0.0; pts.rows()];
    for t in 0..trials {
        let mut r = rng::stream(seed, "hyper-trial", &[t as u64]);
        match domain.kind {
            DomainKind::Sphere => {
                let dirs = sample_points(domain, 5, r.random())?;
                let c: Vec<f64> = (0..5).map(|_| r.sample(StandardNormal)).collect();
                for (v, x) in vals.iter_mut().zip(pts.iter_rows()) {
                    *v = dirs.iter_rows().zip(&c).map(|(u, cj)| cj * g.value(level, linalg::dot(u, x))).sum();
                }
            }
            DomainKind::Hypercube => {
                let c: Vec<f64> = sets.iter().map(|_| r.sample(StandardNormal)).collect();
                for (v, x) in vals.iter_mut().zip(pts.iter_rows()) {
                    *v = sets.iter().zip(&c).map(|(set, cs)| cs * set.iter().map(|&i| x[i]).product::<f64>()).sum();
                }
            }
        }
        let n = vals.len() as f64;
        let l2 = vals.iter().map(|v| v * v).sum::<f64>() / n;
        let lq = vals.iter().map(|v| v.abs().powf(q)).sum::<f64>() / n;
        if l2 > 0.0 {
            best = best.max(lq.powf(2.0 / q) / l2);
        }
    }
    Ok(best)
}

/// Runs every probe on one fitted configuration: Gram structure and
/// eigenfunction Gram on `theta`, the SVD layout of `z`, and
/// hypercontractivity for levels `0..=2` at `q = 4`.
#[allow(clippy::too_many_arguments)]
pub fn diagnose(
    x: &PointMatrix,
    theta: &PointMatrix,
    z: &DMatrix<f64>,
    coeffs: &GegenbauerCoeffs,
    s: usize,
    big_s: usize,
    settings: &DiagSettings,
    seed: u64,
) -> Result<DiagnosticsReport> {
    let domain = coeffs.domain;
    let gs = gram_structure(theta, coeffs, s, settings)?;
    let fs = feature_svd_structure(z, x, theta, coeffs, s)?;
    let mut hyper = Vec::new();
    for level in 0..=2usize.min(max_level(&domain)) {
        hyper.push((level, 4.0, hypercontractivity_probe(&domain, level, 4.0, 20, 20_000, seed)?));
    }
    Ok(DiagnosticsReport {
        phi_gram_dev: Some(eigenfunction_gram(&domain, theta, s)?),
        delta_op: Some(gs.delta_op),
        delta_converged: Some(gs.delta_converged),
        bulk_sv_dev: Some(fs.bulk_sv_dev),
        spike_min: Some(fs.spike_min),
        cross_dev: Some(fs.cross_dev),
        left_overlap: Some(fs.left_overlap),
        right_overlap: Some(fs.right_overlap),
        diag_dev: Some(gs.diag_dev),
        m_used: gs.m_used,
        u_used: u_count(&domain, s, big_s),
        degenerate: gs.degenerate || fs.degenerate,
        hyper_ratios: hyper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{build_feature_matrix, kernel_coeffs, KernelSeries, KernelSettings};
    use crate::orthopoly::{activation_coeffs, Activation};
    use proptest::prelude::*;

    fn sphere(d: usize) -> DomainSpec {
        DomainSpec::sphere(d).unwrap()
    }

    #[test]
    fn sphere_basis_is_orthonormal() {
        // Quadrature-free check: the level kernel equals Phi Phi^T.
        let d = 7;
        let dom = sphere(d);
        let pts = sample_points(&dom, 6, 1).unwrap();
        let phi = low_degree_basis(&dom, 2, &pts).unwrap();
        assert_eq!(phi.ncols(), 1 + 7 + 27);
        let g = Gegenbauer::new(&dom);
        let c = [1.0, degeneracy_f64(&dom, 1), degeneracy_f64(&dom, 2)];
        for i in 0..6 {
            for j in 0..6 {
                let kern = g.series(linalg::dot(pts.row(i), pts.row(j)), &c);
                let pp = phi.row(i).dot(&phi.row(j));
                assert!((kern - pp).abs() <= 1e-12 * kern.abs().max(1.0), "{i} {j}: {kern} {pp}");
            }
        }
    }

    #[test]
    fn hypercube_basis_matches_level_kernel() {
        let dom = DomainSpec::hypercube(6).unwrap();
        let pts = sample_points(&dom, 5, 2).unwrap();
        let phi = low_degree_basis(&dom, 3, &pts).unwrap();
        assert_eq!(phi.ncols(), 1 + 6 + 15 + 20);
        let g = Gegenbauer::new(&dom);
        let c: Vec<f64> = (0..4).map(|k| degeneracy_f64(&dom, k)).collect();
        for i in 0..5 {
            for j in 0..5 {
                let kern = g.series(linalg::dot(pts.row(i), pts.row(j)), &c);
                assert!((kern - phi.row(i).dot(&phi.row(j))).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn eigenfunction_gram_examples() {
        let dom = sphere(10);
        let one = sample_points(&dom, 1, 3).unwrap();
        assert_eq!(eigenfunction_gram(&dom, &one, 0).unwrap(), 0.0);
        // Explicit basis against the level-kernel route.
        let pts = sample_points(&dom, 300, 4).unwrap();
        for s in [1, 2] {
            let a = eigenfunction_gram(&dom, &pts, s).unwrap();
            let b = eigenfunction_gram_by_kernel(&dom, &pts, s).unwrap();
            assert!((a - b).abs() <= 1e-9, "s={s}: {a} vs {b}");
        }
        // Sphere s = 3 takes the kernel route.
        let small = sample_points(&sphere(4), 200, 5).unwrap();
        assert!(eigenfunction_gram(&sphere(4), &small, 3).is_ok());
    }

    #[test]
    fn hypercube_gram_by_enumeration() {
        for d in [4usize, 8, 12] {
            let dom = DomainSpec::hypercube(d).unwrap();
            let rows: Vec<Vec<f64>> = (0..1usize << d)
                .map(|mask| (0..d).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect())
                .collect();
            let all = PointMatrix::from_rows(&dom, &rows, 0).unwrap();
            assert!(eigenfunction_gram(&dom, &all, 1).unwrap() <= 1e-12);
            assert!(eigenfunction_gram(&dom, &all, 2).unwrap() <= 1e-12);
            let sampled = sample_points(&dom, 4000, 6).unwrap();
            let dev = eigenfunction_gram(&dom, &sampled, 1).unwrap();
            // Entries have standard deviation 1/sqrt(N); the norm scales like sqrt(m/N).
            assert!(dev <= 4.0 * ((d + 1) as f64 / 4000.0).sqrt(), "d={d}: {dev}");
        }
    }

    #[test]
    fn constant_kernel_has_no_delta() {
        let dom = sphere(6);
        let c = activation_coeffs(&dom, &Activation::constant(1.0), 4, 1e-12).unwrap();
        let pts = sample_points(&dom, 30, 1).unwrap();
        let gs = gram_structure(&pts, &c, 0, &DiagSettings::default()).unwrap();
        assert_eq!(gs.delta_op, 0.0);
        assert!(gs.degenerate);
    }

    #[test]
    fn gram_structure_identities() {
        let dom = sphere(12);
        let c = kernel_coeffs(&dom, &Activation::shifted_relu(0.5), &KernelSettings::default()).unwrap();
        let pts = sample_points(&dom, 200, 3).unwrap();
        let gs = gram_structure(&pts, &c, 1, &DiagSettings::default()).unwrap();
        assert!(gs.recomposition_err.unwrap() <= 1e-10 * gs.kappa);
        assert!(gs.diag_dev <= 1e-12);
        assert!(gs.delta_converged);
        assert!(gs.delta_op >= gs.delta_max_col / (200f64).sqrt());
        assert!(gs.delta_op <= gs.delta_frobenius * (1.0 + 1e-9));
        // Dense oracle for the same Delta.
        let u = KernelSeries::activation_kernel(&c).gram(&pts);
        let low: Vec<f64> = (0..2).map(|k| c.level_trace(k)).collect();
        let g = Gegenbauer::new(&dom);
        let mut delta = DMatrix::zeros(200, 200);
        for i in 0..200 {
            for j in 0..200 {
                if i != j {
                    delta[(i, j)] = (u[(i, j)] - g.series(linalg::dot(pts.row(i), pts.row(j)), &low)) / gs.kappa;
                }
            }
        }
        let dense = symmetric_op_norm(&delta);
        assert!((dense - gs.delta_op).abs() <= 1e-4 * dense, "{dense} vs {}", gs.delta_op);
    }

    #[test]
    fn hypercube_lambda_is_identity() {
        let dom = DomainSpec::hypercube(10).unwrap();
        let c = kernel_coeffs(&dom, &Activation::shifted_relu(0.5), &KernelSettings::default()).unwrap();
        let pts = sample_points(&dom, 50, 3).unwrap();
        let gs = gram_structure(&pts, &c, 1, &DiagSettings::default()).unwrap();
        assert!(gs.diag_dev <= 1e-12);
    }

    #[test]
    fn linear_activation_is_degenerate() {
        let d = 8;
        let dom = sphere(d);
        let c = activation_coeffs(&dom, &Activation::gegenbauer(1), 4, 1e-12).unwrap();
        let x = sample_points(&dom, 20, 1).unwrap();
        let th = sample_points(&dom, 30, 2).unwrap();
        let z = build_feature_matrix(&dom, &x, &th, &Activation::gegenbauer(1)).unwrap().z;
        let rank = z.clone().svd(false, false).singular_values.iter().filter(|&&v| v > 1e-10).count();
        assert!(rank <= d);
        let f = feature_svd_structure(&z, &x, &th, &c, 1).unwrap();
        assert!(f.degenerate);
    }

    #[test]
    fn svd_is_transpose_invariant() {
        let dom = sphere(6);
        let act = Activation::shifted_relu(0.5);
        let c = kernel_coeffs(&dom, &act, &KernelSettings::default()).unwrap();
        let x = sample_points(&dom, 25, 1).unwrap();
        let th = sample_points(&dom, 25, 2).unwrap();
        let z = build_feature_matrix(&dom, &x, &th, &act).unwrap().z;
        let a = feature_svd_structure(&z, &x, &th, &c, 1).unwrap();
        let zt = build_feature_matrix(&dom, &th, &x, &act).unwrap().z;
        assert!((&zt - z.transpose()).amax() == 0.0);
        let b = feature_svd_structure(&zt, &th, &x, &c, 1).unwrap();
        for (u, v) in a.normalized_sv.iter().zip(&b.normalized_sv) {
            assert!((u - v).abs() <= 1e-10 * u.max(1.0));
        }
    }

    #[test]
    fn hypercontractivity_examples() {
        let dom = sphere(10);
        let r0 = hypercontractivity_probe(&dom, 0, 4.0, 3, 1000, 1).unwrap();
        assert!((r0 - 1.0).abs() <= 1e-12);
        let r1 = hypercontractivity_probe(&dom, 1, 4.0, 5, 100_000, 2).unwrap();
        assert!(r1 <= 3.0 * 1.05, "{r1}");
        for d in [6usize, 10, 12] {
            let cube = DomainSpec::hypercube(d).unwrap();
            for level in 0..=3 {
                for q in [3.0, 4.0] {
                    let r = hypercontractivity_probe(&cube, level, q, 4, 0, 7).unwrap();
                    assert!(r <= (q - 1.0).powi(level as i32) + 1e-12, "d={d} l={level} q={q}: {r}");
                }
            }
        }
        assert!(hypercontractivity_probe(&dom, 1, 1.5, 1, 10, 0).is_err());
    }

    #[test]
    fn full_report_on_small_problem() {
        let dom = sphere(8);
        let act = Activation::shifted_relu(0.5);
        let c = kernel_coeffs(&dom, &act, &KernelSettings::default()).unwrap();
        let x = sample_points(&dom, 40, 1).unwrap();
        let th = sample_points(&dom, 120, 2).unwrap();
        let z = build_feature_matrix(&dom, &x, &th, &act).unwrap().z;
        let r = diagnose(&x, &th, &z, &c, 1, 2, &DiagSettings::default(), 3).unwrap();
        assert_eq!(r.m_used, 9);
        assert_eq!(r.hyper_ratios.len(), 3);
        assert!(!r.degenerate);
        assert!(r.spike_min.unwrap() > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn diagnostics_finite_and_nonnegative(seed in 0u64..1000, d in 5usize..12) {
            let dom = sphere(d);
            let act = Activation::shifted_relu(0.5);
            let c = kernel_coeffs(&dom, &act, &KernelSettings::default()).unwrap();
            let x = sample_points(&dom, 30, seed).unwrap();
            let th = sample_points(&dom, 60, seed + 1).unwrap();
            let z = build_feature_matrix(&dom, &x, &th, &act).unwrap().z;
            let f = feature_svd_structure(&z, &x, &th, &c, 1).unwrap();
            for v in [f.spike_min, f.bulk_sv_dev, f.cross_dev, f.left_overlap, f.right_overlap] {
                prop_assert!(v.is_finite() && v >= 0.0);
            }
            let gs = gram_structure(&th, &c, 1, &DiagSettings::default()).unwrap();
            prop_assert!(gs.delta_op.is_finite() && gs.delta_op >= 0.0);
            prop_assert!(eigenfunction_gram(&dom, &th, 1).unwrap() >= 0.0);
        }
    }
}
