//! The two probability spaces: the sphere of radius `sqrt(d)` and the Boolean
//! hypercube `{-1, +1}^d`, both with the uniform law.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // math methods without std
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

/// Relative tolerance on `|x|^2 = d` for sphere points.
pub const SPHERE_NORM_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum DomainKind {
    Sphere,
    Hypercube,
}

impl DomainKind {
    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Sphere => "sphere",
            DomainKind::Hypercube => "hypercube",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sphere" => Ok(DomainKind::Sphere),
            "hypercube" | "cube" => Ok(DomainKind::Hypercube),
            other => Err(Error::Config(format!("unknown domain `{other}`"))),
        }
    }
}

/// Geometry and ambient dimension. Constructed through [`DomainSpec::new`],
/// which enforces `d >= 3` on the sphere and `d >= 1` on the hypercube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub d: usize,
}

impl DomainSpec {
    pub fn new(kind: DomainKind, d: usize) -> Result<Self> {
        match kind {
            DomainKind::Sphere if d < 3 => Err(Error::Config(format!(
                "sphere needs d >= 3 (Gegenbauer parameter (d-3)/2 > -1/2), got d = {d}"
            ))),
            DomainKind::Hypercube if d < 1 => {
                Err(Error::Config("hypercube needs d >= 1".into()))
            }
            _ => Ok(DomainSpec { kind, d }),
        }
    }

    pub fn sphere(d: usize) -> Result<Self> {
        Self::new(DomainKind::Sphere, d)
    }

    pub fn hypercube(d: usize) -> Result<Self> {
        Self::new(DomainKind::Hypercube, d)
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.kind, self.d).map(|_| ())
    }

    /// Whether `x` lies on the domain (sphere: `|x|^2 = d` within
    /// [`SPHERE_NORM_RTOL`]; hypercube: every coordinate is `+-1`).
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.d {
            return false;
        }
        match self.kind {
            DomainKind::Sphere => {
                let d = self.d as f64;
                (linalg::dot(x, x) - d).abs() <= SPHERE_NORM_RTOL * d
            }
            DomainKind::Hypercube => x.iter().all(|&v| v == 1.0 || v == -1.0),
        }
    }

    /// Draws one point into `out` (length `d`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self.kind {
            DomainKind::Sphere => loop {
                for v in out.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                let nrm = linalg::norm2(out);
                if nrm > 0.0 {
                    let scale = (self.d as f64).sqrt() / nrm;
                    out.iter_mut().for_each(|v| *v *= scale);
                    break;
                }
            },
            DomainKind::Hypercube => {
                for v in out.iter_mut() {
                    *v = if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
            }
        }
    }
}

/// `rows x d` matrix of domain points, stored row-major, with the seed that
/// generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMatrix {
    rows: usize,
    d: usize,
    values: Vec<f64>,
    seed: u64,
}

impl PointMatrix {
    /// Wraps explicit rows. Every row must lie on `domain`.
    pub fn from_rows(domain: &DomainSpec, rows: &[Vec<f64>], seed: u64) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * domain.d);
        for (i, r) in rows.iter().enumerate() {
            if !domain.contains(r) {
                return Err(Error::Domain(format!("row {i} is not a {} point", domain.kind.name())));
            }
            values.extend_from_slice(r);
        }
        Ok(PointMatrix { rows: rows.len(), d: domain.d, values, seed })
    }

    pub(crate) fn from_raw(rows: usize, d: usize, values: Vec<f64>, seed: u64) -> Self {
        debug_assert_eq!(values.len(), rows * d);
        PointMatrix { rows, d, values, seed }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d.max(1))
    }

    /// First `count` rows as a new matrix (same seed).
    pub fn head(&self, count: usize) -> PointMatrix {
        let count = count.min(self.rows);
        PointMatrix {
            rows: count,
            d: self.d,
            values: self.values[..count * self.d].to_vec(),
            seed: self.seed,
        }
    }
}

/// `count` i.i.d. uniform points on `domain`, deterministic in
/// `(domain, count, seed)`.
pub fn sample_points(domain: &DomainSpec, count: usize, seed: u64) -> Result<PointMatrix> {
    domain.validate()?;
    if count == 0 {
        return Err(Error::Config("sample_points needs count >= 1".into()));
    }
    let mut r = rng::rng_from_seed(seed);
    let mut values = vec![0.0; count * domain.d];
    for row in values.chunks_exact_mut(domain.d) {
        domain.sample_into(&mut r, row);
    }
    Ok(PointMatrix::from_raw(count, domain.d, values, seed))
}

/// Gram matrix of inner products `<a_i, b_j>`, as a row-major `rows(a) x
/// rows(b)` vector. Each entry sums coordinates left to right.
pub fn inner_products(a: &PointMatrix, b: &PointMatrix) -> Result<Vec<f64>> {
    if a.d != b.d {
        return Err(Error::DimensionMismatch(format!(
            "inner products between d = {} and d = {} points",
            a.d, b.d
        )));
    }
    let mut out = Vec::with_capacity(a.rows * b.rows);
    for x in a.iter_rows() {
        for y in b.iter_rows() {
            out.push(linalg::dot(x, y));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_sphere() {
        assert!(matches!(DomainSpec::sphere(2), Err(Error::Config(_))));
        assert!(DomainSpec::sphere(3).is_ok());
        assert!(DomainSpec::hypercube(1).is_ok());
        assert!(DomainSpec::hypercube(0).is_err());
        let bad = DomainSpec { kind: DomainKind::Sphere, d: 2 };
        assert!(sample_points(&bad, 3, 0).is_err());
    }

    #[test]
    fn sphere_rows_have_norm_sqrt_d() {
        let dom = DomainSpec::sphere(10).unwrap();
        let p = sample_points(&dom, 5, 7).unwrap();
        assert_eq!(p.rows(), 5);
        for r in p.iter_rows() {
            let n2 = linalg::dot(r, r);
            assert!((n2 - 10.0).abs() <= 1e-12 * 10.0, "norm^2 = {n2}");
        }
    }

    #[test]
    fn hypercube_rows_are_signs() {
        let dom = DomainSpec::hypercube(4).unwrap();
        let p = sample_points(&dom, 3, 1).unwrap();
        assert_eq!(p.rows(), 3);
        assert!(p.values().iter().all(|&v| v == 1.0 || v == -1.0));
    }

    #[test]
    fn sampling_is_reproducible() {
        let dom = DomainSpec::sphere(6).unwrap();
        let a = sample_points(&dom, 20, 42).unwrap();
        let b = sample_points(&dom, 20, 42).unwrap();
        assert_eq!(a.values(), b.values());
        let c = sample_points(&dom, 20, 43).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn sphere_marginal_moments() {
        let dom = DomainSpec::sphere(50).unwrap();
        let n = 100_000;
        let p = sample_points(&dom, n, 0).unwrap();
        let mut m1 = 0.0;
        let mut m2 = vec![0.0; 50];
        for r in p.iter_rows() {
            m1 += r[0];
            for (acc, v) in m2.iter_mut().zip(r) {
                *acc += v * v;
            }
        }
        m1 /= n as f64;
        assert!(m1.abs() <= 4.0 / (n as f64).sqrt(), "mean {m1}");
        for m in m2 {
            let m = m / n as f64;
            assert!((m - 1.0).abs() <= 0.05, "second moment {m}");
        }
    }

    #[test]
    fn inner_product_examples() {
        let dom = DomainSpec::sphere(8).unwrap();
        let a = sample_points(&dom, 1, 3).unwrap();
        let g = inner_products(&a, &a).unwrap();
        assert!((g[0] - 8.0).abs() <= 1e-10 * 8.0);

        let cube = DomainSpec::hypercube(5).unwrap();
        let x = sample_points(&cube, 4, 9).unwrap();
        let neg: Vec<Vec<f64>> = x.iter_rows().map(|r| r.iter().map(|v| -v).collect()).collect();
        let y = PointMatrix::from_rows(&cube, &neg, 0).unwrap();
        let g = inner_products(&x, &y).unwrap();
        for i in 0..4 {
            assert_eq!(g[i * 4 + i], -5.0);
        }
        let gx = inner_products(&x, &x).unwrap();
        for i in 0..4 {
            assert_eq!(gx[i * 4 + i], 5.0);
        }
    }

    #[test]
    fn inner_products_match_scalar_oracle() {
        let dom = DomainSpec::sphere(3).unwrap();
        let a = sample_points(&dom, 3, 11).unwrap();
        let b = sample_points(&dom, 2, 12).unwrap();
        let g = inner_products(&a, &b).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let (x, y) = (a.row(i), b.row(j));
                let expect = x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
                assert_eq!(g[i * 2 + j], expect);
            }
        }
        let other = sample_points(&DomainSpec::sphere(4).unwrap(), 1, 0).unwrap();
        assert!(matches!(inner_products(&a, &other), Err(Error::DimensionMismatch(_))));
    }
}
