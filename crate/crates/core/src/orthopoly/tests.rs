use super::*;
use crate::domains::sample_points;
use crate::rng::rng_from_seed;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

fn sphere(d: usize) -> DomainSpec {
    DomainSpec::sphere(d).unwrap()
}

fn cube(d: usize) -> DomainSpec {
    DomainSpec::hypercube(d).unwrap()
}

fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * core::f64::consts::PI).sqrt()
}

fn upper_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / core::f64::consts::SQRT_2)
}

#[test]
fn degeneracy_examples() {
    assert_eq!(degeneracy(&sphere(3), 2).unwrap(), 5);
    assert_eq!(degeneracy(&cube(5), 2).unwrap(), 10);
    for d in [3usize, 4, 17, 1000] {
        assert_eq!(degeneracy(&sphere(d), 1).unwrap(), d as u64);
        assert_eq!(degeneracy(&sphere(d), 0).unwrap(), 1);
    }
    // d = 3 gives 2l + 1
    for l in 0..30 {
        assert_eq!(degeneracy(&sphere(3), l).unwrap(), 2 * l as u64 + 1);
    }
    assert!(matches!(degeneracy(&cube(4), 5), Err(Error::Domain(_))));
    assert!(matches!(degeneracy(&sphere(1000), 40), Err(Error::Overflow(_))));
    assert!(matches!(degeneracy(&cube(200), 100), Err(Error::Overflow(_))));
}

#[test]
fn degeneracy_sphere_difference_form() {
    // B = C(d+l-1, l) - C(d+l-3, l-2)
    let c = |n: u64, k: u64| binomial_checked(n, k).unwrap();
    for d in 3u64..12 {
        for l in 2u64..10 {
            let expect = c(d + l - 1, l) - c(d + l - 3, l - 2);
            assert_eq!(u128::from(degeneracy(&sphere(d as usize), l as usize).unwrap()), expect);
        }
    }
}

#[test]
fn gegenbauer_examples() {
    for dom in [sphere(3), sphere(50), cube(7), cube(30)] {
        let kmax = if dom.kind == DomainKind::Hypercube { dom.d } else { 25 };
        let v = gegenbauer_eval(&dom, kmax, dom.d as f64).unwrap();
        for (k, q) in v.iter().enumerate() {
            assert!((q - 1.0).abs() <= 1e-12, "{dom:?} k = {k}: {q}");
        }
        let t = 0.37 * dom.d as f64;
        assert_eq!(gegenbauer_eval(&dom, 1, t).unwrap()[1], t / dom.d as f64);
    }
    let c2 = cube(2);
    assert_eq!(gegenbauer_eval(&c2, 2, 2.0).unwrap()[2], 1.0);
    assert_eq!(gegenbauer_eval(&c2, 2, 0.0).unwrap()[2], -1.0);
    assert_eq!(gegenbauer_eval(&c2, 2, -2.0).unwrap()[2], 1.0);
    assert!(matches!(gegenbauer_eval(&sphere(5), 3, 5.1), Err(Error::Domain(_))));
    assert!(gegenbauer_eval(&sphere(5), 3, 5.0 + 1e-12).is_ok());
    assert!(gegenbauer_eval(&cube(3), 4, 1.0).is_err());
}

#[test]
fn hypercube_q2_matches_enumeration() {
    // Q_2(<x, y>) is the average of x_i x_j y_i y_j over pairs.
    let d = 6;
    let g = Gegenbauer::new(&cube(d));
    for w in 0..=d {
        let x: Vec<f64> = (0..d).map(|i| if i < w { -1.0 } else { 1.0 }).collect();
        let t: f64 = x.iter().sum();
        let mut acc = 0.0;
        let mut pairs = 0.0;
        for i in 0..d {
            for j in i + 1..d {
                acc += x[i] * x[j];
                pairs += 1.0;
            }
        }
        assert!((g.value(2, t) - acc / pairs).abs() <= 1e-14);
    }
}

#[test]
fn series_and_value_agree_with_fill() {
    let dom = sphere(9);
    let g = Gegenbauer::new(&dom);
    let mut q = vec![0.0; 8];
    g.fill(2.3, &mut q);
    for (k, qk) in q.iter().enumerate() {
        assert!((g.value(k, 2.3) - qk).abs() <= 1e-15);
    }
    let c: Vec<f64> = (0..8).map(|k| 1.0 / (k as f64 + 1.0)).collect();
    let expect: f64 = c.iter().zip(&q).map(|(a, b)| a * b).sum();
    assert!((g.series(2.3, &c) - expect).abs() <= 1e-14);
    assert_eq!(g.series(2.3, &[]), 0.0);
}

#[test]
fn sphere_orthonormality() {
    for d in [5usize, 20, 100] {
        let dom = sphere(d);
        let rule = marginal_quadrature(d, 40).unwrap();
        let g = Gegenbauer::new(&dom);
        let mut gram = [[0.0f64; 13]; 13];
        let mut q = [0.0f64; 13];
        for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
            g.fill(d as f64 * u, &mut q);
            for j in 0..13 {
                for k in 0..13 {
                    gram[j][k] += w * q[j] * q[k];
                }
            }
        }
        for j in 0..13 {
            for k in 0..13 {
                let b = degeneracy_f64(&dom, k);
                let expect = if j == k { 1.0 / b } else { 0.0 };
                assert!((gram[j][k] - expect).abs() * b <= 1e-8, "d={d} j={j} k={k}: {:e} {:e}", (gram[j][k] - expect).abs() * b, (gram[j][k] - expect).abs() * (b * degeneracy_f64(&dom, j)).sqrt());
            }
        }
    }
}

#[test]
fn hypercube_orthonormality_by_enumeration() {
    for d in [3usize, 8, 14] {
        let dom = cube(d);
        let g = Gegenbauer::new(&dom);
        let mut gram = vec![0.0f64; (d + 1) * (d + 1)];
        let mut q = vec![0.0; d + 1];
        let total = 1usize << d;
        for mask in 0..total {
            let t = d as f64 - 2.0 * (mask.count_ones() as f64);
            g.fill(t, &mut q);
            for j in 0..=d {
                for k in 0..=d {
                    gram[j * (d + 1) + k] += q[j] * q[k];
                }
            }
        }
        for j in 0..=d {
            for k in 0..=d {
                let b = degeneracy(&dom, k).unwrap() as f64;
                let expect = if j == k { 1.0 / b } else { 0.0 };
                let got = gram[j * (d + 1) + k] / total as f64;
                assert!((got - expect).abs() <= 1e-12, "d={d} j={j} k={k}: {got}");
            }
        }
    }
}

#[test]
fn product_formula_monte_carlo() {
    let d = 7;
    let dom = sphere(d);
    let g = Gegenbauer::new(&dom);
    let ends = sample_points(&dom, 2, 5).unwrap();
    let (x1, x2) = (ends.row(0), ends.row(1));
    let t12 = crate::linalg::dot(x1, x2);
    let n = 200_000;
    let pts = sample_points(&dom, n, 6).unwrap();
    let mut sum = [[0.0f64; 5]; 5];
    let mut sq = [[0.0f64; 5]; 5];
    let (mut q1, mut q2) = ([0.0; 5], [0.0; 5]);
    for x in pts.iter_rows() {
        g.fill(crate::linalg::dot(x1, x), &mut q1);
        g.fill(crate::linalg::dot(x2, x), &mut q2);
        for j in 0..5 {
            for k in 0..5 {
                let v = q1[j] * q2[k];
                sum[j][k] += v;
                sq[j][k] += v * v;
            }
        }
    }
    for j in 0..5 {
        for k in 0..5 {
            let mean = sum[j][k] / n as f64;
            let var = (sq[j][k] / n as f64 - mean * mean).max(0.0);
            let se = (var / n as f64).sqrt();
            let expect = if j == k { g.value(k, t12) / degeneracy_f64(&dom, k) } else { 0.0 };
            assert!((mean - expect).abs() <= 4.0 * se + 1e-12, "j={j} k={k}: {mean} vs {expect} (se {se})");
        }
    }
}

#[test]
fn constant_activation_coeffs() {
    for dom in [sphere(10), cube(6)] {
        let c = activation_coeffs(&dom, &Activation::constant(1.0), 5, 1e-10).unwrap();
        assert!((c.xi[0] - 1.0).abs() <= 1e-12);
        assert!(c.xi[1..].iter().all(|x| x.abs() <= 1e-12));
        assert!(c.tail_trace.abs() <= 1e-12);
        assert!((c.total_l2 - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn pure_gegenbauer_coeffs() {
    for dom in [sphere(6), sphere(40), cube(9)] {
        for j in 0..5 {
            let c = activation_coeffs(&dom, &Activation::gegenbauer(j), 6, 1e-12).unwrap();
            let bj = degeneracy_f64(&dom, j);
            for (k, x) in c.xi.iter().enumerate() {
                let expect = if k == j { 1.0 / bj } else { 0.0 };
                assert!((x - expect).abs() <= 1e-11 / bj.max(1.0).sqrt(), "{dom:?} j={j} k={k}: {x}");
            }
            assert!(c.tail_trace <= 1e-12);
        }
    }
}

#[test]
fn hypercube_parseval_closes() {
    let dom = cube(10);
    let c = activation_coeffs(&dom, &Activation::shifted_relu(0.5), 10, 1e-10).unwrap();
    let sum: f64 = c.level_traces().iter().sum();
    assert!((sum - c.total_l2).abs() <= 1e-12);
    assert!(c.tail_trace <= 1e-12);
    assert!(activation_coeffs(&dom, &Activation::relu(), 11, 1e-10).is_err());
    // Direct enumeration of E[sigma(<1, x>/sqrt(d))^2].
    let mut direct = 0.0;
    for mask in 0..1u32 << 10 {
        let t = (10.0 - 2.0 * mask.count_ones() as f64) / 10f64.sqrt();
        direct += (t - 0.5f64).max(0.0).powi(2);
    }
    direct /= 1024.0;
    assert!((direct - c.total_l2).abs() <= 1e-13);
}

#[test]
fn shifted_relu_sphere_matches_monte_carlo() {
    // Draws <e, x>/sqrt(d) for x uniform on the sphere through g / sqrt(g^2 + chi2_{d-1}).
    let d = 50;
    let kmax = 20;
    let dom = sphere(d);
    let act = Activation::shifted_relu(0.5);
    let c = activation_coeffs(&dom, &act, kmax, 1e-10).unwrap();
    let g = Gegenbauer::new(&dom);
    let chi = ChiSquared::new((d - 1) as f64).unwrap();
    let mut rng = rng_from_seed(2024);
    let n = 10_000_000usize;
    let sd = (d as f64).sqrt();
    let mut sum = vec![0.0f64; kmax + 1];
    let mut sq = vec![0.0f64; kmax + 1];
    let mut q = vec![0.0; kmax + 1];
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        let r = chi.sample(&mut rng);
        let t = sd * z / (z * z + r).sqrt();
        let f = (t - 0.5).max(0.0);
        if f == 0.0 {
            continue;
        }
        g.fill(sd * t, &mut q);
        for k in 0..=kmax {
            let v = f * q[k];
            sum[k] += v;
            sq[k] += v * v;
        }
    }
    for k in 0..=kmax {
        let mean = sum[k] / n as f64;
        let se = ((sq[k] / n as f64 - mean * mean).max(0.0) / n as f64).sqrt();
        assert!((mean - c.xi[k]).abs() <= 4.0 * se, "k={k}: mc {mean} vs {} (se {se})", c.xi[k]);
    }
    assert!(c.parseval_residual().abs() <= 1e-10);
    assert!(c.level_traces().iter().all(|&t| t <= c.total_l2));
}

#[test]
fn hermite_examples() {
    let id = hermite_coeffs(&Activation::polynomial(vec![0.0, 1.0]), 6).unwrap();
    for (k, m) in id.iter().enumerate() {
        let expect = if k == 1 { 1.0 } else { 0.0 };
        assert!((m - expect).abs() <= 1e-12, "k={k}: {m}");
    }
    let he2 = hermite_coeffs(&Activation::polynomial(vec![-1.0, 0.0, 1.0]), 4).unwrap();
    assert!((he2[2] - 2.0).abs() <= 1e-12);
    assert!(he2[0].abs() <= 1e-12 && he2[1].abs() <= 1e-12 && he2[3].abs() <= 1e-12);
    assert!(hermite_coeffs(&Activation::gegenbauer(2), 3).is_err());
}

#[test]
fn shifted_relu_hermite_closed_form() {
    let c = 0.5;
    let mu = hermite_coeffs(&Activation::shifted_relu(c), 6).unwrap();
    let mut he = [0.0; 7];
    hermite_fill(c, &mut he);
    let expect = [
        phi(c) - c * upper_tail(c),
        upper_tail(c),
        phi(c) * he[0],
        phi(c) * he[1],
        phi(c) * he[2],
        phi(c) * he[3],
        phi(c) * he[4],
    ];
    for k in 0..=6 {
        assert!((mu[k] - expect[k]).abs() <= 1e-9, "k={k}: {} vs {}", mu[k], expect[k]);
    }
}

#[test]
fn hermite_limit_of_sphere_coefficients() {
    let act = Activation::shifted_relu(0.5);
    let mu = hermite_coeffs(&act, 4).unwrap();
    let mut gaps = Vec::new();
    for d in [200usize, 500, 2000] {
        let dom = sphere(d);
        let c = activation_coeffs(&dom, &act, 4, 1e-12).unwrap();
        let mut fact = 1.0;
        let mut gap = 0.0f64;
        for k in 0..=4 {
            if k > 0 {
                fact *= k as f64;
            }
            let scaled = c.xi[k] * (degeneracy_f64(&dom, k) * fact).sqrt();
            gap = gap.max((scaled - mu[k]).abs());
        }
        gaps.push(gap);
    }
    assert!(gaps[0] >= gaps[1] && gaps[1] >= gaps[2], "{gaps:?}");
    assert!(gaps[2] <= 0.02, "{gaps:?}");
}

#[test]
fn coefficient_errors() {
    let dom = sphere(10);
    let tight = CoeffSettings { tol: 1e-10, node_cap: 64 };
    assert!(matches!(
        activation_coeffs_with(&dom, &Activation::shifted_relu(0.5), 4, &tight),
        Err(Error::Numeric(_))
    ));
    assert!(activation_coeffs(&dom, &Activation::relu(), 4, 0.0).is_err());
}

proptest! {
    #[test]
    fn degeneracy_integer_and_float_agree(d in 3usize..200, l in 0usize..12) {
        let dom = sphere(d);
        if let Ok(b) = degeneracy(&dom, l) {
            let f = degeneracy_f64(&dom, l);
            prop_assert!((b as f64 - f).abs() <= 1e-12 * f);
        }
        let cd = d.min(60);
        let c = cube(cd);
        let l = l.min(cd);
        let b = degeneracy(&c, l).unwrap() as f64;
        prop_assert!((b - degeneracy_f64(&c, l)).abs() <= 1e-12 * b);
    }

    #[test]
    fn sphere_gegenbauer_bounded(d in 3usize..300, frac in -1.0f64..1.0, k in 0usize..40) {
        let dom = sphere(d);
        let g = Gegenbauer::new(&dom);
        let q = g.value(k, frac * d as f64);
        prop_assert!(q.abs() <= 1.0 + 1e-10);
        prop_assert!((g.value(k, d as f64) - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn hypercube_gegenbauer_bounded_on_lattice(d in 1usize..40, w_frac in 0.0f64..=1.0, k_frac in 0.0f64..=1.0) {
        let dom = cube(d);
        let w = (w_frac * d as f64).round() as usize;
        let k = (k_frac * d as f64).round() as usize;
        let t = d as f64 - 2.0 * w as f64;
        let q = Gegenbauer::new(&dom).value(k, t);
        prop_assert!(q.abs() <= 1.0 + 1e-9, "Q_{}({}) = {}", k, t, q);
        // Q_k(-t) = (-1)^k Q_k(t)
        let qm = Gegenbauer::new(&dom).value(k, -t);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!((qm - sign * q).abs() <= 1e-9);
    }

    #[test]
    fn quadrature_weights_normalized(d in 3usize..500, count in 2usize..80) {
        let r = marginal_quadrature(d, count).unwrap();
        prop_assert!((r.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(r.weights.iter().all(|&w| w > 0.0));
        prop_assert!(r.nodes.iter().all(|&u| u.abs() <= 1.0));
        prop_assert!((r.integrate(|u| u * u) - 1.0 / d as f64).abs() <= 1e-10);
    }

    #[test]
    fn activation_parseval(d in 3usize..80, c in -1.0f64..1.0, kmax in 0usize..10) {
        let dom = sphere(d);
        let co = activation_coeffs(&dom, &Activation::shifted_relu(c), kmax, 1e-10).unwrap();
        prop_assert!(co.parseval_residual().abs() <= 1e-10);
        prop_assert!(co.tail_trace >= 0.0);
        for t in co.level_traces() {
            prop_assert!(t <= co.total_l2 + 1e-12);
        }
    }
}

#[test]
fn marginal_two_nodes_symmetric() {
    for d in [3usize, 10, 99] {
        let r = marginal_quadrature(d, 2).unwrap();
        assert!((r.nodes[0] + r.nodes[1]).abs() <= 1e-15);
        assert!((r.weights[0] - r.weights[1]).abs() <= 1e-15);
        assert!(r.integrate(|u| u).abs() <= 1e-16);
    }
    assert!(marginal_quadrature(10, 1).is_err());
    assert!(marginal_quadrature(2, 5).is_err());
}

#[test]
fn precomputed_recurrence_matches() {
    for dom in [DomainSpec::sphere(7).unwrap(), DomainSpec::sphere(300).unwrap(), DomainSpec::hypercube(9).unwrap()] {
        let g = Gegenbauer::new(&dom);
        let rec = Recurrence::new(&dom, 20);
        let c: Vec<f64> = (0..21).map(|k| 1.0 / (1.0 + k as f64)).collect();
        for i in 0..=40 {
            let t = dom.d as f64 * (i as f64 / 20.0 - 1.0);
            let want = g.series(t, &c);
            assert!((rec.series(t, &c) - want).abs() <= 1e-13 * want.abs().max(1.0));
            let (lo, hi) = rec.split_series(t, &c, 3);
            assert!((lo - g.series(t, &c[..3])).abs() <= 1e-13);
            assert!((lo + hi - want).abs() <= 1e-13 * want.abs().max(1.0));
        }
    }
}
