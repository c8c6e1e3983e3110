use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use slhjb::quadrature::{gaussian_moment, monomials, tchakaloff_bound};
use slhjb::{caratheodory_reduce, hermite_rule, tensor_rule, QuadratureRule};

/// Golub-Welsch for the probabilists' Hermite weight: eigenvalues of the
/// Jacobi matrix with off-diagonal sqrt(k) are the nodes, squared first
/// eigenvector components the weights.
fn golub_welsch(m: usize) -> Vec<(f64, f64)> {
    let mut jacobi = DMatrix::<f64>::zeros(m, m);
    for k in 1..m {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

fn sorted(rule: &QuadratureRule) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = rule.iter().map(|(x, w)| (x[0], w)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

fn double_factorial_moment(j: u32) -> f64 {
    if j % 2 == 1 {
        return 0.0;
    }
    (1..j).step_by(2).map(f64::from).product()
}

#[test]
fn matches_golub_welsch() {
    for m in 2..=20 {
        let rule = hermite_rule(m).unwrap();
        let ours = sorted(&rule);
        let oracle = golub_welsch(m);
        assert_eq!(ours.len(), m);
        for ((x, w), (xo, wo)) in ours.iter().zip(&oracle) {
            assert!((x - xo).abs() <= 1e-12 * xo.abs().max(1.0), "M={m}: node {x} vs {xo}");
            assert!((w - wo).abs() <= 1e-12 * wo.max(1e-3), "M={m}: weight {w} vs {wo}");
        }
    }
}

#[test]
fn five_point_rule() {
    // Roots of He_5 = x^5 - 10x^3 + 15x are 0 and ±sqrt(5 ± sqrt(10)).
    let rule = hermite_rule(5).unwrap();
    let pairs = sorted(&rule);
    let r10 = 10f64.sqrt();
    let expected = [-(5.0 + r10).sqrt(), -(5.0 - r10).sqrt(), 0.0, (5.0 - r10).sqrt(), (5.0 + r10).sqrt()];
    for ((x, w), e) in pairs.iter().zip(expected) {
        assert!((x - e).abs() < 1e-13);
        // Weight = M! / (M He_{M-1}(x))^2 with He_4 = x^4 - 6x^2 + 3.
        let he4 = e.powi(4) - 6.0 * e * e + 3.0;
        let w_exact = 120.0 / (5.0 * he4).powi(2);
        assert!((w - w_exact).abs() < 1e-14, "{w} vs {w_exact}");
    }
}

#[test]
fn symmetric_nodes_equal_weights() {
    for m in 2..=30 {
        let pairs = sorted(&hermite_rule(m).unwrap());
        for i in 0..m / 2 {
            let (a, wa) = pairs[i];
            let (b, wb) = pairs[m - 1 - i];
            assert!((a + b).abs() < 1e-12, "M={m}");
            assert!((wa - wb).abs() < 1e-14, "M={m}");
        }
    }
}

#[test]
fn tensor_exactness_up_to_three_dims() {
    for m in 2..=5 {
        let base = hermite_rule(m).unwrap();
        for p in 1..=3 {
            let rule = tensor_rule(&base, p).unwrap();
            assert_eq!(rule.len(), m.pow(p as u32));
            for beta in monomials(p, 2 * m as u32 - 1) {
                let exact: f64 = beta.iter().map(|&b| double_factorial_moment(b)).product();
                assert!((rule.moment(&beta) - exact).abs() <= 1e-10 * exact.max(1.0), "M={m} p={p} {beta:?}");
            }
        }
    }
}

#[test]
fn reduction_invariants() {
    for (m, p) in [(2, 2), (2, 3), (3, 2), (3, 3), (3, 4), (4, 2)] {
        let full = tensor_rule(&hermite_rule(m).unwrap(), p).unwrap();
        let reduced = caratheodory_reduce(&full, m).unwrap();
        assert!(reduced.len() <= tchakaloff_bound(m, p), "M={m} p={p}: {}", reduced.len());
        assert!(reduced.len() <= full.len());
        assert!(reduced.weights().iter().all(|&w| w >= 0.0));
        for beta in monomials(p, 2 * m as u32 - 1) {
            let diff = (reduced.moment(&beta) - full.moment(&beta)).abs();
            assert!(diff <= 1e-10, "M={m} p={p} {beta:?}: {diff:e}");
        }
    }
}

proptest! {
    #[test]
    fn polynomial_exactness(m in 2usize..=8) {
        let rule = hermite_rule(m).unwrap();
        let weight_sum: f64 = rule.weights().iter().sum();
        prop_assert!((weight_sum - 1.0).abs() <= 1e-12);
        prop_assert!(rule.weights().iter().all(|&w| w > 0.0));
        for d in 0..2 * m as u32 {
            let exact = double_factorial_moment(d);
            prop_assert_eq!(gaussian_moment(&[d]), exact);
            let got: f64 = rule.iter().map(|(x, w)| w * x[0].powi(d as i32)).sum();
            prop_assert!((got - exact).abs() <= 1e-10 * exact.max(1.0), "M={} d={}: {} vs {}", m, d, got, exact);
        }
    }

    #[test]
    fn rules_are_mean_zero_unit_covariance(m in 2usize..=6, p in 1usize..=3) {
        let rule = tensor_rule(&hermite_rule(m).unwrap(), p).unwrap();
        for i in 0..p {
            let mean: f64 = rule.iter().map(|(x, w)| w * x[i]).sum();
            prop_assert!(mean.abs() <= 1e-12);
            for j in 0..p {
                let cov: f64 = rule.iter().map(|(x, w)| w * x[i] * x[j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((cov - target).abs() <= 1e-12);
            }
        }
    }
}
