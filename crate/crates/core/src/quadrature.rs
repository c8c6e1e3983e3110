//! Gauss-Hermite rules for the standard Gaussian measure.
//!
//! A rule of order `M` has `M` nodes `xi_i = sqrt(2) z_i`, where `z_i` are the
//! zeros of the physicists' Hermite polynomial `H_M`, and weights
//! `lambda_i = omega_i / sqrt(pi)`. It integrates every polynomial of degree
//! `<= 2M - 1` exactly against `N(0, 1)`. Rules for `p`-dimensional noise are
//! tensor products; [`caratheodory_reduce`] prunes a tensor rule to a subset
//! of its nodes while keeping the weights nonnegative and the moments intact.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest supported one-dimensional order.
pub const MAX_ORDER: usize = 64;

/// Default cap on the node count of a tensor rule.
pub const DEFAULT_TENSOR_CAP: usize = 1_000_000;

/// Nodes and nonnegative weights approximating the standard Gaussian on `R^dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    dim: usize,
    /// Row-major, `len() == weights.len() * dim`.
    nodes: Vec<f64>,
    weights: Vec<f64>,
    gh_order: usize,
}

impl QuadratureRule {
    /// Builds a rule from raw parts. Nodes are row-major (`dim` components per node).
    pub fn from_parts(dim: usize, nodes: Vec<f64>, weights: Vec<f64>, gh_order: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("quadrature dimension must be positive".into()));
        }
        if nodes.len() != weights.len() * dim {
            return Err(Error::Dimension(format!(
                "{} node components for {} weights in dimension {dim}",
                nodes.len(),
                weights.len()
            )));
        }
        Ok(Self { dim, nodes, weights, gh_order })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Polynomial-exactness parameter: moments up to degree `2M - 1` are exact.
    pub fn gh_order(&self) -> usize {
        self.gh_order
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.nodes.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Iterates over `(node, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.nodes().zip(self.weights.iter().copied())
    }

    /// `sum_i lambda_i prod_j xi_ij^beta_j`.
    pub fn moment(&self, beta: &[u32]) -> f64 {
        debug_assert_eq!(beta.len(), self.dim);
        self.iter().map(|(x, w)| w * monomial(x, beta)).sum()
    }

    /// Largest absolute moment error against the Gaussian over all monomials of
    /// total degree `<= degree`.
    pub fn gaussian_mismatch(&self, degree: u32) -> f64 {
        monomials(self.dim, degree)
            .iter()
            .map(|beta| (self.moment(beta) - gaussian_moment(beta)).abs())
            .fold(0.0, f64::max)
    }
}

/// The `M`-point Gauss-Hermite rule normalized to `N(0, 1)`, nodes ascending.
pub fn hermite_rule(order: usize) -> Result<QuadratureRule> {
    if !(2..=MAX_ORDER).contains(&order) {
        return Err(Error::InvalidOrder(order));
    }
    let (zeros, omegas) = hermite_zeros(order);
    let scale = 2f64.sqrt();
    let nodes = zeros.iter().map(|z| scale * z).collect();
    let weights = omegas.iter().map(|w| w / PI.sqrt()).collect();
    QuadratureRule::from_parts(1, nodes, weights, order)
}

/// Zeros of `H_M` (ascending) with the weights of the `e^{-z^2}` rule.
///
/// Newton iteration on the orthonormal three-term recurrence. The weight
/// `omega_i = 2^{M-1} M! sqrt(pi) / (M^2 H_{M-1}(z_i)^2)` reduces to
/// `1 / (M h_{M-1}(z_i)^2)` for the orthonormal `h_n`, which never overflows.
fn hermite_zeros(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order as f64;
    let pim4 = PI.powf(-0.25);
    let half = order.div_ceil(2);
    // Positive half, largest root first.
    let mut roots = vec![0.0; half];
    let mut omegas = vec![0.0; half];

    for i in 0..half {
        let mut z = match i {
            0 => (2.0 * n + 1.0).sqrt() - 1.85575 * (2.0 * n + 1.0).powf(-1.0 / 6.0),
            1 => roots[0] - 1.14 * n.powf(0.426) / roots[0],
            2 => 1.86 * roots[1] - 0.86 * roots[0],
            3 => 1.91 * roots[2] - 0.91 * roots[1],
            _ => 2.0 * roots[i - 1] - roots[i - 2],
        };
        for _ in 0..200 {
            let (value, prev) = orthonormal_hermite(order, z, pim4);
            let step = value / ((2.0 * n).sqrt() * prev);
            z -= step;
            if value.abs() <= 1e-15 || step.abs() <= 1e-16 * z.abs().max(1.0) {
                break;
            }
        }
        if order % 2 == 1 && i == half - 1 {
            z = 0.0;
        }
        let deriv = (2.0 * n).sqrt() * orthonormal_hermite(order, z, pim4).1;
        roots[i] = z;
        omegas[i] = 2.0 / (deriv * deriv);
    }

    let odd = order % 2 == 1;
    let positive = if odd { half - 1 } else { half };
    let mut zeros = Vec::with_capacity(order);
    let mut weights = Vec::with_capacity(order);
    for i in 0..positive {
        zeros.push(-roots[i]);
        weights.push(omegas[i]);
    }
    if odd {
        zeros.push(0.0);
        weights.push(omegas[half - 1]);
    }
    for i in (0..positive).rev() {
        zeros.push(roots[i]);
        weights.push(omegas[i]);
    }
    (zeros, weights)
}

/// Returns `(h_M(z), h_{M-1}(z))` for the orthonormal Hermite functions' polynomial part.
fn orthonormal_hermite(order: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 1..=order {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, p2)
}

/// Tensor product of a one-dimensional rule, capped at [`DEFAULT_TENSOR_CAP`] nodes.
pub fn tensor_rule(base: &QuadratureRule, p: usize) -> Result<QuadratureRule> {
    tensor_rule_with_cap(base, p, DEFAULT_TENSOR_CAP)
}

pub fn tensor_rule_with_cap(base: &QuadratureRule, p: usize, cap: usize) -> Result<QuadratureRule> {
    if base.dim() != 1 {
        return Err(Error::Dimension(format!("tensor base must have dim 1, got {}", base.dim())));
    }
    if p == 0 {
        return Err(Error::Dimension("tensor dimension p must be >= 1".into()));
    }
    let m = base.len();
    let count = (m as u128).checked_pow(p as u32).unwrap_or(u128::MAX);
    if count > cap as u128 {
        return Err(Error::Capacity { nodes: count, cap });
    }
    let count = count as usize;
    let mut nodes = Vec::with_capacity(count * p);
    let mut weights = Vec::with_capacity(count);
    let mut index = vec![0usize; p];
    for _ in 0..count {
        let mut w = 1.0;
        for &i in &index {
            nodes.push(base.node(i)[0]);
            w *= base.weights[i];
        }
        weights.push(w);
        // Last axis varies fastest.
        for axis in (0..p).rev() {
            index[axis] += 1;
            if index[axis] < m {
                break;
            }
            index[axis] = 0;
        }
    }
    QuadratureRule::from_parts(p, nodes, weights, base.gh_order())
}

/// Standard-Gaussian moment `prod_j (beta_j - 1)!!`, zero if any exponent is odd.
pub fn gaussian_moment(beta: &[u32]) -> f64 {
    beta.iter()
        .map(|&k| {
            if k % 2 == 1 {
                0.0
            } else {
                (1..k).step_by(2).map(f64::from).product()
            }
        })
        .product()
}

/// `Q(x) = sum_i lambda_i f(xi_i)`.
pub fn integrate<F>(rule: &QuadratureRule, mut f: F) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    rule.iter().map(|(x, w)| w * f(x)).sum()
}

fn monomial(x: &[f64], beta: &[u32]) -> f64 {
    x.iter().zip(beta).map(|(xi, &b)| xi.powi(b as i32)).product()
}

/// Exponent vectors of all monomials in `dim` variables with total degree
/// `<= max_degree`, in graded lexicographic order.
pub fn monomials(dim: usize, max_degree: u32) -> Vec<Vec<u32>> {
    fn fill(prefix: &mut Vec<u32>, remaining_vars: usize, degree: u32, out: &mut Vec<Vec<u32>>) {
        if remaining_vars == 1 {
            prefix.push(degree);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=degree).rev() {
            prefix.push(e);
            fill(prefix, remaining_vars - 1, degree - e, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for degree in 0..=max_degree {
        fill(&mut Vec::with_capacity(dim), dim, degree, &mut out);
    }
    out
}

/// `binom(2M - 1 + p, p)`, the number of monomials of degree `<= 2M - 1` in `p` variables.
pub fn tchakaloff_bound(order: usize, p: usize) -> usize {
    let n = 2 * order - 1 + p;
    let k = p.min(n - p);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128) as usize
}

/// Reduces `rule` to a subset of its nodes with nonnegative weights and at most
/// `tchakaloff_bound(order, dim)` of them, preserving every moment of degree
/// `<= 2 * order - 1`.
///
/// Rules invariant under coordinate sign flips (every tensor Gauss-Hermite
/// rule) are reduced orbit by orbit: odd moments then vanish identically and
/// only the even moments constrain the weights. Anything else goes through the
/// plain node-by-node elimination.
pub fn caratheodory_reduce(rule: &QuadratureRule, order: usize) -> Result<QuadratureRule> {
    if order < 2 {
        return Err(Error::InvalidOrder(order));
    }
    let degree = (2 * order - 1) as u32;
    let basis = monomials(rule.dim(), degree);
    let reference: Vec<f64> = basis.iter().map(|b| rule.moment(b)).collect();

    let mut reduced = match sign_orbits(rule) {
        Some(orbits) => reduce_orbits(rule, &orbits, degree)?,
        None => reduce_nodes(rule, &basis)?,
    };
    if reduced.len() > tchakaloff_bound(order, rule.dim()) {
        reduced = reduce_nodes(&reduced, &basis)?;
    }
    reduced.gh_order = rule.gh_order;

    for (beta, want) in basis.iter().zip(&reference) {
        let got = reduced.moment(beta);
        if (got - want).abs() > 1e-10 * want.abs().max(1.0) {
            return Err(Error::ReductionFailed {
                reason: format!("moment {beta:?} drifted from {want} to {got}"),
                partial: Box::new(reduced),
            });
        }
    }
    Ok(reduced)
}

/// Groups nodes by `(|x_1|, ..., |x_p|)`. Returns `None` unless every group is
/// a complete sign-flip orbit carrying equal weights.
fn sign_orbits(rule: &QuadratureRule) -> Option<Vec<Vec<usize>>> {
    let mut groups: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut orbits: Vec<Vec<usize>> = Vec::new();
    for (i, x) in rule.nodes().enumerate() {
        let key: Vec<u64> = x.iter().map(|v| v.abs().to_bits()).collect();
        let slot = *groups.entry(key).or_insert_with(|| {
            orbits.push(Vec::new());
            orbits.len() - 1
        });
        orbits[slot].push(i);
    }
    for orbit in &orbits {
        let nonzero = rule.node(orbit[0]).iter().filter(|v| **v != 0.0).count();
        if orbit.len() != 1 << nonzero {
            return None;
        }
        let w0 = rule.weights[orbit[0]];
        if orbit.iter().any(|&i| (rule.weights[i] - w0).abs() > 1e-14 * w0.abs().max(1e-300)) {
            return None;
        }
    }
    Some(orbits)
}

fn reduce_orbits(rule: &QuadratureRule, orbits: &[Vec<usize>], degree: u32) -> Result<QuadratureRule> {
    let even: Vec<Vec<u32>> = monomials(rule.dim(), degree)
        .into_iter()
        .filter(|b| b.iter().all(|e| e % 2 == 0))
        .collect();
    let columns: Vec<Vec<f64>> = orbits
        .iter()
        .map(|o| even.iter().map(|b| monomial(rule.node(o[0]), b)).collect())
        .collect();
    let totals: Vec<f64> = orbits.iter().map(|o| o.iter().map(|&i| rule.weights[i]).sum()).collect();
    let sizes: Vec<usize> = orbits.iter().map(Vec::len).collect();

    let kept = eliminate(&columns, totals, &sizes);
    let assemble = |kept: &[(usize, f64)]| {
        let mut members: Vec<(usize, f64)> = kept
            .iter()
            .flat_map(|&(o, w)| orbits[o].iter().map(move |&i| (i, w / orbits[o].len() as f64)))
            .collect();
        members.sort_unstable_by_key(|m| m.0);
        subset(rule, &members)
    };
    match kept {
        Ok(kept) => Ok(assemble(&kept)),
        Err((reason, kept)) => Err(Error::ReductionFailed { reason, partial: Box::new(assemble(&kept)) }),
    }
}

fn reduce_nodes(rule: &QuadratureRule, basis: &[Vec<u32>]) -> Result<QuadratureRule> {
    let columns: Vec<Vec<f64>> = rule.nodes().map(|x| basis.iter().map(|b| monomial(x, b)).collect()).collect();
    let sizes = vec![1; rule.len()];
    match eliminate(&columns, rule.weights.clone(), &sizes) {
        Ok(kept) => Ok(subset(rule, &kept)),
        Err((reason, kept)) => Err(Error::ReductionFailed { reason, partial: Box::new(subset(rule, &kept)) }),
    }
}

fn subset(rule: &QuadratureRule, members: &[(usize, f64)]) -> QuadratureRule {
    let mut nodes = Vec::with_capacity(members.len() * rule.dim());
    let mut weights = Vec::with_capacity(members.len());
    for &(i, w) in members {
        nodes.extend_from_slice(rule.node(i));
        weights.push(w);
    }
    QuadratureRule { dim: rule.dim(), nodes, weights, gh_order: rule.gh_order }
}

type Kept = Vec<(usize, f64)>;

/// Carathéodory elimination. `columns[j]` holds the constraint values of
/// column `j`; `sizes[j]` is the number of nodes the column stands for.
///
/// While the active columns are linearly dependent, a null-space direction
/// is followed until a weight reaches zero. Among the candidate directions
/// the one removing the most nodes wins; ties go to the first candidate.
fn eliminate(columns: &[Vec<f64>], mut weights: Vec<f64>, sizes: &[usize]) -> Result<Kept, (String, Kept)> {
    let rows = columns.first().map_or(0, Vec::len);
    let mut row_scale = vec![0.0f64; rows];
    for col in columns {
        for (s, v) in row_scale.iter_mut().zip(col) {
            *s = s.max(v.abs());
        }
    }
    let mut active: Vec<usize> = (0..columns.len()).filter(|&j| weights[j] > 0.0).collect();
    let snapshot = |active: &[usize], weights: &[f64]| active.iter().map(|&j| (j, weights[j])).collect::<Kept>();

    loop {
        let k = active.len();
        // Row-reduce the scaled constraint matrix restricted to active columns.
        let mut a: Vec<Vec<f64>> = (0..rows)
            .filter(|&r| row_scale[r] > 0.0)
            .map(|r| active.iter().map(|&j| columns[j][r] / row_scale[r]).collect())
            .collect();
        let pivots = row_reduce(&mut a, 1e-10);
        let free: Vec<usize> = (0..k).filter(|c| !pivots.contains(c)).collect();
        if free.is_empty() {
            return Ok(snapshot(&active, &weights));
        }

        let mut best: Option<(usize, f64, Vec<f64>)> = None;
        for &f in &free {
            let mut null = vec![0.0; k];
            null[f] = 1.0;
            for (row, &pc) in pivots.iter().enumerate() {
                null[pc] = -a[row][f];
            }
            for sign in [1.0, -1.0] {
                let mut step = f64::INFINITY;
                for c in 0..k {
                    let v = sign * null[c];
                    if v > 0.0 {
                        step = step.min(weights[active[c]] / v);
                    }
                }
                if !step.is_finite() {
                    continue;
                }
                let removed: usize = (0..k)
                    .filter(|&c| {
                        let v = sign * null[c];
                        v > 0.0 && weights[active[c]] - step * v <= 1e-15 * weights[active[c]].max(f64::MIN_POSITIVE)
                    })
                    .map(|c| sizes[active[c]])
                    .sum();
                if best.as_ref().is_none_or(|b| removed > b.0) {
                    best = Some((removed, step, null.iter().map(|v| sign * v).collect()));
                }
            }
        }

        let Some((_, step, direction)) = best else {
            return Err(("null-space direction with no positive component".into(), snapshot(&active, &weights)));
        };
        let mut next = Vec::with_capacity(k);
        for (c, &j) in active.iter().enumerate() {
            let w = weights[j] - step * direction[c];
            if direction[c] > 0.0 && w <= 1e-15 * weights[j] {
                weights[j] = 0.0;
                continue;
            }
            if w < -1e-12 {
                return Err((format!("weight of column {j} went negative ({w:e})"), snapshot(&active, &weights)));
            }
            if w <= 0.0 {
                weights[j] = 0.0;
                continue;
            }
            weights[j] = w;
            next.push(j);
        }
        if next.len() >= k {
            return Err(("elimination step removed no column".into(), snapshot(&active, &weights)));
        }
        active = next;
    }
}

/// In-place reduced row echelon form with partial pivoting; returns the pivot
/// column of each leading row.
fn row_reduce(a: &mut [Vec<f64>], tol: f64) -> Vec<usize> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (best, mag) = (r..rows)
            .map(|i| (i, a[i][c].abs()))
            .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if mag <= tol {
            for row in a.iter_mut().skip(r) {
                row[c] = 0.0;
            }
            continue;
        }
        a.swap(r, best);
        let inv = 1.0 / a[r][c];
        for v in a[r].iter_mut() {
            *v *= inv;
        }
        let pivot_row = a[r].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i != r && row[c] != 0.0 {
                let factor = row[c];
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= factor * p;
                }
                row[c] = 0.0;
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn table_values_low_orders() {
        let r2 = hermite_rule(2).unwrap();
        assert_abs_diff_eq!(r2.node(0)[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r2.node(1)[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r2.weights()[0], 0.5, epsilon = 1e-14);

        let r3 = hermite_rule(3).unwrap();
        let s3 = 3f64.sqrt();
        let expect = [(-s3, 1.0 / 6.0), (0.0, 2.0 / 3.0), (s3, 1.0 / 6.0)];
        for (i, (x, w)) in expect.iter().enumerate() {
            assert_abs_diff_eq!(r3.node(i)[0], *x, epsilon = 1e-13);
            assert_abs_diff_eq!(r3.weights()[i], *w, epsilon = 1e-14);
        }
        assert_eq!(r3.node(1)[0], 0.0);
    }

    #[test]
    fn order_bounds() {
        assert!(matches!(hermite_rule(1), Err(Error::InvalidOrder(1))));
        assert!(matches!(hermite_rule(65), Err(Error::InvalidOrder(65))));
        assert!(hermite_rule(64).is_ok());
    }

    #[test]
    fn large_order_is_well_formed() {
        for m in [9, 16, 33, 64] {
            let rule = hermite_rule(m).unwrap();
            assert_eq!(rule.len(), m);
            let sum: f64 = rule.weights().iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
            assert!(rule.weights().iter().all(|w| *w > 0.0));
            let xs: Vec<f64> = rule.nodes().map(|x| x[0]).collect();
            assert!(xs.windows(2).all(|w| w[0] < w[1]));
            assert_abs_diff_eq!(rule.moment(&[2]), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn moments() {
        assert_eq!(gaussian_moment(&[0]), 1.0);
        assert_eq!(gaussian_moment(&[2]), 1.0);
        assert_eq!(gaussian_moment(&[4, 2]), 3.0);
        assert_eq!(gaussian_moment(&[3, 2]), 0.0);
        assert_eq!(gaussian_moment(&[8]), 105.0);
    }

    #[test]
    fn integrate_examples() {
        let r2 = hermite_rule(2).unwrap();
        assert_abs_diff_eq!(integrate(&r2, |_| 1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(integrate(&r2, |y| y[0] * y[0]), 1.0, epsilon = 1e-15);
        // E[Z^4] = 3 but the 2-point rule sees 1.
        let gap = 3.0 - integrate(&r2, |y| y[0].powi(4));
        assert_abs_diff_eq!(gap, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn graded_lex_order() {
        let m = monomials(2, 2);
        assert_eq!(m, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(monomials(3, 5).len(), tchakaloff_bound(3, 3));
        assert_eq!(tchakaloff_bound(3, 3), 56);
    }

    #[test]
    fn tensor_shapes() {
        let base = hermite_rule(2).unwrap();
        assert_eq!(tensor_rule(&base, 1).unwrap(), base);
        let t = tensor_rule(&base, 2).unwrap();
        assert_eq!(t.len(), 4);
        for (x, w) in t.iter() {
            assert_abs_diff_eq!(x[0].abs(), 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(x[1].abs(), 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(w, 0.25, epsilon = 1e-15);
        }
        assert_eq!(tensor_rule(&hermite_rule(3).unwrap(), 3).unwrap().len(), 27);
        assert!(matches!(tensor_rule(&base, 0), Err(Error::Dimension(_))));
        assert!(matches!(tensor_rule_with_cap(&base, 10, 1000), Err(Error::Capacity { nodes: 1024, .. })));
        assert!(matches!(tensor_rule(&t, 2), Err(Error::Dimension(_))));
    }

    #[test]
    fn one_dimensional_rule_is_already_minimal() {
        for m in 2..=8 {
            let rule = hermite_rule(m).unwrap();
            let reduced = caratheodory_reduce(&rule, m).unwrap();
            assert_eq!(reduced, rule);
        }
    }

    #[test]
    fn plain_route_on_asymmetric_input() {
        // Shift one weight so the sign-orbit route does not apply; 2-D, order 2.
        let base = hermite_rule(3).unwrap();
        let t = tensor_rule(&base, 2).unwrap();
        let reduced = reduce_nodes(&t, &monomials(2, 3)).unwrap();
        assert!(reduced.len() <= tchakaloff_bound(2, 2));
        assert!(reduced.weights().iter().all(|w| *w > 0.0));
        for beta in monomials(2, 3) {
            assert_abs_diff_eq!(reduced.moment(&beta), t.moment(&beta), epsilon = 1e-12);
        }
    }
}
