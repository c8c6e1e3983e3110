//! The fully discrete semi-Lagrangian scheme.
//!
//! Starting from `V(t_N, .) = psi`, each slice is
//!
//! ```text
//! V(t_n, x_m) = max_a e^{-rho h} ( sum_i lambda_i I[V(t_{n+1}, .)](X_i) + h g(t_n, x_m, a) )
//! ```
//!
//! where `X_i` is one step of the chosen stepper from `x_m` with the Gaussian
//! increment replaced by quadrature node `xi_i`, and `I` is the interpolant.
//! With linear interpolation the coefficients `lambda_i q_k(X_i)` are the
//! transition probabilities of a controlled Markov chain on the grid.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interpolation::{locate, Asymptote, Extrapolation, Grid, Interpolation, SliceInterpolant};
use crate::problem::{ControlProblem, ScalarDerivatives, TimeMesh};
use crate::quadrature::QuadratureRule;

/// Time stepper used to push a grid node forward by one step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Stepper {
    #[default]
    Euler,
    /// Simplified weak order-2 Taylor scheme (scalar, time-homogeneous models).
    Weak2,
}

impl std::str::FromStr for Stepper {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Self::Euler),
            "weak2" => Ok(Self::Weak2),
            other => Err(Error::Configuration(format!("unknown stepper '{other}'"))),
        }
    }
}

impl std::fmt::Display for Stepper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Euler => "euler",
            Self::Weak2 => "weak2",
        })
    }
}

/// Relative step of the centered differences used when a model has no
/// analytic derivatives.
pub const FD_RELATIVE_STEP: f64 = 1e-5;

fn check_stepper(stepper: Stepper, problem: &dyn ControlProblem) -> Result<()> {
    if stepper == Stepper::Weak2 {
        if !problem.time_homogeneous() {
            return Err(Error::UnsupportedStepper("weak2 requires time-independent coefficients".into()));
        }
        if problem.dim() != 1 || problem.noise_dim() != 1 {
            return Err(Error::UnsupportedStepper("weak2 is implemented for scalar models (d = p = 1)".into()));
        }
    }
    Ok(())
}

/// Coefficients and derivatives for the weak2 stepper at `(x, a)`.
fn scalar_derivatives(problem: &dyn ControlProblem, t: f64, x: f64, a: &[f64]) -> ScalarDerivatives {
    if let Some(d) = problem.scalar_derivatives(x, a) {
        return d;
    }
    let eval = |y: f64| {
        let (mut mu, mut sigma) = ([0.0], [0.0]);
        problem.drift(t, &[y], a, &mut mu);
        problem.diffusion(t, &[y], a, &mut sigma);
        (mu[0], sigma[0])
    };
    let delta = FD_RELATIVE_STEP * (1.0 + x.abs());
    let (m0, s0) = eval(x);
    let (mp, sp) = eval(x + delta);
    let (mm, sm) = eval(x - delta);
    ScalarDerivatives {
        mu: m0,
        mu_x: (mp - mm) / (2.0 * delta),
        mu_xx: (mp - 2.0 * m0 + mm) / (delta * delta),
        sigma: s0,
        sigma_x: (sp - sm) / (2.0 * delta),
        sigma_xx: (sp - 2.0 * s0 + sm) / (delta * delta),
    }
}

/// Weak2 increment with `Delta B = sqrt(h) xi`.
#[inline]
fn weak2_step(x: f64, d: &ScalarDerivatives, xi: f64, h: f64) -> f64 {
    let db = h.sqrt() * xi;
    x + d.mu * h
        + d.sigma * db
        + 0.5 * d.sigma * d.sigma_x * (db * db - h)
        + 0.5 * (d.mu * d.mu_x + 0.5 * d.mu_xx * d.sigma * d.sigma) * h * h
        + (0.5 * d.mu_x * d.sigma + 0.5 * d.mu * d.sigma_x + 0.25 * d.sigma_xx * d.sigma * d.sigma) * h * db
}

/// One step of `stepper` from `(t, x)` under control `a` with the Gaussian
/// increment realized at quadrature node `xi`.
pub fn step_point(
    stepper: Stepper,
    problem: &dyn ControlProblem,
    t: f64,
    x: &[f64],
    a: &[f64],
    xi: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::Configuration(format!("step size must be positive, got {h}")));
    }
    let (d, p) = (problem.dim(), problem.noise_dim());
    if x.len() != d || xi.len() != p {
        return Err(Error::Dimension(format!("state {} / node {} for a d={d}, p={p} model", x.len(), xi.len())));
    }
    check_stepper(stepper, problem)?;
    let mut out = vec![0.0; d];
    match stepper {
        Stepper::Euler => {
            let mut mu = vec![0.0; d];
            let mut sigma = vec![0.0; d * p];
            problem.drift(t, x, a, &mut mu);
            problem.diffusion(t, x, a, &mut sigma);
            euler_into(x, &mu, &sigma, xi, h, h.sqrt(), &mut out);
        }
        Stepper::Weak2 => {
            let derivs = scalar_derivatives(problem, t, x[0], a);
            out[0] = weak2_step(x[0], &derivs, xi[0], h);
        }
    }
    Ok(out)
}

#[inline]
fn euler_into(x: &[f64], mu: &[f64], sigma: &[f64], xi: &[f64], h: f64, sqrt_h: f64, out: &mut [f64]) {
    let p = xi.len();
    for j in 0..x.len() {
        let row = &sigma[j * p..(j + 1) * p];
        let noise: f64 = row.iter().zip(xi).map(|(s, z)| s * z).sum();
        out[j] = x[j] + mu[j] * h + sqrt_h * noise;
    }
}

/// Which value slices a solve keeps in memory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Retention {
    /// Every slice and every policy.
    #[default]
    All,
    /// Slice 0 with its policy, and the terminal slice.
    Initial,
}

/// Value function and policy on the grid at every retained time slice.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueSurface {
    pub grid: Grid,
    pub mesh: TimeMesh,
    pub interpolation: Interpolation,
    pub stepper: Stepper,
    pub gh_order: usize,
    slices: Vec<Option<Vec<f64>>>,
    policies: Vec<Option<Vec<u32>>>,
}

impl ValueSurface {
    /// Assembles a surface from stored slices (`N + 1` value slots, `N` policy slots).
    pub fn from_parts(
        grid: Grid,
        mesh: TimeMesh,
        interpolation: Interpolation,
        stepper: Stepper,
        gh_order: usize,
        slices: Vec<Option<Vec<f64>>>,
        policies: Vec<Option<Vec<u32>>>,
    ) -> Result<Self> {
        let n = mesh.steps();
        if slices.len() != n + 1 || policies.len() != n {
            return Err(Error::Dimension(format!(
                "{} slices and {} policies for N = {n}",
                slices.len(),
                policies.len()
            )));
        }
        let nodes = grid.node_count();
        if slices.iter().flatten().any(|s| s.len() != nodes) || policies.iter().flatten().any(|p| p.len() != nodes) {
            return Err(Error::Dimension(format!("slice length differs from the {nodes} grid nodes")));
        }
        Ok(Self { grid, mesh, interpolation, stepper, gh_order, slices, policies })
    }

    pub fn values(&self, n: usize) -> Option<&[f64]> {
        self.slices.get(n)?.as_deref()
    }

    pub fn policy(&self, n: usize) -> Option<&[u32]> {
        self.policies.get(n)?.as_deref()
    }

    /// `V(0, .)`, always retained.
    pub fn initial(&self) -> &[f64] {
        self.values(0).expect("slice 0 is always retained")
    }

    pub fn has_all_slices(&self) -> bool {
        self.slices.iter().all(Option::is_some) && self.policies.iter().all(Option::is_some)
    }

    /// Interpolated `V(t_n, x)` using the surface's own interpolant; off-grid
    /// queries are clamped.
    pub fn eval(&self, n: usize, x: &[f64]) -> Result<f64> {
        let values = self
            .values(n)
            .ok_or_else(|| Error::Configuration(format!("slice {n} was not retained")))?;
        let grid = self.grid.clone().with_extrapolation(Extrapolation::Clamp);
        SliceInterpolant::new(&grid, values, self.interpolation, None)?.eval(x)
    }
}

/// Solver settings beyond the scheme itself.
#[derive(Clone, Copy, Debug, Default)]
pub struct SolveOptions {
    pub retention: Retention,
}

/// Runs the backward recursion, keeping every slice.
pub fn backward_solve(
    problem: &dyn ControlProblem,
    grid: &Grid,
    mesh: &TimeMesh,
    rule: &QuadratureRule,
    interpolation: Interpolation,
    stepper: Stepper,
) -> Result<ValueSurface> {
    backward_solve_with(problem, grid, mesh, rule, interpolation, stepper, SolveOptions::default())
}

const CHUNK: usize = 2048;

pub fn backward_solve_with(
    problem: &dyn ControlProblem,
    grid: &Grid,
    mesh: &TimeMesh,
    rule: &QuadratureRule,
    interpolation: Interpolation,
    stepper: Stepper,
    options: SolveOptions,
) -> Result<ValueSurface> {
    let (d, p) = (problem.dim(), problem.noise_dim());
    if rule.dim() != p {
        return Err(Error::Dimension(format!("rule dim {} but noise dim {p}", rule.dim())));
    }
    if grid.dim() != d {
        return Err(Error::Dimension(format!("grid dim {} but state dim {d}", grid.dim())));
    }
    if problem.controls().is_empty() {
        return Err(Error::InvalidModel("control set must be non-empty".into()));
    }
    if grid.extrapolation() == Extrapolation::PayoffAsymptotic && !problem.has_asymptote() {
        return Err(Error::Configuration("payoff_asymptotic extrapolation needs a model asymptote".into()));
    }
    check_stepper(stepper, problem)?;

    let steps = mesh.steps();
    let h = mesh.step_size();
    let nodes = grid.node_count();

    let mut terminal = vec![0.0; nodes];
    let mut x = vec![0.0; d];
    for (m, v) in terminal.iter_mut().enumerate() {
        grid.node_into(m, &mut x);
        *v = problem.terminal(&x);
        if !v.is_finite() {
            return Err(Error::NumericalBlowup { n: steps, m, control: 0 });
        }
    }

    let mut slices: Vec<Option<Vec<f64>>> = vec![None; steps + 1];
    let mut policies: Vec<Option<Vec<u32>>> = vec![None; steps];
    let mut next = terminal;
    let mut table = None;

    for n in (0..steps).rev() {
        let t = mesh.time(n);
        let t_next = mesh.time(n + 1);
        let asymptote = move |y: &[f64]| problem.asymptote(t_next, y).unwrap_or(f64::NAN);
        let asym: Option<Asymptote<'_>> = problem.has_asymptote().then_some(&asymptote as _);
        let interp = SliceInterpolant::new(grid, &next, interpolation, asym)?;
        if n + 1 == steps {
            table = TransitionTable::build(problem, grid, rule, stepper, h, &interp)?;
        }

        let mut current = vec![0.0; nodes];
        let mut policy = vec![0u32; nodes];
        current
            .par_chunks_mut(CHUNK)
            .zip(policy.par_chunks_mut(CHUNK))
            .enumerate()
            .try_for_each(|(chunk, (values, choices))| {
                let mut kernel = NodeKernel::new(problem, rule, stepper, h);
                for (k, (v, c)) in values.iter_mut().zip(choices.iter_mut()).enumerate() {
                    let m = chunk * CHUNK + k;
                    grid.node_into(m, &mut kernel.x);
                    let (best, arg) = kernel.optimize(&interp, table.as_ref(), t, n, m)?;
                    *v = best;
                    *c = arg;
                }
                Ok::<_, Error>(())
            })?;

        let previous = std::mem::replace(&mut next, current);
        let keep_previous = options.retention == Retention::All || n + 1 == steps;
        if keep_previous {
            slices[n + 1] = Some(previous);
        }
        if options.retention == Retention::All || n == 0 {
            policies[n] = Some(policy);
        }
    }
    slices[0] = Some(next);

    ValueSurface::from_parts(grid.clone(), *mesh, interpolation, stepper, rule.gh_order(), slices, policies)
}

const OUTSIDE: u32 = u32::MAX;

/// Upper bound on the memory spent on a transition table.
const TABLE_BYTES: usize = 1 << 29;

/// Interpolation cells of every one-step destination, built once for scalar
/// models whose dynamics do not depend on time. Entry `(m, control, i)`
/// holds the cell index and local coordinate, or `OUTSIDE` with the raw
/// destination when it leaves the grid box.
struct TransitionTable {
    cells: Vec<u32>,
    coords: Vec<f64>,
    controls: usize,
    points: usize,
}

impl TransitionTable {
    fn build(
        problem: &dyn ControlProblem,
        grid: &Grid,
        rule: &QuadratureRule,
        stepper: Stepper,
        h: f64,
        interp: &SliceInterpolant<'_>,
    ) -> Result<Option<Self>> {
        let controls = problem.controls().len();
        let points = rule.len();
        let entries = grid.node_count() * controls * points;
        if problem.dim() != 1 || problem.noise_dim() != 1 || !problem.time_homogeneous() || entries * 12 > TABLE_BYTES {
            return Ok(None);
        }
        let mut cells = vec![0u32; entries];
        let mut coords = vec![0.0; entries];
        let row = controls * points;
        cells
            .par_chunks_mut(CHUNK * row)
            .zip(coords.par_chunks_mut(CHUNK * row))
            .enumerate()
            .for_each(|(chunk, (cells, coords))| {
                let mut kernel = NodeKernel::new(problem, rule, stepper, h);
                for (k, (cells, coords)) in cells.chunks_mut(row).zip(coords.chunks_mut(row)).enumerate() {
                    grid.node_into(chunk * CHUNK + k, &mut kernel.x);
                    for (ai, a) in problem.controls().iter().enumerate() {
                        kernel.destinations(0.0, a);
                        for (i, &y) in kernel.dests.iter().enumerate() {
                            let at = ai * points + i;
                            (cells[at], coords[at]) = match interp.cell_1d(y) {
                                Some((j, t)) => (j as u32, t),
                                None => (OUTSIDE, y),
                            };
                        }
                    }
                }
            });
        Ok(Some(Self { cells, coords, controls, points }))
    }

    #[inline]
    fn row(&self, m: usize, control: usize) -> (&[u32], &[f64]) {
        let at = (m * self.controls + control) * self.points;
        (&self.cells[at..at + self.points], &self.coords[at..at + self.points])
    }
}

/// Per-thread scratch space for evaluating one node.
struct NodeKernel<'a> {
    problem: &'a dyn ControlProblem,
    rule: &'a QuadratureRule,
    stepper: Stepper,
    h: f64,
    sqrt_h: f64,
    x: Vec<f64>,
    mu: Vec<f64>,
    sigma: Vec<f64>,
    dest: Vec<f64>,
    dests: Vec<f64>,
    /// Last discount rate seen per control and its factor `e^{-rho h}`.
    discount_cache: Vec<(f64, f64)>,
}

impl<'a> NodeKernel<'a> {
    fn new(problem: &'a dyn ControlProblem, rule: &'a QuadratureRule, stepper: Stepper, h: f64) -> Self {
        let (d, p) = (problem.dim(), problem.noise_dim());
        Self {
            problem,
            rule,
            stepper,
            h,
            sqrt_h: h.sqrt(),
            x: vec![0.0; d],
            mu: vec![0.0; d],
            sigma: vec![0.0; d * p],
            dest: vec![0.0; d],
            dests: Vec::with_capacity(d * rule.len()),
            discount_cache: vec![(f64::NAN, f64::NAN); problem.controls().len()],
        }
    }

    #[inline]
    fn discount_factor(&mut self, control: usize, rho: f64) -> f64 {
        let cached = &mut self.discount_cache[control];
        if cached.0 != rho {
            *cached = (rho, (-rho * self.h).exp());
        }
        cached.1
    }

    /// Writes the one-step destinations of `self.x` under `a`, one per
    /// quadrature node, into `self.dests` (row-major, `d` per node).
    #[inline]
    fn destinations(&mut self, t: f64, a: &[f64]) {
        let d = self.x.len();
        self.dests.clear();
        match self.stepper {
            Stepper::Euler => {
                self.problem.drift(t, &self.x, a, &mut self.mu);
                self.problem.diffusion(t, &self.x, a, &mut self.sigma);
                if d == 1 && self.sigma.len() == 1 {
                    let base = self.x[0] + self.mu[0] * self.h;
                    let scale = self.sqrt_h * self.sigma[0];
                    self.dests.extend(self.rule.nodes().map(|xi| base + scale * xi[0]));
                } else {
                    for xi in self.rule.nodes() {
                        euler_into(&self.x, &self.mu, &self.sigma, xi, self.h, self.sqrt_h, &mut self.dest);
                        self.dests.extend_from_slice(&self.dest);
                    }
                }
            }
            Stepper::Weak2 => {
                let derivs = scalar_derivatives(self.problem, t, self.x[0], a);
                self.dests.extend(self.rule.nodes().map(|xi| weak2_step(self.x[0], &derivs, xi[0], self.h)));
            }
        }
    }

    /// Expected next-slice value under control `a` from `self.x`.
    #[inline]
    fn expectation(&mut self, interp: &SliceInterpolant<'_>, t: f64, a: &[f64]) -> Result<f64> {
        self.destinations(t, a);
        let d = self.x.len();
        let mut sum = 0.0;
        for (dest, &w) in self.dests.chunks_exact(d).zip(self.rule.weights()) {
            sum += w * interp.eval(dest)?;
        }
        Ok(sum)
    }

    /// Same as `expectation`, reading precomputed cells for node `m`.
    #[inline]
    fn expectation_cached(&self, interp: &SliceInterpolant<'_>, table: &TransitionTable, m: usize, control: usize) -> Result<f64> {
        let mut sum = 0.0;
        let (cells, coords) = table.row(m, control);
        for ((&j, &c), &w) in cells.iter().zip(coords).zip(self.rule.weights()) {
            let v = if j == OUTSIDE { interp.eval(&[c])? } else { interp.eval_cell(j as usize, c) };
            sum += w * v;
        }
        Ok(sum)
    }

    /// Maximizes over the control set; the first maximizer wins ties.
    #[inline]
    fn optimize(
        &mut self,
        interp: &SliceInterpolant<'_>,
        table: Option<&TransitionTable>,
        t: f64,
        n: usize,
        m: usize,
    ) -> Result<(f64, u32)> {
        let problem = self.problem;
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0u32;
        for (ai, a) in problem.controls().iter().enumerate() {
            let rho = problem.discount(t, &self.x, a);
            let cost = problem.running_cost(t, &self.x, a);
            let factor = self.discount_factor(ai, rho);
            let expected = match table {
                Some(tab) => self.expectation_cached(interp, tab, m, ai)?,
                None => self.expectation(interp, t, a)?,
            };
            let value = factor * (expected + self.h * cost);
            if !value.is_finite() {
                return Err(Error::NumericalBlowup { n, m, control: ai });
            }
            if value > best {
                best = value;
                arg = ai as u32;
            }
        }
        Ok((best, arg))
    }
}

/// Sparse row of the chain's transition matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionRow {
    /// `(flat grid index, probability)`, sorted by index.
    pub entries: Vec<(usize, f64)>,
    /// Mass carried by destinations outside the grid (non-clamp modes only).
    pub escaped: f64,
}

impl TransitionRow {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }
}

/// Transition probabilities `sum_i lambda_i q_k(X_i)` from node `m` at slice
/// `n` under control index `control`.
#[allow(clippy::too_many_arguments)]
pub fn transition_row(
    problem: &dyn ControlProblem,
    grid: &Grid,
    mesh: &TimeMesh,
    rule: &QuadratureRule,
    interpolation: Interpolation,
    stepper: Stepper,
    n: usize,
    m: usize,
    control: usize,
) -> Result<TransitionRow> {
    if interpolation != Interpolation::Linear {
        return Err(Error::UnsupportedInterpolation(
            "transition probabilities need linear interpolation (pchip weights can be negative)".into(),
        ));
    }
    if m >= grid.node_count() {
        return Err(Error::Dimension(format!("node {m} outside a grid of {} nodes", grid.node_count())));
    }
    let a = problem
        .controls()
        .get(control)
        .ok_or_else(|| Error::Configuration(format!("control index {control} out of range")))?;
    let x = grid.node(m);
    let t = mesh.time(n);
    let h = mesh.step_size();
    let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
    let mut escaped = 0.0;
    for (xi, w) in rule.iter() {
        let dest = step_point(stepper, problem, t, &x, a, xi, h)?;
        if grid.extrapolation() != Extrapolation::Clamp && !grid.contains(&dest) {
            escaped += w;
            continue;
        }
        for (k, q) in locate(grid, &dest)?.entries {
            *merged.entry(k).or_insert(0.0) += w * q;
        }
    }
    Ok(TransitionRow { entries: merged.into_iter().collect(), escaped })
}

/// Discrete Lipschitz constant of slice `n`: the largest difference quotient
/// between neighbouring nodes along any axis.
pub fn lipschitz_estimate(surface: &ValueSurface, n: usize) -> Result<f64> {
    let values = surface
        .values(n)
        .ok_or_else(|| Error::Configuration(format!("slice {n} was not retained")))?;
    let grid = &surface.grid;
    let mut stride = 1;
    let mut best: f64 = 0.0;
    for axis in (0..grid.dim()).rev() {
        let a = grid.axis(axis);
        let h = a.spacing();
        for flat in 0..values.len() {
            let coord = (flat / stride) % a.len();
            if coord + 1 < a.len() {
                best = best.max((values[flat + stride] - values[flat]).abs() / h);
            }
        }
        stride *= a.len();
    }
    Ok(best)
}
