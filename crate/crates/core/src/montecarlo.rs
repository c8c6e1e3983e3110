//! Euler-Maruyama simulation under piecewise-constant controls.
//!
//! Serves as an oracle independent of the backward scheme: a fixed policy
//! simulated forward gives an unbiased estimate of its own value, which can
//! only sit below the optimal value.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::problem::{ControlProblem, TimeMesh};
use crate::solver::ValueSurface;

/// Simulation settings. Identical settings give bit-identical results.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    /// Number of independent Brownian paths. With `antithetic`, each path is
    /// also run with its increments negated and the pair is averaged.
    pub n_paths: usize,
    pub seed: u64,
    /// Time steps over the problem horizon.
    pub steps: usize,
    pub antithetic: bool,
}

impl SimConfig {
    pub fn new(n_paths: usize, seed: u64, steps: usize) -> Self {
        Self { n_paths, seed, steps, antithetic: false }
    }

    pub fn antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::Configuration("n_paths must be >= 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::Configuration("simulation needs at least one step".into()));
        }
        Ok(())
    }
}

/// Control applied along a path.
#[derive(Clone, Debug)]
pub enum Policy<'a> {
    /// The same control value at every step.
    Constant(Vec<f64>),
    /// One control value per step `a_0 .. a_{N-1}`.
    Sequence(Vec<Vec<f64>>),
    /// Feedback from a solved surface: nearest grid node in space, the slice
    /// containing `t_i` in time.
    Feedback(&'a ValueSurface),
}

/// Terminal state of one path with its accumulated discount and running cost.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSample {
    pub terminal: Vec<f64>,
    /// `exp(-sum_i rho_i h)`.
    pub discount: f64,
    /// `sum_i h g_i` discounted to time zero.
    pub running: f64,
}

impl PathSample {
    /// Discounted payoff plus running cost.
    pub fn value(&self, problem: &dyn ControlProblem) -> f64 {
        self.discount * problem.terminal(&self.terminal) + self.running
    }
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Number of independent samples behind the estimate (pairs, if antithetic).
    pub samples: usize,
}

/// Standard normal from a uniform draw by inverting the CDF.
#[inline]
pub fn normal_from_uniform(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

#[inline]
fn next_normal(rng: &mut ChaCha8Rng) -> f64 {
    // 53 random bits, centred in their cell so u is never 0 or 1.
    let u = ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
    normal_from_uniform(u)
}

fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Simulator<'a> {
    problem: &'a dyn ControlProblem,
    policy: &'a Policy<'a>,
    mesh: TimeMesh,
    x0: &'a [f64],
}

impl<'a> Simulator<'a> {
    fn new(problem: &'a dyn ControlProblem, policy: &'a Policy<'a>, x0: &'a [f64], config: &SimConfig) -> Result<Self> {
        config.validate()?;
        if x0.len() != problem.dim() {
            return Err(Error::Dimension(format!("x0 has {} components for a d={} model", x0.len(), problem.dim())));
        }
        let mesh = TimeMesh::new(config.steps, problem.horizon())?;
        match policy {
            Policy::Sequence(seq) if seq.len() != config.steps => {
                return Err(Error::Configuration(format!(
                    "control sequence has {} entries for {} steps",
                    seq.len(),
                    config.steps
                )));
            }
            Policy::Feedback(surface) => {
                if !surface.has_all_slices() {
                    return Err(Error::Configuration("feedback policy needs a surface with every slice".into()));
                }
                if surface.grid.dim() != problem.dim() {
                    return Err(Error::Dimension("surface grid and model dimensions differ".into()));
                }
                if (surface.mesh.horizon() - problem.horizon()).abs() > 1e-12 * problem.horizon() {
                    return Err(Error::Configuration("surface horizon differs from the model's".into()));
                }
            }
            _ => {}
        }
        Ok(Self { problem, policy, mesh, x0 })
    }

    fn control(&self, step: usize, t: f64, x: &[f64]) -> &'a [f64] {
        match self.policy {
            Policy::Constant(a) => a,
            Policy::Sequence(seq) => &seq[step],
            Policy::Feedback(surface) => {
                let h = surface.mesh.step_size();
                let n = ((t / h + 1e-9).floor() as usize).min(surface.mesh.steps() - 1);
                let policy = surface.policy(n).expect("checked in Simulator::new");
                let idx = policy[surface.grid.nearest(x)] as usize;
                &self.problem.controls()[idx]
            }
        }
    }

    /// Runs one path from `normals` (`steps * p` standard normals) scaled by `sign`.
    fn run(&self, normals: &[f64], sign: f64) -> PathSample {
        let (d, p) = (self.problem.dim(), self.problem.noise_dim());
        let h = self.mesh.step_size();
        let sqrt_h = h.sqrt();
        let mut x = self.x0.to_vec();
        let mut mu = vec![0.0; d];
        let mut sigma = vec![0.0; d * p];
        let mut discount = 1.0;
        let mut running = 0.0;
        for step in 0..self.mesh.steps() {
            let t = self.mesh.time(step);
            let a = self.control(step, t, &x);
            self.problem.drift(t, &x, a, &mut mu);
            self.problem.diffusion(t, &x, a, &mut sigma);
            let rho = self.problem.discount(t, &x, a);
            let g = self.problem.running_cost(t, &x, a);
            discount *= (-rho * h).exp();
            running += discount * h * g;
            let z = &normals[step * p..(step + 1) * p];
            for j in 0..d {
                let noise: f64 = sigma[j * p..(j + 1) * p].iter().zip(z).map(|(s, z)| s * z).sum();
                x[j] += mu[j] * h + sign * sqrt_h * noise;
            }
        }
        PathSample { terminal: x, discount, running }
    }

    fn draw(&self, seed: u64, path: usize) -> Vec<f64> {
        let mut rng = path_rng(seed, path as u64);
        (0..self.mesh.steps() * self.problem.noise_dim()).map(|_| next_normal(&mut rng)).collect()
    }
}

/// Simulates terminal states. With `antithetic`, the output holds each path
/// followed by its mirror.
pub fn simulate_em(
    problem: &dyn ControlProblem,
    policy: &Policy<'_>,
    x0: &[f64],
    config: &SimConfig,
) -> Result<Vec<PathSample>> {
    let sim = Simulator::new(problem, policy, x0, config)?;
    let samples: Vec<Vec<PathSample>> = (0..config.n_paths)
        .into_par_iter()
        .map(|path| {
            let normals = sim.draw(config.seed, path);
            let mut out = vec![sim.run(&normals, 1.0)];
            if config.antithetic {
                out.push(sim.run(&normals, -1.0));
            }
            out
        })
        .collect();
    Ok(samples.into_iter().flatten().collect())
}

/// Monte Carlo value of a fixed policy: mean of discounted payoff plus running
/// cost, with its standard error.
pub fn mc_value(problem: &dyn ControlProblem, policy: &Policy<'_>, x0: &[f64], config: &SimConfig) -> Result<McEstimate> {
    let sim = Simulator::new(problem, policy, x0, config)?;
    let values: Vec<f64> = (0..config.n_paths)
        .into_par_iter()
        .map(|path| {
            let normals = sim.draw(config.seed, path);
            let v = sim.run(&normals, 1.0).value(problem);
            if config.antithetic {
                0.5 * (v + sim.run(&normals, -1.0).value(problem))
            } else {
                v
            }
        })
        .collect();
    Ok(estimate(&values))
}

fn estimate(values: &[f64]) -> McEstimate {
    let n = values.len();
    let mean = pairwise_sum(values) / n as f64;
    let squares: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let variance = if n > 1 { pairwise_sum(&squares) / (n - 1) as f64 } else { 0.0 };
    McEstimate { mean, std_error: (variance / n as f64).sqrt(), samples: n }
}

/// Deterministic pairwise summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Strong error `E|X_T - X~_T|` per step size, and the fitted rate.
#[derive(Clone, Debug, PartialEq)]
pub struct StrongRate {
    /// Least-squares slope of `log error` against `log h`.
    pub rate: f64,
    /// `(h, error)` per level.
    pub levels: Vec<(f64, f64)>,
}

/// Empirical strong order of Euler-Maruyama on geometric Brownian motion
/// `dS = mu S dt + sigma S dB`, compared pathwise with the exact solution
/// driven by the same increments.
pub fn strong_rate_estimate(
    mu: f64,
    sigma: f64,
    x0: f64,
    horizon: f64,
    h_list: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<StrongRate> {
    if h_list.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 step sizes, got {}", h_list.len())));
    }
    if n_paths == 0 {
        return Err(Error::Configuration("n_paths must be >= 1".into()));
    }
    let mut levels = Vec::with_capacity(h_list.len());
    for (level, &h) in h_list.iter().enumerate() {
        let steps = (horizon / h).round();
        if !(h > 0.0) || steps < 1.0 || (steps * h - horizon).abs() > 1e-9 * horizon {
            return Err(Error::Configuration(format!("step {h} does not divide the horizon {horizon}")));
        }
        let steps = steps as usize;
        let sqrt_h = h.sqrt();
        let errors: Vec<f64> = (0..n_paths)
            .into_par_iter()
            .map(|path| {
                let mut rng = path_rng(seed, ((level as u64) << 48) | path as u64);
                let mut euler = x0;
                let mut w = 0.0;
                for _ in 0..steps {
                    let db = sqrt_h * next_normal(&mut rng);
                    euler += mu * euler * h + sigma * euler * db;
                    w += db;
                }
                let exact = x0 * ((mu - 0.5 * sigma * sigma) * horizon + sigma * w).exp();
                (exact - euler).abs()
            })
            .collect();
        levels.push((h, pairwise_sum(&errors) / n_paths as f64));
    }
    let points: Vec<(f64, f64)> = levels.iter().map(|&(h, e)| (h.ln(), e.ln())).collect();
    Ok(StrongRate { rate: least_squares_slope(&points), levels })
}

pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
