//! Reference prices, interval error norms and the refinement driver.

use std::time::Instant;

use libm::erfc;

use crate::config::{ReferenceKind, StudyConfig};
use crate::error::{Error, Result};
use crate::interpolation::Grid;
use crate::problem::{Payoff, TimeMesh};
use crate::quadrature::hermite_rule;
use crate::solver::{backward_solve_with, Retention, SolveOptions, ValueSurface};

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Black-Scholes call price.
pub fn bs_call(s: f64, strike: f64, r: f64, sigma: f64, maturity: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let discounted = strike * (-r * maturity).exp();
    let vol = sigma * maturity.sqrt();
    if vol == 0.0 {
        return (s - discounted).max(0.0);
    }
    let d1 = ((s / strike).ln() + (r + 0.5 * sigma * sigma) * maturity) / vol;
    let d2 = d1 - vol;
    s * norm_cdf(d1) - discounted * norm_cdf(d2)
}

/// What `V(0, .)` is compared against.
pub enum Reference<'a> {
    /// A function of the price `s`.
    Function(&'a dyn Fn(f64) -> f64),
    /// Another surface, interpolated at the comparison nodes.
    Surface(&'a ValueSurface),
}

/// Largest `|V(0, x_m) - reference|` over grid nodes with `e^{x_m}` in `[lo, hi]`.
pub fn sup_error(surface: &ValueSurface, reference: &Reference<'_>, interval: (f64, f64)) -> Result<f64> {
    let (lo, hi) = interval;
    if surface.grid.dim() != 1 {
        return Err(Error::Dimension(format!("interval errors need a 1-D grid, got {}", surface.grid.dim())));
    }
    if !(lo <= hi) {
        return Err(Error::InvalidInterval { lo, hi, reason: "lower bound above upper bound".into() });
    }
    let values = surface.initial();
    let mut worst: Option<f64> = None;
    for (m, &v) in values.iter().enumerate() {
        let x = surface.grid.axis(0).node(m);
        let s = x.exp();
        if s < lo || s > hi {
            continue;
        }
        let r = match reference {
            Reference::Function(f) => f(s),
            Reference::Surface(other) => other.eval(0, &[x])?,
        };
        let e = (v - r).abs();
        worst = Some(worst.map_or(e, |w| w.max(e)));
    }
    worst.ok_or_else(|| Error::InvalidInterval { lo, hi, reason: "no grid node inside the interval".into() })
}

/// `log2(e[k-1] / e[k])` for consecutive entries; undefined where either is missing.
pub fn order_estimates(errors: &[Option<f64>]) -> Vec<Option<f64>> {
    let mut out = vec![None; errors.len()];
    for k in 1..errors.len() {
        if let (Some(a), Some(b)) = (errors[k - 1], errors[k]) {
            out[k] = Some((a / b).log2());
        }
    }
    out
}

/// One refinement level of a study.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub k: u32,
    pub steps: usize,
    pub intervals: usize,
    /// One entry per measurement interval.
    pub errors: Vec<Option<f64>>,
    pub orders: Vec<Option<f64>>,
    pub seconds: f64,
    /// Set when the level failed or had no comparator.
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportMeta {
    pub gh_order: usize,
    pub interpolation: String,
    pub stepper: String,
    pub model: String,
    pub reference: ReferenceKind,
    pub price_intervals: Vec<(f64, f64)>,
    /// Levels not run, with the reason.
    pub skipped: Vec<(u32, String)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub meta: ReportMeta,
    pub rows: Vec<ReportRow>,
}

impl ConvergenceReport {
    pub fn empty(meta: ReportMeta) -> Self {
        Self { meta, rows: Vec::new() }
    }

    pub fn row(&self, k: u32) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.k == k)
    }
}

struct Level {
    steps: usize,
    intervals: usize,
}

fn level(config: &StudyConfig, k: u32) -> std::result::Result<Level, String> {
    let steps = config.scheme.n_rule.eval_count(k, 0)?;
    let intervals = config.scheme.j_rule.eval_count(k, steps)?;
    if intervals < config.scheme.min_intervals {
        return Err(format!("J = {intervals} below the minimum of {}", config.scheme.min_intervals));
    }
    Ok(Level { steps, intervals })
}

fn solve_level(config: &StudyConfig, gh_order: usize, lv: &Level) -> Result<ValueSurface> {
    let problem = config.model.build()?;
    let (lo, hi) = config.scheme.domain;
    let grid = Grid::uniform(lo, hi, lv.intervals, config.scheme.extrapolation)?;
    let mesh = TimeMesh::new(lv.steps, config.model.maturity)?;
    let rule = hermite_rule(gh_order)?;
    backward_solve_with(
        &problem,
        &grid,
        &mesh,
        &rule,
        config.scheme.interpolation,
        config.scheme.stepper,
        SolveOptions { retention: Retention::Initial },
    )
}

/// Runs every level of the study for one Gauss-Hermite order.
///
/// Levels run sequentially. A level that fails to solve is recorded with a
/// note and the study moves on.
pub fn run_convergence_study(config: &StudyConfig, gh_order: usize) -> Result<ConvergenceReport> {
    hermite_rule(gh_order)?;
    let problem = config.model.build()?;
    let meta = ReportMeta {
        gh_order,
        interpolation: config.scheme.interpolation.to_string(),
        stepper: config.scheme.stepper.to_string(),
        model: format!(
            "bergman r_l={} r_b={} sigma={} T={} payoff={:?}",
            problem.r_l, problem.r_b, problem.sigma, problem.maturity, problem.payoff
        ),
        reference: config.measurement.reference,
        price_intervals: config.measurement.intervals.clone(),
        skipped: Vec::new(),
    };
    let mut report = ConvergenceReport::empty(meta);

    let exact = match (config.measurement.reference, config.model.payoff) {
        (ReferenceKind::Exact, Payoff::Call { strike }) => {
            let (r, sigma, t) = (config.model.r_b, config.model.sigma, config.model.maturity);
            Some(move |s: f64| bs_call(s, strike, r, sigma, t))
        }
        (ReferenceKind::Exact, _) => {
            return Err(Error::Configuration("an exact reference exists only for the call payoff".into()));
        }
        _ => None,
    };

    let (k_min, k_max) = config.scheme.k_range;
    let n_intervals = config.measurement.intervals.len();
    // Surface of level k-1, kept for self-difference errors.
    let mut previous: Option<ValueSurface> = None;

    for k in k_min..=k_max {
        let lv = match level(config, k) {
            Ok(lv) => lv,
            Err(reason) => {
                report.meta.skipped.push((k, reason));
                previous = None;
                continue;
            }
        };
        let start = Instant::now();
        let solved = solve_level(config, gh_order, &lv);
        let seconds = start.elapsed().as_secs_f64();
        let mut row = ReportRow {
            k,
            steps: lv.steps,
            intervals: lv.intervals,
            errors: vec![None; n_intervals],
            orders: vec![None; n_intervals],
            seconds,
            note: None,
        };
        let surface = match solved {
            Ok(s) => s,
            Err(e) => {
                row.note = Some(e.to_string());
                report.rows.push(row);
                previous = None;
                continue;
            }
        };

        let comparator = match &exact {
            Some(_) => None,
            None if previous.is_some() => previous.take(),
            // First level of a self-difference study: solve level k-1 when it is valid.
            None => match k.checked_sub(1).map(|km| level(config, km)) {
                Some(Ok(prev_lv)) => solve_level(config, gh_order, &prev_lv).ok(),
                _ => None,
            },
        };

        let mut notes = Vec::new();
        for (i, &iv) in config.measurement.intervals.iter().enumerate() {
            let err = match (&exact, &comparator) {
                (Some(f), _) => sup_error(&surface, &Reference::Function(f), iv),
                (None, Some(coarse)) => sup_error(coarse, &Reference::Surface(&surface), iv),
                (None, None) => {
                    notes.push("no coarser level to compare against".to_string());
                    continue;
                }
            };
            match err {
                Ok(e) => row.errors[i] = Some(e),
                Err(e) => notes.push(e.to_string()),
            }
        }
        notes.dedup();
        if !notes.is_empty() {
            row.note = Some(notes.join("; "));
        }
        report.rows.push(row);
        previous = Some(surface);
    }

    for i in 0..n_intervals {
        // Orders only between consecutive levels.
        for j in 1..report.rows.len() {
            if report.rows[j].k != report.rows[j - 1].k + 1 {
                continue;
            }
            let pair = [report.rows[j - 1].errors[i], report.rows[j].errors[i]];
            report.rows[j].orders[i] = order_estimates(&pair)[1];
        }
    }
    Ok(report)
}
