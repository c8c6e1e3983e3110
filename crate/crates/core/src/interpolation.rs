//! Interpolation on uniform rectangular grids.
//!
//! Values live on the grid nodes in row-major order (last axis fastest).
//! Two operators are provided: multilinear, which is monotone and keeps the
//! scheme a Markov chain, and the Fritsch-Carlson monotone cubic ("pchip"),
//! applied axis by axis in more than one dimension.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value used outside the grid box in payoff-asymptotic mode.
pub type Asymptote<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

/// How queries outside the grid box are answered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Extrapolation {
    /// Project the query onto the box.
    #[default]
    Clamp,
    /// Extend the boundary cell's multilinear interpolant.
    Linear,
    /// Use an analytic asymptote supplied by the problem.
    PayoffAsymptotic,
}

impl std::str::FromStr for Extrapolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clamp" => Ok(Self::Clamp),
            "linear" => Ok(Self::Linear),
            "payoff_asymptotic" | "asymptotic" => Ok(Self::PayoffAsymptotic),
            other => Err(Error::Configuration(format!("unknown extrapolation mode '{other}'"))),
        }
    }
}

/// Interpolation operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Linear,
    Pchip,
}

impl std::str::FromStr for Interpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "pchip" | "cubic" => Ok(Self::Pchip),
            other => Err(Error::Configuration(format!("unknown interpolation '{other}'"))),
        }
    }
}

impl std::fmt::Display for Interpolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Linear => "linear",
            Self::Pchip => "pchip",
        })
    }
}

/// One axis of a uniform grid: `intervals + 1` nodes from `lower` to `upper`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lower: f64,
    pub upper: f64,
    pub intervals: usize,
}

impl Axis {
    pub fn new(lower: f64, upper: f64, intervals: usize) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || upper <= lower {
            return Err(Error::InvalidGrid(format!("axis bounds [{lower}, {upper}] must be finite and increasing")));
        }
        if intervals == 0 {
            return Err(Error::InvalidGrid("an axis needs at least one interval".into()));
        }
        Ok(Self { lower, upper, intervals })
    }

    pub fn spacing(&self) -> f64 {
        (self.upper - self.lower) / self.intervals as f64
    }

    pub fn node(&self, m: usize) -> f64 {
        self.lower + m as f64 * self.spacing()
    }

    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell index clamped to `0..intervals` and the (unclamped) local coordinate.
    #[inline]
    fn cell(&self, x: f64) -> (usize, f64) {
        let mut r = (x - self.lower) / self.spacing();
        // Snap queries that sit on a node up to rounding.
        let nearest = r.round();
        if (r - nearest).abs() <= 1e-12 * nearest.abs().max(1.0) {
            r = nearest;
        }
        let j = (r.floor().max(0.0) as usize).min(self.intervals - 1);
        (j, r - j as f64)
    }

    #[inline]
    fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }
}

/// Uniform rectangular mesh with an extrapolation policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Axis>,
    extrapolation: Extrapolation,
}

impl Grid {
    pub fn new(axes: Vec<Axis>, extrapolation: Extrapolation) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("grid needs at least one axis".into()));
        }
        for a in &axes {
            Axis::new(a.lower, a.upper, a.intervals)?;
        }
        Ok(Self { axes, extrapolation })
    }

    /// One-dimensional grid with `intervals` cells on `[lower, upper]`.
    pub fn uniform(lower: f64, upper: f64, intervals: usize, extrapolation: Extrapolation) -> Result<Self> {
        Self::new(vec![Axis::new(lower, upper, intervals)?], extrapolation)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, j: usize) -> &Axis {
        &self.axes[j]
    }

    pub fn extrapolation(&self) -> Extrapolation {
        self.extrapolation
    }

    pub fn with_extrapolation(mut self, extrapolation: Extrapolation) -> Self {
        self.extrapolation = extrapolation;
        self
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(Axis::len).product()
    }

    /// Euclidean norm of the spacing vector.
    pub fn spacing_norm(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing().powi(2)).sum::<f64>().sqrt()
    }

    fn stride(&self, axis: usize) -> usize {
        self.axes[axis + 1..].iter().map(Axis::len).product()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.axes).fold(0, |acc, (&m, a)| acc * a.len() + m)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for (j, a) in self.axes.iter().enumerate().rev() {
            out[j] = flat % a.len();
            flat /= a.len();
        }
        out
    }

    /// Coordinates of node `flat` written into `out`.
    pub fn node_into(&self, mut flat: usize, out: &mut [f64]) {
        for (j, a) in self.axes.iter().enumerate().rev() {
            out[j] = a.node(flat % a.len());
            flat /= a.len();
        }
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.node_into(flat, &mut out);
        out
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.axes).all(|(&v, a)| a.contains(v))
    }

    /// Index of the node nearest to `x` (coordinates clamped to the box).
    pub fn nearest(&self, x: &[f64]) -> usize {
        let multi: Vec<usize> = x
            .iter()
            .zip(&self.axes)
            .map(|(&v, a)| {
                let r = ((v - a.lower) / a.spacing()).round();
                r.clamp(0.0, a.intervals as f64) as usize
            })
            .collect();
        self.flat_index(&multi)
    }
}

/// Barycentric weights `q_k(x) >= 0` over at most `2^d` nodes, summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct StencilWeights {
    /// `(flat node index, weight)`, zero weights omitted.
    pub entries: Vec<(usize, f64)>,
}

impl StencilWeights {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }
}

fn check_point(grid: &Grid, x: &[f64]) -> Result<()> {
    if x.len() != grid.dim() {
        return Err(Error::Dimension(format!("point of dim {} on a grid of dim {}", x.len(), grid.dim())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidPoint(format!("non-finite coordinates {x:?}")));
    }
    Ok(())
}

/// Multilinear stencil of `x`. Queries outside the box are projected onto it
/// in clamp mode; in the other modes they are rejected.
pub fn locate(grid: &Grid, x: &[f64]) -> Result<StencilWeights> {
    check_point(grid, x)?;
    if !grid.contains(x) && grid.extrapolation() != Extrapolation::Clamp {
        return Err(Error::InvalidPoint(format!(
            "{x:?} lies outside the grid and {:?} extrapolation is handled by the interpolants",
            grid.extrapolation()
        )));
    }
    let mut per_axis = Vec::with_capacity(grid.dim());
    for (&v, a) in x.iter().zip(grid.axes()) {
        let v = v.clamp(a.lower, a.upper);
        let r = (v - a.lower) / a.spacing();
        let nearest = r.round();
        if (r - nearest).abs() <= 1e-12 * r.abs().max(1.0) {
            per_axis.push([(nearest as usize, 1.0), (0, 0.0)]);
            continue;
        }
        let (j, t) = a.cell(v);
        per_axis.push([(j, 1.0 - t), (j + 1, t)]);
    }
    let mut entries = Vec::with_capacity(1 << grid.dim());
    let mut multi = vec![0; grid.dim()];
    for corner in 0..(1usize << grid.dim()) {
        let mut w = 1.0;
        for (axis, pair) in per_axis.iter().enumerate() {
            let (m, q) = pair[(corner >> axis) & 1];
            w *= q;
            multi[axis] = m;
        }
        if w > 0.0 {
            entries.push((grid.flat_index(&multi), w));
        }
    }
    Ok(StencilWeights { entries })
}

/// Multilinear interpolation `sum_k q_k(x) values[k]`.
pub fn interp_multilinear(
    grid: &Grid,
    values: &[f64],
    x: &[f64],
    asymptote: Option<Asymptote<'_>>,
) -> Result<f64> {
    check_point(grid, x)?;
    SliceInterpolant::new(grid, values, Interpolation::Linear, asymptote)?.eval(x)
}

/// Monotone piecewise-cubic Hermite interpolation (Fritsch-Carlson slopes).
pub fn interp_pchip(
    grid: &Grid,
    values: &[f64],
    x: &[f64],
    asymptote: Option<Asymptote<'_>>,
) -> Result<f64> {
    check_point(grid, x)?;
    SliceInterpolant::new(grid, values, Interpolation::Pchip, asymptote)?.eval(x)
}

/// Fritsch-Carlson node slopes for uniformly spaced data.
pub fn pchip_slopes(values: &[f64], spacing: f64) -> Vec<f64> {
    let n = values.len();
    (0..n).map(|j| slope_at(j, |i| values[i], n - 1, spacing)).collect()
}

/// Slope at node `j` of a line with `intervals` cells; `y` is only queried
/// within `j-1..=j+1`, or `0..=2` / `intervals-2..=intervals` at the ends.
#[inline]
fn slope_at(j: usize, y: impl Fn(usize) -> f64, intervals: usize, h: f64) -> f64 {
    if intervals == 1 {
        return (y(1) - y(0)) / h;
    }
    let end = |d0: f64, d1: f64| {
        let s = 0.5 * (3.0 * d0 - d1);
        if s.signum() != d0.signum() || d0 == 0.0 {
            0.0
        } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    if j == 0 {
        end((y(1) - y(0)) / h, (y(2) - y(1)) / h)
    } else if j == intervals {
        end((y(j) - y(j - 1)) / h, (y(j - 1) - y(j - 2)) / h)
    } else {
        let left = (y(j) - y(j - 1)) / h;
        let right = (y(j + 1) - y(j)) / h;
        if left * right <= 0.0 {
            0.0
        } else {
            2.0 / (1.0 / left + 1.0 / right)
        }
    }
}

#[inline]
fn hermite(t: f64, y0: f64, y1: f64, d0: f64, d1: f64, h: f64) -> f64 {
    let t2 = t * t;
    let s = 1.0 - t;
    let s2 = s * s;
    (1.0 + 2.0 * t) * s2 * y0 + t * s2 * h * d0 + t2 * (3.0 - 2.0 * t) * y1 - t2 * s * h * d1
}

/// A value slice bound to its grid, ready for repeated queries.
///
/// One-dimensional pchip slopes are computed once at construction.
pub struct SliceInterpolant<'a> {
    grid: &'a Grid,
    values: &'a [f64],
    kind: Interpolation,
    slopes: Option<Vec<f64>>,
    asymptote: Option<Asymptote<'a>>,
    line: Option<Line>,
}

/// Cached axis constants for one-dimensional queries.
#[derive(Clone, Copy)]
struct Line {
    lower: f64,
    inv_h: f64,
    h: f64,
    last_cell: usize,
}

impl<'a> SliceInterpolant<'a> {
    pub fn new(
        grid: &'a Grid,
        values: &'a [f64],
        kind: Interpolation,
        asymptote: Option<Asymptote<'a>>,
    ) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Dimension(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if grid.extrapolation() == Extrapolation::PayoffAsymptotic && asymptote.is_none() {
            return Err(Error::Configuration(
                "payoff_asymptotic extrapolation needs a registered asymptote".into(),
            ));
        }
        let slopes = (kind == Interpolation::Pchip && grid.dim() == 1)
            .then(|| pchip_slopes(values, grid.axis(0).spacing()));
        let line = (grid.dim() == 1).then(|| {
            let a = grid.axis(0);
            Line { lower: a.lower, inv_h: 1.0 / a.spacing(), h: a.spacing(), last_cell: a.intervals - 1 }
        });
        Ok(Self { grid, values, kind, slopes, asymptote, line })
    }

    /// Cell and local coordinate of a one-dimensional query inside the box;
    /// `None` for other queries and grids.
    #[inline(always)]
    pub(crate) fn cell_1d(&self, x: f64) -> Option<(usize, f64)> {
        let l = self.line.as_ref()?;
        let r = (x - l.lower) * l.inv_h;
        let tol = 1e-12 * r.max(1.0);
        // Also admits queries a rounding error outside the box, which snap
        // to the end nodes.
        if !(r >= -tol && r <= (l.last_cell + 1) as f64 + tol) {
            return None;
        }
        let r = r.max(0.0);
        // Truncation instead of floor/round, which are library calls on
        // baseline x86-64. Queries within rounding of a node snap to it.
        let mut j = r as i64 as usize;
        let mut t = r - j as f64;
        if t <= tol {
            t = 0.0;
        } else if 1.0 - t <= tol {
            j += 1;
            t = 0.0;
        }
        if j > l.last_cell {
            j = l.last_cell;
            t = 1.0;
        }
        Some((j, t))
    }

    /// Value in one-dimensional cell `j` at local coordinate `t`.
    #[inline(always)]
    pub(crate) fn eval_cell(&self, j: usize, t: f64) -> f64 {
        let (y0, y1) = (self.values[j], self.values[j + 1]);
        // Only the last node is reached with t = 1.
        if t == 1.0 {
            return y1;
        }
        match &self.slopes {
            Some(d) => hermite(t, y0, y1, d[j], d[j + 1], self.line.as_ref().map_or(0.0, |l| l.h)),
            None => y0 + t * (y1 - y0),
        }
    }

    /// Interpolated value at `x`; `x` must have the grid's dimension.
    #[inline(always)]
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if let Some((j, t)) = x.first().and_then(|&v| self.cell_1d(v)) {
            return Ok(self.eval_cell(j, t));
        }
        self.eval_general(x)
    }

    #[inline(never)]
    fn eval_general(&self, x: &[f64]) -> Result<f64> {
        if !self.grid.contains(x) {
            match self.grid.extrapolation() {
                Extrapolation::Clamp => {}
                Extrapolation::Linear => return Ok(self.multilinear(x)),
                Extrapolation::PayoffAsymptotic => {
                    if x.iter().any(|v| v.is_nan()) {
                        return Err(Error::InvalidPoint(format!("non-finite coordinates {x:?}")));
                    }
                    // Presence checked in `new`.
                    return Ok(self.asymptote.map_or(f64::NAN, |f| f(x)));
                }
            }
        }
        if self.grid.dim() == 1 {
            let a = self.grid.axis(0);
            let v = x[0].clamp(a.lower, a.upper);
            if v.is_nan() {
                return Err(Error::InvalidPoint(format!("non-finite coordinates {x:?}")));
            }
            let (j, t) = a.cell(v);
            let (y0, y1) = (self.values[j], self.values[j + 1]);
            if t == 1.0 {
                return Ok(y1);
            }
            return Ok(match &self.slopes {
                Some(d) => hermite(t, y0, y1, d[j], d[j + 1], a.spacing()),
                None => y0 + t * (y1 - y0),
            });
        }
        let clamped: Vec<f64> = x.iter().zip(self.grid.axes()).map(|(&v, a)| v.clamp(a.lower, a.upper)).collect();
        if clamped.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidPoint(format!("non-finite coordinates {x:?}")));
        }
        Ok(match self.kind {
            Interpolation::Linear => self.multilinear(&clamped),
            Interpolation::Pchip => self.pchip_axis(0, 0, &clamped),
        })
    }

    /// Multilinear formula on the (clamped) cell containing `x`; the local
    /// coordinate is left unclamped so that it extends linearly.
    fn multilinear(&self, x: &[f64]) -> f64 {
        let d = self.grid.dim();
        if d == 1 {
            let (j, t) = self.grid.axis(0).cell(x[0]);
            if t == 1.0 {
                return self.values[j + 1];
            }
            return self.values[j] + t * (self.values[j + 1] - self.values[j]);
        }
        let cells: Vec<(usize, f64)> = x.iter().zip(self.grid.axes()).map(|(&v, a)| a.cell(v)).collect();
        let strides: Vec<usize> = (0..d).map(|j| self.grid.stride(j)).collect();
        let mut sum = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0;
            for axis in 0..d {
                let (j, t) = cells[axis];
                let upper = (corner >> axis) & 1;
                w *= if upper == 1 { t } else { 1.0 - t };
                flat += (j + upper) * strides[axis];
            }
            if w != 0.0 {
                sum += w * self.values[flat];
            }
        }
        sum
    }

    /// Tensorized pchip: interpolate along `axis`, each sample being the
    /// interpolant over the remaining axes at a fixed index.
    fn pchip_axis(&self, axis: usize, offset: usize, x: &[f64]) -> f64 {
        let a = self.grid.axis(axis);
        let stride = self.grid.stride(axis);
        let (j, t) = a.cell(x[axis]);
        let lo = j.saturating_sub(1);
        let hi = (j + 2).min(a.intervals);
        let mut ys = [0.0; 4];
        for i in lo..=hi {
            let at = offset + i * stride;
            ys[i - lo] = if axis + 1 == self.grid.dim() {
                self.values[at]
            } else {
                self.pchip_axis(axis + 1, at, x)
            };
        }
        let y = |i: usize| ys[i - lo];
        let h = a.spacing();
        let d0 = slope_at(j, y, a.intervals, h);
        let d1 = slope_at(j + 1, y, a.intervals, h);
        hermite(t, y(j), y(j + 1), d0, d1, h)
    }
}
