//! CSV output and surface persistence.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::ConvergenceReport;
use crate::error::{Error, Result};
use crate::interpolation::{Axis, Extrapolation, Grid, Interpolation};
use crate::problem::{ControlProblem, TimeMesh};
use crate::solver::{Stepper, ValueSurface};

pub const SURFACE_FORMAT: &str = "slhjb-surface";
pub const SURFACE_VERSION: u32 = 1;

fn sci(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |e| format!("{e:.3e}"))
}

fn fixed(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |o| format!("{o:.2}"))
}

/// Writes a convergence report: `k,N,J,error_1,order_1[,...],cpu_s`.
pub fn write_report_csv(report: &ConvergenceReport, mut w: impl Write) -> Result<()> {
    let mut header = vec!["k".to_string(), "N".into(), "J".into()];
    for i in 1..=report.meta.price_intervals.len() {
        header.push(format!("error_{i}"));
        header.push(format!("order_{i}"));
    }
    header.push("cpu_s".into());
    writeln!(w, "{}", header.join(","))?;
    for row in &report.rows {
        let mut cells = vec![row.k.to_string(), row.steps.to_string(), row.intervals.to_string()];
        for (e, o) in row.errors.iter().zip(&row.orders) {
            cells.push(sci(*e));
            cells.push(fixed(*o));
        }
        cells.push(format!("{:.3}", row.seconds));
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Writes `V(0, .)` and its policy, one node per row: `x,s,V,policy` in one
/// dimension, `x_0,..,x_{d-1},V,policy` otherwise.
pub fn write_surface_csv(surface: &ValueSurface, mut w: impl Write) -> Result<()> {
    let d = surface.grid.dim();
    if d == 1 {
        writeln!(w, "x,s,V,policy")?;
    } else {
        let cols: Vec<String> = (0..d).map(|j| format!("x_{j}")).collect();
        writeln!(w, "{},V,policy", cols.join(","))?;
    }
    let values = surface.initial();
    let policy = surface.policy(0);
    for (m, v) in values.iter().enumerate() {
        let x = surface.grid.node(m);
        let a = policy.map_or_else(|| "-".to_string(), |p| p[m].to_string());
        if d == 1 {
            writeln!(w, "{},{},{},{}", x[0], x[0].exp(), v, a)?;
        } else {
            let xs: Vec<String> = x.iter().map(f64::to_string).collect();
            writeln!(w, "{},{},{}", xs.join(","), v, a)?;
        }
    }
    Ok(())
}

pub fn emit_report_csv(report: &ConvergenceReport, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_report_csv(report, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn emit_surface_csv(surface: &ValueSurface, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_surface_csv(surface, &mut f)?;
    f.flush()?;
    Ok(())
}

/// Hex SHA-256 of the model fingerprint.
pub fn model_hash(problem: &dyn ControlProblem) -> String {
    Sha256::digest(problem.fingerprint().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisHeader {
    pub lower: f64,
    pub upper: f64,
    pub intervals: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceHeader {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    pub model_hash: String,
    pub model: String,
    pub grid: Vec<AxisHeader>,
    pub extrapolation: String,
    pub steps: usize,
    pub horizon: f64,
    pub gh_order: usize,
    pub interpolation: String,
    pub stepper: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SliceRecord {
    n: usize,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    policy: Option<Vec<u32>>,
}

/// On-disk surface: a header plus the stored slices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceFile {
    pub header: SurfaceHeader,
    slices: Vec<SliceRecord>,
}

fn extrapolation_name(e: Extrapolation) -> &'static str {
    match e {
        Extrapolation::Clamp => "clamp",
        Extrapolation::Linear => "linear",
        Extrapolation::PayoffAsymptotic => "payoff_asymptotic",
    }
}

impl SurfaceFile {
    /// Captures slice 0 (with its policy), or every retained slice when `all_slices`.
    pub fn from_surface(surface: &ValueSurface, problem: &dyn ControlProblem, all_slices: bool) -> Self {
        let header = SurfaceHeader {
            format: SURFACE_FORMAT.into(),
            version: SURFACE_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            model_hash: model_hash(problem),
            model: problem.fingerprint(),
            grid: surface
                .grid
                .axes()
                .iter()
                .map(|a| AxisHeader { lower: a.lower, upper: a.upper, intervals: a.intervals })
                .collect(),
            extrapolation: extrapolation_name(surface.grid.extrapolation()).into(),
            steps: surface.mesh.steps(),
            horizon: surface.mesh.horizon(),
            gh_order: surface.gh_order,
            interpolation: surface.interpolation.to_string(),
            stepper: surface.stepper.to_string(),
        };
        let last = if all_slices { surface.mesh.steps() } else { 0 };
        let slices = (0..=last)
            .filter_map(|n| {
                surface.values(n).map(|v| SliceRecord {
                    n,
                    values: v.to_vec(),
                    policy: surface.policy(n).map(<[u32]>::to_vec),
                })
            })
            .collect();
        Self { header, slices }
    }

    pub fn to_surface(&self) -> Result<ValueSurface> {
        let h = &self.header;
        if h.format != SURFACE_FORMAT {
            return Err(Error::SurfaceFormat(format!("unknown format '{}'", h.format)));
        }
        if h.version != SURFACE_VERSION {
            return Err(Error::SurfaceFormat(format!("unsupported version {}", h.version)));
        }
        let axes =
            h.grid.iter().map(|a| Axis::new(a.lower, a.upper, a.intervals)).collect::<Result<Vec<_>>>()?;
        let extrapolation: Extrapolation = h.extrapolation.parse()?;
        let grid = Grid::new(axes, extrapolation)?;
        let mesh = TimeMesh::new(h.steps, h.horizon)?;
        let interpolation: Interpolation = h.interpolation.parse()?;
        let stepper: Stepper = h.stepper.parse()?;
        let mut values = vec![None; h.steps + 1];
        let mut policies = vec![None; h.steps];
        for rec in &self.slices {
            if rec.n > h.steps {
                return Err(Error::SurfaceFormat(format!("slice {} beyond N = {}", rec.n, h.steps)));
            }
            values[rec.n] = Some(rec.values.clone());
            if let Some(p) = &rec.policy {
                if rec.n == h.steps {
                    return Err(Error::SurfaceFormat("the terminal slice has no policy".into()));
                }
                policies[rec.n] = Some(p.clone());
            }
        }
        if values[0].is_none() {
            return Err(Error::SurfaceFormat("slice 0 is missing".into()));
        }
        ValueSurface::from_parts(grid, mesh, interpolation, stepper, h.gh_order, values, policies)
    }
}

pub fn save_surface(surface: &ValueSurface, problem: &dyn ControlProblem, all_slices: bool, path: &Path) -> Result<()> {
    let file = SurfaceFile::from_surface(surface, problem, all_slices);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut w, &file).map_err(|e| Error::SurfaceFormat(e.to_string()))?;
    w.flush()?;
    Ok(())
}

pub fn load_surface(path: &Path) -> Result<(SurfaceHeader, ValueSurface)> {
    let text = std::fs::read_to_string(path)?;
    let file: SurfaceFile = serde_json::from_str(&text).map_err(|e| Error::SurfaceFormat(e.to_string()))?;
    let surface = file.to_surface()?;
    Ok((file.header, surface))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{ReportMeta, ReportRow};
    use crate::config::ReferenceKind;
    use crate::problem::{bergman_problem, Payoff};
    use crate::quadrature::hermite_rule;
    use crate::solver::backward_solve;

    fn meta(intervals: usize) -> ReportMeta {
        ReportMeta {
            gh_order: 2,
            interpolation: "linear".into(),
            stepper: "euler".into(),
            model: "m".into(),
            reference: ReferenceKind::Exact,
            price_intervals: vec![(70.0, 90.0); intervals],
            skipped: vec![],
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let mut out = Vec::new();
        write_report_csv(&ConvergenceReport::empty(meta(1)), &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "k,N,J,error_1,order_1,cpu_s\n");
    }

    #[test]
    fn report_rows() {
        let mut report = ConvergenceReport::empty(meta(2));
        for k in 1..=8u32 {
            report.rows.push(ReportRow {
                k,
                steps: 16 << k,
                intervals: 64 << (2 * k),
                errors: vec![Some(0.225 / f64::from(k)), None],
                orders: vec![(k > 1).then_some(0.99), None],
                seconds: 0.5,
                note: None,
            });
        }
        let mut out = Vec::new();
        write_report_csv(&report, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 9);
        assert_eq!(lines[0], "k,N,J,error_1,order_1,error_2,order_2,cpu_s");
        assert_eq!(lines[1], "1,32,256,2.250e-1,-,-,-,0.500");
        assert_eq!(lines[2], "2,64,1024,1.125e-1,0.99,-,-,0.500");
    }

    fn surface() -> (crate::problem::BergmanProblem, ValueSurface) {
        let p = bergman_problem(0.1, 0.15, 0.4, Payoff::Butterfly { lower: 100.0, upper: 300.0 }, 1.0).unwrap();
        let grid = Grid::uniform(0.0, 1200f64.ln(), 64, Extrapolation::PayoffAsymptotic).unwrap();
        let mesh = TimeMesh::new(4, 1.0).unwrap();
        let s = backward_solve(&p, &grid, &mesh, &hermite_rule(3).unwrap(), Interpolation::Pchip, Stepper::Euler)
            .unwrap();
        (p, s)
    }

    #[test]
    fn surface_csv_rows() {
        let (_, s) = surface();
        let mut out = Vec::new();
        write_surface_csv(&s, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("x,s,V,policy\n0,1,"));
        assert_eq!(text.lines().count(), 66);
    }

    #[test]
    fn surface_round_trip_is_bit_exact() {
        let (p, s) = surface();
        let dir = tempfile::tempdir().unwrap();
        for all in [false, true] {
            let path = dir.path().join(format!("s{all}.json"));
            save_surface(&s, &p, all, &path).unwrap();
            let (header, back) = load_surface(&path).unwrap();
            assert_eq!(header.model_hash, model_hash(&p));
            assert_eq!(back.has_all_slices(), all);
            for n in 0..=4 {
                if let Some(v) = back.values(n) {
                    let orig = s.values(n).unwrap();
                    assert!(v.iter().zip(orig).all(|(a, b)| a.to_bits() == b.to_bits()));
                }
            }
            assert_eq!(back.policy(0), s.policy(0));
            assert_eq!(back.grid, s.grid);
        }
    }

    #[test]
    fn corrupt_surface_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{\"header\": 3}").unwrap();
        assert!(matches!(load_surface(&path), Err(Error::SurfaceFormat(_))));
    }
}
