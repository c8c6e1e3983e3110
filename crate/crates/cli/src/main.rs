//! `slhjb`: command-line front end for the semi-Lagrangian HJB solver.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use slhjb::analytics::{bs_call, run_convergence_study};
use slhjb::config::{load_config, StudyConfig};
use slhjb::io::{emit_report_csv, emit_surface_csv, load_surface, model_hash, save_surface, write_report_csv};
use slhjb::montecarlo::{mc_value, Policy, SimConfig};
use slhjb::quadrature::{tchakaloff_bound, MAX_ORDER};
use slhjb::solver::{backward_solve_with, Retention, SolveOptions};
use slhjb::{
    caratheodory_reduce, hermite_rule, tensor_rule, Error, Extrapolation, Grid, Interpolation, Payoff,
    QuadratureRule, Stepper, TimeMesh, CONFIG_SCHEMA_VERSION,
};

const THREADS_ENV: &str = "SLHJB_THREADS";

#[derive(Parser)]
#[command(name = "slhjb", about = "Semi-Lagrangian solver for finite-horizon HJB equations")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a Gauss-Hermite rule as CSV with a moment check on stderr.
    Quad(QuadArgs),
    /// Solve a model on one grid and write V(0, .) with its policy.
    Solve(SolveArgs),
    /// Monte Carlo estimate of the value of a policy.
    Mc(McArgs),
    /// Run a refinement study and write the error table.
    Converge(ConvergeArgs),
}

#[derive(Args)]
struct QuadArgs {
    /// Points per dimension.
    #[arg(long)]
    order: usize,
    /// Noise dimension.
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Reduce the tensor rule to a positive rule with fewer nodes.
    #[arg(long)]
    reduce: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Model configuration file.
    #[arg(long)]
    model: PathBuf,
    /// Time steps.
    #[arg(long = "N")]
    steps: usize,
    /// Grid intervals.
    #[arg(long = "J")]
    intervals: usize,
    #[arg(long)]
    gh_order: Option<usize>,
    #[arg(long)]
    stepper: Option<Stepper>,
    #[arg(long)]
    interp: Option<Interpolation>,
    #[arg(long)]
    extrapolation: Option<Extrapolation>,
    /// Log-price bounds `lo,hi`.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    domain: Option<(f64, f64)>,
    /// CSV of (x, s, V, policy) at t = 0.
    #[arg(long)]
    out: PathBuf,
    /// Also save the surface for later use as a feedback policy.
    #[arg(long)]
    surface: Option<PathBuf>,
    /// Keep and save every time slice (needed for `mc --policy`).
    #[arg(long)]
    all_slices: bool,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Surface file whose policy drives the paths.
    #[arg(long, conflicts_with = "control")]
    policy: Option<PathBuf>,
    /// Constant control, e.g. `const:0.15`.
    #[arg(long, value_parser = parse_const)]
    control: Option<f64>,
    /// Initial price.
    #[arg(long, default_value_t = 100.0, conflicts_with = "x0")]
    s0: f64,
    /// Initial log-price.
    #[arg(long)]
    x0: Option<f64>,
    /// Time steps; defaults to the policy surface's N, else 64.
    #[arg(long = "N")]
    steps: Option<usize>,
    /// Reference value, or `bs` for the Black-Scholes call at the borrowing rate.
    #[arg(long)]
    reference: Option<String>,
    #[arg(long)]
    antithetic: bool,
}

#[derive(Args)]
struct ConvergeArgs {
    /// Study configuration file.
    #[arg(long)]
    study: PathBuf,
    /// Output CSV; defaults to the study's output path, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run only this order instead of the study's list.
    #[arg(long)]
    gh_order: Option<usize>,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    Ok((lo, hi))
}

fn parse_const(s: &str) -> Result<f64, String> {
    let v = s.strip_prefix("const:").ok_or("expected const:<value>")?;
    v.parse().map_err(|e| format!("{v}: {e}"))
}

fn out_writer(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn quad(args: &QuadArgs) -> Result<(), Error> {
    if args.dim == 0 {
        return Err(Error::Dimension("--dim must be at least 1".into()));
    }
    let base = hermite_rule(args.order)?;
    let tensor = tensor_rule(&base, args.dim)?;
    let rule: QuadratureRule = if args.reduce { caratheodory_reduce(&tensor, args.order)? } else { tensor };
    let mut w = out_writer(args.out.as_deref())?;
    let mut header: Vec<String> = (1..=args.dim).map(|j| format!("x_{j}")).collect();
    header.push("weight".into());
    writeln!(w, "{}", header.join(","))?;
    for (x, wt) in rule.iter() {
        let cells: Vec<String> = x.iter().chain(std::iter::once(&wt)).map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    let degree = 2 * args.order as u32 - 1;
    eprintln!("nodes: {}", rule.len());
    eprintln!("tchakaloff bound: {}", tchakaloff_bound(args.order, args.dim));
    eprintln!("weight sum: {:e}", rule.weights().iter().sum::<f64>());
    eprintln!("max moment error (degree <= {degree}): {:e}", rule.gaussian_mismatch(degree));
    eprintln!("moment error at degree {}: {:e}", degree + 1, rule.gaussian_mismatch(degree + 1));
    Ok(())
}

fn solve(args: &SolveArgs) -> Result<(), Error> {
    let cfg = load_config(&args.model)?;
    let problem = cfg.model.build()?;
    let gh_order = args.gh_order.unwrap_or(cfg.scheme.gh_orders[0]);
    let (lo, hi) = args.domain.unwrap_or(cfg.scheme.domain);
    let grid = Grid::uniform(lo, hi, args.intervals, args.extrapolation.unwrap_or(cfg.scheme.extrapolation))?;
    let mesh = TimeMesh::new(args.steps, cfg.model.maturity)?;
    let rule = hermite_rule(gh_order)?;
    let retention = if args.all_slices { Retention::All } else { Retention::Initial };
    let surface = backward_solve_with(
        &problem,
        &grid,
        &mesh,
        &rule,
        args.interp.unwrap_or(cfg.scheme.interpolation),
        args.stepper.unwrap_or(cfg.scheme.stepper),
        SolveOptions { retention },
    )?;
    emit_surface_csv(&surface, &args.out)?;
    if let Some(path) = &args.surface {
        save_surface(&surface, &problem, args.all_slices, path)?;
    }
    Ok(())
}

fn reference_value(spec: &str, cfg: &StudyConfig, s0: f64) -> Result<f64, Error> {
    if spec == "bs" {
        return match cfg.model.payoff {
            Payoff::Call { strike } => Ok(bs_call(s0, strike, cfg.model.r_b, cfg.model.sigma, cfg.model.maturity)),
            _ => Err(Error::Configuration("--reference bs needs a call payoff".into())),
        };
    }
    spec.parse().map_err(|_| Error::Configuration(format!("--reference: '{spec}' is neither a number nor 'bs'")))
}

fn mc(args: &McArgs) -> Result<(), Error> {
    let cfg = load_config(&args.model)?;
    let problem = cfg.model.build()?;
    let x0 = args.x0.unwrap_or_else(|| args.s0.ln());
    let loaded;
    let policy = match (&args.policy, args.control) {
        (Some(path), _) => {
            let (header, surface) = load_surface(path)?;
            if header.model_hash != model_hash(&problem) {
                return Err(Error::Configuration(format!(
                    "surface was solved for '{}', not for the given model",
                    header.model
                )));
            }
            loaded = surface;
            Policy::Feedback(&loaded)
        }
        (None, Some(q)) => Policy::Constant(vec![q]),
        (None, None) => return Err(Error::Configuration("give --policy <surface> or --control const:q".into())),
    };
    let steps = match (&policy, args.steps) {
        (_, Some(n)) => n,
        (Policy::Feedback(s), None) => s.mesh.steps(),
        _ => 64,
    };
    let sim = SimConfig::new(args.paths, args.seed, steps).antithetic(args.antithetic);
    let est = mc_value(&problem, &policy, &[x0], &sim)?;
    let mut out = std::io::stdout().lock();
    match &args.reference {
        None => {
            writeln!(out, "estimate,std_error,samples")?;
            writeln!(out, "{:e},{:e},{}", est.mean, est.std_error, est.samples)?;
        }
        Some(spec) => {
            let r = reference_value(spec, &cfg, x0.exp())?;
            let diff = est.mean - r;
            writeln!(out, "estimate,std_error,samples,reference,difference,difference_se")?;
            writeln!(
                out,
                "{:e},{:e},{},{:e},{:e},{:.3}",
                est.mean,
                est.std_error,
                est.samples,
                r,
                diff,
                diff / est.std_error
            )?;
        }
    }
    Ok(())
}

/// `table.csv` becomes `table_M4.csv` when a study runs several orders.
fn per_order_path(path: &Path, m: usize) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_M{m}.{}", ext.to_string_lossy()),
        None => format!("{stem}_M{m}"),
    };
    path.with_file_name(name)
}

fn converge(args: &ConvergeArgs) -> Result<(), Error> {
    let cfg = load_config(&args.study)?;
    let orders = match args.gh_order {
        Some(m) if !(2..=MAX_ORDER).contains(&m) => return Err(Error::InvalidOrder(m)),
        Some(m) => vec![m],
        None => cfg.scheme.gh_orders.clone(),
    };
    let out = args.out.clone().or_else(|| cfg.output.as_ref().map(PathBuf::from));
    for &m in &orders {
        let report = run_convergence_study(&cfg, m)?;
        for (k, reason) in &report.meta.skipped {
            eprintln!("M={m}: level k={k} skipped: {reason}");
        }
        for row in &report.rows {
            if let Some(note) = &row.note {
                eprintln!("M={m}: level k={}: {note}", row.k);
            }
        }
        match &out {
            Some(path) if orders.len() > 1 => emit_report_csv(&report, &per_order_path(path, m))?,
            Some(path) => emit_report_csv(&report, path)?,
            None => {
                if orders.len() > 1 {
                    println!("# M={m}");
                }
                write_report_csv(&report, std::io::stdout().lock())?;
            }
        }
    }
    Ok(())
}

fn error_line(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() -> ExitCode {
    let version = format!("{} (config schema {CONFIG_SCHEMA_VERSION})", env!("CARGO_PKG_VERSION"));
    let matches = match Cli::command().version(version).try_get_matches() {
        Ok(m) => m,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            let msg = e.to_string();
            eprintln!("{}", error_line("usage", msg.lines().next().unwrap_or("invalid arguments")));
            eprint!("{msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", error_line("usage", &e.to_string()));
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("{}", error_line("configuration", &e.to_string()));
            return ExitCode::FAILURE;
        }
    }
    let result = match &cli.command {
        Command::Quad(a) => quad(a),
        Command::Solve(a) => solve(a),
        Command::Mc(a) => mc(a),
        Command::Converge(a) => converge(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(e.kind(), &e.to_string()));
            ExitCode::FAILURE
        }
    }
}
