//! Study and model configuration files.
//!
//! Configurations are TOML documents with up to four tables:
//!
//! ```toml
//! [model]
//! name = "bergman"
//! r_l = 0.1
//! r_b = 0.15
//! sigma = 0.4
//! maturity = 1.0
//! payoff = { kind = "call", strike = 100.0 }
//!
//! [scheme]               # every key optional
//! gh-order = [2, 4]      # one order or a list
//! interp = "linear"      # linear | pchip
//! stepper = "euler"      # euler | weak2
//! extrapolation = "payoff_asymptotic"   # clamp | linear | payoff_asymptotic
//! domain = [0.0, 7.09]   # log-price bounds
//! n-rule = "2^4*2^k"
//! j-rule = "N^2/4"
//! k-range = [1, 6]
//! min-intervals = 8
//!
//! [measurement]
//! intervals = [[70.0, 90.0]]
//! reference = "exact"    # exact | self-difference
//!
//! [output]
//! path = "call.csv"
//! ```
//!
//! Every validation failure reports the offending field and its line.

use std::ops::Range;

use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::interpolation::{Extrapolation, Interpolation};
use crate::problem::{bergman_problem, BergmanProblem, Payoff};
use crate::quadrature::MAX_ORDER;
use crate::solver::Stepper;

/// Integer-valued refinement rule in the variables `k` and `N`, e.g. `2^4*2^k`
/// or `N^2/4`. Supports `+ - * / ^`, parentheses and numeric literals.
#[derive(Clone, Debug, PartialEq)]
pub struct Formula {
    source: String,
    expr: Expr,
}

#[derive(Clone, Debug, PartialEq)]
enum Expr {
    Num(f64),
    K,
    N,
    Neg(Box<Expr>),
    Bin(char, Box<Expr>, Box<Expr>),
}

impl Formula {
    pub fn parse(source: &str) -> std::result::Result<Self, String> {
        let tokens = tokenize(source)?;
        let mut parser = Parser { tokens, pos: 0 };
        let expr = parser.sum()?;
        if parser.pos != parser.tokens.len() {
            return Err(format!("unexpected '{}' in '{source}'", parser.tokens[parser.pos]));
        }
        Ok(Self { source: source.trim().to_string(), expr })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn uses_n(&self) -> bool {
        fn walk(e: &Expr) -> bool {
            match e {
                Expr::N => true,
                Expr::Num(_) | Expr::K => false,
                Expr::Neg(a) => walk(a),
                Expr::Bin(_, a, b) => walk(a) || walk(b),
            }
        }
        walk(&self.expr)
    }

    pub fn eval(&self, k: f64, n: f64) -> f64 {
        fn go(e: &Expr, k: f64, n: f64) -> f64 {
            match e {
                Expr::Num(v) => *v,
                Expr::K => k,
                Expr::N => n,
                Expr::Neg(a) => -go(a, k, n),
                Expr::Bin(op, a, b) => {
                    let (x, y) = (go(a, k, n), go(b, k, n));
                    match op {
                        '+' => x + y,
                        '-' => x - y,
                        '*' => x * y,
                        '/' => x / y,
                        _ => x.powf(y),
                    }
                }
            }
        }
        go(&self.expr, k, n)
    }

    /// Evaluates to a positive integer, or explains why not.
    pub fn eval_count(&self, k: u32, n: usize) -> std::result::Result<usize, String> {
        let v = self.eval(f64::from(k), n as f64);
        let r = v.round();
        if !v.is_finite() || (v - r).abs() > 1e-9 * r.abs().max(1.0) {
            return Err(format!("'{}' gives non-integer {v} at k={k}", self.source));
        }
        if r < 1.0 {
            return Err(format!("'{}' gives {r} < 1 at k={k}", self.source));
        }
        Ok(r as usize)
    }
}

fn tokenize(s: &str) -> std::result::Result<Vec<String>, String> {
    let mut out = Vec::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            out.push(chars[start..i].iter().collect());
        } else if "+-*/^()kN".contains(c) {
            out.push(c.to_string());
            i += 1;
        } else {
            return Err(format!("unexpected character '{c}' in '{s}'"));
        }
    }
    if out.is_empty() {
        return Err("empty formula".into());
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<String>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&str> {
        self.tokens.get(self.pos).map(String::as_str)
    }

    fn sum(&mut self) -> std::result::Result<Expr, String> {
        let mut lhs = self.product()?;
        while let Some(op @ ("+" | "-")) = self.peek() {
            let op = op.chars().next().unwrap_or('+');
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.product()?));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> std::result::Result<Expr, String> {
        let mut lhs = self.unary()?;
        while let Some(op @ ("*" | "/")) = self.peek() {
            let op = op.chars().next().unwrap_or('*');
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> std::result::Result<Expr, String> {
        if self.peek() == Some("-") {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    // Right-associative.
    fn power(&mut self) -> std::result::Result<Expr, String> {
        let base = self.atom()?;
        if self.peek() == Some("^") {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Bin('^', Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> std::result::Result<Expr, String> {
        let tok = self.peek().ok_or("formula ends unexpectedly")?.to_string();
        self.pos += 1;
        match tok.as_str() {
            "k" => Ok(Expr::K),
            "N" => Ok(Expr::N),
            "(" => {
                let e = self.sum()?;
                if self.peek() != Some(")") {
                    return Err("missing ')'".into());
                }
                self.pos += 1;
                Ok(e)
            }
            t => t.parse::<f64>().map(Expr::Num).map_err(|_| format!("unexpected '{t}'")),
        }
    }
}

/// How errors are measured in a convergence study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferenceKind {
    /// Closed-form price (linear problems only).
    Exact,
    /// Difference with the next coarser level.
    SelfDifference,
}

impl std::fmt::Display for ReferenceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Exact => "exact",
            Self::SelfDifference => "self-difference",
        })
    }
}

/// The unequal-rates model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub name: String,
    pub r_l: f64,
    pub r_b: f64,
    pub sigma: f64,
    pub maturity: f64,
    pub payoff: Payoff,
}

impl ModelConfig {
    pub fn build(&self) -> Result<BergmanProblem> {
        bergman_problem(self.r_l, self.r_b, self.sigma, self.payoff, self.maturity)
    }

    /// Default log-price domain: `[ln(K/100), ln(12 K)]` for a call,
    /// `[ln(0.3 K1), ln(2 K2)]` for a butterfly.
    pub fn default_domain(&self) -> (f64, f64) {
        match self.payoff {
            Payoff::Call { strike } => ((strike / 100.0).ln(), (12.0 * strike).ln()),
            Payoff::Butterfly { lower, upper } => ((0.3 * lower).ln(), (2.0 * upper).ln()),
        }
    }

    /// Default extrapolation: the analytic asymptote for a call, constant
    /// continuation for a butterfly.
    pub fn default_extrapolation(&self) -> Extrapolation {
        match self.payoff {
            Payoff::Call { .. } => Extrapolation::PayoffAsymptotic,
            Payoff::Butterfly { .. } => Extrapolation::Clamp,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeConfig {
    pub gh_orders: Vec<usize>,
    pub interpolation: Interpolation,
    pub stepper: Stepper,
    pub extrapolation: Extrapolation,
    pub domain: (f64, f64),
    pub n_rule: Formula,
    pub j_rule: Formula,
    pub k_range: (u32, u32),
    /// Levels whose `J` falls below this are skipped.
    pub min_intervals: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementConfig {
    /// Price intervals `[lo, hi]`.
    pub intervals: Vec<(f64, f64)>,
    pub reference: ReferenceKind,
}

/// A validated study configuration with defaults filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub model: ModelConfig,
    pub scheme: SchemeConfig,
    pub measurement: MeasurementConfig,
    pub output: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema: Option<Spanned<u32>>,
    model: Spanned<RawModel>,
    #[serde(default)]
    scheme: RawScheme,
    #[serde(default)]
    measurement: RawMeasurement,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: Spanned<String>,
    r_l: Spanned<f64>,
    r_b: Spanned<f64>,
    sigma: Spanned<f64>,
    maturity: Spanned<f64>,
    payoff: Spanned<Payoff>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(i64),
    Many(Vec<i64>),
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct RawScheme {
    gh_order: Option<Spanned<OneOrMany>>,
    interp: Option<Spanned<String>>,
    stepper: Option<Spanned<String>>,
    extrapolation: Option<Spanned<String>>,
    domain: Option<Spanned<Vec<f64>>>,
    n_rule: Option<Spanned<String>>,
    j_rule: Option<Spanned<String>>,
    k_range: Option<Spanned<Vec<i64>>>,
    min_intervals: Option<Spanned<i64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawMeasurement {
    intervals: Option<Spanned<Vec<Vec<f64>>>>,
    reference: Option<Spanned<String>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    path: Option<String>,
}

fn line_of(text: &str, span: Range<usize>) -> usize {
    text[..span.start.min(text.len())].matches('\n').count() + 1
}

struct Diag<'t> {
    text: &'t str,
}

impl Diag<'_> {
    fn err<T>(&self, span: Range<usize>, field: &str, message: impl Into<String>) -> Result<T> {
        Err(Error::Config { line: line_of(self.text, span), field: field.to_string(), message: message.into() })
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<StudyConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config {
        line: e.span().map_or(0, |s| line_of(text, s)),
        field: "document".into(),
        message: e.message().to_string(),
    })?;
    let d = Diag { text };

    if let Some(schema) = &raw.schema {
        if *schema.get_ref() != crate::CONFIG_SCHEMA_VERSION {
            return d.err(schema.span(), "schema", format!("unsupported schema version {}", schema.get_ref()));
        }
    }

    let model_span = raw.model.span();
    let m = raw.model.into_inner();
    if m.name.get_ref() != "bergman" {
        return d.err(m.name.span(), "model.name", format!("unknown model '{}' (expected \"bergman\")", m.name.get_ref()));
    }
    let model = ModelConfig {
        name: m.name.get_ref().clone(),
        r_l: *m.r_l.get_ref(),
        r_b: *m.r_b.get_ref(),
        sigma: *m.sigma.get_ref(),
        maturity: *m.maturity.get_ref(),
        payoff: *m.payoff.get_ref(),
    };
    if let Err(e) = model.build() {
        let span = match &e {
            Error::InvalidModel(msg) if msg.contains("rates") => m.r_l.span(),
            Error::InvalidModel(msg) if msg.contains("volatility") => m.sigma.span(),
            Error::InvalidModel(msg) if msg.contains("maturity") => m.maturity.span(),
            Error::InvalidModel(msg) if msg.contains("strike") => m.payoff.span(),
            _ => model_span,
        };
        return d.err(span, "model", e.to_string());
    }

    let s = raw.scheme;
    let gh_orders = match s.gh_order {
        None => vec![2],
        Some(spanned) => {
            let span = spanned.span();
            let list = match spanned.into_inner() {
                OneOrMany::One(v) => vec![v],
                OneOrMany::Many(v) => v,
            };
            if list.is_empty() {
                return d.err(span, "scheme.gh-order", "at least one order is required");
            }
            let mut out = Vec::with_capacity(list.len());
            for v in list {
                if !(2..=MAX_ORDER as i64).contains(&v) {
                    return d.err(span.clone(), "scheme.gh-order", format!("order {v} outside 2..={MAX_ORDER}"));
                }
                out.push(v as usize);
            }
            out
        }
    };
    let interpolation = match &s.interp {
        None => Interpolation::Linear,
        Some(v) => match v.get_ref().parse::<Interpolation>() {
            Ok(i) => i,
            Err(e) => return d.err(v.span(), "scheme.interp", e.to_string()),
        },
    };
    let stepper = match &s.stepper {
        None => Stepper::Euler,
        Some(v) => match v.get_ref().parse::<Stepper>() {
            Ok(i) => i,
            Err(e) => return d.err(v.span(), "scheme.stepper", e.to_string()),
        },
    };
    let extrapolation = match &s.extrapolation {
        None => model.default_extrapolation(),
        Some(v) => match v.get_ref().parse::<Extrapolation>() {
            Ok(i) => i,
            Err(e) => return d.err(v.span(), "scheme.extrapolation", e.to_string()),
        },
    };
    let domain = match &s.domain {
        None => model.default_domain(),
        Some(v) => match v.get_ref().as_slice() {
            &[lo, hi] if lo < hi && lo.is_finite() && hi.is_finite() => (lo, hi),
            _ => return d.err(v.span(), "scheme.domain", "expected [lo, hi] with lo < hi"),
        },
    };
    let formula = |v: &Option<Spanned<String>>, default: &str, field: &str| -> Result<Formula> {
        match v {
            None => Ok(Formula::parse(default).expect("default formulas parse")),
            Some(v) => Formula::parse(v.get_ref()).or_else(|e| d.err(v.span(), field, e)),
        }
    };
    let n_rule = formula(&s.n_rule, "2^4*2^k", "scheme.n-rule")?;
    let j_rule = formula(&s.j_rule, "N^2/4", "scheme.j-rule")?;
    if n_rule.uses_n() {
        let span = s.n_rule.as_ref().map_or(0..0, |v| v.span());
        return d.err(span, "scheme.n-rule", "the N rule may only depend on k");
    }
    let k_range = match &s.k_range {
        None => (1, 4),
        Some(v) => match v.get_ref().as_slice() {
            &[a, b] if 0 <= a && a <= b && b <= 30 => (a as u32, b as u32),
            _ => return d.err(v.span(), "scheme.k-range", "expected [k_min, k_max] with 0 <= k_min <= k_max <= 30"),
        },
    };
    let min_intervals = match &s.min_intervals {
        None => 8,
        Some(v) if *v.get_ref() >= 1 => *v.get_ref() as usize,
        Some(v) => return d.err(v.span(), "scheme.min-intervals", "must be >= 1"),
    };

    let meas = raw.measurement;
    let intervals = match &meas.intervals {
        None => {
            let k = model.payoff.reference_strike();
            vec![(0.7 * k, 0.9 * k)]
        }
        Some(v) => {
            if v.get_ref().is_empty() {
                return d.err(v.span(), "measurement.intervals", "at least one interval is required");
            }
            let mut out = Vec::new();
            for iv in v.get_ref() {
                match iv.as_slice() {
                    &[lo, hi] if 0.0 < lo && lo < hi && hi.is_finite() => out.push((lo, hi)),
                    _ => {
                        return d.err(
                            v.span(),
                            "measurement.intervals",
                            format!("interval {iv:?} must be [lo, hi] with 0 < lo < hi"),
                        )
                    }
                }
            }
            out
        }
    };
    let reference = match &meas.reference {
        None => match model.payoff {
            Payoff::Call { .. } => ReferenceKind::Exact,
            Payoff::Butterfly { .. } => ReferenceKind::SelfDifference,
        },
        Some(v) => match v.get_ref().as_str() {
            "exact" => ReferenceKind::Exact,
            "self-difference" | "self_difference" => ReferenceKind::SelfDifference,
            other => {
                return d.err(v.span(), "measurement.reference", format!("unknown reference '{other}'"));
            }
        },
    };
    if reference == ReferenceKind::Exact && !matches!(model.payoff, Payoff::Call { .. }) {
        let span = meas.reference.as_ref().map_or(model_span.clone(), |v| v.span());
        return d.err(span, "measurement.reference", "an exact reference exists only for the call payoff");
    }

    Ok(StudyConfig {
        model,
        scheme: SchemeConfig {
            gh_orders,
            interpolation,
            stepper,
            extrapolation,
            domain,
            n_rule,
            j_rule,
            k_range,
            min_intervals,
        },
        measurement: MeasurementConfig { intervals, reference },
        output: raw.output.path,
    })
}

/// Reads and parses a configuration file.
pub fn load_config(path: &std::path::Path) -> Result<StudyConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MODEL: &str = r#"
[model]
name = "bergman"
r_l = 0.1
r_b = 0.15
sigma = 0.4
maturity = 1.0
payoff = { kind = "call", strike = 100.0 }
"#;

    #[test]
    fn formulas() {
        let n = Formula::parse("2^4*2^k").unwrap();
        assert_eq!(n.eval_count(1, 0).unwrap(), 32);
        assert_eq!(n.eval_count(6, 0).unwrap(), 1024);
        let j = Formula::parse("N^2/4").unwrap();
        assert_eq!(j.eval_count(1, 32).unwrap(), 256);
        let j = Formula::parse("N/16").unwrap();
        assert_eq!(j.eval_count(1, 16).unwrap(), 1);
        assert!(j.eval_count(0, 8).is_err());
        assert_eq!(Formula::parse("2^3^2").unwrap().eval(0.0, 0.0), 512.0);
        assert_eq!(Formula::parse("-(k - 3) * 2").unwrap().eval(1.0, 0.0), 4.0);
        assert!(Formula::parse("2^").is_err());
        assert!(Formula::parse("N % 2").is_err());
        assert!(Formula::parse("(N").is_err());
        assert!(Formula::parse("").is_err());
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = parse_config(&format!("{MODEL}\n[scheme]\n")).unwrap();
        assert_eq!(cfg.scheme.gh_orders, vec![2]);
        assert_eq!(cfg.scheme.interpolation, Interpolation::Linear);
        assert_eq!(cfg.scheme.stepper, Stepper::Euler);
        assert_eq!(cfg.scheme.extrapolation, Extrapolation::PayoffAsymptotic);
        assert_eq!(cfg.measurement.reference, ReferenceKind::Exact);
        let (lo, hi) = cfg.scheme.domain;
        assert!(lo.abs() < 1e-15);
        assert!((hi - 1200f64.ln()).abs() < 1e-12);

        let text = MODEL.replace(
            "{ kind = \"call\", strike = 100.0 }",
            "{ kind = \"butterfly\", lower = 100.0, upper = 300.0 }",
        );
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.scheme.extrapolation, Extrapolation::Clamp);
        assert_eq!(cfg.measurement.reference, ReferenceKind::SelfDifference);
        let (lo, hi) = cfg.scheme.domain;
        assert!((lo - 30f64.ln()).abs() < 1e-12 && (hi - 600f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn order_range_is_checked_with_line() {
        let text = format!("{MODEL}\n[scheme]\ngh-order = 1\n");
        match parse_config(&text) {
            Err(Error::Config { line, field, .. }) => {
                assert_eq!(field, "scheme.gh-order");
                assert_eq!(line, 11);
            }
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MODEL}\n[scheme]\nbogus = 3\n");
        match parse_config(&text) {
            Err(Error::Config { line, message, .. }) => {
                assert_eq!(line, 11);
                assert!(message.contains("bogus"), "{message}");
            }
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_formula_is_rejected() {
        let text = format!("{MODEL}\n[scheme]\nj-rule = \"N^^2\"\n");
        assert!(matches!(parse_config(&text), Err(Error::Config { field, .. }) if field == "scheme.j-rule"));
        let text = format!("{MODEL}\n[scheme]\nn-rule = \"N*2\"\n");
        assert!(matches!(parse_config(&text), Err(Error::Config { field, .. }) if field == "scheme.n-rule"));
    }

    #[test]
    fn bad_model_values() {
        let text = MODEL.replace("r_l = 0.1", "r_l = 0.3");
        assert!(matches!(parse_config(&text), Err(Error::Config { line: 4, .. })));
        let text = MODEL.replace("\"bergman\"", "\"heston\"");
        assert!(matches!(parse_config(&text), Err(Error::Config { field, .. }) if field == "model.name"));
    }

    #[test]
    fn exact_reference_needs_call() {
        let text = MODEL.replace(
            "{ kind = \"call\", strike = 100.0 }",
            "{ kind = \"butterfly\", lower = 100.0, upper = 300.0 }",
        ) + "\n[measurement]\nreference = \"exact\"\n";
        assert!(matches!(parse_config(&text), Err(Error::Config { field, .. }) if field == "measurement.reference"));
    }

    #[test]
    fn intervals_validated() {
        let text = format!("{MODEL}\n[measurement]\nintervals = [[90.0, 70.0]]\n");
        assert!(matches!(parse_config(&text), Err(Error::Config { field, .. }) if field == "measurement.intervals"));
        let text = format!("{MODEL}\n[measurement]\nintervals = []\n");
        assert!(parse_config(&text).is_err());
    }
}
