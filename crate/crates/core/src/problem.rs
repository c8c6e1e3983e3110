//! Controlled diffusions `dX = mu(t, X, a) dt + sigma(t, X, a) dB` with a
//! finite control set, controlled discounting, running cost and terminal payoff.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients and their first two spatial derivatives for a scalar model,
/// as needed by the weak second-order stepper.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ScalarDerivatives {
    pub mu: f64,
    pub mu_x: f64,
    pub mu_xx: f64,
    pub sigma: f64,
    pub sigma_x: f64,
    pub sigma_xx: f64,
}

/// A finite-horizon control problem.
///
/// Coefficient evaluation must be re-entrant: the solver calls these
/// methods concurrently for different nodes.
pub trait ControlProblem: Sync {
    /// State dimension `d`.
    fn dim(&self) -> usize;

    /// Noise dimension `p`.
    fn noise_dim(&self) -> usize;

    fn horizon(&self) -> f64;

    /// The control values, in declared order. Ties in the maximization go to
    /// the first one.
    fn controls(&self) -> &[Vec<f64>];

    /// Writes `mu(t, x, a)` (length `d`) into `out`.
    fn drift(&self, t: f64, x: &[f64], a: &[f64], out: &mut [f64]);

    /// Writes `sigma(t, x, a)` as a row-major `d x p` matrix into `out`.
    fn diffusion(&self, t: f64, x: &[f64], a: &[f64], out: &mut [f64]);

    /// Discount rate `rho(t, x, a) >= 0`.
    fn discount(&self, _t: f64, _x: &[f64], _a: &[f64]) -> f64 {
        0.0
    }

    fn running_cost(&self, _t: f64, _x: &[f64], _a: &[f64]) -> f64 {
        0.0
    }

    fn terminal(&self, x: &[f64]) -> f64;

    /// Analytic value outside the truncated domain, if the model knows one.
    fn asymptote(&self, _t: f64, _x: &[f64]) -> Option<f64> {
        None
    }

    fn has_asymptote(&self) -> bool {
        false
    }

    /// True when no coefficient depends on `t`.
    fn time_homogeneous(&self) -> bool {
        false
    }

    /// Analytic coefficient derivatives for scalar models, when available.
    fn scalar_derivatives(&self, _x: f64, _a: &[f64]) -> Option<ScalarDerivatives> {
        None
    }

    /// Canonical parameter string, used to tag persisted surfaces.
    fn fingerprint(&self) -> String {
        "custom".to_string()
    }
}

/// Uniform time mesh `t_n = n h`, `h = T / N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeMesh {
    steps: usize,
    horizon: f64,
}

impl TimeMesh {
    pub fn new(steps: usize, horizon: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Configuration("time mesh needs N >= 1".into()));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Configuration(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { steps, horizon })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn step_size(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.step_size()
    }
}

pub fn payoff_call(s: f64, strike: f64) -> f64 {
    (s - strike).max(0.0)
}

pub fn payoff_butterfly(s: f64, lower: f64, upper: f64) -> f64 {
    0.25 * ((s - lower).max(0.0) - 2.0 * (s - 0.5 * (lower + upper)).max(0.0) + (s - upper).max(0.0))
}

/// Option payoff as a function of the price `s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Payoff {
    Call { strike: f64 },
    Butterfly { lower: f64, upper: f64 },
}

impl Payoff {
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            Payoff::Call { strike } => payoff_call(s, strike),
            Payoff::Butterfly { lower, upper } => payoff_butterfly(s, lower, upper),
        }
    }

    /// Strike used to place the default log-price domain.
    pub fn reference_strike(&self) -> f64 {
        match *self {
            Payoff::Call { strike } => strike,
            Payoff::Butterfly { lower, .. } => lower,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Payoff::Call { strike } if !(strike > 0.0 && strike.is_finite()) => {
                Err(Error::InvalidModel(format!("call strike must be positive, got {strike}")))
            }
            Payoff::Butterfly { lower, upper } if !(lower > 0.0 && lower < upper && upper.is_finite()) => Err(
                Error::InvalidModel(format!("butterfly strikes need 0 < K1 < K2, got {lower}, {upper}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Black-Scholes model with unequal lending (`r_l`) and borrowing (`r_b`)
/// rates, in log-price `x = log s`.
///
/// The controlled rate `q in {r_b, r_l}` enters both the drift
/// `q - sigma^2 / 2` and the discount; the volatility is constant.
#[derive(Clone, Debug, PartialEq)]
pub struct BergmanProblem {
    pub r_l: f64,
    pub r_b: f64,
    pub sigma: f64,
    pub maturity: f64,
    pub payoff: Payoff,
    controls: Vec<Vec<f64>>,
}

/// Builds the unequal-rates model; `r_b` is listed first so ties resolve to it.
pub fn bergman_problem(r_l: f64, r_b: f64, sigma: f64, payoff: Payoff, maturity: f64) -> Result<BergmanProblem> {
    if !(r_l > 0.0 && r_l <= r_b && r_b.is_finite()) {
        return Err(Error::InvalidModel(format!("rates need 0 < r_l <= r_b, got r_l={r_l}, r_b={r_b}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidModel(format!("volatility must be >= 0, got {sigma}")));
    }
    if !(maturity > 0.0 && maturity.is_finite()) {
        return Err(Error::InvalidModel(format!("maturity must be positive, got {maturity}")));
    }
    payoff.validate()?;
    let controls = if r_l == r_b { vec![vec![r_b]] } else { vec![vec![r_b], vec![r_l]] };
    Ok(BergmanProblem { r_l, r_b, sigma, maturity, payoff, controls })
}

impl BergmanProblem {
    /// Same model with the rate frozen at `q` (a linear Black-Scholes problem).
    pub fn with_fixed_rate(&self, q: f64) -> Result<BergmanProblem> {
        bergman_problem(q, q, self.sigma, self.payoff, self.maturity)
    }
}

impl ControlProblem for BergmanProblem {
    fn dim(&self) -> usize {
        1
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> f64 {
        self.maturity
    }

    fn controls(&self) -> &[Vec<f64>] {
        &self.controls
    }

    #[inline]
    fn drift(&self, _t: f64, _x: &[f64], a: &[f64], out: &mut [f64]) {
        out[0] = a[0] - 0.5 * self.sigma * self.sigma;
    }

    #[inline]
    fn diffusion(&self, _t: f64, _x: &[f64], _a: &[f64], out: &mut [f64]) {
        out[0] = self.sigma;
    }

    #[inline]
    fn discount(&self, _t: f64, _x: &[f64], a: &[f64]) -> f64 {
        a[0]
    }

    fn terminal(&self, x: &[f64]) -> f64 {
        self.payoff.value(x[0].exp())
    }

    fn asymptote(&self, t: f64, x: &[f64]) -> Option<f64> {
        Some(match self.payoff {
            Payoff::Call { strike } => {
                let s = x[0].exp();
                if s <= strike {
                    0.0
                } else {
                    s - strike * (-self.r_b * (self.maturity - t)).exp()
                }
            }
            Payoff::Butterfly { .. } => 0.0,
        })
    }

    fn has_asymptote(&self) -> bool {
        true
    }

    fn time_homogeneous(&self) -> bool {
        true
    }

    fn scalar_derivatives(&self, _x: f64, a: &[f64]) -> Option<ScalarDerivatives> {
        Some(ScalarDerivatives {
            mu: a[0] - 0.5 * self.sigma * self.sigma,
            sigma: self.sigma,
            ..Default::default()
        })
    }

    fn fingerprint(&self) -> String {
        format!(
            "bergman r_l={:e} r_b={:e} sigma={:e} T={:e} payoff={:?}",
            self.r_l, self.r_b, self.sigma, self.maturity, self.payoff
        )
    }
}

type Coef<T> = Box<dyn Fn(f64, &[f64], &[f64]) -> T + Send + Sync>;
type VecCoef = Box<dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync>;
type StateFn<T> = Box<dyn Fn(f64, &[f64]) -> T + Send + Sync>;
type TerminalFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A control problem assembled from closures; handy for tests and ad-hoc models.
pub struct FnProblem {
    dim: usize,
    noise_dim: usize,
    horizon: f64,
    controls: Vec<Vec<f64>>,
    drift: VecCoef,
    diffusion: VecCoef,
    discount: Coef<f64>,
    running_cost: Coef<f64>,
    terminal: TerminalFn,
    asymptote: Option<StateFn<f64>>,
    derivatives: Option<StateFn<ScalarDerivatives>>,
    time_homogeneous: bool,
}

impl FnProblem {
    /// Driftless, noiseless problem with zero discount and cost; refine with the
    /// `with_*` methods.
    pub fn new(
        dim: usize,
        noise_dim: usize,
        horizon: f64,
        controls: Vec<Vec<f64>>,
        terminal: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 || noise_dim == 0 {
            return Err(Error::InvalidModel("dimensions must be positive".into()));
        }
        if controls.is_empty() {
            return Err(Error::InvalidModel("control set must be non-empty".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidModel(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self {
            dim,
            noise_dim,
            horizon,
            controls,
            drift: Box::new(|_, _, _, out| out.fill(0.0)),
            diffusion: Box::new(|_, _, _, out| out.fill(0.0)),
            discount: Box::new(|_, _, _| 0.0),
            running_cost: Box::new(|_, _, _| 0.0),
            terminal: Box::new(terminal),
            asymptote: None,
            derivatives: None,
            time_homogeneous: true,
        })
    }

    pub fn with_drift(mut self, f: impl Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.drift = Box::new(f);
        self
    }

    pub fn with_diffusion(mut self, f: impl Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.diffusion = Box::new(f);
        self
    }

    pub fn with_discount(mut self, f: impl Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.discount = Box::new(f);
        self
    }

    pub fn with_running_cost(mut self, f: impl Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.running_cost = Box::new(f);
        self
    }

    pub fn with_asymptote(mut self, f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.asymptote = Some(Box::new(f));
        self
    }

    pub fn with_derivatives(mut self, f: impl Fn(f64, &[f64]) -> ScalarDerivatives + Send + Sync + 'static) -> Self {
        self.derivatives = Some(Box::new(f));
        self
    }

    /// Declares whether the coefficients depend on time (they are assumed not to by default).
    pub fn time_dependent(mut self, dependent: bool) -> Self {
        self.time_homogeneous = !dependent;
        self
    }
}

impl ControlProblem for FnProblem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn controls(&self) -> &[Vec<f64>] {
        &self.controls
    }

    fn drift(&self, t: f64, x: &[f64], a: &[f64], out: &mut [f64]) {
        (self.drift)(t, x, a, out)
    }

    fn diffusion(&self, t: f64, x: &[f64], a: &[f64], out: &mut [f64]) {
        (self.diffusion)(t, x, a, out)
    }

    fn discount(&self, t: f64, x: &[f64], a: &[f64]) -> f64 {
        (self.discount)(t, x, a)
    }

    fn running_cost(&self, t: f64, x: &[f64], a: &[f64]) -> f64 {
        (self.running_cost)(t, x, a)
    }

    fn terminal(&self, x: &[f64]) -> f64 {
        (self.terminal)(x)
    }

    fn asymptote(&self, t: f64, x: &[f64]) -> Option<f64> {
        self.asymptote.as_ref().map(|f| f(t, x))
    }

    fn has_asymptote(&self) -> bool {
        self.asymptote.is_some()
    }

    fn time_homogeneous(&self) -> bool {
        self.time_homogeneous
    }

    fn scalar_derivatives(&self, x: f64, a: &[f64]) -> Option<ScalarDerivatives> {
        self.derivatives.as_ref().map(|f| f(x, a))
    }
}
