use proptest::prelude::*;
use slhjb::interpolation::interp_multilinear;
use slhjb::solver::{lipschitz_estimate, step_point, transition_row};
use slhjb::{
    backward_solve, bergman_problem, hermite_rule, ControlProblem, Extrapolation, FnProblem, Grid, Interpolation,
    Payoff, Stepper, TimeMesh,
};

const R_L: f64 = 0.1;
const R_B: f64 = 0.15;
const SIGMA: f64 = 0.4;

/// Unequal-rates dynamics in log-price with an arbitrary terminal payoff.
fn rates_problem(terminal: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> FnProblem {
    FnProblem::new(1, 1, 1.0, vec![vec![R_B], vec![R_L]], terminal)
        .unwrap()
        .with_drift(|_, _, a, out| out[0] = a[0] - 0.5 * SIGMA * SIGMA)
        .with_diffusion(|_, _, _, out| out[0] = SIGMA)
        .with_discount(|_, _, a| a[0])
}

fn node_payoff(grid: &Grid, values: Vec<f64>) -> impl Fn(&[f64]) -> f64 + Send + Sync + 'static {
    let grid = grid.clone();
    move |x: &[f64]| interp_multilinear(&grid, &values, x, None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn scheme_is_monotone(
        base in prop::collection::vec(-5.0..5.0f64, 33),
        gap in prop::collection::vec(0.0..2.0f64, 33),
        m in 2usize..=4,
    ) {
        let grid = Grid::uniform(2.0, 7.0, 32, Extrapolation::Clamp).unwrap();
        let upper: Vec<f64> = base.iter().zip(&gap).map(|(b, g)| b + g).collect();
        let low = rates_problem(node_payoff(&grid, base));
        let high = rates_problem(node_payoff(&grid, upper));
        let mesh = TimeMesh::new(8, 1.0).unwrap();
        let rule = hermite_rule(m).unwrap();
        let v1 = backward_solve(&low, &grid, &mesh, &rule, Interpolation::Linear, Stepper::Euler).unwrap();
        let v2 = backward_solve(&high, &grid, &mesh, &rule, Interpolation::Linear, Stepper::Euler).unwrap();
        for n in 0..=8 {
            let (a, b) = (v1.values(n).unwrap(), v2.values(n).unwrap());
            for (x, y) in a.iter().zip(b) {
                prop_assert!(x <= y, "slice {}: {} > {}", n, x, y);
            }
        }
    }
}

#[test]
fn constants_are_preserved() {
    for (m, stepper, interp) in [
        (2, Stepper::Euler, Interpolation::Linear),
        (4, Stepper::Euler, Interpolation::Pchip),
        (3, Stepper::Weak2, Interpolation::Linear),
    ] {
        let problem = rates_problem(|_| 3.25).with_discount(|_, _, _| 0.0);
        let grid = Grid::uniform(0.0, 7.0, 100, Extrapolation::Clamp).unwrap();
        let mesh = TimeMesh::new(16, 1.0).unwrap();
        let surface = backward_solve(&problem, &grid, &mesh, &hermite_rule(m).unwrap(), interp, stepper).unwrap();
        for n in 0..=16 {
            for v in surface.values(n).unwrap() {
                assert!((v - 3.25).abs() <= 1e-12, "{v}");
            }
        }
    }
}

#[test]
fn affine_payoff_is_a_martingale() {
    let steps = 10;
    let horizon = 0.5;
    for m in [2, 3, 5] {
        let problem = FnProblem::new(1, 1, horizon, vec![vec![0.2], vec![0.6]], |x| x[0])
            .unwrap()
            .with_diffusion(|_, _, a, out| out[0] = a[0]);
        let grid = Grid::uniform(-4.0, 4.0, 160, Extrapolation::Clamp).unwrap();
        let mesh = TimeMesh::new(steps, horizon).unwrap();
        let rule = hermite_rule(m).unwrap();
        // Per step: the farthest destination plus one cell of stencil.
        let reach = rule.iter().map(|(x, _)| x[0].abs()).fold(0.0, f64::max) * 0.6 * mesh.step_size().sqrt()
            + grid.axis(0).spacing();
        let surface = backward_solve(&problem, &grid, &mesh, &rule, Interpolation::Linear, Stepper::Euler).unwrap();
        for n in 0..=steps {
            let margin = reach * (steps - n) as f64;
            for (k, v) in surface.values(n).unwrap().iter().enumerate() {
                let x = grid.node(k)[0];
                if x - margin > -4.0 && x + margin < 4.0 {
                    assert!((v - x).abs() <= 1e-10, "M={m} n={n} x={x}: {v}");
                }
            }
        }
    }
}

#[test]
fn transition_rows_are_probabilities() {
    let problem = bergman_problem(R_L, R_B, SIGMA, Payoff::Call { strike: 100.0 }, 1.0).unwrap();
    let grid = Grid::uniform(0.0, 1200f64.ln(), 128, Extrapolation::Clamp).unwrap();
    let mesh = TimeMesh::new(16, 1.0).unwrap();
    for m_order in [2, 4] {
        let rule = hermite_rule(m_order).unwrap();
        for node in 0..grid.node_count() {
            for control in 0..2 {
                let row = transition_row(&problem, &grid, &mesh, &rule, Interpolation::Linear, Stepper::Euler, 3, node, control)
                    .unwrap();
                assert!(row.entries.iter().all(|e| e.1 >= 0.0));
                assert_eq!(row.escaped, 0.0);
                assert!((row.total() - 1.0).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn transition_row_rejects_pchip() {
    let problem = bergman_problem(R_L, R_B, SIGMA, Payoff::Call { strike: 100.0 }, 1.0).unwrap();
    let grid = Grid::uniform(0.0, 7.0, 16, Extrapolation::Clamp).unwrap();
    let mesh = TimeMesh::new(4, 1.0).unwrap();
    let rule = hermite_rule(2).unwrap();
    assert!(transition_row(&problem, &grid, &mesh, &rule, Interpolation::Pchip, Stepper::Euler, 0, 3, 0).is_err());
}

#[test]
fn lipschitz_constant_is_stable() {
    for payoff in [Payoff::Call { strike: 100.0 }, Payoff::Butterfly { lower: 100.0, upper: 300.0 }] {
        let problem = bergman_problem(R_L, R_B, SIGMA, payoff, 1.0).unwrap();
        let grid = Grid::uniform(30f64.ln(), 600f64.ln(), 256, Extrapolation::Clamp).unwrap();
        let mesh = TimeMesh::new(32, 1.0).unwrap();
        let surface =
            backward_solve(&problem, &grid, &mesh, &hermite_rule(4).unwrap(), Interpolation::Linear, Stepper::Euler)
                .unwrap();
        let terminal = lipschitz_estimate(&surface, 32).unwrap();
        for n in 0..32 {
            let l = lipschitz_estimate(&surface, n).unwrap();
            assert!(l <= 2.0 * terminal, "{payoff:?} slice {n}: {l} vs {terminal}");
        }
    }
}

#[test]
fn terminal_slice_is_the_payoff() {
    let problem = bergman_problem(R_L, R_B, SIGMA, Payoff::Butterfly { lower: 100.0, upper: 300.0 }, 1.0).unwrap();
    let grid = Grid::uniform(3.0, 7.0, 64, Extrapolation::Clamp).unwrap();
    let mesh = TimeMesh::new(4, 1.0).unwrap();
    let surface =
        backward_solve(&problem, &grid, &mesh, &hermite_rule(2).unwrap(), Interpolation::Pchip, Stepper::Euler).unwrap();
    for (k, v) in surface.values(4).unwrap().iter().enumerate() {
        assert_eq!(*v, problem.terminal(&grid.node(k)));
    }
    assert!(surface.values(0).unwrap().iter().all(|v| v.is_finite() && *v >= 0.0));
}

/// E[(a + bZ)^n] for standard normal Z, by binomial expansion.
fn gaussian_power(a: f64, b: f64, n: u32) -> f64 {
    let mut sum = 0.0;
    let mut binom = 1.0;
    for j in 0..=n {
        if j % 2 == 0 {
            let moment: f64 = (1..j).step_by(2).map(f64::from).product();
            sum += binom * a.powi((n - j) as i32) * b.powi(j as i32) * moment;
        }
        binom *= f64::from(n - j) / f64::from(j + 1);
    }
    sum
}

#[test]
fn one_step_polynomial_exactness() {
    let problem = bergman_problem(R_L, R_B, SIGMA, Payoff::Call { strike: 100.0 }, 1.0)
        .unwrap()
        .with_fixed_rate(R_B)
        .unwrap();
    let drift = R_B - 0.5 * SIGMA * SIGMA;
    for m in 2..=8 {
        let rule = hermite_rule(m).unwrap();
        for x0 in [0.0, 100f64.ln()] {
            for h in [1.0 / 16.0, 1.0 / 256.0] {
                for degree in 0..2 * m as u32 {
                    let quad: f64 = rule
                        .iter()
                        .map(|(xi, w)| {
                            let y = step_point(Stepper::Euler, &problem, 0.0, &[x0], &[R_B], xi, h).unwrap()[0];
                            w * y.powi(degree as i32)
                        })
                        .sum();
                    let exact = gaussian_power(x0 + drift * h, SIGMA * h.sqrt(), degree);
                    assert!((quad - exact).abs() <= 1e-10 * exact.abs(), "M={m} x0={x0} h={h} d={degree}");
                }
            }
        }
    }
}

