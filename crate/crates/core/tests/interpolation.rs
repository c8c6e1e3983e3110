use proptest::prelude::*;
use slhjb::interpolation::{interp_multilinear, interp_pchip, locate, Axis, SliceInterpolant};
use slhjb::{Extrapolation, Grid, Interpolation};

fn eval(grid: &Grid, values: &[f64], kind: Interpolation, x: f64) -> f64 {
    SliceInterpolant::new(grid, values, kind, None).unwrap().eval(&[x]).unwrap()
}

#[test]
fn abs_error_bounded_by_spacing() {
    for (lo, hi, j) in [(-1.0, 1.0, 7), (-2.5, 0.75, 13), (-0.3, 4.0, 64)] {
        let grid = Grid::uniform(lo, hi, j, Extrapolation::Clamp).unwrap();
        let values: Vec<f64> = (0..=j).map(|m| grid.node(m)[0].abs()).collect();
        let dx = grid.axis(0).spacing();
        let mut worst: f64 = 0.0;
        for i in 0..10_000 {
            let x = lo + (hi - lo) * (i as f64 + 0.5) / 10_000.0;
            worst = worst.max((eval(&grid, &values, Interpolation::Linear, x) - x.abs()).abs());
        }
        assert!(worst <= dx, "{worst} > {dx}");
    }
}

#[test]
fn pchip_third_order_on_smooth_data() {
    let err = |j: usize| {
        let grid = Grid::uniform(0.0, 1.0, j, Extrapolation::Clamp).unwrap();
        let f = |x: f64| (2.0 * x).exp();
        let values: Vec<f64> = (0..=j).map(|m| f(grid.node(m)[0])).collect();
        (0..2000)
            .map(|i| {
                let x = 0.2 + 0.6 * (i as f64 + 0.5) / 2000.0;
                (eval(&grid, &values, Interpolation::Pchip, x) - f(x)).abs()
            })
            .fold(0.0, f64::max)
    };
    let e: Vec<f64> = [32, 64, 128, 256].iter().map(|&j| err(j)).collect();
    for w in e.windows(2) {
        let ratio = w[0] / w[1];
        assert!((6.0..=10.0).contains(&ratio), "{e:?}");
    }
}

#[test]
fn two_dimensional_bilinear_is_exact_on_bilinear_data() {
    let grid = Grid::new(
        vec![Axis::new(0.0, 1.0, 4).unwrap(), Axis::new(-1.0, 2.0, 6).unwrap()],
        Extrapolation::Clamp,
    )
    .unwrap();
    let f = |x: &[f64]| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1];
    let values: Vec<f64> = (0..grid.node_count()).map(|k| f(&grid.node(k))).collect();
    for x in [[0.3, 0.1], [0.99, 1.7], [0.0, -1.0], [0.55, 0.55]] {
        let v = interp_multilinear(&grid, &values, &x, None).unwrap();
        assert!((v - f(&x)).abs() < 1e-13);
    }
}

fn grid_and_pair() -> impl Strategy<Value = (f64, f64, Vec<f64>, Vec<f64>, f64)> {
    (-5.0..5.0f64, 0.1..10.0f64, 1usize..40).prop_flat_map(|(lo, width, j)| {
        (
            Just(lo),
            Just(lo + width),
            prop::collection::vec(-100.0..100.0f64, j + 1),
            prop::collection::vec(0.0..50.0f64, j + 1),
            lo - 1.0..lo + width + 1.0,
        )
            .prop_map(|(lo, hi, base, gap, x)| {
                let upper: Vec<f64> = base.iter().zip(&gap).map(|(b, g)| b + g).collect();
                (lo, hi, base, upper, x)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn multilinear_is_monotone((lo, hi, low, high, x) in grid_and_pair()) {
        let grid = Grid::uniform(lo, hi, low.len() - 1, Extrapolation::Clamp).unwrap();
        let a = interp_multilinear(&grid, &low, &[x], None).unwrap();
        let b = interp_multilinear(&grid, &high, &[x], None).unwrap();
        prop_assert!(a <= b, "{} > {}", a, b);
    }

    #[test]
    fn stencil_weights_are_convex((lo, hi, low, _high, x) in grid_and_pair()) {
        let grid = Grid::uniform(lo, hi, low.len() - 1, Extrapolation::Clamp).unwrap();
        let s = locate(&grid, &[x]).unwrap();
        prop_assert!(s.entries.len() <= 2);
        prop_assert!(s.entries.iter().all(|e| e.1 >= 0.0));
        prop_assert!((s.total() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn both_interpolants_reproduce_nodes((lo, hi, values, _u, _x) in grid_and_pair()) {
        let grid = Grid::uniform(lo, hi, values.len() - 1, Extrapolation::Clamp).unwrap();
        for (m, &v) in values.iter().enumerate() {
            let x = grid.node(m);
            prop_assert_eq!(interp_multilinear(&grid, &values, &x, None).unwrap(), v);
            prop_assert_eq!(interp_pchip(&grid, &values, &x, None).unwrap(), v);
        }
    }

    #[test]
    fn pchip_stays_within_monotone_cells(
        steps in prop::collection::vec(0.0..5.0f64, 2..30),
        noise in prop::collection::vec(-3.0..3.0f64, 30),
        t in 0.0..1.0f64,
    ) {
        // Monotone increasing stretch followed by arbitrary data.
        let mut values = vec![0.0];
        for s in &steps {
            values.push(values.last().unwrap() + s);
        }
        let top = *values.last().unwrap();
        values.extend(noise.iter().map(|n| top + n));
        let j = values.len() - 1;
        let grid = Grid::uniform(0.0, 1.0, j, Extrapolation::Clamp).unwrap();
        let dx = grid.axis(0).spacing();
        for cell in 0..j {
            let (a, b) = (values[cell], values[cell + 1]);
            let v = eval(&grid, &values, Interpolation::Pchip, (cell as f64 + t) * dx);
            let local_monotone = cell < steps.len();
            if local_monotone {
                prop_assert!(v >= a.min(b) - 1e-12 && v <= a.max(b) + 1e-12, "cell {}: {} outside [{}, {}]", cell, v, a, b);
            }
        }
        // Monotone on the increasing stretch.
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=200 {
            let x = (steps.len() as f64) * dx * i as f64 / 200.0;
            let v = eval(&grid, &values, Interpolation::Pchip, x);
            prop_assert!(v >= prev - 1e-12);
            prev = v;
        }
    }
}
