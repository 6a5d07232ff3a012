use std::sync::Arc;

use mlp_core::*;
use statrs::distribution::{ContinuousCDF, Normal};

fn black_scholes_call(s: f64, k: f64, r: f64, sigma: f64, t: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    let sd = sigma * t.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * t) / sd;
    s * n.cdf(d1) - k * (-r * t).exp() * n.cdf(d1 - sd)
}

#[test]
fn borrow_lend_reduces_to_black_scholes() {
    // A call has positive cash position S*Delta - C, so only the borrowing
    // rate acts and the drift equals it: Black-Scholes at r = 0.06.
    let ex = build_example(ExampleName::BorrowLend, 1).unwrap();
    let bs = black_scholes_call(100.0, 100.0, 0.06, 0.2, 0.5);
    assert!((bs - 7.156).abs() < 5e-4, "{bs}");
    let fd = fd_reference(&ex, 1024).unwrap();
    assert!(((fd - bs) / bs).abs() < 2e-4, "fd {fd} bs {bs}");
}

#[test]
fn grid_refinement_converges() {
    for name in [
        ExampleName::DefaultRisk,
        ExampleName::Cva,
        ExampleName::BorrowLend,
        ExampleName::AllenCahn,
    ] {
        let ex = build_example(name, 1).unwrap();
        let coarse = fd_reference(&ex, 256).unwrap();
        let fine = fd_reference(&ex, 1024).unwrap();
        assert!(
            ((coarse - fine) / fine).abs() < 1e-3,
            "{name}: {coarse} vs {fine}"
        );
    }
}

#[test]
fn allen_cahn_with_flat_data_is_an_ode() {
    // Constant g = c and no diffusion: u_t + u - u^3 = 0 backwards from T,
    // solved by u^2 = 1 / (1 + (1/c^2 - 1) e^{-2 (T - t)}).
    let ex = build_example(ExampleName::AllenCahn, 1).unwrap();
    for c in [0.3, 0.8, 1.5] {
        let problem = PdeProblem::new(
            1,
            1.0,
            Arc::new(move |_| c),
            Arc::new(|_, _, y, _| y - y * y * y),
            vec![0.0],
        )
        .unwrap();
        let mut cfg = FdConfig::for_driver(ex.driver, 512);
        cfg.diffusion = false;
        let got = fdref::fd_solve_problem(&cfg, &problem, ex.driver, 0.0, 0.0).unwrap();
        let want = (1.0 / (1.0 + (1.0 / (c * c) - 1.0) * (-2.0f64).exp())).sqrt();
        assert!(((got - want) / want).abs() < 1e-3, "c={c}: {got} vs {want}");
    }
}

#[test]
fn published_reference_values() {
    let cases = [
        (ExampleName::DefaultRisk, 97.705),
        (ExampleName::Cva, -0.883),
        (ExampleName::BorrowLend, 7.156),
        (ExampleName::AllenCahn, 0.905),
    ];
    for (name, v) in cases {
        let ex = build_example(name, 1).unwrap();
        let got = fd_reference(&ex, 512).unwrap();
        assert!(((got - v) / v).abs() < 5e-3, "{name}: {got} vs {v}");
    }
}

#[test]
fn rejects_high_dimensional_examples() {
    let ex = build_example(ExampleName::Cva, 2).unwrap();
    assert!(matches!(fd_reference(&ex, 64), Err(Error::Contract(_))));
}
