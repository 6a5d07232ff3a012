use std::sync::Arc;

use mlp_core::stochastics::inverse_normal_cdf;
use mlp_core::*;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

fn allen_cahn_1d() -> ExampleConfig {
    build_example(ExampleName::AllenCahn, 1).unwrap()
}

#[test]
fn base_estimate_replays_by_hand() {
    let ex = allen_cahn_1d();
    let params = SchemeParams::new(3, ex.variant);
    for seed in 0..20 {
        let key = RngKey::from_seed(seed);
        let est = base_estimate(&ex.problem, ex.driver, params, 0.0, &[0.0], &key).unwrap();
        let w = key
            .child(Branch::TerminalSample, &[0, 1])
            .stream()
            .next_normal();
        let g = 1.0 / (1.0 + w * w);
        assert!((est.value - g).abs() < 1e-15, "seed {seed}");
        assert!((est.zeta[0] - (g - 1.0) * w).abs() < 1e-15);
    }
}

#[test]
fn level_one_replays_by_hand() {
    // rho = 1: one terminal sample, one f-sample over a two-node rule,
    // each node evaluating a level-0 estimate under its own key.
    let ex = allen_cahn_1d();
    let params = SchemeParams::new(1, ex.variant);
    let key = RngKey::from_seed(31);
    let s = 0.25;
    let x = 0.3;
    let horizon = 1.0;
    let est = mlp_estimate(&ex.problem, ex.driver, params, 1, s, &[x], &key).unwrap();

    let g = |y: f64| 1.0 / (1.0 + y * y);
    let f = |u: f64| u - u * u * u;

    let wt = (horizon - s).sqrt()
        * key
            .child(Branch::TerminalSample, &[0, 1])
            .stream()
            .next_normal();
    let mut value = g(x) + (g(x + wt) - g(x));
    let mut zeta = (g(x + wt) - g(x)) * wt / (horizon - s);

    let rule = rescale(&gauss_legendre(2).unwrap(), s, horizon).unwrap();
    let mut path = key.child(Branch::Path, &[0, 1]).stream();
    let mut w = 0.0;
    let mut prev = s;
    for (j, (&t, &q)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        w += (t - prev).sqrt() * path.next_normal();
        prev = t;
        let xt = x + w;
        let inner = key.child(Branch::FSampleCurrent, &[0, 1, j as u64]);
        let wi = (horizon - t).sqrt()
            * inner
                .child(Branch::TerminalSample, &[0, 1])
                .stream()
                .next_normal();
        let u0 = g(xt) + (g(xt + wi) - g(xt));
        value += q * f(u0);
        zeta += q * f(u0) * w / (t - s);
    }
    assert!(
        (est.value - value).abs() < 1e-14,
        "{} vs {value}",
        est.value
    );
    assert!(
        (est.zeta[0] - zeta).abs() < 1e-13,
        "{} vs {zeta}",
        est.zeta[0]
    );
}

#[test]
fn normals_come_from_the_inverse_cdf_of_uniforms() {
    let mut a = RngKey::from_seed(5).stream();
    let mut b = RngKey::from_seed(5).stream();
    for _ in 0..1000 {
        assert_eq!(a.next_normal(), inverse_normal_cdf(b.next_uniform()));
    }
}

fn small_problems() -> Vec<(PdeProblem, Driver, &'static str)> {
    let abm = build_example(ExampleName::AllenCahn, 2).unwrap();
    let gbm = build_example(ExampleName::DefaultRisk, 2).unwrap();
    vec![
        (abm.problem, abm.driver, "abm"),
        (gbm.problem, gbm.driver, "gbm"),
    ]
}

#[test]
fn instrumented_draws_equal_prediction() {
    for (problem, driver, tag) in small_problems() {
        for variant in [Variant::SqrtF, Variant::FullF] {
            for rho in 1..=4 {
                let params = SchemeParams::new(rho, variant);
                let mlp = Mlp::new(&problem, driver, params).unwrap();
                for k in 0..=4 {
                    let (_, draws) = mlp
                        .estimate_counted(k, 0.0, problem.eval_point(), &RngKey::from_seed(1))
                        .unwrap();
                    assert_eq!(
                        draws,
                        predicted_draw_count(&problem, params, k),
                        "{tag} {variant:?} rho={rho} k={k}"
                    );
                }
            }
        }
    }
}

#[test]
fn identical_across_thread_counts() {
    let ex = build_example(ExampleName::Explicit, 10).unwrap();
    let params = SchemeParams::new(3, ex.variant);
    let run = |threads: usize, parallel: bool| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                Mlp::new(&ex.problem, ex.driver, params)
                    .unwrap()
                    .with_parallel(parallel)
                    .estimate(3, 0.0, ex.problem.eval_point(), &RngKey::from_seed(77))
                    .unwrap()
            })
    };
    let one = run(1, true);
    let bits = |e: &Estimate| {
        std::iter::once(e.value)
            .chain(e.zeta.iter().copied())
            .map(f64::to_bits)
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&one), bits(&run(4, true)));
    assert_eq!(bits(&one), bits(&run(4, false)));
}

#[test]
fn base_estimate_mean_matches_plain_monte_carlo() {
    // E[g(x + sigma W_T)] for the closed-form example, d = 1, by the
    // estimator's own sampling and by an unrelated generator.
    let ex = build_example(ExampleName::Explicit, 1).unwrap();
    let params = SchemeParams::new(1, ex.variant);
    let mlp = Mlp::new(&ex.problem, ex.driver, params)
        .unwrap()
        .with_parallel(false);
    let n = 1_000_000u64;
    let root = RngKey::from_seed(2024);
    let (mut s1, mut q1) = (0.0, 0.0);
    for i in 0..n {
        let key = root.child(Branch::Run, &[0, i]);
        let v = mlp.estimate(0, 0.0, &[0.0], &key).unwrap().value;
        s1 += v;
        q1 += v * v;
    }
    let mut rng = rand::rngs::StdRng::seed_from_u64(99);
    let scale = examples::explicit::SIGMA * examples::explicit::HORIZON.sqrt();
    let (mut s2, mut q2) = (0.0, 0.0);
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        let v = closed_form_explicit(examples::explicit::HORIZON, &[scale * z]);
        s2 += v;
        q2 += v * v;
    }
    let nf = n as f64;
    let (m1, m2) = (s1 / nf, s2 / nf);
    let var1 = q1 / nf - m1 * m1;
    let var2 = q2 / nf - m2 * m2;
    let se = ((var1 + var2) / nf).sqrt();
    assert!((m1 - m2).abs() < 3.0 * se, "{m1} vs {m2}, se {se}");
}

#[test]
fn path_marginals_pass_kolmogorov_smirnov() {
    // W_{0.7} - W_{0.2} scaled to unit variance, one per key.
    let n = 20_000usize;
    let root = RngKey::from_seed(8);
    let mut z: Vec<f64> = (0..n as u64)
        .map(|i| {
            let p =
                sample_brownian_path(&root.child(Branch::Path, &[i]), 0.0, &[0.2, 0.7], 1).unwrap();
            (p.increment(1)[0] - p.increment(0)[0]) / 0.5f64.sqrt()
        })
        .collect();
    z.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let normal = Normal::new(0.0, 1.0).unwrap();
    let d = z
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = normal.cdf(v);
            (c - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - c)
        })
        .fold(0.0, f64::max);
    // Critical value at level 0.001.
    assert!(d < 1.95 / (n as f64).sqrt(), "KS distance {d}");
}

#[test]
fn node_shift_changes_rules_but_not_constants() {
    let c = 2.5;
    let problem = PdeProblem::new(
        3,
        1.0,
        Arc::new(move |_| c),
        Arc::new(|_, _, _, _| 0.0),
        vec![0.0; 3],
    )
    .unwrap();
    for shift in [-1, 1] {
        let params = SchemeParams::new(3, Variant::FullF).with_node_shift(shift);
        let est = mlp_estimate(
            &problem,
            Driver::brownian(),
            params,
            3,
            0.0,
            &[0.0; 3],
            &RngKey::from_seed(3),
        )
        .unwrap();
        assert_eq!(est.value, c);
        assert!(est.zeta.iter().all(|&z| z == 0.0));
    }
    let base = SchemeParams::new(4, Variant::FullF);
    assert_eq!(base.with_node_shift(1).nodes(2, 0), base.nodes(2, 0) + 1);
    assert_eq!(base.with_node_shift(-1).nodes(2, 0), base.nodes(2, 0) - 1);
}

#[test]
fn non_finite_nonlinearity_reports_its_key_path() {
    let problem = PdeProblem::new(
        1,
        1.0,
        Arc::new(|x| x[0]),
        Arc::new(|_, _, y, _| if y > 1e300 { y } else { f64::NAN }),
        vec![0.0],
    )
    .unwrap();
    let err = mlp_estimate(
        &problem,
        Driver::brownian(),
        SchemeParams::new(2, Variant::FullF),
        2,
        0.0,
        &[0.0],
        &RngKey::from_seed(0),
    )
    .unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, Error::NonFinite { .. }), "{msg}");
    assert!(msg.contains("Path[0, "), "{msg}");
}
