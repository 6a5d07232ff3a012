//! Repeated-run experiments, error statistics, dimension sweeps and CSV
//! output.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::examples::{build_example, ExampleConfig, ExampleName};
use crate::fdref::{fd_reference, DEFAULT_STEPS};
use crate::scheme::{Mlp, SchemeParams, DEFAULT_BUDGET};
use crate::stochastics::{Branch, RngKey};

pub const RUNS_HEADER: &str = "rho,run,value,runtime_s";
pub const STATS_HEADER: &str = "rho,mean,std,rel_error,rel_increment,mean_runtime_s";
pub const SWEEP_HEADER: &str = "dim,runs,mean_value,mean_runtime_s,status";

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub example: ExampleName,
    pub dim: usize,
    /// Diagonal levels `k = rho` to evaluate, sorted ascending.
    pub rho_list: Vec<u32>,
    pub runs: usize,
    pub seed: u64,
    pub budget: u64,
    /// Time steps of the finite-difference reference for `dim = 1`.
    pub fd_steps: usize,
    /// Run the repetitions concurrently instead of parallelising inside
    /// each estimate. Inflates the per-run wall clock.
    pub parallel_runs: bool,
    pub node_shift: i32,
}

impl ExperimentConfig {
    pub fn new(
        example: ExampleName,
        dim: usize,
        rho_list: Vec<u32>,
        runs: usize,
        seed: u64,
    ) -> Self {
        ExperimentConfig {
            example,
            dim,
            rho_list,
            runs,
            seed,
            budget: DEFAULT_BUDGET,
            fd_steps: DEFAULT_STEPS,
            parallel_runs: false,
            node_shift: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.runs < 2 {
            return Err(Error::contract(
                "at least two runs are needed for a standard deviation",
            ));
        }
        if self.rho_list.is_empty() {
            return Err(Error::contract("rho list is empty"));
        }
        if self.rho_list.windows(2).any(|w| w[0] >= w[1]) || self.rho_list[0] == 0 {
            return Err(Error::contract(format!(
                "rho list must be positive and strictly increasing, got {:?}",
                self.rho_list
            )));
        }
        Ok(())
    }
}

/// Key used for repetition `run` at accuracy `rho`.
pub fn run_key(seed: u64, rho: u32, run: usize) -> RngKey {
    RngKey::from_seed(seed).child(Branch::Run, &[u64::from(rho), run as u64])
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub rho: u32,
    pub run: usize,
    pub value: f64,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsRow {
    pub rho: u32,
    pub mean_value: f64,
    pub std: f64,
    pub rel_error: Option<f64>,
    pub rel_increment: Option<f64>,
    pub runtime_seconds: f64,
    /// The predicted draw count exceeded the budget; no runs were made.
    pub refused: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub reference: Option<f64>,
    pub rows: Vec<StatsRow>,
    pub runs: Vec<RunRecord>,
}

/// Reference value at the example's evaluation point, when one exists:
/// the closed form if known, otherwise finite differences in dimension 1.
pub fn reference_value(example: &ExampleConfig, fd_steps: usize) -> Option<Result<f64>> {
    if let Some(u) = example.closed_form {
        return Some(Ok(u(0.0, example.problem.eval_point())));
    }
    if example.dim == 1 {
        return Some(fd_reference(example, fd_steps));
    }
    None
}

/// Mean of `|sample - v| / |v|`.
pub fn relative_error(samples: &[f64], v: f64) -> Result<f64> {
    if v == 0.0 || !v.is_finite() {
        return Err(Error::contract(
            "relative error needs a finite nonzero reference",
        ));
    }
    if samples.is_empty() {
        return Err(Error::contract("relative error of an empty sample"));
    }
    Ok(samples.iter().map(|s| (s - v).abs()).sum::<f64>() / samples.len() as f64 / v.abs())
}

/// Relative increments between consecutive accuracies: for each
/// `rho < rho_max`, the mean over runs `i` of `|U_i(rho+1) - U_i(rho)|`
/// divided by the absolute mean at `rho_max`. Run `i` at one accuracy is
/// paired with run `i` at the next.
pub fn relative_increments(
    samples_by_rho: &BTreeMap<u32, Vec<f64>>,
    rho_max: u32,
) -> Result<BTreeMap<u32, f64>> {
    let top = samples_by_rho
        .get(&rho_max)
        .ok_or_else(|| Error::contract(format!("no samples at rho_max={rho_max}")))?;
    let n = top.len();
    if n == 0 {
        return Err(Error::contract("empty sample list"));
    }
    if samples_by_rho.values().any(|v| v.len() != n) {
        return Err(Error::contract("sample lists must have equal length"));
    }
    let denom = (top.iter().sum::<f64>() / n as f64).abs();
    if denom == 0.0 {
        return Err(Error::contract("relative increment denominator is zero"));
    }
    let mut out = BTreeMap::new();
    for (&rho, cur) in samples_by_rho.range(..rho_max) {
        let next = samples_by_rho.get(&(rho + 1)).ok_or_else(|| {
            Error::contract(format!(
                "increments need consecutive rho, missing {}",
                rho + 1
            ))
        })?;
        let mean_abs = cur
            .iter()
            .zip(next)
            .map(|(a, b)| (b - a).abs())
            .sum::<f64>()
            / n as f64;
        out.insert(rho, mean_abs / denom);
    }
    Ok(out)
}

pub fn mean_and_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn timed_run(
    example: &ExampleConfig,
    params: SchemeParams,
    budget: u64,
    parallel: bool,
    rho: u32,
    run: usize,
    seed: u64,
) -> Result<RunRecord> {
    let mlp = Mlp::new(&example.problem, example.driver, params)?
        .with_budget(budget)
        .with_parallel(parallel);
    let key = run_key(seed, rho, run);
    let x0 = example.problem.eval_point();
    let start = Instant::now();
    let est = mlp.estimate(rho, 0.0, x0, &key)?;
    let runtime_seconds = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
    Ok(RunRecord {
        rho,
        run,
        value: est.value,
        runtime_seconds,
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let example = build_example(config.example, config.dim)?;
    let reference = reference_value(&example, config.fd_steps).transpose()?;

    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut by_rho: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for &rho in &config.rho_list {
        let params = SchemeParams::new(rho, example.variant).with_node_shift(config.node_shift);
        let predicted = crate::scheme::predicted_draw_count(&example.problem, params, rho);
        if predicted > config.budget || predicted == u64::MAX {
            rows.push(StatsRow {
                rho,
                mean_value: f64::NAN,
                std: f64::NAN,
                rel_error: None,
                rel_increment: None,
                runtime_seconds: f64::NAN,
                refused: true,
            });
            break;
        }
        let run_one = |run| {
            timed_run(
                &example,
                params,
                config.budget,
                !config.parallel_runs,
                rho,
                run,
                config.seed,
            )
        };
        let recs: Vec<RunRecord> = if config.parallel_runs {
            (0..config.runs)
                .into_par_iter()
                .map(run_one)
                .collect::<Result<_>>()?
        } else {
            (0..config.runs).map(run_one).collect::<Result<_>>()?
        };
        let values: Vec<f64> = recs.iter().map(|r| r.value).collect();
        let (mean_value, std) = mean_and_std(&values);
        let runtime_seconds =
            recs.iter().map(|r| r.runtime_seconds).sum::<f64>() / recs.len() as f64;
        rows.push(StatsRow {
            rho,
            mean_value,
            std,
            rel_error: reference.map(|v| relative_error(&values, v)).transpose()?,
            rel_increment: None,
            runtime_seconds,
            refused: false,
        });
        by_rho.insert(rho, values);
        records.extend(recs);
    }

    if reference.is_none() {
        if let Some(&rho_max) = by_rho.keys().next_back() {
            let consecutive = by_rho
                .keys()
                .zip(by_rho.keys().skip(1))
                .all(|(a, b)| b - a == 1);
            if consecutive {
                let inc = relative_increments(&by_rho, rho_max)?;
                for row in rows.iter_mut() {
                    row.rel_increment = inc.get(&row.rho).copied();
                }
            }
        }
    }
    Ok(ExperimentResult {
        reference,
        rows,
        runs: records,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub dim: usize,
    pub runs: usize,
    pub mean_value: Option<f64>,
    pub runtime_seconds: Option<f64>,
    pub refused: bool,
}

/// Times `runs` estimates at `k = rho` for each dimension. Runs are
/// sequential and single-threaded so wall clock reflects the work; one
/// untimed warm-up estimate precedes each dimension.
pub fn dimension_sweep(
    example: ExampleName,
    rho: u32,
    dims: &[usize],
    runs: usize,
    seed: u64,
    budget: u64,
) -> Result<Vec<SweepRow>> {
    if dims.is_empty() {
        return Err(Error::contract("dimension list is empty"));
    }
    if runs == 0 {
        return Err(Error::contract("need at least one run per dimension"));
    }
    let mut rows = Vec::with_capacity(dims.len());
    for &dim in dims {
        let cfg = build_example(example, dim)?;
        let params = SchemeParams::new(rho, cfg.variant);
        let recs: Result<Vec<RunRecord>> = timed_run(&cfg, params, budget, false, rho, 0, seed)
            .and_then(|_| {
                (0..runs)
                    .map(|run| timed_run(&cfg, params, budget, false, rho, run, seed))
                    .collect()
            });
        match recs {
            Ok(recs) => {
                let n = recs.len() as f64;
                rows.push(SweepRow {
                    dim,
                    runs,
                    mean_value: Some(recs.iter().map(|r| r.value).sum::<f64>() / n),
                    runtime_seconds: Some(recs.iter().map(|r| r.runtime_seconds).sum::<f64>() / n),
                    refused: false,
                });
            }
            Err(Error::BudgetExceeded { .. }) => rows.push(SweepRow {
                dim,
                runs,
                mean_value: None,
                runtime_seconds: None,
                refused: true,
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(rows)
}

/// Formats like C's `%.6g`.
pub fn fmt_sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    // Exponent after rounding to six significant digits.
    let sci = format!("{:.5e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        let m = trim_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_sig6).unwrap_or_default()
}

/// Runtimes blanked to NaN are written as empty fields.
fn runtime(v: f64) -> String {
    opt(Some(v).filter(|v| !v.is_nan()))
}

pub fn write_runs_csv<W: Write>(mut w: W, runs: &[RunRecord]) -> Result<()> {
    writeln!(w, "{RUNS_HEADER}")?;
    for r in runs {
        writeln!(
            w,
            "{},{},{},{}",
            r.rho,
            r.run,
            fmt_sig6(r.value),
            runtime(r.runtime_seconds)
        )?;
    }
    Ok(())
}

pub fn write_stats_csv<W: Write>(mut w: W, rows: &[StatsRow]) -> Result<()> {
    writeln!(w, "{STATS_HEADER}")?;
    for r in rows {
        if r.refused {
            writeln!(w, "{},refused,,,,", r.rho)?;
            continue;
        }
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.rho,
            fmt_sig6(r.mean_value),
            fmt_sig6(r.std),
            opt(r.rel_error),
            opt(r.rel_increment),
            runtime(r.runtime_seconds)
        )?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(mut w: W, rows: &[SweepRow]) -> Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.dim,
            r.runs,
            opt(r.mean_value),
            opt(r.runtime_seconds),
            if r.refused { "refused" } else { "ok" }
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_examples() {
        assert_eq!(relative_error(&[3.0, 3.0, 3.0], 3.0).unwrap(), 0.0);
        assert_eq!(relative_error(&[4.0], 2.0).unwrap(), 1.0);
        assert_eq!(relative_error(&[-4.0], -2.0).unwrap(), 1.0);
        assert!(relative_error(&[1.0], 0.0).is_err());
        assert!(relative_error(&[], 1.0).is_err());
    }

    #[test]
    fn relative_error_at_realistic_spread() {
        // Ten samples with mean 97.712 and spread comparable to the
        // a standard deviation near 0.386.
        let offs = [-0.5, 0.4, -0.2, 0.3, 0.1, -0.4, 0.6, -0.1, 0.2, -0.33];
        let samples: Vec<f64> = offs.iter().map(|o| 97.712 + o).collect();
        let e = relative_error(&samples, 97.705).unwrap();
        assert!(e > 0.001 && e < 0.006, "{e}");
    }

    #[test]
    fn increments_examples() {
        let mut m = BTreeMap::new();
        m.insert(1, vec![2.0, 2.0]);
        m.insert(2, vec![2.0, 2.0]);
        m.insert(3, vec![2.0, 2.0]);
        let inc = relative_increments(&m, 3).unwrap();
        assert_eq!(inc.len(), 2);
        assert!(inc.values().all(|&v| v == 0.0));

        let mut toy = BTreeMap::new();
        toy.insert(1, vec![0.0, 2.0]);
        toy.insert(2, vec![1.0, 1.0]);
        assert_eq!(relative_increments(&toy, 2).unwrap()[&1], 1.0);

        let mut zero = BTreeMap::new();
        zero.insert(1, vec![1.0, -1.0]);
        zero.insert(2, vec![1.0, -1.0]);
        assert!(relative_increments(&zero, 2).is_err());

        let mut gap = BTreeMap::new();
        gap.insert(1, vec![1.0]);
        gap.insert(3, vec![1.0]);
        assert!(relative_increments(&gap, 3).is_err());
    }

    #[test]
    fn increments_depend_on_run_pairing() {
        let mut a = BTreeMap::new();
        a.insert(1, vec![0.0, 10.0]);
        a.insert(2, vec![0.0, 10.0]);
        let mut b = a.clone();
        b.insert(2, vec![10.0, 0.0]);
        assert_ne!(
            relative_increments(&a, 2).unwrap(),
            relative_increments(&b, 2).unwrap()
        );
    }

    #[test]
    fn sig6_matches_printf_g() {
        let cases = [
            (97.70512345, "97.7051"),
            (0.5, "0.5"),
            (-0.883, "-0.883"),
            (1234567.0, "1.23457e+06"),
            (0.00012345678, "0.000123457"),
            (0.000012345678, "1.23457e-05"),
            (100.0, "100"),
            (999999.5, "1e+06"),
            (0.0, "0"),
            (7.0, "7"),
        ];
        for (x, s) in cases {
            assert_eq!(fmt_sig6(x), s, "{x}");
        }
    }

    #[test]
    fn std_uses_unbiased_normalisation() {
        let (m, s) = mean_and_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let ok = ExperimentConfig::new(ExampleName::Explicit, 2, vec![1, 2], 2, 0);
        assert!(ok.validate().is_ok());
        let mut bad = ok.clone();
        bad.runs = 1;
        assert!(bad.validate().is_err());
        bad = ok.clone();
        bad.rho_list = vec![2, 1];
        assert!(bad.validate().is_err());
        bad.rho_list = vec![];
        assert!(bad.validate().is_err());
    }

    #[test]
    fn refused_rows_stop_the_experiment() {
        let mut cfg = ExperimentConfig::new(ExampleName::AllenCahn, 3, vec![1, 2, 3], 2, 5);
        cfg.budget = 2_000;
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.rows.len(), 3);
        assert!(!res.rows[1].refused);
        assert!(res.rows[2].refused);
        let mut buf = Vec::new();
        write_stats_csv(&mut buf, &res.rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().last().unwrap().starts_with("3,refused"));
    }
}
