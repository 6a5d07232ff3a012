//! Full-history recursive multilevel Picard estimator.
//!
//! For level `k >= 1` an estimate of `(u(s,x), sigma(s,x)^T grad u(s,x))` is
//!
//! ```text
//! (g(x), 0)
//!   + 1/mg(k,0) * sum_i [g(X_T^i) - g(x)] * I_T^i
//!   + sum_{l<k} 1/mf(k,l) * sum_i sum_j q_j [ f(t_j, X_j, U_l(t_j, X_j))
//!                                           - 1{l>0} f(t_j, X_j, U_{l-1}(t_j, X_j)) ] * I_j
//! ```
//!
//! where `q` is the Gauss–Legendre rule on `(s, T)` with `nodes(k,l)` points,
//! `X` comes from the exact driver, `I = (1, (W_t - W_s)/(t - s))`, and the
//! two inner iterates of each difference use independent keys. All nodes of
//! one `(l, i)` sample share a single Brownian path. Level 0 keeps only the
//! first two terms, with `mg(0,0) = 1` sample.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, KeyStep, Result};
use crate::quadrature::{gauss_legendre, node_count, round_count, QuadratureRule};
use crate::stochastics::{fill_increments, Branch, Driver, RngKey};

/// Default cap on scalar normal draws for one top-level estimate.
pub const DEFAULT_BUDGET: u64 = 10_000_000_000;

pub type Terminal = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// `f(t, x, y, z)` with `z` the scaled gradient.
pub type Nonlinearity = Arc<dyn Fn(f64, &[f64], f64, &[f64]) -> f64 + Send + Sync>;
/// `eta(x)` written into the output buffer.
pub type SpaceShift = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Semilinear PDE data: dimension, horizon, terminal condition `g`,
/// nonlinearity `f`, space shift `eta` (identity when absent) and the point
/// of interest `x0`.
#[derive(Clone)]
pub struct PdeProblem {
    dim: usize,
    horizon: f64,
    terminal: Terminal,
    nonlinearity: Nonlinearity,
    space_shift: Option<SpaceShift>,
    eval_point: Vec<f64>,
}

impl fmt::Debug for PdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PdeProblem")
            .field("dim", &self.dim)
            .field("horizon", &self.horizon)
            .field("space_shift", &self.space_shift.is_some())
            .field("eval_point", &self.eval_point)
            .finish_non_exhaustive()
    }
}

impl PdeProblem {
    pub fn new(
        dim: usize,
        horizon: f64,
        terminal: Terminal,
        nonlinearity: Nonlinearity,
        eval_point: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::contract("dimension must be at least 1"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::contract(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if eval_point.len() != dim {
            return Err(Error::contract(format!(
                "evaluation point has {} coordinates, expected {dim}",
                eval_point.len()
            )));
        }
        Ok(PdeProblem {
            dim,
            horizon,
            terminal,
            nonlinearity,
            space_shift: None,
            eval_point,
        })
    }

    pub fn with_space_shift(mut self, eta: SpaceShift) -> Self {
        self.space_shift = Some(eta);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn eval_point(&self) -> &[f64] {
        &self.eval_point
    }

    pub fn has_space_shift(&self) -> bool {
        self.space_shift.is_some()
    }

    pub fn terminal(&self, x: &[f64]) -> f64 {
        (self.terminal)(x)
    }

    pub fn nonlinearity(&self, t: f64, x: &[f64], y: f64, z: &[f64]) -> f64 {
        (self.nonlinearity)(t, x, y, z)
    }
}

/// Sample-count schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// `mg = rho^(k-l)`, `mf = round(rho^((k-l)/2))`.
    SqrtF,
    /// `mg = mf = rho^(k-l)`.
    FullF,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchemeParams {
    pub rho: u32,
    pub variant: Variant,
    /// Added to every quadrature node count (clamped at 1). Zero except
    /// for sensitivity studies.
    pub node_shift: i32,
}

impl SchemeParams {
    pub fn new(rho: u32, variant: Variant) -> Self {
        SchemeParams {
            rho,
            variant,
            node_shift: 0,
        }
    }

    pub fn with_node_shift(mut self, shift: i32) -> Self {
        self.node_shift = shift;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.rho == 0 {
            return Err(Error::contract("rho must be a positive integer"));
        }
        Ok(())
    }

    /// Terminal-condition sample count `rho^(k-l)`, saturating.
    pub fn mg(&self, k: u32, l: u32) -> u64 {
        u64::from(self.rho).saturating_pow(k - l)
    }

    /// Nonlinearity sample count.
    pub fn mf(&self, k: u32, l: u32) -> u64 {
        match self.variant {
            Variant::FullF => self.mg(k, l),
            Variant::SqrtF => {
                let v = f64::from(self.rho).powf(f64::from(k - l) / 2.0);
                if v >= u64::MAX as f64 {
                    u64::MAX
                } else {
                    round_count(v)
                }
            }
        }
    }

    /// Quadrature node count between levels `k >= l`.
    pub fn nodes(&self, k: u32, l: u32) -> usize {
        let base = node_count(k, l, self.rho) as i64;
        (base + i64::from(self.node_shift)).max(1) as usize
    }
}

/// Approximation of `(u(s,x), sigma(s,x)^T grad u(s,x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub zeta: Vec<f64>,
}

impl Estimate {
    fn from_slice(v: &[f64]) -> Self {
        Estimate {
            value: v[0],
            zeta: v[1..].to_vec(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.zeta.iter().all(|z| z.is_finite())
    }
}

/// Configured estimator. Construction checks the problem/driver pairing;
/// each call precomputes the quadrature rules it needs.
#[derive(Clone)]
pub struct Mlp<'a> {
    problem: &'a PdeProblem,
    driver: Driver,
    params: SchemeParams,
    budget: u64,
    parallel: bool,
}

impl<'a> Mlp<'a> {
    pub fn new(problem: &'a PdeProblem, driver: Driver, params: SchemeParams) -> Result<Self> {
        driver.validate()?;
        params.validate()?;
        if matches!(driver, Driver::Abm { .. }) && problem.has_space_shift() {
            return Err(Error::contract(
                "the Brownian driver requires the identity space shift",
            ));
        }
        Ok(Mlp {
            problem,
            driver,
            params,
            budget: DEFAULT_BUDGET,
            parallel: false,
        })
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    /// Evaluate the top-level nonlinearity samples on the rayon pool. The
    /// result is bit-identical to the sequential evaluation.
    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn params(&self) -> SchemeParams {
        self.params
    }

    pub fn predicted_draw_count(&self, k: u32) -> u64 {
        predicted_draw_count(self.problem, self.params, k)
    }

    pub fn estimate(&self, k: u32, s: f64, x: &[f64], key: &RngKey) -> Result<Estimate> {
        self.estimate_counted(k, s, x, key).map(|(e, _)| e)
    }

    /// Like [`Mlp::estimate`], also returning the number of scalar normal
    /// draws actually consumed.
    pub fn estimate_counted(
        &self,
        k: u32,
        s: f64,
        x: &[f64],
        key: &RngKey,
    ) -> Result<(Estimate, u64)> {
        let horizon = self.problem.horizon;
        if !(s >= 0.0 && s < horizon) {
            return Err(Error::contract(format!(
                "need 0 <= s < T={horizon}, got s={s}"
            )));
        }
        if x.len() != self.problem.dim {
            return Err(Error::contract(format!(
                "x has {} coordinates, expected {}",
                x.len(),
                self.problem.dim
            )));
        }
        self.driver.check_start(x)?;
        let predicted = self.predicted_draw_count(k);
        if predicted > self.budget || predicted == u64::MAX {
            return Err(Error::BudgetExceeded {
                predicted,
                budget: self.budget,
            });
        }
        let ctx = Recursion::new(self, k)?;
        let mut out = vec![0.0; self.problem.dim + 1];
        let draws = ctx.level(k, s, x, key, &mut out, self.parallel)?;
        Ok((Estimate::from_slice(&out), draws))
    }
}

/// Per-call tables and the recursive kernel.
struct Recursion<'a> {
    problem: &'a PdeProblem,
    driver: Driver,
    params: SchemeParams,
    /// Reference rules on (-1, 1), indexed by node count.
    rules: Vec<Option<QuadratureRule>>,
}

/// Contribution of one sample plus the draws it consumed.
type Sample = (Vec<f64>, u64);

impl<'a> Recursion<'a> {
    fn new(mlp: &Mlp<'a>, k: u32) -> Result<Self> {
        let mut rules: Vec<Option<QuadratureRule>> = Vec::new();
        for diff in 1..=k {
            let n = mlp.params.nodes(diff, 0);
            if rules.len() <= n {
                rules.resize(n + 1, None);
            }
            if rules[n].is_none() {
                rules[n] = Some(gauss_legendre(n)?);
            }
        }
        Ok(Recursion {
            problem: mlp.problem,
            driver: mlp.driver,
            params: mlp.params,
            rules,
        })
    }

    fn rule(&self, k: u32, l: u32) -> &QuadratureRule {
        let n = self.params.nodes(k, l);
        self.rules[n]
            .as_ref()
            .expect("rule precomputed for every level gap")
    }

    /// Writes `U_k(s, x)` into `out` and returns the draws consumed.
    fn level(
        &self,
        k: u32,
        s: f64,
        x: &[f64],
        key: &RngKey,
        out: &mut [f64],
        parallel: bool,
    ) -> Result<u64> {
        let d = self.problem.dim;
        let gx = self.problem.terminal(x);
        if !gx.is_finite() {
            return Err(non_finite("terminal value", s, x));
        }
        out[0] = gx;
        out[1..].iter_mut().for_each(|v| *v = 0.0);
        let mut draws = 0u64;

        let mg = self.params.mg(k, 0);
        let terminal: Vec<Sample> = if parallel {
            (1..=mg)
                .into_par_iter()
                .map(|i| self.terminal_sample(i, s, x, gx, key))
                .collect::<Result<_>>()?
        } else {
            (1..=mg)
                .map(|i| self.terminal_sample(i, s, x, gx, key))
                .collect::<Result<_>>()?
        };
        accumulate(out, &terminal, mg, &mut draws);

        for l in 0..k {
            let mf = self.params.mf(k, l);
            let samples: Vec<Sample> = if parallel {
                (1..=mf)
                    .into_par_iter()
                    .map(|i| self.f_sample(k, l, i, s, x, key))
                    .collect::<Result<_>>()?
            } else {
                (1..=mf)
                    .map(|i| self.f_sample(k, l, i, s, x, key))
                    .collect::<Result<_>>()?
            };
            accumulate(out, &samples, mf, &mut draws);
        }
        debug_assert_eq!(out.len(), d + 1);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(non_finite("estimate", s, x));
        }
        Ok(draws)
    }

    fn terminal_sample(&self, i: u64, s: f64, x: &[f64], gx: f64, key: &RngKey) -> Result<Sample> {
        let d = self.problem.dim;
        let horizon = self.problem.horizon;
        let sample_key = key.child(Branch::TerminalSample, &[0, i]);
        let mut dw = vec![0.0; d];
        fill_increments(&sample_key, s, &[horizon], d, &mut dw);
        let mut xt = vec![0.0; d];
        self.driver.state_into(x, horizon - s, &dw, &mut xt);
        let diff = self.problem.terminal(&xt) - gx;
        if !diff.is_finite() {
            return Err(non_finite("terminal value", s, &xt).within(KeyStep {
                branch: Branch::TerminalSample,
                indices: vec![0, i],
            }));
        }
        let inv = 1.0 / (horizon - s);
        let mut c = Vec::with_capacity(d + 1);
        c.push(diff);
        c.extend(dw.iter().map(|w| diff * w * inv));
        Ok((c, d as u64))
    }

    fn f_sample(&self, k: u32, l: u32, i: u64, s: f64, x: &[f64], key: &RngKey) -> Result<Sample> {
        let d = self.problem.dim;
        let horizon = self.problem.horizon;
        let rule = self.rule(k, l);
        let n = rule.len();
        let half = 0.5 * (horizon - s);
        let times: Vec<f64> = rule.nodes.iter().map(|&z| s + half * (z + 1.0)).collect();

        let path_key = key.child(Branch::Path, &[u64::from(l), i]);
        let mut path = vec![0.0; n * d];
        fill_increments(&path_key, s, &times, d, &mut path);
        let mut draws = (n * d) as u64;

        let mut c = vec![0.0; d + 1];
        let mut xt = vec![0.0; d];
        let mut shifted = vec![0.0; d];
        let mut inner = vec![0.0; d + 1];
        for (j, &t) in times.iter().enumerate() {
            // Gauss-Legendre nodes lie strictly inside (s, T).
            debug_assert!(t > s && t < horizon);
            let dw = &path[j * d..(j + 1) * d];
            self.driver.state_into(x, t - s, dw, &mut xt);
            let at: &[f64] = match &self.problem.space_shift {
                Some(eta) => {
                    eta(&xt, &mut shifted);
                    &shifted
                }
                None => &xt,
            };
            let node = j as u64;
            let step = |branch| KeyStep {
                branch,
                indices: vec![u64::from(l), i, node],
            };

            let cur_key = key.child(Branch::FSampleCurrent, &[u64::from(l), i, node]);
            draws += self
                .level(l, t, at, &cur_key, &mut inner, false)
                .map_err(|e| e.within(step(Branch::FSampleCurrent)))?;
            let mut delta = self.problem.nonlinearity(t, &xt, inner[0], &inner[1..]);
            if l >= 1 {
                let prev_key = key.child(Branch::FSamplePrevious, &[u64::from(l), i, node]);
                draws += self
                    .level(l - 1, t, at, &prev_key, &mut inner, false)
                    .map_err(|e| e.within(step(Branch::FSamplePrevious)))?;
                delta -= self.problem.nonlinearity(t, &xt, inner[0], &inner[1..]);
            }
            if !delta.is_finite() {
                return Err(non_finite("nonlinearity", t, &xt).within(KeyStep {
                    branch: Branch::Path,
                    indices: vec![u64::from(l), i, node],
                }));
            }
            let w = rule.weights[j] * half * delta;
            let inv = 1.0 / (t - s);
            c[0] += w;
            for (cq, &wq) in c[1..].iter_mut().zip(dw) {
                *cq += w * wq * inv;
            }
        }
        Ok((c, draws))
    }
}

fn accumulate(out: &mut [f64], samples: &[Sample], m: u64, draws: &mut u64) {
    if samples.is_empty() {
        return;
    }
    let mut acc = vec![0.0; out.len()];
    for (c, n) in samples {
        for (a, v) in acc.iter_mut().zip(c) {
            *a += v;
        }
        *draws += n;
    }
    let inv = 1.0 / m as f64;
    for (o, a) in out.iter_mut().zip(&acc) {
        *o += a * inv;
    }
}

fn non_finite(what: &'static str, s: f64, x: &[f64]) -> Error {
    Error::NonFinite {
        what,
        s,
        x: x.to_vec(),
        path: Vec::new(),
    }
}

/// Level-0 estimate: `(g(x), 0)` plus one terminal-difference sample.
pub fn base_estimate(
    problem: &PdeProblem,
    driver: Driver,
    params: SchemeParams,
    s: f64,
    x: &[f64],
    key: &RngKey,
) -> Result<Estimate> {
    Mlp::new(problem, driver, params)?.estimate(0, s, x, key)
}

/// Level-`k` multilevel Picard estimate at `(s, x)` under `key`.
pub fn mlp_estimate(
    problem: &PdeProblem,
    driver: Driver,
    params: SchemeParams,
    k: u32,
    s: f64,
    x: &[f64],
    key: &RngKey,
) -> Result<Estimate> {
    Mlp::new(problem, driver, params)?.estimate(k, s, x, key)
}

/// Exact number of scalar normal draws a level-`k` estimate consumes.
/// Saturates at `u64::MAX`.
pub fn predicted_draw_count(problem: &PdeProblem, params: SchemeParams, k: u32) -> u64 {
    let d = problem.dim as u64;
    let mut counts: Vec<u64> = Vec::with_capacity(k as usize + 1);
    for level in 0..=k {
        let mut c = d.saturating_mul(params.mg(level, 0));
        for l in 0..level {
            let inner = counts[l as usize]
                .saturating_add(if l >= 1 { counts[l as usize - 1] } else { 0 })
                .saturating_add(d);
            let per_sample = (params.nodes(level, l) as u64).saturating_mul(inner);
            c = c.saturating_add(params.mf(level, l).saturating_mul(per_sample));
        }
        counts.push(c);
    }
    counts[k as usize]
}
