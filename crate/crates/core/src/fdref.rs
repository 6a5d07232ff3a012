//! One-dimensional finite-difference reference solver.
//!
//! Solves `u_t + mu(x) u_x + sigma(x)^2/2 u_xx + f(t, x, u, sigma(x) u_x) = 0`
//! backward from `u(T, .) = g` on a truncated grid. GBM problems are solved in
//! log-price `y = ln x`, where the operator has constant coefficients
//! `(mu - sigma^2/2) u_y + sigma^2/2 u_yy` and `z = sigma u_y`. Brownian
//! problems use `x` directly with `z = sigma u_x`.
//!
//! The linear part is Crank–Nicolson (with a few implicit Euler half-steps
//! at the start to damp payoff kinks); the nonlinearity is explicit,
//! extrapolated from the two previous levels. Boundary rows impose zero
//! curvature.

use crate::error::{Error, Result};
use crate::examples::ExampleConfig;
use crate::scheme::PdeProblem;
use crate::stochastics::Driver;

/// Default number of time steps for reference values.
pub const DEFAULT_STEPS: usize = 1 << 11;

const BLOWUP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    /// Log-price grid for geometric Brownian motion.
    Gbm,
    /// Uniform grid for (scaled) arithmetic Brownian motion.
    Abm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdConfig {
    pub nsteps: usize,
    pub space_points: usize,
    /// Half-width of the grid in standard deviations of the driver over
    /// `[t0, T]`.
    pub width_sd: f64,
    pub grid: GridKind,
    /// Implicit Euler half-steps replacing the first Crank–Nicolson steps.
    pub smoothing_steps: usize,
    /// When false the second-order term is dropped (pure transport plus
    /// reaction); used for ODE reductions.
    pub diffusion: bool,
}

impl FdConfig {
    /// Default grid for `driver`: `4 * nsteps + 1` points over six standard
    /// deviations either side of the evaluation point.
    pub fn for_driver(driver: Driver, nsteps: usize) -> Self {
        FdConfig {
            nsteps,
            space_points: 4 * nsteps + 1,
            width_sd: 6.0,
            grid: if driver.is_gbm() {
                GridKind::Gbm
            } else {
                GridKind::Abm
            },
            smoothing_steps: 4,
            diffusion: true,
        }
    }

    pub fn with_space_points(mut self, m: usize) -> Self {
        self.space_points = m;
        self
    }
}

/// Solves the `dim = 1` example at `(t0, x0)`.
pub fn fd_solve(config: &FdConfig, example: &ExampleConfig, t0: f64, x0: f64) -> Result<f64> {
    if example.dim != 1 {
        return Err(Error::contract(format!(
            "finite differences need dimension 1, example has {}",
            example.dim
        )));
    }
    fd_solve_problem(config, &example.problem, example.driver, t0, x0)
}

/// Reference value `u(0, x0)` for a one-dimensional example with the
/// default grid.
pub fn fd_reference(example: &ExampleConfig, nsteps: usize) -> Result<f64> {
    let config = FdConfig::for_driver(example.driver, nsteps);
    fd_solve(&config, example, 0.0, example.problem.eval_point()[0])
}

pub fn fd_solve_problem(
    config: &FdConfig,
    problem: &PdeProblem,
    driver: Driver,
    t0: f64,
    x0: f64,
) -> Result<f64> {
    let horizon = problem.horizon();
    if problem.dim() != 1 {
        return Err(Error::contract("finite differences need dimension 1"));
    }
    if !(t0 >= 0.0 && t0 < horizon) {
        return Err(Error::contract(format!("need 0 <= t0 < T, got {t0}")));
    }
    if config.nsteps < 2 || config.space_points < 3 {
        return Err(Error::contract(
            "need at least 2 time steps and 3 grid points",
        ));
    }
    driver.validate()?;
    driver.check_start(&[x0])?;
    let expected = if driver.is_gbm() {
        GridKind::Gbm
    } else {
        GridKind::Abm
    };
    if config.grid != expected {
        return Err(Error::contract(format!(
            "{:?} grid does not match driver {driver:?}",
            config.grid
        )));
    }

    let (drift, vol, center) = match driver {
        Driver::Gbm { mu, sigma } => (mu - 0.5 * sigma * sigma, sigma, x0.ln()),
        Driver::Abm { sigma } => (0.0, sigma, x0),
    };
    let diff_coef = if config.diffusion {
        0.5 * vol * vol
    } else {
        0.0
    };
    let to_state = |y: f64| match config.grid {
        GridKind::Gbm => y.exp(),
        GridKind::Abm => y,
    };

    let m = config.space_points;
    let half_width = config.width_sd * vol * (horizon - t0).sqrt();
    let lo = center - half_width;
    let h = 2.0 * half_width / (m - 1) as f64;
    let grid: Vec<f64> = (0..m).map(|i| lo + h * i as f64).collect();
    let states: Vec<f64> = grid.iter().map(|&y| to_state(y)).collect();

    let dt = (horizon - t0) / config.nsteps as f64;
    let mut u: Vec<f64> = states.iter().map(|&x| problem.terminal(&[x])).collect();
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract(
            "terminal condition is not finite on the grid",
        ));
    }

    let reaction = |t: f64, u: &[f64], out: &mut [f64]| {
        for i in 0..m {
            let du = if i == 0 {
                (u[1] - u[0]) / h
            } else if i == m - 1 {
                (u[m - 1] - u[m - 2]) / h
            } else {
                (u[i + 1] - u[i - 1]) / (2.0 * h)
            };
            out[i] = problem.nonlinearity(t, &[states[i]], u[i], &[vol * du]);
        }
    };

    // Operator L u_i = lower u_{i-1} + diag u_i + upper u_{i+1}.
    let lower = diff_coef / (h * h) - drift / (2.0 * h);
    let diag = -2.0 * diff_coef / (h * h);
    let upper = diff_coef / (h * h) + drift / (2.0 * h);

    let mut f_now = vec![0.0; m];
    let mut f_prev = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    let mut scratch = Scratch::new(m);
    let mut have_prev = false;

    let smoothing = config.smoothing_steps.min(2 * config.nsteps);
    // Work list of (step size, theta): implicit Euler half-steps first.
    let mut steps: Vec<(f64, f64)> = vec![(0.5 * dt, 1.0); smoothing];
    let consumed = smoothing.div_ceil(2);
    if smoothing % 2 == 1 {
        steps.push((0.5 * dt, 0.5));
    }
    steps.extend(std::iter::repeat_n((dt, 0.5), config.nsteps - consumed));

    let mut t = horizon;
    for (tau, theta) in steps {
        reaction(t, &u, &mut f_now);
        // Second-order extrapolation only between equal full steps.
        let extrapolate = have_prev && theta == 0.5 && tau == dt;
        for i in 1..m - 1 {
            let lu = lower * u[i - 1] + diag * u[i] + upper * u[i + 1];
            let f = if extrapolate {
                1.5 * f_now[i] - 0.5 * f_prev[i]
            } else {
                f_now[i]
            };
            rhs[i] = u[i] + (1.0 - theta) * tau * lu + tau * f;
        }
        implicit_solve(
            &mut scratch,
            &rhs,
            -theta * tau * lower,
            1.0 - theta * tau * diag,
            -theta * tau * upper,
            &mut u,
        );
        std::mem::swap(&mut f_now, &mut f_prev);
        have_prev = tau == dt;
        t -= tau;
        if u.iter().any(|v| !v.is_finite() || v.abs() > BLOWUP) {
            return Err(Error::Unstable {
                config: format!("{config:?}, t={t}"),
            });
        }
    }

    let pos = ((center - lo) / h).clamp(0.0, (m - 1) as f64);
    let i = (pos.floor() as usize).min(m - 2);
    let frac = pos - i as f64;
    Ok(u[i] * (1.0 - frac) + u[i + 1] * frac)
}

struct Scratch {
    c: Vec<f64>,
    d: Vec<f64>,
}

impl Scratch {
    fn new(m: usize) -> Self {
        Scratch {
            c: vec![0.0; m],
            d: vec![0.0; m],
        }
    }
}

/// Solves the interior system `a u_{i-1} + b u_i + c u_{i+1} = rhs_i`,
/// `i = 1..m-2`, with the boundary values eliminated through
/// `u_0 = 2 u_1 - u_2` and `u_{m-1} = 2 u_{m-2} - u_{m-3}`, then restores the
/// boundary values. Thomas algorithm.
fn implicit_solve(s: &mut Scratch, rhs: &[f64], a: f64, b: f64, c: f64, u: &mut [f64]) {
    let m = u.len();
    let n = m - 2;
    if n == 1 {
        // Both eliminations collapse onto the single interior node.
        u[1] = rhs[1] / (a + b + c);
        u[0] = u[1];
        u[2] = u[1];
        return;
    }
    // Row j (0-based) of the interior system is node i = j + 1.
    let row = |j: usize| -> (f64, f64, f64) {
        if j == 0 {
            (0.0, b + 2.0 * a, c - a)
        } else if j == n - 1 {
            (a - c, b + 2.0 * c, 0.0)
        } else {
            (a, b, c)
        }
    };
    let (_, b0, c0) = row(0);
    s.c[0] = c0 / b0;
    s.d[0] = rhs[1] / b0;
    for j in 1..n {
        let (aj, bj, cj) = row(j);
        let denom = bj - aj * s.c[j - 1];
        s.c[j] = cj / denom;
        s.d[j] = (rhs[j + 1] - aj * s.d[j - 1]) / denom;
    }
    u[n] = s.d[n - 1];
    for j in (0..n - 1).rev() {
        u[j + 1] = s.d[j] - s.c[j] * u[j + 2];
    }
    u[0] = 2.0 * u[1] - u[2];
    u[m - 1] = 2.0 * u[m - 2] - u[m - 3];
}
