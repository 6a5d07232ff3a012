use super::path::BrownianPath;
use crate::error::{Error, Result};

/// Exactly simulable forward diffusion.
///
/// `Abm { sigma }` moves as `x + sigma * (W_t - W_s)`; the heat-equation case
/// is `sigma = 1`. `Gbm { mu, sigma }` is componentwise geometric Brownian
/// motion `x_j exp((mu - sigma^2/2)(t - s) + sigma (W_t - W_s)_j)`.
///
/// In both cases the integrand vector is `(1, (W_t - W_s) / (t - s))`, so
/// the gradient part of an estimate approximates `sigma(s, x)^T grad u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Driver {
    Abm { sigma: f64 },
    Gbm { mu: f64, sigma: f64 },
}

impl Driver {
    /// Standard arithmetic Brownian motion (unit volatility).
    pub fn brownian() -> Self {
        Driver::Abm { sigma: 1.0 }
    }

    pub fn is_gbm(&self) -> bool {
        matches!(self, Driver::Gbm { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let sigma = match *self {
            Driver::Abm { sigma } => sigma,
            Driver::Gbm { mu, sigma } => {
                if !mu.is_finite() {
                    return Err(Error::contract("GBM drift must be finite"));
                }
                sigma
            }
        };
        if sigma > 0.0 && sigma.is_finite() {
            Ok(())
        } else {
            Err(Error::contract(format!(
                "driver volatility must be positive, got {sigma}"
            )))
        }
    }

    /// Checks that `x` is an admissible starting point for this driver.
    pub fn check_start(&self, x: &[f64]) -> Result<()> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract(format!("non-finite start point {x:?}")));
        }
        if self.is_gbm() && x.iter().any(|&v| v <= 0.0) {
            return Err(Error::contract(format!(
                "GBM start point must have strictly positive coordinates, got {x:?}"
            )));
        }
        Ok(())
    }

    /// Forward state at elapsed time `dt = t - s` given the increment `dw`.
    #[inline]
    pub fn state_into(&self, x: &[f64], dt: f64, dw: &[f64], out: &mut [f64]) {
        match *self {
            Driver::Abm { sigma } => {
                for ((o, &xi), &w) in out.iter_mut().zip(x).zip(dw) {
                    *o = xi + sigma * w;
                }
            }
            Driver::Gbm { mu, sigma } => {
                let drift = (mu - 0.5 * sigma * sigma) * dt;
                for ((o, &xi), &w) in out.iter_mut().zip(x).zip(dw) {
                    *o = xi * (drift + sigma * w).exp();
                }
            }
        }
    }

    /// Evaluates `(X_t, I_t)` at a recorded time `t` of `path`.
    pub fn eval(&self, x: &[f64], path: &BrownianPath, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != path.dim() {
            return Err(Error::contract(format!(
                "start point has {} coordinates, path has {}",
                x.len(),
                path.dim()
            )));
        }
        let j = path
            .index_of(t)
            .ok_or_else(|| Error::contract(format!("t={t} is not a recorded path time")))?;
        let dt = t - path.start();
        let dw = path.increment(j);
        let mut state = vec![0.0; x.len()];
        self.state_into(x, dt, dw, &mut state);
        let mut integrand = Vec::with_capacity(x.len() + 1);
        integrand.push(1.0);
        integrand.extend(dw.iter().map(|w| w / dt));
        Ok((state, integrand))
    }
}

/// Free-function form of [`Driver::eval`]. At `t = s` the state is `x` and
/// the integrand is the zero vector.
pub fn driver_eval(
    driver: &Driver,
    x: &[f64],
    s: f64,
    path: &BrownianPath,
    t: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if (s - path.start()).abs() > 0.0 {
        return Err(Error::contract(format!(
            "path starts at {}, evaluation requested from s={s}",
            path.start()
        )));
    }
    if t == s {
        return Ok((x.to_vec(), vec![0.0; x.len() + 1]));
    }
    driver.eval(x, path, t)
}
