//! The five benchmark problems: recursive pricing with default risk,
//! counterparty credit risk, borrowing/lending rate spread, Allen–Cahn, and
//! a problem with a logistic closed-form solution.
//!
//! Dimension 1 selects the one-dimensional parameter sets; every other
//! dimension uses the hundred-dimensional ones.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scheme::{PdeProblem, Terminal, Variant};
use crate::stochastics::Driver;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExampleName {
    DefaultRisk,
    Cva,
    BorrowLend,
    AllenCahn,
    Explicit,
}

impl ExampleName {
    pub const ALL: [ExampleName; 5] = [
        ExampleName::DefaultRisk,
        ExampleName::Cva,
        ExampleName::BorrowLend,
        ExampleName::AllenCahn,
        ExampleName::Explicit,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExampleName::DefaultRisk => "default-risk",
            ExampleName::Cva => "cva",
            ExampleName::BorrowLend => "borrow-lend",
            ExampleName::AllenCahn => "allen-cahn",
            ExampleName::Explicit => "explicit",
        }
    }
}

impl fmt::Display for ExampleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExampleName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExampleName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| {
                Error::contract(format!(
                    "unknown example '{s}' (expected default-risk, cva, borrow-lend, allen-cahn or explicit)"
                ))
            })
    }
}

pub type ClosedForm = fn(f64, &[f64]) -> f64;

/// A fully parameterised problem together with its driver and schedule.
#[derive(Debug, Clone)]
pub struct ExampleConfig {
    pub name: ExampleName,
    pub dim: usize,
    pub problem: PdeProblem,
    pub driver: Driver,
    pub variant: Variant,
    pub rho_max: u32,
    pub closed_form: Option<ClosedForm>,
}

/// Default-risk parameters.
pub mod default_risk {
    pub const HORIZON: f64 = 1.0;
    pub const MU: f64 = 0.02;
    pub const SIGMA: f64 = 0.2;
    pub const DELTA: f64 = 2.0 / 3.0;
    pub const RATE: f64 = 0.02;
    pub const GAMMA_HIGH: f64 = 0.2;
    pub const GAMMA_LOW: f64 = 0.02;

    /// `(v^h, v^l)` for the given dimension.
    pub fn thresholds(dim: usize) -> (f64, f64) {
        if dim == 1 {
            (50.0, 120.0)
        } else {
            (47.0, 65.0)
        }
    }

    /// Piecewise-linear default intensity times `(1 - delta) y`, plus `R y`,
    /// negated.
    pub fn nonlinearity(y: f64, vh: f64, vl: f64) -> f64 {
        let intensity = if y < vh {
            GAMMA_HIGH
        } else if y >= vl {
            GAMMA_LOW
        } else {
            (GAMMA_HIGH - GAMMA_LOW) / (vh - vl) * (y - vh) + GAMMA_HIGH
        };
        -(1.0 - DELTA) * y * intensity - RATE * y
    }
}

/// Counterparty-credit-risk parameters.
pub mod cva {
    pub const HORIZON: f64 = 2.0;
    pub const MU: f64 = 0.0;
    pub const SIGMA: f64 = 0.2;
    pub const BETA: f64 = 0.03;

    /// `(K1, K2, L)` for the given dimension.
    pub fn strikes(dim: usize) -> (f64, f64, f64) {
        if dim == 1 {
            (90.0, 110.0, 10.0)
        } else {
            (30.0, 60.0, 15.0)
        }
    }

    pub fn nonlinearity(y: f64) -> f64 {
        BETA * (y.max(0.0) - y)
    }
}

/// Borrowing/lending parameters.
pub mod borrow_lend {
    pub const HORIZON: f64 = 0.5;
    pub const MU: f64 = 0.06;
    pub const SIGMA: f64 = 0.2;
    pub const RATE_LEND: f64 = 0.04;
    pub const RATE_BORROW: f64 = 0.06;

    pub fn nonlinearity(y: f64, z_sum: f64) -> f64 {
        -RATE_LEND * y - (MU - RATE_LEND) / SIGMA * z_sum
            + (RATE_BORROW - RATE_LEND) * (z_sum / SIGMA - y).max(0.0)
    }
}

/// Closed-form-solution example parameters.
pub mod explicit {
    pub const HORIZON: f64 = 0.5;
    pub const SIGMA: f64 = 0.25;

    pub fn nonlinearity(dim: usize, y: f64, z_sum: f64) -> f64 {
        let d = dim as f64;
        SIGMA * (y - (2.0 + SIGMA * SIGMA * d) / (2.0 * SIGMA * SIGMA * d)) * z_sum
    }
}

fn min_coord(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max_coord(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `1 / (1 + e^{-a})`, evaluated without overflow.
pub(crate) fn logistic(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// `u(s, x) = exp(s + sum x) / (1 + exp(s + sum x))`.
pub fn closed_form_explicit(s: f64, x: &[f64]) -> f64 {
    logistic(s + x.iter().sum::<f64>())
}

pub fn build_example(name: ExampleName, dim: usize) -> Result<ExampleConfig> {
    if dim == 0 {
        return Err(Error::contract("example dimension must be at least 1"));
    }
    let hundreds = vec![100.0; dim];
    let zeros = vec![0.0; dim];
    let cfg = match name {
        ExampleName::DefaultRisk => {
            use default_risk::*;
            let (vh, vl) = thresholds(dim);
            ExampleConfig {
                name,
                dim,
                problem: PdeProblem::new(
                    dim,
                    HORIZON,
                    Arc::new(min_coord),
                    Arc::new(move |_, _, y, _| nonlinearity(y, vh, vl)),
                    hundreds,
                )?,
                driver: Driver::Gbm {
                    mu: MU,
                    sigma: SIGMA,
                },
                variant: Variant::SqrtF,
                rho_max: 7,
                closed_form: None,
            }
        }
        ExampleName::Cva => {
            use cva::*;
            let (k1, k2, l) = strikes(dim);
            ExampleConfig {
                name,
                dim,
                problem: PdeProblem::new(
                    dim,
                    HORIZON,
                    Arc::new(move |x| {
                        let m = min_coord(x);
                        (m - k1).max(0.0) - (m - k2).max(0.0) - l
                    }),
                    Arc::new(|_, _, y, _| nonlinearity(y)),
                    hundreds,
                )?,
                driver: Driver::Gbm {
                    mu: MU,
                    sigma: SIGMA,
                },
                variant: Variant::SqrtF,
                rho_max: 7,
                closed_form: None,
            }
        }
        ExampleName::BorrowLend => {
            use borrow_lend::*;
            let terminal: Terminal = if dim == 1 {
                Arc::new(|x| (x[0] - 100.0).max(0.0))
            } else {
                Arc::new(|x| {
                    let m = max_coord(x);
                    (m - 120.0).max(0.0) - 2.0 * (m - 150.0).max(0.0)
                })
            };
            ExampleConfig {
                name,
                dim,
                problem: PdeProblem::new(
                    dim,
                    HORIZON,
                    terminal,
                    Arc::new(|_, _, y, z| nonlinearity(y, z.iter().sum())),
                    hundreds,
                )?,
                driver: Driver::Gbm {
                    mu: MU,
                    sigma: SIGMA,
                },
                variant: Variant::SqrtF,
                rho_max: 7,
                closed_form: None,
            }
        }
        ExampleName::AllenCahn => ExampleConfig {
            name,
            dim,
            problem: PdeProblem::new(
                dim,
                1.0,
                Arc::new(|x| {
                    let m = x.iter().fold(0.0f64, |acc, v| acc.max(v * v));
                    1.0 / (1.0 + m)
                }),
                Arc::new(|_, _, y, _| y - y * y * y),
                zeros,
            )?,
            driver: Driver::brownian(),
            variant: Variant::FullF,
            rho_max: 5,
            closed_form: None,
        },
        ExampleName::Explicit => {
            use explicit::*;
            ExampleConfig {
                name,
                dim,
                problem: PdeProblem::new(
                    dim,
                    HORIZON,
                    Arc::new(|x| closed_form_explicit(HORIZON, x)),
                    Arc::new(move |_, _, y, z| nonlinearity(dim, y, z.iter().sum())),
                    zeros,
                )?,
                // Forward state x + sigma (W_t - W_s), matching sigma(s,x) = sigma I.
                driver: Driver::Abm { sigma: SIGMA },
                variant: Variant::FullF,
                rho_max: 5,
                closed_form: Some(closed_form_explicit),
            }
        }
    };
    Ok(cfg)
}
