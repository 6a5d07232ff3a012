//! Gauss–Legendre rules and the inverse-gamma node-count schedule.

use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};

const NEWTON_TOL: f64 = 1e-14;
const MAX_NEWTON: usize = 100;

/// Nodes and positive weights of an interpolatory rule on an open interval.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// `n`-point Gauss–Legendre rule on (-1, 1), nodes ascending.
pub fn gauss_legendre(n: usize) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(Error::contract(
            "Gauss-Legendre rule needs at least one node",
        ));
    }
    if n == 1 {
        return Ok(QuadratureRule {
            nodes: vec![0.0],
            weights: vec![2.0],
        });
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    // Roots are symmetric; find the positive half.
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut converged = false;
        for _ in 0..MAX_NEWTON {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= NEWTON_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::QuadratureNonConvergence { n });
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Maps a rule on (-1, 1) onto (s, t).
pub fn rescale(rule: &QuadratureRule, s: f64, t: f64) -> Result<QuadratureRule> {
    if !(s < t) {
        return Err(Error::contract(format!(
            "rescale needs s < T, got s={s}, T={t}"
        )));
    }
    let half = 0.5 * (t - s);
    Ok(QuadratureRule {
        nodes: rule.nodes.iter().map(|x| s + half * (x + 1.0)).collect(),
        weights: rule.weights.iter().map(|w| w * half).collect(),
    })
}

/// Increasing inverse of the gamma function on `[2, inf)`: the `x >= 2` with
/// `Gamma(x) = y`. Values `y <= 1` clamp to 2.
pub fn inverse_gamma(y: f64) -> Result<f64> {
    if !(y >= 0.0) || y.is_infinite() {
        return Err(Error::contract(format!(
            "inverse_gamma needs finite y >= 0, got {y}"
        )));
    }
    if y <= 1.0 {
        return Ok(2.0);
    }
    let target = y.ln();
    let h = |x: f64| ln_gamma(x) - target;
    let mut lo = 2.0;
    let mut hi = 3.0;
    while h(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    // Safeguarded Newton; ln Gamma is convex and increasing on [2, inf).
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = h(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - fx / digamma(x);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() < 1e-13 * x.max(1.0) || hi - lo < 1e-13 {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Round half away from zero, then convert.
pub(crate) fn round_count(v: f64) -> u64 {
    v.round() as u64
}

/// Node count of the quadrature rule used between levels `k >= l`:
/// `round(inverse_gamma(rho^((k-l)/2)))`, never fewer than 2.
pub fn node_count(k: u32, l: u32, rho: u32) -> usize {
    assert!(k >= l, "node_count needs k >= l");
    assert!(rho >= 1, "node_count needs rho >= 1");
    let y = f64::from(rho).powf(f64::from(k - l) / 2.0);
    let phi = inverse_gamma(y).expect("rho^((k-l)/2) is finite and >= 1");
    round_count(phi).max(2) as usize
}
