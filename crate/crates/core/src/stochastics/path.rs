use super::key::RngKey;
use crate::error::{Error, Result};

/// Brownian increments `W_t - W_s` recorded at a strictly increasing set of
/// times after `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    start: f64,
    dim: usize,
    times: Vec<f64>,
    /// Row-major, `times.len() x dim`.
    values: Vec<f64>,
}

impl BrownianPath {
    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `W_{t_j} - W_s` for the `j`-th recorded time.
    pub fn increment(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    /// Index of `t` among the recorded times (exact match).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times
            .binary_search_by(|probe| probe.total_cmp(&t))
            .ok()
    }
}

/// Samples `W_t - W_s` at `times`, consuming `times.len() * dim` normals from
/// `key`'s stream in time-major order. Restricting `times` to a prefix
/// leaves the earlier values unchanged.
pub fn sample_brownian_path(
    key: &RngKey,
    s: f64,
    times: &[f64],
    dim: usize,
) -> Result<BrownianPath> {
    if dim == 0 {
        return Err(Error::contract("Brownian path dimension must be positive"));
    }
    let mut prev = s;
    for &t in times {
        if !(t > prev) {
            return Err(Error::contract(format!(
                "path times must be strictly increasing and after s={s}, got {times:?}"
            )));
        }
        prev = t;
    }
    let mut values = vec![0.0; times.len() * dim];
    fill_increments(key, s, times, dim, &mut values);
    Ok(BrownianPath {
        start: s,
        dim,
        times: times.to_vec(),
        values,
    })
}

/// Unchecked kernel behind [`sample_brownian_path`]; `out` must hold
/// `times.len() * dim` entries.
pub(crate) fn fill_increments(key: &RngKey, s: f64, times: &[f64], dim: usize, out: &mut [f64]) {
    let mut stream = key.stream();
    let mut prev_t = s;
    for (j, &t) in times.iter().enumerate() {
        let scale = (t - prev_t).sqrt();
        let (before, row) = out.split_at_mut(j * dim);
        let row = &mut row[..dim];
        if j == 0 {
            for w in row.iter_mut() {
                *w = scale * stream.next_normal();
            }
        } else {
            let last = &before[(j - 1) * dim..];
            for (w, &p) in row.iter_mut().zip(last) {
                *w = p + scale * stream.next_normal();
            }
        }
        prev_t = t;
    }
}
