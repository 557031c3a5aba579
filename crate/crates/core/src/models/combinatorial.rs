//! Combinatorial central limit theorem: `W = Σᵢ a_{iπ(i)} / σ` for a uniform
//! random permutation `π` and a doubly centered array `a`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dist::ExactDistribution;
use crate::error::{ensure_finite, Error, Result};
use crate::models::BandReport;
use crate::rng::parallel_streams;
use crate::stein::fit_constant;
use crate::stein::{zero_bias_band, AtomPolicy, RatioTable, SteinBudget};

/// Largest `n` whose `n!` permutations are enumerated.
pub const MAX_EXACT_N: usize = 9;

const ZERO_SUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombArray {
    n: usize,
    /// Row-major entries.
    a: Vec<f64>,
    c0: f64,
    sigma: f64,
}

impl CombArray {
    /// Checks the zero row and column sums and computes
    /// `σ² = Σᵢⱼ a²ᵢⱼ / (n − 1)`.
    pub fn validate_and_sigma(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::domain(format!("array must be at least 2x2, got {n} rows")));
        }
        let mut a = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::domain(format!(
                    "array must be square: row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for &v in row {
                ensure_finite("array entry", v)?;
            }
            a.extend_from_slice(row);
        }
        let c0 = a.iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
        let tol = ZERO_SUM_TOL * c0.max(1.0);
        for i in 0..n {
            let s: f64 = (0..n).map(|j| a[i * n + j]).sum();
            if s.abs() > tol {
                return Err(Error::domain(format!("row {i} sums to {s}, not 0")));
            }
        }
        for j in 0..n {
            let s: f64 = (0..n).map(|i| a[i * n + j]).sum();
            if s.abs() > tol {
                return Err(Error::domain(format!("column {j} sums to {s}, not 0")));
            }
        }
        let ss: f64 = a.iter().map(|v| v * v).sum();
        if ss == 0.0 {
            return Err(Error::Degenerate("array is identically zero, so sigma = 0".into()));
        }
        let sigma = (ss / (n - 1) as f64).sqrt();
        Ok(CombArray { n, a, c0, sigma })
    }

    /// Reads `n` lines of `n` comma-separated numbers.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(',')
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::domain(format!("line {}: bad number {f:?}: {e}", lineno + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::validate_and_sigma(&rows)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    /// `Σᵢ a_{iπ(i)}`, unscaled.
    pub fn permutation_sum(&self, perm: &[usize]) -> f64 {
        perm.iter().enumerate().map(|(i, &j)| self.get(i, j)).sum()
    }

    /// Law of `W` by enumerating all `n!` permutations.
    pub fn exact_law(&self) -> Result<ExactDistribution> {
        if self.n > MAX_EXACT_N {
            return Err(Error::Resource {
                what: format!("enumerating {}! permutations (use the sampler)", self.n),
                cap: MAX_EXACT_N as u64,
            });
        }
        let n = self.n;
        let mut values = Vec::new();
        // One block per image of row 0; Heap's algorithm on the rest.
        for first in 0..n {
            let mut perm: Vec<usize> = std::iter::once(first).chain((0..n).filter(|&j| j != first)).collect();
            let m = n - 1;
            let mut c = vec![0usize; m];
            values.push(self.permutation_sum(&perm));
            let mut i = 0;
            while i < m {
                if c[i] < i {
                    let swap = if i % 2 == 0 { 0 } else { c[i] };
                    perm.swap(1 + swap, 1 + i);
                    values.push(self.permutation_sum(&perm));
                    c[i] += 1;
                    i = 0;
                } else {
                    c[i] = 0;
                    i += 1;
                }
            }
        }
        let sigma = self.sigma;
        ExactDistribution::from_log_weights(values.into_iter().map(|v| (v / sigma, 0.0)))
    }

    /// `count` draws of `W`, one uniform shuffle each.
    pub fn sample(&self, seed: u64, count: usize, workers: usize) -> Vec<f64> {
        parallel_streams(seed, count, workers, |rng, k, _| {
            let mut perm: Vec<usize> = (0..self.n).collect();
            (0..k)
                .map(|_| {
                    perm.shuffle(rng);
                    self.permutation_sum(&perm) / self.sigma
                })
                .collect()
        })
    }

    /// Zero-bias budget with `δ = 8c₀/σ`.
    pub fn budget(&self) -> SteinBudget {
        SteinBudget::zero_bias(self.delta()).expect("8c0/sigma is finite and nonnegative")
    }

    pub fn delta(&self) -> f64 {
        8.0 * self.c0 / self.sigma
    }

    /// Ratio table of the exact law under the zero-bias band.
    pub fn band_report(&self, grid: &[f64]) -> Result<BandReport> {
        let law = self.exact_law()?;
        let delta = self.delta();
        let cap = if delta > 0.0 {
            delta.powf(-1.0 / 3.0)
        } else {
            f64::INFINITY
        };
        let table = RatioTable::build(&law, grid, AtomPolicy::Midpoint, cap, |x| {
            let b = zero_bias_band(delta, x).expect("grid is validated");
            (b.upper - 1.0, false)
        })?;
        let fitted_constant = fit_constant(&table)?;
        Ok(BandReport {
            table,
            fitted_constant,
            rate: delta,
            cap,
        })
    }
}

/// Makes any square array doubly centered: subtract row means, then column
/// means.
pub fn double_center(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut a: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let m = r.iter().sum::<f64>() / r.len() as f64;
            r.iter().map(|v| v - m).collect()
        })
        .collect();
    for j in 0..n {
        let m = a.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        for r in &mut a {
            r[j] -= m;
        }
    }
    a
}
