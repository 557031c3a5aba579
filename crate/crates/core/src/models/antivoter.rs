//! Anti-voter model on the complete graph `K_n`, collapsed to the number `T`
//! of `+1` spins.
//!
//! A step picks a vertex `I` and a neighbor `J` uniformly and sets
//! `X_I = −X_J`. Only picks with `X_I = X_J` change anything, so `T` moves
//! down with probability `d_T` (two `+1`s) and up with probability `b_T`
//! (two `−1`s).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{logsumexp, ExactDistribution};
use crate::error::{Error, Result};
use crate::models::BandReport;
use crate::rng::parallel_streams;
use crate::stein::{ConditionalRow, Provenance, RemainderVariant, SteinBudget};

/// Identity residuals above this mean the kernel and the closed forms
/// disagree.
pub const INTEGRITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntiVoterChain {
    pub n: usize,
    /// `b_T = (n−T)(n−T−1) / (n(n−1))`, `T = 0..=n`
    pub birth: Vec<f64>,
    /// `d_T = T(T−1) / (n(n−1))`
    pub death: Vec<f64>,
    /// `(n² − 2n) / (2n − 3)`
    pub sigma2: f64,
    /// `2/n`
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntiVoterIdentities {
    /// `max_T |E(W−W′|T) − λW_T|`
    pub drift_residual: f64,
    /// `max_T |E(D|T) − 1 − (W_T² − 1)/(2(n−1))|`
    pub d_residual: f64,
    /// `|E_π(E(D|W) − 1)|`
    pub mean_d_residual: f64,
    pub rows: Vec<ConditionalRow>,
    pub budget: SteinBudget,
}

impl AntiVoterChain {
    pub fn transition_rates(n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::domain(format!("anti-voter needs n >= 4, got {n}")));
        }
        let nn = (n * (n - 1)) as f64;
        let birth = (0..=n)
            .map(|t| ((n - t) * (n - t).saturating_sub(1)) as f64 / nn)
            .collect();
        let death = (0..=n).map(|t| (t * t.saturating_sub(1)) as f64 / nn).collect();
        let nf = n as f64;
        Ok(AntiVoterChain {
            n,
            birth,
            death,
            sigma2: (nf * nf - 2.0 * nf) / (2.0 * nf - 3.0),
            lambda: 2.0 / nf,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// `W_T = (2T − n)/σ`
    pub fn w(&self, t: usize) -> f64 {
        (2.0 * t as f64 - self.n as f64) / self.sigma()
    }

    /// Stationary probabilities of `T = 0..=n`. The chain never returns to
    /// the two consensus states, so they carry no mass.
    pub fn stationary(&self) -> Vec<f64> {
        let n = self.n;
        let mut logw = vec![f64::NEG_INFINITY; n + 1];
        logw[1] = 0.0;
        for t in 1..n - 1 {
            logw[t + 1] = logw[t] + self.birth[t].ln() - self.death[t + 1].ln();
        }
        // Fold in the mirror image so rounding cannot break the symmetry.
        let sym: Vec<f64> = (0..=n)
            .map(|t| {
                let (a, b) = (logw[t], logw[n - t]);
                if a == f64::NEG_INFINITY {
                    a
                } else {
                    0.5 * (a + b)
                }
            })
            .collect();
        let z = logsumexp(&sym);
        sym.iter().map(|l| (l - z).exp()).collect()
    }

    /// `sup_T |(πP)(T) − π(T)|`
    pub fn stationarity_residual(&self) -> f64 {
        let pi = self.stationary();
        let n = self.n;
        (0..=n)
            .map(|t| {
                let mut v = pi[t] * (1.0 - self.birth[t] - self.death[t]);
                if t > 0 {
                    v += pi[t - 1] * self.birth[t - 1];
                }
                if t < n {
                    v += pi[t + 1] * self.death[t + 1];
                }
                (v - pi[t]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Stationary law of `W = (2T − n)/σ`.
    pub fn stationary_law(&self) -> Result<ExactDistribution> {
        let pi = self.stationary();
        ExactDistribution::from_weights(pi.iter().enumerate().map(|(t, &p)| (self.w(t), p)))
            .map(|d| d.with_meta(format!("antivoter n={}", self.n)))
    }

    /// Joint law of `(W, W′)` under stationarity, including lazy steps.
    #[allow(clippy::needless_range_loop)] // t is the state, not just an index
    pub fn pair_kernel(&self) -> Vec<(f64, f64, f64)> {
        let pi = self.stationary();
        let mut out = Vec::with_capacity(3 * self.n);
        for t in 0..=self.n {
            if pi[t] == 0.0 {
                continue;
            }
            let (b, d) = (self.birth[t], self.death[t]);
            let w = self.w(t);
            if b > 0.0 {
                out.push((w, self.w(t + 1), pi[t] * b));
            }
            if d > 0.0 {
                out.push((w, self.w(t - 1), pi[t] * d));
            }
            out.push((w, w, pi[t] * (1.0 - b - d)));
        }
        out
    }

    /// Checks `E(W−W′|W) = 2W/n` and
    /// `E(D|W) − 1 = (W² − 1)/(2(n−1))` state by state against the kernel,
    /// and returns the exact budget.
    #[allow(clippy::needless_range_loop)]
    pub fn exact_pair_identities(&self) -> Result<AntiVoterIdentities> {
        let (n, sigma) = (self.n as f64, self.sigma());
        let pi = self.stationary();
        let step = 2.0 / sigma;
        let mut drift_residual: f64 = 0.0;
        let mut d_residual: f64 = 0.0;
        let mut rows = Vec::new();
        let mut mean_d = 0.0;
        for t in 0..=self.n {
            let (b, d) = (self.birth[t], self.death[t]);
            let w = self.w(t);
            let drift = step * (d - b);
            let ed = step * step * (b + d) / (2.0 * self.lambda);
            drift_residual = drift_residual.max((drift - self.lambda * w).abs());
            d_residual = d_residual.max((ed - 1.0 - (w * w - 1.0) / (2.0 * (n - 1.0))).abs());
            if pi[t] > 0.0 {
                mean_d += pi[t] * (ed - 1.0);
                rows.push(ConditionalRow {
                    w,
                    mean_d: ed,
                    mean_r: 0.0,
                });
            }
        }
        let worst = drift_residual.max(d_residual);
        if worst > INTEGRITY_TOL {
            return Err(Error::integrity(format!(
                "anti-voter n={}: kernel disagrees with closed forms by {worst:e}",
                self.n
            )));
        }
        let delta1 = rows
            .iter()
            .map(|r| (r.mean_d - 1.0).abs() / (1.0 + r.w.abs()))
            .fold(0.0, f64::max);
        let theta = rows.iter().map(|r| r.mean_d).fold(1.0, f64::max);
        let budget = SteinBudget::new(
            2.0 / sigma,
            delta1,
            0.0,
            theta,
            None,
            RemainderVariant::RLinear,
            Provenance::Exact,
        )?;
        Ok(AntiVoterIdentities {
            drift_residual,
            d_residual,
            mean_d_residual: mean_d.abs(),
            rows,
            budget,
        })
    }

    /// `count` draws of `T`, `thin` steps apart after `burnin` steps, each
    /// worker starting from the balanced state.
    pub fn sample(&self, seed: u64, burnin: usize, thin: usize, count: usize, workers: usize) -> Vec<usize> {
        parallel_streams(seed, count, workers, |rng, k, _| {
            let mut t = self.n / 2;
            let mut step = |t: &mut usize| {
                let u: f64 = rng.gen();
                if u < self.birth[*t] {
                    *t += 1;
                } else if u < self.birth[*t] + self.death[*t] {
                    *t -= 1;
                }
            };
            for _ in 0..burnin {
                step(&mut t);
            }
            (0..k)
                .map(|_| {
                    for _ in 0..thin.max(1) {
                        step(&mut t);
                    }
                    t
                })
                .collect()
        })
    }
}

/// Ratio table of the stationary law with unit band `(1 + x³)/√n` on
/// `0 ≤ x ≤ n^{1/6}`.
pub fn band_report(n: usize, grid: &[f64]) -> Result<BandReport> {
    if n > 1_000_000 {
        return Err(Error::Resource {
            what: format!("anti-voter n={n}"),
            cap: 1_000_000,
        });
    }
    let chain = AntiVoterChain::transition_rates(n)?;
    let law = chain.stationary_law()?;
    let nf = n as f64;
    BandReport::from_rate(&law, grid, 1.0 / nf.sqrt(), nf.powf(1.0 / 6.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rates() {
        let c = AntiVoterChain::transition_rates(4).unwrap();
        assert_relative_eq!(c.birth[2], 1.0 / 6.0);
        assert_relative_eq!(c.death[2], 1.0 / 6.0);
        assert_eq!((c.death[4], c.birth[4]), (1.0, 0.0));
        assert_eq!((c.birth[0], c.death[0]), (1.0, 0.0));
        for t in 0..=4 {
            assert!(c.birth[t] + c.death[t] <= 1.0);
        }
        assert!(AntiVoterChain::transition_rates(3).is_err());
    }

    #[test]
    fn stationary_is_symmetric_with_the_right_variance() {
        let c = AntiVoterChain::transition_rates(10).unwrap();
        let pi = c.stationary();
        for t in 0..=10 {
            assert!((pi[t] - pi[10 - t]).abs() <= 1e-14);
        }
        let var: f64 = pi
            .iter()
            .enumerate()
            .map(|(t, p)| p * (2.0 * t as f64 - 10.0).powi(2))
            .sum();
        assert_relative_eq!(var, 80.0 / 17.0, max_relative = 1e-10);
        assert!(c.stationarity_residual() <= 1e-12);
        let m = c.stationary_law().unwrap().moments();
        assert!((m.variance - 1.0).abs() < 1e-10);
    }

    #[test]
    fn identities_hold() {
        let c = AntiVoterChain::transition_rates(10).unwrap();
        let r = c.exact_pair_identities().unwrap();
        assert!(r.drift_residual <= 1e-12 && r.d_residual <= 1e-12);
        assert!(r.mean_d_residual <= 1e-12);
        let mid = r.rows.iter().find(|row| row.w.abs() < 1e-12).unwrap();
        assert_relative_eq!(mid.mean_d - 1.0, -1.0 / 18.0, max_relative = 1e-12);
        assert_eq!(r.budget.delta2, 0.0);
    }

    #[test]
    fn beyond_cap_is_out_of_range() {
        let rep = band_report(100, &[0.0, 1.0, 3.0]).unwrap();
        assert!(rep.table.rows.last().unwrap().x > 100f64.powf(1.0 / 6.0));
        assert!(!rep.table.rows.last().unwrap().in_range);
        assert!(rep.fitted_constant.is_finite());
    }

    #[test]
    fn sampler_is_deterministic() {
        let c = AntiVoterChain::transition_rates(20).unwrap();
        let a = c.sample(1, 100, 20, 50, 3);
        assert_eq!(a, c.sample(1, 100, 20, 50, 3));
        assert!(a.iter().all(|&t| (1..20).contains(&t)));
    }
}
