//! Curie-Weiss model: `n` spins with Gibbs weight
//! `exp(β/n Σ_{i<j} σᵢσⱼ + βh Σ σᵢ)`, studied through the spin sum `S`.
//!
//! Everything lives on the `n + 1` values of `S = n − 2j`; the single-site
//! heat-bath chain on configurations collapses to a birth-death chain on `S`
//! because every site sees the same field.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{ln_binomial_row, logsumexp, ExactDistribution, KahanSum};
use crate::error::{Error, Result};
use crate::models::BandReport;
use crate::rng::parallel_streams;
use crate::stein::{Provenance, RemainderVariant, SteinBudget};

/// Largest system handled exactly.
pub const MAX_N: usize = 1_000_000;

const SUBDIVISIONS: usize = 128;
const BISECTION_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CwCase {
    /// One stable magnetization: `β < 1`, or `h ≠ 0`.
    Case1,
    /// Two symmetric stable magnetizations: `β > 1`, `h = 0`.
    Case2,
    /// Critical point `β = 1`, `h = 0`; the limit is not Gaussian.
    Case3,
}

/// Side of `S = 0` to condition on in the two-phase case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl std::str::FromStr for Sign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+" | "plus" => Ok(Sign::Plus),
            "-" | "minus" => Ok(Sign::Minus),
            _ => Err(Error::domain(format!("sign must be + or -, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwParams {
    pub n: usize,
    pub beta: f64,
    pub h: f64,
    pub case_id: CwCase,
    /// Reported magnetizations, increasing.
    pub roots: Vec<f64>,
}

fn fixed_point_gap(beta: f64, h: f64, m: f64) -> f64 {
    m - (beta * (m + h)).tanh()
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        if hi - lo <= BISECTION_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Roots of `m = tanh(β(m + h))` in `[−1, 1]` and the case they fall in.
pub fn solve_magnetization(beta: f64, h: f64) -> Result<(CwCase, Vec<f64>)> {
    if !(beta > 0.0) || !beta.is_finite() || !h.is_finite() {
        return Err(Error::domain(format!(
            "need beta > 0 and finite h, got beta={beta}, h={h}"
        )));
    }
    let g = |m: f64| fixed_point_gap(beta, h, m);
    if h == 0.0 {
        if beta == 1.0 {
            return Ok((CwCase::Case3, vec![0.0]));
        }
        if beta < 1.0 {
            return Ok((CwCase::Case1, vec![0.0]));
        }
        // g < 0 just right of 0 and g(1) > 0; the positive root is unique.
        let m2 = bisect(g, f64::MIN_POSITIVE, 1.0);
        return Ok((CwCase::Case2, vec![-m2, m2]));
    }
    let mut roots = Vec::new();
    let grid: Vec<f64> = (0..=SUBDIVISIONS)
        .map(|i| -1.0 + 2.0 * i as f64 / SUBDIVISIONS as f64)
        .collect();
    for w in grid.windows(2) {
        let (a, b) = (g(w[0]), g(w[1]));
        if a == 0.0 {
            roots.push(w[0]);
        } else if a * b < 0.0 {
            roots.push(bisect(g, w[0], w[1]));
        }
    }
    roots.retain(|&m| m * h >= 0.0);
    match roots.as_slice() {
        [m] => Ok((CwCase::Case1, vec![*m])),
        _ => Err(Error::integrity(format!(
            "expected one magnetization with m*h >= 0 for beta={beta}, h={h}, found {roots:?}"
        ))),
    }
}

/// Flip probability of a `+1` site (`A`) and of a `−1` site (`B`) when the
/// spin sum is `s`.
fn flip_probs(n: f64, beta: f64, h: f64, s: f64) -> (f64, f64) {
    let field_plus = beta * (s - 1.0) / n + beta * h;
    let field_minus = beta * (s + 1.0) / n + beta * h;
    let a = 1.0 / (1.0 + (2.0 * field_plus).exp());
    let b = 1.0 / (1.0 + (-2.0 * field_minus).exp());
    (a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlauberKernel {
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
}

/// A conditioned, standardized and truncated law with its bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionedLaw {
    /// Law of `W` on the window.
    pub law: ExactDistribution,
    pub m: f64,
    pub sigma: f64,
    /// Probability of `S = 0`, excluded from both sides in the two-phase case.
    pub zero_atom_mass: f64,
    /// `max |E(R|W)|/(1 + W²)` over the basin.
    pub basin_delta2: f64,
    /// Window `|W| ≤ c₁√n`.
    pub c1: f64,
    /// Mass of the basin outside the window.
    pub truncated_mass: f64,
    /// `−ln(truncated_mass)/n`, infinite when nothing is cut.
    pub decay_rate: f64,
    /// Budget of the basin's exchangeable pair over the window states.
    pub budget: SteinBudget,
}

impl CwParams {
    pub fn new(n: usize, beta: f64, h: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!("Curie-Weiss needs n >= 2, got {n}")));
        }
        if n > MAX_N {
            return Err(Error::Resource {
                what: format!("Curie-Weiss n={n}"),
                cap: MAX_N as u64,
            });
        }
        let (case_id, roots) = solve_magnetization(beta, h)?;
        if case_id != CwCase::Case3 {
            for &m in &roots {
                if !(1.0 - (1.0 - m * m) * beta > 0.0) {
                    return Err(Error::domain(format!("1 - (1 - m^2) beta <= 0 at m = {m}")));
                }
            }
        }
        Ok(CwParams {
            n,
            beta,
            h,
            case_id,
            roots,
        })
    }

    /// `n(1 − m²)/(1 − (1 − m²)β)`
    pub fn sigma2_of(&self, m: f64) -> f64 {
        let v = 1.0 - m * m;
        self.n as f64 * v / (1.0 - v * self.beta)
    }

    /// `(1 − (1 − m²)β)/n`
    pub fn lambda_of(&self, m: f64) -> f64 {
        (1.0 - (1.0 - m * m) * self.beta) / self.n as f64
    }

    /// Magnetization matching the conditioning.
    pub fn root(&self, sign: Option<Sign>) -> Result<f64> {
        match (self.case_id, sign) {
            (CwCase::Case3, _) => Err(Error::domain(
                "beta = 1, h = 0 is critical: the limit law is not Gaussian",
            )),
            (CwCase::Case1, None) => Ok(self.roots[0]),
            (CwCase::Case1, Some(_)) => Err(Error::domain("a single-phase model takes no sign")),
            (CwCase::Case2, None) => Err(Error::domain("two-phase model needs sign + or -")),
            (CwCase::Case2, Some(Sign::Minus)) => Ok(self.roots[0]),
            (CwCase::Case2, Some(Sign::Plus)) => Ok(self.roots[1]),
        }
    }

    fn spin_sum(&self, j: usize) -> f64 {
        self.n as f64 - 2.0 * j as f64
    }

    /// Unnormalized log-weights of `S = n − 2j`, `j = 0..=n`.
    fn log_weights(&self) -> Vec<f64> {
        let n = self.n as f64;
        ln_binomial_row(self.n)
            .iter()
            .enumerate()
            .map(|(j, lc)| {
                let s = self.spin_sum(j);
                lc + self.beta * (s * s - n) / (2.0 * n) + self.beta * self.h * s
            })
            .collect()
    }

    /// Probabilities of `S = n − 2j`, `j = 0..=n`.
    pub fn spin_sum_probs(&self) -> Vec<f64> {
        let lw = self.log_weights();
        let z = logsumexp(&lw);
        lw.iter().map(|l| (l - z).exp()).collect()
    }

    pub fn exact_spin_sum_law(&self) -> Result<ExactDistribution> {
        let lw = self.log_weights();
        ExactDistribution::from_log_weights(lw.iter().enumerate().map(|(j, &l)| (self.spin_sum(j), l)))
    }

    /// Down and up probabilities of the collapsed heat-bath chain at every
    /// `S = n − 2j`.
    pub fn transition_probs(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n as f64;
        (0..=self.n)
            .map(|j| {
                let s = self.spin_sum(j);
                let (a, b) = flip_probs(n, self.beta, self.h, s);
                ((n + s) / (2.0 * n) * a, (n - s) / (2.0 * n) * b)
            })
            .unzip()
    }

    /// `sup_S |(πK)(S) − π(S)|` for the collapsed chain.
    pub fn stationarity_residual(&self) -> f64 {
        let pi = self.spin_sum_probs();
        let (down, up) = self.transition_probs();
        let mut worst: f64 = 0.0;
        for j in 0..=self.n {
            let mut acc = KahanSum::default();
            acc.add(pi[j] * (1.0 - down[j] - up[j]));
            if j > 0 {
                acc.add(pi[j - 1] * down[j - 1]);
            }
            if j < self.n {
                acc.add(pi[j + 1] * up[j + 1]);
            }
            worst = worst.max((acc.value() - pi[j]).abs());
        }
        worst
    }

    /// `A(w)`, `B(w)` and `λ` at `S = nm + σw`.
    pub fn glauber_kernel(&self, sign: Option<Sign>, w: f64) -> Result<GlauberKernel> {
        let m = self.root(sign)?;
        if !w.is_finite() {
            return Err(Error::domain(format!("w must be finite, got {w}")));
        }
        let n = self.n as f64;
        let s = n * m + self.sigma2_of(m).sqrt() * w;
        let (a, b) = flip_probs(n, self.beta, self.h, s);
        Ok(GlauberKernel {
            a,
            b,
            lambda: self.lambda_of(m),
        })
    }

    /// Indices `j` of the basin selected by `sign`.
    fn basin(&self, sign: Option<Sign>) -> Result<Vec<usize>> {
        self.root(sign)?;
        Ok((0..=self.n)
            .filter(|&j| {
                let s = self.spin_sum(j);
                match sign {
                    None => true,
                    Some(Sign::Plus) => s > 0.0,
                    Some(Sign::Minus) => s < 0.0,
                }
            })
            .collect())
    }

    /// Conditional `E(D|S)` and `E(R|S)` for the heat-bath pair restricted to
    /// the contiguous index range `states`; moves leaving it are rejected.
    fn conditional_terms(&self, states: &[usize], m: f64) -> Vec<(f64, f64, f64)> {
        let (down, up) = self.transition_probs();
        let n = self.n as f64;
        let sigma = self.sigma2_of(m).sqrt();
        let lambda = self.lambda_of(m);
        let (first, last) = (states[0], *states.last().unwrap());
        let step = 2.0 / sigma;
        states
            .iter()
            .map(|&j| {
                let w = (self.spin_sum(j) - n * m) / sigma;
                let p_down = if j < last { down[j] } else { 0.0 };
                let p_up = if j > first { up[j] } else { 0.0 };
                let drift = step * (p_down - p_up);
                let ed = step * step * (p_down + p_up) / (2.0 * lambda);
                let er = w - drift / lambda;
                (w, ed, er)
            })
            .collect()
    }

    /// Law of `W = (S − nm)/σ(m)` on the phase picked by `sign`, cut to the
    /// window where the quadratic remainder bound has `δ₂|W| ≤ 1/2`.
    pub fn conditional_standardized_law(&self, sign: Option<Sign>) -> Result<ConditionedLaw> {
        let m = self.root(sign)?;
        let n = self.n as f64;
        let sigma = self.sigma2_of(m).sqrt();
        let pi = self.spin_sum_probs();
        let zero_atom_mass = if self.case_id == CwCase::Case2 && self.n.is_multiple_of(2) {
            pi[self.n / 2]
        } else {
            0.0
        };
        let basin = self.basin(sign)?;
        let basin_terms = self.conditional_terms(&basin, m);
        let basin_delta2 = basin_terms
            .iter()
            .map(|&(w, _, er)| er.abs() / (1.0 + w * w))
            .fold(0.0, f64::max);
        let half_width = if basin_delta2 > 0.0 {
            0.5 / basin_delta2
        } else {
            f64::INFINITY
        };
        let window: Vec<usize> = basin
            .iter()
            .copied()
            .filter(|&j| ((self.spin_sum(j) - n * m) / sigma).abs() <= half_width)
            .collect();
        if window.is_empty() {
            return Err(Error::Degenerate("truncation window holds no states".into()));
        }
        let basin_mass: f64 = basin.iter().map(|&j| pi[j]).sum();
        let kept: f64 = window.iter().map(|&j| pi[j]).sum();
        let truncated_mass = ((basin_mass - kept) / basin_mass).max(0.0);
        let decay_rate = if truncated_mass > 0.0 {
            -truncated_mass.ln() / n
        } else {
            f64::INFINITY
        };

        // The window is bookkeeping, not a wall: the pair keeps the basin
        // kernel, evaluated on the window states.
        let terms: Vec<(f64, f64, f64)> = basin_terms
            .iter()
            .copied()
            .filter(|&(w, _, _)| w.abs() <= half_width)
            .collect();
        let mut delta1: f64 = 0.0;
        let mut delta2: f64 = 0.0;
        let mut theta: f64 = 1.0;
        for &(w, ed, er) in &terms {
            delta1 = delta1.max((ed - 1.0).abs() / (1.0 + w.abs()));
            delta2 = delta2.max(er.abs() / (1.0 + w * w));
            theta = theta.max(ed);
        }
        let alpha = terms.iter().map(|&(w, _, _)| delta2 * w.abs()).fold(0.0, f64::max);
        let budget = SteinBudget::new(
            2.0 / sigma,
            delta1,
            delta2,
            theta,
            Some(alpha),
            RemainderVariant::RQuadratic,
            Provenance::Exact,
        )?;
        let law = ExactDistribution::from_weights(window.iter().map(|&j| ((self.spin_sum(j) - n * m) / sigma, pi[j])))?
            .with_meta(format!("curieweiss n={} beta={} h={}", self.n, self.beta, self.h));
        Ok(ConditionedLaw {
            law,
            m,
            sigma,
            zero_atom_mass,
            basin_delta2,
            c1: half_width / n.sqrt(),
            truncated_mass,
            decay_rate,
            budget,
        })
    }

    /// Smallest `C` with `|A(w) + B(w) − 1| ≤ C/n` and the largest
    /// `n|A − B + tanh(β(m + h) + βσw/n)|` over the window.
    pub fn kernel_constants(&self, sign: Option<Sign>) -> Result<(f64, f64)> {
        let cl = self.conditional_standardized_law(sign)?;
        let n = self.n as f64;
        let mut c_sum: f64 = 0.0;
        let mut c_diff: f64 = 0.0;
        for &w in cl.law.support() {
            let k = self.glauber_kernel(sign, w)?;
            c_sum = c_sum.max(n * (k.a + k.b - 1.0).abs());
            let t = (self.beta * (cl.m + self.h) + self.beta * cl.sigma * w / n).tanh();
            c_diff = c_diff.max(n * (k.a - k.b + t).abs());
        }
        Ok((c_sum, c_diff))
    }

    /// Heat-bath chain on `S` from a uniformly random configuration; `count`
    /// values `thin` steps apart after `burnin` steps.
    pub fn glauber_sampler(
        &self,
        seed: u64,
        burnin: usize,
        thin: usize,
        count: usize,
        workers: usize,
    ) -> Result<Vec<i64>> {
        if self.case_id == CwCase::Case3 {
            return Err(Error::domain("the sampler is not defined at the critical point"));
        }
        let (down, up) = self.transition_probs();
        let n = self.n;
        Ok(parallel_streams(seed, count, workers, |rng, k, _| {
            let mut j = (0..n).filter(|_| rng.gen::<bool>()).count();
            let mut step = |j: &mut usize| {
                let u: f64 = rng.gen();
                if u < down[*j] {
                    *j += 1;
                } else if u < down[*j] + up[*j] {
                    *j -= 1;
                }
            };
            for _ in 0..burnin {
                step(&mut j);
            }
            (0..k)
                .map(|_| {
                    for _ in 0..thin.max(1) {
                        step(&mut j);
                    }
                    n as i64 - 2 * j as i64
                })
                .collect()
        }))
    }

    /// Ratio table of the conditioned law with unit band `(1 + x³)/√n` on
    /// `0 ≤ x ≤ n^{1/6}`.
    pub fn band_report(&self, sign: Option<Sign>, grid: &[f64]) -> Result<BandReport> {
        let cl = self.conditional_standardized_law(sign)?;
        let n = self.n as f64;
        BandReport::from_rate(&cl.law, grid, 1.0 / n.sqrt(), n.powf(1.0 / 6.0))
    }
}
