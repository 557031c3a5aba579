//! Digit sums of a uniform integer `X ∈ {0, …, n}` under binary code
//! systems.
//!
//! A code system is a labeled binary tree: the integer `x` is the node
//! reached from the root by reading its binary digits, and `S(x)` is the
//! sum of labels on that path. Nodes are addressed heap-style, node `y`
//! having children `2y` and `2y + 1`; node `0` is the root and its own left
//! child, which is exactly the self-similarity of the leftmost subtree.
//!
//! Two systems are extreme in the stochastic order: the plain binary
//! expansion (`S = popcount`) and the reflected system, which labels every
//! left sibling 1 except on the leftmost path.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::ExactDistribution;
use crate::error::{Error, Result};
use crate::models::BandReport;
use crate::rng::parallel_streams;
use crate::stein::{ConditionalRow, Provenance, RemainderVariant, SteinBudget};

/// Identity residuals above this mean the kernel and the closed forms
/// disagree.
pub const INTEGRITY_TOL: f64 = 1e-8;

/// Deepest custom tree that is stored explicitly.
pub const MAX_TREE_DEPTH: u32 = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodeSystem {
    #[default]
    BinaryExpansion,
    ReflectedExtreme,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeInstance {
    pub n: u64,
    pub k: u32,
    pub system: CodeSystem,
    pub lambda: f64,
}

impl CodeInstance {
    pub fn new(n: u64, system: CodeSystem) -> Result<Self> {
        if n < 1 {
            return Err(Error::domain("binary codes need n >= 1"));
        }
        let k = bit_length(n);
        Ok(CodeInstance {
            n,
            k,
            system,
            lambda: 2.0 / k as f64,
        })
    }

    /// `(s − k/2) / √(k/4)`
    pub fn w(&self, s: f64) -> f64 {
        let k = self.k as f64;
        (s - 0.5 * k) / (0.25 * k).sqrt()
    }

    /// Law of the digit sum under this instance's system.
    pub fn law(&self) -> Result<ExactDistribution> {
        match self.system {
            CodeSystem::BinaryExpansion => digit_sum_law(self.n),
            CodeSystem::ReflectedExtreme => reflected_law(self.n),
        }
    }

    /// Code sum of one integer.
    pub fn code_value(&self, x: u64) -> u32 {
        match self.system {
            CodeSystem::BinaryExpansion => x.count_ones(),
            CodeSystem::ReflectedExtreme => reflected_code_value(x),
        }
    }

    /// `count` code sums of uniform draws from `{0, …, n}`.
    pub fn sample(&self, seed: u64, count: usize, workers: usize) -> Vec<u32> {
        parallel_streams(seed, count, workers, |rng, k, _| {
            (0..k).map(|_| self.code_value(rng.gen_range(0..=self.n))).collect()
        })
    }

    /// Law of `W̃ = (S̃ − k/2)/√(k/4)`.
    pub fn standardized_law(&self) -> Result<ExactDistribution> {
        self.law()?.map_support(|s| self.w(s))
    }
}

pub fn bit_length(n: u64) -> u32 {
    64 - n.leading_zeros()
}

fn binomial_table() -> Vec<Vec<u128>> {
    let mut c = vec![vec![0u128; 65]; 65];
    for i in 0..65 {
        c[i][0] = 1;
        for j in 1..=i {
            c[i][j] = c[i - 1][j - 1] + c[i - 1][j];
        }
    }
    c
}

/// `counts[s]` = number of `y ∈ [0, v]` with `popcount(y) = s`, for
/// `s = 0..=64`.
pub fn popcount_counts(v: u64) -> Vec<u128> {
    popcount_counts_with(&binomial_table(), v)
}

fn popcount_counts_with(c: &[Vec<u128>], v: u64) -> Vec<u128> {
    let mut counts = vec![0u128; 65];
    let mut ones = 0;
    for pos in (0..64).rev() {
        if v >> pos & 1 == 1 {
            // Same prefix, a 0 here, anything below.
            for j in 0..=pos {
                counts[ones + j] += c[pos][j];
            }
            ones += 1;
        }
    }
    counts[ones] += 1;
    counts
}

fn law_from_counts(counts: &[u128]) -> Result<ExactDistribution> {
    ExactDistribution::from_weights(
        counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(s, &c)| (s as f64, c as f64)),
    )
}

/// Law of `popcount(X)` for `X` uniform on `{0, …, n}`.
pub fn digit_sum_law(n: u64) -> Result<ExactDistribution> {
    law_from_counts(&popcount_counts(n))
}

/// `S̄(x)`: on the reflected tree the path to `x ≥ 1` collects the label 1
/// at node 1 and one more for every 0 digit below the leading one.
pub fn reflected_code_value(x: u64) -> u32 {
    if x == 0 {
        0
    } else {
        1 + bit_length(x) - x.count_ones()
    }
}

/// Counts of `S̄(X) = s` over `X ∈ [0, n]`, grouped by bit length.
pub fn reflected_counts(n: u64) -> Vec<u128> {
    let c = binomial_table();
    let k = bit_length(n);
    let mut out = vec![0u128; 66];
    out[0] += 1;
    for len in 1..=k {
        let lo = 1u64 << (len - 1);
        let hi = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
        let by_pop: Vec<u128> = if hi <= n {
            // Full block: leading 1 and `len − 1` free digits.
            let mut v = vec![0u128; 65];
            let len = len as usize;
            v[1..=len].copy_from_slice(&c[len - 1][..len]);
            v
        } else {
            let all = popcount_counts_with(&c, n);
            let below = popcount_counts_with(&c, lo - 1);
            all.iter().zip(&below).map(|(a, b)| a - b).collect()
        };
        for (pop, &cnt) in by_pop.iter().enumerate() {
            if cnt > 0 {
                out[1 + len as usize - pop] += cnt;
            }
        }
    }
    out
}

/// Law of `S̄(X)` for `X` uniform on `{0, …, n}`.
pub fn reflected_law(n: u64) -> Result<ExactDistribution> {
    law_from_counts(&reflected_counts(n))
}

/// Position `i ∈ 1..=k` counted from the most significant digit.
fn place(k: u32, i: u32) -> u64 {
    1u64 << (k - i)
}

fn check_point(n: u64, x: u64) -> Result<()> {
    if n < 1 || x > n {
        return Err(Error::domain(format!("need 0 <= x <= n with n >= 1, got x={x}, n={n}")));
    }
    Ok(())
}

/// One move of the exchangeable pair at digit `i`: a 1 becomes 0, a 0
/// becomes 1 unless that would exceed `n`.
pub fn exchangeable_step(n: u64, x: u64, i: u32) -> Result<u64> {
    check_point(n, x)?;
    let k = bit_length(n);
    if i < 1 || i > k {
        return Err(Error::domain(format!("digit index {i} outside 1..={k}")));
    }
    let p = place(k, i);
    Ok(if x & p != 0 {
        x - p
    } else if x + p <= n {
        x + p
    } else {
        x
    })
}

/// Number of 0 digits of `x` whose flip to 1 would exceed `n`.
pub fn q_statistic(n: u64, x: u64) -> Result<u32> {
    check_point(n, x)?;
    let k = bit_length(n);
    Ok((1..=k)
        .filter(|&i| {
            let p = place(k, i);
            x & p == 0 && x + p > n
        })
        .count() as u32)
}

/// `Σ_{x ≤ n, S(x) = s} Q(x)` for every `s`, without visiting each `x`.
///
/// For `x < n`, let `p` be the first digit where `x` has 0 and `n` has 1.
/// The zeros of `x` above `p` are the zeros of `n` there and are all
/// blocked; the zero at `p` is blocked iff the digits of `x` below `p`
/// exceed those of `n`; zeros below `p` are free.
pub fn q_sums_by_digit_sum(n: u64) -> Vec<u128> {
    let c = binomial_table();
    let k = bit_length(n);
    let mut sums = vec![0u128; 65];
    let mut prefix_ones = 0usize;
    for b in (0..k).rev() {
        if n >> b & 1 == 0 {
            continue;
        }
        let low = b as usize;
        let zeros_above = (k - 1 - b) as u128 - prefix_ones as u128;
        let n_low = n & ((1u64 << b) - 1);
        let le = popcount_counts_with(&c, n_low);
        for j in 0..=low {
            let cnt = c[low][j];
            sums[prefix_ones + j] += cnt * zeros_above + (cnt - le[j]);
        }
        prefix_ones += 1;
    }
    sums[prefix_ones] += (k as usize - prefix_ones) as u128;
    sums
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeIdentityReport {
    pub n: u64,
    pub k: u32,
    /// `max_S |E(W−W′|S) − λ(W + E(Q|S)/√k)|`
    pub drift_residual: f64,
    /// `max_S |E(D|S) − 1 + E(Q|S)/k|`
    pub d_residual: f64,
    /// `max_S E(Q|S)/(1 + |W_S|)`
    pub lemma_constant: f64,
    pub rows: Vec<ConditionalRow>,
    pub budget: SteinBudget,
}

/// Checks both pair identities for every digit sum, comparing the kernel
/// (move counting) with the `Q` statistic (digit DP).
pub fn pair_identities_report(n: u64) -> Result<CodeIdentityReport> {
    pair_identities_report_perturbed(n, 0.0)
}

/// As [`pair_identities_report`], with `perturbation` added to the
/// kernel-side drift; used to exercise the integrity failure path.
pub fn pair_identities_report_perturbed(n: u64, perturbation: f64) -> Result<CodeIdentityReport> {
    if n > 1 << 22 {
        return Err(Error::Resource {
            what: format!("pair identities for n={n}"),
            cap: 1 << 22,
        });
    }
    let inst = CodeInstance::new(n, CodeSystem::BinaryExpansion)?;
    let (k, kf) = (inst.k as usize, inst.k as f64);
    let cnt = popcount_counts(n);
    let qsum = q_sums_by_digit_sum(n);
    let half_sqrt_k = (0.25 * kf).sqrt();
    let mut drift_residual: f64 = 0.0;
    let mut d_residual: f64 = 0.0;
    let mut rows = Vec::new();
    let (mut delta1, mut delta2, mut lemma, mut theta) = (0.0_f64, 0.0_f64, 0.0_f64, 1.0_f64);
    for s in 0..=k {
        if cnt[s] == 0 {
            continue;
        }
        let c = cnt[s] as f64;
        let up = (s + 1) as f64 * cnt[s + 1] as f64;
        let down = s as f64 * c;
        let w = inst.w(s as f64);
        let drift = (down - up) / (kf * c) / half_sqrt_k + perturbation;
        let ed = (down + up) / (kf * c);
        let eq = qsum[s] as f64 / c;
        drift_residual = drift_residual.max((drift - inst.lambda * (w + eq / kf.sqrt())).abs());
        d_residual = d_residual.max((ed - 1.0 + eq / kf).abs());
        let lin = 1.0 + w.abs();
        delta1 = delta1.max(eq / kf / lin);
        delta2 = delta2.max(eq / kf.sqrt() / lin);
        lemma = lemma.max(eq / lin);
        theta = theta.max(ed);
        rows.push(ConditionalRow {
            w,
            mean_d: ed,
            mean_r: -eq / kf.sqrt(),
        });
    }
    let worst = drift_residual.max(d_residual);
    if worst > INTEGRITY_TOL {
        return Err(Error::integrity(format!(
            "binary code n={n}: kernel disagrees with the Q identities by {worst:e}"
        )));
    }
    let budget = SteinBudget::new(
        2.0 / kf.sqrt(),
        delta1,
        delta2,
        theta,
        None,
        RemainderVariant::RLinear,
        Provenance::Exact,
    )?;
    Ok(CodeIdentityReport {
        n,
        k: inst.k,
        drift_residual,
        d_residual,
        lemma_constant: lemma,
        rows,
        budget,
    })
}

/// Joint law of `(W, W′)` with `X` and the digit index uniform.
pub fn pair_kernel(n: u64) -> Result<Vec<(f64, f64, f64)>> {
    if n > 1 << 20 {
        return Err(Error::Resource {
            what: format!("explicit pair kernel for n={n}"),
            cap: 1 << 20,
        });
    }
    let inst = CodeInstance::new(n, CodeSystem::BinaryExpansion)?;
    let p = 1.0 / ((n + 1) as f64 * inst.k as f64);
    let mut out = Vec::with_capacity((n as usize + 1) * inst.k as usize);
    for x in 0..=n {
        let w = inst.w(x.count_ones() as f64);
        for i in 1..=inst.k {
            let y = exchangeable_step(n, x, i)?;
            out.push((w, inst.w(y.count_ones() as f64), p));
        }
    }
    Ok(out)
}

/// Ratio table of `W̃` with unit band `(1 + x³)/√k` on `0 ≤ x ≤ k^{1/6}`.
pub fn band_report(n: u64, system: CodeSystem, grid: &[f64]) -> Result<BandReport> {
    if n < 2 {
        return Err(Error::domain("band report needs n >= 2"));
    }
    let inst = CodeInstance::new(n, system)?;
    let law = inst.standardized_law()?;
    let k = inst.k as f64;
    BandReport::from_rate(&law, grid, 1.0 / k.sqrt(), k.powf(1.0 / 6.0))
}

/// An explicitly stored labeled tree, level by level: `labels[j][y]` is the
/// label of the `y`-th node on level `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeLabeling {
    labels: Vec<Vec<u8>>,
}

impl TreeLabeling {
    /// Validates the three tree conditions: the root is 0, siblings differ,
    /// and the subtree under the leftmost child repeats the tree.
    pub fn new(labels: Vec<Vec<u8>>) -> Result<Self> {
        if labels.is_empty() || labels.len() > MAX_TREE_DEPTH as usize + 1 {
            return Err(Error::domain(format!(
                "tree depth must be 0..={MAX_TREE_DEPTH}, got {}",
                labels.len() as i64 - 1
            )));
        }
        for (j, level) in labels.iter().enumerate() {
            if level.len() != 1 << j {
                return Err(Error::domain(format!(
                    "level {j} has {} labels, expected {}",
                    level.len(),
                    1 << j
                )));
            }
            if level.iter().any(|&b| b > 1) {
                return Err(Error::domain(format!("level {j} has a label other than 0/1")));
            }
        }
        if labels[0][0] != 0 {
            return Err(Error::domain("root must be labeled 0"));
        }
        for (j, level) in labels.iter().enumerate().skip(1) {
            if let Some(y) = (0..level.len() / 2).find(|&y| level[2 * y] == level[2 * y + 1]) {
                return Err(Error::domain(format!(
                    "siblings {} and {} on level {j} share a label",
                    2 * y,
                    2 * y + 1
                )));
            }
            let prev = &labels[j - 1];
            if let Some(y) = (0..prev.len()).find(|&y| level[y] != prev[y]) {
                return Err(Error::domain(format!(
                    "leftmost subtree differs from the tree at level {j}, node {y}"
                )));
            }
        }
        Ok(TreeLabeling { labels })
    }

    /// Builds a tree from a labeling of heap-addressed nodes.
    pub fn from_node_labels(depth: u32, label: impl Fn(u64) -> u8) -> Result<Self> {
        if depth > MAX_TREE_DEPTH {
            return Err(Error::domain(format!("tree depth {depth} exceeds {MAX_TREE_DEPTH}")));
        }
        Self::new((0..=depth).map(|j| (0..1u64 << j).map(&label).collect()).collect())
    }

    pub fn binary_expansion(depth: u32) -> Result<Self> {
        Self::from_node_labels(depth, |y| (y & 1) as u8)
    }

    pub fn reflected_extreme(depth: u32) -> Result<Self> {
        Self::from_node_labels(depth, |y| match y {
            0 => 0,
            1 => 1,
            _ => u8::from(y % 2 == 0),
        })
    }

    pub fn depth(&self) -> u32 {
        self.labels.len() as u32 - 1
    }

    /// Sum of labels along the path from the root to `x`.
    pub fn code_sum(&self, x: u64) -> Result<u32> {
        let depth = self.depth();
        if bit_length(x) > depth {
            return Err(Error::domain(format!("{x} is deeper than the stored tree ({depth})")));
        }
        Ok((0..=depth)
            .map(|j| self.labels[j as usize][(x >> (depth - j)) as usize] as u32)
            .sum())
    }

    /// Law of the code sum for `X` uniform on `{0, …, n}`, by walking the
    /// tree for every `x`.
    pub fn law(&self, n: u64) -> Result<ExactDistribution> {
        let mut counts = vec![0u128; self.depth() as usize + 2];
        for x in 0..=n {
            counts[self.code_sum(x)? as usize] += 1;
        }
        law_from_counts(&counts)
    }
}
