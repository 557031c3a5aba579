//! Brute-force oracles shared by the oracle tests and the acceptance run.
#![allow(dead_code)]

use mdlab::models::antivoter::AntiVoterChain;
use mdlab::models::binarycode::{popcount_counts, reflected_code_value, reflected_counts};
use mdlab::models::curieweiss::CwParams;

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Variance of `Σ a_{iπ(i)}` over all `n!` permutations, in lexicographic order.
pub fn enumerate_variance(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let (mut s1, mut s2, mut count) = (0.0, 0.0, 0.0);
    loop {
        let v: f64 = (0..n).map(|i| a[i][perm[i]]).sum();
        s1 += v;
        s2 += v * v;
        count += 1.0;
        let Some(i) = (0..n - 1).rev().find(|&i| perm[i] < perm[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| perm[j] > perm[i]).unwrap();
        perm.swap(i, j);
        perm[i + 1..].reverse();
    }
    let mean = s1 / count;
    s2 / count - mean * mean
}

/// TV between the detailed-balance law and `200 n²` steps of the chain
/// started from `T = n/2`.
pub fn antivoter_power_tv(n: usize) -> f64 {
    let chain = AntiVoterChain::transition_rates(n).unwrap();
    let pi = chain.stationary();
    let mut v = vec![0.0; n + 1];
    v[n / 2] = 1.0;
    for _ in 0..200 * n * n {
        let mut next = vec![0.0; n + 1];
        for t in 0..=n {
            next[t] += v[t] * (1.0 - chain.birth[t] - chain.death[t]);
            if t < n {
                next[t + 1] += v[t] * chain.birth[t];
            }
            if t > 0 {
                next[t - 1] += v[t] * chain.death[t];
            }
        }
        v = next;
    }
    0.5 * v.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Largest relative error between the spin-sum law and a sum over all `2^n`
/// configurations; `None` when the supports differ.
pub fn curie_weiss_enumeration_error(n: usize, beta: f64, h: f64) -> Option<f64> {
    let law = CwParams::new(n, beta, h).unwrap().exact_spin_sum_law().unwrap();
    let mut weights = vec![0.0f64; n + 1];
    for cfg in 0u32..(1 << n) {
        let s = 2.0 * cfg.count_ones() as f64 - n as f64;
        // β/(2n) Σ_{i≠j} σ_i σ_j + βh Σ σ_i
        let energy = beta / (2.0 * n as f64) * (s * s - n as f64) + beta * h * s;
        weights[cfg.count_ones() as usize] += energy.exp();
    }
    let z: f64 = weights.iter().sum();
    if law.len() != n + 1 {
        return None;
    }
    let mut worst = 0.0f64;
    for (ones, w) in weights.iter().enumerate() {
        let s = 2.0 * ones as f64 - n as f64;
        if !law.support().contains(&s) {
            return None;
        }
        worst = worst.max(rel_err(law.prob_at(s), w / z));
    }
    Some(worst)
}

/// First `n ≤ limit` where a digit DP disagrees with running counts.
pub fn digit_dp_first_mismatch(limit: u64) -> Option<u64> {
    let mut pop = vec![0u128; 65];
    let mut refl = vec![0u128; 66];
    for n in 0..=limit {
        pop[n.count_ones() as usize] += 1;
        refl[reflected_code_value(n) as usize] += 1;
        if popcount_counts(n) != pop || reflected_counts(n) != refl {
            return Some(n);
        }
    }
    None
}

/// First `m ≤ m_max` where `c_{2m−1}(s) = c_{m−1}(s) + c_{m−1}(s−1)` fails.
pub fn halving_recursion_first_mismatch(counts: impl Fn(u64) -> Vec<u128>, m_max: u64) -> Option<u64> {
    (1..=m_max).find(|&m| {
        let small = counts(m - 1);
        let big = counts(2 * m - 1);
        let at = |s: usize| small.get(s).copied().unwrap_or(0);
        (0..big.len()).any(|s| big[s] != at(s) + if s > 0 { at(s - 1) } else { 0 })
    })
}
