//! Finite-support distributions held as sorted atoms with log-probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Atoms closer than this fraction of the largest `|support|` are merged.
pub const MERGE_RTOL: f64 = 1e-12;

/// Default cap on `|support(a)| · |support(b)|` for [`ExactDistribution::convolve`].
pub const DEFAULT_CONVOLUTION_CAP: u64 = 10_000_000;

/// `ln Σ exp(v)`, `-∞` for an empty slice.
pub fn logsumexp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = v.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// `ln(e^a + e^b)`
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// `ln C(n, j)` for `j = 0..=n`.
pub fn ln_binomial_row(n: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    row.push(0.0);
    for j in 0..n {
        acc += ((n - j) as f64).ln() - ((j + 1) as f64).ln();
        row.push(acc);
    }
    // symmetric by construction; copy the left half over the right to kill drift
    for j in 0..=n / 2 {
        row[n - j] = row[j];
    }
    row
}

/// Mean and variance of a finite law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

impl Moments {
    pub fn is_degenerate(&self) -> bool {
        self.variance <= 0.0
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

#[derive(Deserialize)]
struct RawDistribution {
    support: Vec<f64>,
    logp: Vec<f64>,
    #[serde(default)]
    meta: Option<String>,
}

/// A probability law on finitely many points.
///
/// Invariants: `support` strictly increasing and finite, `logp` the same
/// length, `logsumexp(logp) = 0` to 1e-12.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct ExactDistribution {
    support: Vec<f64>,
    logp: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<String>,
}

impl TryFrom<RawDistribution> for ExactDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        let d = ExactDistribution {
            support: raw.support,
            logp: raw.logp,
            meta: raw.meta,
        };
        d.validate()?;
        Ok(d)
    }
}

impl ExactDistribution {
    /// Builds a law from `(atom, log-weight)` pairs in any order. Equal atoms
    /// are merged, weights need not be normalized.
    pub fn from_log_weights<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().filter(|&(_, lw)| lw > f64::NEG_INFINITY).collect();
        for &(x, lw) in &atoms {
            ensure_finite("support point", x)?;
            if lw.is_nan() || lw == f64::INFINITY {
                return Err(Error::domain(format!("bad log-weight {lw} at {x}")));
            }
        }
        if atoms.is_empty() {
            return Err(Error::domain("distribution has no atoms of positive mass"));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let scale = atoms
            .iter()
            .map(|a| a.0.abs())
            .fold(0.0_f64, f64::max)
            .max(f64::MIN_POSITIVE);
        let tol = MERGE_RTOL * scale;

        let mut support: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut logp: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut i = 0;
        while i < atoms.len() {
            let anchor = atoms[i].0;
            let mut j = i + 1;
            while j < atoms.len() && atoms[j].0 - anchor <= tol {
                j += 1;
            }
            let lw: Vec<f64> = atoms[i..j].iter().map(|a| a.1).collect();
            support.push(anchor);
            logp.push(logsumexp(&lw));
            i = j;
        }
        let z = logsumexp(&logp);
        for l in &mut logp {
            *l -= z;
        }
        Ok(ExactDistribution {
            support,
            logp,
            meta: None,
        })
    }

    /// Empirical law of a sample: every draw carries weight one.
    pub fn empirical(samples: &[f64]) -> Result<Self> {
        Self::from_log_weights(samples.iter().map(|&x| (x, 0.0)))
    }

    /// Builds a law from `(atom, weight)` pairs with nonnegative weights.
    pub fn from_weights<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut pairs = Vec::new();
        for (x, w) in atoms {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::domain(format!(
                    "weight {w} at {x} is not a finite nonnegative number"
                )));
            }
            pairs.push((x, w.ln()));
        }
        Self::from_log_weights(pairs)
    }

    pub fn point_mass(x: f64) -> Result<Self> {
        Self::from_log_weights([(x, 0.0)])
    }

    /// Uniform law on the given points.
    pub fn uniform(points: &[f64]) -> Result<Self> {
        Self::from_log_weights(points.iter().map(|&x| (x, 0.0)))
    }

    /// Binomial(k, p) on `{0, …, k}`.
    pub fn binomial(k: usize, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("binomial p must lie in [0,1], got {p}")));
        }
        let row = ln_binomial_row(k);
        let (lp, lq) = (p.ln(), (1.0 - p).ln());
        Self::from_log_weights((0..=k).map(|j| {
            let lw = row[j] + if j > 0 { j as f64 * lp } else { 0.0 } + if j < k { (k - j) as f64 * lq } else { 0.0 };
            (j as f64, lw)
        }))
    }

    pub fn validate(&self) -> Result<()> {
        if self.support.is_empty() || self.support.len() != self.logp.len() {
            return Err(Error::domain(format!(
                "support/logp lengths {}/{} must match and be nonzero",
                self.support.len(),
                self.logp.len()
            )));
        }
        for w in self.support.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::domain(format!(
                    "support must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        for &x in &self.support {
            ensure_finite("support point", x)?;
        }
        if self.logp.iter().any(|l| l.is_nan() || *l > 1e-12) {
            return Err(Error::domain("log-probabilities must be <= 0"));
        }
        let total = logsumexp(&self.logp);
        if total.abs() > 1e-12 {
            return Err(Error::domain(format!("log-probabilities sum to exp({total}), not 1")));
        }
        Ok(())
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn logp(&self) -> &[f64] {
        &self.logp
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn meta(&self) -> Option<&str> {
        self.meta.as_deref()
    }

    pub fn with_meta(mut self, meta: impl Into<String>) -> Self {
        self.meta = Some(meta.into());
        self
    }

    pub fn probs(&self) -> Vec<f64> {
        self.logp.iter().map(|l| l.exp()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support.iter().copied().zip(self.logp.iter().copied())
    }

    /// Probability of the atom at `x`, zero if there is none.
    pub fn prob_at(&self, x: f64) -> f64 {
        let tol = MERGE_RTOL * self.scale();
        let i = self.support.partition_point(|&s| s < x - tol);
        match self.support.get(i) {
            Some(&s) if (s - x).abs() <= tol => self.logp[i].exp(),
            _ => 0.0,
        }
    }

    fn scale(&self) -> f64 {
        self.support
            .iter()
            .map(|x| x.abs())
            .fold(0.0_f64, f64::max)
            .max(f64::MIN_POSITIVE)
    }

    /// Normalized weights `p_i` obtained by one exponential of `logp - max`.
    fn weights(&self) -> Vec<f64> {
        let max = self.logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = self.logp.iter().map(|l| (l - max).exp()).collect();
        let z: KahanSum = raw.iter().copied().collect();
        let z = z.value();
        raw.into_iter().map(|p| p / z).collect()
    }

    /// Exact weighted mean and (two-pass) variance.
    pub fn moments(&self) -> Moments {
        let p = self.weights();
        let mean: KahanSum = p.iter().zip(&self.support).map(|(p, x)| p * x).collect();
        let mean = mean.value();
        let var: KahanSum = p
            .iter()
            .zip(&self.support)
            .map(|(p, x)| p * (x - mean) * (x - mean))
            .collect();
        Moments {
            mean,
            variance: var.value().max(0.0),
        }
    }

    /// `E|W|^k e^{t|W|}`-style expectation of an arbitrary function.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let p = self.weights();
        let s: KahanSum = p.iter().zip(&self.support).map(|(p, &x)| p * f(x)).collect();
        s.value()
    }

    /// Maps atoms `x ↦ (x - mean) / sigma`.
    pub fn standardize(&self, mean: f64, sigma: f64) -> Result<Self> {
        ensure_finite("mean", mean)?;
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::domain(format!("sigma must be positive and finite, got {sigma}")));
        }
        let support = self.support.iter().map(|x| (x - mean) / sigma).collect();
        let d = ExactDistribution {
            support,
            logp: self.logp.clone(),
            meta: self.meta.clone(),
        };
        // a huge mean can collapse neighbouring atoms after the shift
        if d.support.windows(2).any(|w| !(w[0] < w[1])) {
            return Self::from_log_weights(d.iter()).map(|x| x.with_meta_opt(self.meta.clone()));
        }
        Ok(d)
    }

    /// Standardizes by the law's own exact moments.
    pub fn standardized(&self) -> Result<Self> {
        let m = self.moments();
        if m.is_degenerate() {
            return Err(Error::Degenerate("variance is zero, cannot standardize".into()));
        }
        self.standardize(m.mean, m.sd())
    }

    fn with_meta_opt(mut self, meta: Option<String>) -> Self {
        self.meta = meta;
        self
    }

    /// Image of the law under a strictly monotone map.
    pub fn map_support<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self> {
        Self::from_log_weights(self.iter().map(|(x, l)| (f(x), l))).map(|d| d.with_meta_opt(self.meta.clone()))
    }

    /// Conditional law given `keep(x)`; also returns the log-mass kept.
    pub fn condition<F: Fn(f64) -> bool>(&self, keep: F) -> Result<(Self, f64)> {
        let kept: Vec<(f64, f64)> = self.iter().filter(|&(x, _)| keep(x)).collect();
        if kept.is_empty() {
            return Err(Error::domain("conditioning event has probability zero"));
        }
        let lw: Vec<f64> = kept.iter().map(|a| a.1).collect();
        let mass = logsumexp(&lw);
        let d = Self::from_log_weights(kept)?.with_meta_opt(self.meta.clone());
        Ok((d, mass))
    }

    /// `ln P(W ≥ x)`, `-∞` above the largest atom.
    pub fn upper_tail(&self, x: f64) -> f64 {
        let i = self.support.partition_point(|&s| s < x);
        if i == 0 {
            return 0.0;
        }
        logsumexp(&self.logp[i..]).min(0.0)
    }

    /// `ln P(W ≥ support[i])` for every atom, accumulated from the right.
    pub fn log_suffix_tails(&self) -> Vec<f64> {
        let mut out = vec![f64::NEG_INFINITY; self.len()];
        let mut acc = f64::NEG_INFINITY;
        for i in (0..self.len()).rev() {
            acc = log_add(acc, self.logp[i]);
            out[i] = acc.min(0.0);
        }
        out
    }

    /// `ln E e^{tW}`.
    pub fn mgf(&self, t: f64) -> f64 {
        let v: Vec<f64> = self.iter().map(|(x, l)| l + t * x).collect();
        logsumexp(&v)
    }

    /// Law of the independent sum, with the default atom cap.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        self.convolve_capped(other, DEFAULT_CONVOLUTION_CAP)
    }

    pub fn convolve_capped(&self, other: &Self, cap: u64) -> Result<Self> {
        let pairs = self.len() as u64 * other.len() as u64;
        if pairs > cap {
            return Err(Error::Resource {
                what: format!("convolution of {} x {} atoms", self.len(), other.len()),
                cap,
            });
        }
        let mut atoms = Vec::with_capacity(pairs as usize);
        for (x, lx) in self.iter() {
            for (y, ly) in other.iter() {
                atoms.push((x + y, lx + ly));
            }
        }
        Self::from_log_weights(atoms)
    }

    /// Law of the sum of `n` independent copies, by repeated squaring.
    pub fn convolution_power(&self, n: usize, cap: u64) -> Result<Self> {
        if n == 0 {
            return Self::point_mass(0.0);
        }
        let mut result: Option<Self> = None;
        let mut base = self.clone();
        let mut m = n;
        loop {
            if m & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => r.convolve_capped(&base, cap)?,
                });
            }
            m >>= 1;
            if m == 0 {
                break;
            }
            base = base.convolve_capped(&base, cap)?;
        }
        Ok(result.expect("n >= 1"))
    }

    /// Zero-biased law: density `E[W 1(W > w)]`, constant between atoms.
    pub fn zero_bias(&self) -> Result<ZeroBiasDensity> {
        let m = self.moments();
        if m.mean.abs() > 1e-9 || (m.variance - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!(
                "zero-bias transform needs mean 0 and variance 1, got ({}, {})",
                m.mean, m.variance
            )));
        }
        let p = self.weights();
        let n = self.len();
        // suffix[j] = Σ_{i ≥ j} p_i x_i, prefix[j] = Σ_{i < j} p_i x_i
        let mut suffix = vec![0.0; n + 1];
        let mut acc = KahanSum::default();
        for i in (0..n).rev() {
            acc.add(p[i] * self.support[i]);
            suffix[i] = acc.value();
        }
        let mut prefix = vec![0.0; n + 1];
        let mut acc = KahanSum::default();
        for i in 0..n {
            acc.add(p[i] * self.support[i]);
            prefix[i + 1] = acc.value();
        }
        let mut mass_above = vec![0.0; n + 1];
        let mut acc = KahanSum::default();
        for i in (0..n).rev() {
            acc.add(p[i]);
            mass_above[i] = acc.value();
        }
        let segment_density = (0..n.saturating_sub(1))
            .map(|j| {
                // on (x_j, x_{j+1}): E[W 1(W > w)] = Σ_{i > j} p_i x_i = -Σ_{i ≤ j} p_i x_i
                let d = if mass_above[j + 1] <= 0.5 {
                    suffix[j + 1]
                } else {
                    -prefix[j + 1]
                };
                d.max(0.0)
            })
            .collect();
        Ok(ZeroBiasDensity {
            knots: self.support.clone(),
            segment_density,
        })
    }
}

/// Total variation distance, atoms matched with the merge tolerance.
pub fn total_variation(a: &ExactDistribution, b: &ExactDistribution) -> f64 {
    let tol = MERGE_RTOL * a.scale().max(b.scale());
    let (pa, pb) = (a.probs(), b.probs());
    let (mut i, mut j) = (0, 0);
    let mut s = KahanSum::default();
    while i < a.len() || j < b.len() {
        let xa = a.support.get(i).copied().unwrap_or(f64::INFINITY);
        let xb = b.support.get(j).copied().unwrap_or(f64::INFINITY);
        if (xa - xb).abs() <= tol {
            s.add((pa[i] - pb[j]).abs());
            i += 1;
            j += 1;
        } else if xa < xb {
            s.add(pa[i]);
            i += 1;
        } else {
            s.add(pb[j]);
            j += 1;
        }
    }
    (0.5 * s.value()).clamp(0.0, 1.0)
}

/// Law of the zero-biased variable `W*` of a standardized lattice law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroBiasDensity {
    /// Atoms of the base law; the density vanishes outside `[first, last]`.
    pub knots: Vec<f64>,
    /// Density on `(knots[j], knots[j + 1])`.
    pub segment_density: Vec<f64>,
}

impl ZeroBiasDensity {
    pub fn density(&self, w: f64) -> f64 {
        if self.knots.len() < 2 || w <= self.knots[0] || w >= *self.knots.last().unwrap() {
            return 0.0;
        }
        let j = self.knots.partition_point(|&k| k <= w) - 1;
        self.segment_density[j]
    }

    pub fn total_mass(&self) -> f64 {
        let s: KahanSum = self
            .segment_density
            .iter()
            .zip(self.knots.windows(2))
            .map(|(d, k)| d * (k[1] - k[0]))
            .collect();
        s.value()
    }

    /// `E f'(W*)` computed exactly segment by segment from an antiderivative.
    pub fn expect_derivative<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let s: KahanSum = self
            .segment_density
            .iter()
            .zip(self.knots.windows(2))
            .map(|(d, k)| d * (f(k[1]) - f(k[0])))
            .collect();
        s.value()
    }
}
