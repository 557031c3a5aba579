//! Stein-identity budgets, moderate deviation bands and the checks built on
//! them: ratio tables, fitted constants, conditional regressions, the
//! moment generating function bound and the weighted tail integral.
//!
//! A budget `(δ, δ₁, δ₂, θ, α)` describes a variable `W` satisfying
//! `E W f(W) = E ∫ f'(W + t) dμ̂(t) + E R f(W)` with `μ̂` supported on
//! `[-δ, δ]`, `|E(D|W) - 1| ≤ δ₁(1 + |W|)`, `E(D|W) ≤ θ` and
//! `|E(R|W)| ≤ δ₂(1 + |W|)` (linear variant) or `δ₂(1 + W²)` with
//! `δ₂|W| ≤ α < 1` (quadratic variant). The tail ratio
//! `P(W ≥ x)/(1 - Φ(x))` then lies within `1 ± C θ³(1 + x³)(δ + δ₁ + δ₂)`
//! for `x ≤ θ⁻¹ min(δ^{-1/3}, δ₁^{-1/3}, δ₂^{-1/3})`, with `C` a universal
//! constant that is never known in closed form. Everything here treats `C`
//! as the unknown to be fitted.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dist::{ExactDistribution, KahanSum, MERGE_RTOL};
use crate::error::{ensure_finite, Error, Result};
use crate::normal;

/// Which bound the remainder `R` obeys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemainderVariant {
    /// `|E(R|W)| ≤ δ₂(1 + |W|)`
    RLinear,
    /// `|E(R|W)| ≤ δ₂(1 + W²)` with `δ₂|W| ≤ α < 1`
    RQuadratic,
}

/// Where the numbers in a budget came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Closed-form values for the model.
    Exact,
    /// Maxima of exact or sampled conditional expectations.
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteinBudget {
    pub delta: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub theta: f64,
    pub alpha: Option<f64>,
    pub variant: RemainderVariant,
    pub provenance: Provenance,
}

impl SteinBudget {
    pub fn new(
        delta: f64,
        delta1: f64,
        delta2: f64,
        theta: f64,
        alpha: Option<f64>,
        variant: RemainderVariant,
        provenance: Provenance,
    ) -> Result<Self> {
        let b = SteinBudget {
            delta,
            delta1,
            delta2,
            theta,
            alpha,
            variant,
            provenance,
        };
        b.validate()?;
        Ok(b)
    }

    /// Budget of a zero-bias coupling with `|W* - W| ≤ δ`: `D = 1`, `R = 0`.
    pub fn zero_bias(delta: f64) -> Result<Self> {
        Self::new(delta, 0.0, 0.0, 1.0, None, RemainderVariant::RLinear, Provenance::Exact)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("delta", self.delta), ("delta1", self.delta1), ("delta2", self.delta2)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::domain(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.theta >= 1.0) || !self.theta.is_finite() {
            return Err(Error::domain(format!("theta must be >= 1, got {}", self.theta)));
        }
        match (self.variant, self.alpha) {
            (RemainderVariant::RQuadratic, None) => Err(Error::domain("quadratic remainder needs alpha")),
            (_, Some(a)) if !(0.0..1.0).contains(&a) => {
                Err(Error::domain(format!("alpha must lie in [0, 1), got {a}")))
            }
            _ => Ok(()),
        }
    }

    pub fn total(&self) -> f64 {
        self.delta + self.delta1 + self.delta2
    }

    /// `θ⁻¹ min(δ^{-1/3}, δ₁^{-1/3}, δ₂^{-1/3})` over the positive entries;
    /// infinite when all three vanish.
    pub fn range_cap(&self) -> f64 {
        let m = [self.delta, self.delta1, self.delta2]
            .iter()
            .filter(|&&d| d > 0.0)
            .map(|d| d.powf(-1.0 / 3.0))
            .fold(f64::INFINITY, f64::min);
        m / self.theta
    }

    /// `θ³(1 + x³)(δ + δ₁ + δ₂)`
    pub fn unit_halfwidth(&self, x: f64) -> f64 {
        self.theta.powi(3) * (1.0 + x.powi(3)) * self.total()
    }

    /// Admissibility constant of the MGF bound: 12 under the linear
    /// remainder, `2(3 + α)/(1 - α)` under the quadratic one.
    pub fn c_alpha(&self) -> f64 {
        match self.variant {
            RemainderVariant::RLinear => 12.0,
            RemainderVariant::RQuadratic => {
                let a = self.alpha.unwrap_or(0.0);
                2.0 * (3.0 + a) / (1.0 - a)
            }
        }
    }
}

/// Interval `[lower, upper]` for the tail ratio at one `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lower: f64,
    pub upper: f64,
    pub in_range: bool,
}

/// Unit band `1 ± θ³(1 + x³)(δ + δ₁ + δ₂)`.
pub fn band(budget: &SteinBudget, x: f64) -> Result<Band> {
    budget.validate()?;
    ensure_finite("x", x)?;
    if x < 0.0 {
        return Err(Error::domain(format!("x must be >= 0, got {x}")));
    }
    let h = budget.unit_halfwidth(x);
    Ok(Band {
        lower: 1.0 - h,
        upper: 1.0 + h,
        in_range: x <= budget.range_cap(),
    })
}

/// Unit band `1 ± (1 + x³)δ` of a zero-bias coupling, valid for `x ≤ δ^{-1/3}`.
pub fn zero_bias_band(delta: f64, x: f64) -> Result<Band> {
    band(&SteinBudget::zero_bias(delta)?, x)
}

/// How grid points that land exactly on an atom are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AtomPolicy {
    /// Move the point to the midpoint between the atom and the next one up,
    /// so `P(W ≥ x)` and `P(W > x)` agree.
    #[default]
    Midpoint,
    /// Keep the point; the numerator is `P(W ≥ x)` including the atom.
    Inclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub x: f64,
    pub log_tail: f64,
    pub log_normal_tail: f64,
    pub ratio: f64,
    pub band_halfwidth_unit: f64,
    pub in_range: bool,
    /// Band wider than ten times its polynomial part; carries little information.
    #[serde(default)]
    pub low_information: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioTable {
    pub rows: Vec<RatioRow>,
}

/// Places `x` according to the atom policy.
pub fn nudge_to_midpoint(d: &ExactDistribution, x: f64) -> f64 {
    let s = d.support();
    let scale = s.iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
    let tol = MERGE_RTOL * scale.max(1.0);
    let i = s.partition_point(|&a| a < x - tol);
    match s.get(i) {
        Some(&a) if (a - x).abs() <= tol => {
            let next = match s.get(i + 1) {
                Some(&b) => b,
                None if i > 0 => a + (a - s[i - 1]),
                None => a + 1.0,
            };
            0.5 * (a + next)
        }
        _ => x,
    }
}

impl RatioTable {
    /// Tail ratios of `d` over `grid`, with a caller-supplied band half-width
    /// and range cap. Rows whose nudged `x` would not increase are dropped.
    pub fn build<U>(d: &ExactDistribution, grid: &[f64], policy: AtomPolicy, cap: f64, unit: U) -> Result<Self>
    where
        U: Fn(f64) -> (f64, bool),
    {
        if grid.is_empty() {
            return Err(Error::domain("ratio grid is empty"));
        }
        let mut prev = f64::NEG_INFINITY;
        for &x in grid {
            ensure_finite("grid point", x)?;
            if x < 0.0 || x <= prev {
                return Err(Error::domain(format!(
                    "grid must be nonnegative and strictly increasing (at {x})"
                )));
            }
            prev = x;
        }
        let mut rows: Vec<RatioRow> = Vec::with_capacity(grid.len());
        for &g in grid {
            let x = match policy {
                AtomPolicy::Midpoint => nudge_to_midpoint(d, g),
                AtomPolicy::Inclusive => g,
            };
            if rows.last().is_some_and(|r| r.x >= x) {
                continue;
            }
            let log_tail = d.upper_tail(x);
            let log_normal_tail = normal::log_tail(x);
            let ratio = (log_tail - log_normal_tail).exp();
            let (band_halfwidth_unit, low_information) = unit(x);
            rows.push(RatioRow {
                x,
                log_tail,
                log_normal_tail,
                ratio,
                band_halfwidth_unit,
                in_range: x <= cap,
                low_information,
            });
        }
        Ok(RatioTable { rows })
    }

    /// Model-rate table: half-width `(1 + x³)·rate`.
    pub fn with_rate(d: &ExactDistribution, grid: &[f64], rate: f64, cap: f64) -> Result<Self> {
        Self::build(d, grid, AtomPolicy::Midpoint, cap, |x| {
            ((1.0 + x.powi(3)) * rate, false)
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `sup |ratio - 1|` over rows with `x ≤ x_max`.
    pub fn max_abs_deviation(&self, x_max: f64) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.x <= x_max)
            .map(|r| (r.ratio - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `x,log_tail,log_normal_tail,ratio,band_halfwidth_unit,in_range`;
    /// 17 significant digits so every value round-trips.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,log_tail,log_normal_tail,ratio,band_halfwidth_unit,in_range\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt17(r.x),
                fmt17(r.log_tail),
                fmt17(r.log_normal_tail),
                fmt17(r.ratio),
                fmt17(r.band_halfwidth_unit),
                r.in_range
            ));
        }
        out
    }
}

/// Round-trip formatting with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Ratio table of a standardized law under a budget's unit band.
pub fn ratio_table(d: &ExactDistribution, budget: &SteinBudget, grid: &[f64]) -> Result<RatioTable> {
    budget.validate()?;
    let m = d.moments();
    if m.mean.abs() > 1e-6 || (m.variance - 1.0).abs() > 1e-6 {
        return Err(Error::domain(format!(
            "ratio table needs a standardized law, got mean {} variance {}",
            m.mean, m.variance
        )));
    }
    let cap = budget.range_cap();
    RatioTable::build(d, grid, AtomPolicy::Midpoint, cap, |x| {
        (budget.unit_halfwidth(x), false)
    })
}

/// Largest `|ratio - 1| / half-width` over in-range rows with `x > 0`.
pub fn fit_constant(table: &RatioTable) -> Result<f64> {
    let mut best: Option<f64> = None;
    for r in table.rows.iter().filter(|r| r.x > 0.0 && r.in_range) {
        if !(r.band_halfwidth_unit > 0.0) {
            return Err(Error::domain(format!("band half-width at x = {} is not positive", r.x)));
        }
        let c = (r.ratio - 1.0).abs() / r.band_halfwidth_unit;
        best = Some(best.map_or(c, |b: f64| b.max(c)));
    }
    best.ok_or_else(|| Error::domain("no in-range rows with x > 0 to fit"))
}

/// One realization of an exchangeable pair with its `D` and `R` values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub w: f64,
    pub w_prime: f64,
    pub d: f64,
    pub r: f64,
}

/// Conditional means of `D` and `R` at one value (or bin) of `W`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalRow {
    pub w: f64,
    pub mean_d: f64,
    pub mean_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalFit {
    pub delta1: f64,
    pub delta2: f64,
    pub theta: f64,
}

/// Smallest `(δ₁, δ₂, θ)` consistent with the given conditional means.
pub fn fit_conditionals(rows: &[ConditionalRow], variant: RemainderVariant) -> Result<ConditionalFit> {
    if rows.is_empty() {
        return Err(Error::domain("no conditional rows"));
    }
    let mut fit = ConditionalFit {
        delta1: 0.0,
        delta2: 0.0,
        theta: f64::NEG_INFINITY,
    };
    for r in rows {
        let lin = 1.0 + r.w.abs();
        let rem = match variant {
            RemainderVariant::RLinear => lin,
            RemainderVariant::RQuadratic => 1.0 + r.w * r.w,
        };
        fit.delta1 = fit.delta1.max((r.mean_d - 1.0).abs() / lin);
        fit.delta2 = fit.delta2.max(r.mean_r.abs() / rem);
        fit.theta = fit.theta.max(r.mean_d);
    }
    Ok(fit)
}

/// Equal-count binning of sampled pairs by `w`, then [`fit_conditionals`]
/// on the bin means.
pub fn conditional_regression(
    samples: &[PairSample],
    bins: usize,
    variant: RemainderVariant,
) -> Result<ConditionalFit> {
    if bins < 5 {
        return Err(Error::domain(format!("need at least 5 bins, got {bins}")));
    }
    if samples.len() < 10 * bins {
        return Err(Error::domain(format!(
            "need at least {} samples for {bins} bins, got {}",
            10 * bins,
            samples.len()
        )));
    }
    let mut sorted: Vec<&PairSample> = samples.iter().collect();
    sorted.sort_by(|a, b| a.w.total_cmp(&b.w));
    let n = sorted.len();
    let rows: Vec<ConditionalRow> = (0..bins)
        .map(|b| {
            let chunk = &sorted[b * n / bins..(b + 1) * n / bins];
            let len = chunk.len() as f64;
            let w: KahanSum = chunk.iter().map(|s| s.w).collect();
            let d: KahanSum = chunk.iter().map(|s| s.d).collect();
            let r: KahanSum = chunk.iter().map(|s| s.r).collect();
            ConditionalRow {
                w: w.value() / len,
                mean_d: d.value() / len,
                mean_r: r.value() / len,
            }
        })
        .collect();
    fit_conditionals(&rows, variant)
}

/// Outcome of fitting the constant in `E e^{tW} ≤ exp(t²/2 + c₀(t))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgfCheck {
    /// Smallest `c₁ ≥ 0` for which the bound holds on the used grid.
    pub fitted_c1: f64,
    /// `max_t (ln E e^{tW} - t²/2) / (θ(δ₂t + δ₁t² + (δ + δ₁ + δ₂)t³))`;
    /// negative when the MGF sits below the Gaussian one.
    pub raw_max: f64,
    pub ok: bool,
    pub used: Vec<f64>,
    pub skipped: Vec<f64>,
}

/// Smallest `t` used by the MGF fit; the ratio has a removable singularity at 0.
pub const MGF_T_MIN: f64 = 1e-3;

const MGF_NOISE: f64 = 1e-13;

/// Fits `c₁` over the admissible part of `t_grid`. A `t` is admissible when
/// `1e-3 ≤ t ≤ 1/(2δ)` and `tδ₁ + C_α tθδ₂ ≤ 1/2`; the budget itself needs
/// `δ₂ ≤ 1/4`. `W` need not be exactly standardized.
pub fn check_mgf_bound(d: &ExactDistribution, budget: &SteinBudget, t_grid: &[f64]) -> Result<MgfCheck> {
    budget.validate()?;
    if budget.delta2 > 0.25 {
        return Err(Error::domain(format!(
            "MGF bound needs delta2 <= 1/4, got {}",
            budget.delta2
        )));
    }
    if d.expect(f64::abs) > 1e6 {
        return Err(Error::domain("E|W| is not of order one; is W standardized at all?"));
    }
    let c_alpha = budget.c_alpha();
    let t_max = if budget.delta > 0.0 {
        1.0 / (2.0 * budget.delta)
    } else {
        f64::INFINITY
    };
    let (mut used, mut skipped) = (Vec::new(), Vec::new());
    let mut best = f64::NEG_INFINITY;
    for &t in t_grid {
        let admissible = t.is_finite()
            && t >= MGF_T_MIN
            && t <= t_max
            && t * budget.delta1 + c_alpha * t * budget.theta * budget.delta2 <= 0.5;
        let denom = budget.theta * (budget.delta2 * t + budget.delta1 * t * t + budget.total() * t.powi(3));
        if !admissible || !(denom > 0.0) {
            skipped.push(t);
            continue;
        }
        used.push(t);
        let mut excess = d.mgf(t) - 0.5 * t * t;
        // below this the difference is rounding in ln E e^{tW}
        if excess.abs() <= MGF_NOISE * (1.0 + 0.5 * t * t) {
            excess = 0.0;
        }
        best = best.max(excess / denom);
    }
    if used.is_empty() {
        return Err(Error::domain("every t was skipped (inadmissible or zero denominator)"));
    }
    Ok(MgfCheck {
        fitted_c1: best.max(0.0),
        raw_max: best,
        ok: best.is_finite(),
        used,
        skipped,
    })
}

/// `∫_a^b u^k e^{u²/2} du` for `0 ≤ a ≤ b` from the term-wise integrated
/// exponential series; every term is positive.
pub fn weighted_gauss_integral(k: u32, a: f64, b: f64) -> f64 {
    let antideriv = |u: f64| -> f64 {
        if u == 0.0 {
            return 0.0;
        }
        // Σ_m u^{k+2m+1} / (2^m m! (k+2m+1))
        let half_u2 = 0.5 * u * u;
        let mut coef = u.powi(k as i32 + 1); // u^{k+1} (u²/2)^m / m!
        let mut sum = coef / (k as f64 + 1.0);
        let mut m = 1.0;
        loop {
            coef *= half_u2 / m;
            let term = coef / (k as f64 + 2.0 * m + 1.0);
            sum += term;
            if term <= sum * 1e-17 && m > half_u2 {
                return sum;
            }
            m += 1.0;
        }
    };
    antideriv(b) - antideriv(a)
}

/// `∫_0^t u^k e^{u²/2} P(W ≥ u) du` and its ratio to `t^k`.
///
/// `P(W ≥ u)` is constant between atoms, so the integral is a finite sum of
/// closed-form segment integrals.
pub fn check_tail_integral(d: &ExactDistribution, k: u32, t: f64) -> Result<(f64, f64)> {
    if k < 1 {
        return Err(Error::domain("k must be >= 1"));
    }
    ensure_finite("t", t)?;
    if t < 0.0 {
        return Err(Error::domain(format!("t must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok((0.0, 0.0));
    }
    let s = d.support();
    let tails = d.log_suffix_tails();
    // on (s[i-1], s[i]] the tail is P(W ≥ s[i]); past the last atom it is 0
    let mut acc = KahanSum::default();
    let mut lo = 0.0;
    let mut i = s.partition_point(|&a| a <= 0.0);
    // on (0, s[i]] with s[i] the first atom > 0, P(W ≥ u) = P(W ≥ s[i])
    while lo < t && i < s.len() {
        let hi = s[i].min(t);
        acc.add(tails[i].exp() * weighted_gauss_integral(k, lo, hi));
        lo = hi;
        i += 1;
    }
    let value = acc.value();
    Ok((value, value / t.powi(k as i32)))
}

/// Fitted `c₂` over `k ∈ ks` and `t` on the grid, restricted to the range
/// `t ≤ θ⁻¹ min(δ^{-1/3}, δ₁^{-1/3}, δ₂^{-1/3})`; needs `max(δ, δ₁, δ₂) ≤ 1`.
pub fn fit_tail_integral_constant(
    d: &ExactDistribution,
    budget: &SteinBudget,
    ks: &[u32],
    t_grid: &[f64],
) -> Result<f64> {
    budget.validate()?;
    if budget.delta.max(budget.delta1).max(budget.delta2) > 1.0 {
        return Err(Error::domain(
            "tail-integral bound needs max(delta, delta1, delta2) <= 1",
        ));
    }
    let cap = budget.range_cap();
    let mut best: Option<f64> = None;
    for &k in ks {
        for &t in t_grid.iter().filter(|&&t| t > 0.0 && t <= cap) {
            let (_, r) = check_tail_integral(d, k, t)?;
            best = Some(best.map_or(r, |b: f64| b.max(r)));
        }
    }
    best.ok_or_else(|| Error::domain("no t inside the admissible range"))
}

/// Antisymmetric test functions `F(w, w') = -F(w', w)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AntisymmetricFn {
    Difference,
    CubedDifference,
    SineDifference,
}

impl AntisymmetricFn {
    pub const ALL: [AntisymmetricFn; 3] = [
        AntisymmetricFn::Difference,
        AntisymmetricFn::CubedDifference,
        AntisymmetricFn::SineDifference,
    ];

    pub fn eval(self, w: f64, w_prime: f64) -> f64 {
        let d = w - w_prime;
        match self {
            AntisymmetricFn::Difference => d,
            AntisymmetricFn::CubedDifference => d * d * d,
            AntisymmetricFn::SineDifference => d.sin(),
        }
    }
}

/// `|E F(W, W')|` for an exact joint law given as `(w, w', prob)` triples.
///
/// The law must be swap-invariant to 1e-12: values are first identified up
/// to the merge tolerance, then `P(a, b)` is compared with `P(b, a)`.
pub fn pair_antisymmetry_check(kernel: &[(f64, f64, f64)], f: AntisymmetricFn) -> Result<f64> {
    let mut values: Vec<f64> = kernel.iter().flat_map(|&(w, wp, _)| [w, wp]).collect();
    values.sort_by(f64::total_cmp);
    let scale = values.iter().map(|v| v.abs()).fold(0.0_f64, f64::max).max(1.0);
    let tol = MERGE_RTOL * scale;
    values.dedup_by(|b, a| (*b - *a).abs() <= tol);
    let id = |v: f64| -> usize {
        let i = values.partition_point(|&u| u < v - tol);
        i.min(values.len() - 1)
    };
    let mut joint: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &(w, wp, p) in kernel {
        ensure_finite("pair value", w)?;
        ensure_finite("pair value", wp)?;
        *joint.entry((id(w), id(wp))).or_insert(0.0) += p;
    }
    for (&(a, b), &p) in &joint {
        let q = joint.get(&(b, a)).copied().unwrap_or(0.0);
        if (p - q).abs() > 1e-12 {
            return Err(Error::domain(format!(
                "kernel is not exchangeable: P({}, {}) = {p} but P({}, {}) = {q}",
                values[a], values[b], values[b], values[a]
            )));
        }
    }
    let s: KahanSum = kernel.iter().map(|&(w, wp, p)| p * f.eval(w, wp)).collect();
    Ok(s.value().abs())
}

/// Per-model record written as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub model: String,
    pub n: u64,
    pub budget: SteinBudget,
    pub fitted_constant: f64,
    pub identity_residuals: BTreeMap<String, f64>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn budget(d: f64, d1: f64, d2: f64, theta: f64) -> SteinBudget {
        SteinBudget::new(d, d1, d2, theta, None, RemainderVariant::RLinear, Provenance::Exact).unwrap()
    }

    #[test]
    fn band_examples() {
        let b = band(&budget(0.0, 0.0, 0.0, 1.0), 2.0).unwrap();
        assert_eq!((b.lower, b.upper, b.in_range), (1.0, 1.0, true));
        let b = band(&budget(0.1, 0.0, 0.0, 1.0), 0.0).unwrap();
        assert_relative_eq!(b.lower, 0.9);
        assert_relative_eq!(b.upper, 1.1);
        assert!(b.in_range);
        assert!(!band(&budget(0.1, 0.0, 0.0, 1.0), 3.0).unwrap().in_range);
        assert!(band(&budget(0.1, 0.0, 0.0, 1.0), -1.0).is_err());
    }

    #[test]
    fn zero_bias_band_examples() {
        let b = zero_bias_band(0.0, 7.0).unwrap();
        assert_eq!((b.lower, b.upper, b.in_range), (1.0, 1.0, true));
        // 0.001^{-1/3} = 10 up to rounding of the cube root
        assert!(0.001f64.powf(-1.0 / 3.0) >= 10.0 - 1e-12);
        assert!(zero_bias_band(0.001, 10.0 - 1e-12).unwrap().in_range);
        assert!(!zero_bias_band(0.008, 5.001).unwrap().in_range);
    }

    #[test]
    fn budget_validation() {
        assert!(SteinBudget::new(0.1, 0.0, 0.0, 0.5, None, RemainderVariant::RLinear, Provenance::Exact).is_err());
        assert!(SteinBudget::new(-0.1, 0.0, 0.0, 1.0, None, RemainderVariant::RLinear, Provenance::Exact).is_err());
        assert!(SteinBudget::new(
            0.1,
            0.0,
            0.0,
            1.0,
            None,
            RemainderVariant::RQuadratic,
            Provenance::Exact
        )
        .is_err());
        assert!(SteinBudget::new(
            0.1,
            0.0,
            0.0,
            1.0,
            Some(1.0),
            RemainderVariant::RQuadratic,
            Provenance::Exact
        )
        .is_err());
        let q = SteinBudget::new(
            0.1,
            0.0,
            0.0,
            1.0,
            Some(0.5),
            RemainderVariant::RQuadratic,
            Provenance::Exact,
        )
        .unwrap();
        assert_relative_eq!(q.c_alpha(), 14.0);
    }

    #[test]
    fn fit_constant_examples() {
        let row = |x: f64, ratio: f64, h: f64| RatioRow {
            x,
            log_tail: 0.0,
            log_normal_tail: 0.0,
            ratio,
            band_halfwidth_unit: h,
            in_range: true,
            low_information: false,
        };
        let t = RatioTable {
            rows: vec![row(0.5, 1.0, 0.2), row(1.0, 1.0, 0.3)],
        };
        assert_eq!(fit_constant(&t).unwrap(), 0.0);
        let t = RatioTable {
            rows: vec![row(1.0, 1.2, 0.1)],
        };
        assert_relative_eq!(fit_constant(&t).unwrap(), 2.0, max_relative = 1e-12);
        let mut out = row(1.0, 1.2, 0.1);
        out.in_range = false;
        assert!(fit_constant(&RatioTable { rows: vec![out] }).is_err());
    }

    #[test]
    fn regression_trivial_cases() {
        let samples: Vec<PairSample> = (0..100)
            .map(|i| PairSample {
                w: i as f64 / 50.0 - 1.0,
                w_prime: 0.0,
                d: 1.0,
                r: 0.0,
            })
            .collect();
        let fit = conditional_regression(&samples, 5, RemainderVariant::RLinear).unwrap();
        assert_eq!((fit.delta1, fit.delta2, fit.theta), (0.0, 0.0, 1.0));
        let rows = [ConditionalRow {
            w: 0.0,
            mean_d: 2.0,
            mean_r: 0.0,
        }];
        assert_eq!(fit_conditionals(&rows, RemainderVariant::RLinear).unwrap().theta, 2.0);
        assert!(conditional_regression(&samples[..40], 5, RemainderVariant::RLinear).is_err());
        assert!(conditional_regression(&samples, 4, RemainderVariant::RLinear).is_err());
    }

    #[test]
    fn mgf_zero_budget_is_rejected() {
        let d = ExactDistribution::uniform(&[-1.0, 1.0]).unwrap();
        let err = check_mgf_bound(&d, &budget(0.0, 0.0, 0.0, 1.0), &[0.5, 1.0]);
        assert!(err.is_err());
    }

    #[test]
    fn mgf_skips_small_t() {
        let d = ExactDistribution::uniform(&[-1.0, 1.0]).unwrap();
        let c = check_mgf_bound(&d, &budget(0.5, 0.0, 0.0, 1.0), &[1e-4, 0.5, 2.0]).unwrap();
        assert_eq!(c.skipped, vec![1e-4, 2.0]);
        assert_eq!(c.used, vec![0.5]);
        assert!(c.ok);
        let wide = SteinBudget {
            delta2: 0.3,
            ..budget(0.5, 0.0, 0.0, 1.0)
        };
        assert!(check_mgf_bound(&d, &wide, &[0.5]).is_err());
    }

    #[test]
    fn tail_integral_trivial() {
        let d = ExactDistribution::uniform(&[-1.0, 1.0]).unwrap();
        assert_eq!(check_tail_integral(&d, 1, 0.0).unwrap(), (0.0, 0.0));
        let p = ExactDistribution::point_mass(0.0).unwrap();
        assert_eq!(check_tail_integral(&p, 1, 2.0).unwrap().0, 0.0);
        assert!(check_tail_integral(&d, 0, 1.0).is_err());
        // P(W ≥ u) = 1/2 on (0, 1]: ∫_0^1 u e^{u²/2} / 2 = (e^{1/2} - 1)/2
        let (v, _) = check_tail_integral(&d, 1, 2.0).unwrap();
        assert_relative_eq!(v, 0.5 * (0.5f64.exp() - 1.0), max_relative = 1e-14);
    }

    #[test]
    fn gauss_integral_odd_closed_form() {
        // k = 1: e^{b²/2} - e^{a²/2}; k = 3: [(u² - 2) e^{u²/2}]
        assert_relative_eq!(
            weighted_gauss_integral(1, 0.5, 3.0),
            4.5f64.exp() - 0.125f64.exp(),
            max_relative = 1e-14
        );
        let f3 = |u: f64| (u * u - 2.0) * (0.5 * u * u).exp();
        assert_relative_eq!(
            weighted_gauss_integral(3, 0.0, 4.0),
            f3(4.0) - f3(0.0),
            max_relative = 1e-13
        );
    }

    #[test]
    fn antisymmetry_examples() {
        let k = [(1.0, -1.0, 0.5), (-1.0, 1.0, 0.5)];
        for f in AntisymmetricFn::ALL {
            assert_eq!(pair_antisymmetry_check(&k, f).unwrap(), 0.0);
        }
        let bad = [(1.0, -1.0, 0.6), (-1.0, 1.0, 0.4)];
        assert!(pair_antisymmetry_check(&bad, AntisymmetricFn::Difference).is_err());
    }

    #[test]
    fn midpoint_nudge() {
        let d = ExactDistribution::uniform(&[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(nudge_to_midpoint(&d, 0.0), 0.5);
        assert_eq!(nudge_to_midpoint(&d, 0.3), 0.3);
        assert_eq!(nudge_to_midpoint(&d, 1.0), 1.5);
    }
}
