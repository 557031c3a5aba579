//! Standard normal tail and the solution of the Stein equation.
//!
//! Two regimes are used for the upper tail `1 - Φ(w)`:
//!
//! * `|w| < 2`: the power series `Φ(w) - 1/2 = φ(w) Σ w^(2k+1) / (2k+1)!!`.
//!   All terms are positive and the subtraction from `1/2` loses at most a
//!   factor of about 22 in relative accuracy.
//! * `|w| ≥ 2`: the Laplace continued fraction for the Mills ratio,
//!   evaluated with the modified Lentz algorithm. Working with
//!   `e^{w²/2}(1 - Φ(w))` keeps the deep tail away from underflow; the log
//!   tail is finite for every finite `w`.

use crate::error::{ensure_finite, Result};

/// `√(2π)`
pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;
/// `ln √(2π)`
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this `|w|` the series is used, above it the continued fraction.
pub const SERIES_CUTOFF: f64 = 2.0;

const CF_MAX_TERMS: usize = 10_000;
const CF_TINY: f64 = 1e-300;

/// Continued fraction `j/(w + (j+1)/(w + (j+2)/(w + ...)))` by modified Lentz.
fn cf_tail(j: usize, w: f64) -> f64 {
    // Evaluate b0 + a1/(b1 + a2/(b2 + ...)) with b0 = 0, a_i = j + i - 1, b_i = w.
    let mut f = CF_TINY;
    let mut c = f;
    let mut d = 0.0;
    for i in 1..CF_MAX_TERMS {
        let a = (j + i - 1) as f64;
        d = w + a * d;
        if d == 0.0 {
            d = CF_TINY;
        }
        d = 1.0 / d;
        c = w + a / c;
        if c == 0.0 {
            c = CF_TINY;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    f
}

/// Pieces of the Mills continued fraction for `w ≥ SERIES_CUTOFF`:
/// returns `(R, e)` with `R = √(2π) e^{w²/2} (1 - Φ(w)) = 1/(w + 1/(w + e))`.
fn mills_parts(w: f64) -> (f64, f64) {
    let e = cf_tail(2, w);
    let c = 1.0 / (w + e);
    (1.0 / (w + c), e)
}

/// `Σ_{k≥0} w^(2k+1) / (2k+1)!!`, so that `Φ(w) - 1/2 = φ(w) · series(w)`.
fn odd_double_factorial_series(w: f64) -> f64 {
    let w2 = w * w;
    let mut term = w;
    let mut sum = w;
    let mut k = 1.0;
    loop {
        term *= w2 / (2.0 * k + 1.0);
        sum += term;
        if term.abs() <= sum.abs() * 1e-18 {
            return sum;
        }
        k += 1.0;
    }
}

/// `e^{w²/2}(1 - Φ(w))` for `w ≥ 0`, never overflowing or underflowing.
fn scaled_upper(w: f64) -> f64 {
    debug_assert!(w >= 0.0);
    if w < SERIES_CUTOFF {
        0.5 * (0.5 * w * w).exp() - odd_double_factorial_series(w) / SQRT_2PI
    } else {
        mills_parts(w).0 / SQRT_2PI
    }
}

/// `1 - Φ(w)` for `w ≥ 0`.
fn upper_nonneg(w: f64) -> f64 {
    if w < SERIES_CUTOFF {
        0.5 - (-0.5 * w * w).exp() / SQRT_2PI * odd_double_factorial_series(w)
    } else {
        (log_upper_nonneg(w)).exp()
    }
}

fn log_upper_nonneg(w: f64) -> f64 {
    if w < SERIES_CUTOFF {
        upper_nonneg(w).ln()
    } else {
        -0.5 * w * w - LN_SQRT_2PI + mills_parts(w).0.ln()
    }
}

pub(crate) fn tail(w: f64) -> f64 {
    if w >= 0.0 {
        upper_nonneg(w)
    } else {
        1.0 - upper_nonneg(-w)
    }
}

pub(crate) fn cdf(w: f64) -> f64 {
    if w >= 0.0 {
        1.0 - upper_nonneg(w)
    } else {
        upper_nonneg(-w)
    }
}

pub(crate) fn log_tail(w: f64) -> f64 {
    if w >= 0.0 {
        log_upper_nonneg(w)
    } else {
        (-upper_nonneg(-w)).ln_1p()
    }
}

pub(crate) fn log_cdf(w: f64) -> f64 {
    log_tail(-w)
}

/// `1 - Φ(w)`, relative error below 1e-12 wherever the result is a normal
/// double (`|w| ≲ 37.5`); beyond that the value degrades into subnormals and
/// [`log_normal_tail`] should be used instead.
pub fn normal_tail(w: f64) -> Result<f64> {
    ensure_finite("w", w)?;
    Ok(tail(w))
}

/// `Φ(w)`.
pub fn normal_cdf(w: f64) -> Result<f64> {
    ensure_finite("w", w)?;
    Ok(cdf(w))
}

/// `ln(1 - Φ(w))`, finite for every finite `w`.
pub fn log_normal_tail(w: f64) -> Result<f64> {
    ensure_finite("w", w)?;
    Ok(log_tail(w))
}

/// Normal CDF, tail and Mills ratio at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalEval {
    pub w: f64,
    /// `Φ(w)`
    pub phi: f64,
    /// `1 - Φ(w)`
    pub tail: f64,
    /// `(1 - Φ(w)) e^{w²/2}`; infinite for very negative `w`.
    pub mills: f64,
}

impl NormalEval {
    pub fn at(w: f64) -> Result<Self> {
        ensure_finite("w", w)?;
        let mills = if w >= 0.0 {
            scaled_upper(w)
        } else {
            (0.5 * w * w).exp() * tail(w)
        };
        Ok(NormalEval {
            w,
            phi: cdf(w),
            tail: tail(w),
            mills,
        })
    }
}

/// Solution `f_x(w)` of `w f(w) - f'(w) = 1(w ≥ x) - (1 - Φ(x))`:
///
/// ```text
/// f_x(w) = √(2π) e^{w²/2} (1 - Φ(w)) Φ(x)   for w ≥ x
///        = √(2π) e^{w²/2} (1 - Φ(x)) Φ(w)   for w < x
/// ```
pub fn stein_solution(x: f64, w: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    ensure_finite("w", w)?;
    Ok(solution(x, w))
}

pub(crate) fn solution(x: f64, w: f64) -> f64 {
    if w >= x {
        if w >= 0.0 {
            SQRT_2PI * scaled_upper(w) * cdf(x)
        } else {
            SQRT_2PI * ((0.5 * w * w) + log_tail(w) + log_cdf(x)).exp()
        }
    } else if w <= 0.0 {
        // e^{w²/2} Φ(w) is the scaled upper tail at -w.
        SQRT_2PI * scaled_upper(-w) * tail(x)
    } else {
        SQRT_2PI * (0.5 * w * w + log_cdf(w) + log_tail(x)).exp()
    }
}

/// `√(2π)(1 + w²) e^{w²/2} (1 - Φ(w)) - w` for `w ≥ 0`.
///
/// For large `w` the two terms nearly cancel; the continued fraction lets the
/// difference be formed without cancellation as `e / ((w + e)(w + c))`.
pub fn g_bracket(w: f64) -> Result<f64> {
    ensure_finite("w", w)?;
    if w < 0.0 {
        return Err(crate::Error::domain(format!("bracket is defined for w >= 0, got {w}")));
    }
    Ok(bracket(w))
}

fn bracket(w: f64) -> f64 {
    if w < SERIES_CUTOFF {
        SQRT_2PI * (1.0 + w * w) * scaled_upper(w) - w
    } else {
        let (_, e) = mills_parts(w);
        let c = 1.0 / (w + e);
        e / ((w + e) * (w + c))
    }
}

/// `g(w) = (w f_x(w))'`:
///
/// ```text
/// g(w) = (√(2π)(1 + w²) e^{w²/2}(1 - Φ(w)) - w) Φ(x)   for w ≥ x
///      = (√(2π)(1 + w²) e^{w²/2} Φ(w) + w) (1 - Φ(x))  for w < x
/// ```
pub fn stein_solution_derivative_g(x: f64, w: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    ensure_finite("w", w)?;
    let g = if w >= x {
        if w >= 0.0 {
            bracket(w) * cdf(x)
        } else {
            // w < 0 here, so e^{w²/2}(1 - Φ(w)) is large but finite for |w| < 38
            (SQRT_2PI * (1.0 + w * w) * (0.5 * w * w + log_tail(w)).exp() - w) * cdf(x)
        }
    } else if w <= 0.0 {
        // e^{w²/2} Φ(w) = scaled upper tail at -w, and the bracket mirrors.
        bracket(-w) * tail(x)
    } else {
        (SQRT_2PI * (1.0 + w * w) * (0.5 * w * w + log_cdf(w)).exp() + w) * tail(x)
    };
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn tail_at_zero_is_half() {
        assert_eq!(normal_tail(0.0).unwrap(), 0.5);
    }

    #[test]
    fn tail_at_two() {
        // 50-digit quadrature: 0.022750131948179207200282637166533437...
        assert_relative_eq!(
            normal_tail(2.0).unwrap(),
            0.022_750_131_948_179_21,
            max_relative = 1e-13
        );
    }

    #[test]
    fn reflection() {
        for &w in &[0.1, 1.0, 3.0, 7.5] {
            let lhs = normal_tail(-w).unwrap();
            let rhs = 1.0 - normal_tail(w).unwrap();
            assert!((lhs - rhs).abs() < 1e-15, "w={w}");
        }
    }

    #[test]
    fn non_finite_rejected() {
        assert!(normal_tail(f64::NAN).is_err());
        assert!(normal_tail(f64::INFINITY).is_err());
        assert!(stein_solution(0.0, f64::NEG_INFINITY).is_err());
        assert!(g_bracket(-1.0).is_err());
    }

    #[test]
    fn regimes_agree_at_cutoff() {
        let below = 0.5 - (-0.5 * 4.0f64).exp() / SQRT_2PI * odd_double_factorial_series(2.0);
        let above = mills_parts(2.0).0 / SQRT_2PI * (-2.0f64).exp();
        assert_relative_eq!(below, above, max_relative = 1e-13);
    }

    #[test]
    fn log_tail_never_infinite() {
        let lt = log_normal_tail(60.0).unwrap();
        assert!(lt.is_finite());
        assert!(lt < -1800.0);
        assert!(normal_tail(38.0).unwrap() > 0.0);
    }

    #[test]
    fn stein_solution_at_origin() {
        // √(2π) · 1/2 · 1/2
        assert_relative_eq!(
            stein_solution(0.0, 0.0).unwrap(),
            0.626_657_068_657_750_1,
            max_relative = 1e-14
        );
    }

    #[test]
    fn stein_solution_vanishes_far_right() {
        let f = stein_solution(3.0, 1e6).unwrap();
        assert!((0.0..1e-5).contains(&f));
    }

    #[test]
    fn stein_solution_continuous_at_x() {
        for &x in &[-2.0, 0.0, 1.5, 6.0] {
            let left = stein_solution(x, x - 1e-12).unwrap();
            let right = stein_solution(x, x).unwrap();
            assert_relative_eq!(left, right, max_relative = 1e-9);
        }
    }

    #[test]
    fn g_examples() {
        // (√(2π)·1·(1/2) + 0)·(1 − Φ(1)), w < x branch
        let expected = SQRT_2PI * 0.5 * 0.158_655_253_931_457_05;
        assert_relative_eq!(
            stein_solution_derivative_g(1.0, 0.0).unwrap(),
            expected,
            max_relative = 1e-13
        );
        let b0 = g_bracket(0.0).unwrap();
        assert_relative_eq!(b0, SQRT_2PI / 2.0, max_relative = 1e-15);
        let b5 = g_bracket(5.0).unwrap();
        assert!((0.0..=2.0 / 126.0).contains(&b5));
    }

    #[test]
    fn bracket_branches_agree() {
        let direct = SQRT_2PI * (1.0 + 4.0) * scaled_upper(2.0) - 2.0;
        assert_relative_eq!(bracket(2.0), direct, max_relative = 1e-12);
    }

    #[test]
    fn tail_lower_bound() {
        // e^{-x²/2}/(2(1+x)) is a lower bound only up to x ≈ 2.2174; with
        // √(2π) in place of 2 it holds on the whole grid.
        for i in 0..=3800 {
            let x = i as f64 * 0.01;
            let m = scaled_upper(x);
            if x <= 2.2 {
                assert!(m >= 1.0 / (2.0 * (1.0 + x)), "x={x}");
            }
            assert!(m >= 1.0 / (SQRT_2PI * (1.0 + x)), "x={x}");
        }
        assert!(scaled_upper(2.25) < 1.0 / (2.0 * 3.25));
    }
}
