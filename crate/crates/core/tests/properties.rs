use mdlab::models::antivoter::AntiVoterChain;
use mdlab::models::binarycode::{exchangeable_step, popcount_counts, reflected_counts, CodeInstance, CodeSystem};
use mdlab::models::combinatorial::{double_center, CombArray};
use mdlab::models::curieweiss::{solve_magnetization, CwParams};
use mdlab::models::independent::ComponentList;
use mdlab::stein::{Provenance, RemainderVariant};
use mdlab::{band, normal_tail, total_variation, zero_bias_band, ExactDistribution, SteinBudget};
use proptest::prelude::*;

fn arb_law() -> impl Strategy<Value = ExactDistribution> {
    prop::collection::vec((-20i32..20, 0.01f64..1.0), 1..12)
        .prop_map(|atoms| ExactDistribution::from_weights(atoms.into_iter().map(|(x, w)| (x as f64 * 0.5, w))).unwrap())
}

fn arb_nondegenerate() -> impl Strategy<Value = ExactDistribution> {
    arb_law().prop_filter("needs two atoms", |d| d.len() >= 2)
}

fn same_atoms(a: &ExactDistribution, b: &ExactDistribution) -> bool {
    a.support().len() == b.support().len()
        && a.support()
            .iter()
            .zip(b.support())
            .all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(1.0))
        && a.probs().iter().zip(b.probs()).all(|(p, q)| (p - q).abs() <= 1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normal_tail_symmetry_and_monotonicity(w in -38.0f64..38.0, dw in 0.0f64..1.0) {
        let a = normal_tail(w).unwrap();
        prop_assert!((a + normal_tail(-w).unwrap() - 1.0).abs() <= 1e-14);
        prop_assert!(normal_tail(w + dw).unwrap() <= a);
    }

    #[test]
    fn logp_normalized_and_support_increasing(d in arb_law()) {
        prop_assert!(d.validate().is_ok());
        prop_assert!(d.support().windows(2).all(|w| w[0] < w[1]));
        let total: f64 = d.probs().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn standardize_gives_unit_moments(d in arb_nondegenerate()) {
        let m = d.standardized().unwrap().moments();
        prop_assert!(m.mean.abs() <= 1e-10);
        prop_assert!((m.variance - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn convolution_commutes_and_associates(a in arb_law(), b in arb_law(), c in arb_law()) {
        let ab = a.convolve(&b).unwrap();
        prop_assert!(same_atoms(&ab, &b.convolve(&a).unwrap()));
        let left = ab.convolve(&c).unwrap();
        let right = a.convolve(&b.convolve(&c).unwrap()).unwrap();
        prop_assert!(same_atoms(&left, &right));
    }

    #[test]
    fn convolution_adds_moments(a in arb_law(), b in arb_law()) {
        let (ma, mb, mab) = (a.moments(), b.moments(), a.convolve(&b).unwrap().moments());
        prop_assert!((mab.mean - ma.mean - mb.mean).abs() <= 1e-10);
        prop_assert!((mab.variance - ma.variance - mb.variance).abs() <= 1e-9);
    }

    #[test]
    fn upper_tail_is_non_increasing(d in arb_law(), x in -12.0f64..12.0, dx in 0.0f64..3.0) {
        prop_assert!(d.upper_tail(x + dx) <= d.upper_tail(x));
        prop_assert!(d.upper_tail(d.support()[0]) == 0.0);
    }

    #[test]
    fn mgf_is_convex(d in arb_law(), t in -2.0f64..2.0, h in 0.01f64..1.0) {
        let (lo, mid, hi) = (d.mgf(t - h), d.mgf(t), d.mgf(t + h));
        prop_assert!(lo + hi - 2.0 * mid >= -1e-9 * (1.0 + mid.abs()));
    }

    #[test]
    fn zero_bias_density_integrates_to_one(d in arb_nondegenerate()) {
        let z = d.standardized().unwrap().zero_bias().unwrap();
        prop_assert!((z.total_mass() - 1.0).abs() <= 1e-10);
        let s = d.standardized().unwrap();
        let (lo, hi) = (s.support()[0], *s.support().last().unwrap());
        prop_assert!(z.density(lo - 1e-9) == 0.0 && z.density(hi + 1e-9) == 0.0);
    }

    #[test]
    fn total_variation_is_a_metric_value(a in arb_law(), b in arb_law()) {
        let t = total_variation(&a, &b);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&t));
        prop_assert!((t - total_variation(&b, &a)).abs() <= 1e-15);
        prop_assert!(total_variation(&a, &a) == 0.0);
    }

    #[test]
    fn band_grows_with_x_and_contains_one(
        delta in 0.0f64..0.5, delta1 in 0.0f64..0.5, delta2 in 0.0f64..0.2,
        x in 0.0f64..1.5, dx in 0.0f64..0.5,
    ) {
        let b = SteinBudget::new(delta, delta1, delta2, 1.0, None, RemainderVariant::RLinear, Provenance::Exact).unwrap();
        let cap = b.range_cap();
        prop_assume!(x + dx <= cap);
        let (b0, b1) = (band(&b, x).unwrap(), band(&b, x + dx).unwrap());
        prop_assert!(b0.lower <= 1.0 && 1.0 <= b0.upper);
        prop_assert!(b1.upper - b1.lower >= b0.upper - b0.lower - 1e-12);
        let z = zero_bias_band(delta.max(1e-6), x).unwrap();
        prop_assert!(z.lower <= 1.0 && 1.0 <= z.upper);
    }

    #[test]
    fn exchangeable_step_is_an_involution(n in 1u64..100_000, x_frac in 0.0f64..1.0, i_frac in 0.0f64..1.0) {
        let x = ((n as f64) * x_frac) as u64;
        let k = 64 - n.leading_zeros();
        let i = 1 + ((k as f64 - 1.0) * i_frac).round() as u32;
        let y = exchangeable_step(n, x, i).unwrap();
        prop_assert!(y <= n);
        prop_assert_eq!(exchangeable_step(n, y, i).unwrap(), x);
    }

    #[test]
    fn digit_counts_sum_to_n_plus_one(n in 0u64..u64::MAX / 2) {
        let total: u128 = popcount_counts(n).iter().sum();
        prop_assert_eq!(total, n as u128 + 1);
        let total: u128 = reflected_counts(n).iter().sum();
        prop_assert_eq!(total, n as u128 + 1);
    }

    #[test]
    fn code_laws_have_expected_size(n in 2u64..1_000_000) {
        for system in [CodeSystem::BinaryExpansion, CodeSystem::ReflectedExtreme] {
            let inst = CodeInstance::new(n, system).unwrap();
            let law = inst.law().unwrap();
            prop_assert!(law.validate().is_ok());
            prop_assert!(law.support().iter().all(|s| (0.0..=64.0).contains(s)));
        }
    }

    #[test]
    fn combinatorial_sigma_is_row_permutation_invariant(seed in any::<u64>(), n in 3usize..7) {
        let raw = mdlab::cli::suite::random_array(seed, n);
        let a = double_center(&raw);
        let mut shuffled = a.clone();
        shuffled.rotate_left(1);
        let s1 = CombArray::validate_and_sigma(&a).unwrap().sigma();
        let s2 = CombArray::validate_and_sigma(&shuffled).unwrap().sigma();
        prop_assert!((s1 - s2).abs() <= 1e-12 * s1);
    }

    #[test]
    fn antivoter_stationary_is_invariant(n in 4usize..400) {
        let c = AntiVoterChain::transition_rates(n).unwrap();
        prop_assert!(c.stationarity_residual() <= 1e-12);
        let m = c.stationary_law().unwrap().moments();
        prop_assert!(m.mean.abs() <= 1e-10 && (m.variance - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn magnetization_solves_fixed_point(beta in 0.05f64..3.0, h in -1.0f64..1.0) {
        prop_assume!((beta - 1.0).abs() > 1e-3 || h.abs() > 1e-3);
        let (_, roots) = solve_magnetization(beta, h).unwrap();
        for m in roots {
            prop_assert!((m - (beta * m + beta * h).tanh()).abs() <= 1e-13);
        }
    }

    #[test]
    fn curie_weiss_chain_is_stationary(n in 2usize..400, beta in 0.1f64..2.0, h in -0.5f64..0.5) {
        prop_assume!((beta - 1.0).abs() > 1e-3 || h.abs() > 1e-3);
        let p = CwParams::new(n, beta, h).unwrap();
        prop_assert!(p.stationarity_residual() <= 1e-10);
    }

    #[test]
    fn gamma_is_non_decreasing(n in 2usize..60, x in 0.0f64..5.0, dx in 0.0f64..5.0) {
        let c = ComponentList::rademacher(n).unwrap();
        prop_assert!(c.gamma(x + dx).unwrap() >= c.gamma(x).unwrap() - 1e-15);
    }
}
