use approx::relative_eq;
use platoon_core::{
    bisect_best_response, check_convexity, fee_thresholds, follower_best_response, follower_cost, provider_profit,
    solve_equilibrium, FeeRegime, ResponseRegime, Scenario, ScenarioSampler,
};
use proptest::prelude::*;

fn scenario() -> impl Strategy<Value = Scenario> {
    any::<u64>().prop_map(|seed| ScenarioSampler::default().scenarios(seed, 1)[0])
}

fn second_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    f(x + h) - 2.0 * f(x) + f(x - h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn follower_cost_is_quadratic_with_known_curvature(s in scenario(), fee in 0.0..500.0f64) {
        let trip = s.kinematics.trip_distance;
        let h = trip / 3.0;
        let v = s.kinematics.solo_velocity;
        let expected = 2.0 * s.rates.fv_cognitive_rate / (v * v) * h * h;
        let got = second_difference(|d| follower_cost(&s, d, fee).unwrap().total, trip / 2.0, h);
        prop_assert!(relative_eq!(got, expected, max_relative = 1e-9), "{got} vs {expected}");

        let curv = check_convexity(&s).unwrap();
        prop_assert!(curv.holds());
        prop_assert_eq!(curv.follower, 2.0 * s.rates.fv_cognitive_rate / (v * v));
    }

    #[test]
    fn provider_profit_is_concave_quadratic(s in scenario(), fee in 0.0..500.0f64) {
        let trip = s.kinematics.trip_distance;
        let h = trip / 3.0;
        let vp = s.kinematics.platoon_velocity;
        let expected = -2.0 * s.rates.psp_cognitive_rate / (vp * vp) * h * h;
        let got = second_difference(|d| provider_profit(&s, d, fee).unwrap(), trip / 2.0, h);
        prop_assert!(relative_eq!(got, expected, max_relative = 1e-9), "{got} vs {expected}");
    }

    #[test]
    fn solo_cost_ignores_platoon_terms(
        s in scenario(),
        fee in 0.0..500.0f64,
        xi in 0.0..=1.0f64,
        load in 0.0..0.5f64,
        gamma_f in 0.0..200.0f64,
    ) {
        let base = follower_cost(&s, 0.0, 0.0).unwrap().total;
        let mut other = s;
        other.load.follower_share = xi;
        other.load.total_load = load;
        other.subsidy.follower_subsidy = gamma_f;
        prop_assert_eq!(follower_cost(&other, 0.0, fee).unwrap().total, base);
    }

    #[test]
    fn money_scaling_is_homogeneous(s in scenario(), k in 0.1..10.0f64, d_frac in 0.0..=1.0f64, fee in 0.0..300.0f64) {
        let scaled = s.with_money_scaled(k);
        let d = d_frac * s.kinematics.trip_distance;
        let a = follower_cost(&s, d, fee).unwrap().total;
        let b = follower_cost(&scaled, d, k * fee).unwrap().total;
        prop_assert!(relative_eq!(b, k * a, max_relative = 1e-9, epsilon = 1e-9 * k * a.abs().max(1.0)));
        let a = provider_profit(&s, d, fee).unwrap();
        let b = provider_profit(&scaled, d, k * fee).unwrap();
        prop_assert!(relative_eq!(b, k * a, max_relative = 1e-9, epsilon = 1e-9 * k * a.abs().max(1.0)));
    }

    #[test]
    fn argmax_is_scale_invariant(s in scenario(), k in 0.1..10.0f64) {
        let eq = solve_equilibrium(&s).unwrap();
        let scaled = solve_equilibrium(&s.with_money_scaled(k)).unwrap();
        prop_assert_eq!(eq.fee_regime, scaled.fee_regime);
        let trip = s.kinematics.trip_distance;
        prop_assert!((eq.distance - scaled.distance).abs() <= 1e-9 * trip);
        prop_assert!(relative_eq!(scaled.fee, k * eq.fee, max_relative = 1e-9, epsilon = 1e-9 * k));
        prop_assert!(relative_eq!(
            scaled.provider_profit,
            k * eq.provider_profit,
            max_relative = 1e-9,
            epsilon = 1e-9 * k * trip
        ));
    }

    #[test]
    fn bisection_agrees_with_closed_form(s in scenario(), t in 0.0..=1.0f64) {
        let th = fee_thresholds(&s).unwrap();
        let fee = (th.full_participation + t * (th.no_trade - th.full_participation)).max(0.0);
        let br = follower_best_response(&s, fee).unwrap();
        let bisected = bisect_best_response(&s, fee).unwrap();
        if br.regime == ResponseRegime::Interior {
            prop_assert!((br.distance - bisected).abs() <= 1e-9, "{} vs {bisected}", br.distance);
        } else {
            prop_assert!((br.distance - bisected).abs() <= 1e-9 * s.kinematics.trip_distance.max(1.0));
        }
    }
}

#[test]
fn participation_is_voluntary_and_profitable() {
    for (i, s) in ScenarioSampler::default().scenarios(17, 1000).iter().enumerate() {
        let eq = solve_equilibrium(s).unwrap();
        let slack = 1e-9 * eq.solo_baseline_cost.abs().max(1.0);
        assert!(
            eq.follower_breakdown.total <= eq.solo_baseline_cost + slack,
            "scenario {i}: {} > {}",
            eq.follower_breakdown.total,
            eq.solo_baseline_cost
        );
        assert!(eq.provider_profit >= 0.0, "scenario {i}: profit {}", eq.provider_profit);
        if eq.fee_regime == FeeRegime::NoTrade {
            assert_eq!(eq.distance, 0.0);
        }
    }
}
