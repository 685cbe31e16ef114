//! Independent checks of the closed-form solutions.
//!
//! Nothing here calls into [`crate::equilibrium`]'s formulas. Gradients are
//! taken symbolically from the raw cost and profit definitions in
//! [`crate::model`], the follower's best response is found by bisection on its
//! (monotone) gradient, and the bilevel oracle searches a fee grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::equilibrium::{BestResponse, Equilibrium, FeeRegime};
use crate::error::ModelError;
use crate::model::{
    aero_constant, provider_profit, AeroParams, ComputeLoad, CostRates, Kinematics, Scenario, SubsidyPolicy,
    DEFAULT_EMISSION_FACTOR,
};

/// Relative tolerance used for KKT certificates of closed-form solutions.
pub const KKT_TOLERANCE: f64 = 1e-9;

/// Absolute thresholds a certificate's residuals were compared against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktLimits {
    pub stationarity: f64,
    pub complementary_slackness: f64,
    pub primal: f64,
    pub dual: f64,
}

/// Residuals of a KKT system at a candidate solution.
///
/// A failing certificate is an ordinary return value.
#[derive(Debug, Clone, PartialEq)]
pub struct KktCertificate {
    pub stationarity_residual: f64,
    pub complementary_slackness_residuals: Vec<f64>,
    pub primal_violations: Vec<f64>,
    pub dual_violations: Vec<f64>,
    pub limits: KktLimits,
    pub passed: bool,
}

impl KktCertificate {
    fn new(
        stationarity_residual: f64,
        complementary_slackness_residuals: Vec<f64>,
        primal_violations: Vec<f64>,
        dual_violations: Vec<f64>,
        limits: KktLimits,
    ) -> Self {
        let within = |values: &[f64], limit: f64| values.iter().all(|v| v.abs() <= limit);
        let passed = stationarity_residual.abs() <= limits.stationarity
            && within(&complementary_slackness_residuals, limits.complementary_slackness)
            && within(&primal_violations, limits.primal)
            && within(&dual_violations, limits.dual);
        Self {
            stationarity_residual,
            complementary_slackness_residuals,
            primal_violations,
            dual_violations,
            limits,
            passed,
        }
    }

    /// Largest residual divided by its limit; below 1 means passed.
    pub fn worst_ratio(&self) -> f64 {
        let ratio = |v: f64, limit: f64| v.abs() / limit;
        let mut worst = ratio(self.stationarity_residual, self.limits.stationarity);
        for &v in &self.complementary_slackness_residuals {
            worst = worst.max(ratio(v, self.limits.complementary_slackness));
        }
        for &v in &self.primal_violations {
            worst = worst.max(ratio(v, self.limits.primal));
        }
        for &v in &self.dual_violations {
            worst = worst.max(ratio(v, self.limits.dual));
        }
        worst
    }
}

/// Derivative of the follower's trip cost in the platoon distance, term by term.
#[derive(Debug, Clone, Copy)]
struct FollowerGradient {
    trip: f64,
    /// `2 c_o / v²`
    curvature: f64,
    /// Fee-independent constant terms.
    constant: f64,
    /// Sum of magnitudes of the constant terms.
    magnitude: f64,
}

impl FollowerGradient {
    fn new(s: &Scenario) -> Self {
        let v = s.kinematics.solo_velocity;
        let vp = s.kinematics.platoon_velocity;
        let r = &s.rates;
        let t = aero_constant(&s.aero);
        let fv_load = s.load.follower_share * s.load.total_load;
        let terms = [
            -s.aero.drag_alone * t * r.fuel_price * v * v,
            s.aero.drag_platoon * t * r.fuel_price * vp * vp,
            r.fv_delay_rate / vp,
            -r.fv_delay_rate / v,
            0.5 * r.compute_rate * fv_load * fv_load,
            -s.subsidy.follower_subsidy,
        ];
        Self {
            trip: s.kinematics.trip_distance,
            curvature: 2.0 * r.fv_cognitive_rate / (v * v),
            constant: terms.iter().sum(),
            magnitude: terms.iter().map(|x| x.abs()).sum(),
        }
    }

    fn at(&self, d: f64, fee: f64) -> f64 {
        -self.curvature * (self.trip - d) + self.constant + fee
    }

    fn magnitude_at(&self, d: f64, fee: f64) -> f64 {
        (self.curvature * (self.trip - d)).abs() + self.magnitude + fee.abs()
    }

    /// Fee at which the gradient vanishes at distance `d`.
    fn break_even_fee(&self, d: f64) -> f64 {
        -self.at(d, 0.0)
    }

    /// Minimiser of the follower's cost over `[0, D]` by bisection on the gradient.
    fn minimiser(&self, fee: f64) -> f64 {
        if self.at(0.0, fee) >= 0.0 {
            return 0.0;
        }
        if self.at(self.trip, fee) <= 0.0 {
            return self.trip;
        }
        let (mut lo, mut hi) = (0.0_f64, self.trip);
        let width = 1e-12 * self.trip.max(1.0);
        while hi - lo > width {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.at(mid, fee) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Derivative of the provider's profit in the platoon distance at a fixed fee.
#[derive(Debug, Clone, Copy)]
struct ProviderGradient {
    /// `2 c_o,psp / v_p²`
    curvature: f64,
    constant: f64,
    magnitude: f64,
}

impl ProviderGradient {
    fn new(s: &Scenario) -> Self {
        let vp = s.kinematics.platoon_velocity;
        let r = &s.rates;
        let t = aero_constant(&s.aero);
        let psp_load = (1.0 - s.load.follower_share) * s.load.total_load;
        let terms = [
            s.subsidy.provider_subsidy,
            -r.psp_delay_rate / vp,
            -0.5 * r.compute_rate * psp_load * psp_load,
            -t * s.aero.drag_alone * vp * vp * r.fuel_price,
        ];
        Self {
            curvature: 2.0 * r.psp_cognitive_rate / (vp * vp),
            constant: terms.iter().sum(),
            magnitude: terms.iter().map(|x| x.abs()).sum(),
        }
    }

    fn at(&self, d: f64, fee: f64) -> f64 {
        fee + self.constant - self.curvature * d
    }

    fn magnitude_at(&self, d: f64, fee: f64) -> f64 {
        fee.abs() + self.magnitude + (self.curvature * d).abs()
    }
}

/// Follower's best response to `fee`, found by bisection on the cost gradient.
pub fn bisect_best_response(s: &Scenario, fee: f64) -> Result<f64, ModelError> {
    s.validate()?;
    Ok(FollowerGradient::new(s).minimiser(fee))
}

/// Derivative of the follower's trip cost in `d`, from the raw cost terms.
pub fn follower_cost_gradient(s: &Scenario, d: f64, fee: f64) -> f64 {
    FollowerGradient::new(s).at(d, fee)
}

/// Checks the follower's KKT system at `br` for the given fee.
///
/// Stationarity `∇_d c_FV − λ₁ + λ₂ = 0`, complementary slackness `λ₁ d = 0`
/// and `λ₂ (D − d) = 0`, primal `0 ≤ d ≤ D`, dual `λ ≥ 0`. Limits are `tol`
/// relative to the magnitudes of the gradient terms.
pub fn check_follower_kkt(s: &Scenario, fee: f64, br: &BestResponse, tol: f64) -> Result<KktCertificate, ModelError> {
    s.validate()?;
    let grad = FollowerGradient::new(s);
    let trip = s.kinematics.trip_distance;
    let d = br.distance;
    let (low, high) = (br.multiplier_low, br.multiplier_high);

    let scale = (grad.magnitude_at(d, fee) + low.abs() + high.abs()).max(1.0);
    let length = trip.max(1.0);
    let limits = KktLimits {
        stationarity: tol * scale,
        complementary_slackness: tol * scale * length,
        primal: tol * length,
        dual: tol * scale,
    };

    Ok(KktCertificate::new(
        grad.at(d, fee) - low + high,
        vec![low * d, high * (trip - d)],
        vec![(-d).max(0.0), (d - trip).max(0.0)],
        vec![(-low).max(0.0), (-high).max(0.0)],
        limits,
    ))
}

/// Checks the provider's optimality conditions at an equilibrium.
///
/// Every regime also checks that the reported distance is the follower's
/// best response to the reported fee. For an interior fee the substituted
/// profit must be stationary (`∂W/∂c_p + θ₁ = 0`). At full participation the
/// `d = D` problem `max c_p·D + … s.t. 0 ≤ c_p ≤ K` must hold with
/// `D + μ₁ − μ₂ = 0`, and raising the fee past `K` must not pay. At a zero
/// fee `θ₁ = −∂W/∂c_p ≥ 0`. With no trade the fee must be the smallest one
/// that keeps the follower out, and lowering it must not pay.
pub fn check_provider_kkt(s: &Scenario, eq: &Equilibrium, tol: f64) -> Result<KktCertificate, ModelError> {
    s.validate()?;
    let follower = FollowerGradient::new(s);
    let provider = ProviderGradient::new(s);
    let trip = s.kinematics.trip_distance;
    let reach = 1.0 / follower.curvature;
    let (fee, d) = (eq.fee, eq.distance);
    let theta = eq.psp_multiplier;
    let (mu_low, mu_high) = eq.boundary_multipliers.unwrap_or((0.0, 0.0));
    let full_fee = follower.break_even_fee(trip);
    let no_trade_fee = follower.break_even_fee(0.0);

    let response = follower.minimiser(fee);
    let consistency = (d - response).abs();

    // dW/dc_p along the interior branch, where dd/dc_p = -reach.
    let interior_slope = |d: f64, fee: f64| d - reach * provider.at(d, fee);

    let scale = (d.abs() + reach * provider.magnitude_at(d, fee) + theta.abs() + mu_low.abs() + mu_high.abs()).max(1.0);
    let fee_scale = fee.abs().max(full_fee.abs()).max(1.0);
    let limits = KktLimits {
        stationarity: tol * scale,
        complementary_slackness: tol * scale * fee_scale,
        primal: tol * trip.max(fee_scale),
        dual: tol * scale,
    };

    let fee_sign = (-fee).max(0.0);

    let cert = match eq.fee_regime {
        FeeRegime::InteriorFee => KktCertificate::new(
            interior_slope(response, fee) + theta,
            vec![theta * fee],
            vec![fee_sign, consistency],
            vec![(-theta).max(0.0)],
            limits,
        ),
        FeeRegime::ClampedToFullParticipation => {
            let beyond = interior_slope(trip, full_fee);
            KktCertificate::new(
                trip + mu_low - mu_high,
                vec![mu_low * fee, mu_high * (full_fee - fee)],
                vec![fee_sign, (fee - full_fee).max(0.0), consistency],
                vec![
                    (-mu_low).max(0.0),
                    (-mu_high).max(0.0),
                    beyond.max(0.0),
                    if eq.boundary_multipliers.is_some() {
                        0.0
                    } else {
                        f64::INFINITY
                    },
                ],
                limits,
            )
        }
        FeeRegime::ClampedToZeroFee => KktCertificate::new(
            interior_slope(response, fee) + theta,
            vec![theta * fee],
            vec![fee_sign, consistency],
            vec![(-theta).max(0.0)],
            limits,
        ),
        FeeRegime::NoTrade => {
            let smallest_exit_fee = if trip == 0.0 { 0.0 } else { no_trade_fee.max(0.0) };
            let below = if trip > 0.0 && no_trade_fee > 0.0 {
                (-interior_slope(0.0, no_trade_fee)).max(0.0)
            } else {
                0.0
            };
            KktCertificate::new(
                theta,
                vec![theta * fee],
                vec![fee_sign, (fee - smallest_exit_fee).abs(), consistency, d.abs()],
                vec![(-theta).max(0.0), below],
                limits,
            )
        }
    };
    Ok(cert)
}

/// Second derivatives of the two players' objectives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvatures {
    /// `∂²c_FV/∂d²`; must be ≥ 0.
    pub follower: f64,
    /// `∂²W/∂c_p²` of the provider profit with the follower's interior
    /// response substituted; must be ≤ 0.
    pub provider: f64,
}

impl Curvatures {
    /// A zero follower curvature makes the follower's problem linear.
    pub fn is_degenerate(&self) -> bool {
        self.follower == 0.0
    }

    pub fn holds(&self) -> bool {
        self.follower >= 0.0 && self.provider <= 0.0
    }
}

/// Convexity of the follower's problem and concavity of the provider's.
///
/// A zero follower cognitive rate is accepted here (and reported as
/// degenerate); every other scenario field must be valid.
pub fn check_convexity(s: &Scenario) -> Result<Curvatures, ModelError> {
    match s.validate() {
        Err(ModelError::NotPositive {
            field: "fv_cognitive_rate",
            value: 0.0,
        }) => {
            let mut probe = *s;
            probe.rates.fv_cognitive_rate = 1.0;
            probe.validate()?;
        }
        other => other?,
    }
    let follower = FollowerGradient::new(s).curvature;
    let provider = ProviderGradient::new(s).curvature;
    let reach = 1.0 / follower;
    // d/dc_p of (d - reach * ∂w/∂d) with dd/dc_p = -reach.
    let provider_curvature = -reach * (2.0 + provider * reach);
    Ok(Curvatures {
        follower,
        provider: provider_curvature,
    })
}

/// Best point found by the grid search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub fee: f64,
    pub distance: f64,
    pub profit: f64,
    pub fee_grid_step: f64,
}

/// Brute-force solution of the bilevel problem.
///
/// Evaluates every fee `i · step` in `[0, no-trade fee + margin]`, solves the
/// follower's problem at each by bisection and keeps the most profitable
/// point; ties go to the lowest fee. Grid points are evaluated in parallel.
pub fn brute_force_equilibrium(s: &Scenario, fee_grid_step: f64) -> Result<OracleResult, ModelError> {
    s.validate()?;
    if !(fee_grid_step.is_finite() && fee_grid_step > 0.0) {
        return Err(ModelError::InvalidGridStep(fee_grid_step));
    }
    let follower = FollowerGradient::new(s);
    let upper = follower.break_even_fee(0.0) + 1.0 + 10.0 * fee_grid_step;
    if !upper.is_finite() {
        return Err(ModelError::UnboundedFeeGrid(upper));
    }
    let points = (upper.max(0.0) / fee_grid_step).floor() as usize + 1;

    let evaluate = |i: usize| {
        let fee = i as f64 * fee_grid_step;
        let d = follower.minimiser(fee);
        let profit = provider_profit(s, d, fee).unwrap_or(f64::NEG_INFINITY);
        (profit, i, d)
    };
    let better = |a: (f64, usize, f64), b: (f64, usize, f64)| {
        if a.0 > b.0 || (a.0 == b.0 && a.1 < b.1) {
            a
        } else {
            b
        }
    };
    let (profit, index, distance) = (0..points)
        .into_par_iter()
        .map(evaluate)
        .reduce(|| (f64::NEG_INFINITY, usize::MAX, 0.0), better);

    Ok(OracleResult {
        fee: index as f64 * fee_grid_step,
        distance,
        profit,
        fee_grid_step,
    })
}

/// Gaps between a closed-form equilibrium and the grid oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleAgreement {
    pub fee_gap: f64,
    pub distance_gap: f64,
    /// Oracle profit minus closed-form profit, relative to the oracle's magnitude.
    pub profit_shortfall: f64,
    pub fee_limit: f64,
    pub distance_limit: f64,
    pub passed: bool,
}

/// Relative slack allowed on the closed-form profit against the oracle.
pub const PROFIT_TOLERANCE: f64 = 1e-6;

impl OracleAgreement {
    /// `|Δfee| ≤ step`, `|Δd| ≤ (v²/2c_o)·step` and closed profit no worse than
    /// the oracle's up to [`PROFIT_TOLERANCE`].
    pub fn compare(s: &Scenario, eq: &Equilibrium, oracle: &OracleResult) -> Self {
        let v = s.kinematics.solo_velocity;
        let reach = v * v / (2.0 * s.rates.fv_cognitive_rate);
        let fee_limit = oracle.fee_grid_step;
        let distance_limit = reach * oracle.fee_grid_step;
        let fee_gap = (eq.fee - oracle.fee).abs();
        let distance_gap = (eq.distance - oracle.distance).abs();
        let profit_shortfall = (oracle.profit - eq.provider_profit) / oracle.profit.abs().max(1e-300);
        let passed = fee_gap <= fee_limit * (1.0 + 1e-9)
            && distance_gap <= distance_limit * (1.0 + 1e-9)
            && eq.provider_profit >= oracle.profit - PROFIT_TOLERANCE * oracle.profit.abs();
        Self {
            fee_gap,
            distance_gap,
            profit_shortfall,
            fee_limit,
            distance_limit,
            passed,
        }
    }
}

/// Draws random valid scenarios.
///
/// Money rates are log-uniform, `β ∈ [0.3, 1.5]` and `L_T ∈ [0, 0.5]`.
/// Ranges keep `β` and `c_o` well away from zero, where the closed forms are
/// singular.
#[derive(Debug, Clone, Copy)]
pub struct ScenarioSampler {
    pub beta: (f64, f64),
    pub total_load: (f64, f64),
}

impl Default for ScenarioSampler {
    fn default() -> Self {
        Self {
            beta: (0.3, 1.5),
            total_load: (0.0, 0.5),
        }
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..=hi.ln())).exp()
}

impl ScenarioSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Scenario {
        let drag_alone = rng.gen_range(0.4..=0.8);
        let solo_velocity = rng.gen_range(45.0..=80.0);
        let beta = rng.gen_range(self.beta.0..=self.beta.1);
        Scenario {
            aero: AeroParams {
                frontal_area: rng.gen_range(5.0..=12.0),
                drag_alone,
                drag_platoon: drag_alone * rng.gen_range(0.5..=1.0),
                air_density: rng.gen_range(1.1..=1.3),
                fuel_density: rng.gen_range(820.0..=870.0),
                specific_fuel_consumption: rng.gen_range(0.15..=0.35),
                vehicle_efficiency: rng.gen_range(0.3..=1.0),
            },
            rates: CostRates {
                fv_delay_rate: log_uniform(rng, 15.0, 1500.0),
                psp_delay_rate: log_uniform(rng, 15.0, 1500.0),
                fuel_price: log_uniform(rng, 30.0, 300.0),
                fv_cognitive_rate: log_uniform(rng, 60.0, 600.0),
                psp_cognitive_rate: log_uniform(rng, 60.0, 600.0),
                compute_rate: log_uniform(rng, 40.0, 4000.0),
            },
            kinematics: Kinematics {
                solo_velocity,
                platoon_velocity: beta * solo_velocity,
                trip_distance: rng.gen_range(100.0..=800.0),
            },
            load: ComputeLoad {
                total_load: rng.gen_range(self.total_load.0..=self.total_load.1),
                follower_share: rng.gen_range(0.0..=1.0),
            },
            subsidy: SubsidyPolicy {
                follower_subsidy: rng.gen_range(0.0..=150.0),
                provider_subsidy: rng.gen_range(0.0..=150.0),
            },
            emission_factor: DEFAULT_EMISSION_FACTOR,
        }
    }

    /// `count` scenarios from a ChaCha8 stream seeded with `seed`.
    pub fn scenarios(&self, seed: u64, count: usize) -> Vec<Scenario> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.sample(&mut rng)).collect()
    }
}
