//! Closed-form best responses and the subgame-perfect equilibrium of the
//! provider/follower pricing game.
//!
//! The provider (leader) announces a per-km fee; the follower picks how many
//! km of its trip to ride in the platoon. The follower's cost is a convex
//! quadratic in the platoon distance, so its best response is the clamped
//! stationary point. Substituting it into the provider's profit gives a
//! piecewise function of the fee: linear and increasing below the
//! full-participation threshold, a concave quadratic between the two
//! thresholds, and zero above the no-trade threshold. The global optimum is
//! therefore one of a handful of candidate fees.

use std::fmt;

use crate::error::ModelError;
use crate::model::{aero_constant, follower_cost, provider_profit, CostBreakdown, Scenario, SubsidyPolicy};

/// Absolute tolerance (fee units) for classifying a fee against the regime thresholds.
pub const THRESHOLD_TOLERANCE: f64 = 1e-9;

/// Which constraint, if any, binds in the follower's problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResponseRegime {
    /// The follower stays out of the platoon.
    CornerZero,
    Interior,
    /// The follower rides the whole trip in the platoon.
    CornerFull,
}

impl ResponseRegime {
    pub fn label(self) -> &'static str {
        match self {
            ResponseRegime::CornerZero => "corner_zero",
            ResponseRegime::Interior => "interior",
            ResponseRegime::CornerFull => "corner_full",
        }
    }
}

impl fmt::Display for ResponseRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Follower's optimal platoon distance for one fee, with the multipliers of
/// the `d >= 0` and `d <= D` constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponse {
    pub distance: f64,
    pub regime: ResponseRegime,
    pub multiplier_low: f64,
    pub multiplier_high: f64,
}

/// How the equilibrium fee was determined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeeRegime {
    /// Stationary point of the provider's substituted profit.
    InteriorFee,
    /// The highest fee at which the follower still rides the whole trip.
    ClampedToFullParticipation,
    /// The non-negativity constraint on the fee binds.
    ClampedToZeroFee,
    /// No fee earns the provider a positive profit; the follower drives alone.
    NoTrade,
}

impl FeeRegime {
    pub fn label(self) -> &'static str {
        match self {
            FeeRegime::InteriorFee => "interior_fee",
            FeeRegime::ClampedToFullParticipation => "full_participation",
            FeeRegime::ClampedToZeroFee => "zero_fee",
            FeeRegime::NoTrade => "no_trade",
        }
    }
}

impl fmt::Display for FeeRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Subgame-perfect equilibrium of the game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    /// Per-km fee set by the provider.
    pub fee: f64,
    /// Distance the follower rides in the platoon, km.
    pub distance: f64,
    pub fee_regime: FeeRegime,
    pub best_response: BestResponse,
    pub follower_breakdown: CostBreakdown,
    pub provider_profit: f64,
    /// Follower cost when driving the whole trip alone.
    pub solo_baseline_cost: f64,
    /// Multiplier of the provider's `fee >= 0` constraint.
    pub psp_multiplier: f64,
    /// Multipliers of `fee >= 0` and `fee <= K` when the follower rides the
    /// whole trip.
    pub boundary_multipliers: Option<(f64, f64)>,
    /// Unconstrained stationary fee, before comparing candidates.
    pub unconstrained_fee: f64,
}

impl Equilibrium {
    /// Total fee paid over the trip.
    pub fn total_fee(&self) -> f64 {
        self.fee * self.distance
    }
}

/// The two fee thresholds separating the follower's regimes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeeThresholds {
    /// At or below this fee the follower rides the whole trip (`K = G + γ_f`).
    pub full_participation: f64,
    /// At or above this fee the follower stays out (`K + 2 c_o D / v²`).
    pub no_trade: f64,
}

/// Derived per-scenario constants shared by the closed forms.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Coefficients {
    pub trip: f64,
    /// Composite per-km benefit of platooning before fee and subsidy (`G`).
    pub benefit: f64,
    /// km of extra platoon distance per unit fee decrease (`v² / 2c_o`).
    pub reach: f64,
    /// Provider's per-km margin excluding the fee.
    pub provider_margin: f64,
    /// Ratio of the provider's to the follower's quadratic cost curvature in `d`.
    pub curvature_ratio: f64,
    pub follower_subsidy: f64,
}

impl Coefficients {
    pub fn new(s: &Scenario) -> Self {
        let v = s.kinematics.solo_velocity;
        let vp = s.kinematics.platoon_velocity;
        let beta = s.beta();
        let alpha = s.alpha();
        let rates = &s.rates;
        let fuel_coeff = aero_constant(&s.aero) * s.aero.drag_alone * rates.fuel_price;
        let fv_load = s.load.follower_load();
        let psp_load = s.load.provider_load();

        let benefit = fuel_coeff * v * v * (1.0 - alpha * beta * beta) + rates.fv_delay_rate / v * (1.0 - 1.0 / beta)
            - 0.5 * rates.compute_rate * fv_load * fv_load;
        let reach = v * v / (2.0 * rates.fv_cognitive_rate);
        let provider_margin = s.subsidy.provider_subsidy
            - rates.psp_delay_rate / vp
            - 0.5 * rates.compute_rate * psp_load * psp_load
            - fuel_coeff * vp * vp;
        let curvature_ratio = 2.0 * reach * rates.psp_cognitive_rate / (vp * vp);

        Self {
            trip: s.kinematics.trip_distance,
            benefit,
            reach,
            provider_margin,
            curvature_ratio,
            follower_subsidy: s.subsidy.follower_subsidy,
        }
    }

    pub fn thresholds(&self) -> FeeThresholds {
        let full = self.benefit + self.follower_subsidy;
        FeeThresholds {
            full_participation: full,
            no_trade: full + self.trip / self.reach,
        }
    }

    pub fn interior_fee(&self) -> f64 {
        let r = self.curvature_ratio;
        let no_trade = self.thresholds().no_trade;
        ((1.0 + r) * no_trade - self.provider_margin) / (2.0 + r)
    }

    pub fn best_response(&self, fee: f64) -> BestResponse {
        let FeeThresholds {
            full_participation,
            no_trade,
        } = self.thresholds();
        if fee <= full_participation + THRESHOLD_TOLERANCE {
            BestResponse {
                distance: self.trip,
                regime: ResponseRegime::CornerFull,
                multiplier_low: 0.0,
                multiplier_high: (full_participation - fee).max(0.0),
            }
        } else if fee >= no_trade - THRESHOLD_TOLERANCE {
            BestResponse {
                distance: 0.0,
                regime: ResponseRegime::CornerZero,
                multiplier_low: (fee - no_trade).max(0.0),
                multiplier_high: 0.0,
            }
        } else {
            let distance = self.trip + self.reach * (full_participation - fee);
            BestResponse {
                distance: distance.clamp(0.0, self.trip),
                regime: ResponseRegime::Interior,
                multiplier_low: 0.0,
                multiplier_high: 0.0,
            }
        }
    }

    /// Slope of the provider's substituted profit in the fee, on the branch
    /// selected by `br`.
    pub fn profit_slope(&self, fee: f64, br: &BestResponse) -> f64 {
        match br.regime {
            ResponseRegime::CornerFull => self.trip,
            ResponseRegime::CornerZero => 0.0,
            ResponseRegime::Interior => {
                (1.0 + self.curvature_ratio) * br.distance - self.reach * (fee + self.provider_margin)
            }
        }
    }
}

/// Composite per-km benefit `G` of platooning to the follower, before fee and subsidy.
///
/// Combines the drag saving, the delay penalty of the slower platoon and the
/// follower's share of the compute cost.
pub fn composite_benefit(s: &Scenario) -> Result<f64, ModelError> {
    s.validate()?;
    Ok(Coefficients::new(s).benefit)
}

pub fn fee_thresholds(s: &Scenario) -> Result<FeeThresholds, ModelError> {
    s.validate()?;
    Ok(Coefficients::new(s).thresholds())
}

/// Follower's best response to `fee`.
///
/// A fee at or below `G + γ_f` makes the platoon cheaper per km than driving
/// alone even at `d = D`; a fee at or above `G + γ_f + 2 c_o D / v²` makes it
/// dearer even at `d = 0`. In between the follower stops where the marginal
/// cognitive-load saving equals the marginal net platoon cost.
pub fn follower_best_response(s: &Scenario, fee: f64) -> Result<BestResponse, ModelError> {
    s.validate()?;
    check_fee(fee)?;
    Ok(Coefficients::new(s).best_response(fee))
}

/// Unconstrained stationary fee of the provider's profit after substituting
/// the follower's interior best response.
pub fn provider_interior_fee(s: &Scenario) -> Result<f64, ModelError> {
    s.validate()?;
    Ok(Coefficients::new(s).interior_fee())
}

/// Provider profit as a function of the fee alone, with the follower best-responding.
pub fn substituted_profit(s: &Scenario, fee: f64) -> Result<f64, ModelError> {
    let br = follower_best_response(s, fee)?;
    provider_profit(s, br.distance, fee)
}

fn check_fee(fee: f64) -> Result<(), ModelError> {
    if !fee.is_finite() {
        return Err(ModelError::NonFinite {
            field: "fee",
            value: fee,
        });
    }
    if fee < 0.0 {
        return Err(ModelError::NegativeFee(fee));
    }
    Ok(())
}

struct Candidate {
    fee: f64,
    br: BestResponse,
    profit: f64,
}

impl Candidate {
    /// Higher profit wins; near-ties go to the larger distance, then the smaller fee.
    fn beats(&self, other: &Candidate) -> bool {
        let scale = self.profit.abs().max(other.profit.abs()).max(1.0);
        if (self.profit - other.profit).abs() > 1e-12 * scale {
            return self.profit > other.profit;
        }
        if self.br.distance != other.br.distance {
            return self.br.distance > other.br.distance;
        }
        self.fee < other.fee
    }
}

/// Solves the game by backward induction.
///
/// The provider's substituted profit is maximised over the candidate fees
/// {max(0, stationary fee), `K`, no-trade threshold, 0}, which contain the
/// global maximiser of the piecewise profit.
pub fn solve_equilibrium(s: &Scenario) -> Result<Equilibrium, ModelError> {
    s.validate()?;
    let coeffs = Coefficients::new(s);
    let unconstrained_fee = coeffs.interior_fee();

    if s.kinematics.trip_distance == 0.0 {
        let br = coeffs.best_response(0.0);
        let breakdown = follower_cost(s, 0.0, 0.0)?;
        return Ok(Equilibrium {
            fee: 0.0,
            distance: 0.0,
            fee_regime: FeeRegime::NoTrade,
            best_response: br,
            follower_breakdown: breakdown,
            provider_profit: 0.0,
            solo_baseline_cost: breakdown.total,
            psp_multiplier: 0.0,
            boundary_multipliers: None,
            unconstrained_fee,
        });
    }

    let thresholds = coeffs.thresholds();
    let mut best: Option<Candidate> = None;
    for fee in [
        unconstrained_fee.max(0.0),
        thresholds.full_participation,
        thresholds.no_trade,
        0.0,
    ] {
        if !(fee.is_finite() && fee >= 0.0) {
            continue;
        }
        let br = coeffs.best_response(fee);
        let candidate = Candidate {
            fee,
            br,
            profit: provider_profit(s, br.distance, fee)?,
        };
        if best.as_ref().is_none_or(|b| candidate.beats(b)) {
            best = Some(candidate);
        }
    }
    // The no-trade threshold or zero is always a non-negative candidate.
    let Candidate { fee, br, profit } = best.expect("candidate set is never empty");
    assemble(s, &coeffs, fee, br, profit)
}

/// Outcome of the game when the provider posts `fee` and the follower best-responds.
///
/// The regime and multipliers are labelled as if `fee` were the provider's
/// choice; use [`solve_equilibrium`] for the optimal fee.
pub fn outcome_at_fee(s: &Scenario, fee: f64) -> Result<Equilibrium, ModelError> {
    s.validate()?;
    check_fee(fee)?;
    let coeffs = Coefficients::new(s);
    let br = coeffs.best_response(fee);
    let profit = provider_profit(s, br.distance, fee)?;
    assemble(s, &coeffs, fee, br, profit)
}

fn assemble(
    s: &Scenario,
    coeffs: &Coefficients,
    fee: f64,
    br: BestResponse,
    profit: f64,
) -> Result<Equilibrium, ModelError> {
    let fee_regime = if br.distance == 0.0 {
        FeeRegime::NoTrade
    } else if fee == 0.0 {
        FeeRegime::ClampedToZeroFee
    } else if br.regime == ResponseRegime::CornerFull {
        FeeRegime::ClampedToFullParticipation
    } else {
        FeeRegime::InteriorFee
    };

    let psp_multiplier = match fee_regime {
        FeeRegime::ClampedToZeroFee => (-coeffs.profit_slope(fee, &br)).max(0.0),
        _ => 0.0,
    };
    let boundary_multipliers = match fee_regime {
        FeeRegime::ClampedToFullParticipation => Some((0.0, coeffs.trip)),
        _ => None,
    };

    Ok(Equilibrium {
        fee,
        distance: br.distance,
        fee_regime,
        best_response: br,
        follower_breakdown: follower_cost(s, br.distance, fee)?,
        provider_profit: profit,
        solo_baseline_cost: follower_cost(s, 0.0, fee)?.total,
        psp_multiplier,
        boundary_multipliers,
        unconstrained_fee: coeffs.interior_fee(),
    })
}

/// Which subsidies are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubsidyCase {
    None,
    FollowerOnly,
    ProviderOnly,
    Both,
}

impl SubsidyCase {
    pub const ALL: [SubsidyCase; 4] = [
        SubsidyCase::None,
        SubsidyCase::FollowerOnly,
        SubsidyCase::ProviderOnly,
        SubsidyCase::Both,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SubsidyCase::None => "none",
            SubsidyCase::FollowerOnly => "follower_only",
            SubsidyCase::ProviderOnly => "provider_only",
            SubsidyCase::Both => "both",
        }
    }

    /// The subset of `policy` that this case keeps.
    pub fn apply(self, policy: SubsidyPolicy) -> SubsidyPolicy {
        let (f, l) = match self {
            SubsidyCase::None => (0.0, 0.0),
            SubsidyCase::FollowerOnly => (policy.follower_subsidy, 0.0),
            SubsidyCase::ProviderOnly => (0.0, policy.provider_subsidy),
            SubsidyCase::Both => (policy.follower_subsidy, policy.provider_subsidy),
        };
        SubsidyPolicy {
            follower_subsidy: f,
            provider_subsidy: l,
        }
    }
}

/// Equilibria with each combination of the scenario's subsidies switched on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsidyQuadrant {
    pub case_none: Equilibrium,
    pub case_follower_only: Equilibrium,
    pub case_provider_only: Equilibrium,
    pub case_both: Equilibrium,
}

impl SubsidyQuadrant {
    pub fn get(&self, case: SubsidyCase) -> &Equilibrium {
        match case {
            SubsidyCase::None => &self.case_none,
            SubsidyCase::FollowerOnly => &self.case_follower_only,
            SubsidyCase::ProviderOnly => &self.case_provider_only,
            SubsidyCase::Both => &self.case_both,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (SubsidyCase, &Equilibrium)> {
        SubsidyCase::ALL.into_iter().map(move |c| (c, self.get(c)))
    }
}

pub fn subsidy_quadrant(s: &Scenario) -> Result<SubsidyQuadrant, ModelError> {
    let solve = |case: SubsidyCase| solve_equilibrium(&s.with_subsidy(case.apply(s.subsidy)));
    Ok(SubsidyQuadrant {
        case_none: solve(SubsidyCase::None)?,
        case_follower_only: solve(SubsidyCase::FollowerOnly)?,
        case_provider_only: solve(SubsidyCase::ProviderOnly)?,
        case_both: solve(SubsidyCase::Both)?,
    })
}

/// Range of follower subsidies that keep the best response to `fee` within `[0, D]`
/// without binding either constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsidyInterval {
    pub lower: f64,
    pub upper: f64,
}

impl SubsidyInterval {
    pub fn is_empty(&self) -> bool {
        self.upper < self.lower
    }

    pub fn contains(&self, subsidy: f64) -> bool {
        (self.lower..=self.upper).contains(&subsidy)
    }
}

/// `[fee − G − 2c_oD/v², fee − G]`, with the lower end clamped at zero.
pub fn follower_subsidy_bounds(s: &Scenario, fee: f64) -> Result<SubsidyInterval, ModelError> {
    s.validate()?;
    check_fee(fee)?;
    let c = Coefficients::new(s);
    let upper = fee - c.benefit;
    Ok(SubsidyInterval {
        lower: (upper - c.trip / c.reach).max(0.0),
        upper,
    })
}
