//! Stackelberg pricing for platooning as a service.
//!
//! A platoon service provider (the leader) sets a per-km fee; a follower
//! vehicle chooses how much of its trip to ride in the platoon. This crate
//! computes both players' best responses and the subgame-perfect equilibrium
//! in closed form, including the corner regimes and government subsidies,
//! and cross-checks every closed form against KKT certificates and a
//! brute-force bilevel grid search.
//!
//! - [`model`]: parameters and raw cost/profit functions.
//! - [`equilibrium`]: best responses, equilibrium, subsidy quadrant.
//! - [`verify`]: KKT certificates, convexity, brute-force oracle.
//! - [`analysis`]: fuel/CO₂ accounting and parameter sweeps.
//!
//! ```
//! use platoon_core::{check_provider_kkt, solve_equilibrium, FeeRegime, Scenario, KKT_TOLERANCE};
//!
//! let s = Scenario::baseline();
//! let eq = solve_equilibrium(&s)?;
//! assert_eq!(eq.fee_regime, FeeRegime::InteriorFee);
//! assert!((eq.distance - 357.268).abs() < 1e-3);
//! assert!(check_provider_kkt(&s, &eq, KKT_TOLERANCE)?.passed);
//! # Ok::<(), platoon_core::ModelError>(())
//! ```

pub mod analysis;
pub mod equilibrium;
pub mod error;
pub mod model;
pub mod verify;

pub use analysis::{
    run_sweep, subsidy_emissions, trip_fuel, Cell, EmissionsReport, OutputColumn, SweepAxis, SweepOptions, SweepParam,
    SweepRow, SweepSpec, SweepTable,
};
pub use equilibrium::{
    composite_benefit, fee_thresholds, follower_best_response, follower_subsidy_bounds, outcome_at_fee,
    provider_interior_fee, solve_equilibrium, subsidy_quadrant, substituted_profit, BestResponse, Equilibrium,
    FeeRegime, FeeThresholds, ResponseRegime, SubsidyCase, SubsidyInterval, SubsidyQuadrant,
};
pub use error::{ModelError, SweepError};
pub use model::{
    aero_constant, follower_cost, provider_profit, AeroParams, ComputeLoad, CostBreakdown, CostRates, Kinematics,
    Scenario, ScenarioWarning, SubsidyPolicy,
};
pub use verify::{
    bisect_best_response, brute_force_equilibrium, check_convexity, check_follower_kkt, check_provider_kkt, Curvatures,
    KktCertificate, OracleAgreement, OracleResult, ScenarioSampler, KKT_TOLERANCE,
};
