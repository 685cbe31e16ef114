//! Emissions accounting and parameter sweeps over equilibria.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::equilibrium::{solve_equilibrium, Equilibrium, FeeRegime, SubsidyCase};
use crate::error::{ModelError, SweepError};
use crate::model::{aero_constant, check_arguments, Scenario};

/// Litres of fuel burnt by the follower over the trip when `d` km are driven
/// in the platoon.
pub fn trip_fuel(s: &Scenario, d: f64) -> Result<f64, ModelError> {
    s.validate()?;
    check_arguments(s, d, 0.0)?;
    let t = aero_constant(&s.aero);
    let v = s.kinematics.solo_velocity;
    let vp = s.kinematics.platoon_velocity;
    let trip = s.kinematics.trip_distance;
    Ok(t * s.aero.drag_alone * v * v * (trip - d) + t * s.aero.drag_platoon * vp * vp * d)
}

/// Fuel and CO₂ saved by the scenario's subsidies, relative to no subsidies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionsReport {
    /// Fuel for the whole trip driven alone, L.
    pub fuel_alone_trip: f64,
    /// Fuel at the subsidised equilibrium distance, L.
    pub fuel_mixed_trip: f64,
    pub distance_without_subsidy: f64,
    pub distance_with_subsidy: f64,
    /// Closed-form gain in platoon distance, km; `None` when either
    /// equilibrium is not interior.
    pub delta_distance_subsidy: Option<f64>,
    /// Fuel saved, L. Closed form when applicable, otherwise the direct difference.
    pub delta_fuel: f64,
    /// CO₂ saved, kg; always `emission_factor · delta_fuel`.
    pub delta_co2: f64,
    /// `trip_fuel(d*_none) − trip_fuel(d*_both)`, L.
    pub direct_delta_fuel: f64,
    pub direct_delta_co2: f64,
}

impl EmissionsReport {
    pub fn closed_form_applicable(&self) -> bool {
        self.delta_distance_subsidy.is_some()
    }
}

/// Emissions saved by switching on both of the scenario's subsidies.
///
/// With both equilibria interior, the subsidies lengthen the platoon distance
/// by `(v²/2c_o)(γ_f + γ_l)/(2 + r)`, where `r` is the provider-to-follower
/// curvature ratio (`1/β²` when both cognitive rates agree), and each extra km
/// saves `T·C_df·v²·(1 − αβ²)` litres.
pub fn subsidy_emissions(s: &Scenario) -> Result<EmissionsReport, ModelError> {
    s.validate()?;
    let without = solve_equilibrium(&s.with_subsidy(SubsidyCase::None.apply(s.subsidy)))?;
    let with = solve_equilibrium(s)?;
    emissions_between(s, &without, &with)
}

fn emissions_between(s: &Scenario, without: &Equilibrium, with: &Equilibrium) -> Result<EmissionsReport, ModelError> {
    let fuel_without = trip_fuel(s, without.distance)?;
    let fuel_with = trip_fuel(s, with.distance)?;
    let direct_delta_fuel = fuel_without - fuel_with;

    let interior = |eq: &Equilibrium| eq.fee_regime == FeeRegime::InteriorFee;
    let v = s.kinematics.solo_velocity;
    let vp = s.kinematics.platoon_velocity;
    let beta = s.beta();
    let reach = v * v / (2.0 * s.rates.fv_cognitive_rate);

    let delta_distance_subsidy = (interior(without) && interior(with)).then(|| {
        let curvature_ratio = 2.0 * reach * s.rates.psp_cognitive_rate / (vp * vp);
        reach * s.subsidy.total() / (2.0 + curvature_ratio)
    });
    let delta_fuel = match delta_distance_subsidy {
        Some(dd) => aero_constant(&s.aero) * s.aero.drag_alone * v * v * (1.0 - s.alpha() * beta * beta) * dd,
        None => direct_delta_fuel,
    };

    Ok(EmissionsReport {
        fuel_alone_trip: trip_fuel(s, 0.0)?,
        fuel_mixed_trip: fuel_with,
        distance_without_subsidy: without.distance,
        distance_with_subsidy: with.distance,
        delta_distance_subsidy,
        delta_fuel,
        delta_co2: s.emission_factor * delta_fuel,
        direct_delta_fuel,
        direct_delta_co2: s.emission_factor * direct_delta_fuel,
    })
}

/// Parameters a sweep axis can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParam {
    /// Velocity ratio; rescales the platoon speed, solo speed fixed.
    Beta,
    /// Drag ratio; rescales the platoon drag coefficient, solo drag fixed.
    Alpha,
    /// Follower delay rate (and the provider's, unless decoupled).
    DelayRate,
    FollowerSubsidy,
    ProviderSubsidy,
    /// Sum of both subsidies, split by `SweepOptions::follower_subsidy_share`.
    TotalSubsidy,
    FollowerShare,
    TotalLoad,
    TripDistance,
}

impl SweepParam {
    pub const ALL: [SweepParam; 9] = [
        SweepParam::Beta,
        SweepParam::Alpha,
        SweepParam::DelayRate,
        SweepParam::FollowerSubsidy,
        SweepParam::ProviderSubsidy,
        SweepParam::TotalSubsidy,
        SweepParam::FollowerShare,
        SweepParam::TotalLoad,
        SweepParam::TripDistance,
    ];

    pub fn id(self) -> &'static str {
        match self {
            SweepParam::Beta => "beta",
            SweepParam::Alpha => "alpha",
            SweepParam::DelayRate => "c_d",
            SweepParam::FollowerSubsidy => "gamma_f",
            SweepParam::ProviderSubsidy => "gamma_l",
            SweepParam::TotalSubsidy => "gamma_total",
            SweepParam::FollowerShare => "xi",
            SweepParam::TotalLoad => "L_T",
            SweepParam::TripDistance => "D",
        }
    }

    pub fn ids() -> Vec<&'static str> {
        Self::ALL.iter().map(|p| p.id()).collect()
    }

    /// Current value of this parameter in `s`.
    pub fn value_in(self, s: &Scenario) -> f64 {
        match self {
            SweepParam::Beta => s.beta(),
            SweepParam::Alpha => s.alpha(),
            SweepParam::DelayRate => s.rates.fv_delay_rate,
            SweepParam::FollowerSubsidy => s.subsidy.follower_subsidy,
            SweepParam::ProviderSubsidy => s.subsidy.provider_subsidy,
            SweepParam::TotalSubsidy => s.subsidy.total(),
            SweepParam::FollowerShare => s.load.follower_share,
            SweepParam::TotalLoad => s.load.total_load,
            SweepParam::TripDistance => s.kinematics.trip_distance,
        }
    }

    /// Returns `s` with this parameter set to `value`.
    pub fn apply(self, s: &Scenario, value: f64, options: &SweepOptions) -> Scenario {
        let mut out = *s;
        match self {
            SweepParam::Beta => out.kinematics.platoon_velocity = value * s.kinematics.solo_velocity,
            SweepParam::Alpha => out.aero.drag_platoon = value * s.aero.drag_alone,
            SweepParam::DelayRate => {
                out.rates.fv_delay_rate = value;
                if options.couple_psp_delay {
                    out.rates.psp_delay_rate = value;
                }
            }
            SweepParam::FollowerSubsidy => out.subsidy.follower_subsidy = value,
            SweepParam::ProviderSubsidy => out.subsidy.provider_subsidy = value,
            SweepParam::TotalSubsidy => {
                out.subsidy.follower_subsidy = options.follower_subsidy_share * value;
                out.subsidy.provider_subsidy = (1.0 - options.follower_subsidy_share) * value;
            }
            SweepParam::FollowerShare => out.load.follower_share = value,
            SweepParam::TotalLoad => out.load.total_load = value,
            SweepParam::TripDistance => out.kinematics.trip_distance = value,
        }
        out
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for SweepParam {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.id() == s)
            .ok_or_else(|| SweepError::UnknownParam(s.to_string()))
    }
}

/// Per-row output columns of a sweep table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutputColumn {
    Fee,
    FeeTotal,
    Distance,
    Regime,
    SoloCost,
    FollowerCost,
    ProviderProfit,
    DeltaCo2,
}

impl OutputColumn {
    pub const ALL: [OutputColumn; 8] = [
        OutputColumn::Fee,
        OutputColumn::FeeTotal,
        OutputColumn::Distance,
        OutputColumn::Regime,
        OutputColumn::SoloCost,
        OutputColumn::FollowerCost,
        OutputColumn::ProviderProfit,
        OutputColumn::DeltaCo2,
    ];

    pub fn id(self) -> &'static str {
        match self {
            OutputColumn::Fee => "fee",
            OutputColumn::FeeTotal => "fee_total",
            OutputColumn::Distance => "distance",
            OutputColumn::Regime => "regime",
            OutputColumn::SoloCost => "solo_cost",
            OutputColumn::FollowerCost => "follower_cost",
            OutputColumn::ProviderProfit => "provider_profit",
            OutputColumn::DeltaCo2 => "delta_co2",
        }
    }

    pub fn ids() -> Vec<&'static str> {
        Self::ALL.iter().map(|c| c.id()).collect()
    }
}

impl FromStr for OutputColumn {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.id() == s)
            .ok_or_else(|| SweepError::UnknownOutput(s.to_string()))
    }
}

/// Substitution semantics shared by every axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Move the provider's delay rate together with the follower's.
    pub couple_psp_delay: bool,
    /// Fraction of a total-subsidy value given to the follower.
    pub follower_subsidy_share: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            couple_psp_delay: true,
            follower_subsidy_share: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl SweepAxis {
    pub fn new(param: SweepParam, values: Vec<f64>) -> Self {
        Self { param, values }
    }

    /// `count` evenly spaced values from `start` to `stop` inclusive.
    pub fn linspace(param: SweepParam, start: f64, stop: f64, count: usize) -> Self {
        let values = match count {
            0 => Vec::new(),
            1 => vec![start],
            n => (0..n)
                .map(|i| {
                    if i == n - 1 {
                        stop
                    } else {
                        start + (stop - start) * i as f64 / (n - 1) as f64
                    }
                })
                .collect(),
        };
        Self { param, values }
    }

    fn validate(&self) -> Result<(), SweepError> {
        if self.values.is_empty() {
            return Err(SweepError::EmptyAxis(self.param.id()));
        }
        if let Some(&value) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(SweepError::NonFiniteValue {
                param: self.param.id(),
                value,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: Scenario,
    pub axis1: SweepAxis,
    pub axis2: Option<SweepAxis>,
    pub outputs: Vec<OutputColumn>,
    pub options: SweepOptions,
}

impl SweepSpec {
    /// A one-axis sweep reporting every output column.
    pub fn new(base: Scenario, axis1: SweepAxis) -> Self {
        Self {
            base,
            axis1,
            axis2: None,
            outputs: OutputColumn::ALL.to_vec(),
            options: SweepOptions::default(),
        }
    }

    pub fn with_axis2(mut self, axis2: SweepAxis) -> Self {
        self.axis2 = Some(axis2);
        self
    }

    pub fn with_outputs(mut self, outputs: Vec<OutputColumn>) -> Self {
        self.outputs = outputs;
        self
    }

    pub fn with_options(mut self, options: SweepOptions) -> Self {
        self.options = options;
        self
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        self.base.validate()?;
        self.axis1.validate()?;
        if let Some(axis2) = &self.axis2 {
            axis2.validate()?;
            if axis2.param == self.axis1.param {
                return Err(SweepError::DuplicateAxis(axis2.param.id()));
            }
        }
        let share = self.options.follower_subsidy_share;
        if !(share.is_finite() && (0.0..=1.0).contains(&share)) {
            return Err(SweepError::InvalidSplit(share));
        }
        Ok(())
    }

    fn axes(&self) -> impl Iterator<Item = &SweepAxis> {
        std::iter::once(&self.axis1).chain(self.axis2.as_ref())
    }

    /// Grid points in axis1-major order.
    fn points(&self) -> Vec<Vec<f64>> {
        match &self.axis2 {
            None => self.axis1.values.iter().map(|&a| vec![a]).collect(),
            Some(axis2) => self
                .axis1
                .values
                .iter()
                .flat_map(|&a| axis2.values.iter().map(move |&b| vec![a, b]))
                .collect(),
        }
    }

    fn scenario_at(&self, point: &[f64]) -> Result<Scenario, SweepError> {
        let mut s = self.base;
        for (axis, &value) in self.axes().zip(point) {
            s = axis.param.apply(&s, value, &self.options);
            s.validate().map_err(|source| SweepError::InvalidPoint {
                param: axis.param.id(),
                value,
                source,
            })?;
        }
        Ok(s)
    }
}

/// A table cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Number(f64),
    Label(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Swept parameter values, one per axis.
    pub point: Vec<f64>,
    pub equilibrium: Equilibrium,
    pub emissions: EmissionsReport,
}

impl SweepRow {
    pub fn output(&self, column: OutputColumn) -> Cell {
        let eq = &self.equilibrium;
        match column {
            OutputColumn::Fee => Cell::Number(eq.fee),
            OutputColumn::FeeTotal => Cell::Number(eq.total_fee()),
            OutputColumn::Distance => Cell::Number(eq.distance),
            OutputColumn::Regime => Cell::Label(eq.fee_regime.label()),
            OutputColumn::SoloCost => Cell::Number(eq.solo_baseline_cost),
            OutputColumn::FollowerCost => Cell::Number(eq.follower_breakdown.total),
            OutputColumn::ProviderProfit => Cell::Number(eq.provider_profit),
            OutputColumn::DeltaCo2 => Cell::Number(self.emissions.delta_co2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub header: Vec<String>,
    pub axes: Vec<SweepParam>,
    pub outputs: Vec<OutputColumn>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Cells of one row in header order.
    pub fn cells(&self, row: &SweepRow) -> Vec<Cell> {
        row.point
            .iter()
            .map(|&v| Cell::Number(v))
            .chain(self.outputs.iter().map(|&c| row.output(c)))
            .collect()
    }
}

/// Solves the equilibrium, and the emissions saved by subsidies, at every grid point.
///
/// Points are evaluated in parallel; rows come back in axis1-major order. The
/// first invalid point in that order is reported.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable, SweepError> {
    spec.validate()?;
    let evaluate = |point: Vec<f64>| -> Result<SweepRow, SweepError> {
        let s = spec.scenario_at(&point)?;
        let equilibrium = solve_equilibrium(&s)?;
        let emissions = subsidy_emissions(&s)?;
        Ok(SweepRow {
            point,
            equilibrium,
            emissions,
        })
    };
    let results: Vec<Result<SweepRow, SweepError>> = spec.points().into_par_iter().map(evaluate).collect();
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let axes: Vec<SweepParam> = spec.axes().map(|a| a.param).collect();
    let header = axes
        .iter()
        .map(|p| p.id().to_string())
        .chain(spec.outputs.iter().map(|c| c.id().to_string()))
        .collect();
    Ok(SweepTable {
        header,
        axes,
        outputs: spec.outputs.clone(),
        rows,
    })
}
