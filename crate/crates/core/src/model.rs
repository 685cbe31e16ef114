//! Scenario parameters and the raw cost and profit functions of the platooning game.
//!
//! Everything downstream (equilibrium, verification, analysis) reads parameters
//! through [`Scenario`] and evaluates costs through [`follower_cost`] and
//! [`provider_profit`]. Monetary quantities are in an opaque currency unit,
//! distances in km, speeds in km/h and fuel in litres.

use crate::error::ModelError;

/// Default CO₂ emitted per litre of diesel burnt, kg/L.
pub const DEFAULT_EMISSION_FACTOR: f64 = 2.69;

/// Aerodynamic and engine parameters of the follower vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeroParams {
    /// Frontal area, m².
    pub frontal_area: f64,
    /// Drag coefficient when driving alone.
    pub drag_alone: f64,
    /// Drag coefficient when driving inside the platoon.
    pub drag_platoon: f64,
    /// Air density, kg/m³.
    pub air_density: f64,
    /// Diesel density, kg/m³.
    pub fuel_density: f64,
    /// Specific fuel consumption, kg/kWh.
    pub specific_fuel_consumption: f64,
    /// Vehicle efficiency, km/L.
    pub vehicle_efficiency: f64,
}

/// Money rates. `psp_*` fields are the provider's own rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostRates {
    /// Follower delay cost per hour.
    pub fv_delay_rate: f64,
    /// Provider delay cost per hour.
    pub psp_delay_rate: f64,
    /// Fuel price per litre.
    pub fuel_price: f64,
    /// Follower cognitive-load cost per hour².
    pub fv_cognitive_rate: f64,
    /// Provider cognitive-load cost per hour².
    pub psp_cognitive_rate: f64,
    /// Computational-load cost per TB².
    pub compute_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    /// Speed when driving alone, km/h.
    pub solo_velocity: f64,
    /// Speed of the platoon, km/h.
    pub platoon_velocity: f64,
    /// Total trip length, km.
    pub trip_distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComputeLoad {
    /// Total computational load of the platoon, TB/km.
    pub total_load: f64,
    /// Fraction of the load carried by the follower.
    pub follower_share: f64,
}

/// Government subsidies, per km travelled in the platoon.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SubsidyPolicy {
    pub follower_subsidy: f64,
    pub provider_subsidy: f64,
}

/// Complete, immutable parameter record for one follower/provider pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub aero: AeroParams,
    pub rates: CostRates,
    pub kinematics: Kinematics,
    pub load: ComputeLoad,
    pub subsidy: SubsidyPolicy,
    /// kg CO₂ per litre of fuel.
    pub emission_factor: f64,
}

/// Non-fatal observations about a valid scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScenarioWarning {
    /// Platooning increases drag (drag ratio above 1).
    DragRatioAboveOne(f64),
}

impl std::fmt::Display for ScenarioWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScenarioWarning::DragRatioAboveOne(alpha) => {
                write!(f, "drag_platoon / drag_alone = {alpha} > 1: platooning increases drag")
            }
        }
    }
}

fn finite(field: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonFinite { field, value })
    }
}

fn positive(field: &'static str, value: f64) -> Result<(), ModelError> {
    finite(field, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(ModelError::NotPositive { field, value })
    }
}

fn non_negative(field: &'static str, value: f64) -> Result<(), ModelError> {
    finite(field, value)?;
    if value >= 0.0 {
        Ok(())
    } else {
        Err(ModelError::Negative { field, value })
    }
}

impl AeroParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        positive("frontal_area", self.frontal_area)?;
        positive("drag_alone", self.drag_alone)?;
        positive("drag_platoon", self.drag_platoon)?;
        positive("air_density", self.air_density)?;
        positive("fuel_density", self.fuel_density)?;
        positive("specific_fuel_consumption", self.specific_fuel_consumption)?;
        positive("vehicle_efficiency", self.vehicle_efficiency)
    }

    /// Drag reduction ratio `drag_platoon / drag_alone`.
    pub fn drag_ratio(&self) -> f64 {
        self.drag_platoon / self.drag_alone
    }
}

impl CostRates {
    pub fn validate(&self) -> Result<(), ModelError> {
        non_negative("fv_delay_rate", self.fv_delay_rate)?;
        non_negative("psp_delay_rate", self.psp_delay_rate)?;
        non_negative("fuel_price", self.fuel_price)?;
        positive("fv_cognitive_rate", self.fv_cognitive_rate)?;
        non_negative("psp_cognitive_rate", self.psp_cognitive_rate)?;
        non_negative("compute_rate", self.compute_rate)
    }

    /// Returns a copy with every money rate multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            fv_delay_rate: self.fv_delay_rate * k,
            psp_delay_rate: self.psp_delay_rate * k,
            fuel_price: self.fuel_price * k,
            fv_cognitive_rate: self.fv_cognitive_rate * k,
            psp_cognitive_rate: self.psp_cognitive_rate * k,
            compute_rate: self.compute_rate * k,
        }
    }
}

impl Kinematics {
    pub fn validate(&self) -> Result<(), ModelError> {
        positive("solo_velocity", self.solo_velocity)?;
        positive("platoon_velocity", self.platoon_velocity)?;
        non_negative("trip_distance", self.trip_distance)
    }

    /// Velocity reduction ratio `platoon_velocity / solo_velocity`.
    pub fn velocity_ratio(&self) -> f64 {
        self.platoon_velocity / self.solo_velocity
    }
}

impl ComputeLoad {
    pub fn validate(&self) -> Result<(), ModelError> {
        non_negative("total_load", self.total_load)?;
        finite("follower_share", self.follower_share)?;
        if !(0.0..=1.0).contains(&self.follower_share) {
            return Err(ModelError::OutOfRange {
                field: "follower_share",
                value: self.follower_share,
                min: 0.0,
                max: 1.0,
            });
        }
        Ok(())
    }

    /// Load carried by the follower, TB/km.
    pub fn follower_load(&self) -> f64 {
        self.follower_share * self.total_load
    }

    /// Load carried by the provider, TB/km.
    pub fn provider_load(&self) -> f64 {
        (1.0 - self.follower_share) * self.total_load
    }
}

impl SubsidyPolicy {
    pub fn validate(&self) -> Result<(), ModelError> {
        non_negative("follower_subsidy", self.follower_subsidy)?;
        non_negative("provider_subsidy", self.provider_subsidy)
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn total(&self) -> f64 {
        self.follower_subsidy + self.provider_subsidy
    }
}

impl Scenario {
    /// The reference scenario: a 500 km trip at 60 km/h solo and 42 km/h in the
    /// platoon, both subsidies at 50 per km and a platoon compute load of 0.1 TB/km.
    pub fn baseline() -> Self {
        Self {
            aero: AeroParams {
                frontal_area: 8.0,
                drag_alone: 0.6,
                drag_platoon: 0.42,
                air_density: 1.225,
                fuel_density: 850.0,
                specific_fuel_consumption: 0.25,
                vehicle_efficiency: 0.5,
            },
            rates: CostRates {
                fv_delay_rate: 150.0,
                psp_delay_rate: 150.0,
                fuel_price: 105.0,
                fv_cognitive_rate: 180.0,
                psp_cognitive_rate: 180.0,
                compute_rate: 400.0,
            },
            kinematics: Kinematics {
                solo_velocity: 60.0,
                platoon_velocity: 42.0,
                trip_distance: 500.0,
            },
            load: ComputeLoad {
                total_load: 0.1,
                follower_share: 0.5,
            },
            subsidy: SubsidyPolicy {
                follower_subsidy: 50.0,
                provider_subsidy: 50.0,
            },
            emission_factor: DEFAULT_EMISSION_FACTOR,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.aero.validate()?;
        self.rates.validate()?;
        self.kinematics.validate()?;
        self.load.validate()?;
        self.subsidy.validate()?;
        non_negative("emission_factor", self.emission_factor)
    }

    pub fn warnings(&self) -> Vec<ScenarioWarning> {
        let alpha = self.alpha();
        if alpha > 1.0 {
            vec![ScenarioWarning::DragRatioAboveOne(alpha)]
        } else {
            Vec::new()
        }
    }

    pub fn with_subsidy(mut self, subsidy: SubsidyPolicy) -> Self {
        self.subsidy = subsidy;
        self
    }

    /// Returns a copy with every money rate, and both subsidies, multiplied by `k`.
    pub fn with_money_scaled(mut self, k: f64) -> Self {
        self.rates = self.rates.scaled(k);
        self.subsidy.follower_subsidy *= k;
        self.subsidy.provider_subsidy *= k;
        self
    }

    /// Velocity reduction ratio β.
    pub fn beta(&self) -> f64 {
        self.kinematics.velocity_ratio()
    }

    /// Drag reduction ratio α.
    pub fn alpha(&self) -> f64 {
        self.aero.drag_ratio()
    }

    /// Fuel cost per km per (km/h)² of the follower driving alone (`T · C_df · c_f`).
    pub fn drag_fuel_cost_coefficient(&self) -> f64 {
        aero_constant(&self.aero) * self.aero.drag_alone * self.rates.fuel_price
    }
}

/// Fuel-volume coefficient `T`: litres per km per (km/h)² of speed, per unit drag
/// coefficient.
///
/// `ρ_air · A · ψ / 2` gives kg of fuel per km per (m/s)² of speed; the 3.6²
/// converts km/h to m/s, `1000 · ρ_diesel` converts kg to litres, and the
/// efficiency divides it out per km.
pub fn aero_constant(aero: &AeroParams) -> f64 {
    0.5 * aero.air_density * aero.frontal_area * aero.specific_fuel_consumption
        / (3.6 * 3.6 * aero.vehicle_efficiency * 1000.0 * aero.fuel_density)
}

/// Per-component trip cost of the follower for a given platoon distance and fee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    pub delay_alone: f64,
    pub fuel_alone: f64,
    pub cognitive_alone: f64,
    pub delay_platoon: f64,
    pub fuel_platoon: f64,
    pub compute_platoon: f64,
    /// Total fee paid, `fee · d`.
    pub service_fee_paid: f64,
    /// Total subsidy received, `γ_f · d`.
    pub subsidy_received: f64,
    pub total: f64,
}

impl CostBreakdown {
    /// Cost of the part of the trip driven alone.
    pub fn alone(&self) -> f64 {
        self.delay_alone + self.fuel_alone + self.cognitive_alone
    }

    /// Net cost of the part of the trip driven in the platoon.
    pub fn platoon(&self) -> f64 {
        self.delay_platoon + self.fuel_platoon + self.compute_platoon + self.service_fee_paid - self.subsidy_received
    }
}

pub(crate) fn check_arguments(s: &Scenario, d: f64, fee: f64) -> Result<(), ModelError> {
    let trip = s.kinematics.trip_distance;
    if !(d.is_finite() && (0.0..=trip).contains(&d)) {
        return Err(ModelError::DistanceOutOfRange {
            distance: d,
            trip_distance: trip,
        });
    }
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

/// Trip cost of the follower driving `d` km in the platoon at per-km fee `fee`.
///
/// `d` must lie in `[0, D]`; this function never clamps.
pub fn follower_cost(s: &Scenario, d: f64, fee: f64) -> Result<CostBreakdown, ModelError> {
    check_arguments(s, d, fee)?;
    let Kinematics {
        solo_velocity: v,
        platoon_velocity: vp,
        trip_distance,
    } = s.kinematics;
    let rates = &s.rates;
    let t = aero_constant(&s.aero);
    let alone = trip_distance - d;
    let follower_load = s.load.follower_load();

    let delay_alone = alone / v * rates.fv_delay_rate;
    let fuel_alone = t * s.aero.drag_alone * v * v * alone * rates.fuel_price;
    let cognitive_alone = rates.fv_cognitive_rate * alone * alone / (v * v);
    let delay_platoon = d / vp * rates.fv_delay_rate;
    let fuel_platoon = t * s.aero.drag_platoon * vp * vp * d * rates.fuel_price;
    let compute_platoon = 0.5 * rates.compute_rate * follower_load * follower_load * d;
    let service_fee_paid = d * fee;
    let subsidy_received = s.subsidy.follower_subsidy * d;

    let total =
        delay_alone + fuel_alone + cognitive_alone + delay_platoon + fuel_platoon + compute_platoon + service_fee_paid
            - subsidy_received;

    Ok(CostBreakdown {
        delay_alone,
        fuel_alone,
        cognitive_alone,
        delay_platoon,
        fuel_platoon,
        compute_platoon,
        service_fee_paid,
        subsidy_received,
        total,
    })
}

/// Provider profit when the follower rides `d` km at per-km fee `fee`.
///
/// The lead vehicle drives at platoon speed with the solo drag coefficient.
pub fn provider_profit(s: &Scenario, d: f64, fee: f64) -> Result<f64, ModelError> {
    check_arguments(s, d, fee)?;
    let vp = s.kinematics.platoon_velocity;
    let rates = &s.rates;
    let provider_load = s.load.provider_load();
    let t = aero_constant(&s.aero);

    Ok(fee * d + s.subsidy.provider_subsidy * d
        - rates.psp_delay_rate * d / vp
        - 0.5 * rates.compute_rate * provider_load * provider_load * d
        - rates.psp_cognitive_rate * d * d / (vp * vp)
        - t * s.aero.drag_alone * vp * vp * d * rates.fuel_price)
}
