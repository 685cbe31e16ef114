//! Benchmark fixtures shared by the criterion targets.

use platoon_core::{Scenario, ScenarioSampler};

/// Seeded random scenarios, identical across runs.
pub fn fixtures(count: usize) -> Vec<Scenario> {
    ScenarioSampler::default().scenarios(0xbe7c_4a11, count)
}
