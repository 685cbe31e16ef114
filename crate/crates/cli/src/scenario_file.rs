//! `key = value` scenario files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use platoon_core::model::DEFAULT_EMISSION_FACTOR;
use platoon_core::{ModelError, Scenario};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },

    #[error("line {line}: value of `{key}` is not a number: `{value}`")]
    NotNumber { line: usize, key: String, value: String },

    #[error("line {line}: `{key}` already set on line {first}")]
    Duplicate { line: usize, key: String, first: usize },

    #[error("missing required key `{0}`")]
    Missing(&'static str),

    #[error("invalid scenario: {0}")]
    Invalid(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
}

type Setter = fn(&mut Scenario, f64);

/// Every recognised key in file order, with how it maps onto [`Scenario`].
const KEYS: [(&str, Setter); 21] = [
    ("v", |s, x| s.kinematics.solo_velocity = x),
    ("v_p", |s, x| s.kinematics.platoon_velocity = x),
    ("D", |s, x| s.kinematics.trip_distance = x),
    ("c_d", |s, x| s.rates.fv_delay_rate = x),
    ("c_d_psp", |s, x| s.rates.psp_delay_rate = x),
    ("c_f", |s, x| s.rates.fuel_price = x),
    ("c_o", |s, x| s.rates.fv_cognitive_rate = x),
    ("c_o_psp", |s, x| s.rates.psp_cognitive_rate = x),
    ("c_c", |s, x| s.rates.compute_rate = x),
    ("xi", |s, x| s.load.follower_share = x),
    ("L_T", |s, x| s.load.total_load = x),
    ("gamma_f", |s, x| s.subsidy.follower_subsidy = x),
    ("gamma_l", |s, x| s.subsidy.provider_subsidy = x),
    ("A", |s, x| s.aero.frontal_area = x),
    ("C_df", |s, x| s.aero.drag_alone = x),
    ("C_dp", |s, x| s.aero.drag_platoon = x),
    ("rho_air", |s, x| s.aero.air_density = x),
    ("rho_diesel", |s, x| s.aero.fuel_density = x),
    ("psi", |s, x| s.aero.specific_fuel_consumption = x),
    ("eta", |s, x| s.aero.vehicle_efficiency = x),
    ("phi", |s, x| s.emission_factor = x),
];

const OPTIONAL: [&str; 3] = ["c_d_psp", "c_o_psp", "phi"];

fn key_values(s: &Scenario) -> [f64; 21] {
    [
        s.kinematics.solo_velocity,
        s.kinematics.platoon_velocity,
        s.kinematics.trip_distance,
        s.rates.fv_delay_rate,
        s.rates.psp_delay_rate,
        s.rates.fuel_price,
        s.rates.fv_cognitive_rate,
        s.rates.psp_cognitive_rate,
        s.rates.compute_rate,
        s.load.follower_share,
        s.load.total_load,
        s.subsidy.follower_subsidy,
        s.subsidy.provider_subsidy,
        s.aero.frontal_area,
        s.aero.drag_alone,
        s.aero.drag_platoon,
        s.aero.air_density,
        s.aero.fuel_density,
        s.aero.specific_fuel_consumption,
        s.aero.vehicle_efficiency,
        s.emission_factor,
    ]
}

/// A key the parser did not recognise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownKey {
    pub line: usize,
    pub key: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedScenario {
    pub scenario: Scenario,
    pub unknown_keys: Vec<UnknownKey>,
}

/// Parses a scenario file body.
pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    parse_document(text).map(|p| p.scenario)
}

/// Parses a scenario file body, keeping unrecognised keys.
///
/// One `key = value` per line; `#` starts a comment. `c_d_psp` and `c_o_psp`
/// default to `c_d` and `c_o`, `phi` to 2.69 kg CO₂ per litre.
pub fn parse_document(text: &str) -> Result<ParsedScenario, ParseError> {
    let mut values: BTreeMap<&'static str, (f64, usize)> = BTreeMap::new();
    let mut unknown_keys = Vec::new();

    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ParseError::Syntax {
                line,
                text: content.to_string(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ParseError::Syntax {
                line,
                text: content.to_string(),
            });
        }
        let Some(&(known, _)) = KEYS.iter().find(|(k, _)| *k == key) else {
            unknown_keys.push(UnknownKey {
                line,
                key: key.to_string(),
            });
            continue;
        };
        let number: f64 = value.parse().map_err(|_| ParseError::NotNumber {
            line,
            key: key.to_string(),
            value: value.to_string(),
        })?;
        if let Some(&(_, first)) = values.get(known) {
            return Err(ParseError::Duplicate {
                line,
                key: key.to_string(),
                first,
            });
        }
        values.insert(known, (number, line));
    }

    let mut required: Vec<&'static str> = KEYS.iter().map(|(k, _)| *k).filter(|k| !OPTIONAL.contains(k)).collect();
    required.sort_unstable();
    if let Some(missing) = required.into_iter().find(|k| !values.contains_key(k)) {
        return Err(ParseError::Missing(missing));
    }

    let get = |k: &str| values.get(k).map(|&(x, _)| x);
    let mut scenario = Scenario::baseline();
    for (key, set) in KEYS {
        let value = match key {
            "c_d_psp" => get(key).or_else(|| get("c_d")),
            "c_o_psp" => get(key).or_else(|| get("c_o")),
            "phi" => get(key).or(Some(DEFAULT_EMISSION_FACTOR)),
            _ => get(key),
        };
        set(&mut scenario, value.expect("required keys checked above"));
    }
    scenario.validate()?;
    Ok(ParsedScenario { scenario, unknown_keys })
}

/// Writes every key explicitly; parsing the result gives back `s` exactly.
pub fn serialize_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    for ((key, _), value) in KEYS.iter().zip(key_values(s)) {
        writeln!(out, "{key} = {value}").expect("writing to a String cannot fail");
    }
    out
}

/// A scenario read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub path: PathBuf,
    pub scenario: Scenario,
    pub unknown_keys: Vec<UnknownKey>,
}

impl ScenarioFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, LoadError> {
        let path = path.as_ref().to_path_buf();
        let text = std::fs::read_to_string(&path).map_err(|source| LoadError::Io {
            path: path.clone(),
            source,
        })?;
        match parse_document(&text) {
            Ok(parsed) => Ok(Self {
                path,
                scenario: parsed.scenario,
                unknown_keys: parsed.unknown_keys,
            }),
            Err(source) => Err(LoadError::Parse { path, source }),
        }
    }
}
