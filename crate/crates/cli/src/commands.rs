//! Command implementations. Each writes its report to `out` and returns
//! an error classified by exit code.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use platoon_core::verify::{KKT_TOLERANCE, PROFIT_TOLERANCE};
use platoon_core::{
    brute_force_equilibrium, check_follower_kkt, check_provider_kkt, outcome_at_fee, run_sweep, solve_equilibrium,
    subsidy_emissions, subsidy_quadrant, trip_fuel, Equilibrium, KktCertificate, ModelError, OracleAgreement,
    OutputColumn, Scenario, SweepAxis, SweepError, SweepOptions, SweepParam, SweepRow, SweepSpec,
};
use thiserror::Error;

use crate::format::{csv_writer, format_cell, format_number};
use crate::scenario_file::{serialize_scenario, LoadError, ScenarioFile};

/// Fee grid step of the oracle run by `solve --verify`.
pub const ORACLE_STEP: f64 = 1e-3;

pub const SUBSIDY_HEADER: [&str; 6] = [
    "case",
    "fee",
    "distance",
    "provider_profit",
    "follower_cost",
    "delta_co2",
];

#[derive(Debug, Parser)]
#[command(name = "platoon", version, about = "Stackelberg pricing for platooning as a service")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the pricing game for one scenario.
    ///
    /// CSV columns: fee, fee_total, distance, regime, solo_cost,
    /// follower_cost, provider_profit, delta_co2.
    Solve(SolveArgs),
    /// Sweep one or two parameters and write the equilibria as CSV.
    ///
    /// Columns: the swept parameters, then the --outputs columns
    /// (default: fee, fee_total, distance, regime, solo_cost, follower_cost,
    /// provider_profit, delta_co2). Rows are ordered axis1-major.
    Sweep(SweepArgs),
    /// Compare the four subsidy cases (none, follower_only, provider_only, both).
    ///
    /// CSV columns: case, fee, distance, provider_profit, follower_cost,
    /// delta_co2 (CO2 saved relative to the no-subsidy case, kg).
    Subsidy(SubsidyArgs),
    /// Print the reference scenario file.
    Template,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Scenario file (`key = value` lines).
    pub scenario: PathBuf,
    /// Also write a one-row CSV here.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// Check both KKT certificates and a brute-force oracle; exit 2 if any fails.
    #[arg(long)]
    pub verify: bool,
    /// Evaluate this per-km fee instead of the provider's optimum.
    #[arg(long, value_name = "FEE")]
    pub fee: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub scenario: PathBuf,
    /// `param=start:stop:count`, given once or twice. Parameters: beta, alpha,
    /// c_d, gamma_f, gamma_l, gamma_total, xi, L_T, D.
    #[arg(long = "axis", value_name = "SPEC", required = true, value_parser = parse_axis)]
    pub axes: Vec<SweepAxis>,
    /// Comma-separated output columns.
    #[arg(long, value_delimiter = ',', value_name = "COLUMNS")]
    pub outputs: Option<Vec<String>>,
    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// Keep the provider's delay rate fixed when sweeping c_d.
    #[arg(long)]
    pub decouple_psp_delay: bool,
    /// Fraction of a gamma_total value given to the follower.
    #[arg(long, default_value_t = 0.5, value_name = "SHARE")]
    pub follower_share: f64,
}

#[derive(Debug, Args)]
pub struct SubsidyArgs {
    pub scenario: PathBuf,
    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Load(#[from] LoadError),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Sweep(#[from] SweepError),

    #[error("invalid --axis `{spec}`: {reason}")]
    Axis { spec: String, reason: String },

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("CSV output failed: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    /// 2 for failed verification, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 2,
            _ => 1,
        }
    }
}

fn parse_axis(spec: &str) -> Result<SweepAxis, CliError> {
    let bad = |reason: &str| CliError::Axis {
        spec: spec.to_string(),
        reason: reason.to_string(),
    };
    let (name, range) = spec
        .split_once('=')
        .ok_or_else(|| bad("expected param=start:stop:count"))?;
    let param: SweepParam = name.trim().parse()?;
    let parts: Vec<&str> = range.split(':').collect();
    let [start, stop, count] = parts[..] else {
        return Err(bad("expected start:stop:count"));
    };
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| bad(&format!("`{s}` is not a number")))
    };
    let (start, stop) = (number(start)?, number(stop)?);
    let count: usize = count
        .trim()
        .parse()
        .map_err(|_| bad(&format!("`{count}` is not a point count")))?;
    if count == 0 {
        return Err(bad("count must be at least 1"));
    }
    Ok(SweepAxis::linspace(param, start, stop, count))
}

/// Runs a parsed command line.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(args) => solve(&args, out, err),
        Command::Sweep(args) => sweep(&args, out, err),
        Command::Subsidy(args) => subsidy(&args, out, err),
        Command::Template => {
            writeln!(
                out,
                "# Reference scenario. Money in INR, distances in km, speeds in km/h."
            )?;
            out.write_all(serialize_scenario(&Scenario::baseline()).as_bytes())?;
            Ok(())
        }
    }
}

fn load(path: &Path, err: &mut dyn Write) -> Result<Scenario, CliError> {
    let file = ScenarioFile::load(path)?;
    for unknown in &file.unknown_keys {
        writeln!(
            err,
            "warning: {}:{}: unknown key `{}` ignored",
            path.display(),
            unknown.line,
            unknown.key
        )?;
    }
    for warning in file.scenario.warnings() {
        writeln!(err, "warning: {warning}")?;
    }
    Ok(file.scenario)
}

fn create(path: &Path) -> Result<File, CliError> {
    File::create(path).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

fn solve(args: &SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let s = load(&args.scenario, err)?;
    let eq = match args.fee {
        Some(fee) => outcome_at_fee(&s, fee)?,
        None => solve_equilibrium(&s)?,
    };
    let row = SweepRow {
        point: Vec::new(),
        equilibrium: eq,
        emissions: subsidy_emissions(&s)?,
    };
    write_report(&s, &row, args.fee.is_some(), out)?;

    if let Some(path) = &args.csv {
        let mut w = csv_writer(create(path)?);
        w.write_record(OutputColumn::ids())?;
        w.write_record(OutputColumn::ALL.iter().map(|&c| format_cell(row.output(c))))?;
        w.flush().map_err(|source| CliError::Output {
            path: path.clone(),
            source,
        })?;
    }

    if args.verify {
        verify(&s, &eq, out)?;
    }
    Ok(())
}

fn write_report(s: &Scenario, row: &SweepRow, posted: bool, out: &mut dyn Write) -> io::Result<()> {
    let eq = &row.equilibrium;
    let n = format_number;
    let title = if posted {
        "Outcome at the posted fee"
    } else {
        "Equilibrium"
    };
    writeln!(out, "{title}")?;
    writeln!(out, "  regime                    {}", eq.fee_regime)?;
    writeln!(out, "  service fee               {} INR/km", n(eq.fee))?;
    writeln!(out, "  service fee for trip      {} INR", n(eq.total_fee()))?;
    writeln!(
        out,
        "  platoon distance          {} km of {} km",
        n(eq.distance),
        n(s.kinematics.trip_distance)
    )?;
    writeln!(out, "  follower cost, solo       {} INR", n(eq.solo_baseline_cost))?;
    writeln!(
        out,
        "  follower cost, platooned  {} INR",
        n(eq.follower_breakdown.total)
    )?;
    writeln!(out, "  provider profit           {} INR", n(eq.provider_profit))?;
    let e = &row.emissions;
    let how = if e.closed_form_applicable() {
        ""
    } else {
        " (direct difference)"
    };
    writeln!(out, "  CO2 saved by subsidies    {} kg{how}", n(e.delta_co2))?;
    Ok(())
}

fn verify(s: &Scenario, eq: &Equilibrium, out: &mut dyn Write) -> Result<(), CliError> {
    let follower = check_follower_kkt(s, eq.fee, &eq.best_response, KKT_TOLERANCE)?;
    let provider = check_provider_kkt(s, eq, KKT_TOLERANCE)?;
    let oracle = brute_force_equilibrium(s, ORACLE_STEP)?;
    let agreement = OracleAgreement::compare(s, eq, &oracle);

    let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
    let certificate = |c: &KktCertificate| {
        format!(
            "{} (worst residual/limit {})",
            verdict(c.passed),
            format_number(c.worst_ratio())
        )
    };
    writeln!(out, "Verification")?;
    writeln!(out, "  follower KKT              {}", certificate(&follower))?;
    writeln!(out, "  provider KKT              {}", certificate(&provider))?;
    writeln!(
        out,
        "  oracle, step {:<13}{} (fee {} vs {}, distance {} vs {})",
        format_number(ORACLE_STEP),
        verdict(agreement.passed),
        format_number(eq.fee),
        format_number(oracle.fee),
        format_number(eq.distance),
        format_number(oracle.distance)
    )?;

    let failed: Vec<&str> = [
        (follower.passed, "follower KKT"),
        (provider.passed, "provider KKT"),
        (agreement.passed, "oracle agreement"),
    ]
    .into_iter()
    .filter(|(ok, _)| !ok)
    .map(|(_, name)| name)
    .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "{} (profit tolerance {})",
            failed.join(", "),
            format_number(PROFIT_TOLERANCE)
        )))
    }
}

fn sweep(args: &SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let base = load(&args.scenario, err)?;
    let mut axes = args.axes.iter().cloned();
    let axis1 = axes.next().expect("clap requires at least one --axis");
    let axis2 = axes.next();
    if axes.next().is_some() {
        return Err(CliError::Axis {
            spec: "(third axis)".to_string(),
            reason: "at most two axes".to_string(),
        });
    }
    let mut spec = SweepSpec::new(base, axis1).with_options(SweepOptions {
        couple_psp_delay: !args.decouple_psp_delay,
        follower_subsidy_share: args.follower_share,
    });
    if let Some(axis2) = axis2 {
        spec = spec.with_axis2(axis2);
    }
    if let Some(names) = &args.outputs {
        let outputs = names
            .iter()
            .map(|n| n.trim().parse())
            .collect::<Result<Vec<OutputColumn>, _>>()?;
        spec = spec.with_outputs(outputs);
    }
    let table = run_sweep(&spec)?;

    let mut body = Vec::new();
    {
        let mut w = csv_writer(&mut body);
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(table.cells(row).into_iter().map(format_cell))?;
        }
        w.flush()?;
    }
    emit(&body, args.csv.as_deref(), out)
}

fn subsidy(args: &SubsidyArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let s = load(&args.scenario, err)?;
    let quadrant = subsidy_quadrant(&s)?;
    let fuel_none = trip_fuel(&s, quadrant.case_none.distance)?;

    let mut body = Vec::new();
    {
        let mut w = csv_writer(&mut body);
        w.write_record(SUBSIDY_HEADER)?;
        for (case, eq) in quadrant.iter() {
            let saved = s.emission_factor * (fuel_none - trip_fuel(&s, eq.distance)?);
            w.write_record([
                case.label().to_string(),
                format_number(eq.fee),
                format_number(eq.distance),
                format_number(eq.provider_profit),
                format_number(eq.follower_breakdown.total),
                format_number(saved),
            ])?;
        }
        w.flush()?;
    }
    emit(&body, args.csv.as_deref(), out)
}

fn emit(body: &[u8], path: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(path) => std::fs::write(path, body).map_err(|source| CliError::Output {
            path: path.to_path_buf(),
            source,
        }),
        None => Ok(out.write_all(body)?),
    }
}
