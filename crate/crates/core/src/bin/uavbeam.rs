//! Command-line front end: single-scenario solves, Monte-Carlo sweeps,
//! invariant verification, and conic-program dumps.
//!
//! Exit codes: 0 success, 1 configuration error, 2 hard solver failure or
//! invariant violation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uavbeam::conic::program::SolveOptions;
use uavbeam::conic::{assemble, dump::dump_program, solve_robust, AssembleOptions, SolveOutcome};
use uavbeam::experiments::{
    aggregate, generate_scenario, records_to_csv, run_sweep, summary_to_csv, ExperimentConfig,
    Scheme, SweepAxis,
};
use uavbeam::geometry::SystemParams;
use uavbeam::units::{db_to_linear, watts_to_dbm};
use uavbeam::{Error, Result};

#[derive(Parser)]
#[command(name = "uavbeam", version, about = "Robust UAV downlink beamforming designer")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the realization count.
    #[arg(long, global = true)]
    realizations: Option<usize>,
    /// Write CSV (sweeps) or text output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated subset of proposed,zf,mrt,nonrobust.
    #[arg(long, global = true)]
    schemes: Option<String>,
    /// Drop the per-antenna power caps in every scheme.
    #[arg(long, global = true)]
    drop_c1: bool,
    /// Worst-case evaluation grid as THETAxBOUNDARY, e.g. 101x64.
    #[arg(long, global = true)]
    oracle_grid: Option<String>,
    /// Sample true positions outside the modeled uncertainty disk.
    #[arg(long, global = true)]
    mismatch: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one scenario (realization 0) and print solution diagnostics.
    Solve,
    /// Monte-Carlo sweep over the configured angle-error levels.
    SweepRho,
    /// Monte-Carlo sweep over the configured required-SINR levels.
    SweepSinr,
    /// Monte-Carlo sweep over the configured location-uncertainty radii.
    SweepRadius,
    /// Run the numerical invariant suites.
    Verify,
    /// Print the assembled conic program for scenario realization 0.
    DumpProblem,
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(n) = common.realizations {
        cfg.realizations = n;
    }
    if let Some(list) = &common.schemes {
        cfg.schemes = list
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| s.trim().parse::<Scheme>())
            .collect::<Result<_>>()?;
    }
    if common.drop_c1 {
        cfg.drop_c1_everywhere = true;
    }
    if let Some(grid) = &common.oracle_grid {
        let (a, b) = grid
            .split_once('x')
            .ok_or_else(|| Error::Config(format!("oracle grid '{grid}' is not THETAxBOUNDARY")))?;
        cfg.oracle_theta = a
            .parse()
            .map_err(|_| Error::Config(format!("bad oracle grid theta count '{a}'")))?;
        cfg.oracle_boundary = b
            .parse()
            .map_err(|_| Error::Config(format!("bad oracle grid boundary count '{b}'")))?;
    }
    if common.mismatch {
        cfg.mismatch = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// First-realization scenario and the margin-inflated design parameters.
fn scenario_zero(
    cfg: &ExperimentConfig,
) -> Result<(uavbeam::uncertainty::Scenario, SystemParams)> {
    let rho = cfg.rho.first().copied().unwrap_or(0.05);
    let sinr_db = cfg.sinr_req_db.first().copied().unwrap_or(10.0);
    let scenario = generate_scenario(cfg, rho, cfg.location_radius, 0)?;
    let mut params = SystemParams::defaults(cfg.n_antennas, cfg.k_users);
    params.sinr_req = vec![db_to_linear(sinr_db + cfg.gamma_margin_db); cfg.k_users];
    params.gamma_margin_db = cfg.gamma_margin_db;
    Ok((scenario, params))
}

fn cmd_solve(common: &Common) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let (scenario, params) = scenario_zero(&cfg)?;
    let aopts = AssembleOptions { drop_c1: cfg.drop_c1_everywhere, ..Default::default() };
    let (problem, outcome) = solve_robust(&scenario, &params, &aopts, &SolveOptions::default())?;
    match outcome {
        SolveOutcome::Optimal(sol) => {
            let mut text = String::new();
            text.push_str(&format!(
                "status: optimal\ntotal power: {:.6e} W ({:.4} dBm)\n",
                sol.objective,
                watts_to_dbm(sol.objective)
            ));
            text.push_str(&format!(
                "hover position: ({:.3}, {:.3}) m\n",
                sol.position.x, sol.position.y
            ));
            for (k, (ratio, eta)) in sol.rank_ratios.iter().zip(&sol.eta).enumerate() {
                text.push_str(&format!(
                    "user {k}: rank ratio {ratio:.3e}, worst-case slack {eta:.4e}\n"
                ));
            }
            text.push_str(&format!(
                "relative duality gap: {:.3e}\n",
                sol.report.duality_gap_rel()
            ));
            let kkt = problem.kkt_diagnostics(&sol.report)?;
            text.push_str(&format!(
                "kkt: max stationarity {:.3e}, max complementarity {:.3e}\n",
                kkt.stationarity_errors.iter().cloned().fold(0.0f64, f64::max),
                kkt.complementarity.iter().cloned().fold(0.0f64, f64::max),
            ));
            emit(&common.out, &text)?;
            Ok(ExitCode::SUCCESS)
        }
        SolveOutcome::Infeasible(r) => {
            println!("status: infeasible ({})", r.status_detail);
            Ok(ExitCode::SUCCESS)
        }
        SolveOutcome::NumericalFailure(r) => {
            eprintln!("solver failure: {}", r.status_detail);
            Ok(ExitCode::from(2))
        }
    }
}

fn cmd_sweep(common: &Common, axis: SweepAxis) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let records = run_sweep(&cfg, axis)?;
    emit(&common.out, &records_to_csv(&records))?;
    // Human-readable rollup on stderr so the CSV stream stays clean.
    for row in aggregate(&records)? {
        eprintln!(
            "{} {}={}: {} ok / {} infeasible / {} outage / {} failed, mean power {}, qos pass {:.1}%",
            row.scheme,
            row.sweep_axis.label(),
            row.sweep_value,
            row.successes,
            row.infeasible,
            row.outages,
            row.failures,
            row.mean_power_dbm
                .map(|d| format!("{d:.3} dBm"))
                .unwrap_or_else(|| "n/a".into()),
            100.0 * row.qos_pass_rate,
        );
    }
    if common.out.is_some() {
        // Summary also lands next to the CSV for scripted consumers.
        let path = common.out.as_ref().unwrap().with_extension("summary.csv");
        std::fs::write(path, summary_to_csv(&aggregate(&records)?))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(common: &Common) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let results = uavbeam::verify::run_all(cfg.seed)?;
    let mut all_ok = true;
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        all_ok &= r.passed;
    }
    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_dump(common: &Common) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let (scenario, params) = scenario_zero(&cfg)?;
    let aopts = AssembleOptions { drop_c1: cfg.drop_c1_everywhere, ..Default::default() };
    let problem = assemble(&scenario, &params, &aopts)?;
    emit(&common.out, &dump_program(&problem.program))?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Solve => cmd_solve(&cli.common),
        Cmd::SweepRho => cmd_sweep(&cli.common, SweepAxis::Rho),
        Cmd::SweepSinr => cmd_sweep(&cli.common, SweepAxis::SinrReqDb),
        Cmd::SweepRadius => cmd_sweep(&cli.common, SweepAxis::Radius),
        Cmd::Verify => cmd_verify(&cli.common),
        Cmd::DumpProblem => cmd_dump(&cli.common),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                // Configuration and input problems are exit 1, solver-side
                // hard failures exit 2.
                Error::Config(_) | Error::InvalidParameter(_) | Error::Io(_) => ExitCode::from(1),
                Error::SolverFailure(_) | Error::Unsolved(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
