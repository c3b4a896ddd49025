//! Monte-Carlo experiment orchestration: scenario generation, per-scheme
//! solves with the SINR design margin, nonlinear replay of the results, and
//! CSV-friendly aggregation.
//!
//! Determinism contract: every random draw derives from (seed, realization
//! index) through a counter-based stream, so results are independent of the
//! parallel schedule. User placements are resampled for every realization.
//! Records carry the wall-clock solve time for diagnostics, but the CSV
//! serialization omits it so identical runs produce identical bytes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::baselines::{
    solve_fixed_direction, solve_nonrobust, FixedDirectionScheme, NonRobustOutcome, TAU_MAX,
};
use crate::conic::program::SolveOptions;
use crate::conic::{solve_robust, AllocationSolution, AssembleOptions, SolveOutcome};
use crate::error::{Error, Result};
use crate::geometry::{aod_from_geometry, Position2D, Position3D, SystemParams};
use crate::uncertainty::{
    worst_case_sinr_oracle, AarModel, AoDUncertainty, LocationUncertainty, OracleGrid, Scenario,
    ScenarioUser, TrueRealization, UserUncertainty,
};
use crate::units::{db_to_linear, linear_to_db, watts_to_dbm};

/// Beamforming scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Proposed,
    Zf,
    Mrt,
    Nonrobust,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Proposed, Scheme::Zf, Scheme::Mrt, Scheme::Nonrobust];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Zf => "zf",
            Scheme::Mrt => "mrt",
            Scheme::Nonrobust => "nonrobust",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Scheme::Proposed),
            "zf" => Ok(Scheme::Zf),
            "mrt" => Ok(Scheme::Mrt),
            "nonrobust" => Ok(Scheme::Nonrobust),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Full experiment description; see the README for the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub realizations: usize,
    /// Users are placed uniformly on a disk of this radius, meters.
    pub cell_radius: f64,
    pub k_users: usize,
    pub n_antennas: usize,
    /// Normalized angle-error sweep values (α_k = ρ·|θ̄_k|).
    pub rho: Vec<f64>,
    /// Location uncertainty disk radius D, meters.
    pub location_radius: f64,
    /// Required-SINR sweep values, dB.
    pub sinr_req_db: Vec<f64>,
    /// Location-radius sweep values, meters.
    pub radius_sweep: Vec<f64>,
    /// Design margin γ added to the required SINR while solving, dB.
    pub gamma_margin_db: f64,
    pub schemes: Vec<Scheme>,
    /// Drop per-antenna power caps in every scheme (for the dominance
    /// comparisons, which rely on pure feasible-set inclusion).
    pub drop_c1_everywhere: bool,
    /// Angle samples of the worst-case evaluation grid.
    pub oracle_theta: usize,
    /// Disk boundary directions of the worst-case evaluation grid.
    pub oracle_boundary: usize,
    /// Sample true positions up to 1.5·D from the estimate, violating the
    /// bounded-uncertainty model on purpose.
    pub mismatch: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            realizations: 100,
            cell_radius: 500.0,
            k_users: 3,
            n_antennas: 6,
            rho: vec![0.01, 0.05, 0.10],
            location_radius: 20.0,
            sinr_req_db: vec![6.0, 8.0, 10.0, 12.0],
            radius_sweep: vec![10.0, 20.0, 40.0],
            gamma_margin_db: 0.3,
            schemes: Scheme::ALL.to_vec(),
            drop_c1_everywhere: false,
            oracle_theta: 101,
            oracle_boundary: 64,
            mismatch: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::Config("realizations must be >= 1".into()));
        }
        if self.k_users == 0 || self.n_antennas == 0 {
            return Err(Error::Config("k_users and n_antennas must be >= 1".into()));
        }
        if !(self.cell_radius > 0.0 && self.cell_radius.is_finite()) {
            return Err(Error::Config("cell_radius must be positive".into()));
        }
        if self.rho.iter().any(|&r| !(r >= 0.0) || !r.is_finite()) {
            return Err(Error::Config("rho values must be finite and >= 0".into()));
        }
        if !(self.location_radius >= 0.0 && self.location_radius.is_finite()) {
            return Err(Error::Config("location_radius must be finite and >= 0".into()));
        }
        for list in [&self.sinr_req_db, &self.radius_sweep] {
            if list.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("sweep values must be finite".into()));
            }
        }
        if !self.gamma_margin_db.is_finite() {
            return Err(Error::Config("gamma_margin_db must be finite".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("schemes must be nonempty".into()));
        }
        if self.oracle_theta < 2 || self.oracle_boundary < 1 {
            return Err(Error::Config("oracle grid too small".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn oracle_grid(&self) -> OracleGrid {
        OracleGrid { n_theta: self.oracle_theta, n_boundary: self.oracle_boundary }
    }
}

/// Which parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Rho,
    SinrReqDb,
    Radius,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::Rho => "rho",
            SweepAxis::SinrReqDb => "sinr_req_db",
            SweepAxis::Radius => "radius_m",
        }
    }
}

/// One point on a sweep: which axis is varied and its value. Non-swept
/// parameters take the first entry of their config list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub axis: SweepAxis,
    pub value: f64,
}

/// Solver status of one scheme on one realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    Optimal,
    Infeasible,
    /// Non-robust scaling saturated below the requirement.
    Outage,
    Failure,
}

impl RecordStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordStatus::Optimal => "optimal",
            RecordStatus::Infeasible => "infeasible",
            RecordStatus::Outage => "outage",
            RecordStatus::Failure => "failure",
        }
    }
}

/// One scheme × sweep point × realization result.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub scheme: Scheme,
    pub sweep_axis: SweepAxis,
    pub sweep_value: f64,
    pub realization: usize,
    pub status: RecordStatus,
    /// Final total transmit power, watts (scaled power for the non-robust
    /// scheme). Present only on success.
    pub total_power_watts: Option<f64>,
    /// Same quantity in dBm; always 10·log10(watts/1 mW) of the watts field.
    pub total_power_dbm: Option<f64>,
    pub rank_ratio_max: Option<f64>,
    /// min over users of the worst-case linearized SINR over the uncertainty
    /// grid, relative to the original requirement, dB.
    pub linearized_margin_db: Option<f64>,
    /// Worst-case SINR under the exact phase model meets the original
    /// requirement everywhere on the grid.
    pub qos_pass: Option<bool>,
    /// Common power scaling (non-robust scheme only).
    pub tau: Option<f64>,
    pub solve_time_s: f64,
}

/// Deterministic scenario for one realization: true positions uniform on the
/// cell disk, estimates displaced by at most the uncertainty radius (so the
/// truth stays inside the model set unless `mismatch` is on), initial UAV
/// position at the estimate centroid, and angle jitter α_k = ρ·|θ̄_k|.
pub fn generate_scenario(
    config: &ExperimentConfig,
    rho: f64,
    location_radius: f64,
    index: u64,
) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index.wrapping_add(1));

    let offset_cap = if config.mismatch { 1.5 * location_radius } else { location_radius };
    let mut truths = Vec::with_capacity(config.k_users);
    let mut estimates = Vec::with_capacity(config.k_users);
    for _ in 0..config.k_users {
        let u: f64 = rng.gen();
        let r = config.cell_radius * u.sqrt();
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let truth = Position2D::new(r * phi.cos(), r * phi.sin());
        let u: f64 = rng.gen();
        let ro = offset_cap * u.sqrt();
        let po = rng.gen_range(0.0..std::f64::consts::TAU);
        let estimate = Position2D::new(truth.x + ro * po.cos(), truth.y + ro * po.sin());
        truths.push(truth);
        estimates.push(estimate);
    }
    let centroid = Position2D::new(
        estimates.iter().map(|p| p.x).sum::<f64>() / config.k_users as f64,
        estimates.iter().map(|p| p.y).sum::<f64>() / config.k_users as f64,
    );
    let uav_init = Position3D::new(centroid.x, centroid.y, 100.0);

    let mut users = Vec::with_capacity(config.k_users);
    for (truth, estimate) in truths.iter().zip(&estimates) {
        let theta_bar =
            aod_from_geometry(&uav_init, &Position3D::new(estimate.x, estimate.y, 0.0))?;
        let alpha = rho * theta_bar.abs();
        let u: f64 = rng.gen();
        let delta_theta = alpha * (2.0 * u - 1.0);
        users.push(ScenarioUser {
            uncertainty: UserUncertainty {
                aod: AoDUncertainty::new(theta_bar, alpha)?,
                loc: LocationUncertainty::new(*estimate, location_radius)?,
            },
            truth: TrueRealization {
                delta_theta,
                delta_r: [truth.x - estimate.x, truth.y - estimate.y],
            },
        });
    }
    Ok(Scenario { uav_init, users })
}

fn build_params(config: &ExperimentConfig, sinr_db: f64) -> SystemParams {
    let mut p = SystemParams::defaults(config.n_antennas, config.k_users);
    p.sinr_req = vec![db_to_linear(sinr_db); config.k_users];
    p.gamma_margin_db = config.gamma_margin_db;
    p
}

/// Resolve a sweep point against the config: the swept axis takes the point
/// value, the others their first configured entry.
fn resolve(config: &ExperimentConfig, point: &SweepPoint) -> (f64, f64, f64) {
    let rho = config.rho.first().copied().unwrap_or(0.05);
    let sinr_db = config.sinr_req_db.first().copied().unwrap_or(10.0);
    let radius = config.location_radius;
    match point.axis {
        SweepAxis::Rho => (point.value, sinr_db, radius),
        SweepAxis::SinrReqDb => (rho, point.value, radius),
        SweepAxis::Radius => (rho, sinr_db, point.value),
    }
}

/// Solve every scheme on every realization of one sweep point. Solver
/// failures become records, not errors. Output order is canonical
/// (realization index, then scheme order as configured).
pub fn run_point(config: &ExperimentConfig, point: &SweepPoint) -> Result<Vec<ExperimentRecord>> {
    config.validate()?;
    let nested: Vec<Vec<ExperimentRecord>> = (0..config.realizations)
        .into_par_iter()
        .map(|i| run_realization(config, point, i))
        .collect::<Result<_>>()?;
    Ok(nested.into_iter().flatten().collect())
}

/// Run a whole sweep over the configured list for an axis.
pub fn run_sweep(config: &ExperimentConfig, axis: SweepAxis) -> Result<Vec<ExperimentRecord>> {
    let values: Vec<f64> = match axis {
        SweepAxis::Rho => config.rho.clone(),
        SweepAxis::SinrReqDb => config.sinr_req_db.clone(),
        SweepAxis::Radius => config.radius_sweep.clone(),
    };
    if values.is_empty() {
        return Err(Error::Config(format!("empty sweep list for {}", axis.label())));
    }
    let mut out = Vec::new();
    for value in values {
        out.extend(run_point(config, &SweepPoint { axis, value })?);
    }
    Ok(out)
}

fn run_realization(
    config: &ExperimentConfig,
    point: &SweepPoint,
    realization: usize,
) -> Result<Vec<ExperimentRecord>> {
    let (rho, sinr_db, radius) = resolve(config, point);
    let scenario = generate_scenario(config, rho, radius, realization as u64)?;
    // Solve against the margin-inflated requirement, evaluate at the
    // original one.
    let params_solve = build_params(config, sinr_db + config.gamma_margin_db);
    let params_eval = build_params(config, sinr_db);
    let mut records = Vec::with_capacity(config.schemes.len());
    for &scheme in &config.schemes {
        records.push(run_scheme(
            config,
            scheme,
            &scenario,
            &params_solve,
            &params_eval,
            point,
            realization,
        )?);
    }
    Ok(records)
}

fn run_scheme(
    config: &ExperimentConfig,
    scheme: Scheme,
    scenario: &Scenario,
    params_solve: &SystemParams,
    params_eval: &SystemParams,
    point: &SweepPoint,
    realization: usize,
) -> Result<ExperimentRecord> {
    let solve_opts = SolveOptions::default();
    let aopts = AssembleOptions { drop_c1: config.drop_c1_everywhere, ..Default::default() };
    let start = Instant::now();

    let blank = |status: RecordStatus, time: f64| ExperimentRecord {
        scheme,
        sweep_axis: point.axis,
        sweep_value: point.value,
        realization,
        status,
        total_power_watts: None,
        total_power_dbm: None,
        rank_ratio_max: None,
        linearized_margin_db: None,
        qos_pass: None,
        tau: None,
        solve_time_s: time,
    };

    match scheme {
        Scheme::Proposed | Scheme::Zf | Scheme::Mrt => {
            let outcome = match scheme {
                Scheme::Proposed => solve_robust(scenario, params_solve, &aopts, &solve_opts)?.1,
                Scheme::Zf => {
                    solve_fixed_direction(
                        FixedDirectionScheme::ZeroForcing,
                        scenario,
                        params_solve,
                        &solve_opts,
                    )?
                    .1
                }
                Scheme::Mrt => {
                    solve_fixed_direction(
                        FixedDirectionScheme::MaxRatio,
                        scenario,
                        params_solve,
                        &solve_opts,
                    )?
                    .1
                }
                Scheme::Nonrobust => unreachable!(),
            };
            let time = start.elapsed().as_secs_f64();
            match outcome {
                SolveOutcome::Optimal(sol) => {
                    Ok(evaluated_record(config, scheme, scenario, params_eval, &sol, point, realization, time)?)
                }
                SolveOutcome::Infeasible(_) => Ok(blank(RecordStatus::Infeasible, time)),
                SolveOutcome::NumericalFailure(_) => Ok(blank(RecordStatus::Failure, time)),
            }
        }
        Scheme::Nonrobust => {
            // The non-robust design trusts the estimates at the original
            // requirement and buys back shortfall with the common scaling.
            let outcome = solve_nonrobust(scenario, params_eval, &aopts, &solve_opts)?;
            let time = start.elapsed().as_secs_f64();
            match outcome {
                NonRobustOutcome::Optimal { nominal, scaling } => {
                    if scaling.outage {
                        let mut rec = blank(RecordStatus::Outage, time);
                        rec.tau = Some(TAU_MAX);
                        rec.qos_pass = Some(false);
                        Ok(rec)
                    } else {
                        let scaled = scaling.tau * nominal.objective;
                        let mut rec = evaluated_scaled_record(
                            config,
                            scheme,
                            scenario,
                            params_eval,
                            &nominal,
                            scaling.tau,
                            point,
                            realization,
                            time,
                        )?;
                        rec.total_power_watts = Some(scaled);
                        rec.total_power_dbm = Some(watts_to_dbm(scaled));
                        rec.tau = Some(scaling.tau);
                        Ok(rec)
                    }
                }
                NonRobustOutcome::Infeasible(_) => Ok(blank(RecordStatus::Infeasible, time)),
                NonRobustOutcome::NumericalFailure(_) => Ok(blank(RecordStatus::Failure, time)),
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn evaluated_record(
    config: &ExperimentConfig,
    scheme: Scheme,
    scenario: &Scenario,
    params_eval: &SystemParams,
    sol: &AllocationSolution,
    point: &SweepPoint,
    realization: usize,
    time: f64,
) -> Result<ExperimentRecord> {
    evaluated_scaled_record(
        config, scheme, scenario, params_eval, sol, 1.0, point, realization, time,
    )
}

#[allow(clippy::too_many_arguments)]
fn evaluated_scaled_record(
    config: &ExperimentConfig,
    scheme: Scheme,
    scenario: &Scenario,
    params_eval: &SystemParams,
    sol: &AllocationSolution,
    tau: f64,
    point: &SweepPoint,
    realization: usize,
    time: f64,
) -> Result<ExperimentRecord> {
    let users = scenario.uncertainties();
    let beams: Vec<_> = if tau == 1.0 {
        sol.beamformers.clone()
    } else {
        sol.beamformers
            .iter()
            .map(|w| w * num_complex::Complex64::new(tau.sqrt(), 0.0))
            .collect()
    };
    let grid = config.oracle_grid();
    let lin = worst_case_sinr_oracle(
        &beams,
        &sol.position,
        &users,
        params_eval,
        AarModel::Linearized,
        grid,
    )?;
    let nonlin = worst_case_sinr_oracle(
        &beams,
        &sol.position,
        &users,
        params_eval,
        AarModel::Nonlinear,
        grid,
    )?;
    let margin_db = lin
        .iter()
        .zip(&params_eval.sinr_req)
        .map(|(&s, &req)| linear_to_db(s / req))
        .fold(f64::INFINITY, f64::min);
    let qos_pass = nonlin
        .iter()
        .zip(&params_eval.sinr_req)
        .all(|(&s, &req)| s >= req * (1.0 - 1e-9));
    let rank = sol.rank_ratios.iter().cloned().fold(0.0f64, f64::max);
    let watts = sol.objective;
    Ok(ExperimentRecord {
        scheme,
        sweep_axis: point.axis,
        sweep_value: point.value,
        realization,
        status: RecordStatus::Optimal,
        total_power_watts: Some(watts),
        total_power_dbm: Some(watts_to_dbm(watts)),
        rank_ratio_max: Some(rank),
        linearized_margin_db: Some(margin_db),
        qos_pass: Some(qos_pass),
        tau: None,
        solve_time_s: time,
    })
}

/// Aggregated view of one (scheme, sweep point) group.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub sweep_axis: SweepAxis,
    pub sweep_value: f64,
    pub records: usize,
    pub successes: usize,
    pub infeasible: usize,
    pub outages: usize,
    pub failures: usize,
    /// Mean over successful realizations, taken in linear watts.
    pub mean_power_watts: Option<f64>,
    pub mean_power_dbm: Option<f64>,
    pub mean_rank_ratio: Option<f64>,
    pub qos_pass_rate: f64,
}

/// Group records by (scheme, sweep point) and average. Power averages in the
/// linear domain; groups with no successes carry no power value. The result
/// does not depend on record order.
pub fn aggregate(records: &[ExperimentRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::EmptyGroup);
    }
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(Scheme, &'static str, u64), Vec<&ExperimentRecord>> =
        BTreeMap::new();
    for r in records {
        groups
            .entry((r.scheme, r.sweep_axis.label(), r.sweep_value.to_bits()))
            .or_default()
            .push(r);
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((scheme, _, value_bits), group) in groups {
        let mut powers: Vec<f64> =
            group.iter().filter_map(|r| r.total_power_watts).collect();
        // Sorted summation keeps the mean independent of record order.
        powers.sort_by(f64::total_cmp);
        let mut ranks: Vec<f64> = group.iter().filter_map(|r| r.rank_ratio_max).collect();
        ranks.sort_by(f64::total_cmp);
        let successes = group.iter().filter(|r| r.status == RecordStatus::Optimal).count();
        let mean_power = if powers.is_empty() {
            None
        } else {
            Some(powers.iter().sum::<f64>() / powers.len() as f64)
        };
        out.push(SummaryRow {
            scheme,
            sweep_axis: group[0].sweep_axis,
            sweep_value: f64::from_bits(value_bits),
            records: group.len(),
            successes,
            infeasible: group.iter().filter(|r| r.status == RecordStatus::Infeasible).count(),
            outages: group.iter().filter(|r| r.status == RecordStatus::Outage).count(),
            failures: group.iter().filter(|r| r.status == RecordStatus::Failure).count(),
            mean_power_watts: mean_power,
            mean_power_dbm: mean_power.map(watts_to_dbm),
            mean_rank_ratio: if ranks.is_empty() {
                None
            } else {
                Some(ranks.iter().sum::<f64>() / ranks.len() as f64)
            },
            qos_pass_rate: group.iter().filter(|r| r.qos_pass == Some(true)).count() as f64
                / group.len() as f64,
        });
    }
    Ok(out)
}

pub const CSV_HEADER: &str = "scheme,sweep,sweep_value,realization,status,total_power_watts,\
total_power_dbm,rank_ratio_max,linearized_margin_db,qos_pass,tau";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// Serialize records to CSV with a fixed header. Floats carry 17 significant
/// digits; the solve time is omitted so reruns are byte-identical.
pub fn records_to_csv(records: &[ExperimentRecord]) -> String {
    let mut s = String::with_capacity(64 * (records.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in records {
        let qos = r.qos_pass.map(|b| if b { "true" } else { "false" }).unwrap_or("");
        s.push_str(&format!(
            "{},{},{:.16e},{},{},{},{},{},{},{},{}\n",
            r.scheme,
            r.sweep_axis.label(),
            r.sweep_value,
            r.realization,
            r.status.as_str(),
            fmt_opt(r.total_power_watts),
            fmt_opt(r.total_power_dbm),
            fmt_opt(r.rank_ratio_max),
            fmt_opt(r.linearized_margin_db),
            qos,
            fmt_opt(r.tau),
        ));
    }
    s
}

/// Serialize summary rows to CSV.
pub fn summary_to_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from(
        "scheme,sweep,sweep_value,records,successes,infeasible,outages,failures,\
mean_power_watts,mean_power_dbm,mean_rank_ratio,qos_pass_rate\n",
    );
    for r in rows {
        s.push_str(&format!(
            "{},{},{:.16e},{},{},{},{},{},{},{},{},{:.16e}\n",
            r.scheme,
            r.sweep_axis.label(),
            r.sweep_value,
            r.records,
            r.successes,
            r.infeasible,
            r.outages,
            r.failures,
            fmt_opt(r.mean_power_watts),
            fmt_opt(r.mean_power_dbm),
            fmt_opt(r.mean_rank_ratio),
            r.qos_pass_rate,
        ));
    }
    s
}
