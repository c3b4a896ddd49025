//! C ABI over the robust beamforming solver.
//!
//! Handles are opaque; every function validates its pointers and reports
//! failures through [`UavbeamStatus`] return codes. A thread-local message
//! buffer, read with `uavbeam_last_error_message`, carries the detail of the
//! most recent failure on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use uavbeam::conic::program::SolveOptions;
use uavbeam::conic::{solve_robust, AssembleOptions, SolveOutcome};
use uavbeam::geometry::{aod_from_geometry, Position2D, Position3D, SystemParams};
use uavbeam::uncertainty::{
    AoDUncertainty, LocationUncertainty, Scenario, ScenarioUser, TrueRealization, UserUncertainty,
};
use uavbeam::units::{db_to_linear, watts_to_dbm};

/// Result codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UavbeamStatus {
    /// Success.
    UavbeamOk = 0,
    /// A required pointer argument was null.
    UavbeamNullArgument = 1,
    /// An argument was out of range or inconsistent.
    UavbeamInvalidArgument = 2,
    /// The constraint set admits no solution.
    UavbeamInfeasible = 3,
    /// The solver stopped without a certified optimum.
    UavbeamSolverFailure = 4,
    /// An internal panic was caught at the ABI boundary.
    UavbeamInternalError = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: UavbeamStatus, msg: &str) -> UavbeamStatus {
    set_error(msg);
    status
}

struct FfiUser {
    center: Position2D,
    radius: f64,
    rho: f64,
}

/// Problem description handle. Opaque to C.
pub struct UavbeamProblem {
    n_antennas: usize,
    users: Vec<FfiUser>,
    sinr_req_db: Vec<f64>,
    margin_db: f64,
    drop_caps: bool,
    tolerance: f64,
}

/// Solved design handle. Opaque to C.
pub struct UavbeamSolution {
    inner: uavbeam::conic::AllocationSolution,
    n_antennas: usize,
}

/// Create a problem with `n_antennas` transmit antennas and `n_users` ground
/// users at default system parameters (users at the origin, no uncertainty,
/// 10 dB required SINR). Returns null on invalid sizes.
#[no_mangle]
pub extern "C" fn uavbeam_problem_new(n_antennas: usize, n_users: usize) -> *mut UavbeamProblem {
    if n_antennas == 0 || n_users == 0 || n_antennas > 64 || n_users > 64 {
        set_error("antenna and user counts must be in 1..=64");
        return std::ptr::null_mut();
    }
    let problem = UavbeamProblem {
        n_antennas,
        users: (0..n_users)
            .map(|_| FfiUser { center: Position2D::new(0.0, 0.0), radius: 0.0, rho: 0.0 })
            .collect(),
        sinr_req_db: vec![10.0; n_users],
        margin_db: 0.0,
        drop_caps: false,
        tolerance: 1e-8,
    };
    Box::into_raw(Box::new(problem))
}

/// Release a problem handle. Null is ignored.
#[no_mangle]
pub extern "C" fn uavbeam_problem_free(problem: *mut UavbeamProblem) {
    if !problem.is_null() {
        drop(unsafe { Box::from_raw(problem) });
    }
}

/// Set user `index`: estimated planar position in meters, location
/// uncertainty disk radius in meters, and normalized AoD error bound `rho`
/// (the jitter half-width is `rho` times the nominal AoD magnitude).
#[no_mangle]
pub extern "C" fn uavbeam_problem_set_user(
    problem: *mut UavbeamProblem,
    index: usize,
    x_m: f64,
    y_m: f64,
    radius_m: f64,
    rho: f64,
) -> UavbeamStatus {
    let Some(problem) = (unsafe { problem.as_mut() }) else {
        return fail(UavbeamStatus::UavbeamNullArgument, "problem handle is null");
    };
    if index >= problem.users.len() {
        return fail(
            UavbeamStatus::UavbeamInvalidArgument,
            &format!("user index {index} out of range for {} users", problem.users.len()),
        );
    }
    if !(x_m.is_finite() && y_m.is_finite()) || !(radius_m >= 0.0) || !(rho >= 0.0) {
        return fail(
            UavbeamStatus::UavbeamInvalidArgument,
            "position must be finite and radius/rho nonnegative",
        );
    }
    problem.users[index] = FfiUser { center: Position2D::new(x_m, y_m), radius: radius_m, rho };
    UavbeamStatus::UavbeamOk
}

/// Set the per-user minimum required SINR values in dB; `len` must equal the
/// user count.
#[no_mangle]
pub extern "C" fn uavbeam_problem_set_sinr_req_db(
    problem: *mut UavbeamProblem,
    sinr_db: *const f64,
    len: usize,
) -> UavbeamStatus {
    let Some(problem) = (unsafe { problem.as_mut() }) else {
        return fail(UavbeamStatus::UavbeamNullArgument, "problem handle is null");
    };
    if sinr_db.is_null() {
        return fail(UavbeamStatus::UavbeamNullArgument, "sinr_db is null");
    }
    if len != problem.users.len() {
        return fail(
            UavbeamStatus::UavbeamInvalidArgument,
            &format!("expected {} SINR values, got {len}", problem.users.len()),
        );
    }
    let values = unsafe { std::slice::from_raw_parts(sinr_db, len) };
    if values.iter().any(|v| !v.is_finite()) {
        return fail(UavbeamStatus::UavbeamInvalidArgument, "SINR values must be finite");
    }
    problem.sinr_req_db = values.to_vec();
    UavbeamStatus::UavbeamOk
}

/// Set the design margin in dB added to every required SINR to compensate
/// the first-order uncertainty model.
#[no_mangle]
pub extern "C" fn uavbeam_problem_set_margin_db(
    problem: *mut UavbeamProblem,
    margin_db: f64,
) -> UavbeamStatus {
    let Some(problem) = (unsafe { problem.as_mut() }) else {
        return fail(UavbeamStatus::UavbeamNullArgument, "problem handle is null");
    };
    if !margin_db.is_finite() {
        return fail(UavbeamStatus::UavbeamInvalidArgument, "margin must be finite");
    }
    problem.margin_db = margin_db;
    UavbeamStatus::UavbeamOk
}

/// Enable or disable the per-antenna power caps (enabled by default).
#[no_mangle]
pub extern "C" fn uavbeam_problem_set_antenna_caps(
    problem: *mut UavbeamProblem,
    enabled: bool,
) -> UavbeamStatus {
    let Some(problem) = (unsafe { problem.as_mut() }) else {
        return fail(UavbeamStatus::UavbeamNullArgument, "problem handle is null");
    };
    problem.drop_caps = !enabled;
    UavbeamStatus::UavbeamOk
}

/// Set the interior-point convergence tolerance (default 1e-8).
#[no_mangle]
pub extern "C" fn uavbeam_problem_set_tolerance(
    problem: *mut UavbeamProblem,
    tolerance: f64,
) -> UavbeamStatus {
    let Some(problem) = (unsafe { problem.as_mut() }) else {
        return fail(UavbeamStatus::UavbeamNullArgument, "problem handle is null");
    };
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return fail(UavbeamStatus::UavbeamInvalidArgument, "tolerance must be positive");
    }
    problem.tolerance = tolerance;
    UavbeamStatus::UavbeamOk
}

fn solve_impl(problem: &UavbeamProblem) -> Result<UavbeamSolution, (UavbeamStatus, String)> {
    let k = problem.users.len();
    let mut params = SystemParams::defaults(problem.n_antennas, k);
    params.gamma_margin_db = problem.margin_db;
    for (req, db) in params.sinr_req.iter_mut().zip(&problem.sinr_req_db) {
        *req = db_to_linear(db + problem.margin_db);
    }

    // Initial hover point: centroid of the estimated positions at altitude,
    // same convention as the scenario generator.
    let cx = problem.users.iter().map(|u| u.center.x).sum::<f64>() / k as f64;
    let cy = problem.users.iter().map(|u| u.center.y).sum::<f64>() / k as f64;
    let uav_init = Position3D::new(cx, cy, params.altitude);

    let mut users = Vec::with_capacity(k);
    for u in &problem.users {
        let theta = aod_from_geometry(&uav_init, &Position3D::new(u.center.x, u.center.y, 0.0))
            .map_err(|e| (UavbeamStatus::UavbeamInvalidArgument, e.to_string()))?;
        let uncertainty = UserUncertainty {
            aod: AoDUncertainty::new(theta, u.rho * theta.abs())
                .map_err(|e| (UavbeamStatus::UavbeamInvalidArgument, e.to_string()))?,
            loc: LocationUncertainty::new(u.center, u.radius)
                .map_err(|e| (UavbeamStatus::UavbeamInvalidArgument, e.to_string()))?,
        };
        users.push(ScenarioUser {
            uncertainty,
            truth: TrueRealization { delta_theta: 0.0, delta_r: [0.0, 0.0] },
        });
    }
    let scenario = Scenario { uav_init, users };
    let aopts = AssembleOptions { drop_c1: problem.drop_caps, ..Default::default() };
    let sopts = SolveOptions { tolerance: problem.tolerance, ..Default::default() };
    match solve_robust(&scenario, &params, &aopts, &sopts) {
        Ok((_, SolveOutcome::Optimal(sol))) => {
            Ok(UavbeamSolution { inner: sol, n_antennas: problem.n_antennas })
        }
        Ok((_, SolveOutcome::Infeasible(r))) => Err((
            UavbeamStatus::UavbeamInfeasible,
            format!("constraints are infeasible ({})", r.status_detail),
        )),
        Ok((_, SolveOutcome::NumericalFailure(r))) => Err((
            UavbeamStatus::UavbeamSolverFailure,
            format!("solver stopped without an optimum ({})", r.status_detail),
        )),
        Err(e) => Err((UavbeamStatus::UavbeamSolverFailure, e.to_string())),
    }
}

/// Solve the problem. On success writes a new solution handle to `out`,
/// owned by the caller and released with `uavbeam_solution_free`.
#[no_mangle]
pub extern "C" fn uavbeam_solve(
    problem: *const UavbeamProblem,
    out: *mut *mut UavbeamSolution,
) -> UavbeamStatus {
    let Some(problem) = (unsafe { problem.as_ref() }) else {
        return fail(UavbeamStatus::UavbeamNullArgument, "problem handle is null");
    };
    if out.is_null() {
        return fail(UavbeamStatus::UavbeamNullArgument, "output pointer is null");
    }
    match catch_unwind(AssertUnwindSafe(|| solve_impl(problem))) {
        Ok(Ok(solution)) => {
            unsafe { *out = Box::into_raw(Box::new(solution)) };
            UavbeamStatus::UavbeamOk
        }
        Ok(Err((status, msg))) => fail(status, &msg),
        Err(_) => fail(UavbeamStatus::UavbeamInternalError, "internal panic during solve"),
    }
}

/// Release a solution handle. Null is ignored.
#[no_mangle]
pub extern "C" fn uavbeam_solution_free(solution: *mut UavbeamSolution) {
    if !solution.is_null() {
        drop(unsafe { Box::from_raw(solution) });
    }
}

/// Total transmit power in watts, or NaN on a null handle.
#[no_mangle]
pub extern "C" fn uavbeam_solution_total_power_watts(solution: *const UavbeamSolution) -> f64 {
    match unsafe { solution.as_ref() } {
        Some(s) => s.inner.objective,
        None => f64::NAN,
    }
}

/// Total transmit power in dBm, or NaN on a null handle.
#[no_mangle]
pub extern "C" fn uavbeam_solution_total_power_dbm(solution: *const UavbeamSolution) -> f64 {
    match unsafe { solution.as_ref() } {
        Some(s) => watts_to_dbm(s.inner.objective),
        None => f64::NAN,
    }
}

/// Optimized hover position in meters.
#[no_mangle]
pub extern "C" fn uavbeam_solution_position(
    solution: *const UavbeamSolution,
    x_m: *mut f64,
    y_m: *mut f64,
) -> UavbeamStatus {
    let Some(s) = (unsafe { solution.as_ref() }) else {
        return fail(UavbeamStatus::UavbeamNullArgument, "solution handle is null");
    };
    if x_m.is_null() || y_m.is_null() {
        return fail(UavbeamStatus::UavbeamNullArgument, "output pointer is null");
    }
    unsafe {
        *x_m = s.inner.position.x;
        *y_m = s.inner.position.y;
    }
    UavbeamStatus::UavbeamOk
}

/// Number of users in the solved design; 0 on a null handle.
#[no_mangle]
pub extern "C" fn uavbeam_solution_n_users(solution: *const UavbeamSolution) -> usize {
    unsafe { solution.as_ref() }.map_or(0, |s| s.inner.beamformers.len())
}

/// Number of antennas in the solved design; 0 on a null handle.
#[no_mangle]
pub extern "C" fn uavbeam_solution_n_antennas(solution: *const UavbeamSolution) -> usize {
    unsafe { solution.as_ref() }.map_or(0, |s| s.n_antennas)
}

/// Copy user `index`'s beamformer into `re`/`im`, each holding `len` values
/// with `len` equal to the antenna count. Entries are in units of sqrt(watt).
#[no_mangle]
pub extern "C" fn uavbeam_solution_beamformer(
    solution: *const UavbeamSolution,
    index: usize,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> UavbeamStatus {
    let Some(s) = (unsafe { solution.as_ref() }) else {
        return fail(UavbeamStatus::UavbeamNullArgument, "solution handle is null");
    };
    if re.is_null() || im.is_null() {
        return fail(UavbeamStatus::UavbeamNullArgument, "output pointer is null");
    }
    if index >= s.inner.beamformers.len() {
        return fail(
            UavbeamStatus::UavbeamInvalidArgument,
            &format!("user index {index} out of range for {} users", s.inner.beamformers.len()),
        );
    }
    if len != s.n_antennas {
        return fail(
            UavbeamStatus::UavbeamInvalidArgument,
            &format!("buffer length {len} does not match {} antennas", s.n_antennas),
        );
    }
    let w = &s.inner.beamformers[index];
    let (re, im) = unsafe {
        (std::slice::from_raw_parts_mut(re, len), std::slice::from_raw_parts_mut(im, len))
    };
    for n in 0..len {
        re[n] = w[n].re;
        im[n] = w[n].im;
    }
    UavbeamStatus::UavbeamOk
}

/// Second-to-first eigenvalue ratio of user `index`'s transmit covariance;
/// near zero certifies a rank-one optimum. NaN on bad arguments.
#[no_mangle]
pub extern "C" fn uavbeam_solution_rank_ratio(
    solution: *const UavbeamSolution,
    index: usize,
) -> f64 {
    match unsafe { solution.as_ref() } {
        Some(s) => s.inner.rank_ratios.get(index).copied().unwrap_or(f64::NAN),
        None => f64::NAN,
    }
}

/// Relative duality gap achieved by the conic solve; NaN on a null handle.
#[no_mangle]
pub extern "C" fn uavbeam_solution_duality_gap(solution: *const UavbeamSolution) -> f64 {
    match unsafe { solution.as_ref() } {
        Some(s) => s.inner.report.duality_gap_rel(),
        None => f64::NAN,
    }
}

/// Message describing the most recent failure on this thread. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn uavbeam_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn uavbeam_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
