//! Reference beamforming schemes used for comparison: zero-forcing and
//! maximum-ratio directions with optimized powers and hover position, and a
//! non-robust design that trusts the estimates and buys back the shortfall
//! with a common post-hoc power scaling.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::conic::program::{ConicSolveReport, SolveOptions};
use crate::conic::{solve_robust, AllocationSolution, AssembleOptions, RobustProblem, SolveOutcome};
use crate::error::{Error, Result};
use crate::geometry::{nonlinear_aar, steering_vector, Position2D, SystemParams};
use crate::uncertainty::{Scenario, TrueRealization, UserUncertainty};

/// Which fixed beam direction family to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedDirectionScheme {
    /// Each user's direction is orthogonal to every other user's estimated
    /// steering vector.
    ZeroForcing,
    /// Each user's direction is its own estimated steering vector.
    MaxRatio,
}

/// Unit steering directions: the estimated channel direction per user.
pub fn mrt_directions(estimates: &[DVector<Complex64>]) -> Vec<DVector<Complex64>> {
    estimates.iter().map(|a| a / Complex64::new(a.norm(), 0.0)).collect()
}

/// Unit direction per user lying in the orthogonal complement of the other
/// users' estimated steering vectors (projection of the user's own vector,
/// which maximizes the retained gain among null-space choices).
pub fn zf_directions(estimates: &[DVector<Complex64>]) -> Result<Vec<DVector<Complex64>>> {
    let k_users = estimates.len();
    if k_users == 0 {
        return Ok(Vec::new());
    }
    let nt = estimates[0].len();
    if nt < k_users {
        return Err(Error::InvalidParameter(format!(
            "nulling {} users needs at least that many antennas, have {nt}",
            k_users - 1
        )));
    }
    let mut out = Vec::with_capacity(k_users);
    for k in 0..k_users {
        // Orthonormal basis of the other users' span via modified
        // Gram-Schmidt; near-dependent columns collapse into the basis.
        let mut basis: Vec<DVector<Complex64>> = Vec::new();
        for (r, a) in estimates.iter().enumerate() {
            if r == k {
                continue;
            }
            let mut v = a.clone();
            for q in &basis {
                let coeff = q.dotc(&v);
                v -= q * coeff;
            }
            if v.norm() > 1e-9 * a.norm() {
                let n = v.norm();
                basis.push(v / Complex64::new(n, 0.0));
            }
        }
        let mut w = estimates[k].clone();
        for q in &basis {
            let coeff = q.dotc(&w);
            w -= q * coeff;
        }
        if w.norm() <= 1e-9 * estimates[k].norm() {
            return Err(Error::RankDeficient);
        }
        let n = w.norm();
        out.push(w / Complex64::new(n, 0.0));
    }
    Ok(out)
}

/// Estimated steering vectors at the nominal angles of a scenario.
pub fn estimated_steering(scenario: &Scenario, params: &SystemParams) -> Vec<DVector<Complex64>> {
    scenario
        .users
        .iter()
        .map(|u| steering_vector(u.uncertainty.aod.theta_bar, params).0)
        .collect()
}

/// Solve the robust program restricted to fixed rank-one directions with
/// scalar powers. Per-antenna caps are omitted so the comparison against the
/// unrestricted scheme is a pure feasible-set inclusion.
pub fn solve_fixed_direction(
    scheme: FixedDirectionScheme,
    scenario: &Scenario,
    params: &SystemParams,
    solve_opts: &SolveOptions,
) -> Result<(RobustProblem, SolveOutcome)> {
    let estimates = estimated_steering(scenario, params);
    let dirs = match scheme {
        FixedDirectionScheme::ZeroForcing => zf_directions(&estimates)?,
        FixedDirectionScheme::MaxRatio => mrt_directions(&estimates),
    };
    let opts = AssembleOptions { drop_c1: true, fixed_directions: Some(dirs), ..Default::default() };
    solve_robust(scenario, params, &opts, solve_opts)
}

/// Result of the post-hoc common power scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerScaling {
    /// Common factor applied to every covariance (beamformers scale by √τ).
    pub tau: f64,
    /// True when no scaling up to the search cap meets the targets because
    /// the interference-limited SINR ceiling sits below a requirement.
    pub outage: bool,
}

/// Upper end of the τ search interval.
pub const TAU_MAX: f64 = 1e6;

/// Minimal common power scaling τ ≥ 1 so that every user's realized SINR,
/// under the exact phase model at the true user positions, meets its target.
/// SINR is monotone increasing in τ (numerator and interference scale
/// together while noise stays fixed), so bisection applies.
pub fn scale_to_qos(
    beamformers: &[DVector<Complex64>],
    uav_xy: &Position2D,
    users: &[UserUncertainty],
    truths: &[TrueRealization],
    params: &SystemParams,
    sinr_req: &[f64],
) -> Result<PowerScaling> {
    let k_users = users.len();
    if beamformers.len() != k_users || truths.len() != k_users || sinr_req.len() != k_users {
        return Err(Error::DimensionMismatch { expected: k_users, got: beamformers.len() });
    }
    // Per-user signal and interference powers at τ = 1, and noise.
    let mut signal = Vec::with_capacity(k_users);
    let mut interference = Vec::with_capacity(k_users);
    for (k, (user, re)) in users.iter().zip(truths).enumerate() {
        let a = nonlinear_aar(user.aod.theta_bar, re.delta_theta, params).0;
        let true_pos = Position2D::new(
            user.loc.center.x + re.delta_r[0],
            user.loc.center.y + re.delta_r[1],
        );
        let d2 = uav_xy.distance(&true_pos).powi(2) + params.altitude * params.altitude;
        let gain = params.rho_const / d2;
        signal.push(gain * a.dotc(&beamformers[k]).norm_sqr());
        let i: f64 = beamformers
            .iter()
            .enumerate()
            .filter(|(r, _)| *r != k)
            .map(|(_, w)| gain * a.dotc(w).norm_sqr())
            .sum();
        interference.push(i);
    }
    // The 1e-7 relative slack absorbs solver-tolerance-level shortfall of a
    // design whose constraints are tight at the requirement.
    let meets = |tau: f64| {
        (0..k_users).all(|k| {
            tau * signal[k]
                >= sinr_req[k] * (tau * interference[k] + params.noise_power[k]) * (1.0 - 1e-7)
        })
    };
    if meets(1.0) {
        return Ok(PowerScaling { tau: 1.0, outage: false });
    }
    if !meets(TAU_MAX) {
        return Ok(PowerScaling { tau: TAU_MAX, outage: true });
    }
    let (mut lo, mut hi) = (1.0f64, TAU_MAX);
    while (hi - lo) > 1e-8 * lo {
        let mid = 0.5 * (lo + hi);
        if meets(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(PowerScaling { tau: hi, outage: false })
}

/// Outcome of the non-robust two-stage design.
#[derive(Debug, Clone)]
pub enum NonRobustOutcome {
    Optimal {
        /// Stage-1 design that trusts the estimates exactly.
        nominal: AllocationSolution,
        /// Stage-2 scaling against the hidden truth.
        scaling: PowerScaling,
    },
    Infeasible(ConicSolveReport),
    NumericalFailure(ConicSolveReport),
}

impl NonRobustOutcome {
    /// Total transmit power in watts after scaling, when available.
    pub fn scaled_power(&self) -> Option<f64> {
        match self {
            NonRobustOutcome::Optimal { nominal, scaling } if !scaling.outage => {
                Some(scaling.tau * nominal.objective)
            }
            _ => None,
        }
    }
}

/// Two-stage non-robust design: solve with all uncertainty radii collapsed
/// to zero, then scale the whole beam set by a common τ until the realized
/// SINRs at the hidden truth meet the original targets.
pub fn solve_nonrobust(
    scenario: &Scenario,
    params: &SystemParams,
    assemble_opts: &AssembleOptions,
    solve_opts: &SolveOptions,
) -> Result<NonRobustOutcome> {
    let nominal_scenario = Scenario {
        uav_init: scenario.uav_init,
        users: scenario
            .users
            .iter()
            .map(|u| {
                let mut v = *u;
                v.uncertainty.aod.alpha = 0.0;
                v.uncertainty.loc.radius = 0.0;
                v
            })
            .collect(),
    };
    let (_, outcome) = solve_robust(&nominal_scenario, params, assemble_opts, solve_opts)?;
    let nominal = match outcome {
        SolveOutcome::Optimal(s) => s,
        SolveOutcome::Infeasible(r) => return Ok(NonRobustOutcome::Infeasible(r)),
        SolveOutcome::NumericalFailure(r) => return Ok(NonRobustOutcome::NumericalFailure(r)),
    };
    let scaling = scale_to_qos(
        &nominal.beamformers,
        &nominal.position,
        &scenario.uncertainties(),
        &scenario.truths(),
        params,
        &params.sinr_req,
    )?;
    Ok(NonRobustOutcome::Optimal { nominal, scaling })
}
