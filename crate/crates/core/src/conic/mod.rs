//! Assembly of the full robust design problem into one conic program, the
//! solve path, beamformer recovery, and dual-based optimality screening.
//!
//! Internal scaling keeps the interior-point iterates well conditioned:
//! beamforming covariances are expressed in microwatts, lengths in units of
//! the altitude z0 (so the altitude term in the distance bound is exactly 1),
//! and the per-user slack η is dimensionless. All public outputs are
//! converted back to watts and meters.

pub mod dump;
pub mod program;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::geometry::{taylor_terms, Position2D, SystemParams};
use crate::lmi::{
    build_c2a_lmi, build_c2b_lmi, C2aForm, HermitianVarMap, LmiBlock, MatrixField, MatrixVar,
    VarId,
};
use crate::uncertainty::{Scenario, UserUncertainty};
use program::{solve_cone_program, ConeProgram, ConicSolveReport, RawStatus, SolveOptions};

/// Internal power unit, watts. Chosen so optimal objective values for the
/// default link budget land near 1.
pub const POWER_UNIT_WATTS: f64 = 1e-6;

/// Principal-component ratio above which a recovered beamformer is flagged as
/// not numerically rank one.
pub const RANK_RATIO_WARN: f64 = 1e-5;

/// Knobs for problem assembly.
#[derive(Debug, Clone)]
pub struct AssembleOptions {
    pub c2a_form: C2aForm,
    /// Omit the per-antenna power cap rows.
    pub drop_c1: bool,
    /// Restrict each user's covariance to a fixed rank-one direction with a
    /// scalar power variable. Directions are normalized at assembly.
    pub fixed_directions: Option<Vec<DVector<Complex64>>>,
    /// Internal power unit, watts. [`solve_robust`] retunes it per instance.
    pub power_unit: f64,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        Self {
            c2a_form: C2aForm::default(),
            drop_c1: false,
            fixed_directions: None,
            power_unit: POWER_UNIT_WATTS,
        }
    }
}

#[derive(Debug, Clone)]
enum BeamLayout {
    Full(Vec<HermitianVarMap>),
    Fixed(Vec<(VarId, DVector<Complex64>)>),
}

/// Where each scalar decision variable lives in the flat vector.
#[derive(Debug, Clone)]
pub struct VarLayout {
    beams: BeamLayout,
    pub r0: [VarId; 2],
    pub eta: Vec<VarId>,
    pub t: Vec<VarId>,
    pub delta: Vec<Option<VarId>>,
    pub mu: Vec<Option<VarId>>,
    pub n_vars: usize,
}

/// Indices of the assembled blocks, for dual recovery and replay.
#[derive(Debug, Clone, Default)]
struct BlockIndex {
    c1: Option<Range<usize>>,
    c2a: Vec<usize>,
    c2b_main: Vec<usize>,
    c2b_epi: Vec<usize>,
    c3: Vec<usize>,
}

/// One assembled instance, ready to solve or serialize.
#[derive(Debug, Clone)]
pub struct RobustProblem {
    pub program: ConeProgram,
    pub layout: VarLayout,
    params: SystemParams,
    users: Vec<UserUncertainty>,
    a0: Vec<DVector<Complex64>>,
    a1: Vec<DVector<Complex64>>,
    /// Power-unit multiples represented by one unit of the dimensionless η_k.
    eta_scale: Vec<f64>,
    /// Watts per internal power unit.
    power_unit: f64,
    blocks: BlockIndex,
}

/// Solution in physical units.
#[derive(Debug, Clone)]
pub struct AllocationSolution {
    /// Per-user transmit covariances, watts.
    pub w_matrices: Vec<DMatrix<Complex64>>,
    /// Recovered rank-one beamformers, entries in √watt.
    pub beamformers: Vec<DVector<Complex64>>,
    /// Second-to-first eigenvalue ratio of each covariance.
    pub rank_ratios: Vec<f64>,
    /// Optimal hover position, meters.
    pub position: Position2D,
    /// Worst-case effective-power slack per user, watts.
    pub eta: Vec<f64>,
    /// Total transmit power, watts.
    pub objective: f64,
    pub slack_delta: Vec<Option<f64>>,
    pub slack_mu: Vec<Option<f64>>,
    /// Primal point in internal scaling, for constraint replay.
    pub x_scaled: Vec<f64>,
    pub report: ConicSolveReport,
}

impl AllocationSolution {
    pub fn rank_one_certified(&self) -> bool {
        self.rank_ratios.iter().all(|&r| r <= RANK_RATIO_WARN)
    }
}

/// Solve result with the infeasible and failed cases kept first class.
#[derive(Debug, Clone)]
pub enum SolveOutcome {
    Optimal(AllocationSolution),
    Infeasible(ConicSolveReport),
    NumericalFailure(ConicSolveReport),
}

impl SolveOutcome {
    pub fn optimal(&self) -> Option<&AllocationSolution> {
        match self {
            SolveOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }

    pub fn into_optimal(self) -> Result<AllocationSolution> {
        match self {
            SolveOutcome::Optimal(s) => Ok(s),
            SolveOutcome::Infeasible(r) => {
                Err(Error::Unsolved(format!("infeasible: {}", r.status_detail)))
            }
            SolveOutcome::NumericalFailure(r) => {
                Err(Error::SolverFailure(r.status_detail))
            }
        }
    }
}

/// Dual-based optimality screen of a solved instance.
#[derive(Debug, Clone)]
pub struct KktReport {
    /// Per-antenna cap multipliers.
    pub xi: Vec<f64>,
    /// Largest eigenvalue of each user's dual combination; 1 at a tight
    /// rank-one optimum.
    pub nu_max: Vec<f64>,
    /// ‖Y_k - (I - Δ_k)‖_F / (1 + ‖I - Δ_k‖_F) per user.
    pub stationarity_errors: Vec<f64>,
    /// ‖Y_k W_k‖ / ‖W_k‖ per user.
    pub complementarity: Vec<f64>,
    /// Most negative eigenvalue across all recovered dual matrices.
    pub min_dual_eig: f64,
}

/// Build the conic program for one scenario.
pub fn assemble(
    scenario: &Scenario,
    params: &SystemParams,
    options: &AssembleOptions,
) -> Result<RobustProblem> {
    let k_users = params.n_users;
    let nt = params.n_antennas;
    if scenario.users.len() != k_users {
        return Err(Error::DimensionMismatch { expected: k_users, got: scenario.users.len() });
    }
    let users = scenario.uncertainties();

    // Variable layout: beam scalars, position, then per-user slacks.
    let mut names: Vec<String> = Vec::new();
    let beams = match &options.fixed_directions {
        None => {
            let mut maps = Vec::with_capacity(k_users);
            for k in 0..k_users {
                let map = HermitianVarMap::new(nt, names.len());
                names.extend(map.var_names(&format!("W{k}")));
                maps.push(map);
            }
            BeamLayout::Full(maps)
        }
        Some(dirs) => {
            if dirs.len() != k_users {
                return Err(Error::DimensionMismatch { expected: k_users, got: dirs.len() });
            }
            let mut fixed = Vec::with_capacity(k_users);
            for (k, dir) in dirs.iter().enumerate() {
                if dir.len() != nt {
                    return Err(Error::DimensionMismatch { expected: nt, got: dir.len() });
                }
                let norm = dir.norm();
                if norm < 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "fixed direction {k} is numerically zero"
                    )));
                }
                let unit = dir / Complex64::new(norm, 0.0);
                fixed.push((names.len(), unit));
                names.push(format!("p{k}"));
            }
            BeamLayout::Fixed(fixed)
        }
    };
    let r0 = [names.len(), names.len() + 1];
    names.push("r0.x".into());
    names.push("r0.y".into());
    let eta: Vec<VarId> = (0..k_users)
        .map(|k| {
            names.push(format!("eta{k}"));
            names.len() - 1
        })
        .collect();
    let t: Vec<VarId> = (0..k_users)
        .map(|k| {
            names.push(format!("t{k}"));
            names.len() - 1
        })
        .collect();
    let delta: Vec<Option<VarId>> = (0..k_users)
        .map(|k| {
            (users[k].aod.alpha > 0.0).then(|| {
                names.push(format!("delta{k}"));
                names.len() - 1
            })
        })
        .collect();
    let mu: Vec<Option<VarId>> = (0..k_users)
        .map(|k| {
            (users[k].loc.radius > 0.0).then(|| {
                names.push(format!("mu{k}"));
                names.len() - 1
            })
        })
        .collect();

    let mut prog = ConeProgram::new(names);
    let layout =
        VarLayout { beams: beams.clone(), r0, eta: eta.clone(), t: t.clone(), delta: delta.clone(), mu: mu.clone(), n_vars: prog.n_vars };

    // Total transmit power, in microwatts.
    match &beams {
        BeamLayout::Full(maps) => {
            for map in maps {
                for d in map.diagonal_vars() {
                    prog.objective[d] = 1.0;
                }
            }
        }
        BeamLayout::Fixed(fixed) => {
            for (p, _) in fixed {
                prog.objective[*p] = 1.0;
            }
        }
    }

    let z0 = params.altitude;
    // The jitter interval is normalized to |u| ≤ 1 by folding α into the
    // Taylor column: a = ā + (α·a1)·u. This keeps the S-procedure
    // multiplier on the same scale as the covariance entries.
    let mut a0_all = Vec::with_capacity(k_users);
    let mut a1_all = Vec::with_capacity(k_users);
    for user in &users {
        let (a0, a1) = taylor_terms(user.aod.theta_bar, params);
        a0_all.push(a0.0);
        a1_all.push(a1 * Complex64::new(user.aod.alpha, 0.0));
    }
    // One η unit equals Γ_k σ_k² z0² / ϱ watts of effective received power.
    let p_unit = options.power_unit;
    if !(p_unit.is_finite() && p_unit > 0.0) {
        return Err(Error::InvalidParameter(format!("power unit must be positive, got {p_unit}")));
    }
    let eta_scale: Vec<f64> = (0..k_users)
        .map(|k| params.sinr_req[k] * params.noise_power[k] * z0 * z0
            / (params.rho_const * p_unit))
        .collect();

    let beam_mvs: Vec<MatrixVar> = match &beams {
        BeamLayout::Full(maps) => maps.iter().map(|m| m.as_matrix_var()).collect(),
        BeamLayout::Fixed(fixed) => {
            fixed.iter().map(|(p, d)| MatrixVar::rank_one(*p, d)).collect()
        }
    };

    let mut blocks = BlockIndex::default();

    if !options.drop_c1 {
        let start = prog.blocks.len();
        for n in 0..nt {
            // Normalized to a unit constant so inactive caps (often 1e5x the
            // objective in internal units) do not dominate the residual norms
            // the solver converges against.
            let coeff = p_unit / params.per_antenna_cap[n];
            let mut row = LmiBlock {
                label: format!("C1[{n}]"),
                dimension: 1,
                field: MatrixField::Real,
                constant: DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
                variable_maps: Vec::new(),
            };
            match &beams {
                BeamLayout::Full(maps) => {
                    for map in maps {
                        let d = map.diagonal_vars()[n];
                        row.variable_maps
                            .push((d, DMatrix::from_element(1, 1, Complex64::new(-coeff, 0.0))));
                    }
                }
                BeamLayout::Fixed(fixed) => {
                    for (p, dir) in fixed {
                        row.variable_maps.push((
                            *p,
                            DMatrix::from_element(
                                1,
                                1,
                                Complex64::new(-dir[n].norm_sqr() * coeff, 0.0),
                            ),
                        ));
                    }
                }
            }
            prog.push_block(row);
        }
        blocks.c1 = Some(start..start + nt);
    }

    for k in 0..k_users {
        let unit_alpha = if users[k].aod.alpha > 0.0 { 1.0 } else { 0.0 };
        let block = build_c2a_lmi(
            k,
            &beam_mvs,
            eta[k],
            delta[k],
            &a0_all[k],
            &a1_all[k],
            unit_alpha,
            params.sinr_req[k],
            eta_scale[k],
            options.c2a_form,
        )?;
        blocks.c2a.push(prog.blocks.len());
        prog.push_block(block);
    }

    for k in 0..k_users {
        let center = [users[k].loc.center.x / z0, users[k].loc.center.y / z0];
        let (main, epi) = build_c2b_lmi(
            k,
            r0,
            eta[k],
            mu[k],
            t[k],
            center,
            users[k].loc.radius / z0,
            1.0,
        )?;
        blocks.c2b_main.push(prog.blocks.len());
        prog.push_block(main);
        blocks.c2b_epi.push(prog.blocks.len());
        prog.push_block(epi);
    }

    for k in 0..k_users {
        blocks.c3.push(prog.blocks.len());
        match &beams {
            BeamLayout::Full(maps) => {
                prog.push_block(LmiBlock {
                    label: format!("C3[{k}]"),
                    dimension: nt,
                    field: MatrixField::Complex,
                    constant: DMatrix::zeros(nt, nt),
                    variable_maps: maps[k].as_matrix_var().entries,
                });
            }
            BeamLayout::Fixed(fixed) => {
                prog.push_block(LmiBlock {
                    label: format!("C3[{k}]"),
                    dimension: 1,
                    field: MatrixField::Real,
                    constant: DMatrix::zeros(1, 1),
                    variable_maps: vec![(
                        fixed[k].0,
                        DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
                    )],
                });
            }
        }
    }

    for (k, d) in delta.iter().enumerate() {
        if let Some(d) = d {
            prog.push_block(nonneg_row(format!("delta{k}>=0"), *d));
        }
    }
    for (k, m) in mu.iter().enumerate() {
        if let Some(m) = m {
            prog.push_block(nonneg_row(format!("mu{k}>=0"), *m));
        }
    }

    Ok(RobustProblem {
        program: prog,
        layout,
        params: params.clone(),
        users,
        a0: a0_all,
        a1: a1_all,
        eta_scale,
        power_unit: p_unit,
        blocks,
    })
}

/// Assemble and solve, retuning the internal power unit until the duality
/// gap clears five times the solve tolerance. The interior point stalls at an
/// instance-dependent accuracy floor that moves with the problem scaling, so
/// re-solving with the unit retuned near a tenth of the first-pass objective
/// (and a few multiples of that) reliably lands one pass under the target.
/// The best pass by duality gap is returned.
pub fn solve_robust(
    scenario: &Scenario,
    params: &SystemParams,
    assemble_opts: &AssembleOptions,
    solve_opts: &SolveOptions,
) -> Result<(RobustProblem, SolveOutcome)> {
    let gap_target = 5.0 * solve_opts.tolerance;
    let first = assemble(scenario, params, assemble_opts)?;
    let first_out = first.solve(solve_opts)?;
    let obj_watts = match &first_out {
        SolveOutcome::Optimal(s) => s.objective,
        SolveOutcome::NumericalFailure(r) if r.primal_objective > 0.0 => {
            r.primal_objective * assemble_opts.power_unit
        }
        _ => return Ok((first, first_out)),
    };
    if !obj_watts.is_finite() || obj_watts <= 0.0 {
        return Ok((first, first_out));
    }

    let mut tried = vec![assemble_opts.power_unit];
    let mut best = match first_out {
        SolveOutcome::Optimal(s) => {
            if s.report.duality_gap_rel() <= gap_target {
                return Ok((first, SolveOutcome::Optimal(s)));
            }
            Some((first, s))
        }
        _ => None,
    };
    for mult in [1.0, 0.3, 3.0, 0.1, 10.0, 0.03, 30.0, 0.01] {
        let unit = obj_watts / 10.0 * mult;
        if tried.iter().any(|&u| (unit / u).ln().abs() < 0.1) {
            continue;
        }
        tried.push(unit);
        let retuned = AssembleOptions { power_unit: unit, ..assemble_opts.clone() };
        let prob = assemble(scenario, params, &retuned)?;
        if let SolveOutcome::Optimal(s) = prob.solve(solve_opts)? {
            let gap = s.report.duality_gap_rel();
            if best.as_ref().map_or(true, |(_, b)| gap < b.report.duality_gap_rel()) {
                best = Some((prob, s));
            }
            if gap <= gap_target {
                break;
            }
        }
    }
    match best {
        Some((prob, sol)) => Ok((prob, SolveOutcome::Optimal(sol))),
        // Every pass failed; re-solve at the initial unit to report honestly.
        None => {
            let prob = assemble(scenario, params, assemble_opts)?;
            let out = prob.solve(solve_opts)?;
            Ok((prob, out))
        }
    }
}

fn nonneg_row(label: String, var: VarId) -> LmiBlock {
    LmiBlock {
        label,
        dimension: 1,
        field: MatrixField::Real,
        constant: DMatrix::zeros(1, 1),
        variable_maps: vec![(var, DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)))],
    }
}

/// Principal eigenpair extraction: w = √λ₁·v₁ with the first significant
/// entry rotated to the nonnegative real axis. Returns (w, λ₂/λ₁).
pub fn principal_beamformer(w: &DMatrix<Complex64>) -> (DVector<Complex64>, f64) {
    let n = w.nrows();
    let eig = w.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lam1 = eig.eigenvalues[order[0]];
    if lam1 <= 0.0 {
        return (DVector::zeros(n), 0.0);
    }
    let lam2 = if n > 1 { eig.eigenvalues[order[1]].max(0.0) } else { 0.0 };
    let mut v = eig.eigenvectors.column(order[0]).into_owned() * Complex64::new(lam1.sqrt(), 0.0);
    let norm = v.norm();
    if let Some(e) = v.iter().find(|e| e.norm() > 1e-12 * norm).copied() {
        let phase = e / Complex64::new(e.norm(), 0.0);
        v *= phase.conj();
    }
    (v, lam2 / lam1)
}

impl RobustProblem {
    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn users(&self) -> &[UserUncertainty] {
        &self.users
    }

    pub fn solve(&self, opts: &SolveOptions) -> Result<SolveOutcome> {
        let report = solve_cone_program(&self.program, opts)?;
        Ok(match report.status {
            RawStatus::Optimal => SolveOutcome::Optimal(self.interpret(report)),
            RawStatus::Infeasible => SolveOutcome::Infeasible(report),
            RawStatus::NumericalFailure => SolveOutcome::NumericalFailure(report),
        })
    }

    /// Worst constraint violation of a scaled primal point, as a positive
    /// eigenvalue deficit (0 when everything holds).
    pub fn max_violation(&self, x_scaled: &[f64]) -> f64 {
        program::max_block_violation(&self.program, x_scaled)
    }

    fn interpret(&self, report: ConicSolveReport) -> AllocationSolution {
        let x = &report.x;
        let z0 = self.params.altitude;
        let w_matrices: Vec<DMatrix<Complex64>> = match &self.layout.beams {
            BeamLayout::Full(maps) => maps
                .iter()
                .map(|m| m.value(x) * Complex64::new(self.power_unit, 0.0))
                .collect(),
            BeamLayout::Fixed(fixed) => fixed
                .iter()
                .map(|(p, d)| {
                    (d * d.adjoint()) * Complex64::new(x[*p].max(0.0) * self.power_unit, 0.0)
                })
                .collect(),
        };
        let mut beamformers = Vec::with_capacity(w_matrices.len());
        let mut rank_ratios = Vec::with_capacity(w_matrices.len());
        for w in &w_matrices {
            let (v, ratio) = principal_beamformer(w);
            beamformers.push(v);
            rank_ratios.push(ratio);
        }
        let position = Position2D::new(x[self.layout.r0[0]] * z0, x[self.layout.r0[1]] * z0);
        let eta = self
            .layout
            .eta
            .iter()
            .zip(&self.eta_scale)
            .map(|(&v, &s)| x[v] * s * self.power_unit)
            .collect();
        let slack_delta = self
            .layout
            .delta
            .iter()
            .map(|d| d.map(|v| x[v] * self.power_unit))
            .collect();
        let slack_mu = self.layout.mu.iter().map(|m| m.map(|v| x[v])).collect();
        let objective = report.primal_objective * self.power_unit;
        AllocationSolution {
            w_matrices,
            beamformers,
            rank_ratios,
            position,
            eta,
            objective,
            slack_delta,
            slack_mu,
            x_scaled: report.x.clone(),
            report,
        }
    }

    /// Reconstruct the structured dual quantities and check the optimality
    /// system: Y_k = I - Δ_k with Δ_k built from the SINR-constraint duals
    /// and the cap multipliers, Y_k ⪰ 0 complementary to W_k, and the
    /// largest eigenvalue of Δ_k equal to 1 at a tight rank-one optimum.
    pub fn kkt_diagnostics(&self, report: &ConicSolveReport) -> Result<KktReport> {
        let maps = match &self.layout.beams {
            BeamLayout::Full(maps) => maps,
            BeamLayout::Fixed(_) => {
                return Err(Error::CapabilityMissing(
                    "dual screening requires full matrix variables".into(),
                ))
            }
        };
        let nt = self.params.n_antennas;
        let k_users = self.params.n_users;

        let mut xi = vec![0.0; nt];
        let mut cap_dual = DMatrix::<Complex64>::zeros(nt, nt);
        if let Some(range) = &self.blocks.c1 {
            for (n, b) in range.clone().enumerate() {
                // Undo the unit-constant row normalization of the cap block.
                xi[n] = report.block_duals[b][(0, 0)].re * self.power_unit
                    / self.params.per_antenna_cap[n];
                cap_dual[(n, n)] = Complex64::new(xi[n], 0.0);
            }
        }

        // U_k T_k U_kᴴ per user, with U_k = [a1 ā] (or [ā] when α = 0).
        let outer: Vec<DMatrix<Complex64>> = (0..k_users)
            .map(|k| {
                let t_mat = &report.block_duals[self.blocks.c2a[k]];
                let u = if self.users[k].aod.alpha > 0.0 {
                    DMatrix::from_columns(&[self.a1[k].clone(), self.a0[k].clone()])
                } else {
                    DMatrix::from_columns(&[self.a0[k].clone()])
                };
                &u * t_mat * u.adjoint()
            })
            .collect();

        let eye = DMatrix::<Complex64>::identity(nt, nt);
        let mut nu_max = Vec::with_capacity(k_users);
        let mut stationarity_errors = Vec::with_capacity(k_users);
        let mut complementarity = Vec::with_capacity(k_users);
        let mut min_dual_eig = xi.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        for k in 0..k_users {
            let mut delta = outer[k].clone();
            for r in 0..k_users {
                if r != k {
                    delta -= &outer[r] * Complex64::new(self.params.sinr_req[r], 0.0);
                }
            }
            delta -= &cap_dual;
            let y = &report.block_duals[self.blocks.c3[k]];
            let target = &eye - &delta;
            stationarity_errors.push((y - &target).norm() / (1.0 + target.norm()));
            let eigs = delta.clone().symmetric_eigenvalues();
            nu_max.push(eigs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)));
            let w_scaled = maps[k].value(&report.x);
            let wn = w_scaled.norm().max(1e-30);
            complementarity.push((y * &w_scaled).norm() / wn);
            min_dual_eig = min_dual_eig
                .min(crate::lmi::min_eig_hermitian(y))
                .min(crate::lmi::min_eig_hermitian(&report.block_duals[self.blocks.c2a[k]]));
        }

        Ok(KktReport { xi, nu_max, stationarity_errors, complementarity, min_dual_eig })
    }
}
