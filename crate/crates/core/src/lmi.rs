//! Finite LMI reformulations of the semi-infinite worst-case SINR constraint:
//! an S-procedure block over the AoD interval (C2a) and one over the location
//! disk (C2b), plus the epigraph block that keeps the position-dependent
//! quadratic affine.
//!
//! Everything here is unit-agnostic; the caller picks the scaling of the
//! beamforming variables, of the slack η, and of lengths.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Index of one real scalar decision variable.
pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixField {
    Real,
    Complex,
}

/// Which C2a block form to emit. The perturbation Δθ is real, so the real
/// 2x2 form with Re{a1ᴴMā} off-diagonal is the exact S-procedure; the
/// Hermitian form keeps the printed complex off-diagonal and is slightly
/// conservative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum C2aForm {
    #[default]
    Real,
    Hermitian,
}

/// An affine-in-variables PSD constraint: constant + Σ x_i · coeff_i ⪰ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    pub label: String,
    pub dimension: usize,
    pub field: MatrixField,
    pub constant: DMatrix<Complex64>,
    pub variable_maps: Vec<(VarId, DMatrix<Complex64>)>,
}

impl LmiBlock {
    fn new(label: impl Into<String>, dimension: usize, field: MatrixField) -> Self {
        Self {
            label: label.into(),
            dimension,
            field,
            constant: DMatrix::zeros(dimension, dimension),
            variable_maps: Vec::new(),
        }
    }

    fn push(&mut self, var: VarId, coeff: DMatrix<Complex64>) {
        debug_assert_eq!(coeff.nrows(), self.dimension);
        // Merge duplicate variable ids so the map stays one entry per var.
        if let Some((_, m)) = self.variable_maps.iter_mut().find(|(v, _)| *v == var) {
            *m += coeff;
        } else {
            self.variable_maps.push((var, coeff));
        }
    }

    /// Block value at a full variable assignment.
    pub fn evaluate(&self, x: &[f64]) -> DMatrix<Complex64> {
        let mut m = self.constant.clone();
        for (var, coeff) in &self.variable_maps {
            m += coeff * Complex64::new(x[*var], 0.0);
        }
        m
    }

    /// Minimum eigenvalue of the block at an assignment.
    pub fn min_eigenvalue(&self, x: &[f64]) -> f64 {
        let m = self.evaluate(x);
        min_eig_hermitian(&m)
    }
}

/// Minimum eigenvalue of a Hermitian matrix.
pub fn min_eig_hermitian(m: &DMatrix<Complex64>) -> f64 {
    let eig = m.clone().symmetric_eigenvalues();
    eig.iter().fold(f64::INFINITY, |a, &b| a.min(b))
}

/// A Hermitian matrix expressed as an affine combination of scalar decision
/// variables: W(x) = Σ x_i · B_i with Hermitian bases B_i.
#[derive(Debug, Clone)]
pub struct MatrixVar {
    pub dim: usize,
    pub entries: Vec<(VarId, DMatrix<Complex64>)>,
}

impl MatrixVar {
    /// Fixed-direction rank-one model W(x) = p · w̃w̃ᴴ with one power var.
    pub fn rank_one(power_var: VarId, direction: &DVector<Complex64>) -> Self {
        let outer = direction * direction.adjoint();
        Self { dim: direction.len(), entries: vec![(power_var, outer)] }
    }

    pub fn value(&self, x: &[f64]) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (var, b) in &self.entries {
            m += b * Complex64::new(x[*var], 0.0);
        }
        m
    }
}

/// Full Hermitian matrix variable: dim² real scalars laid out column-major
/// over the upper triangle, diagonal entries first within each column, each
/// off-diagonal as a (re, im) pair.
#[derive(Debug, Clone, Copy)]
pub struct HermitianVarMap {
    pub dim: usize,
    pub base: VarId,
}

impl HermitianVarMap {
    pub fn new(dim: usize, base: VarId) -> Self {
        Self { dim, base }
    }

    pub fn var_count(&self) -> usize {
        self.dim * self.dim
    }

    /// Ids of the real diagonal entries (the trace terms).
    pub fn diagonal_vars(&self) -> Vec<VarId> {
        let mut out = Vec::with_capacity(self.dim);
        let mut idx = self.base;
        for n in 0..self.dim {
            for m in 0..=n {
                if m == n {
                    out.push(idx);
                    idx += 1;
                } else {
                    idx += 2;
                }
            }
        }
        out
    }

    /// Human-readable names for the scalar variables, for problem dumps.
    pub fn var_names(&self, matrix_name: &str) -> Vec<String> {
        let mut out = Vec::with_capacity(self.var_count());
        for n in 0..self.dim {
            for m in 0..=n {
                if m == n {
                    out.push(format!("{matrix_name}[{m},{n}]"));
                } else {
                    out.push(format!("{matrix_name}[{m},{n}].re"));
                    out.push(format!("{matrix_name}[{m},{n}].im"));
                }
            }
        }
        out
    }

    pub fn as_matrix_var(&self) -> MatrixVar {
        let d = self.dim;
        let mut entries = Vec::with_capacity(self.var_count());
        let mut idx = self.base;
        for n in 0..d {
            for m in 0..=n {
                if m == n {
                    let mut b = DMatrix::zeros(d, d);
                    b[(m, m)] = Complex64::new(1.0, 0.0);
                    entries.push((idx, b));
                    idx += 1;
                } else {
                    let mut re = DMatrix::zeros(d, d);
                    re[(m, n)] = Complex64::new(1.0, 0.0);
                    re[(n, m)] = Complex64::new(1.0, 0.0);
                    entries.push((idx, re));
                    idx += 1;
                    let mut im = DMatrix::zeros(d, d);
                    im[(m, n)] = Complex64::new(0.0, 1.0);
                    im[(n, m)] = Complex64::new(0.0, -1.0);
                    entries.push((idx, im));
                    idx += 1;
                }
            }
        }
        MatrixVar { dim: d, entries }
    }

    /// Reassemble the Hermitian matrix from a flat assignment.
    pub fn value(&self, x: &[f64]) -> DMatrix<Complex64> {
        self.as_matrix_var().value(x)
    }
}

/// Quadratic forms of one Hermitian basis matrix against (a1, ā).
struct BasisForms {
    q11: f64,        // a1ᴴ B a1
    q22: f64,        // āᴴ B ā
    q12: Complex64,  // a1ᴴ B ā
}

fn basis_forms(b: &DMatrix<Complex64>, a1: &DVector<Complex64>, a0: &DVector<Complex64>) -> BasisForms {
    let ba1 = b * a1;
    let ba0 = b * a0;
    BasisForms {
        q11: a1.dotc(&ba1).re,
        q22: a0.dotc(&ba0).re,
        q12: a1.dotc(&ba0),
    }
}

/// S-procedure block for the AoD interval constraint of user `k`:
///
///   aᴴ(W_k - Γ Σ_{r≠k} W_r)a ≥ η  for all a = ā + a1·Δθ, |Δθ| ≤ α,
///
/// as the 2x2 LMI [[δ, 0], [0, -δα² - η]] + Uᴴ(W_k - ΓΣW_r)U ⪰ 0 with
/// U = [a1 ā]. `eta_scale` converts the η variable into the power units of
/// the beamforming variables. With α = 0 the S-procedure has no strictly
/// feasible point; the direct scalar constraint at Δθ = 0 is emitted instead
/// (dimension-1 block) and `delta` must be `None`.
#[allow(clippy::too_many_arguments)]
pub fn build_c2a_lmi(
    k: usize,
    beam_vars: &[MatrixVar],
    eta: VarId,
    delta: Option<VarId>,
    a0: &DVector<Complex64>,
    a1: &DVector<Complex64>,
    alpha: f64,
    gamma_req: f64,
    eta_scale: f64,
    form: C2aForm,
) -> Result<LmiBlock> {
    if a0.len() != a1.len() {
        return Err(Error::DimensionMismatch { expected: a0.len(), got: a1.len() });
    }
    for mv in beam_vars {
        if mv.dim != a0.len() {
            return Err(Error::DimensionMismatch { expected: a0.len(), got: mv.dim });
        }
    }
    if !(gamma_req > 0.0) {
        return Err(Error::InvalidParameter("gamma_req must be positive".into()));
    }

    if alpha == 0.0 {
        if delta.is_some() {
            return Err(Error::InvalidParameter("delta multiplier is unused when alpha = 0".into()));
        }
        // āᴴ(W_k - ΓΣW_r)ā - η ≥ 0.
        let mut block = LmiBlock::new(format!("C2a[{k}]"), 1, MatrixField::Real);
        for (r, mv) in beam_vars.iter().enumerate() {
            let sign = if r == k { 1.0 } else { -gamma_req };
            for (var, b) in &mv.entries {
                let f = basis_forms(b, a1, a0);
                block.push(*var, DMatrix::from_element(1, 1, Complex64::new(sign * f.q22, 0.0)));
            }
        }
        block.push(eta, DMatrix::from_element(1, 1, Complex64::new(-eta_scale, 0.0)));
        return Ok(block);
    }

    let delta = delta.ok_or_else(|| {
        Error::InvalidParameter("delta multiplier required when alpha > 0".into())
    })?;
    let field = match form {
        C2aForm::Real => MatrixField::Real,
        C2aForm::Hermitian => MatrixField::Complex,
    };
    let mut block = LmiBlock::new(format!("C2a[{k}]"), 2, field);
    // Multiplier part: [[δ, 0], [0, -δα² - η]].
    let mut dm = DMatrix::zeros(2, 2);
    dm[(0, 0)] = Complex64::new(1.0, 0.0);
    dm[(1, 1)] = Complex64::new(-alpha * alpha, 0.0);
    block.push(delta, dm);
    let mut em = DMatrix::zeros(2, 2);
    em[(1, 1)] = Complex64::new(-eta_scale, 0.0);
    block.push(eta, em);
    // Uᴴ X U part, affine in the beamforming scalars.
    for (r, mv) in beam_vars.iter().enumerate() {
        let sign = if r == k { 1.0 } else { -gamma_req };
        for (var, b) in &mv.entries {
            let f = basis_forms(b, a1, a0);
            let off = match form {
                C2aForm::Real => Complex64::new(f.q12.re, 0.0),
                C2aForm::Hermitian => f.q12,
            };
            let mut m = DMatrix::zeros(2, 2);
            m[(0, 0)] = Complex64::new(f.q11, 0.0);
            m[(1, 1)] = Complex64::new(f.q22, 0.0);
            m[(0, 1)] = off;
            m[(1, 0)] = off.conj();
            block.push(*var, m * Complex64::new(sign, 0.0));
        }
    }
    Ok(block)
}

/// S-procedure block for the location-disk constraint of user `k` plus the
/// epigraph block tying t to ‖r'_0 - r̄'_k‖².
///
/// Main block (3x3 real, with t replacing the non-affine squared norm):
///   [[(μ-1)I₂, r'_0 - r̄'_k], [(r'_0 - r̄'_k)ᵀ, -μD² - t - z0² + η]] ⪰ 0,
/// companion (Schur form of t ≥ ‖r'_0 - r̄'_k‖²):
///   [[I₂, r'_0 - r̄'_k], [(r'_0 - r̄'_k)ᵀ, t]] ⪰ 0.
///
/// All lengths must share one unit; `z0_sq` is the squared altitude in that
/// unit and η enters already scaled to squared length. With D = 0 the main
/// block degenerates to the scalar row η - t - z0² ≥ 0 and `mu` must be
/// `None`.
#[allow(clippy::too_many_arguments)]
pub fn build_c2b_lmi(
    k: usize,
    r0_vars: [VarId; 2],
    eta: VarId,
    mu: Option<VarId>,
    t: VarId,
    center: [f64; 2],
    d_radius: f64,
    z0_sq: f64,
) -> Result<(LmiBlock, LmiBlock)> {
    // Epigraph block is the same in both cases.
    let mut epi = LmiBlock::new(format!("C2b-epi[{k}]"), 3, MatrixField::Real);
    let mut c = DMatrix::zeros(3, 3);
    c[(0, 0)] = Complex64::new(1.0, 0.0);
    c[(1, 1)] = Complex64::new(1.0, 0.0);
    c[(0, 2)] = Complex64::new(-center[0], 0.0);
    c[(2, 0)] = Complex64::new(-center[0], 0.0);
    c[(1, 2)] = Complex64::new(-center[1], 0.0);
    c[(2, 1)] = Complex64::new(-center[1], 0.0);
    epi.constant = c;
    for (i, var) in r0_vars.iter().enumerate() {
        let mut m = DMatrix::zeros(3, 3);
        m[(i, 2)] = Complex64::new(1.0, 0.0);
        m[(2, i)] = Complex64::new(1.0, 0.0);
        epi.push(*var, m);
    }
    let mut tm = DMatrix::zeros(3, 3);
    tm[(2, 2)] = Complex64::new(1.0, 0.0);
    epi.push(t, tm);

    if d_radius == 0.0 {
        if mu.is_some() {
            return Err(Error::InvalidParameter("mu multiplier is unused when D = 0".into()));
        }
        let mut row = LmiBlock::new(format!("C2b[{k}]"), 1, MatrixField::Real);
        row.constant = DMatrix::from_element(1, 1, Complex64::new(-z0_sq, 0.0));
        row.push(eta, DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)));
        row.push(t, DMatrix::from_element(1, 1, Complex64::new(-1.0, 0.0)));
        return Ok((row, epi));
    }

    let mu = mu.ok_or_else(|| {
        Error::InvalidParameter("mu multiplier required when D > 0".into())
    })?;
    let mut main = LmiBlock::new(format!("C2b[{k}]"), 3, MatrixField::Real);
    let mut c = DMatrix::zeros(3, 3);
    c[(0, 0)] = Complex64::new(-1.0, 0.0);
    c[(1, 1)] = Complex64::new(-1.0, 0.0);
    c[(0, 2)] = Complex64::new(-center[0], 0.0);
    c[(2, 0)] = Complex64::new(-center[0], 0.0);
    c[(1, 2)] = Complex64::new(-center[1], 0.0);
    c[(2, 1)] = Complex64::new(-center[1], 0.0);
    c[(2, 2)] = Complex64::new(-z0_sq, 0.0);
    main.constant = c;
    let mut mm = DMatrix::zeros(3, 3);
    mm[(0, 0)] = Complex64::new(1.0, 0.0);
    mm[(1, 1)] = Complex64::new(1.0, 0.0);
    mm[(2, 2)] = Complex64::new(-d_radius * d_radius, 0.0);
    main.push(mu, mm);
    for (i, var) in r0_vars.iter().enumerate() {
        let mut m = DMatrix::zeros(3, 3);
        m[(i, 2)] = Complex64::new(1.0, 0.0);
        m[(2, i)] = Complex64::new(1.0, 0.0);
        main.push(*var, m);
    }
    let mut em = DMatrix::zeros(3, 3);
    em[(2, 2)] = Complex64::new(1.0, 0.0);
    main.push(eta, em);
    let mut tm = DMatrix::zeros(3, 3);
    tm[(2, 2)] = Complex64::new(-1.0, 0.0);
    main.push(t, tm);
    Ok((main, epi))
}

/// Outcome of checking one S-procedure block against the quadratic family it
/// is meant to certify.
#[derive(Debug, Clone)]
pub struct SProcReport {
    pub label: String,
    /// Minimum eigenvalue of the LMI at the assignment.
    pub lmi_min_eig: f64,
    pub lmi_feasible: bool,
    /// Most negative sampled quadratic value (0 when no sample is negative).
    pub worst_violation: f64,
    /// Sample index of the worst violation, when one exists.
    pub violating_sample: Option<usize>,
}

impl SProcReport {
    /// Clean when LMI feasibility is not contradicted by any sample. An
    /// infeasible LMI with sampled violations is still clean: the block
    /// correctly rejected the assignment.
    pub fn clean(&self) -> bool {
        !self.lmi_feasible || self.violating_sample.is_none()
    }
}

/// Check (a) the LMI's minimum eigenvalue at an assignment and (b) the
/// implied quadratic inequality on a dense sample of the uncertainty set.
/// `quad_at_sample(i)` must return the value of the certified quadratic at
/// the i-th of `n_samples` points; values below `-tol` count as violations.
pub fn verify_s_procedure<F: Fn(usize) -> f64>(
    block: &LmiBlock,
    x: &[f64],
    n_samples: usize,
    quad_at_sample: F,
) -> SProcReport {
    let tol = 1e-9;
    let min_eig = block.min_eigenvalue(x);
    let lmi_feasible = min_eig >= -tol;
    let mut worst = 0.0f64;
    let mut worst_idx = None;
    for i in 0..n_samples {
        let q = quad_at_sample(i);
        if q < -tol && q < worst {
            worst = q;
            worst_idx = Some(i);
        }
    }
    SProcReport {
        label: block.label.clone(),
        lmi_min_eig: min_eig,
        lmi_feasible,
        worst_violation: worst,
        violating_sample: worst_idx,
    }
}

/// The C2a quadratic q(Δθ) = aᴴ X a - η with a = ā + a1·Δθ, for replaying
/// the S-procedure implication on samples.
pub fn c2a_quadratic_value(
    x_matrix: &DMatrix<Complex64>,
    a0: &DVector<Complex64>,
    a1: &DVector<Complex64>,
    eta: f64,
    delta_theta: f64,
) -> f64 {
    let a = a0 + a1 * Complex64::new(delta_theta, 0.0);
    let xa = x_matrix * &a;
    a.dotc(&xa).re - eta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{taylor_terms, SystemParams};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_hermitian(rng: &mut impl Rng, n: usize) -> DMatrix<Complex64> {
        let m = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
    }

    /// One full Hermitian variable per user, plus trailing scalar slots.
    struct Setup {
        maps: Vec<HermitianVarMap>,
        beam_vars: Vec<MatrixVar>,
        eta: VarId,
        delta: VarId,
        n_vars: usize,
    }

    fn setup(n_users: usize, dim: usize) -> Setup {
        let mut base = 0;
        let maps: Vec<HermitianVarMap> = (0..n_users)
            .map(|_| {
                let m = HermitianVarMap::new(dim, base);
                base += m.var_count();
                m
            })
            .collect();
        let beam_vars = maps.iter().map(|m| m.as_matrix_var()).collect();
        let eta = base;
        let delta = base + 1;
        Setup { maps, beam_vars, eta, delta, n_vars: base + 2 }
    }

    /// Write a Hermitian matrix into the flat assignment through its map.
    fn assign(map: &HermitianVarMap, w: &DMatrix<Complex64>, x: &mut [f64]) {
        let mut idx = map.base;
        for n in 0..map.dim {
            for m in 0..=n {
                if m == n {
                    x[idx] = w[(m, m)].re;
                    idx += 1;
                } else {
                    x[idx] = w[(m, n)].re;
                    idx += 1;
                    x[idx] = w[(m, n)].im;
                    idx += 1;
                }
            }
        }
    }

    #[test]
    fn hermitian_map_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let map = HermitianVarMap::new(4, 0);
        let w = random_hermitian(&mut rng, 4);
        let mut x = vec![0.0; map.var_count()];
        assign(&map, &w, &mut x);
        let back = map.value(&x);
        assert!((&back - &w).norm() < 1e-12);
        assert_eq!(map.diagonal_vars().len(), 4);
        for d in map.diagonal_vars() {
            assert!(d < map.var_count());
        }
    }

    #[test]
    fn c2a_block_matches_direct_quadratic_forms() {
        let params = SystemParams::defaults(4, 2);
        let (a0, a1) = taylor_terms(1.1, &params);
        let s = setup(2, 4);
        let gamma = 10.0;
        let alpha = 0.05;
        let block = build_c2a_lmi(0, &s.beam_vars, s.eta, Some(s.delta), &a0.0, &a1, alpha, gamma, 1.0, C2aForm::Real)
            .unwrap();
        assert_eq!(block.dimension, 2);
        assert_eq!(block.field, MatrixField::Real);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w0 = random_hermitian(&mut rng, 4);
        let w1 = random_hermitian(&mut rng, 4);
        let mut x = vec![0.0; s.n_vars];
        assign(&s.maps[0], &w0, &mut x);
        assign(&s.maps[1], &w1, &mut x);
        x[s.eta] = 0.3;
        x[s.delta] = 0.7;
        let m = block.evaluate(&x);
        let xm = &w0 - &w1 * Complex64::new(gamma, 0.0);
        let m11 = a1.dotc(&(&xm * &a1)).re + 0.7;
        let m22 = a0.0.dotc(&(&xm * &a0.0)).re - 0.7 * alpha * alpha - 0.3;
        let m12 = a1.dotc(&(&xm * &a0.0)).re;
        assert_relative_eq!(m[(0, 0)].re, m11, max_relative = 1e-10);
        assert_relative_eq!(m[(1, 1)].re, m22, max_relative = 1e-10);
        assert_relative_eq!(m[(0, 1)].re, m12, max_relative = 1e-10);
        assert!(m[(0, 1)].im.abs() < 1e-14);
    }

    #[test]
    fn c2a_degenerate_alpha_zero() {
        let params = SystemParams::defaults(3, 1);
        let (a0, a1) = taylor_terms(1.3, &params);
        let map = HermitianVarMap::new(3, 0);
        let beam_vars = vec![map.as_matrix_var()];
        let eta = map.var_count();
        let block = build_c2a_lmi(0, &beam_vars, eta, None, &a0.0, &a1, 0.0, 5.0, 1.0, C2aForm::Real).unwrap();
        assert_eq!(block.dimension, 1);
        // Feasibility of the scalar row is exactly āᴴWā ≥ η.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = random_hermitian(&mut rng, 3);
        let mut x = vec![0.0; eta + 1];
        assign(&map, &w, &mut x);
        let quad = a0.0.dotc(&(&w * &a0.0)).re;
        x[eta] = quad - 0.1;
        assert!(block.min_eigenvalue(&x) >= 0.0999);
        x[eta] = quad + 0.1;
        assert!(block.min_eigenvalue(&x) <= -0.0999);
        // Passing a delta var with alpha = 0 is rejected.
        assert!(build_c2a_lmi(0, &beam_vars, eta, Some(eta), &a0.0, &a1, 0.0, 5.0, 1.0, C2aForm::Real).is_err());
    }

    #[test]
    fn c2a_endfire_block_diagonalizes() {
        // θ̄ = 0 makes a1 vanish, so the block is diag(δ, M22 - δα² - η).
        let params = SystemParams::defaults(3, 1);
        let (a0, a1) = taylor_terms(0.0, &params);
        assert!(a1.norm() < 1e-14);
        let s = setup(1, 3);
        let block = build_c2a_lmi(0, &s.beam_vars, s.eta, Some(s.delta), &a0.0, &a1, 0.1, 2.0, 1.0, C2aForm::Real)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = random_hermitian(&mut rng, 3);
        let mut x = vec![0.0; s.n_vars];
        assign(&s.maps[0], &w, &mut x);
        x[s.eta] = -1.0;
        x[s.delta] = 0.5;
        let m = block.evaluate(&x);
        assert!(m[(0, 1)].norm() < 1e-14);
        assert_relative_eq!(m[(0, 0)].re, 0.5, max_relative = 1e-12);
        // Optimal multiplier for the decoupled case is δ = 0.
        x[s.delta] = 0.0;
        let quad = a0.0.dotc(&(&w * &a0.0)).re;
        let feasible = block.min_eigenvalue(&x) >= -1e-9;
        assert_eq!(feasible, quad - x[s.eta] >= -1e-9);
    }

    #[test]
    fn c2a_feasibility_implies_sampled_quadratic() {
        // Lemma soundness: whenever the LMI holds at an assignment, the
        // underlying quadratic holds on 201 samples of [-α, α].
        let params = SystemParams::defaults(4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut feasible_seen = 0;
        for trial in 0..200 {
            let theta = rng.gen_range(0.3..PI - 0.3);
            let alpha = rng.gen_range(0.01..0.2);
            let (a0, a1) = taylor_terms(theta, &params);
            let s = setup(2, 4);
            let gamma = rng.gen_range(1.0..20.0);
            let block = build_c2a_lmi(0, &s.beam_vars, s.eta, Some(s.delta), &a0.0, &a1, alpha, gamma, 1.0, C2aForm::Real)
                .unwrap();
            let w0 = random_hermitian(&mut rng, 4);
            let w1 = random_hermitian(&mut rng, 4);
            let mut x = vec![0.0; s.n_vars];
            assign(&s.maps[0], &w0, &mut x);
            assign(&s.maps[1], &w1, &mut x);
            x[s.eta] = rng.gen_range(-3.0..3.0);
            x[s.delta] = rng.gen_range(0.0..3.0);
            let xm = &w0 - &w1 * Complex64::new(gamma, 0.0);
            let report = verify_s_procedure(&block, &x, 201, |i| {
                let dt = -alpha + 2.0 * alpha * i as f64 / 200.0;
                c2a_quadratic_value(&xm, &a0.0, &a1, x[s.eta], dt)
            });
            assert!(report.clean(), "trial {trial}: {report:?}");
            if report.lmi_feasible {
                feasible_seen += 1;
            }
        }
        assert!(feasible_seen > 0, "test exercised no feasible assignment");
    }

    #[test]
    fn c2a_converse_exactness_real_form() {
        // If the quadratic holds on the whole interval, some δ ≥ 0 makes the
        // real-form LMI feasible. Found by 1-D search.
        let params = SystemParams::defaults(4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut checked = 0;
        for _ in 0..100 {
            let theta = rng.gen_range(0.3..PI - 0.3);
            let alpha = rng.gen_range(0.02..0.2);
            let (a0, a1) = taylor_terms(theta, &params);
            let map = HermitianVarMap::new(4, 0);
            let beam_vars = vec![map.as_matrix_var()];
            let eta = map.var_count();
            let delta = eta + 1;
            let w = random_hermitian(&mut rng, 4);
            // Set η slightly below the interval minimum of the quadratic so
            // the hypothesis of the converse direction holds strictly.
            let min_q = (0..2001)
                .map(|i| {
                    let dt = -alpha + 2.0 * alpha * i as f64 / 2000.0;
                    c2a_quadratic_value(&w, &a0.0, &a1, 0.0, dt)
                })
                .fold(f64::INFINITY, f64::min);
            let mut x = vec![0.0; delta + 1];
            assign(&map, &w, &mut x);
            x[eta] = min_q - 1e-4 * (1.0 + min_q.abs());
            let block = build_c2a_lmi(0, &beam_vars, eta, Some(delta), &a0.0, &a1, alpha, 1.0, 1.0, C2aForm::Real)
                .unwrap();
            // The determinant of the 2x2 block is concave in δ; its maximizer
            // δ* = (M22/α² - M11)/2 at δ = 0 certifies whenever any δ does.
            let m0 = block.evaluate(&x);
            x[delta] = ((m0[(1, 1)].re / (alpha * alpha) - m0[(0, 0)].re) / 2.0).max(0.0);
            assert!(
                block.min_eigenvalue(&x) >= -1e-9,
                "optimal multiplier fails to certify a valid quadratic"
            );
            checked += 1;
        }
        assert_eq!(checked, 100);
    }

    #[test]
    fn c2a_hermitian_form_is_conservative() {
        // Hermitian-form feasibility implies real-form feasibility.
        let params = SystemParams::defaults(4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for _ in 0..100 {
            let theta = rng.gen_range(0.3..PI - 0.3);
            let alpha = 0.1;
            let (a0, a1) = taylor_terms(theta, &params);
            let s = setup(1, 4);
            let herm = build_c2a_lmi(0, &s.beam_vars, s.eta, Some(s.delta), &a0.0, &a1, alpha, 2.0, 1.0, C2aForm::Hermitian).unwrap();
            let real = build_c2a_lmi(0, &s.beam_vars, s.eta, Some(s.delta), &a0.0, &a1, alpha, 2.0, 1.0, C2aForm::Real).unwrap();
            let w = random_hermitian(&mut rng, 4);
            let mut x = vec![0.0; s.n_vars];
            assign(&s.maps[0], &w, &mut x);
            x[s.eta] = rng.gen_range(-2.0..1.0);
            x[s.delta] = rng.gen_range(0.0..2.0);
            if herm.min_eigenvalue(&x) >= -1e-9 {
                assert!(real.min_eigenvalue(&x) >= -1e-9);
            }
        }
    }

    #[test]
    fn c2b_feasible_point_implies_worst_case_distance() {
        use crate::geometry::Position2D;
        use crate::uncertainty::{worst_case_distance_sq, LocationUncertainty};
        // Any feasible (r, η, μ, t) certifies η ≥ max over the disk of
        // ‖r - (c + Δr)‖² + z0².
        let r0 = [0.1, -0.2];
        let center = [0.5, 0.4];
        let d = 0.2;
        let z0_sq = 1.0;
        let (main, epi) = build_c2b_lmi(0, [0, 1], 2, Some(3), 4, center, d, z0_sq).unwrap();
        let dist_sq = (r0[0] - center[0]).powi(2) + (r0[1] - center[1]).powi(2);
        let wc = worst_case_distance_sq(
            &Position2D::new(r0[0], r0[1]),
            &LocationUncertainty::new(Position2D::new(center[0], center[1]), d).unwrap(),
            1.0,
        );
        // Feasible by construction: t = ‖r-c‖², η = worst case, and the
        // tight multiplier μ = 1 + ‖r-c‖/D.
        let x = vec![r0[0], r0[1], wc, 1.0 + dist_sq.sqrt() / d, dist_sq];
        assert!(epi.min_eigenvalue(&x) >= -1e-12);
        assert!(main.min_eigenvalue(&x) >= -1e-9, "{}", main.min_eigenvalue(&x));
        // Slightly smaller η must break feasibility for every μ on a grid.
        let eta_bad = wc - 1e-3;
        let feasible_somewhere = (0..2000).any(|i| {
            let x = vec![r0[0], r0[1], eta_bad, i as f64 * 0.01, dist_sq];
            main.min_eigenvalue(&x) >= -1e-12 && epi.min_eigenvalue(&x) >= -1e-12
        });
        assert!(!feasible_somewhere);
    }

    #[test]
    fn c2b_degenerate_radius_zero() {
        let (row, epi) = build_c2b_lmi(0, [0, 1], 2, None, 3, [1.0, 2.0], 0.0, 1.0).unwrap();
        assert_eq!(row.dimension, 1);
        // η ≥ t + z0² with t ≥ ‖r - c‖²: at r = c, t = 0, η = 1 is tight.
        let x = vec![1.0, 2.0, 1.0, 0.0];
        assert!(row.min_eigenvalue(&x) >= -1e-12);
        assert!(epi.min_eigenvalue(&x) >= -1e-12);
        let x = vec![1.0, 2.0, 0.999, 0.0];
        assert!(row.min_eigenvalue(&x) < 0.0);
        assert!(build_c2b_lmi(0, [0, 1], 2, Some(9), 3, [1.0, 2.0], 0.0, 1.0).is_err());
    }

    #[test]
    fn c2b_uav_above_estimate() {
        // r'_0 = r̄', t = 0: the block is diagonal; feasibility only needs
        // the corner -μD² - z0² + η ≥ 0 together with μ ≥ 1 from (μ-1)I.
        let (main, _) = build_c2b_lmi(0, [0, 1], 2, Some(3), 4, [0.0, 0.0], 0.2, 1.0).unwrap();
        let eta = 1.2;
        let x = vec![0.0, 0.0, eta, 1.0, 0.0];
        assert!(main.min_eigenvalue(&x) >= -1e-12);
        let x = vec![0.0, 0.0, eta, (eta - 1.0) / 0.04 + 0.1, 0.0];
        assert!(main.min_eigenvalue(&x) < 0.0, "corner must go negative for large μ");
    }

    #[test]
    fn verify_reports_endpoint_violation() {
        // η set above the achievable interval worst case: the quadratic fails
        // exactly at the endpoints and the report flags an endpoint sample
        // while the LMI rejects the assignment for every multiplier.
        let params = SystemParams::defaults(3, 1);
        let (a0, a1) = taylor_terms(1.0, &params);
        let map = HermitianVarMap::new(3, 0);
        let beam_vars = vec![map.as_matrix_var()];
        let eta = map.var_count();
        let delta = eta + 1;
        let alpha = 0.1;
        let block = build_c2a_lmi(0, &beam_vars, eta, Some(delta), &a0.0, &a1, alpha, 1.0, 1.0, C2aForm::Real).unwrap();
        // W = āāᴴ - s·a1a1ᴴ with large s: the quadratic is concave in Δθ, so
        // its interval minimum sits at |Δθ| = α.
        let s_fac = Complex64::new(2.0 / a1.norm_squared(), 0.0);
        let w = &a0.0 * a0.0.adjoint() - (&a1 * a1.adjoint()) * s_fac;
        let mut x = vec![0.0; delta + 1];
        assign(&map, &w, &mut x);
        let q_end = c2a_quadratic_value(&w, &a0.0, &a1, 0.0, alpha);
        let q_mid = c2a_quadratic_value(&w, &a0.0, &a1, 0.0, 0.0);
        assert!(q_end < q_mid, "quadratic must be worst at the endpoint");
        x[eta] = q_end + 1e-4 * (q_mid - q_end);
        let report_for = |x: &[f64]| {
            verify_s_procedure(&block, x, 201, |i| {
                let dt = -alpha + 2.0 * alpha * i as f64 / 200.0;
                c2a_quadratic_value(&w, &a0.0, &a1, x[eta], dt)
            })
        };
        // Sampler pinpoints an endpoint, and no multiplier makes the LMI
        // accept the assignment (soundness of the rejection).
        let r = report_for(&x);
        assert!(matches!(r.violating_sample, Some(0) | Some(200)), "{r:?}");
        for i in 0..2000 {
            x[delta] = i as f64 * 0.01;
            assert!(!report_for(&x).lmi_feasible, "delta={} accepted", x[delta]);
        }
    }

    #[test]
    fn blocks_are_affine() {
        // Additivity and homogeneity of the evaluated matrix minus constant.
        let params = SystemParams::defaults(4, 2);
        let (a0, a1) = taylor_terms(0.9, &params);
        let s = setup(2, 4);
        let block = build_c2a_lmi(0, &s.beam_vars, s.eta, Some(s.delta), &a0.0, &a1, 0.07, 3.0, 2.5, C2aForm::Real)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let xa: Vec<f64> = (0..s.n_vars).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let xb: Vec<f64> = (0..s.n_vars).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sum: Vec<f64> = xa.iter().zip(&xb).map(|(a, b)| a + b).collect();
            let scaled: Vec<f64> = xa.iter().map(|a| 3.25 * a).collect();
            let c = &block.constant;
            let fa = block.evaluate(&xa) - c;
            let fb = block.evaluate(&xb) - c;
            let fsum = block.evaluate(&sum) - c;
            let fscaled = block.evaluate(&scaled) - c;
            assert!((&fsum - (&fa + &fb)).norm() < 1e-10);
            assert!((&fscaled - &fa * Complex64::new(3.25, 0.0)).norm() < 1e-10);
        }
    }
}
