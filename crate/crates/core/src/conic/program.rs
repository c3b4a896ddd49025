//! Standard-form conic program built from LMI blocks, the Hermitian-to-real
//! embedding, and the interior-point backend adapter.
//!
//! The program is `min qᵀx  s.t.  constant_i + Σ_j x_j·coeff_ij ⪰ 0` for
//! every block; dimension-1 blocks go to the nonnegative cone, real blocks to
//! the PSD triangle cone in svec form (off-diagonals scaled by √2), complex
//! Hermitian blocks are embedded as `[[X, -Y], [Y, X]]` first.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, PSDTriangleConeT, SolverStatus,
    SupportedConeT,
};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::Result;
use crate::lmi::{LmiBlock, MatrixField};

/// Hermitian-to-real-symmetric embedding: W = X + jY maps to
/// [[X, -Y], [Y, X]]. Eigenvalues double in multiplicity; PSD-ness is
/// preserved in both directions.
pub fn embed_hermitian(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    let d = m.nrows();
    let mut out = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let e = m[(i, j)];
            out[(i, j)] = e.re;
            out[(i + d, j + d)] = e.re;
            out[(i, j + d)] = -e.im;
            out[(i + d, j)] = e.im;
        }
    }
    out
}

/// Inverse of [`embed_hermitian`] on the embedded subspace; off-subspace
/// components (as produced by solver duals) are projected out.
pub fn deembed_hermitian(r: &DMatrix<f64>) -> DMatrix<Complex64> {
    let d = r.nrows() / 2;
    DMatrix::from_fn(d, d, |i, j| {
        let x = 0.5 * (r[(i, j)] + r[(i + d, j + d)]);
        let y = 0.5 * (r[(i + d, j)] - r[(i, j + d)]);
        Complex64::new(x, y)
    })
}

/// Length of the scaled upper-triangle packing of a d×d symmetric matrix.
pub fn svec_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Scaled upper-triangle packing, column-major, off-diagonals × √2. Inner
/// products are preserved: ⟨svec(A), svec(B)⟩ = Tr(AB).
pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity(svec_len(d));
    for j in 0..d {
        for i in 0..=j {
            if i == j {
                out.push(m[(i, j)]);
            } else {
                out.push(sqrt2 * m[(i, j)]);
            }
        }
    }
    out
}

/// Inverse of [`svec`].
pub fn unsvec(v: &[f64], d: usize) -> DMatrix<f64> {
    let inv_sqrt2 = 1.0 / std::f64::consts::SQRT_2;
    let mut out = DMatrix::zeros(d, d);
    let mut idx = 0;
    for j in 0..d {
        for i in 0..=j {
            if i == j {
                out[(i, j)] = v[idx];
            } else {
                out[(i, j)] = v[idx] * inv_sqrt2;
                out[(j, i)] = v[idx] * inv_sqrt2;
            }
            idx += 1;
        }
    }
    out
}

/// The assembled standard-form program.
#[derive(Debug, Clone)]
pub struct ConeProgram {
    pub n_vars: usize,
    pub var_names: Vec<String>,
    /// Linear objective, minimized.
    pub objective: Vec<f64>,
    pub blocks: Vec<LmiBlock>,
}

impl ConeProgram {
    pub fn new(var_names: Vec<String>) -> Self {
        let n = var_names.len();
        Self { n_vars: n, var_names, objective: vec![0.0; n], blocks: Vec::new() }
    }

    pub fn push_block(&mut self, block: LmiBlock) {
        debug_assert!(block.variable_maps.iter().all(|(v, _)| *v < self.n_vars));
        self.blocks.push(block);
    }

    /// Real symmetric view of a block's constant and coefficient matrices:
    /// identity for real blocks, Hermitian embedding for complex ones.
    fn realized_block(&self, block: &LmiBlock) -> (usize, DMatrix<f64>, Vec<(usize, DMatrix<f64>)>) {
        match block.field {
            MatrixField::Real => {
                let c = block.constant.map(|e| e.re);
                let maps = block
                    .variable_maps
                    .iter()
                    .map(|(v, m)| (*v, m.map(|e| e.re)))
                    .collect();
                (block.dimension, c, maps)
            }
            MatrixField::Complex => {
                let c = embed_hermitian(&block.constant);
                let maps = block
                    .variable_maps
                    .iter()
                    .map(|(v, m)| (*v, embed_hermitian(m)))
                    .collect();
                (2 * block.dimension, c, maps)
            }
        }
    }
}

/// Options for one conic solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tolerance: f64,
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iter: 200, verbose: false }
    }
}

/// Raw solve outcome, before any domain interpretation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

/// Backend report: objective pair, residuals, and per-block dual matrices.
#[derive(Debug, Clone)]
pub struct ConicSolveReport {
    pub status: RawStatus,
    pub status_detail: String,
    pub iterations: u32,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub residual_primal: f64,
    pub residual_dual: f64,
    pub solve_time_s: f64,
    /// Primal point, one entry per declared scalar variable.
    pub x: Vec<f64>,
    /// Dual matrix per block, de-embedded for complex blocks.
    pub block_duals: Vec<DMatrix<Complex64>>,
}

impl ConicSolveReport {
    pub fn duality_gap_rel(&self) -> f64 {
        let denom = self.primal_objective.abs().max(self.dual_objective.abs()).max(1e-30);
        (self.primal_objective - self.dual_objective).abs() / denom
    }
}

/// Solve through the interior-point backend. Deterministic for fixed inputs.
pub fn solve_cone_program(program: &ConeProgram, opts: &SolveOptions) -> Result<ConicSolveReport> {
    let n = program.n_vars;
    let mut rows_i: Vec<usize> = Vec::new();
    let mut cols_j: Vec<usize> = Vec::new();
    let mut vals: Vec<f64> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    // (row offset, embedded dim, field, original dim) per block.
    let mut spans: Vec<(usize, usize, MatrixField, usize)> = Vec::new();

    let mut row = 0usize;
    for block in &program.blocks {
        let (dim, c, maps) = program.realized_block(block);
        if dim == 1 {
            // Scalar row in the nonnegative cone.
            b.push(c[(0, 0)]);
            for (v, m) in &maps {
                rows_i.push(row);
                cols_j.push(*v);
                vals.push(-m[(0, 0)]);
            }
            match cones.last_mut() {
                Some(SupportedConeT::NonnegativeConeT(k)) => *k += 1,
                _ => cones.push(NonnegativeConeT(1)),
            }
            spans.push((row, 1, MatrixField::Real, 1));
            row += 1;
        } else {
            let len = svec_len(dim);
            b.extend(svec(&c));
            for (v, m) in &maps {
                for (offset, val) in svec(m).into_iter().enumerate() {
                    if val != 0.0 {
                        rows_i.push(row + offset);
                        cols_j.push(*v);
                        vals.push(-val);
                    }
                }
            }
            cones.push(PSDTriangleConeT(dim));
            spans.push((row, len, block.field, block.dimension));
            row += len;
        }
    }

    let a = CscMatrix::new_from_triplets(row, n, rows_i, cols_j, vals);
    let p = CscMatrix::zeros((n, n));
    let mut settings = DefaultSettings::default();
    settings.verbose = opts.verbose;
    settings.max_iter = opts.max_iter;
    settings.tol_gap_abs = opts.tolerance;
    settings.tol_gap_rel = opts.tolerance;
    settings.tol_feas = opts.tolerance;
    // Accepted accuracy when the interior-point iteration stalls one step
    // short of the target. Reported residuals expose the achieved accuracy.
    settings.reduced_tol_gap_abs = 100.0 * opts.tolerance;
    settings.reduced_tol_gap_rel = 100.0 * opts.tolerance;
    settings.reduced_tol_feas = 100.0 * opts.tolerance;
    let mut solver = DefaultSolver::new(&p, &program.objective, &a, &b, &cones, settings);
    solver.solve();

    // The backend can report AlmostSolved for stalls far from optimality on
    // hard instances; trust it only when the achieved gap and residuals
    // really meet the reduced tolerances.
    let almost_ok = {
        let p = solver.info.cost_primal;
        let d = solver.info.cost_dual;
        let gap_rel = (p - d).abs() / p.abs().max(d.abs()).max(1e-30);
        gap_rel <= 100.0 * opts.tolerance
            && solver.info.res_primal <= 100.0 * opts.tolerance
            && solver.info.res_dual <= 100.0 * opts.tolerance
    };
    let status = match solver.solution.status {
        SolverStatus::Solved => RawStatus::Optimal,
        SolverStatus::AlmostSolved if almost_ok => RawStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            RawStatus::Infeasible
        }
        _ => RawStatus::NumericalFailure,
    };

    // Recover per-block dual matrices from the flat dual vector.
    let z = &solver.solution.z;
    let block_duals = spans
        .iter()
        .map(|&(start, len, field, dim)| {
            if len == 1 {
                DMatrix::from_element(1, 1, Complex64::new(z[start], 0.0))
            } else {
                match field {
                    MatrixField::Real => {
                        unsvec(&z[start..start + len], dim).map(|e| Complex64::new(e, 0.0))
                    }
                    MatrixField::Complex => {
                        // ⟨embed(A), Ẑ⟩ = 2·Re tr(A·deembed(Ẑ)); rescale so
                        // stationarity reads q_i = Σ Re tr(coeff_i · dual)
                        // uniformly across real and complex blocks.
                        deembed_hermitian(&unsvec(&z[start..start + len], 2 * dim))
                            * Complex64::new(2.0, 0.0)
                    }
                }
            }
        })
        .collect();

    Ok(ConicSolveReport {
        status,
        status_detail: format!("{:?}", solver.solution.status),
        iterations: solver.info.iterations,
        primal_objective: solver.info.cost_primal,
        dual_objective: solver.info.cost_dual,
        residual_primal: solver.info.res_primal,
        residual_dual: solver.info.res_dual,
        solve_time_s: solver.info.solve_time,
        x: solver.solution.x.clone(),
        block_duals,
    })
}

/// Check a primal point against every block of the program.
pub fn max_block_violation(program: &ConeProgram, x: &[f64]) -> f64 {
    program
        .blocks
        .iter()
        .map(|b| (-b.min_eigenvalue(x)).max(0.0))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::{prop_assert, proptest};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn embedding_example_eigenvalues() {
        // W = [[1, j], [-j, 1]] has eigenvalues {0, 2}; the embedding has
        // {0, 0, 2, 2}.
        let w = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(1.0, 0.0),
            ],
        );
        let e = embed_hermitian(&w);
        let mut eigs: Vec<f64> = e.symmetric_eigenvalues().iter().copied().collect();
        eigs.sort_by(f64::total_cmp);
        let expect = [0.0, 0.0, 2.0, 2.0];
        for (got, want) in eigs.iter().zip(expect) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn embedding_real_matrix_is_block_diagonal() {
        let w = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(3.0, 0.0),
            ],
        );
        let e = embed_hermitian(&w);
        for i in 0..2 {
            for j in 2..4 {
                assert_eq!(e[(i, j)], 0.0);
                assert_eq!(e[(j, i)], 0.0);
            }
        }
    }

    fn random_hermitian(rng: &mut impl Rng, n: usize) -> DMatrix<Complex64> {
        let m = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
    }

    #[test]
    fn embedding_doubles_trace_and_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let w = random_hermitian(&mut rng, 5);
            let e = embed_hermitian(&w);
            assert_relative_eq!(e.trace(), 2.0 * w.trace().re, max_relative = 1e-12);
            let back = deembed_hermitian(&e);
            assert!((&back - &w).norm() < 1e-12);
        }
    }

    #[test]
    fn svec_preserves_inner_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let a = random_hermitian(&mut rng, 4).map(|e| e.re);
            let a = (&a + a.transpose()) * 0.5;
            let b = random_hermitian(&mut rng, 4).map(|e| e.re);
            let b = (&b + b.transpose()) * 0.5;
            let dot: f64 = svec(&a).iter().zip(svec(&b)).map(|(x, y)| x * y).sum();
            assert_relative_eq!(dot, (&a * &b).trace(), max_relative = 1e-10);
            let back = unsvec(&svec(&a), 4);
            assert!((&back - &a).norm() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn embedding_round_trip_random(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = random_hermitian(&mut rng, 3);
            let back = deembed_hermitian(&embed_hermitian(&w));
            prop_assert!((&back - &w).norm() < 1e-10);
        }
    }
}
