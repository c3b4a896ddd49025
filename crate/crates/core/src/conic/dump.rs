//! Deterministic text serialization of an assembled conic program, for
//! inspection and for diffing two assemblies of the same scenario.
//!
//! Format (one record per line, fields space-separated):
//!   problem-dump v1
//!   vars <count>
//!   var <id> <name>
//!   objective <var-id> <coeff>          only nonzero entries
//!   block <index> <dim> <real|complex> <label>
//!   const <i> <j> <re> <im>             upper triangle, nonzero only
//!   coef <var-id> <i> <j> <re> <im>     upper triangle, nonzero only
//! Floats are printed with 17 significant digits so the dump is lossless.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::lmi::MatrixField;

use super::program::ConeProgram;

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_matrix_entries(out: &mut String, prefix: &str, m: &DMatrix<Complex64>) {
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            let e = m[(i, j)];
            if e != Complex64::new(0.0, 0.0) {
                writeln!(out, "{prefix} {i} {j} {} {}", fmt_f(e.re), fmt_f(e.im)).unwrap();
            }
        }
    }
}

/// Render the whole program.
pub fn dump_program(program: &ConeProgram) -> String {
    let mut out = String::new();
    writeln!(out, "problem-dump v1").unwrap();
    writeln!(out, "vars {}", program.n_vars).unwrap();
    for (i, name) in program.var_names.iter().enumerate() {
        writeln!(out, "var {i} {name}").unwrap();
    }
    for (i, &c) in program.objective.iter().enumerate() {
        if c != 0.0 {
            writeln!(out, "objective {i} {}", fmt_f(c)).unwrap();
        }
    }
    for (b, block) in program.blocks.iter().enumerate() {
        let field = match block.field {
            MatrixField::Real => "real",
            MatrixField::Complex => "complex",
        };
        writeln!(out, "block {b} {} {field} {}", block.dimension, block.label).unwrap();
        write_matrix_entries(&mut out, "const", &block.constant);
        for (var, coeff) in &block.variable_maps {
            write_matrix_entries(&mut out, &format!("coef {var}"), coeff);
        }
    }
    out
}
