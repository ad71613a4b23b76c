//! Pseudo-expectations: moment tables over a monomial basis, point
//! evaluations and feasibility checks against a program.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use super::monomial::{Monomial, MonomialBasis};
use super::program::{eval_form, SoSProgram};
use crate::error::{Error, Result};
use crate::framework::fmt_real;

#[derive(Debug, Clone)]
pub struct PseudoExpectation {
    pub basis: Arc<MonomialBasis>,
    pub values: Vec<f64>,
}

impl PseudoExpectation {
    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    pub fn get(&self, m: &Monomial) -> Option<f64> {
        self.basis.index_of(m).map(|i| self.values[i])
    }

    /// Moment-wise average; both tables must share a basis.
    pub fn average(&self, other: &Self) -> Result<Self> {
        if self.basis.len() != other.basis.len() || self.basis.var_count != other.basis.var_count {
            return Err(Error::DimensionMismatch { expected: self.basis.len(), got: other.basis.len() });
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| 0.5 * (a + b)).collect();
        Ok(Self { basis: self.basis.clone(), values })
    }

    /// One `monomial = value` line per moment, in graded-lex order.
    pub fn to_dump(&self, names: &[String]) -> String {
        let mut out = String::new();
        for (m, v) in self.basis.monomials.iter().zip(&self.values) {
            let _ = writeln!(out, "{} = {}", m.render(names), fmt_real(*v));
        }
        out
    }
}

/// Sign-preserving real root `x^{1/q}` for odd `q`.
pub fn odd_root(x: f64, q: usize) -> f64 {
    x.signum() * x.abs().powf(1.0 / q as f64)
}

/// Evaluation functional at a point of the constraint set: every moment is
/// the monomial's value at `(A, B, b)`.
pub fn point_pexp(program: &SoSProgram, a: &DMatrix<f64>, big_b: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<PseudoExpectation> {
    let lay = program
        .layout
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("program has no dictionary layout".into()))?;
    if a.shape() != (lay.d, lay.r) || big_b.shape() != (lay.r, lay.n) || b.shape() != (lay.r, lay.n) {
        return Err(Error::DimensionMismatch { expected: lay.d * lay.r, got: a.len() });
    }
    let tol = 1e-10;
    for v in a.iter() {
        if v * v > 1.0 + tol {
            return Err(Error::InfeasibleAssignment(format!("A entry {v} has square above 1")));
        }
    }
    for l in 0..lay.r {
        for j in 0..lay.n {
            let want = b[(l, j)].powi(lay.p as i32 - 1);
            if (big_b[(l, j)] - want).abs() > tol * want.abs().max(1.0) {
                return Err(Error::InfeasibleAssignment(format!("B[{l},{j}] != b^(p-1)")));
            }
        }
    }
    let bound = lay.column_bound();
    for j in 0..lay.n {
        let s: f64 = (0..lay.r).map(|l| b[(l, j)].powi(lay.p as i32)).sum();
        if s > bound + tol * bound.max(1.0) {
            return Err(Error::InfeasibleAssignment(format!("column {j}: sum b^p = {s} exceeds {bound}")));
        }
    }
    let point = lay.point(a, big_b, b);
    Ok(eval_at(&program.basis, &point))
}

/// Point evaluation for an arbitrary program basis.
pub fn eval_at(basis: &Arc<MonomialBasis>, point: &[f64]) -> PseudoExpectation {
    let values = basis.monomials.iter().map(|m| m.eval(point)).collect();
    PseudoExpectation { basis: basis.clone(), values }
}

/// Point pseudo-expectation for `C = A B` given the factor pair, with
/// `b = B^{1/(p−1)}` by the sign-preserving root.
pub fn point_pexp_from_factors(program: &SoSProgram, a: &DMatrix<f64>, big_b: &DMatrix<f64>) -> Result<PseudoExpectation> {
    let p = program.layout.as_ref().map(|l| l.p).unwrap_or(4);
    let b = big_b.map(|v| odd_root(v, p - 1));
    let big_b = b.map(|v| v.powi(p as i32 - 1));
    point_pexp(program, a, &big_b, &b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckReport {
    pub normalization_err: f64,
    pub moment_min_eig: f64,
    pub max_linear_residual: f64,
    pub max_localizing_violation: f64,
    pub passed: bool,
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn pexp_check(pexp: &PseudoExpectation, program: &SoSProgram, tol: f64) -> CheckReport {
    let y = &pexp.values;
    let normalization_err = (y[0] - 1.0).abs();
    let max_linear_residual = program
        .equalities
        .iter()
        .skip(1)
        .map(|r| (eval_form(&r.form, y) - r.rhs).abs())
        .fold(0.0, f64::max);
    let moment_min_eig = min_eigenvalue(&program.blocks[0].eval(y));
    let max_localizing_violation = program.blocks[1..]
        .iter()
        .map(|b| (-min_eigenvalue(&b.eval(y))).max(0.0))
        .fold(0.0, f64::max);
    let passed = normalization_err <= tol
        && moment_min_eig >= -tol
        && max_linear_residual <= tol
        && max_localizing_violation <= tol;
    CheckReport { normalization_err, moment_min_eig, max_linear_residual, max_localizing_violation, passed }
}
