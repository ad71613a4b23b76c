//! ℓ₁ denoising and linear maximization over the sum-of-squares relaxation
//! `Q^sos` of the dictionary reconstruction set.

use nalgebra::DMatrix;

use super::pexp::{eval_at, PseudoExpectation};
use super::program::{build_program, eval_form, BForm, DictLayout, DictProgramParams, SoSProgram};
use super::solver::{solve_sdp, L1Term, SolveOutcome, SolverOptions};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QsosConfig {
    pub r: usize,
    pub p: usize,
    /// Column budget `k`; the set scales linearly with it.
    pub k: f64,
    pub degree: usize,
    pub form: BForm,
    pub solver: SolverOptions,
}

impl Default for QsosConfig {
    fn default() -> Self {
        Self { r: 2, p: 4, k: 1.0, degree: 4, form: BForm::Substituted, solver: SolverOptions::default() }
    }
}

impl QsosConfig {
    pub fn program(&self, d: usize, n: usize) -> Result<SoSProgram> {
        let layout = DictLayout { d, r: self.r, n, p: self.p, k: self.k, form: self.form };
        build_program(None, &DictProgramParams::new(layout, self.degree))
    }
}

#[derive(Debug, Clone)]
pub struct QsosSolution {
    pub c: DMatrix<f64>,
    pub pexp: PseudoExpectation,
    /// `Σ |C_ij − X_ij|` over the fitted entries.
    pub objective: f64,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn c_matrix(program: &SoSProgram, y: &[f64], d: usize, n: usize) -> DMatrix<f64> {
    let forms = program.c_forms().expect("dictionary program");
    DMatrix::from_fn(d, n, |i, j| eval_form(&forms[i * n + j], y))
}

fn finish(program: &SoSProgram, out: SolveOutcome, d: usize, n: usize, objective: impl Fn(&DMatrix<f64>) -> f64) -> QsosSolution {
    let c = c_matrix(program, &out.pexp.values, d, n);
    QsosSolution {
        objective: objective(&c),
        c,
        pexp: out.pexp,
        residual: out.residual,
        converged: out.converged,
        iterations: out.iterations,
    }
}

/// `argmin_{C ∈ Q^sos} Σ_{(i,j)∈Ω} |C_ij − X_ij|`, with `Ω` all entries when
/// `observed` is `None`. Observed indices are row-major (`i·N + j`). An empty
/// `Ω` returns the minimum-ℓ₁ member `C = 0`.
pub fn denoise_over_qsos(x: &DMatrix<f64>, cfg: &QsosConfig, observed: Option<&[usize]>) -> Result<QsosSolution> {
    let (d, n) = x.shape();
    let program = cfg.program(d, n)?;
    let all: Vec<usize>;
    let omega = match observed {
        Some(o) => o,
        None => {
            all = (0..d * n).collect();
            &all
        }
    };
    if let Some(&bad) = omega.iter().find(|&&i| i >= d * n) {
        return Err(Error::InvalidArgument(format!("observed index {bad} out of range")));
    }
    if omega.is_empty() {
        let zero = vec![0.0; program.basis.var_count];
        return Ok(QsosSolution {
            c: DMatrix::zeros(d, n),
            pexp: eval_at(&program.basis, &zero),
            objective: 0.0,
            residual: 0.0,
            converged: true,
            iterations: 0,
        });
    }
    let forms = program.c_forms().expect("dictionary program");
    let l1: Vec<L1Term> = omega
        .iter()
        .map(|&idx| L1Term { form: forms[idx].clone(), target: x[(idx / n, idx % n)], weight: 1.0 })
        .collect();
    let out = solve_sdp(&program, &l1, &cfg.solver)?;
    Ok(finish(&program, out, d, n, |c| omega.iter().map(|&idx| (c[(idx / n, idx % n)] - x[(idx / n, idx % n)]).abs()).sum()))
}

/// `sup_{C ∈ Q^sos} ⟨C, ξ⟩`, returned with the maximizer.
pub fn qsos_linear_sup(xi: &DMatrix<f64>, cfg: &QsosConfig) -> Result<QsosSolution> {
    let (d, n) = xi.shape();
    let mut program = cfg.program(d, n)?;
    let forms = program.c_forms().expect("dictionary program");
    let mut obj = Vec::new();
    for i in 0..d {
        for j in 0..n {
            if xi[(i, j)] != 0.0 {
                obj.extend(forms[i * n + j].iter().map(|&(m, c)| (m, -xi[(i, j)] * c)));
            }
        }
    }
    program.objective = Some(obj);
    let out = solve_sdp(&program, &[], &cfg.solver)?;
    Ok(finish(&program, out, d, n, |c| c.dot(xi)))
}
