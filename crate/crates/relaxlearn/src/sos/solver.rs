//! First-order solver for moment programs.
//!
//! The program is written as `min cᵀy + Σ w_i |ℓ_i(y) − h_i|` subject to the
//! linear equalities and `L(y) ∈ K`, where `L` stacks every PSD block entry
//! and every ℓ₁ row. Equalities are eliminated exactly by row reduction
//! (`y = y0 + N z`, `N` sparse).
//! Over-relaxed Douglas-Rachford splitting then alternates between the range
//! of `L N` (a least-squares solve with a cached Cholesky factor) and the
//! product of simple sets (PSD cones via eigenvalue clipping,
//! soft-thresholding). The fixed-point residual `‖b − a‖` is nonincreasing.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use super::pexp::PseudoExpectation;
use super::program::{eval_form, LinearForm, SoSProgram};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Largest moment count the dense factorization accepts.
pub const MAX_MOMENTS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Over-relaxation factor in `(0, 2)`.
    pub relaxation: f64,
    /// Prox step applied to the objective and ℓ₁ terms.
    pub step: f64,
    pub seed: u64,
    /// Scale of the random starting point.
    pub init_scale: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 100_000,
            tol: 1e-6,
            relaxation: 1.6,
            step: 1.0,
            seed: 0,
            init_scale: 1e-2,
        }
    }
}

/// `weight · |form(y) − target|`.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Term {
    pub form: LinearForm,
    pub target: f64,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    /// Final iterate, rescaled so that `Ẽ[1] = 1`.
    pub pexp: PseudoExpectation,
    pub residual: f64,
    pub best_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective (linear part plus ℓ₁ terms) at the returned moments.
    pub objective: f64,
    pub history: Vec<f64>,
}

enum Segment {
    Psd { start: usize, size: usize },
    L1 { start: usize, targets: Vec<f64>, weights: Vec<f64> },
}

/// Euclidean projection onto the PSD cone (after symmetrizing).
pub fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose()
}

struct Stacked {
    rows: Vec<LinearForm>,
    segments: Vec<Segment>,
}

fn stack(program: &SoSProgram, l1: &[L1Term]) -> Stacked {
    let mut rows: Vec<LinearForm> = Vec::new();
    let mut segments = Vec::new();
    for b in &program.blocks {
        let start = rows.len();
        rows.extend(b.entries.iter().cloned());
        segments.push(Segment::Psd { start, size: b.size });
    }
    if !l1.is_empty() {
        let start = rows.len();
        rows.extend(l1.iter().map(|t| t.form.clone()));
        segments.push(Segment::L1 {
            start,
            targets: l1.iter().map(|t| t.target).collect(),
            weights: l1.iter().map(|t| t.weight).collect(),
        });
    }
    Stacked { rows, segments }
}

fn prox_sets(segments: &[Segment], v: &[f64], step: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    let psd: Vec<(usize, DMatrix<f64>)> = segments
        .par_iter()
        .filter_map(|s| match s {
            Segment::Psd { start, size } => {
                let m = DMatrix::from_row_slice(*size, *size, &v[*start..*start + size * size]);
                Some((*start, project_psd(&m)))
            }
            _ => None,
        })
        .collect();
    for (start, m) in psd {
        let n = m.nrows();
        for i in 0..n {
            for j in 0..n {
                out[start + i * n + j] = m[(i, j)];
            }
        }
    }
    for s in segments {
        if let Segment::L1 { start, targets, weights } = s {
            for (i, (h, w)) in targets.iter().zip(weights).enumerate() {
                let x = v[start + i] - h;
                let thr = step * w;
                out[start + i] = h + x.signum() * (x.abs() - thr).max(0.0);
            }
        }
    }
    out
}

/// Objective `cᵀy + Σ w |ℓ(y) − h|` at moments `y`.
pub fn objective_at(program: &SoSProgram, l1: &[L1Term], y: &[f64]) -> f64 {
    let lin = program.objective.as_ref().map_or(0.0, |c| eval_form(c, y));
    lin + l1.iter().map(|t| t.weight * (eval_form(&t.form, y) - t.target).abs()).sum::<f64>()
}

/// Affine parametrization `y = y0 + N z` of the equality constraints, with
/// `N` sparse: moment `i` equals `y0[i] + Σ expr[i]`.
struct AffineSpace {
    y0: Vec<f64>,
    expr: Vec<Vec<(usize, f64)>>,
    free: usize,
}

/// Reduced row echelon elimination of the equality system.
fn equality_space(program: &SoSProgram, m: usize) -> Result<AffineSpace> {
    let q = program.equalities.len();
    let mut e = DMatrix::<f64>::zeros(q, m + 1);
    let mut scale = 0.0f64;
    for (r, row) in program.equalities.iter().enumerate() {
        for &(i, a) in &row.form {
            e[(r, i)] += a;
            scale = scale.max(a.abs());
        }
        e[(r, m)] = row.rhs;
    }
    let tol = 1e-10 * scale.max(1.0);
    let mut pivots: Vec<usize> = Vec::new();
    let mut row = 0;
    for col in 0..m {
        if row == q {
            break;
        }
        let (best, val) = (row..q).map(|r| (r, e[(r, col)].abs())).fold((row, -1.0), |b, c| if c.1 > b.1 { c } else { b });
        if val <= tol {
            continue;
        }
        e.swap_rows(row, best);
        let piv = e[(row, col)];
        for j in col..=m {
            e[(row, j)] /= piv;
        }
        let prow: Vec<(usize, f64)> = (col..=m).filter(|&j| e[(row, j)] != 0.0).map(|j| (j, e[(row, j)])).collect();
        for r in 0..q {
            if r != row {
                let f = e[(r, col)];
                if f != 0.0 {
                    for &(j, v) in &prow {
                        e[(r, j)] -= f * v;
                    }
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    let viol = (row..q).map(|r| e[(r, m)].abs()).fold(0.0, f64::max);
    if viol > 1e-8 * scale.max(1.0) {
        return Err(Error::InfeasibleAssignment(format!("linear constraints are inconsistent (residual {viol:.3e})")));
    }
    let mut is_pivot = vec![usize::MAX; m];
    for (r, &c) in pivots.iter().enumerate() {
        is_pivot[c] = r;
    }
    let mut free_index = vec![usize::MAX; m];
    let mut free = 0;
    for i in 0..m {
        if is_pivot[i] == usize::MAX {
            free_index[i] = free;
            free += 1;
        }
    }
    let mut y0 = vec![0.0; m];
    let mut expr = vec![Vec::new(); m];
    for i in 0..m {
        if is_pivot[i] == usize::MAX {
            expr[i].push((free_index[i], 1.0));
        } else {
            let r = is_pivot[i];
            y0[i] = e[(r, m)];
            for j in 0..m {
                if free_index[j] != usize::MAX && e[(r, j)] != 0.0 {
                    expr[i].push((free_index[j], -e[(r, j)]));
                }
            }
        }
    }
    Ok(AffineSpace { y0, expr, free })
}

/// Sparse row of the stacked map in the free coordinates, plus its offset.
fn reduce_row(form: &LinearForm, space: &AffineSpace, scratch: &mut [f64], mark: &mut [bool], touched: &mut Vec<usize>) -> (Vec<(usize, f64)>, f64) {
    let mut offset = 0.0;
    for &(i, a) in form {
        offset += a * space.y0[i];
        for &(j, c) in &space.expr[i] {
            if !mark[j] {
                mark[j] = true;
                touched.push(j);
            }
            scratch[j] += a * c;
        }
    }
    touched.sort_unstable();
    let out = touched.iter().map(|&j| (j, scratch[j])).filter(|&(_, v)| v != 0.0).collect();
    for &j in touched.iter() {
        scratch[j] = 0.0;
        mark[j] = false;
    }
    touched.clear();
    (out, offset)
}

pub fn solve_sdp(program: &SoSProgram, l1: &[L1Term], opts: &SolverOptions) -> Result<SolveOutcome> {
    let m = program.moment_count();
    if m > MAX_MOMENTS {
        return Err(Error::CapExceeded(format!("{m} moments exceed solver cap {MAX_MOMENTS}")));
    }
    if !(opts.relaxation > 0.0 && opts.relaxation < 2.0) || !(opts.step > 0.0) {
        return Err(Error::InvalidArgument("relaxation must lie in (0,2) and step be positive".into()));
    }
    let space = equality_space(program, m)?;
    let f = space.free;
    let st = stack(program, l1);
    let p = st.rows.len();

    // Stacked map restricted to the affine space: a = offset + Lz z.
    let mut scratch = vec![0.0; f];
    let mut mark = vec![false; f];
    let mut touched = Vec::new();
    let mut lz: Vec<Vec<(usize, f64)>> = Vec::with_capacity(p);
    let mut offset = Vec::with_capacity(p);
    for r in &st.rows {
        let (row, o) = reduce_row(r, &space, &mut scratch, &mut mark, &mut touched);
        lz.push(row);
        offset.push(o);
    }
    let mut h = DMatrix::<f64>::zeros(f, f);
    for row in &lz {
        for &(i, a) in row {
            for &(j, b) in row {
                h[(i, j)] += a * b;
            }
        }
    }
    let mut cz = DVector::<f64>::zeros(f);
    if let Some(obj) = &program.objective {
        for &(i, v) in obj {
            for &(j, c) in &space.expr[i] {
                cz[j] += v * c;
            }
        }
    }
    let chol = h
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("stacked constraint map is not injective".into()))?;

    let mut rng = SplitMix64::new(opts.seed);
    let mut w: Vec<f64> = (0..p).map(|i| offset[i] + opts.init_scale * rng.normal()).collect();
    let mut z = DVector::zeros(f);
    let mut a = vec![0.0; p];
    let mut history = Vec::new();
    let mut best = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        let mut rhs = -&cz * opts.step;
        for (row, (wi, oi)) in lz.iter().zip(w.iter().zip(&offset)) {
            let v = wi - oi;
            for &(j, c) in row {
                rhs[j] += c * v;
            }
        }
        z = chol.solve(&rhs);
        for (ai, (row, oi)) in a.iter_mut().zip(lz.iter().zip(&offset)) {
            *ai = oi + row.iter().map(|&(j, c)| c * z[j]).sum::<f64>();
        }
        let v: Vec<f64> = a.iter().zip(&w).map(|(ai, wi)| 2.0 * ai - wi).collect();
        let b = prox_sets(&st.segments, &v, opts.step);
        let mut res2 = 0.0;
        for i in 0..p {
            let diff = b[i] - a[i];
            res2 += diff * diff;
            w[i] += opts.relaxation * diff;
        }
        let res = res2.sqrt();
        history.push(res);
        best = best.min(res);
        if res <= opts.tol {
            converged = true;
            break;
        }
    }
    let mut values: Vec<f64> = (0..m)
        .map(|i| space.y0[i] + space.expr[i].iter().map(|&(j, c)| c * z[j]).sum::<f64>())
        .collect();
    if values[0] > 0.0 {
        let s = values[0];
        values.iter_mut().for_each(|v| *v /= s);
    }
    let objective = objective_at(program, l1, &values);
    Ok(SolveOutcome {
        pexp: PseudoExpectation { basis: program.basis.clone(), values },
        residual: *history.last().unwrap_or(&f64::INFINITY),
        best_residual: best,
        iterations,
        converged,
        objective,
        history,
    })
}
