use nalgebra::DMatrix;
use rayon::prelude::*;

use super::l1fit::{l1_fit, project_box, project_l1_ball, SubgradientOptions};
use crate::error::{Error, Result};
use crate::linalg::thin_svd;
use crate::rng::SplitMix64;
use crate::sos::{denoise_over_qsos, PseudoExpectation, QsosConfig};

/// Membership evidence for a denoiser output.
#[derive(Debug, Clone)]
pub enum Certificate {
    PseudoExpectation(PseudoExpectation),
    Factors { a: DMatrix<f64>, b: DMatrix<f64> },
}

#[derive(Debug, Clone)]
pub struct DenoiseResult {
    pub c: DMatrix<f64>,
    /// `Σ_{Ω} |C − Y|` over the fitted entries.
    pub objective: f64,
    /// False when the solver stopped on its iteration budget.
    pub converged: bool,
    pub certificate: Certificate,
}

/// A set `Q` of `d×N` matrices with ℓ₁ projection-type solves.
pub trait ConvexDenoiser: Send + Sync {
    fn name(&self) -> &'static str;

    /// `argmin_{C∈Q} |X − C|₁`.
    fn full_denoise(&self, x: &DMatrix<f64>) -> Result<DenoiseResult> {
        let all: Vec<usize> = (0..x.len()).collect();
        let n = x.ncols();
        let values: Vec<f64> = all.iter().map(|&i| x[(i / n, i % n)]).collect();
        self.masked_fit(x.nrows(), n, &all, &values)
    }

    /// `argmin_{C∈Q} |P_Ω(C) − Y|₁` with `Ω` given as sorted row-major indices.
    fn masked_fit(&self, d: usize, n: usize, observed: &[usize], values: &[f64]) -> Result<DenoiseResult>;
}

fn check_observed(d: usize, n: usize, observed: &[usize], values: &[f64]) -> Result<()> {
    if observed.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: observed.len(), got: values.len() });
    }
    if let Some(&bad) = observed.iter().find(|&&i| i >= d * n) {
        return Err(Error::InvalidArgument(format!("observed index {bad} out of range for {d}x{n}")));
    }
    Ok(())
}

/// The sum-of-squares relaxation, exact but limited to tiny dimensions.
#[derive(Debug, Clone, Copy, Default)]
pub struct QsosDenoiser {
    pub cfg: QsosConfig,
}

impl ConvexDenoiser for QsosDenoiser {
    fn name(&self) -> &'static str {
        "qsos"
    }

    fn full_denoise(&self, x: &DMatrix<f64>) -> Result<DenoiseResult> {
        let s = denoise_over_qsos(x, &self.cfg, None)?;
        Ok(DenoiseResult { c: s.c, objective: s.objective, converged: s.converged, certificate: Certificate::PseudoExpectation(s.pexp) })
    }

    fn masked_fit(&self, d: usize, n: usize, observed: &[usize], values: &[f64]) -> Result<DenoiseResult> {
        check_observed(d, n, observed, values)?;
        let mut y = DMatrix::zeros(d, n);
        for (&i, &v) in observed.iter().zip(values) {
            y[(i / n, i % n)] = v;
        }
        let s = denoise_over_qsos(&y, &self.cfg, Some(observed))?;
        Ok(DenoiseResult { c: s.c, objective: s.objective, converged: s.converged, certificate: Certificate::PseudoExpectation(s.pexp) })
    }
}

/// Scalable surrogate: alternating ℓ₁ fits over factor pairs `C = AB` with
/// `|A_ij| ≤ 1` and column ℓ₁ norms of `B` at most `radius`. The set is not
/// convex and the solves are local, so this is a heuristic.
#[derive(Debug, Clone, Copy)]
pub struct GammaHeuristicDenoiser {
    pub r: usize,
    pub radius: f64,
    pub outer_iters: usize,
    /// Weight of `‖b_j‖₁` added to each code fit; breaks ties between exact
    /// fits toward sparse codes.
    pub tie_break: f64,
    pub inner: SubgradientOptions,
    /// Joint projected subgradient refinement over `(A, B)` after the
    /// alternating phase: number of step-halving stages and steps per stage.
    pub joint_stages: usize,
    pub joint_iters: usize,
    pub seed: u64,
}

impl GammaHeuristicDenoiser {
    pub fn new(r: usize, radius: f64) -> Self {
        Self {
            r,
            radius,
            outer_iters: 25,
            tie_break: 1e-3,
            inner: SubgradientOptions { restarts: 1, stages: 16, iters_per_stage: 40, seed: 0 },
            joint_stages: 30,
            joint_iters: 200,
            seed: 0,
        }
    }

    fn init_a(&self, y: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
        let mut rng = SplitMix64::new(self.seed);
        let mut a = DMatrix::from_fn(d, self.r, |_, _| rng.uniform_range(-1.0, 1.0));
        let svd = thin_svd(y);
        for (l, &s) in svd.s.iter().take(self.r).enumerate() {
            if s <= 1e-12 * svd.s[0] {
                break;
            }
            let col = svd.u.column(l);
            let m = col.amax();
            if m > 0.0 {
                a.set_column(l, &(col / m));
            }
        }
        a
    }
}

fn masked_objective(a: &DMatrix<f64>, b: &DMatrix<f64>, observed: &[usize], values: &[f64], n: usize) -> f64 {
    observed
        .iter()
        .zip(values)
        .map(|(&i, &v)| {
            let (r, c) = (i / n, i % n);
            (a.row(r) * b.column(c))[(0, 0)] - v
        })
        .map(f64::abs)
        .sum()
}

impl ConvexDenoiser for GammaHeuristicDenoiser {
    fn name(&self) -> &'static str {
        "gamma_heuristic"
    }

    fn masked_fit(&self, d: usize, n: usize, observed: &[usize], values: &[f64]) -> Result<DenoiseResult> {
        check_observed(d, n, observed, values)?;
        if self.r == 0 || self.radius < 0.0 {
            return Err(Error::InvalidArgument("heuristic needs r >= 1 and radius >= 0".into()));
        }
        let r = self.r;
        let zero = || DenoiseResult {
            c: DMatrix::zeros(d, n),
            objective: values.iter().map(|v| v.abs()).sum(),
            converged: true,
            certificate: Certificate::Factors { a: DMatrix::zeros(d, r), b: DMatrix::zeros(r, n) },
        };
        if observed.is_empty() || self.radius == 0.0 {
            return Ok(zero());
        }
        let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut by_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); d];
        let mut filled = DMatrix::zeros(d, n);
        for (&i, &v) in observed.iter().zip(values) {
            let (row, col) = (i / n, i % n);
            by_col[col].push((row, v));
            by_row[row].push((col, v));
            filled[(row, col)] = v;
        }
        let mut a = self.init_a(&filled, d);
        let mut b = DMatrix::<f64>::zeros(r, n);
        let mut best = zero();
        let mut prev = f64::INFINITY;
        for _ in 0..self.outer_iters {
            let cols: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|j| {
                    let obs = &by_col[j];
                    if obs.is_empty() {
                        return vec![0.0; r];
                    }
                    let m = DMatrix::from_fn(obs.len(), r, |q, l| a[(obs[q].0, l)]);
                    let t: Vec<f64> = obs.iter().map(|o| o.1).collect();
                    let start = vec![b.column(j).iter().copied().collect::<Vec<f64>>()];
                    l1_fit(&m, &t, self.tie_break, |y| project_l1_ball(y, self.radius), self.radius, &start, &self.inner).0
                })
                .collect();
            for (j, c) in cols.iter().enumerate() {
                b.set_column(j, &nalgebra::DVector::from_column_slice(c));
            }
            let rows: Vec<Vec<f64>> = (0..d)
                .into_par_iter()
                .map(|i| {
                    let obs = &by_row[i];
                    if obs.is_empty() {
                        return a.row(i).iter().copied().collect();
                    }
                    let m = DMatrix::from_fn(obs.len(), r, |q, l| b[(l, obs[q].0)]);
                    let t: Vec<f64> = obs.iter().map(|o| o.1).collect();
                    let start = vec![a.row(i).iter().copied().collect::<Vec<f64>>()];
                    l1_fit(&m, &t, 0.0, |y| project_box(y, 1.0), 1.0, &start, &self.inner).0
                })
                .collect();
            for (i, row) in rows.iter().enumerate() {
                for (l, v) in row.iter().enumerate() {
                    a[(i, l)] = *v;
                }
            }
            let obj = masked_objective(&a, &b, observed, values, n);
            if obj < best.objective {
                best = DenoiseResult {
                    c: &a * &b,
                    objective: obj,
                    converged: true,
                    certificate: Certificate::Factors { a: a.clone(), b: b.clone() },
                };
            }
            if prev - obj <= 1e-9 * prev {
                break;
            }
            prev = obj;
        }
        if let Certificate::Factors { a: ba, b: bb } = &best.certificate {
            a = ba.clone();
            b = bb.clone();
        }
        let mut best_obj = best.objective;
        let (mut best_a, mut best_b) = (a.clone(), b.clone());
        let mut improved = false;
        for stage in 0..self.joint_stages {
            let eta = 0.5 * 0.7f64.powi(stage as i32);
            a.copy_from(&best_a);
            b.copy_from(&best_b);
            for _ in 0..self.joint_iters {
                let c = &a * &b;
                let mut sg = DMatrix::<f64>::zeros(d, n);
                for (&i, &v) in observed.iter().zip(values) {
                    let (row, col) = (i / n, i % n);
                    let res = v - c[(row, col)];
                    sg[(row, col)] = if res > 0.0 { 1.0 } else if res < 0.0 { -1.0 } else { 0.0 };
                }
                let ga = -(&sg * b.transpose());
                let gb = -(a.transpose() * &sg);
                let (na, nb) = (ga.norm(), gb.norm());
                if na == 0.0 && nb == 0.0 {
                    break;
                }
                if na > 0.0 {
                    a -= ga * (eta / na);
                }
                if nb > 0.0 {
                    b -= gb * (eta * self.radius / nb);
                }
                project_box(a.as_mut_slice(), 1.0);
                for mut col in b.column_iter_mut() {
                    project_l1_ball(col.as_mut_slice(), self.radius);
                }
                let obj = masked_objective(&a, &b, observed, values, n);
                if obj < best_obj {
                    best_obj = obj;
                    best_a.copy_from(&a);
                    best_b.copy_from(&b);
                    improved = true;
                }
            }
        }
        if improved {
            best = DenoiseResult {
                c: &best_a * &best_b,
                objective: best_obj,
                converged: true,
                certificate: Certificate::Factors { a: best_a, b: best_b },
            };
        }
        Ok(best)
    }
}
