//! Constrained ℓ₁ regression by restarted, normalized projected subgradient
//! steps. The step halves at every stage and each stage restarts from the
//! best point so far.

use nalgebra::{DMatrix, DVector};

use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgradientOptions {
    pub restarts: usize,
    pub stages: usize,
    pub iters_per_stage: usize,
    pub seed: u64,
}

impl Default for SubgradientOptions {
    fn default() -> Self {
        Self { restarts: 5, stages: 30, iters_per_stage: 120, seed: 0 }
    }
}

/// Euclidean projection onto `{y : ‖y‖₁ ≤ radius}`.
pub fn project_l1_ball(y: &mut [f64], radius: f64) {
    if radius <= 0.0 {
        y.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let norm: f64 = y.iter().map(|v| v.abs()).sum();
    if norm <= radius {
        return;
    }
    let mut mags: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &m) in mags.iter().enumerate() {
        cum += m;
        let t = (cum - radius) / (i + 1) as f64;
        if m > t {
            theta = t;
        } else {
            break;
        }
    }
    for v in y.iter_mut() {
        *v = v.signum() * (v.abs() - theta).max(0.0);
    }
}

pub fn project_box(y: &mut [f64], bound: f64) {
    for v in y.iter_mut() {
        *v = v.clamp(-bound, bound);
    }
}

/// `Σ_i |t_i − (M y)_i| + λ ‖y‖₁`.
pub fn l1_objective(m: &DMatrix<f64>, t: &[f64], lambda: f64, y: &[f64]) -> f64 {
    let fit = m * DVector::from_column_slice(y);
    let r: f64 = fit.iter().zip(t).map(|(f, t)| (t - f).abs()).sum();
    r + lambda * y.iter().map(|v| v.abs()).sum::<f64>()
}

/// Minimizes `l1_objective` over the set described by `project`. `scale` is
/// the first step length (about the set's radius); `starts` are tried in
/// order and the best result wins.
pub fn l1_fit<P>(
    m: &DMatrix<f64>,
    t: &[f64],
    lambda: f64,
    project: P,
    scale: f64,
    starts: &[Vec<f64>],
    opts: &SubgradientOptions,
) -> (Vec<f64>, f64)
where
    P: Fn(&mut [f64]),
{
    let n = m.ncols();
    let mut best_all: Option<(Vec<f64>, f64)> = None;
    let tv = DVector::from_column_slice(t);
    for s in starts {
        let mut y = s.clone();
        project(&mut y);
        let mut best_f = l1_objective(m, t, lambda, &y);
        let mut best_y = y.clone();
        for stage in 0..opts.stages {
            let eta = scale * 0.5f64.powi(stage as i32);
            y.copy_from_slice(&best_y);
            for _ in 0..opts.iters_per_stage {
                let resid = &tv - m * DVector::from_column_slice(&y);
                let sg = resid.map(|v| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 });
                let mut g = -(m.transpose() * sg);
                if lambda > 0.0 {
                    for (gi, yi) in g.iter_mut().zip(&y) {
                        *gi += lambda * yi.signum() * (*yi != 0.0) as u8 as f64;
                    }
                }
                let gn = g.norm();
                if gn == 0.0 {
                    break;
                }
                for (yi, gi) in y.iter_mut().zip(g.iter()) {
                    *yi -= eta * gi / gn;
                }
                project(&mut y);
                let f = l1_objective(m, t, lambda, &y);
                if f < best_f {
                    best_f = f;
                    best_y.copy_from_slice(&y);
                }
            }
        }
        if best_all.as_ref().is_none_or(|(_, f)| best_f < *f) {
            best_all = Some((best_y, best_f));
        }
    }
    best_all.unwrap_or_else(|| (vec![0.0; n], l1_objective(m, t, lambda, &vec![0.0; n])))
}

/// Zero plus `restarts − 1` random points of the ℓ₁ ball.
pub fn ball_starts(n: usize, radius: f64, opts: &SubgradientOptions) -> Vec<Vec<f64>> {
    let mut rng = SplitMix64::new(opts.seed);
    let mut out = vec![vec![0.0; n]];
    for _ in 1..opts.restarts.max(1) {
        let mut y: Vec<f64> = (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let l1: f64 = y.iter().map(|v| v.abs()).sum();
        let target = radius * rng.uniform();
        if l1 > 0.0 {
            y.iter_mut().for_each(|v| *v *= target / l1);
        }
        out.push(y);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn ball_projection_is_feasible_and_idempotent(v in proptest::collection::vec(-5.0f64..5.0, 1..8), r in 0.0f64..4.0) {
            let mut y = v.clone();
            project_l1_ball(&mut y, r);
            prop_assert!(y.iter().map(|x| x.abs()).sum::<f64>() <= r + 1e-9);
            let mut z = y.clone();
            project_l1_ball(&mut z, r);
            for (a, b) in y.iter().zip(&z) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            // Projection is no farther than any sampled feasible point scaled from v.
            let l1: f64 = v.iter().map(|x| x.abs()).sum();
            if l1 > r {
                let s: Vec<f64> = v.iter().map(|x| x * r / l1).collect();
                let d_proj: f64 = v.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
                let d_s: f64 = v.iter().zip(&s).map(|(a, b)| (a - b).powi(2)).sum();
                prop_assert!(d_proj <= d_s + 1e-9);
            }
        }
    }

    #[test]
    fn exact_fit_reaches_zero() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.5, 0.5]);
        let y0 = [0.3, -0.4];
        let t: Vec<f64> = (0..3).map(|i| m[(i, 0)] * y0[0] + m[(i, 1)] * y0[1]).collect();
        let opts = SubgradientOptions::default();
        let (y, f) = l1_fit(&m, &t, 0.0, |y| project_l1_ball(y, 1.0), 1.0, &ball_starts(2, 1.0, &opts), &opts);
        assert!(f < 1e-6, "{f}");
        assert!((y[0] - 0.3).abs() < 1e-6 && (y[1] + 0.4).abs() < 1e-6);
    }
}
