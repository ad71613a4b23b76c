//! Improper dictionary learning: the proper ℓ₁ baseline, sampling masks,
//! convex denoisers, group and single-example encoding, and factorable-norm
//! witnesses.

mod coding;
mod denoiser;
mod gamma;
pub mod l1fit;
mod mask;
mod width;

pub use coding::{
    dict_csv, group_decode, group_encode, group_experiment, single_decode, single_encode, single_experiment, DictRow, GroupExperiment,
    SingleCode,
};
pub use denoiser::{Certificate, ConvexDenoiser, DenoiseResult, GammaHeuristicDenoiser, QsosDenoiser};
pub use gamma::{gamma_norm_axiom_probe, gamma_upper_bound, gamma_upper_bound_with, stack_witnesses, AxiomReport, GammaWitness};
pub use l1fit::SubgradientOptions;
pub use mask::{GroupCode, SampleMask};
pub use width::{srw_of, WidthSet};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::derive_seed;
use l1fit::{ball_starts, l1_fit, project_l1_ball};

#[derive(Debug, Clone, PartialEq)]
pub struct DictionarySpec {
    pub a_star: DMatrix<f64>,
    pub k: usize,
    pub noise: f64,
}

impl DictionarySpec {
    pub fn validate(&self) -> Result<()> {
        let m = max_abs(&self.a_star);
        if m > 1.0 + 1e-12 {
            return Err(Error::InvalidArgument(format!("dictionary has entry of magnitude {m} > 1")));
        }
        Ok(())
    }
}

/// `‖A‖_{ℓ₁→ℓ∞}`, the largest entry magnitude.
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProperFit {
    pub y: Vec<f64>,
    /// `|x − A y|₁`.
    pub objective: f64,
}

/// `argmin_{‖y‖₁ ≤ k} |x − A y|₁`.
pub fn proper_encode(a: &DMatrix<f64>, x: &[f64], k: f64, opts: &SubgradientOptions) -> Result<ProperFit> {
    if x.len() != a.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: x.len() });
    }
    if k < 0.0 {
        return Err(Error::InvalidArgument(format!("code budget must be nonnegative, got {k}")));
    }
    let r = a.ncols();
    if k == 0.0 {
        return Ok(ProperFit { y: vec![0.0; r], objective: x.iter().map(|v| v.abs()).sum() });
    }
    let (y, objective) = l1_fit(a, x, 0.0, |y| project_l1_ball(y, k), k, &ball_starts(r, k, opts), opts);
    Ok(ProperFit { y, objective })
}

pub fn proper_decode(a: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    (a * DVector::from_column_slice(y)).as_slice().to_vec()
}

/// Mean per-entry ℓ₁ error of the planted dictionary's best codes over the
/// columns of `x`.
pub fn epsilon_star(spec: &DictionarySpec, x: &DMatrix<f64>) -> Result<f64> {
    epsilon_star_with(spec, x, &SubgradientOptions::default())
}

pub fn epsilon_star_with(spec: &DictionarySpec, x: &DMatrix<f64>, opts: &SubgradientOptions) -> Result<f64> {
    if x.nrows() != spec.a_star.nrows() {
        return Err(Error::DimensionMismatch { expected: spec.a_star.nrows(), got: x.nrows() });
    }
    if x.ncols() == 0 {
        return Err(Error::EmptyDataset);
    }
    let d = x.nrows() as f64;
    let errs: Vec<f64> = (0..x.ncols())
        .into_par_iter()
        .map(|j| {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            let o = SubgradientOptions { seed: derive_seed(opts.seed, j as u64), ..*opts };
            proper_encode(&spec.a_star, &col, spec.k as f64, &o).map(|f| f.objective / d)
        })
        .collect::<Result<_>>()?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// `(1/(dN)) Σ |A − B|`.
pub fn per_entry_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().sum() / a.len().max(1) as f64
}
