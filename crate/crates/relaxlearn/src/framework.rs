//! Hypothesis pairs, reconstruction losses and the empirical estimators
//! (Rademacher complexity, sampling Rademacher width, generalization gap).

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, SplitMix64};

pub type VecMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Encoder/decoder pair. `reference` is the target the decoder reconstructs
/// (the identity for plain autoencoders, a tensor lift for kernel PCA).
#[derive(Clone)]
pub struct HypothesisPair {
    pub encode: VecMap,
    pub decode: VecMap,
    pub reference: Option<VecMap>,
    pub code_length_bits: u64,
}

impl HypothesisPair {
    pub fn new(encode: VecMap, decode: VecMap, code_reals: usize) -> Self {
        Self {
            encode,
            decode,
            reference: None,
            code_length_bits: 64 * code_reals.max(1) as u64,
        }
    }

    pub fn with_reference(mut self, reference: VecMap) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(Arc::new(|x| x.to_vec()), Arc::new(|y| y.to_vec()), dim)
    }

    pub fn zero_decoder(dim: usize) -> Self {
        Self::new(Arc::new(|_| vec![0.0]), Arc::new(move |_| vec![0.0; dim]), 1)
    }

    pub fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
        (self.decode)(&(self.encode)(x))
    }

    pub fn target(&self, x: &[f64]) -> Vec<f64> {
        match &self.reference {
            Some(r) => r(x),
            None => x.to_vec(),
        }
    }

    pub fn loss(&self, x: &[f64], kind: LossKind) -> f64 {
        kind.eval(&self.target(x), &self.reconstruct(x))
    }
}

impl std::fmt::Debug for HypothesisPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HypothesisPair")
            .field("code_length_bits", &self.code_length_bits)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    SquaredEuclidean,
    L1PerCoordinate,
}

impl LossKind {
    pub fn eval(self, target: &[f64], recon: &[f64]) -> f64 {
        match self {
            LossKind::SquaredEuclidean => target.iter().zip(recon).map(|(a, b)| (a - b) * (a - b)).sum(),
            LossKind::L1PerCoordinate => {
                let s: f64 = target.iter().zip(recon).map(|(a, b)| (a - b).abs()).sum();
                s / target.len().max(1) as f64
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub dim: usize,
    pub samples: Vec<Vec<f64>>,
    pub seed: u64,
    pub provenance: String,
    pub noise: f64,
    pub normalized: bool,
}

impl DataSet {
    pub fn new(dim: usize, samples: Vec<Vec<f64>>, seed: u64, provenance: &str) -> Result<Self> {
        for s in &samples {
            if s.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: s.len() });
            }
        }
        Ok(Self {
            dim,
            samples,
            seed,
            provenance: provenance.to_string(),
            noise: 0.0,
            normalized: false,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Checks every sample has unit norm within 1e-9.
    pub fn check_normalized(&self) -> Result<()> {
        for (index, s) in self.samples.iter().enumerate() {
            let norm = crate::linalg::norm2(s);
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::NotNormalized { index, norm });
            }
        }
        Ok(())
    }

    /// Samples as the columns of a `dim × m` matrix.
    pub fn as_columns(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.len(), |i, j| self.samples[j][i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
}

impl WidthEstimate {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_error: (var / n).sqrt(),
            trials: values.len(),
        }
    }
}

/// Per-trial values alongside their summary, for the `trial,value` table.
#[derive(Debug, Clone)]
pub struct TrialTable {
    pub values: Vec<f64>,
    pub estimate: WidthEstimate,
}

impl TrialTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("trial,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(s, "{i},{}", fmt_real(*v));
        }
        s
    }
}

/// Fixed 17-significant-digit formatting used by every text output.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn empirical_loss(pair: &HypothesisPair, data: &DataSet, loss: LossKind) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let losses: Vec<f64> = data.samples.par_iter().map(|x| pair.loss(x, loss)).collect();
    Ok(losses.iter().sum::<f64>() / data.len() as f64)
}

fn run_trials<F>(trials: usize, seed: u64, f: F) -> Result<TrialTable>
where
    F: Fn(&mut SplitMix64) -> Result<f64> + Sync,
{
    if trials < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 trials, got {trials}")));
    }
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| f(&mut SplitMix64::stream(seed, t as u64)))
        .collect::<Result<_>>()?;
    let estimate = WidthEstimate::from_values(&values);
    Ok(TrialTable { values, estimate })
}

/// Monte-Carlo estimate of `E_σ sup_f (1/m) Σ σ_i ℓ(f, x_i)`; the evaluator
/// receives the sign vector and must return the supremum.
pub fn rademacher_estimate<F>(evaluator: F, data: &DataSet, trials: usize, seed: u64) -> Result<TrialTable>
where
    F: Fn(&[f64], &DataSet) -> Result<f64> + Sync,
{
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    run_trials(trials, seed, |rng| {
        let sigma: Vec<f64> = (0..data.len()).map(|_| rng.sign()).collect();
        evaluator(&sigma, data)
    })
}

/// Draws `ξ = σ ⊙ Ω` for a uniformly random size-`m` subset `Ω` of `0..total_dim`.
pub fn draw_signed_mask(rng: &mut SplitMix64, total_dim: usize, m: usize) -> Vec<f64> {
    let omega = rng.subset(total_dim, m);
    let mut xi = vec![0.0; total_dim];
    for i in omega {
        xi[i] = rng.sign();
    }
    xi
}

/// Monte-Carlo estimate of `E (1/m) sup_{x∈W} ⟨x, ξ⟩`.
pub fn srw_estimate<F>(maximizer: F, total_dim: usize, m: usize, trials: usize, seed: u64) -> Result<TrialTable>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if m == 0 || m > total_dim {
        return Err(Error::InvalidArgument(format!("need 1 <= m <= {total_dim}, got {m}")));
    }
    run_trials(trials, seed, |rng| {
        let xi = draw_signed_mask(rng, total_dim, m);
        Ok(maximizer(&xi)? / m as f64)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenRow {
    pub m: usize,
    pub train_loss: f64,
    pub holdout_loss: f64,
    pub gap: f64,
}

pub fn gen_report_csv(rows: &[GenRow]) -> String {
    let mut s = String::from("m,train_loss,holdout_loss,gap\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.m,
            fmt_real(r.train_loss),
            fmt_real(r.holdout_loss),
            fmt_real(r.gap)
        );
    }
    s
}

/// Trains on a fresh sample of each size in `m_grid` and evaluates on one
/// shared holdout sample.
pub fn generalization_report<L, S>(
    learner: L,
    sampler: S,
    m_grid: &[usize],
    holdout_m: usize,
    loss: LossKind,
    seed: u64,
) -> Result<Vec<GenRow>>
where
    L: Fn(&DataSet) -> Result<HypothesisPair>,
    S: Fn(usize, u64) -> Result<DataSet>,
{
    if m_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("m_grid must be strictly ascending".into()));
    }
    let holdout = sampler(holdout_m, derive_seed(seed, u64::MAX))?;
    m_grid
        .iter()
        .map(|&m| {
            let train = sampler(m, derive_seed(seed, m as u64))?;
            let pair = learner(&train)?;
            let train_loss = empirical_loss(&pair, &train, loss)?;
            let holdout_loss = empirical_loss(&pair, &holdout, loss)?;
            Ok(GenRow {
                m,
                train_loss,
                holdout_loss,
                gap: holdout_loss - train_loss,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DownstreamReport {
    pub loss_on_raw: f64,
    pub loss_on_reconstructed: f64,
    pub bound: f64,
}

/// Fits a least-squares linear predictor on the raw features, clips its norm
/// to `lipschitz_l`, and compares its absolute loss on raw versus
/// reconstructed features.
pub fn downstream_check(
    pair: &HypothesisPair,
    data: &DataSet,
    targets: &[f64],
    lipschitz_l: f64,
) -> Result<DownstreamReport> {
    if targets.len() != data.len() {
        return Err(Error::DimensionMismatch { expected: data.len(), got: targets.len() });
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let raw: Vec<Vec<f64>> = data.samples.iter().map(|x| pair.target(x)).collect();
    let rec: Vec<Vec<f64>> = data.samples.iter().map(|x| pair.reconstruct(x)).collect();
    let p = raw[0].len();
    for r in &rec {
        if r.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: r.len() });
        }
    }
    let m = data.len();
    let xm = DMatrix::from_fn(m, p, |i, j| raw[i][j]);
    let y = DVector::from_column_slice(targets);
    let mut w = crate::linalg::thin_svd(&xm).solve(&y);
    let wn = w.norm();
    if wn > lipschitz_l {
        w *= lipschitz_l / wn;
    }
    let abs_loss = |feats: &[Vec<f64>]| {
        feats
            .iter()
            .zip(targets)
            .map(|(f, t)| (crate::linalg::dot(f, w.as_slice()) - t).abs())
            .sum::<f64>()
            / m as f64
    };
    let loss_on_raw = abs_loss(&raw);
    let loss_on_reconstructed = abs_loss(&rec);
    let mean_err = raw
        .iter()
        .zip(&rec)
        .map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt())
        .sum::<f64>()
        / m as f64;
    Ok(DownstreamReport {
        loss_on_raw,
        loss_on_reconstructed,
        bound: loss_on_raw + lipschitz_l * mean_err,
    })
}
