//! Kernel PCA over tensor-lifted data: ERM by eigendecomposition of the
//! uncentered lifted second-moment matrix.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::framework::{fmt_real, DataSet, HypothesisPair};
use crate::linalg::{canonical_sign, lift, LiftedVec};

const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    /// `k × d^s` encoder with orthonormal rows.
    pub a: DMatrix<f64>,
    pub d: usize,
    pub s: u32,
    pub k: usize,
}

fn lifted_dim(d: usize, s: u32) -> Result<usize> {
    Ok(lift(&vec![0.0; d], s)?.entries.len())
}

/// `Σ_i w_i z_i z_iᵀ` for lifted samples, summed chunkwise in a fixed order.
pub fn lifted_second_moment(data: &DataSet, s: u32, weights: Option<&[f64]>) -> Result<DMatrix<f64>> {
    let dim = lifted_dim(data.dim, s)?;
    let chunks: Vec<DMatrix<f64>> = data
        .samples
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut acc = DMatrix::<f64>::zeros(dim, dim);
            for (i, x) in chunk.iter().enumerate() {
                let z = DVector::from_vec(lift(x, s)?.entries);
                let w = weights.map_or(1.0, |w| w[c * CHUNK + i]);
                acc.ger(w, &z, &z, 1.0);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = DMatrix::<f64>::zeros(dim, dim);
    for c in chunks {
        total += c;
    }
    Ok(total)
}

/// Eigenpairs sorted by decreasing eigenvalue; near-ties are ordered by the
/// lexicographically smallest sign-canonical eigenvector.
pub fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let eig = SymmetricEigen::new(m.clone());
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1e-300);
    let mut pairs: Vec<(f64, DVector<f64>)> = (0..m.nrows())
        .map(|i| {
            let mut v = eig.eigenvectors.column(i).into_owned();
            canonical_sign(&mut v);
            (eig.eigenvalues[i], v)
        })
        .collect();
    pairs.sort_by(|a, b| {
        if (a.0 - b.0).abs() <= 1e-12 * scale {
            a.1.iter().zip(b.1.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        } else {
            b.0.total_cmp(&a.0)
        }
    });
    pairs.into_iter().unzip()
}

pub fn fit_kernel_pca(data: &DataSet, k: usize, s: u32) -> Result<PcaModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dim = lifted_dim(data.dim, s)?;
    if k == 0 || k > dim {
        return Err(Error::InvalidArgument(format!("k must lie in 1..={dim}, got {k}")));
    }
    let cov = lifted_second_moment(data, s, None)?;
    let (_, vecs) = sorted_eigen(&cov);
    let a = DMatrix::from_fn(k, dim, |i, j| vecs[i][j]);
    Ok(PcaModel { a, d: data.dim, s, k })
}

impl PcaModel {
    pub fn lifted_dim(&self) -> usize {
        self.a.ncols()
    }

    /// `AᵀA`, the orthogonal projection onto the fitted subspace.
    pub fn projection(&self) -> DMatrix<f64> {
        self.a.transpose() * &self.a
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("pca {} {} {}\n", self.d, self.s, self.k);
        for i in 0..self.k {
            let row: Vec<String> = self.a.row(i).iter().map(|&v| fmt_real(v)).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
        if header.len() != 4 || header[0] != "pca" {
            return Err(Error::Parse("expected header `pca d s k`".into()));
        }
        let parse = |t: &str| t.parse::<usize>().map_err(|e| Error::Parse(e.to_string()));
        let (d, s, k) = (parse(header[1])?, parse(header[2])? as u32, parse(header[3])?);
        let dim = lifted_dim(d, s)?;
        let mut data = Vec::with_capacity(k * dim);
        for _ in 0..k {
            let line = lines.next().ok_or_else(|| Error::Parse("missing row".into()))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
                .collect::<Result<_>>()?;
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            data.extend(row);
        }
        Ok(Self { a: DMatrix::from_row_slice(k, dim, &data), d, s, k })
    }
}

pub fn pca_encode(model: &PcaModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.d {
        return Err(Error::DimensionMismatch { expected: model.d, got: x.len() });
    }
    let z = DVector::from_vec(lift(x, model.s)?.entries);
    Ok((&model.a * z).as_slice().to_vec())
}

pub fn pca_decode(model: &PcaModel, y: &[f64]) -> Result<LiftedVec> {
    if y.len() != model.k {
        return Err(Error::DimensionMismatch { expected: model.k, got: y.len() });
    }
    let z = model.a.transpose() * DVector::from_column_slice(y);
    Ok(LiftedVec {
        entries: z.as_slice().to_vec(),
        base_dim: model.d,
        power: model.s,
    })
}

/// Squared residual `‖(I − AᵀA) x^{⊗s}‖²`.
pub fn pca_loss(model: &PcaModel, x: &[f64]) -> Result<f64> {
    let z = lift(x, model.s)?.entries;
    let rec = pca_decode(model, &pca_encode(model, x)?)?.entries;
    Ok(z.iter().zip(&rec).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// The model as a framework pair whose reconstruction target is `x^{⊗s}`.
pub fn pca_pair(model: &PcaModel) -> HypothesisPair {
    let enc = model.clone();
    let dec = model.clone();
    let s = model.s;
    HypothesisPair::new(
        Arc::new(move |x| pca_encode(&enc, x).expect("dimension checked by caller")),
        Arc::new(move |y| pca_decode(&dec, y).expect("dimension checked by caller").entries),
        model.k,
    )
    .with_reference(Arc::new(move |x| lift(x, s).expect("lift within cap").entries))
}

/// Exact `sup_{rank P ≤ k} (1/m) Σ σ_i ‖(I − P) z_i‖²` over orthogonal projections.
///
/// With `S = Σ σ_i z_i z_iᵀ` this is `(tr S − Σ_{k smallest} min(λ, 0)) / m`.
pub fn pca_rademacher_sup(sigma: &[f64], data: &DataSet, k: usize, s: u32) -> Result<f64> {
    if sigma.len() != data.len() {
        return Err(Error::DimensionMismatch { expected: data.len(), got: sigma.len() });
    }
    let sm = lifted_second_moment(data, s, Some(sigma))?;
    let mut eig: Vec<f64> = SymmetricEigen::new(sm.clone()).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| a.total_cmp(b));
    let drop: f64 = eig.iter().take(k).map(|&l| l.min(0.0)).sum();
    Ok((sm.trace() - drop) / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::{empirical_loss, LossKind};
    use crate::linalg::orthonormal_columns;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    fn random_data(d: usize, m: usize, seed: u64) -> DataSet {
        let mut rng = SplitMix64::new(seed);
        DataSet::new(d, (0..m).map(|_| rng.normal_vec(d)).collect(), seed, "test").unwrap()
    }

    fn projection_loss(p: &DMatrix<f64>, data: &DataSet) -> f64 {
        data.samples
            .iter()
            .map(|x| {
                let x = DVector::from_column_slice(x);
                (&x - p * &x).norm_squared()
            })
            .sum::<f64>()
            / data.len() as f64
    }

    #[test]
    fn span_e1_recovered() {
        let data = DataSet::new(3, vec![vec![1.0, 0.0, 0.0], vec![-2.0, 0.0, 0.0], vec![0.5, 0.0, 0.0]], 0, "t").unwrap();
        let m = fit_kernel_pca(&data, 1, 1).unwrap();
        let mut e1 = DMatrix::zeros(3, 3);
        e1[(0, 0)] = 1.0;
        assert!((m.projection() - e1).norm() < 1e-12);
        assert!(empirical_loss(&pca_pair(&m), &data, LossKind::SquaredEuclidean).unwrap() < 1e-20);
    }

    #[test]
    fn full_rank_is_identity() {
        let data = random_data(3, 10, 1);
        let m = fit_kernel_pca(&data, 9, 2).unwrap();
        assert!((m.projection() - DMatrix::identity(9, 9)).norm() < 1e-9);
        assert!(empirical_loss(&pca_pair(&m), &data, LossKind::SquaredEuclidean).unwrap() < 1e-18);
    }

    #[test]
    fn k_out_of_range() {
        let data = random_data(3, 10, 1);
        assert!(fit_kernel_pca(&data, 0, 1).is_err());
        assert!(fit_kernel_pca(&data, 4, 1).is_err());
    }

    #[test]
    fn erm_beats_random_projections() {
        let data = random_data(6, 100, 2);
        let model = fit_kernel_pca(&data, 2, 1).unwrap();
        let erm = projection_loss(&model.projection(), &data);
        let mut rng = SplitMix64::new(3);
        let mut best = f64::INFINITY;
        for _ in 0..200 {
            let q = orthonormal_columns(&DMatrix::from_fn(6, 2, |_, _| rng.normal()));
            best = best.min(projection_loss(&(&q * q.transpose()), &data));
        }
        assert!(erm <= best + 1e-9);
        let via_pair = empirical_loss(&pca_pair(&model), &data, LossKind::SquaredEuclidean).unwrap();
        assert!((via_pair - erm).abs() < 1e-9);
    }

    #[test]
    fn encode_decode_examples() {
        let data = DataSet::new(3, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![2.0, 2.0, 0.0]], 0, "t").unwrap();
        let m = fit_kernel_pca(&data, 2, 1).unwrap();
        assert!(pca_loss(&m, &[0.3, -0.7, 0.0]).unwrap() < 1e-18);
        assert!((pca_loss(&m, &[0.0, 0.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(pca_encode(&m, &[1.0, 2.0]).is_err());
        assert!(pca_decode(&m, &[1.0]).is_err());
        let m2 = fit_kernel_pca(&random_data(3, 30, 4), 4, 2).unwrap();
        let mut rng = SplitMix64::new(5);
        for _ in 0..10 {
            let x = rng.normal_vec(3);
            let z = lift(&x, 2).unwrap().entries;
            let az = pca_encode(&m2, &x).unwrap();
            let pyth = z.iter().map(|v| v * v).sum::<f64>() - az.iter().map(|v| v * v).sum::<f64>();
            assert!((pca_loss(&m2, &x).unwrap() - pyth).abs() < 1e-9);
        }
    }

    #[test]
    fn model_invariants_and_text_round_trip() {
        let m = fit_kernel_pca(&random_data(3, 40, 6), 3, 2).unwrap();
        assert!((&m.a * m.a.transpose() - DMatrix::identity(3, 3)).norm() < 1e-8);
        let p = m.projection();
        assert!((&p * &p - &p).norm() < 1e-8);
        let back = PcaModel::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn s2_equals_s1_on_prelifted_data() {
        let data = random_data(3, 25, 7);
        let lifted = DataSet::new(9, data.samples.iter().map(|x| lift(x, 2).unwrap().entries).collect(), 7, "t").unwrap();
        let a = fit_kernel_pca(&data, 3, 2).unwrap();
        let b = fit_kernel_pca(&lifted, 3, 1).unwrap();
        assert!((a.projection() - b.projection()).norm() < 1e-8);
    }

    #[test]
    fn rademacher_sup_matches_brute_force() {
        // In d=2, s=1, k=1 every rank-1 projection is uu' with u at angle θ.
        let data = random_data(2, 12, 8);
        let mut rng = SplitMix64::new(9);
        let sigma: Vec<f64> = (0..12).map(|_| rng.sign()).collect();
        let exact = pca_rademacher_sup(&sigma, &data, 1, 1).unwrap();
        let value = |p: &DMatrix<f64>| {
            data.samples
                .iter()
                .zip(&sigma)
                .map(|(x, s)| {
                    let x = DVector::from_column_slice(x);
                    s * (&x - p * &x).norm_squared()
                })
                .sum::<f64>()
                / 12.0
        };
        let mut best = value(&DMatrix::zeros(2, 2));
        for i in 0..20000 {
            let t = std::f64::consts::PI * i as f64 / 20000.0;
            let u = DVector::from_vec(vec![t.cos(), t.sin()]);
            best = best.max(value(&(&u * u.transpose())));
        }
        assert!((exact - best).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn loss_monotone_in_k(seed in 0u64..500) {
            let data = random_data(4, 15, seed);
            let losses: Vec<f64> = (1..=4)
                .map(|k| projection_loss(&fit_kernel_pca(&data, k, 1).unwrap().projection(), &data))
                .collect();
            for w in losses.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9);
            }
        }
    }
}
