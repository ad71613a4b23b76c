//! Seeded synthetic distributions: subspace data, planted spectrally
//! decodable data, dictionary-model data and samples from quadratic varieties.
//!
//! Stream layout: stream 0 of the seed draws shared structure (bases,
//! dictionaries, constraints); sample `i` draws from stream `i + 1`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dictionary::DictionarySpec;
use crate::error::{Error, Result};
use crate::framework::{fmt_real, DataSet};
use crate::linalg::{flatten, lift, norm2, operator_norm, orthonormal_columns};
use crate::rng::SplitMix64;
use crate::spectral::{SpectralAtom, SpectralModel};

pub const FAMILIES: [&str; 4] = ["subspace", "regular_decodable", "dictionary", "manifold_s2"];

fn normalize(v: &mut [f64]) {
    let n = norm2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn random_orthonormal(d: usize, k: usize, rng: &mut SplitMix64) -> DMatrix<f64> {
    orthonormal_columns(&DMatrix::from_fn(d, k, |_, _| rng.normal()))
}

/// Unit samples `normalize(U g + noise·η)` around a random `k`-dimensional
/// subspace. Returns the data and the basis `U`.
pub fn gen_subspace(d: usize, k: usize, m: usize, noise: f64, seed: u64) -> Result<(DataSet, DMatrix<f64>)> {
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= d, got k={k}, d={d}")));
    }
    let u = random_orthonormal(d, k, &mut SplitMix64::stream(seed, 0));
    let ds = sample_subspace(&u, m, noise, seed)?;
    Ok((ds, u))
}

/// Samples around a fixed basis `U` (orthonormal columns); draw `i` uses
/// stream `i + 1` of `seed`.
pub fn sample_subspace(u: &DMatrix<f64>, m: usize, noise: f64, seed: u64) -> Result<DataSet> {
    let (d, k) = u.shape();
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= d, got k={k}, d={d}")));
    }
    let samples: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut rng = SplitMix64::stream(seed, i as u64 + 1);
            loop {
                let g = DVector::from_vec(rng.normal_vec(k));
                let mut x = (u * g).as_slice().to_vec();
                for v in x.iter_mut() {
                    *v += noise * rng.normal();
                }
                if norm2(&x) > 1e-12 {
                    normalize(&mut x);
                    return x;
                }
            }
        })
        .collect();
    let mut ds = DataSet::new(d, samples, seed, "subspace")?;
    ds.noise = noise;
    ds.normalized = true;
    Ok(ds)
}

/// Random symmetric `d×d` matrix with operator norm exactly `eps`.
fn symmetric_noise(d: usize, eps: f64, rng: &mut SplitMix64) -> DMatrix<f64> {
    if eps == 0.0 {
        return DMatrix::zeros(d, d);
    }
    let g = DMatrix::from_fn(d, d, |_, _| rng.normal());
    let s = (&g + g.transpose()) * 0.5;
    &s * (eps / operator_norm(&s))
}

/// Data drawn uniformly from `{±a_1, …, ±a_k}` for random orthonormal `a_j`,
/// with the planted witness `R = Σ_j vec(a_j a_jᵀ + E_j) vec(a_j a_jᵀ)ᵀ`,
/// `‖E_j‖_op = eps`, so that `M(R x^{⊗2}) = x xᵀ + E_j` on every sample.
pub fn gen_regular_decodable(d: usize, k: usize, m: usize, eps: f64, tau: f64, seed: u64) -> Result<(DataSet, SpectralModel)> {
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= d, got k={k}, d={d}")));
    }
    if eps < 0.0 || tau < 1.0 {
        return Err(Error::InvalidArgument("need eps >= 0 and tau >= 1".into()));
    }
    let mut rng = SplitMix64::stream(seed, 0);
    let a = random_orthonormal(d, k, &mut rng);
    let mut atoms = Vec::with_capacity(k);
    for j in 0..k {
        let aj = a.column(j).into_owned();
        let target = &aj * aj.transpose() + symmetric_noise(d, eps, &mut rng);
        let mut u = flatten(&target);
        let w = norm2(&u);
        normalize(&mut u);
        let v = lift(aj.as_slice(), 2)?.entries;
        atoms.push(SpectralAtom { weight: w, u, v });
    }
    let samples: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut r = SplitMix64::stream(seed, i as u64 + 1);
            let j = r.below(k);
            let s = r.sign();
            a.column(j).iter().map(|v| s * v).collect()
        })
        .collect();
    let total: f64 = atoms.iter().map(|a| a.weight).sum();
    let radius = (tau * k as f64).max(total);
    let mut ds = DataSet::new(d, samples, seed, "regular_decodable")?;
    ds.noise = eps;
    ds.normalized = true;
    Ok((ds, SpectralModel { d, radius, atoms }))
}

/// Dictionary-model data: columns `x_j = A* y_j + noise·η_j` with `A*`
/// uniform on `[-1,1]`, `y_j` carrying `k` random ±1 entries and `η`
/// uniform on `[-1,1]`.
#[derive(Debug, Clone)]
pub struct DictionaryData {
    pub x: DMatrix<f64>,
    pub codes: DMatrix<f64>,
    pub spec: DictionarySpec,
    pub seed: u64,
}

impl DictionaryData {
    pub fn to_dataset(&self) -> DataSet {
        let samples = (0..self.x.ncols()).map(|j| self.x.column(j).iter().copied().collect()).collect();
        let mut ds = DataSet::new(self.x.nrows(), samples, self.seed, "dictionary").expect("columns share dimension");
        ds.noise = self.spec.noise;
        ds
    }
}

pub fn gen_dictionary(d: usize, r: usize, k: usize, n: usize, noise: f64, seed: u64) -> Result<DictionaryData> {
    if d == 0 || r == 0 || n == 0 || k == 0 || k > r || noise < 0.0 {
        return Err(Error::InvalidArgument(format!("invalid dictionary dims d={d} r={r} k={k} N={n} noise={noise}")));
    }
    let mut rng = SplitMix64::stream(seed, 0);
    let a_star = DMatrix::from_fn(d, r, |_, _| rng.uniform_range(-1.0, 1.0));
    let spec = DictionarySpec { a_star, k, noise };
    let (x, codes) = dictionary_columns(&spec, n, seed);
    Ok(DictionaryData { x, codes, spec, seed })
}

/// `count` columns drawn from the model of `spec`, column `j` from stream
/// `j + 1` of `seed`.
pub fn dictionary_columns(spec: &DictionarySpec, count: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (d, r) = spec.a_star.shape();
    let cols: Vec<(Vec<f64>, Vec<f64>)> = (0..count)
        .into_par_iter()
        .map(|j| {
            let mut rng = SplitMix64::stream(seed, j as u64 + 1);
            let mut y = vec![0.0; r];
            for l in rng.subset(r, spec.k) {
                y[l] = rng.sign();
            }
            let mut x = (&spec.a_star * DVector::from_column_slice(&y)).as_slice().to_vec();
            for v in x.iter_mut() {
                *v += spec.noise * rng.uniform_range(-1.0, 1.0);
            }
            (x, y)
        })
        .collect();
    let x = DMatrix::from_fn(d, count, |i, j| cols[j].0[i]);
    let codes = DMatrix::from_fn(r, count, |l, j| cols[j].1[l]);
    (x, codes)
}

/// Quadratic constraints `⟨c_i, x^{⊗2}⟩ = 0`, each `c_i` a length-`d²` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticConstraints {
    pub d: usize,
    pub c: Vec<Vec<f64>>,
}

impl QuadraticConstraints {
    /// Symmetrized `d×d` matrices of the constraints.
    fn sym(&self) -> Vec<DMatrix<f64>> {
        self.c
            .iter()
            .map(|c| {
                let m = DMatrix::from_row_slice(self.d, self.d, c);
                (&m + m.transpose()) * 0.5
            })
            .collect()
    }

    pub fn max_residual(&self, x: &[f64]) -> f64 {
        let z = lift(x, 2).expect("small lift");
        self.c.iter().map(|c| crate::linalg::dot(c, &z.entries).abs()).fold(0.0, f64::max)
    }

    /// Random constraints whose common zero set contains at least the
    /// planted points: the complement of a `k`-dimensional subspace of
    /// `ℝ^{d²}` spanned by lifted random points and, past the symmetric
    /// dimension, antisymmetric directions.
    pub fn random(d: usize, k: usize, seed: u64) -> Result<Self> {
        let n = d * d;
        if k > n {
            return Err(Error::InvalidArgument(format!("need k <= d² = {n}, got {k}")));
        }
        let mut rng = SplitMix64::stream(seed, 0);
        let sym_dim = d * (d + 1) / 2;
        let mut span = DMatrix::<f64>::zeros(n, n);
        for j in 0..k {
            let col = if j < sym_dim {
                let w = rng.unit_vector(d);
                lift(&w, 2)?.entries
            } else {
                let g = DMatrix::from_fn(d, d, |_, _| rng.normal());
                flatten(&(&g - g.transpose()))
            };
            span.set_column(j, &DVector::from_vec(col));
        }
        for j in k..n {
            span.set_column(j, &DVector::from_vec(rng.normal_vec(n)));
        }
        let q = orthonormal_columns(&span);
        let c = (k..n).map(|j| q.column(j).iter().copied().collect()).collect();
        Ok(Self { d, c })
    }
}

/// Levenberg-Marquardt descent of `Σ_i ⟨c_i, x^{⊗2}⟩²` on the unit sphere.
/// Returns the final point and its max residual.
pub fn project_to_variety(cons: &QuadraticConstraints, x0: &[f64]) -> (Vec<f64>, f64) {
    let mut x = DVector::from_column_slice(x0);
    x /= x.norm();
    if cons.c.is_empty() {
        let v = x.as_slice().to_vec();
        return (v, 0.0);
    }
    let mats = cons.sym();
    let resid = |x: &DVector<f64>| DVector::from_iterator(mats.len(), mats.iter().map(|c| x.dot(&(c * x))));
    let d = cons.d;
    let mut r = resid(&x);
    let mut mu = 1e-3;
    for _ in 0..300 {
        if r.amax() <= 1e-14 {
            break;
        }
        let p = DMatrix::identity(d, d) - &x * x.transpose();
        let mut j = DMatrix::zeros(mats.len(), d);
        for (i, c) in mats.iter().enumerate() {
            let row = (c * &x * 2.0).transpose() * &p;
            j.set_row(i, &row);
        }
        let jt = j.transpose();
        let h = &jt * &j;
        let grad = &jt * &r;
        let mut improved = false;
        for _ in 0..30 {
            let lhs = &h + DMatrix::identity(d, d) * mu;
            let step = match lhs.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => break,
            };
            let mut xn = &x + &p * step;
            xn /= xn.norm();
            let rn = resid(&xn);
            if rn.norm() < r.norm() {
                x = xn;
                r = rn;
                mu = (mu / 3.0).max(1e-15);
                improved = true;
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            break;
        }
    }
    let v = x.as_slice().to_vec();
    let res = cons.max_residual(&v);
    (v, res)
}

/// Samples on `{x : ‖x‖ = 1, ⟨c_i, x^{⊗2}⟩ = 0}`; each draw is projected
/// and kept only if its residual is at most `1e-8`.
pub fn sample_variety(cons: &QuadraticConstraints, m: usize, seed: u64, budget_per_sample: usize) -> Result<DataSet> {
    let d = cons.d;
    let samples: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut rng = SplitMix64::stream(seed, i as u64 + 1);
            for _ in 0..budget_per_sample {
                let (x, res) = project_to_variety(cons, &rng.unit_vector(d));
                if res <= 1e-8 {
                    return Ok(x);
                }
            }
            Err(Error::RejectionBudget(budget_per_sample))
        })
        .collect::<Result<_>>()?;
    let mut ds = DataSet::new(d, samples, seed, "manifold_s2")?;
    ds.normalized = true;
    Ok(ds)
}

pub const DEFAULT_REJECTION_BUDGET: usize = 200;

pub fn gen_manifold_s2(d: usize, k: usize, m: usize, seed: u64) -> Result<(DataSet, QuadraticConstraints)> {
    let cons = QuadraticConstraints::random(d, k, seed)?;
    let ds = sample_variety(&cons, m, seed, DEFAULT_REJECTION_BUDGET)?;
    Ok((ds, cons))
}

pub fn dataset_to_text(ds: &DataSet) -> String {
    let mut out = format!("dataset {} {} {} {}\n", ds.dim, ds.len(), ds.provenance, ds.seed);
    for s in &ds.samples {
        let row: Vec<String> = s.iter().map(|&v| fmt_real(v)).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn dataset_from_text(text: &str) -> Result<DataSet> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
    if header.len() != 5 || header[0] != "dataset" {
        return Err(Error::Parse("expected header `dataset d m family seed`".into()));
    }
    let perr = |e: &dyn std::fmt::Display| Error::Parse(e.to_string());
    let d: usize = header[1].parse().map_err(|e| perr(&e))?;
    let m: usize = header[2].parse().map_err(|e| perr(&e))?;
    let seed: u64 = header[4].parse().map_err(|e| perr(&e))?;
    let mut samples = Vec::with_capacity(m);
    for _ in 0..m {
        let line = lines.next().ok_or_else(|| Error::Parse("missing sample line".into()))?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| perr(&e)))
            .collect::<Result<_>>()?;
        samples.push(row);
    }
    let mut ds = DataSet::new(d, samples, seed, header[3])?;
    ds.normalized = header[3] != "dictionary";
    Ok(ds)
}

pub fn matrix_to_text(tag: &str, m: &DMatrix<f64>) -> String {
    let mut out = format!("{tag} {} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|&v| fmt_real(v)).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn matrix_from_text(tag: &str, text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
    if header.len() != 3 || header[0] != tag {
        return Err(Error::Parse(format!("expected header `{tag} rows cols`")));
    }
    let perr = |e: &dyn std::fmt::Display| Error::Parse(e.to_string());
    let r: usize = header[1].parse().map_err(|e| perr(&e))?;
    let c: usize = header[2].parse().map_err(|e| perr(&e))?;
    let mut vals = Vec::with_capacity(r * c);
    for _ in 0..r {
        let line = lines.next().ok_or_else(|| Error::Parse("missing matrix row".into()))?;
        for t in line.split_whitespace() {
            vals.push(t.parse::<f64>().map_err(|e| perr(&e))?);
        }
    }
    if vals.len() != r * c {
        return Err(Error::DimensionMismatch { expected: r * c, got: vals.len() });
    }
    Ok(DMatrix::from_row_slice(r, c, &vals))
}
