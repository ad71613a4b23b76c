use std::fmt::Write as _;

use nalgebra::DMatrix;

use super::denoiser::{ConvexDenoiser, DenoiseResult};
use super::mask::{GroupCode, SampleMask};
use super::{epsilon_star, per_entry_error};
use crate::data_gen::{dictionary_columns, DictionaryData};
use crate::error::{Error, Result};
use crate::framework::fmt_real;
use crate::rng::derive_seed;

/// Denoises `X` onto `Q`, then keeps a Bernoulli(`rho`) sample of the result.
pub fn group_encode(x: &DMatrix<f64>, den: &dyn ConvexDenoiser, rho: f64, seed: u64) -> Result<(GroupCode, DenoiseResult)> {
    let mask = SampleMask::bernoulli(x.nrows(), x.ncols(), rho, seed)?;
    let z = den.full_denoise(x)?;
    let values = mask.included.iter().map(|&i| {
        let (r, c) = mask.position(i);
        z.c[(r, c)]
    });
    let values = values.collect();
    Ok((GroupCode { mask, values }, z))
}

/// Refits `Q` to the sampled entries.
pub fn group_decode(code: &GroupCode, den: &dyn ConvexDenoiser) -> Result<DenoiseResult> {
    den.masked_fit(code.mask.d, code.mask.n, &code.mask.included, &code.values)
}

/// Code for one example: a `d×1` masked sample of its column after joint
/// denoising with `N − 1` context samples.
pub type SingleCode = GroupCode;

/// `context(count, seed)` draws fresh samples from the data distribution as
/// the columns of a `d×count` matrix.
pub fn single_encode<F>(x: &[f64], mut context: F, den: &dyn ConvexDenoiser, rho: f64, n: usize, seed: u64) -> Result<SingleCode>
where
    F: FnMut(usize, u64) -> Result<DMatrix<f64>>,
{
    if n == 0 {
        return Err(Error::InvalidArgument("group size N must be at least 1".into()));
    }
    let d = x.len();
    let ctx = context(n - 1, derive_seed(seed, 1))?;
    if ctx.shape() != (d, n - 1) {
        return Err(Error::DimensionMismatch { expected: d * (n - 1), got: ctx.len() });
    }
    let mut joint = DMatrix::zeros(d, n);
    joint.view_mut((0, 0), (d, n - 1)).copy_from(&ctx);
    joint.set_column(n - 1, &nalgebra::DVector::from_column_slice(x));
    let z = den.full_denoise(&joint)?;
    let mask = SampleMask::bernoulli(d, 1, rho, derive_seed(seed, 2))?;
    let values = mask.included.iter().map(|&i| z.c[(i, n - 1)]).collect();
    Ok(GroupCode { mask, values })
}

/// Joint masked fit over the codes of `N − 1` fresh samples followed by the
/// target; returns the target's column.
pub fn single_decode(target: &SingleCode, fresh: &[SingleCode], den: &dyn ConvexDenoiser) -> Result<(Vec<f64>, DenoiseResult)> {
    let d = target.mask.d;
    let n = fresh.len() + 1;
    let mut observed = Vec::new();
    let mut values = Vec::new();
    let codes: Vec<&SingleCode> = fresh.iter().chain(std::iter::once(target)).collect();
    let mut per_col: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for c in &codes {
        if c.mask.d != d || c.mask.n != 1 {
            return Err(Error::DimensionMismatch { expected: d, got: c.mask.d });
        }
        per_col.push(c.mask.included.iter().copied().zip(c.values.iter().copied()).collect());
    }
    // Row-major order over the joint d×N matrix.
    let mut cursor = vec![0usize; n];
    for i in 0..d {
        for (j, col) in per_col.iter().enumerate() {
            if cursor[j] < col.len() && col[cursor[j]].0 == i {
                observed.push(i * n + j);
                values.push(col[cursor[j]].1);
                cursor[j] += 1;
            }
        }
    }
    let res = den.masked_fit(d, n, &observed, &values)?;
    let col = res.c.column(n - 1).iter().copied().collect();
    Ok((col, res))
}

/// One row of the `seed,rho,eps_star_hat,denoise_err,decode_err,code_len` table.
#[derive(Debug, Clone, PartialEq)]
pub struct DictRow {
    pub seed: u64,
    pub rho: f64,
    pub eps_star_hat: f64,
    pub denoise_err: f64,
    pub decode_err: f64,
    pub code_len: usize,
    /// False if any solve stopped on its iteration budget.
    pub converged: bool,
}

pub fn dict_csv(rows: &[DictRow]) -> String {
    let mut s = String::from("seed,rho,eps_star_hat,denoise_err,decode_err,code_len\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.seed,
            fmt_real(r.rho),
            fmt_real(r.eps_star_hat),
            fmt_real(r.denoise_err),
            fmt_real(r.decode_err),
            r.code_len
        );
    }
    s
}

#[derive(Debug, Clone)]
pub struct GroupExperiment {
    pub row: DictRow,
    pub code: GroupCode,
    pub z: DenoiseResult,
    pub x_hat: DenoiseResult,
}

/// Group encode and decode of planted data, with errors per entry against `X`.
pub fn group_experiment(data: &DictionaryData, den: &dyn ConvexDenoiser, rho: f64, seed: u64) -> Result<GroupExperiment> {
    let eps = epsilon_star(&data.spec, &data.x)?;
    let (code, z) = group_encode(&data.x, den, rho, seed)?;
    let x_hat = group_decode(&code, den)?;
    let row = DictRow {
        seed,
        rho,
        eps_star_hat: eps,
        denoise_err: per_entry_error(&z.c, &data.x),
        decode_err: per_entry_error(&x_hat.c, &data.x),
        code_len: code.code_len(),
        converged: z.converged && x_hat.converged,
    };
    Ok(GroupExperiment { row, code, z, x_hat })
}

/// Single-example pipeline on the first column of `data`; context and fresh
/// samples come from the same planted model.
pub fn single_experiment(data: &DictionaryData, den: &dyn ConvexDenoiser, rho: f64, seed: u64) -> Result<DictRow> {
    let n = data.x.ncols();
    let d = data.x.nrows();
    let sampler = |count: usize, s: u64| -> Result<DMatrix<f64>> { Ok(dictionary_columns(&data.spec, count, s).0) };
    let x: Vec<f64> = data.x.column(0).iter().copied().collect();
    let target = single_encode(&x, sampler, den, rho, n, derive_seed(seed, 0))?;
    let fresh_x = dictionary_columns(&data.spec, n.saturating_sub(1), derive_seed(seed, 3)).0;
    let fresh = (0..n - 1)
        .map(|j| {
            let xj: Vec<f64> = fresh_x.column(j).iter().copied().collect();
            single_encode(&xj, sampler, den, rho, n, derive_seed(seed, 10 + j as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let (col, res) = single_decode(&target, &fresh, den)?;
    let x0 = data.x.column(0).into_owned();
    let err = col.iter().zip(x0.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>() / d as f64;
    let eps = epsilon_star(&data.spec, &DMatrix::from_column_slice(d, 1, x0.as_slice()))?;
    Ok(DictRow {
        seed,
        rho,
        eps_star_hat: eps,
        denoise_err: f64::NAN,
        decode_err: err,
        code_len: target.code_len(),
        converged: res.converged,
    })
}
