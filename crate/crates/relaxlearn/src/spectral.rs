//! Spectral autoencoders on lifted data: Frank-Wolfe over a Schatten-1 ball
//! for the operator-norm residual objective, a smooth Schatten-p variant,
//! and factor/decode helpers.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::framework::{fmt_real, DataSet, HypothesisPair};
use crate::linalg::{lift, matricize_flat, nuclear_lmo, operator_norm, top_singular_pair, v_max_matrix, Atom, SvdOptions};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularDecodableSpec {
    pub k: usize,
    pub eps: f64,
    pub tau: f64,
}

impl RegularDecodableSpec {
    pub fn new(k: usize, eps: f64, tau: f64) -> Result<Self> {
        if eps < 0.0 || tau < 1.0 {
            return Err(Error::InvalidArgument(format!("need eps >= 0 and tau >= 1, got eps={eps}, tau={tau}")));
        }
        Ok(Self { k, eps, tau })
    }
}

/// `weight · u vᵀ` with unit `u`, `v` in the lifted space.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralAtom {
    pub weight: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    pub d: usize,
    pub radius: f64,
    pub atoms: Vec<SpectralAtom>,
}

impl SpectralModel {
    pub fn zero(d: usize, radius: f64) -> Self {
        Self { d, radius, atoms: Vec::new() }
    }

    pub fn lifted_dim(&self) -> usize {
        self.d * self.d
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn rank(&self) -> usize {
        self.atoms.iter().filter(|a| a.weight > 0.0).count()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.lifted_dim();
        let mut r = DMatrix::zeros(n, n);
        for a in &self.atoms {
            let u = DVector::from_column_slice(&a.u);
            let v = DVector::from_column_slice(&a.v);
            r.ger(a.weight, &u, &v, 1.0);
        }
        r
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("sa {} {} {}\n", self.d, fmt_real(self.radius), self.atoms.len());
        for a in &self.atoms {
            let mut fields = vec![fmt_real(a.weight)];
            fields.extend(a.u.iter().map(|&x| fmt_real(x)));
            fields.extend(a.v.iter().map(|&x| fmt_real(x)));
            let _ = writeln!(out, "{}", fields.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
        if header.len() != 4 || header[0] != "sa" {
            return Err(Error::Parse("expected header `sa d radius n_atoms`".into()));
        }
        let perr = |e: &dyn std::fmt::Display| Error::Parse(e.to_string());
        let d: usize = header[1].parse().map_err(|e| perr(&e))?;
        let radius: f64 = header[2].parse().map_err(|e| perr(&e))?;
        let n: usize = header[3].parse().map_err(|e| perr(&e))?;
        let dim = d * d;
        let mut atoms = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines.next().ok_or_else(|| Error::Parse("missing atom line".into()))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| perr(&e)))
                .collect::<Result<_>>()?;
            if vals.len() != 1 + 2 * dim {
                return Err(Error::DimensionMismatch { expected: 1 + 2 * dim, got: vals.len() });
            }
            atoms.push(SpectralAtom {
                weight: vals[0],
                u: vals[1..1 + dim].to_vec(),
                v: vals[1 + dim..].to_vec(),
            });
        }
        Ok(Self { d, radius, atoms })
    }
}

fn lifts_of(data: &DataSet) -> Result<Vec<DVector<f64>>> {
    data.samples.iter().map(|x| Ok(DVector::from_vec(lift(x, 2)?.entries))).collect()
}

/// `M(R z − z)`.
pub fn residual(r: &DMatrix<f64>, z: &DVector<f64>, d: usize) -> DMatrix<f64> {
    let e = r * z - z;
    matricize_flat(e.as_slice(), d)
}

/// Mean operator-norm residual of a dense operator over pre-lifted samples.
pub fn objective_dense(r: &DMatrix<f64>, lifts: &[DVector<f64>], d: usize) -> f64 {
    let vals: Vec<f64> = lifts.par_iter().map(|z| operator_norm(&residual(r, z, d))).collect();
    vals.iter().sum::<f64>() / lifts.len() as f64
}

pub fn objective_value(model: &SpectralModel, data: &DataSet) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.dim != model.d {
        return Err(Error::DimensionMismatch { expected: model.d, got: data.dim });
    }
    data.check_normalized()?;
    Ok(objective_dense(&model.to_dense(), &lifts_of(data)?, model.d))
}

/// Subgradient `(u⊗v) zᵀ` of `R ↦ ‖M(Rz − z)‖_op`, as a rank-one atom.
pub fn subgradient_dense(r: &DMatrix<f64>, z: &DVector<f64>, d: usize) -> Result<Atom> {
    let e = residual(r, z, d);
    if e.iter().all(|&x| x == 0.0) {
        return Ok(Atom {
            coeff: 0.0,
            u: DVector::zeros(d * d),
            v: DVector::zeros(d * d),
        });
    }
    let t = top_singular_pair(&e, &SvdOptions::default())?;
    let uv = lift_pair(&t.u, &t.v);
    Ok(Atom { coeff: 1.0, u: uv, v: z.clone() })
}

fn lift_pair(u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(u.len() * v.len(), u.iter().flat_map(|&a| v.iter().map(move |&b| a * b)))
}

pub fn subgradient_atom(model: &SpectralModel, x: &[f64]) -> Result<Atom> {
    if x.len() != model.d {
        return Err(Error::DimensionMismatch { expected: model.d, got: x.len() });
    }
    let z = DVector::from_vec(lift(x, 2)?.entries);
    subgradient_dense(&model.to_dense(), &z, model.d)
}

/// Point at which the non-smooth Frank-Wolfe step linearizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Linearization {
    /// Subgradient at the current iterate only.
    Current,
    /// `eta · Σ_τ g_τ + 2 R_t`: accumulated subgradients plus a quadratic
    /// pull toward the origin, which keeps the atom choice from locking onto
    /// the most frequent residual direction.
    Regularized { eta: f64 },
}

#[derive(Debug, Clone)]
pub struct FwOptions {
    pub radius: f64,
    pub steps: usize,
    pub averaging_window: usize,
    pub batch: Option<usize>,
    pub seed: u64,
    pub linearization: Linearization,
}

impl Default for FwOptions {
    fn default() -> Self {
        Self {
            radius: 2.0,
            steps: 400,
            averaging_window: 1,
            batch: None,
            seed: 0,
            linearization: Linearization::Regularized { eta: 0.5 },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub objective: f64,
    pub dualgap: Option<f64>,
    pub rank: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FwTrace {
    pub rows: Vec<TraceRow>,
}

impl FwTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,objective,dualgap,rank\n");
        for r in &self.rows {
            let gap = r.dualgap.map(fmt_real).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{}", r.step, fmt_real(r.objective), gap, r.rank);
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct FwResult {
    pub model: SpectralModel,
    pub objective: f64,
    pub trace: FwTrace,
}

/// Frank-Wolfe iterate stored as atom coefficients plus its dense matrix.
struct Iterate {
    coeffs: Vec<f64>,
    dense: DMatrix<f64>,
}

fn model_from(d: usize, radius: f64, atoms: &[(DVector<f64>, DVector<f64>)], coeffs: &[f64]) -> SpectralModel {
    SpectralModel {
        d,
        radius,
        atoms: atoms
            .iter()
            .zip(coeffs)
            .map(|((u, v), &w)| SpectralAtom {
                weight: w,
                u: u.as_slice().to_vec(),
                v: v.as_slice().to_vec(),
            })
            .collect(),
    }
}

fn push_atom(atoms: &mut Vec<(DVector<f64>, DVector<f64>)>, lmo: &Atom, n: usize) {
    if lmo.coeff == 0.0 {
        let mut e = DVector::zeros(n);
        e[0] = 1.0;
        atoms.push((e.clone(), e));
    } else {
        // coeff is -radius; fold the sign into u so weights stay nonnegative.
        atoms.push((-&lmo.u, lmo.v.clone()));
    }
}

/// Non-smooth Frank-Wolfe on the mean operator-norm residual over the
/// Schatten-1 ball, step size `2/(t+2)`; returns the best iterate (or window
/// average) by full-data objective.
pub fn fw_nonsmooth(data: &DataSet, opts: &FwOptions) -> Result<FwResult> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(opts.radius > 0.0) {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    data.check_normalized()?;
    let d = data.dim;
    let n = d * d;
    let lifts = lifts_of(data)?;
    let m = lifts.len();
    let svd = SvdOptions { seed: opts.seed, ..SvdOptions::default() };

    let mut atoms: Vec<(DVector<f64>, DVector<f64>)> = Vec::new();
    let mut cur = Iterate { coeffs: Vec::new(), dense: DMatrix::zeros(n, n) };
    let mut gsum = DMatrix::<f64>::zeros(n, n);
    let mut best_obj = objective_dense(&cur.dense, &lifts, d);
    let mut best_coeffs: Vec<f64> = Vec::new();
    let mut window: VecDeque<(Vec<f64>, DMatrix<f64>)> = VecDeque::new();
    let mut trace = FwTrace::default();

    for t in 0..opts.steps {
        let batch: Vec<usize> = match opts.batch {
            Some(b) if b < m => SplitMix64::stream(opts.seed, t as u64).subset(m, b),
            _ => (0..m).collect(),
        };
        let subs: Vec<Atom> = batch
            .par_iter()
            .map(|&i| subgradient_dense(&cur.dense, &lifts[i], d))
            .collect::<Result<_>>()?;
        let mut g = DMatrix::<f64>::zeros(n, n);
        for s in &subs {
            if s.coeff != 0.0 {
                g.ger(1.0 / batch.len() as f64, &s.u, &s.v, 1.0);
            }
        }
        let direction = match opts.linearization {
            Linearization::Current => g,
            Linearization::Regularized { eta } => {
                gsum += &g;
                &gsum * eta + &cur.dense * 2.0
            }
        };
        let lmo = nuclear_lmo(&direction, opts.radius, &svd)?;
        let gamma = 2.0 / (t as f64 + 2.0);
        cur.coeffs.iter_mut().for_each(|c| *c *= 1.0 - gamma);
        cur.coeffs.push(gamma * opts.radius);
        cur.dense *= 1.0 - gamma;
        if lmo.coeff != 0.0 {
            cur.dense.ger(gamma * lmo.coeff, &lmo.u, &lmo.v, 1.0);
        }
        push_atom(&mut atoms, &lmo, n);

        let obj = objective_dense(&cur.dense, &lifts, d);
        if obj < best_obj {
            best_obj = obj;
            best_coeffs = cur.coeffs.clone();
        }
        if opts.averaging_window > 1 {
            window.push_back((cur.coeffs.clone(), cur.dense.clone()));
            if window.len() > opts.averaging_window {
                window.pop_front();
            }
            let w = window.len() as f64;
            let mut avg_c = vec![0.0; cur.coeffs.len()];
            let mut avg_r = DMatrix::<f64>::zeros(n, n);
            for (c, r) in &window {
                for (a, b) in avg_c.iter_mut().zip(c) {
                    *a += b / w;
                }
                avg_r += r / w;
            }
            let avg_obj = objective_dense(&avg_r, &lifts, d);
            if avg_obj < best_obj {
                best_obj = avg_obj;
                best_coeffs = avg_c;
            }
        }
        trace.rows.push(TraceRow {
            step: t + 1,
            objective: obj,
            dualgap: None,
            rank: cur.coeffs.iter().filter(|&&c| c > 0.0).count(),
        });
    }
    let mut coeffs = best_coeffs;
    coeffs.resize(atoms.len(), 0.0);
    Ok(FwResult {
        model: model_from(d, opts.radius, &atoms, &coeffs),
        objective: best_obj,
        trace,
    })
}

fn check_even(p: usize) -> Result<()> {
    if p < 2 || p % 2 != 0 {
        return Err(Error::InvalidArgument(format!("Schatten exponent must be even and >= 2, got {p}")));
    }
    Ok(())
}

/// `(EᵀE)^j` by repeated multiplication.
fn gram_power(e: &DMatrix<f64>, j: usize) -> DMatrix<f64> {
    let g = e.transpose() * e;
    let mut out = DMatrix::identity(e.ncols(), e.ncols());
    for _ in 0..j {
        out = &out * &g;
    }
    out
}

/// `‖E‖²_{S_p}` for even `p`.
pub fn schatten_sq_even(e: &DMatrix<f64>, p: usize) -> f64 {
    let tr = gram_power(e, p / 2).trace().max(0.0);
    tr.powf(2.0 / p as f64)
}

/// Gradient of `E ↦ ‖E‖²_{S_p}`: `2 ‖E‖_{S_p}^{2−p} E (EᵀE)^{p/2−1}`, zero at `E = 0`.
pub fn schatten_sq_grad(e: &DMatrix<f64>, p: usize) -> DMatrix<f64> {
    let tr = gram_power(e, p / 2).trace();
    if tr <= 0.0 {
        return DMatrix::zeros(e.nrows(), e.ncols());
    }
    let norm = tr.powf(1.0 / p as f64);
    e * gram_power(e, p / 2 - 1) * (2.0 * norm.powf(2.0 - p as f64))
}

pub fn smooth_objective(r: &DMatrix<f64>, lifts: &[DVector<f64>], d: usize, p: usize) -> f64 {
    let vals: Vec<f64> = lifts.par_iter().map(|z| schatten_sq_even(&residual(r, z, d), p)).collect();
    vals.iter().sum::<f64>() / lifts.len() as f64
}

pub fn smooth_gradient(r: &DMatrix<f64>, lifts: &[DVector<f64>], d: usize, p: usize) -> DMatrix<f64> {
    let n = d * d;
    let parts: Vec<DVector<f64>> = lifts
        .par_iter()
        .map(|z| {
            let g = schatten_sq_grad(&residual(r, z, d), p);
            DVector::from_vec(crate::linalg::flatten(&g))
        })
        .collect();
    let mut out = DMatrix::zeros(n, n);
    for (g, z) in parts.iter().zip(lifts) {
        out.ger(1.0 / lifts.len() as f64, g, z, 1.0);
    }
    out
}

#[derive(Debug, Clone)]
pub struct SmoothFwOptions {
    pub radius: f64,
    pub p: usize,
    pub steps: usize,
    pub line_search: bool,
    pub gap_tol: f64,
    pub seed: u64,
}

impl Default for SmoothFwOptions {
    fn default() -> Self {
        Self {
            radius: 2.0,
            p: 4,
            steps: 600,
            line_search: true,
            gap_tol: 0.0,
            seed: 0,
        }
    }
}

/// Golden-section search of a convex function on `[0, 1]`, also checking
/// the endpoint 1. Returns the step and its value.
fn line_search_unit(f: impl Fn(f64) -> f64) -> (f64, f64) {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..80 {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = f(b);
        }
    }
    let mid = 0.5 * (lo + hi);
    let mut best = (mid, f(mid));
    let f1 = f(1.0);
    if f1 < best.1 {
        best = (1.0, f1);
    }
    best
}

/// Frank-Wolfe on the smooth objective `mean ‖M(Rz − z)‖²_{S_p}` with exact
/// gradients and duality-gap tracking.
pub fn fw_smooth_schatten(data: &DataSet, opts: &SmoothFwOptions) -> Result<FwResult> {
    check_even(opts.p)?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(opts.radius > 0.0) {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    let d = data.dim;
    let n = d * d;
    let p = opts.p;
    let lifts = lifts_of(data)?;
    let svd = SvdOptions { seed: opts.seed, ..SvdOptions::default() };

    let mut atoms: Vec<(DVector<f64>, DVector<f64>)> = Vec::new();
    let mut coeffs: Vec<f64> = Vec::new();
    let mut r = DMatrix::<f64>::zeros(n, n);
    let mut obj = smooth_objective(&r, &lifts, d, p);
    let mut trace = FwTrace::default();

    for t in 0..opts.steps {
        let g = smooth_gradient(&r, &lifts, d, p);
        let lmo = nuclear_lmo(&g, opts.radius, &svd)?;
        let s = lmo.to_matrix();
        let gap = g.dot(&(&r - &s));
        trace.rows.push(TraceRow {
            step: t,
            objective: obj,
            dualgap: Some(gap),
            rank: coeffs.iter().filter(|&&c| c > 0.0).count(),
        });
        if gap <= opts.gap_tol {
            break;
        }
        let dir = &s - &r;
        let (gamma, new_obj) = if opts.line_search {
            let base: Vec<(DMatrix<f64>, DMatrix<f64>)> = lifts
                .iter()
                .map(|z| (residual(&r, z, d), matricize_flat((&dir * z).as_slice(), d)))
                .collect();
            let phi = |gm: f64| {
                let v: Vec<f64> = base.par_iter().map(|(e, de)| schatten_sq_even(&(e + de * gm), p)).collect();
                v.iter().sum::<f64>() / base.len() as f64
            };
            let (gm, val) = line_search_unit(phi);
            if val <= obj {
                (gm, val)
            } else {
                (0.0, obj)
            }
        } else {
            let gm = 2.0 / (t as f64 + 2.0);
            (gm, f64::NAN)
        };
        coeffs.iter_mut().for_each(|c| *c *= 1.0 - gamma);
        coeffs.push(gamma * opts.radius);
        push_atom(&mut atoms, &lmo, n);
        r = &r * (1.0 - gamma) + &s * gamma;
        obj = if new_obj.is_nan() { smooth_objective(&r, &lifts, d, p) } else { new_obj };
    }
    Ok(FwResult {
        model: model_from(d, opts.radius, &atoms, &coeffs),
        objective: obj,
        trace,
    })
}

#[derive(Debug, Clone)]
pub struct EncDecFactors {
    /// `k' × d²` encoder.
    pub a: DMatrix<f64>,
    /// `d² × k'` decoder.
    pub b: DMatrix<f64>,
    pub d: usize,
    /// Total weight of atoms dropped by truncation (0 when exact).
    pub dropped_weight: f64,
}

impl EncDecFactors {
    pub fn is_lossy(&self) -> bool {
        self.dropped_weight > 0.0
    }
}

/// `R = AB` with rows of `A` equal to `w_i v_iᵀ` and columns of `B` equal to
/// `u_i`; keeps the `rank_cap` heaviest atoms when there are more.
pub fn factorize(model: &SpectralModel, rank_cap: usize) -> EncDecFactors {
    let mut order: Vec<usize> = (0..model.atoms.len()).filter(|&i| model.atoms[i].weight > 0.0).collect();
    order.sort_by(|&i, &j| model.atoms[j].weight.total_cmp(&model.atoms[i].weight).then(i.cmp(&j)));
    let dropped_weight = order.iter().skip(rank_cap).map(|&i| model.atoms[i].weight).sum();
    order.truncate(rank_cap);
    let n = model.lifted_dim();
    let kp = order.len();
    let a = DMatrix::from_fn(kp, n, |r, c| model.atoms[order[r]].weight * model.atoms[order[r]].v[c]);
    let b = DMatrix::from_fn(n, kp, |r, c| model.atoms[order[c]].u[r]);
    EncDecFactors { a, b, d: model.d, dropped_weight }
}

pub fn spectral_encode(f: &EncDecFactors, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != f.d {
        return Err(Error::DimensionMismatch { expected: f.d, got: x.len() });
    }
    let z = DVector::from_vec(lift(x, 2)?.entries);
    Ok((&f.a * z).as_slice().to_vec())
}

/// `v_max(B y)`.
pub fn spectral_decode(f: &EncDecFactors, y: &[f64]) -> Result<DVector<f64>> {
    if y.len() != f.b.ncols() {
        return Err(Error::DimensionMismatch { expected: f.b.ncols(), got: y.len() });
    }
    let by = &f.b * DVector::from_column_slice(y);
    v_max_matrix(&matricize_flat(by.as_slice(), f.d))
}

/// `min(‖x̂ − x‖, ‖x̂ + x‖)`.
pub fn sign_invariant_error(xhat: &[f64], x: &[f64]) -> f64 {
    let a: f64 = xhat.iter().zip(x).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let b: f64 = xhat.iter().zip(x).map(|(p, q)| (p + q) * (p + q)).sum::<f64>().sqrt();
    a.min(b)
}

pub fn spectral_pair(f: &EncDecFactors) -> HypothesisPair {
    let enc = f.clone();
    let dec = f.clone();
    let d = f.d;
    HypothesisPair::new(
        Arc::new(move |x| spectral_encode(&enc, x).expect("dimension checked by caller")),
        Arc::new(move |y| {
            spectral_decode(&dec, y)
                .map(|v| v.as_slice().to_vec())
                .unwrap_or_else(|_| vec![0.0; d])
        }),
        f.a.nrows(),
    )
}
