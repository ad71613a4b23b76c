//! Tensor lifting, matricization and the spectral kernels built on them.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Default cap on the number of entries of a lifted vector.
pub const DEFAULT_LIFT_CAP: usize = 10_000_000;

/// Matrices at or below this size (in the smaller dimension) use a dense SVD.
pub const DENSE_SVD_LIMIT: usize = 64;

/// `x^{⊗s}` stored flat, multi-index `(i_1..i_s)` in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedVec {
    pub entries: Vec<f64>,
    pub base_dim: usize,
    pub power: u32,
}

#[derive(Debug, Clone)]
pub struct SingularTriple {
    pub sigma: f64,
    pub u: DVector<f64>,
    pub v: DVector<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SvdOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SvdOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 5000,
            seed: 0,
        }
    }
}

/// Rank-one matrix `coeff · u vᵀ`.
#[derive(Debug, Clone)]
pub struct Atom {
    pub coeff: f64,
    pub u: DVector<f64>,
    pub v: DVector<f64>,
}

impl Atom {
    pub fn to_matrix(&self) -> DMatrix<f64> {
        &self.u * self.v.transpose() * self.coeff
    }
}

pub fn lift(x: &[f64], s: u32) -> Result<LiftedVec> {
    lift_with_cap(x, s, DEFAULT_LIFT_CAP)
}

pub fn lift_with_cap(x: &[f64], s: u32, cap: usize) -> Result<LiftedVec> {
    if s == 0 {
        return Err(Error::InvalidArgument("tensor power must be >= 1".into()));
    }
    let d = x.len();
    let overflow = Error::DimensionOverflow { dim: d, power: s, cap };
    let len = d.checked_pow(s).ok_or(overflow)?;
    if len > cap {
        return Err(Error::DimensionOverflow { dim: d, power: s, cap });
    }
    let mut entries = x.to_vec();
    for _ in 1..s {
        let mut next = Vec::with_capacity(entries.len() * d);
        for &a in &entries {
            next.extend(x.iter().map(|&b| a * b));
        }
        entries = next;
    }
    Ok(LiftedVec {
        entries,
        base_dim: d,
        power: s,
    })
}

pub fn matricize(z: &LiftedVec) -> Result<DMatrix<f64>> {
    if z.power != 2 {
        return Err(Error::WrongPower(z.power));
    }
    Ok(matricize_flat(&z.entries, z.base_dim))
}

/// Row-major reshape of a length `d²` slice into a `d×d` matrix.
pub fn matricize_flat(entries: &[f64], d: usize) -> DMatrix<f64> {
    debug_assert_eq!(entries.len(), d * d);
    DMatrix::from_row_slice(d, d, entries)
}

/// Row-major flattening, the inverse of [`matricize_flat`].
pub fn flatten(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn top_singular_pair(m: &DMatrix<f64>, opts: &SvdOptions) -> Result<SingularTriple> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    if r.min(c) <= DENSE_SVD_LIMIT {
        Ok(dense_top_pair(m))
    } else {
        power_top_pair(m, opts)
    }
}

fn dense_top_pair(m: &DMatrix<f64>) -> SingularTriple {
    let svd = thin_svd(m);
    SingularTriple {
        sigma: svd.s[0],
        u: svd.u.column(0).into_owned(),
        v: svd.v_t.row(0).transpose().into_owned(),
    }
}

/// Thin SVD with singular values in descending order.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v_t: DMatrix<f64>,
}

impl ThinSvd {
    pub fn recompose(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, s) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * &self.v_t
    }

    /// Minimum-norm least-squares solution of `M w = y`, dropping singular
    /// values at or below `rel_eps · s_max`.
    pub fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        self.solve_with(y, 1e-12)
    }

    pub fn solve_with(&self, y: &DVector<f64>, rel_eps: f64) -> DVector<f64> {
        let top = self.s.first().copied().unwrap_or(0.0);
        let uty = self.u.transpose() * y;
        let mut out = DVector::zeros(self.v_t.ncols());
        for (j, &s) in self.s.iter().enumerate() {
            if s > rel_eps * top && s > 0.0 {
                out += self.v_t.row(j).transpose() * (uty[j] / s);
            }
        }
        out
    }
}

/// nalgebra's bidiagonal SVD, checked by recomposition. It can return wrong
/// vectors on exactly rank-deficient input; those cases fall back to
/// one-sided Jacobi.
pub fn thin_svd(m: &DMatrix<f64>) -> ThinSvd {
    let svd = m.clone().svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]).then(i.cmp(&j)));
    let (u, v_t) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
    let out = ThinSvd {
        u: DMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]),
        s: order.iter().map(|&i| svd.singular_values[i]).collect(),
        v_t: DMatrix::from_fn(order.len(), v_t.ncols(), |i, j| v_t[(order[i], j)]),
    };
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let tol = 1e-13 * scale * (m.nrows().max(m.ncols()) as f64);
    if (out.recompose() - m).amax() <= tol {
        return out;
    }
    jacobi_thin_svd(m)
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn jacobi_thin_svd(m: &DMatrix<f64>) -> ThinSvd {
    if m.nrows() < m.ncols() {
        let t = jacobi_thin_svd(&m.transpose());
        return ThinSvd { u: t.v_t.transpose(), s: t.s, v_t: t.u.transpose() };
    }
    let n = m.ncols();
    let mut w = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta == 0.0 { 1.0 } else { zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt()) };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..w.nrows() {
                    let (x, y) = (w[(k, p)], w[(k, q)]);
                    w[(k, p)] = c * x - s * y;
                    w[(k, q)] = s * x + c * y;
                }
                for k in 0..n {
                    let (x, y) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * x - s * y;
                    v[(k, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let mut u = DMatrix::zeros(m.nrows(), n);
    for (jj, &j) in order.iter().enumerate() {
        if norms[j] > 0.0 {
            u.set_column(jj, &(w.column(j) / norms[j]));
        }
    }
    // Complete zero columns of U to an orthonormal set.
    for jj in 0..n {
        if norms[order[jj]] > 0.0 {
            continue;
        }
        for e in 0..m.nrows() {
            let mut cand = DVector::<f64>::zeros(m.nrows());
            cand[e] = 1.0;
            for k in 0..n {
                if k != jj {
                    let proj = u.column(k).dot(&cand);
                    cand -= u.column(k) * proj;
                }
            }
            let cn = cand.norm();
            if cn > 1e-6 {
                u.set_column(jj, &(cand / cn));
                break;
            }
        }
    }
    ThinSvd {
        u,
        s: order.iter().map(|&j| norms[j]).collect(),
        v_t: DMatrix::from_fn(n, n, |i, k| v[(k, order[i])]),
    }
}

fn power_top_pair(m: &DMatrix<f64>, opts: &SvdOptions) -> Result<SingularTriple> {
    let fro2 = m.norm_squared();
    if fro2 == 0.0 {
        let mut rng = SplitMix64::new(opts.seed);
        return Ok(SingularTriple {
            sigma: 0.0,
            u: DVector::from_vec(rng.unit_vector(m.nrows())),
            v: DVector::from_vec(rng.unit_vector(m.ncols())),
        });
    }
    let mut rng = SplitMix64::new(opts.seed);
    let mut v = DVector::from_vec(rng.unit_vector(m.ncols()));
    for _ in 0..opts.max_iter {
        let mv = m * &v;
        let w = m.transpose() * &mv;
        let lambda = v.dot(&w);
        let resid = (&w - &v * lambda).norm();
        let wn = w.norm();
        if wn == 0.0 {
            return Err(Error::NoConvergence(opts.max_iter));
        }
        if resid <= opts.tol * fro2 {
            let sigma = mv.norm();
            let u = if sigma > 0.0 { mv / sigma } else { DVector::from_vec(rng.unit_vector(m.nrows())) };
            return Ok(SingularTriple { sigma, u, v });
        }
        v = w / wn;
    }
    Err(Error::NoConvergence(opts.max_iter))
}

/// Flip the sign so the largest-magnitude entry is positive (first index wins ties).
pub fn canonical_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.neg_mut();
    }
}

pub fn v_max(z: &LiftedVec) -> Result<DVector<f64>> {
    let m = matricize(z)?;
    v_max_matrix(&m)
}

/// Top right-singular vector of `m`, sign-canonicalized.
pub fn v_max_matrix(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    if m.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroInput);
    }
    let mut v = top_singular_pair(m, &SvdOptions::default())?.v;
    canonical_sign(&mut v);
    Ok(v)
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Schatten-`p` norm; pass `f64::INFINITY` for the operator norm.
pub fn schatten_norm(m: &DMatrix<f64>, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidSchatten(p));
    }
    let s = singular_values(m);
    let top = s.first().copied().unwrap_or(0.0);
    if p.is_infinite() || top == 0.0 {
        return Ok(top);
    }
    // Scale by the top value to avoid overflow for large p.
    let sum: f64 = s.iter().map(|x| (x / top).powf(p)).sum();
    Ok(top * sum.powf(1.0 / p))
}

pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Minimizer of `⟨G, X⟩` over the Schatten-1 ball of the given radius.
pub fn nuclear_lmo(g: &DMatrix<f64>, radius: f64, opts: &SvdOptions) -> Result<Atom> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    if g.iter().all(|&x| x == 0.0) {
        return Ok(Atom {
            coeff: 0.0,
            u: DVector::zeros(g.nrows()),
            v: DVector::zeros(g.ncols()),
        });
    }
    let t = top_singular_pair(g, opts)?;
    Ok(Atom {
        coeff: -radius,
        u: t.u,
        v: t.v,
    })
}

/// Euclidean norm of a slice.
pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormalize the columns of `m` by modified Gram-Schmidt.
pub fn orthonormal_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut q = m.clone();
    for j in 0..q.ncols() {
        for i in 0..j {
            let proj = q.column(i).dot(&q.column(j));
            let qi = q.column(i).into_owned();
            q.column_mut(j).axpy(-proj, &qi, 1.0);
        }
        let n = q.column(j).norm();
        if n > 0.0 {
            q.column_mut(j).unscale_mut(n);
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// One-sided Jacobi SVD, used as an independent oracle for singular values
    /// and the top right-singular vector.
    pub(crate) fn jacobi_svd(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
        let n = a.ncols();
        let mut u = a.clone();
        let mut v = DMatrix::<f64>::identity(n, n);
        for _sweep in 0..100 {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    let alpha: f64 = u.column(p).norm_squared();
                    let beta: f64 = u.column(q).norm_squared();
                    let gamma: f64 = u.column(p).dot(&u.column(q));
                    if gamma.abs() < 1e-300 {
                        continue;
                    }
                    off = off.max(gamma.abs() / (alpha * beta).sqrt().max(1e-300));
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let t = if zeta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for k in 0..u.nrows() {
                        let (x, y) = (u[(k, p)], u[(k, q)]);
                        u[(k, p)] = c * x - s * y;
                        u[(k, q)] = s * x + c * y;
                    }
                    for k in 0..n {
                        let (x, y) = (v[(k, p)], v[(k, q)]);
                        v[(k, p)] = c * x - s * y;
                        v[(k, q)] = s * x + c * y;
                    }
                }
            }
            if off < 1e-15 {
                break;
            }
        }
        let mut idx: Vec<usize> = (0..n).collect();
        let norms: Vec<f64> = (0..n).map(|j| u.column(j).norm()).collect();
        idx.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
        let sv = idx.iter().map(|&j| norms[j]).collect();
        let vs = DMatrix::from_fn(n, n, |r, c| v[(r, idx[c])]);
        (sv, vs)
    }

    fn random_matrix(r: usize, c: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = SplitMix64::new(seed);
        DMatrix::from_fn(r, c, |_, _| rng.normal())
    }

    fn close_up_to_sign(a: &DVector<f64>, b: &DVector<f64>, tol: f64) -> bool {
        (a - b).norm() <= tol || (a + b).norm() <= tol
    }

    #[test]
    fn thin_svd_recomposes_rank_deficient_products() {
        let mut rng = SplitMix64::new(11);
        for _ in 0..200 {
            let a = DMatrix::from_fn(4, 2, |_, _| rng.normal());
            let b = DMatrix::from_fn(2, 4, |_, _| rng.normal());
            let z = a * b;
            let svd = thin_svd(&z);
            assert!((svd.recompose() - &z).amax() < 1e-12 * z.amax().max(1.0) * 8.0);
            assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
            let (sv, _) = jacobi_svd(&z);
            assert!((svd.s[0] - sv[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn jacobi_fallback_matches_oracle_on_rectangles() {
        let mut rng = SplitMix64::new(4);
        for (r, c) in [(5, 3), (3, 6), (4, 4)] {
            let m = DMatrix::from_fn(r, c, |_, _| rng.normal());
            let svd = jacobi_thin_svd(&m);
            assert!((svd.recompose() - &m).amax() < 1e-12);
            let (sv, _) = jacobi_svd(&m);
            for (x, y) in svd.s.iter().zip(&sv) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn lift_examples() {
        assert_eq!(lift(&[1.0, 0.0], 2).unwrap().entries, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(lift(&[1.5], 3).unwrap().entries, vec![1.5f64.powi(3)]);
        // Outer-product oracle.
        let x = [1.0, 2.0];
        let mut oracle = Vec::new();
        for a in x {
            for b in x {
                oracle.push(a * b);
            }
        }
        assert_eq!(lift(&x, 2).unwrap().entries, oracle);
        assert_eq!(lift(&x, 1).unwrap().entries, x.to_vec());
    }

    #[test]
    fn lift_third_power_multi_index() {
        let x = [1.0, -2.0, 3.0];
        let z = lift(&x, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    assert_eq!(z.entries[(i * 3 + j) * 3 + k], x[i] * x[j] * x[k]);
                }
            }
        }
    }

    #[test]
    fn lift_overflow() {
        assert!(matches!(
            lift_with_cap(&[0.0; 10], 4, 1000),
            Err(Error::DimensionOverflow { .. })
        ));
        assert!(lift(&[0.0; 100], 4).is_err());
    }

    #[test]
    fn matricize_examples() {
        let m = matricize(&lift(&[1.0, 0.0], 2).unwrap()).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        let uv = LiftedVec {
            entries: vec![1.0, -1.0, 1.0, -1.0],
            base_dim: 2,
            power: 2,
        };
        assert_eq!(matricize(&uv).unwrap(), DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 1.0, -1.0]));
        let zero = LiftedVec { entries: vec![0.0; 9], base_dim: 3, power: 2 };
        assert_eq!(matricize(&zero).unwrap(), DMatrix::zeros(3, 3));
        let z3 = lift(&[1.0, 2.0], 3).unwrap();
        assert!(matches!(matricize(&z3), Err(Error::WrongPower(3))));
    }

    #[test]
    fn top_pair_examples() {
        let o = SvdOptions::default();
        let t = top_singular_pair(&DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0])), &o).unwrap();
        assert!((t.sigma - 2.0).abs() < 1e-12);
        assert!(close_up_to_sign(&t.v, &DVector::from_vec(vec![1.0, 0.0]), 1e-12));
        let t = top_singular_pair(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]), &o).unwrap();
        assert!((t.sigma - 1.0).abs() < 1e-12);
        assert!(close_up_to_sign(&t.u, &DVector::from_vec(vec![1.0, 0.0]), 1e-12));
        assert!(close_up_to_sign(&t.v, &DVector::from_vec(vec![0.0, 1.0]), 1e-12));
    }

    #[test]
    fn top_pair_matches_jacobi_oracle() {
        for seed in 0..5 {
            let m = random_matrix(5, 5, seed);
            let (sv, vs) = jacobi_svd(&m);
            let t = top_singular_pair(&m, &SvdOptions::default()).unwrap();
            assert!((t.sigma - sv[0]).abs() < 1e-6);
            assert!(close_up_to_sign(&t.v, &vs.column(0).into_owned(), 1e-6));
        }
    }

    #[test]
    fn power_iteration_matches_oracle() {
        let m = random_matrix(80, 70, 3);
        let (sv, vs) = jacobi_svd(&m);
        let t = top_singular_pair(&m, &SvdOptions::default()).unwrap();
        assert!((t.sigma - sv[0]).abs() <= 1e-10 * m.norm() + 1e-9);
        assert!(close_up_to_sign(&t.v, &vs.column(0).into_owned(), 1e-4));
        assert!((t.u.norm() - 1.0).abs() < 1e-8 && (t.v.norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn power_iteration_reports_no_convergence() {
        let m = random_matrix(70, 70, 9);
        let o = SvdOptions { tol: 1e-14, max_iter: 3, seed: 1 };
        assert!(matches!(top_singular_pair(&m, &o), Err(Error::NoConvergence(3))));
    }

    #[test]
    fn v_max_examples() {
        let v = v_max(&lift(&[0.0, 1.0], 2).unwrap()).unwrap();
        assert!((v - DVector::from_vec(vec![0.0, 1.0])).norm() < 1e-12);
        let x = [0.6, -0.8];
        let v = v_max(&lift(&x, 2).unwrap()).unwrap();
        assert!(close_up_to_sign(&v, &DVector::from_row_slice(&x), 1e-12));
        assert!(v[1] > 0.0);
        let zero = LiftedVec { entries: vec![0.0; 4], base_dim: 2, power: 2 };
        assert!(matches!(v_max(&zero), Err(Error::ZeroInput)));
    }

    #[test]
    fn v_max_perturbed() {
        let mut rng = SplitMix64::new(21);
        for _ in 0..10 {
            let x = DVector::from_vec(rng.unit_vector(6));
            let e = random_matrix(6, 6, rng.next_u64());
            let e = (&e + e.transpose()) * 0.5;
            let e = &e * (0.01 / operator_norm(&e));
            let m = &x * x.transpose() + e;
            let v = v_max_matrix(&m).unwrap();
            assert!(close_up_to_sign(&v, &x, 0.05));
        }
    }

    #[test]
    fn schatten_examples() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert!((schatten_norm(&i3, 1.0).unwrap() - 3.0).abs() < 1e-12);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 4.0]));
        assert!((schatten_norm(&d, 2.0).unwrap() - 5.0).abs() < 1e-12);
        assert!(matches!(schatten_norm(&d, 0.5), Err(Error::InvalidSchatten(_))));
        let m = random_matrix(4, 4, 8);
        let (sv, _) = jacobi_svd(&m);
        for p in [1.0, 1.5, 2.0, 3.0, 7.0] {
            let oracle = sv.iter().map(|s| s.powf(p)).sum::<f64>().powf(1.0 / p);
            assert!((schatten_norm(&m, p).unwrap() - oracle).abs() < 1e-9 * oracle);
        }
        assert!((schatten_norm(&m, f64::INFINITY).unwrap() - sv[0]).abs() < 1e-9);
    }

    #[test]
    fn lmo_examples() {
        let o = SvdOptions::default();
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        let a = nuclear_lmo(&g, 1.0, &o).unwrap().to_matrix();
        assert!((a - DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 0.0]))).norm() < 1e-12);
        let a = nuclear_lmo(&DMatrix::zeros(3, 3), 2.0, &o).unwrap().to_matrix();
        assert_eq!(a, DMatrix::zeros(3, 3));
        for seed in 0..5 {
            let g = random_matrix(6, 6, 100 + seed);
            let (sv, _) = jacobi_svd(&g);
            let atom = nuclear_lmo(&g, 1.5, &o).unwrap().to_matrix();
            // Minimum over the ball is -radius * sigma_1.
            assert!(g.dot(&atom) <= -1.5 * sv[0] + 1e-6);
        }
    }

    #[test]
    fn jacobi_oracle_reconstructs() {
        let m = random_matrix(5, 4, 77);
        let (sv, v) = jacobi_svd(&m);
        let mv = &m * &v;
        for (j, s) in sv.iter().enumerate() {
            assert!((mv.column(j).norm() - s).abs() < 1e-10);
        }
        assert!((&v.transpose() * &v - DMatrix::identity(4, 4)).norm() < 1e-10);
    }

    fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-3.0f64..3.0, n)
    }

    proptest! {
        #[test]
        fn lift_scaling(x in vec_strategy(3), c in -2.0f64..2.0, s in 1u32..4) {
            let a = lift(&x.iter().map(|v| c * v).collect::<Vec<_>>(), s).unwrap();
            let b = lift(&x, s).unwrap();
            for (p, q) in a.entries.iter().zip(&b.entries) {
                let want = c.powi(s as i32) * q;
                prop_assert!((p - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }

        #[test]
        fn lifted_operator_norm(x in vec_strategy(4)) {
            let n2 = x.iter().map(|v| v * v).sum::<f64>();
            let m = matricize(&lift(&x, 2).unwrap()).unwrap();
            prop_assert!((operator_norm(&m) - n2).abs() <= 1e-9 * n2.max(1e-300));
        }

        #[test]
        fn schatten_monotone(e in vec_strategy(16)) {
            let m = DMatrix::from_row_slice(4, 4, &e);
            let ps = [1.0, 1.3, 2.0, 3.0, 6.0, f64::INFINITY];
            let norms: Vec<f64> = ps.iter().map(|&p| schatten_norm(&m, p).unwrap()).collect();
            for w in norms.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
            }
        }

        #[test]
        fn lmo_radius(e in vec_strategy(9), radius in 0.1f64..5.0) {
            let g = DMatrix::from_row_slice(3, 3, &e);
            prop_assume!(g.norm() > 1e-6);
            let a = nuclear_lmo(&g, radius, &SvdOptions::default()).unwrap().to_matrix();
            prop_assert!((schatten_norm(&a, 1.0).unwrap() - radius).abs() <= 1e-9 * radius);
        }

        #[test]
        fn v_max_idempotent(e in vec_strategy(9)) {
            let z = LiftedVec { entries: e, base_dim: 3, power: 2 };
            prop_assume!(z.entries.iter().any(|v| v.abs() > 1e-6));
            let v = v_max(&z).unwrap();
            let again = v_max(&lift(v.as_slice(), 2).unwrap()).unwrap();
            prop_assert!((v - again).norm() < 1e-9);
        }
    }
}
