//! Upper bounds on the factorable norm `Γ(Z) = inf_{Z=AB} ‖A‖_{ℓ₁→ℓ∞} ‖B‖_{ℓ₁→ℓ₁}`
//! through explicit witnesses.

use nalgebra::DMatrix;

use super::max_abs;
use crate::linalg::thin_svd;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// An exact factorization `Z = AB` and its norm product.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaWitness {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub product: f64,
}

/// `‖B‖_{ℓ₁→ℓ₁}`, the largest column ℓ₁ norm.
pub fn max_col_l1(b: &DMatrix<f64>) -> f64 {
    b.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

impl GammaWitness {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Self {
        let product = max_abs(&a) * max_col_l1(&b);
        Self { a, b, product }
    }

    pub fn residual(&self, z: &DMatrix<f64>) -> f64 {
        (&self.a * &self.b - z).amax()
    }
}

fn pad(a: &DMatrix<f64>, b: &DMatrix<f64>, r: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let q = a.ncols();
    let mut ap = DMatrix::zeros(a.nrows(), r);
    let mut bp = DMatrix::zeros(r, b.ncols());
    ap.view_mut((0, 0), (a.nrows(), q)).copy_from(a);
    bp.view_mut((0, 0), (q, b.ncols())).copy_from(b);
    (ap, bp)
}

fn transformed(a0: &DMatrix<f64>, b0: &DMatrix<f64>, t: &DMatrix<f64>, z: &DMatrix<f64>, tol: f64) -> Option<(DMatrix<f64>, DMatrix<f64>, f64)> {
    let ti = t.clone().try_inverse()?;
    let a = a0 * t;
    let b = ti * b0;
    let p = max_abs(&a) * max_col_l1(&b);
    (p.is_finite() && (&a * &b - z).amax() <= tol).then_some((a, b, p))
}

/// Best witness found with inner dimension at most `r`; `restarts` random
/// changes of basis refine the SVD factorization.
pub fn gamma_upper_bound(z: &DMatrix<f64>, r: usize, restarts: usize) -> Result<GammaWitness> {
    gamma_upper_bound_with(z, r, restarts, 0, &[])
}

/// As [`gamma_upper_bound`], also considering caller-supplied factor pairs.
pub fn gamma_upper_bound_with(
    z: &DMatrix<f64>,
    r: usize,
    restarts: usize,
    seed: u64,
    candidates: &[(DMatrix<f64>, DMatrix<f64>)],
) -> Result<GammaWitness> {
    if r == 0 {
        return Err(Error::InvalidArgument("inner dimension must be at least 1".into()));
    }
    let (d, n) = z.shape();
    let zmax = max_abs(z);
    if zmax == 0.0 {
        return Ok(GammaWitness::new(DMatrix::zeros(d, r), DMatrix::zeros(r, n)));
    }
    let tol = 1e-9 * zmax.max(1.0);
    let mut best: Option<GammaWitness> = None;
    let mut offer = |w: GammaWitness| {
        if w.residual(z) <= tol && best.as_ref().is_none_or(|b| w.product < b.product) {
            best = Some(w);
        }
    };
    for (a, b) in candidates {
        if a.nrows() == d && b.ncols() == n && a.ncols() == b.nrows() && a.ncols() <= r {
            let (ap, bp) = pad(a, b, r);
            offer(GammaWitness::new(ap, bp));
        }
    }
    if r >= n {
        let (ap, bp) = pad(&(z / zmax), &(DMatrix::identity(n, n) * zmax), r);
        offer(GammaWitness::new(ap, bp));
    }
    if r >= d {
        let (ap, bp) = pad(&DMatrix::identity(d, d), z, r);
        offer(GammaWitness::new(ap, bp));
    }
    let svd = thin_svd(z);
    let q = svd.s.iter().filter(|&&s| s > 1e-12 * svd.s[0]).count();
    if q <= r {
        let a0 = DMatrix::from_fn(d, q, |i, j| svd.u[(i, j)] * svd.s[j]);
        let b0 = svd.v_t.rows(0, q).into_owned();
        let mut rng = SplitMix64::new(seed);
        for rs in 0..restarts.max(1) {
            let mut t = DMatrix::<f64>::identity(q, q);
            if rs > 0 {
                t += DMatrix::from_fn(q, q, |_, _| 0.5 * rng.normal());
            }
            let Some(mut cur) = transformed(&a0, &b0, &t, z, tol) else { continue };
            let mut step = 0.5;
            while step > 1e-6 {
                let mut improved = false;
                for i in 0..q {
                    for j in 0..q {
                        for sgn in [1.0, -1.0] {
                            let mut e = DMatrix::<f64>::identity(q, q);
                            e[(i, j)] += sgn * step;
                            let cand = &t * e;
                            if let Some(c) = transformed(&a0, &b0, &cand, z, tol) {
                                if c.2 < cur.2 * (1.0 - 1e-12) {
                                    t = cand;
                                    cur = c;
                                    improved = true;
                                }
                            }
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            let (ap, bp) = pad(&cur.0, &cur.1, r);
            offer(GammaWitness::new(ap, bp));
        }
    }
    best.ok_or_else(|| Error::InfeasibleAssignment(format!("no exact factorization with inner dimension {r} found")))
}

/// Witness for `Z₁ + Z₂` built as `[tA₁, A₂]·[B₁/t; B₂]` with
/// `t = ‖A₂‖/‖A₁‖`; its product is at most the sum of the parts.
pub fn stack_witnesses(w1: &GammaWitness, w2: &GammaWitness) -> GammaWitness {
    let (a1n, a2n) = (max_abs(&w1.a), max_abs(&w2.a));
    let zero1 = a1n == 0.0 || max_col_l1(&w1.b) == 0.0;
    let zero2 = a2n == 0.0 || max_col_l1(&w2.b) == 0.0;
    let (a1, b1) = if zero1 {
        (w1.a.map(|_| 0.0), w1.b.map(|_| 0.0))
    } else if zero2 {
        (w1.a.clone(), w1.b.clone())
    } else {
        let t = a2n / a1n;
        (&w1.a * t, &w1.b / t)
    };
    let (a2, b2) = if zero2 { (w2.a.map(|_| 0.0), w2.b.map(|_| 0.0)) } else { (w2.a.clone(), w2.b.clone()) };
    let (r1, r2) = (a1.ncols(), a2.ncols());
    let mut a = DMatrix::zeros(a1.nrows(), r1 + r2);
    a.view_mut((0, 0), a1.shape()).copy_from(&a1);
    a.view_mut((0, r1), a2.shape()).copy_from(&a2);
    let mut b = DMatrix::zeros(r1 + r2, b1.ncols());
    b.view_mut((0, 0), b1.shape()).copy_from(&b1);
    b.view_mut((r1, 0), b2.shape()).copy_from(&b2);
    GammaWitness::new(a, b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    pub bound1: f64,
    pub bound2: f64,
    pub combined_product: f64,
    /// `max |A B − (Z₁ + Z₂)|` of the combined witness.
    pub combined_residual: f64,
    pub holds: bool,
}

pub fn gamma_norm_axiom_probe(z1: &DMatrix<f64>, z2: &DMatrix<f64>, r: usize, restarts: usize) -> Result<AxiomReport> {
    if z1.shape() != z2.shape() {
        return Err(Error::DimensionMismatch { expected: z1.len(), got: z2.len() });
    }
    let w1 = gamma_upper_bound(z1, r, restarts)?;
    let w2 = gamma_upper_bound(z2, r, restarts)?;
    let w = stack_witnesses(&w1, &w2);
    let sum = z1 + z2;
    let combined_residual = w.residual(&sum);
    let scale = w1.product + w2.product;
    let holds = w.product <= scale * (1.0 + 4.0 * f64::EPSILON) && combined_residual <= 1e-9 * max_abs(&sum).max(1.0);
    Ok(AxiomReport { bound1: w1.product, bound2: w2.product, combined_product: w.product, combined_residual, holds })
}
