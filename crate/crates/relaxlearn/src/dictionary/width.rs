//! Exact inner maximizers `sup_{C∈W} ⟨C, ξ⟩` for the sampling Rademacher
//! width.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::framework::{srw_estimate, TrialTable};
use crate::linalg::{schatten_norm, singular_values};
use crate::sos::{qsos_linear_sup, QsosConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WidthSet {
    Zero,
    /// `{C : max |C_ij| ≤ 1}`.
    LInfBall,
    /// `{C : ‖C‖_{S_p} ≤ radius}`; the supremum is `radius·‖ξ‖_{S_q}` with
    /// `1/p + 1/q = 1`.
    SchattenBall { p: f64, radius: f64 },
    Qsos(QsosConfig),
}

impl WidthSet {
    pub fn sup(&self, xi: &DMatrix<f64>) -> Result<f64> {
        match self {
            WidthSet::Zero => Ok(0.0),
            WidthSet::LInfBall => Ok(xi.iter().map(|v| v.abs()).sum()),
            WidthSet::SchattenBall { p, radius } => {
                if !(*p >= 1.0) {
                    return Err(Error::InvalidSchatten(*p));
                }
                let q = if *p == 1.0 {
                    f64::INFINITY
                } else if p.is_infinite() {
                    1.0
                } else {
                    p / (p - 1.0)
                };
                let dual = if q == 1.0 { singular_values(xi).iter().sum() } else { schatten_norm(xi, q)? };
                Ok(radius * dual)
            }
            WidthSet::Qsos(cfg) => Ok(qsos_linear_sup(xi, cfg)?.c.dot(xi)),
        }
    }
}

/// SRW of a set of `d×N` matrices at sample size `m`.
pub fn srw_of(set: &WidthSet, d: usize, n: usize, m: usize, trials: usize, seed: u64) -> Result<TrialTable> {
    srw_estimate(|xi| set.sup(&DMatrix::from_row_slice(d, n, xi)), d * n, m, trials, seed)
}
