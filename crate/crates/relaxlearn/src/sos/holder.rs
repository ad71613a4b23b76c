//! Numeric check of the Hölder-type inequality
//! `(Σ u_i v_i^{p−1})^p ≤ (Σ u_i^p)(Σ v_i^p)^{p−1}` for `p` a power of two.

use crate::error::{Error, Result};

pub fn holder_check(u: &[f64], v: &[f64], p: u32) -> Result<bool> {
    if p < 2 || !p.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("p must be a power of two >= 2, got {p}")));
    }
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), got: v.len() });
    }
    let pi = p as i32;
    let lhs = u.iter().zip(v).map(|(a, b)| a * b.powi(pi - 1)).sum::<f64>().powi(pi);
    let su: f64 = u.iter().map(|a| a.powi(pi)).sum();
    let sv: f64 = v.iter().map(|b| b.powi(pi)).sum();
    let rhs = su * sv.powi(pi - 1);
    let abs_lhs = u.iter().zip(v).map(|(a, b)| (a * b.powi(pi - 1)).abs()).sum::<f64>().powi(pi);
    let scale = rhs.max(abs_lhs).max(f64::MIN_POSITIVE);
    Ok(lhs <= rhs + 1e-9 * scale)
}
