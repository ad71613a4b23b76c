use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::framework::fmt_real;
use crate::rng::SplitMix64;

/// Entries of a `d×N` matrix kept independently with probability `rho`.
/// Indices are row-major (`i·N + j`) and sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMask {
    pub d: usize,
    pub n: usize,
    pub rho: f64,
    pub included: Vec<usize>,
    pub seed: u64,
}

impl SampleMask {
    pub fn bernoulli(d: usize, n: usize, rho: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidArgument(format!("rho must lie in [0,1], got {rho}")));
        }
        let mut rng = SplitMix64::new(seed);
        let included = (0..d * n).filter(|_| rng.bernoulli(rho)).collect();
        Ok(Self { d, n, rho, included, seed })
    }

    pub fn len(&self) -> usize {
        self.included.len()
    }

    pub fn is_empty(&self) -> bool {
        self.included.is_empty()
    }

    pub fn position(&self, idx: usize) -> (usize, usize) {
        (idx / self.n, idx % self.n)
    }
}

/// Sampled entries `Y = P_Ω(Z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupCode {
    pub mask: SampleMask,
    pub values: Vec<f64>,
}

impl GroupCode {
    /// Code length in reals.
    pub fn code_len(&self) -> usize {
        self.values.len()
    }

    pub fn to_text(&self) -> String {
        let m = &self.mask;
        let mut s = format!("dictcode {} {} {} {}\n", m.d, m.n, fmt_real(m.rho), m.seed);
        for (i, v) in m.included.iter().zip(&self.values) {
            let _ = writeln!(s, "{i} {}", fmt_real(*v));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let head: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
        if head.len() != 5 || head[0] != "dictcode" {
            return Err(Error::Parse("expected header 'dictcode d N rho seed'".into()));
        }
        let bad = |what: &str| Error::Parse(format!("bad {what} in code file"));
        let d: usize = head[1].parse().map_err(|_| bad("d"))?;
        let n: usize = head[2].parse().map_err(|_| bad("N"))?;
        let rho: f64 = head[3].parse().map_err(|_| bad("rho"))?;
        let seed: u64 = head[4].parse().map_err(|_| bad("seed"))?;
        let mut included = Vec::new();
        let mut values = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let mut it = line.split_whitespace();
            let i: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("index"))?;
            let v: f64 = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("value"))?;
            if i >= d * n || included.last().is_some_and(|&p| p >= i) {
                return Err(bad("index order"));
            }
            included.push(i);
            values.push(v);
        }
        Ok(Self { mask: SampleMask { d, n, rho, included, seed }, values })
    }
}
