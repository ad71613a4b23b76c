//! Moment programs: linear equalities and PSD blocks over a moment vector
//! `y` indexed by a monomial basis, with the dictionary constraint set as
//! the main instance.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::monomial::{Monomial, MonomialBasis, DEFAULT_MONOMIAL_CAP};
use crate::error::{Error, Result};

/// Sparse linear functional `Σ coef · y[index]`.
pub type LinearForm = Vec<(usize, f64)>;

/// Polynomial as `(coefficient, monomial)` terms.
pub type Poly = Vec<(f64, Monomial)>;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub form: LinearForm,
    pub rhs: f64,
}

/// Symmetric matrix whose entries (row-major, `size²` of them) are linear
/// in the moments; constrained to be PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdBlock {
    pub name: String,
    pub size: usize,
    pub entries: Vec<LinearForm>,
}

impl PsdBlock {
    pub fn eval(&self, y: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_iterator(self.size, self.size, self.entries.iter().map(|f| eval_form(f, y)))
    }
}

pub fn eval_form(form: &LinearForm, y: &[f64]) -> f64 {
    form.iter().map(|&(i, c)| c * y[i]).sum()
}

fn merge_form(mut form: LinearForm) -> LinearForm {
    form.sort_by_key(|t| t.0);
    let mut out: LinearForm = Vec::with_capacity(form.len());
    for (i, c) in form {
        match out.last_mut() {
            Some(last) if last.0 == i => last.1 += c,
            _ => out.push((i, c)),
        }
    }
    out.retain(|t| t.1 != 0.0);
    out
}

/// How the `B` factor enters the dictionary constraint set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BForm {
    /// `B` is a variable tied to `b` by `B = b^{p−1}` equalities.
    Explicit,
    /// `B` is replaced by `b^{p−1}` at the polynomial level; variables are `A, b`.
    Substituted,
}

/// Variable layout of the constraint set over `A` (d×r), optionally `B`
/// (r×N), and `b` (r×N).
#[derive(Debug, Clone, PartialEq)]
pub struct DictLayout {
    pub d: usize,
    pub r: usize,
    pub n: usize,
    pub p: usize,
    pub k: f64,
    pub form: BForm,
}

impl DictLayout {
    pub fn var_count(&self) -> usize {
        let rn = self.r * self.n;
        self.d * self.r + rn + if self.form == BForm::Explicit { rn } else { 0 }
    }

    pub fn a_var(&self, i: usize, l: usize) -> usize {
        i * self.r + l
    }

    pub fn big_b_var(&self, l: usize, j: usize) -> Option<usize> {
        (self.form == BForm::Explicit).then(|| self.d * self.r + l * self.n + j)
    }

    pub fn b_var(&self, l: usize, j: usize) -> usize {
        let off = self.d * self.r + if self.form == BForm::Explicit { self.r * self.n } else { 0 };
        off + l * self.n + j
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.var_count());
        for i in 0..self.d {
            for l in 0..self.r {
                names.push(format!("A_{}_{}", i + 1, l + 1));
            }
        }
        if self.form == BForm::Explicit {
            for l in 0..self.r {
                for j in 0..self.n {
                    names.push(format!("B_{}_{}", l + 1, j + 1));
                }
            }
        }
        for l in 0..self.r {
            for j in 0..self.n {
                names.push(format!("b_{}_{}", l + 1, j + 1));
            }
        }
        names
    }

    /// Bound on `Σ_ℓ b_{ℓj}^p`.
    pub fn column_bound(&self) -> f64 {
        self.k.powf(self.p as f64 / (self.p as f64 - 1.0))
    }

    /// `(AB)_ij` as a polynomial in the layout's variables.
    pub fn c_poly(&self, i: usize, j: usize) -> Poly {
        (0..self.r)
            .map(|l| {
                let a = Monomial::var(self.a_var(i, l));
                let bpart = match self.big_b_var(l, j) {
                    Some(v) => Monomial::var(v),
                    None => Monomial::var_pow(self.b_var(l, j), self.p - 1),
                };
                (1.0, a.mul(&bpart))
            })
            .collect()
    }

    /// Point values of all variables, in layout order.
    pub fn point(&self, a: &DMatrix<f64>, big_b: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
        let mut v = vec![0.0; self.var_count()];
        for i in 0..self.d {
            for l in 0..self.r {
                v[self.a_var(i, l)] = a[(i, l)];
            }
        }
        for l in 0..self.r {
            for j in 0..self.n {
                if let Some(idx) = self.big_b_var(l, j) {
                    v[idx] = big_b[(l, j)];
                }
                v[self.b_var(l, j)] = b[(l, j)];
            }
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct SoSProgram {
    pub basis: Arc<MonomialBasis>,
    pub var_names: Vec<String>,
    /// Row 0 is the normalization `y[1] = 1`; all other rows are homogeneous.
    pub equalities: Vec<LinearRow>,
    /// Block 0 is the moment matrix.
    pub blocks: Vec<PsdBlock>,
    /// Minimized when present.
    pub objective: Option<LinearForm>,
    pub layout: Option<DictLayout>,
}

impl SoSProgram {
    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    pub fn moment_count(&self) -> usize {
        self.basis.len()
    }

    pub fn form_of(&self, poly: &Poly) -> Result<LinearForm> {
        form_of(&self.basis, poly)
    }

    /// Linear forms of `Ẽ[(AB)_ij]`, row-major over `d × N`.
    pub fn c_forms(&self) -> Option<Vec<LinearForm>> {
        let lay = self.layout.as_ref()?;
        let mut out = Vec::with_capacity(lay.d * lay.n);
        for i in 0..lay.d {
            for j in 0..lay.n {
                out.push(self.form_of(&lay.c_poly(i, j)).ok()?);
            }
        }
        Some(out)
    }
}

fn form_of(basis: &MonomialBasis, poly: &Poly) -> Result<LinearForm> {
    let mut form = Vec::with_capacity(poly.len());
    for (c, m) in poly {
        let idx = basis.index_of(m).ok_or_else(|| {
            Error::CapExceeded(format!("monomial of degree {} exceeds program degree {}", m.degree(), basis.degree))
        })?;
        form.push((idx, *c));
    }
    Ok(merge_form(form))
}

fn poly_degree(poly: &Poly) -> usize {
    poly.iter().map(|(_, m)| m.degree()).max().unwrap_or(0)
}

pub struct ProgramBuilder {
    basis: Arc<MonomialBasis>,
    names: Vec<String>,
    equalities: Vec<LinearRow>,
    blocks: Vec<PsdBlock>,
    objective: Option<LinearForm>,
    layout: Option<DictLayout>,
}

impl ProgramBuilder {
    pub fn new(names: Vec<String>, degree: usize) -> Result<Self> {
        Self::with_cap(names, degree, DEFAULT_MONOMIAL_CAP)
    }

    /// Starts a program with the normalization row and the moment matrix.
    pub fn with_cap(names: Vec<String>, degree: usize, cap: usize) -> Result<Self> {
        if degree == 0 || degree % 2 != 0 {
            return Err(Error::InvalidArgument(format!("degree must be even and positive, got {degree}")));
        }
        let basis = Arc::new(MonomialBasis::new(names.len(), degree, cap)?);
        let half = basis.count_up_to(degree / 2);
        let mut entries = Vec::with_capacity(half * half);
        for i in 0..half {
            for j in 0..half {
                let m = basis.monomials[i].mul(&basis.monomials[j]);
                entries.push(vec![(basis.index_of(&m).expect("degree within basis"), 1.0)]);
            }
        }
        let moment = PsdBlock { name: "moment".into(), size: half, entries };
        Ok(Self {
            basis,
            names,
            equalities: vec![LinearRow { form: vec![(0, 1.0)], rhs: 1.0 }],
            blocks: vec![moment],
            objective: None,
            layout: None,
        })
    }

    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    /// `Ẽ[poly] = rhs`, stored homogeneously as `Ẽ[poly − rhs·1] = 0`.
    pub fn add_equality(&mut self, poly: &Poly, rhs: f64) -> Result<()> {
        let mut p = poly.clone();
        p.push((-rhs, Monomial::one()));
        let form = form_of(&self.basis, &p)?;
        self.equalities.push(LinearRow { form, rhs: 0.0 });
        Ok(())
    }

    /// `Ẽ[poly · m] = 0` for every monomial `m` of degree at most `mult_degree`.
    pub fn add_ideal(&mut self, poly: &Poly, mult_degree: usize) -> Result<()> {
        if poly_degree(poly) + mult_degree > self.degree() {
            return Err(Error::InvalidArgument("ideal multiplier exceeds program degree".into()));
        }
        let count = self.basis.count_up_to(mult_degree);
        for idx in 0..count {
            let m = self.basis.monomials[idx].clone();
            let prod: Poly = poly.iter().map(|(c, t)| (*c, t.mul(&m))).collect();
            let form = form_of(&self.basis, &prod)?;
            self.equalities.push(LinearRow { form, rhs: 0.0 });
        }
        Ok(())
    }

    /// Localizing matrix `[Ẽ[g · m_i m_j]] ⪰ 0` over monomials with
    /// `deg g + 2 deg m ≤ D`.
    pub fn add_localizing(&mut self, name: &str, g: &Poly) -> Result<()> {
        let e = poly_degree(g);
        if e > self.degree() {
            return Err(Error::InvalidArgument(format!("localizing polynomial degree {e} exceeds program degree")));
        }
        let half = (self.degree() - e) / 2;
        let size = self.basis.count_up_to(half);
        let mut entries = Vec::with_capacity(size * size);
        for i in 0..size {
            for j in 0..size {
                let mm = self.basis.monomials[i].mul(&self.basis.monomials[j]);
                let prod: Poly = g.iter().map(|(c, t)| (*c, t.mul(&mm))).collect();
                entries.push(form_of(&self.basis, &prod)?);
            }
        }
        self.blocks.push(PsdBlock { name: name.to_string(), size, entries });
        Ok(())
    }

    /// Minimize `Ẽ[poly]`.
    pub fn set_objective(&mut self, poly: &Poly) -> Result<()> {
        self.objective = Some(form_of(&self.basis, poly)?);
        Ok(())
    }

    pub fn build(self) -> SoSProgram {
        SoSProgram {
            basis: self.basis,
            var_names: self.names,
            equalities: self.equalities,
            blocks: self.blocks,
            objective: self.objective,
            layout: self.layout,
        }
    }
}

/// Parameters of the dictionary constraint set.
#[derive(Debug, Clone, PartialEq)]
pub struct DictProgramParams {
    pub layout: DictLayout,
    pub degree: usize,
    /// Degree of monomial multipliers on `C = AB`; `None` takes the
    /// largest representable (`D − 2` explicit, `D − p` substituted).
    pub c_multiplier_degree: Option<usize>,
    pub cap: usize,
}

impl DictProgramParams {
    pub fn new(layout: DictLayout, degree: usize) -> Self {
        Self { layout, degree, c_multiplier_degree: None, cap: DEFAULT_MONOMIAL_CAP }
    }
}

/// Builds the constraint set `{B = b^{p−1}, Σ_ℓ b_{ℓj}^p ≤ k^{p/(p−1)},
/// A_ik² ≤ 1}`, plus `C = AB` when `c` is given.
pub fn build_program(c: Option<&DMatrix<f64>>, params: &DictProgramParams) -> Result<SoSProgram> {
    let lay = &params.layout;
    let (p, dd) = (lay.p, params.degree);
    if p < 4 || p % 2 != 0 {
        return Err(Error::InvalidArgument(format!("p must be even and >= 4, got {p}")));
    }
    let min_degree = match lay.form {
        BForm::Explicit => 2 * p,
        BForm::Substituted => p,
    };
    if dd % 2 != 0 || dd < min_degree {
        return Err(Error::InvalidArgument(format!("degree must be even and >= {min_degree}, got {dd}")));
    }
    if !(lay.k >= 0.0) {
        return Err(Error::InvalidArgument("k must be nonnegative".into()));
    }
    if let Some(c) = c {
        if c.shape() != (lay.d, lay.n) {
            return Err(Error::DimensionMismatch { expected: lay.d * lay.n, got: c.len() });
        }
    }
    let mut b = ProgramBuilder::with_cap(lay.names(), dd, params.cap)?;
    b.layout = Some(lay.clone());

    if lay.form == BForm::Explicit {
        for l in 0..lay.r {
            for j in 0..lay.n {
                let poly = vec![
                    (1.0, Monomial::var(lay.big_b_var(l, j).unwrap())),
                    (-1.0, Monomial::var_pow(lay.b_var(l, j), p - 1)),
                ];
                b.add_ideal(&poly, dd - (p - 1))?;
            }
        }
    }
    for i in 0..lay.d {
        for l in 0..lay.r {
            let g = vec![(1.0, Monomial::one()), (-1.0, Monomial::var_pow(lay.a_var(i, l), 2))];
            b.add_localizing(&format!("A_{}_{}^2<=1", i + 1, l + 1), &g)?;
        }
    }
    for j in 0..lay.n {
        let mut g = vec![(lay.column_bound(), Monomial::one())];
        for l in 0..lay.r {
            g.push((-1.0, Monomial::var_pow(lay.b_var(l, j), p)));
        }
        b.add_localizing(&format!("col_{}", j + 1), &g)?;
    }
    if let Some(c) = c {
        let c_deg = match lay.form {
            BForm::Explicit => 2,
            BForm::Substituted => p,
        };
        let mult = params.c_multiplier_degree.unwrap_or(dd - c_deg);
        for i in 0..lay.d {
            for j in 0..lay.n {
                let mut poly = lay.c_poly(i, j);
                poly.push((-c[(i, j)], Monomial::one()));
                b.add_ideal(&poly, mult)?;
            }
        }
    }
    Ok(b.build())
}
