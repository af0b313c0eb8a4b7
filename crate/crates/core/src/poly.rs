//! Sparse bivariate polynomials and column vectors of them.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::index::{monomial_vector, MultiIndex};
use crate::matrix::{max_abs, Matrix};
use crate::scalar::{Backend, Scalar};

/// Sparse polynomial in `x₁, x₂`. Zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct BiPoly {
    backend: Backend,
    terms: BTreeMap<MultiIndex, Scalar>,
}

impl BiPoly {
    pub fn zero(backend: Backend) -> Self {
        BiPoly { backend, terms: BTreeMap::new() }
    }

    pub fn constant(c: Scalar) -> Self {
        Self::monomial(MultiIndex::ZERO, c)
    }

    pub fn one(backend: Backend) -> Self {
        Self::constant(backend.one())
    }

    /// `c·x₁^i x₂^j`.
    pub fn monomial(m: MultiIndex, c: Scalar) -> Self {
        assert!(m.is_polynomial(), "negative exponent {m} in a polynomial");
        let mut p = Self::zero(c.backend());
        if !c.is_zero() {
            p.terms.insert(m, c);
        }
        p
    }

    pub fn from_terms(backend: Backend, terms: impl IntoIterator<Item = (MultiIndex, Scalar)>) -> Result<Self> {
        let mut p = Self::zero(backend);
        for (m, c) in terms {
            if !m.is_polynomial() {
                return Err(Error::InvalidArgument(format!("negative exponent {m}")));
            }
            p.add_term(m, &c)?;
        }
        Ok(p)
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; `-1` for the zero polynomial.
    pub fn degree(&self) -> i32 {
        self.terms.keys().map(MultiIndex::degree).max().unwrap_or(-1)
    }

    pub fn coeff(&self, m: MultiIndex) -> Scalar {
        self.terms.get(&m).cloned().unwrap_or_else(|| self.backend.zero())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Scalar)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, m: MultiIndex, c: &Scalar) -> Result<()> {
        if c.backend().is_exact() != self.backend.is_exact() {
            return Err(Error::BackendMismatch("polynomial coefficient".into()));
        }
        if c.is_zero() {
            return Ok(());
        }
        let sum = match self.terms.get(&m) {
            Some(old) => old.add(c)?,
            None => c.clone(),
        };
        if sum.is_zero() {
            self.terms.remove(&m);
        } else {
            self.terms.insert(m, sum);
        }
        Ok(())
    }

    pub fn add(&self, other: &BiPoly) -> Result<BiPoly> {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(*m, c)?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &BiPoly) -> Result<BiPoly> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> BiPoly {
        BiPoly { backend: self.backend, terms: self.terms.iter().map(|(m, c)| (*m, c.neg())).collect() }
    }

    pub fn scale(&self, s: &Scalar) -> Result<BiPoly> {
        let mut out = Self::zero(self.backend);
        for (m, c) in &self.terms {
            out.add_term(*m, &c.mul(s)?)?;
        }
        Ok(out)
    }

    /// Multiplication by `x₁^i x₂^j` (non-negative shift).
    pub fn shift(&self, by: MultiIndex) -> BiPoly {
        assert!(by.is_polynomial(), "negative shift {by}");
        BiPoly { backend: self.backend, terms: self.terms.iter().map(|(m, c)| (*m + by, c.clone())).collect() }
    }

    pub fn mul(&self, other: &BiPoly) -> Result<BiPoly> {
        let mut out = Self::zero(self.backend);
        for (ma, a) in &self.terms {
            for (mb, b) in &other.terms {
                out.add_term(*ma + *mb, &a.mul(b)?)?;
            }
        }
        Ok(out)
    }

    pub fn eval(&self, x1: &Scalar, x2: &Scalar) -> Result<Scalar> {
        let mut acc = self.backend.zero();
        for (m, c) in &self.terms {
            let t = c.mul(&x1.powi(m.i)?)?.mul(&x2.powi(m.j)?)?;
            acc = acc.add(&t)?;
        }
        Ok(acc)
    }

    /// Terms of total degree exactly `d`.
    pub fn homogeneous_part(&self, d: i32) -> BiPoly {
        BiPoly {
            backend: self.backend,
            terms: self.terms.iter().filter(|(m, _)| m.degree() == d).map(|(m, c)| (*m, c.clone())).collect(),
        }
    }

    pub fn max_abs_coeff(&self) -> Scalar {
        max_abs(self.terms.values(), self.backend)
    }

    /// Terms sorted by descending degree, then in monomial-vector order.
    pub fn sorted_terms(&self) -> Vec<(MultiIndex, Scalar)> {
        let mut v: Vec<_> = self.terms.iter().map(|(m, c)| (*m, c.clone())).collect();
        v.sort_by_key(|(m, _)| (-m.degree(), m.j));
        v
    }
}

impl fmt::Display for BiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .sorted_terms()
            .into_iter()
            .map(|(m, c)| {
                let mono = match (m.i, m.j) {
                    (0, 0) => String::new(),
                    (i, 0) => power("x1", i),
                    (0, j) => power("x2", j),
                    (i, j) => format!("{}*{}", power("x1", i), power("x2", j)),
                };
                match (mono.is_empty(), c.is_one()) {
                    (true, _) => format!("({c})"),
                    (false, true) => mono,
                    (false, false) => format!("({c})*{mono}"),
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

fn power(var: &str, e: i32) -> String {
    if e == 1 {
        var.to_string()
    } else {
        format!("{var}^{e}")
    }
}

/// Column vector of `n+1` polynomials indexed like `𝕏_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyVec {
    degree: usize,
    entries: Vec<BiPoly>,
}

impl PolyVec {
    /// `entries.len()` must be `degree + 1`.
    pub fn new(degree: usize, entries: Vec<BiPoly>) -> Result<Self> {
        if entries.len() != degree + 1 {
            return Err(Error::Shape(format!(
                "degree {degree} vector needs {} entries, got {}",
                degree + 1,
                entries.len()
            )));
        }
        Ok(PolyVec { degree, entries })
    }

    /// `𝕏_n` as polynomials.
    pub fn monomials(backend: Backend, n: usize) -> Self {
        let entries = monomial_vector(n).into_iter().map(|m| BiPoly::monomial(m, backend.one())).collect();
        PolyVec { degree: n, entries }
    }

    pub fn zeros(backend: Backend, degree: usize) -> Self {
        PolyVec { degree, entries: vec![BiPoly::zero(backend); degree + 1] }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[BiPoly] {
        &self.entries
    }

    pub fn entry(&self, k: usize) -> &BiPoly {
        &self.entries[k]
    }

    pub fn backend(&self) -> Backend {
        self.entries[0].backend()
    }

    /// Coefficients of the degree-`n` monomials: row `r` holds entry `r`.
    pub fn leading_matrix(&self) -> Matrix {
        let b = self.backend();
        let mono = monomial_vector(self.degree);
        let mut g = Matrix::zeros(b, self.len(), mono.len());
        for (r, p) in self.entries.iter().enumerate() {
            for (c, m) in mono.iter().enumerate() {
                g.set(r, c, p.coeff(*m));
            }
        }
        g
    }

    /// True when every entry has total degree exactly `n`.
    pub fn has_exact_degree(&self) -> bool {
        self.entries.iter().all(|p| p.degree() == self.degree as i32)
    }

    /// Entrywise multiplication by a monomial.
    pub fn shift(&self, by: MultiIndex) -> PolyVec {
        PolyVec { degree: self.degree, entries: self.entries.iter().map(|p| p.shift(by)).collect() }
    }

    pub fn add(&self, other: &PolyVec) -> Result<PolyVec> {
        if self.len() != other.len() {
            return Err(Error::Shape("vector lengths differ".into()));
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a.add(b)).collect::<Result<_>>()?;
        Ok(PolyVec { degree: self.degree, entries })
    }

    pub fn sub(&self, other: &PolyVec) -> Result<PolyVec> {
        let neg = PolyVec { degree: other.degree, entries: other.entries.iter().map(BiPoly::neg).collect() };
        self.add(&neg)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(BiPoly::is_zero)
    }

    pub fn max_abs_coeff(&self) -> Scalar {
        let all: Vec<Scalar> = self.entries.iter().map(BiPoly::max_abs_coeff).collect();
        max_abs(all.iter(), self.backend())
    }
}

/// `m · v` for a matrix with `v.len()` columns; the result is labelled with
/// `degree` and must have `degree + 1` rows.
pub fn apply(m: &Matrix, v: &PolyVec, degree: usize) -> Result<PolyVec> {
    if m.cols() != v.len() {
        return Err(Error::Shape(format!("{}x{} matrix applied to a vector of {}", m.rows(), m.cols(), v.len())));
    }
    let b = m.backend();
    let mut entries = Vec::with_capacity(m.rows());
    for r in 0..m.rows() {
        let mut acc = BiPoly::zero(b);
        for c in 0..m.cols() {
            let s = m.get(r, c);
            if !s.is_zero() {
                acc = acc.add(&v.entry(c).scale(s)?)?;
            }
        }
        entries.push(acc);
    }
    PolyVec::new(degree, entries)
}
