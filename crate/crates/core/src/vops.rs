//! Monic polynomial systems orthogonal with respect to varying weights.

use crate::error::{Error, Result};
use crate::index::{monomial_vector, monomials_up_to, poly_dim, stacked_position, MultiIndex};
use crate::matrix::{dense_solve, determinant, max_abs, rank, Matrix};
use crate::moments::{moment_block, truncated_moment_matrix, MomentFunctional};
use crate::poly::{BiPoly, PolyVec};
use crate::scalar::Scalar;

/// Everything known about one degree of the monic system.
#[derive(Clone, Debug)]
pub struct VopsLevel {
    pub degree: usize,
    /// `ℙ_n`.
    pub p: PolyVec,
    /// Leading coefficient matrix `G_n` (the identity for monic systems).
    pub g: Matrix,
    /// `G_{n,j}` for `j < n`, each of size `(n+1)×(j+1)`.
    pub g_lower: Vec<Matrix>,
    /// `Λ_n = ⟨𝕏_n, ℙ_nᵀ⟩_n`.
    pub lambda: Matrix,
    /// `Υ_n = ⟨𝕏_{-1}, ℙ_nᵀ⟩_n`, or why it could not be evaluated.
    pub upsilon: Result<Matrix>,
}

impl VopsLevel {
    pub fn upsilon(&self) -> Result<&Matrix> {
        self.upsilon.as_ref().map_err(Clone::clone)
    }

    /// Number of scalar unknowns in the stacked `G_{n,j}` system.
    pub fn unknown_count(&self) -> usize {
        self.g_lower.iter().map(|g| g.rows() * g.cols()).sum()
    }
}

/// `⟨x^e, P⟩_n` for a monomial exponent `e` that may be negative.
pub fn vip_monomial(f: &dyn MomentFunctional, e: MultiIndex, p: &BiPoly, n: usize) -> Result<Scalar> {
    let mut acc = f.backend().zero();
    for (m, c) in p.terms() {
        let idx = *m + e;
        acc = acc.add(&c.mul(&f.mu_n(n, idx.i, idx.j)?)?)?;
    }
    Ok(acc)
}

/// `(⟨x^{rows[u]}, P_v⟩_n)_{u,v}`.
pub fn pairing_matrix(f: &dyn MomentFunctional, rows: &[MultiIndex], p: &PolyVec, n: usize) -> Result<Matrix> {
    Matrix::from_fn(f.backend(), rows.len(), p.len(), |u, v| vip_monomial(f, rows[u], p.entry(v), n))
}

/// `𝕏_{-1} = (x₂⁻¹, x₁⁻¹)ᵀ`.
pub const X_MINUS_ONE: [MultiIndex; 2] = [MultiIndex::new(0, -1), MultiIndex::new(-1, 0)];

/// `Λ_n` evaluated from its definition.
pub fn lambda_matrix(f: &dyn MomentFunctional, level: &VopsLevel) -> Result<Matrix> {
    pairing_matrix(f, &monomial_vector(level.degree), &level.p, level.degree)
}

/// `Υ_n` evaluated from its definition.
pub fn upsilon_matrix(f: &dyn MomentFunctional, level: &VopsLevel) -> Result<Matrix> {
    pairing_matrix(f, &X_MINUS_ONE, &level.p, level.degree)
}

fn check_nonsingular(m: &Matrix, what: &str) -> Result<()> {
    let r = rank(m)?;
    if r < m.rows() {
        return Err(Error::Singular(format!("{what} has rank {r} < {}", m.rows())));
    }
    Ok(())
}

/// Builds the monic level `n` by solving the block system against `𝓜̂_n`.
pub fn build_level(f: &dyn MomentFunctional, n: usize) -> Result<VopsLevel> {
    let b = f.backend();
    let mono_n = monomial_vector(n);
    let (p, g_lower, lambda) = if n == 0 {
        (PolyVec::new(0, vec![BiPoly::one(b)])?, Vec::new(), Matrix::from_rows(b, vec![vec![f.mu(0, 0)?]])?)
    } else {
        let m_hat = truncated_moment_matrix(f, n)?;
        let mut rhs_blocks = Vec::with_capacity(n);
        for r in 0..n {
            rhs_blocks.push(moment_block(f, r, n, n)?);
        }
        let mut rhs = rhs_blocks[0].clone();
        for blk in &rhs_blocks[1..] {
            rhs = rhs.vstack(blk)?;
        }
        let x = dense_solve(&m_hat, &rhs.neg())
            .map_err(|e| Error::Singular(format!("truncated moment matrix at degree {n}: {e}")))?;
        let lower = monomials_up_to(n - 1);
        let mut entries = Vec::with_capacity(n + 1);
        for (r, lead) in mono_n.iter().enumerate() {
            let terms = std::iter::once((*lead, b.one()))
                .chain(lower.iter().enumerate().map(|(t, m)| (*m, x.get(t, r).clone())));
            entries.push(BiPoly::from_terms(b, terms)?);
        }
        let mut g_lower = Vec::with_capacity(n);
        for j in 0..n {
            let start = if j == 0 { 0 } else { poly_dim(j - 1) };
            g_lower.push(x.block(start, start + j + 1, 0, n + 1).transpose());
        }
        let mut lambda = moment_block(f, n, n, n)?;
        for (i, gi) in g_lower.iter().enumerate() {
            lambda = lambda.add(&moment_block(f, n, i, n)?.mul(&gi.transpose())?)?;
        }
        (PolyVec::new(n, entries)?, g_lower, lambda)
    };
    check_nonsingular(&lambda, &format!("Lambda_{n}"))?;
    let mut level = VopsLevel {
        degree: n,
        g: p.leading_matrix(),
        p,
        g_lower,
        lambda,
        upsilon: Err(Error::InvalidArgument("not evaluated".into())),
    };
    level.upsilon = upsilon_matrix(f, &level);
    Ok(level)
}

/// Levels `0..=n_max`, built in order.
pub fn build_levels(f: &dyn MomentFunctional, n_max: usize) -> Result<Vec<VopsLevel>> {
    (0..=n_max).map(|n| build_level(f, n)).collect()
}

/// `P_{n-k,k}` from the bordered-determinant formula, expanded along the
/// monomial row: each lower coefficient is a signed ratio of minors of
/// `[𝓜̂_n | 𝔪]` with one column of `𝓜̂_n` removed.
pub fn build_level_determinant(f: &dyn MomentFunctional, n: usize, k: usize) -> Result<BiPoly> {
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds degree {n}")));
    }
    let b = f.backend();
    let lead = monomial_vector(n)[k];
    if n == 0 {
        return Ok(BiPoly::one(b));
    }
    let m_hat = truncated_moment_matrix(f, n)?;
    let size = m_hat.rows();
    let lower = monomials_up_to(n - 1);
    let border = Matrix::from_fn(b, size, 1, |u, _| {
        let idx = lower[u] + lead;
        f.mu_n(n, idx.i, idx.j)
    })?;
    let det_hat = determinant(&m_hat)?;
    if det_hat.is_zero() {
        return Err(Error::Singular(format!("truncated moment matrix at degree {n}")));
    }
    let mut terms = vec![(lead, b.one())];
    #[allow(clippy::needless_range_loop)]
    for t in 0..size {
        let minor = Matrix::from_fn(b, size, size, |u, v| {
            Ok(if v + 1 == size {
                border.get(u, 0).clone()
            } else if v < t {
                m_hat.get(u, v).clone()
            } else {
                m_hat.get(u, v + 1).clone()
            })
        })?;
        let mut c = determinant(&minor)?.div(&det_hat)?;
        if (size + t) % 2 == 1 {
            c = c.neg();
        }
        terms.push((lower[t], c));
    }
    BiPoly::from_terms(b, terms)
}

/// `max |⟨x^e, P_v⟩_n|` over all monomials `e` of degree `< n`.
pub fn verify_orthogonality(f: &dyn MomentFunctional, level: &VopsLevel) -> Result<Scalar> {
    let n = level.degree;
    if n == 0 {
        return Ok(f.backend().zero());
    }
    let m = pairing_matrix(f, &monomials_up_to(n - 1), &level.p, n)?;
    Ok(m.max_abs())
}

/// Largest deviation of `ℙ_n` from monic form: leading block minus the
/// identity, and any stray term above degree `n`.
pub fn monic_defect(level: &VopsLevel) -> Result<Scalar> {
    let b = level.p.backend();
    let mut vals = vec![level.g.sub(&Matrix::identity(b, level.degree + 1))?.max_abs()];
    for p in level.p.entries() {
        if p.degree() > level.degree as i32 {
            vals.push(b.one());
        }
    }
    Ok(max_abs(vals.iter(), b))
}

/// Coefficient of `x^m` in every entry, as a column (used for tables).
pub fn stacked_coefficients(p: &PolyVec) -> Matrix {
    let b = p.backend();
    let n = p.degree();
    let mut out = Matrix::zeros(b, poly_dim(n), p.len());
    for (v, e) in p.entries().iter().enumerate() {
        for (m, c) in e.terms() {
            out.set(stacked_position(*m), v, c.clone());
        }
    }
    out
}
