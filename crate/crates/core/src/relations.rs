//! Three-term relations `x_i ℙ_n = A_i ℙ_{n+1} + B_i ℙ_n + x₁x₂ C_i ℙ_{n-1}`
//! and the recurrence built from them.

use crate::error::{Error, Result};
use crate::index::{monomial_vector, monomials_up_to, poly_dim, shift_matrix, stacked_position, MultiIndex};
use crate::matrix::{dense_solve, max_abs, rank, solve_overdetermined, Matrix};
use crate::poly::{apply, BiPoly, PolyVec};
use crate::scalar::{Backend, Scalar};
use crate::vops::VopsLevel;

const X1X2: MultiIndex = MultiIndex::new(1, 1);

/// How a relation was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelationPath {
    /// Degree 0: read off the expansion of `x_i ℙ₀`.
    Direct,
    /// Solve for `C_i` through the `Λ` matrices.
    Lambda,
    /// Coefficient matching over all monomials of degree `≤ n+1`.
    Fallback,
}

#[derive(Clone, Debug)]
pub struct AxisRelation {
    pub axis: u8,
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub path: RelationPath,
}

/// `D_i`, `E`, `F` of the recurrence, available when the joint matrix has full rank.
#[derive(Clone, Debug)]
pub struct Recurrence {
    pub d1: Matrix,
    pub d2: Matrix,
    pub e: Matrix,
    pub f: Matrix,
}

#[derive(Clone, Debug)]
pub struct RelationSet {
    pub degree: usize,
    pub axes: [AxisRelation; 2],
    /// `[A_1; A_2]`.
    pub joint: Matrix,
    pub joint_rank: usize,
    pub recurrence: Result<Recurrence>,
}

impl RelationSet {
    pub fn axis(&self, i: u8) -> &AxisRelation {
        &self.axes[(i - 1) as usize]
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RelationOptions {
    /// Skip the `Λ` route even when it is available.
    pub force_fallback: bool,
}

fn zero_tolerance(backend: Backend, scale: &Scalar, slack: i32) -> f64 {
    backend.tolerance(slack) * scale.to_f64().abs().max(1.0)
}

fn negligible(value: &Scalar, tol: f64) -> bool {
    value.is_zero() || value.to_f64().abs() <= tol
}

/// Writes `R = Σ_k F_k ℙ_k` by peeling off the top degree first. The result
/// has one matrix per level in `levels`.
pub fn expand_in_vops_basis(r: &PolyVec, levels: &[VopsLevel]) -> Result<Vec<Matrix>> {
    let b = r.backend();
    let top = levels.len().checked_sub(1).ok_or_else(|| Error::InvalidArgument("no levels".into()))?;
    if let Some(p) = r.entries().iter().find(|p| p.degree() > top as i32) {
        return Err(Error::Shape(format!("degree {} exceeds available levels 0..={top}", p.degree())));
    }
    let mut rest: Vec<BiPoly> = r.entries().to_vec();
    let mut out = vec![Matrix::zeros(b, 0, 0); levels.len()];
    for k in (0..=top).rev() {
        let mono = monomial_vector(k);
        let fk = Matrix::from_fn(b, rest.len(), k + 1, |row, c| Ok(rest[row].coeff(mono[c])))?;
        let sub = apply(&fk, &levels[k].p, r.degree())?;
        for (e, s) in rest.iter_mut().zip(sub.entries()) {
            *e = e.sub(s)?;
            // the leading part cancels by construction; drop rounding debris
            *e = BiPoly::from_terms(b, e.terms().filter(|(m, _)| m.degree() < k as i32).map(|(m, c)| (*m, c.clone())))?;
        }
        out[k] = fk;
    }
    Ok(out)
}

/// `x_i ℙ_n − A ℙ_{n+1} − B ℙ_n − x₁x₂ C ℙ_{n−1}`.
pub fn relation_residual(levels: &[VopsLevel], n: usize, rel: &AxisRelation) -> Result<PolyVec> {
    let shift = if rel.axis == 1 { MultiIndex::new(1, 0) } else { MultiIndex::new(0, 1) };
    let mut r = levels[n].p.shift(shift);
    r = r.sub(&apply(&rel.a, &levels[n + 1].p, n)?)?;
    r = r.sub(&apply(&rel.b, &levels[n].p, n)?)?;
    if n > 0 {
        r = r.sub(&apply(&rel.c, &levels[n - 1].p, n)?.shift(X1X2))?;
    }
    Ok(r)
}

/// `K = L_{n−1,1} L_{n,2}`, which maps `𝕏_{n+1}` onto `x₁x₂ 𝕏_{n−1}`.
pub fn k_matrix(backend: Backend, n: usize) -> Result<Matrix> {
    shift_matrix(backend, n - 1, 1)?.mul(&shift_matrix(backend, n, 2)?)
}

fn lambda_route(levels: &[VopsLevel], n: usize, axis: u8) -> Result<AxisRelation> {
    let b = levels[n].p.backend();
    let k = k_matrix(b, n)?;
    let lam_next = &levels[n + 1].lambda;
    let klk = k.mul(lam_next)?;
    let system = klk.mul(&k.transpose())?.sub(&levels[n - 1].lambda)?;
    let rhs =
        klk.mul(&shift_matrix(b, n, axis)?.transpose())?.sub(&shift_matrix(b, n - 1, axis)?.mul(&levels[n].lambda)?)?;
    let c = dense_solve(&system, &rhs)?.transpose();
    let a = shift_matrix(b, n, axis)?.sub(&c.mul(&k)?)?;
    let partial = AxisRelation { axis, a, b: Matrix::zeros(b, n + 1, n + 1), c, path: RelationPath::Lambda };
    let r = relation_residual(levels, n, &partial)?;
    let parts = expand_in_vops_basis(&r, &levels[..=n + 1])?;
    let stray = max_abs(
        parts.iter().enumerate().filter(|(d, _)| *d != n).map(|(_, m)| m.max_abs()).collect::<Vec<_>>().iter(),
        b,
    );
    let coeff_scale = max_abs([partial.a.max_abs(), partial.c.max_abs(), parts[n].max_abs()].iter(), b);
    if !negligible(&stray, zero_tolerance(b, &coeff_scale, 12)) {
        return Err(Error::Inconsistent {
            degree: n,
            axis: axis as usize,
            detail: format!("lower expansion terms do not vanish (max {})", stray.to_f64()),
        });
    }
    Ok(AxisRelation { b: parts[n].clone(), ..partial })
}

fn direct_route(levels: &[VopsLevel], axis: u8) -> Result<AxisRelation> {
    let b = levels[0].p.backend();
    let shift = if axis == 1 { MultiIndex::new(1, 0) } else { MultiIndex::new(0, 1) };
    let parts = expand_in_vops_basis(&levels[0].p.shift(shift), &levels[..=1])?;
    Ok(AxisRelation {
        axis,
        a: parts[1].clone(),
        b: parts[0].clone(),
        c: Matrix::zeros(b, 1, 0),
        path: RelationPath::Direct,
    })
}

fn fallback_route(levels: &[VopsLevel], n: usize, axis: u8) -> Result<AxisRelation> {
    let b = levels[n].p.backend();
    let eqs = poly_dim(n + 1);
    let mut basis: Vec<BiPoly> = levels[n + 1].p.entries().to_vec();
    basis.extend(levels[n].p.entries().iter().cloned());
    if n > 0 {
        basis.extend(levels[n - 1].p.entries().iter().map(|p| p.shift(X1X2)));
    }
    let mut system = Matrix::zeros(b, eqs, basis.len());
    for (col, p) in basis.iter().enumerate() {
        for (m, c) in p.terms() {
            system.set(stacked_position(*m), col, c.clone());
        }
    }
    let shift = if axis == 1 { MultiIndex::new(1, 0) } else { MultiIndex::new(0, 1) };
    let target = levels[n].p.shift(shift);
    let mut rhs = Matrix::zeros(b, eqs, n + 1);
    for (col, p) in target.entries().iter().enumerate() {
        for (m, c) in p.terms() {
            rhs.set(stacked_position(*m), col, c.clone());
        }
    }
    let (x, residual) = solve_overdetermined(&system, &rhs)?;
    if !negligible(&residual, zero_tolerance(b, &rhs.max_abs(), 12)) {
        return Err(Error::Inconsistent {
            degree: n,
            axis: axis as usize,
            detail: format!("coefficient matching leaves residual {}", residual.to_f64()),
        });
    }
    let xt = x.transpose();
    Ok(AxisRelation {
        axis,
        a: xt.block(0, n + 1, 0, n + 2),
        b: xt.block(0, n + 1, n + 2, 2 * n + 3),
        c: xt.block(0, n + 1, 2 * n + 3, 3 * n + 3),
        path: RelationPath::Fallback,
    })
}

/// Relation matrices for one axis at degree `n`; needs `levels[0..=n+1]`.
pub fn compute_relation(levels: &[VopsLevel], n: usize, axis: u8, opts: RelationOptions) -> Result<AxisRelation> {
    if axis != 1 && axis != 2 {
        return Err(Error::InvalidArgument(format!("axis must be 1 or 2, got {axis}")));
    }
    if levels.len() < n + 2 {
        return Err(Error::InvalidArgument(format!("relations at degree {n} need levels up to {}", n + 1)));
    }
    if n == 0 && !opts.force_fallback {
        return direct_route(levels, axis);
    }
    if n > 0 && !opts.force_fallback {
        match lambda_route(levels, n, axis) {
            Ok(rel) => return Ok(rel),
            Err(Error::Singular(_)) | Err(Error::Inconsistent { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    fallback_route(levels, n, axis)
}

/// `D = J (JᵀJ)⁻¹` split into the rows facing `A_1` and `A_2`.
pub fn joint_and_pseudoinverse(a1: &Matrix, a2: &Matrix) -> Result<(Matrix, Matrix, Matrix)> {
    let joint = a1.vstack(a2)?;
    let cols = joint.cols();
    let gram = joint.transpose().mul(&joint)?;
    let r = rank(&gram)?;
    if r < cols {
        return Err(Error::RankDeficient { rank: r, expected: cols });
    }
    let d = joint.mul(&dense_solve(&gram, &Matrix::identity(joint.backend(), cols))?)?;
    let split = a1.rows();
    Ok((d.block(0, split, 0, cols), d.block(split, d.rows(), 0, cols), joint))
}

/// Both axes, the joint matrix and (if it has full rank) the recurrence data.
pub fn compute_relation_set(levels: &[VopsLevel], n: usize, opts: RelationOptions) -> Result<RelationSet> {
    let r1 = compute_relation(levels, n, 1, opts)?;
    let r2 = compute_relation(levels, n, 2, opts)?;
    let joint = r1.a.vstack(&r2.a)?;
    let joint_rank = rank(&joint)?;
    let recurrence = joint_and_pseudoinverse(&r1.a, &r2.a).and_then(|(d1, d2, _)| {
        let e = d1.transpose().mul(&r1.b)?.add(&d2.transpose().mul(&r2.b)?)?.neg();
        let f = d1.transpose().mul(&r1.c)?.add(&d2.transpose().mul(&r2.c)?)?.neg();
        Ok(Recurrence { d1, d2, e, f })
    });
    Ok(RelationSet { degree: n, axes: [r1, r2], joint, joint_rank, recurrence })
}

/// `ℙ_{n+1} = x₁D₁ᵀℙ_n + x₂D₂ᵀℙ_n + Eℙ_n + x₁x₂Fℙ_{n−1}`.
pub fn recurrence_step(prev: Option<&PolyVec>, current: &PolyVec, rec: &Recurrence) -> Result<PolyVec> {
    let n = current.degree();
    let mut out = apply(&rec.d1.transpose(), current, n + 1)?.shift(MultiIndex::new(1, 0));
    out = out.add(&apply(&rec.d2.transpose(), current, n + 1)?.shift(MultiIndex::new(0, 1)))?;
    out = out.add(&apply(&rec.e, current, n + 1)?)?;
    if let Some(p) = prev.filter(|_| n > 0) {
        out = out.add(&apply(&rec.f, p, n + 1)?.shift(X1X2))?;
    }
    Ok(out)
}

/// `A_i + C_i K − L_{n,i}` (monic form of the leading-coefficient relation).
pub fn agcl_residual(rel: &AxisRelation, n: usize) -> Result<Matrix> {
    let b = rel.a.backend();
    let mut m = rel.a.sub(&shift_matrix(b, n, rel.axis)?)?;
    if n > 0 {
        m = m.add(&rel.c.mul(&k_matrix(b, n)?)?)?;
    }
    Ok(m)
}

/// `K Λ_{n+1} A_iᵀ − L_{n−1,i} Λ_n + Λ_{n−1} C_iᵀ`, for `n ≥ 1`.
pub fn rrc_residual(levels: &[VopsLevel], rel: &AxisRelation, n: usize) -> Result<Matrix> {
    let b = rel.a.backend();
    k_matrix(b, n)?
        .mul(&levels[n + 1].lambda)?
        .mul(&rel.a.transpose())?
        .sub(&shift_matrix(b, n - 1, rel.axis)?.mul(&levels[n].lambda)?)?
        .add(&levels[n - 1].lambda.mul(&rel.c.transpose())?)
}

/// `‖B_i Υ_nᵀ + C_i Υ_{n−1}ᵀ‖₁`, for `n ≥ 1`.
pub fn verify_blcl(rel: &AxisRelation, upsilon_n: &Matrix, upsilon_prev: &Matrix) -> Result<Scalar> {
    rel.b.mul(&upsilon_n.transpose())?.add(&rel.c.mul(&upsilon_prev.transpose())?)?.norm1()
}

/// `B_i Υ_nᵀ + C_i Υ_{n−1}ᵀ − ⟨x_i ℙ_n, 𝕏_{−1}ᵀ⟩_n`, for `n ≥ 1`.
///
/// Pairing the relation with `𝕏_{−1}` under `⟨·,·⟩_n` removes the `A` term by
/// orthogonality and turns the `x₁x₂` term into a degree `n−1` pairing, leaving
/// the pairing of `x_i ℙ_n` itself on the left.
pub fn blcl_corrected_residual(
    f: &dyn crate::moments::MomentFunctional,
    level: &VopsLevel,
    rel: &AxisRelation,
    upsilon_n: &Matrix,
    upsilon_prev: &Matrix,
) -> Result<Matrix> {
    let n = level.degree;
    let shift = if rel.axis == 1 { MultiIndex::new(1, 0) } else { MultiIndex::new(0, 1) };
    let shifted = level.p.shift(shift);
    let pairing = crate::vops::pairing_matrix(f, &crate::vops::X_MINUS_ONE, &shifted, n)?.transpose();
    rel.b.mul(&upsilon_n.transpose())?.add(&rel.c.mul(&upsilon_prev.transpose())?)?.sub(&pairing)
}

/// Largest coefficient difference between two vectors of polynomials.
pub fn polyvec_distance(a: &PolyVec, b: &PolyVec) -> Result<Scalar> {
    Ok(a.sub(b)?.max_abs_coeff())
}

/// All monomials of degree `≤ n` (re-exported for table layouts).
pub fn basis_monomials(n: usize) -> Vec<MultiIndex> {
    monomials_up_to(n)
}
