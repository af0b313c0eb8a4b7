//! Dense matrices over [`Scalar`] and the linear solvers used throughout.
//!
//! Exact matrices are eliminated fraction-free (Bareiss); float matrices use
//! Gaussian elimination with partial pivoting and a relative singularity
//! threshold of `10^(-digits+10)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::{Backend, Scalar};

/// Relative pivot threshold exponent slack for float singularity checks.
pub const SINGULAR_SLACK: i32 = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    backend: Backend,
    data: Vec<Scalar>,
}

impl Matrix {
    pub fn zeros(backend: Backend, rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, backend, data: vec![backend.zero(); rows * cols] }
    }

    pub fn identity(backend: Backend, n: usize) -> Self {
        let mut m = Self::zeros(backend, n, n);
        for i in 0..n {
            m.set(i, i, backend.one());
        }
        m
    }

    pub fn from_fn(
        backend: Backend,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Result<Scalar>,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let v = f(r, c)?;
                if v.backend().is_exact() != backend.is_exact() {
                    return Err(Error::BackendMismatch("matrix entry".into()));
                }
                data.push(v);
            }
        }
        Ok(Matrix { rows, cols, backend, data })
    }

    pub fn from_rows(backend: Backend, rows: Vec<Vec<Scalar>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged rows".into()));
        }
        let data: Vec<Scalar> = rows.into_iter().flatten().collect();
        if data.iter().any(|v| v.backend().is_exact() != backend.is_exact()) {
            return Err(Error::BackendMismatch("matrix entry".into()));
        }
        Ok(Matrix { rows: r, cols: c, backend, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn get(&self, r: usize, c: usize) -> &Scalar {
        assert!(r < self.rows && c < self.cols, "index ({r},{c}) out of {}x{}", self.rows, self.cols);
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Scalar) {
        assert!(r < self.rows && c < self.cols, "index ({r},{c}) out of {}x{}", self.rows, self.cols);
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Scalar] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn entries(&self) -> impl Iterator<Item = &Scalar> {
        self.data.iter()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.backend, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c).clone());
            }
        }
        t
    }

    fn check_conformable(&self, other: &Matrix, what: &str) -> Result<()> {
        if self.backend.is_exact() != other.backend.is_exact() {
            return Err(Error::BackendMismatch(what.into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.check_conformable(other, "add")?;
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!("add {:?} + {:?}", self.shape(), other.shape())));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a.add(b)).collect::<Result<_>>()?;
        Ok(Matrix { data, ..self.clone_shape() })
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Matrix {
        Matrix { data: self.data.iter().map(Scalar::neg).collect(), ..self.clone_shape() }
    }

    pub fn scale(&self, s: &Scalar) -> Result<Matrix> {
        let data = self.data.iter().map(|a| a.mul(s)).collect::<Result<_>>()?;
        Ok(Matrix { data, ..self.clone_shape() })
    }

    fn clone_shape(&self) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, backend: self.backend, data: Vec::new() }
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        self.check_conformable(other, "mul")?;
        if self.cols != other.rows {
            return Err(Error::Shape(format!("mul {:?} x {:?}", self.shape(), other.shape())));
        }
        let mut out = Matrix::zeros(self.backend, self.rows, other.cols);
        for r in 0..self.rows {
            for c in 0..other.cols {
                let mut acc = self.backend.zero();
                for k in 0..self.cols {
                    let a = self.get(r, k);
                    let b = other.get(k, c);
                    if a.is_zero() || b.is_zero() {
                        continue;
                    }
                    acc = acc.add(&a.mul(b)?)?;
                }
                out.set(r, c, acc);
            }
        }
        Ok(out)
    }

    /// Rows `r0..r1`, columns `c0..c1`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Matrix {
        assert!(r0 <= r1 && r1 <= self.rows && c0 <= c1 && c1 <= self.cols);
        let mut out = Matrix::zeros(self.backend, r1 - r0, c1 - c0);
        for r in r0..r1 {
            for c in c0..c1 {
                out.set(r - r0, c - c0, self.get(r, c).clone());
            }
        }
        out
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, m: &Matrix) {
        for r in 0..m.rows {
            for c in 0..m.cols {
                self.set(r0 + r, c0 + c, m.get(r, c).clone());
            }
        }
    }

    /// Stacks `self` above `other`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        self.check_conformable(other, "vstack")?;
        if self.cols != other.cols {
            return Err(Error::Shape(format!("vstack {:?} over {:?}", self.shape(), other.shape())));
        }
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        Ok(Matrix { rows: self.rows + other.rows, cols: self.cols, backend: self.backend, data })
    }

    pub fn hstack(&self, other: &Matrix) -> Result<Matrix> {
        Ok(self.transpose().vstack(&other.transpose())?.transpose())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Scalar::is_zero)
    }

    /// Largest entry magnitude (zero for an empty matrix).
    pub fn max_abs(&self) -> Scalar {
        max_abs(self.data.iter(), self.backend)
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> Result<Scalar> {
        let mut best = self.backend.zero();
        for c in 0..self.cols {
            let mut s = self.backend.zero();
            for r in 0..self.rows {
                s = s.add(&self.get(r, c).abs())?;
            }
            if s.abs_gt(&best) {
                best = s;
            }
        }
        Ok(best)
    }

    /// Entrywise `max |self - other|`.
    pub fn max_abs_diff(&self, other: &Matrix) -> Result<Scalar> {
        Ok(self.sub(other)?.max_abs())
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && (0..self.rows).all(|r| (0..r).all(|c| self.get(r, c) == self.get(c, r)))
    }
}

pub fn max_abs<'a>(values: impl Iterator<Item = &'a Scalar>, backend: Backend) -> Scalar {
    let mut best = backend.zero();
    for v in values {
        if v.abs_gt(&best) {
            best = v.abs();
        }
    }
    best
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let row: Vec<String> = self.row(r).iter().map(|v| v.to_string()).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Solves `m · X = rhs` for square `m`.
pub fn dense_solve(m: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    if m.rows != m.cols {
        return Err(Error::Shape(format!("solve needs a square matrix, got {:?}", m.shape())));
    }
    if rhs.rows != m.rows {
        return Err(Error::Shape(format!("rhs has {} rows, matrix {}", rhs.rows, m.rows)));
    }
    m.check_conformable(rhs, "solve")?;
    let n = m.rows;
    if n == 0 {
        return Ok(Matrix::zeros(m.backend, 0, rhs.cols));
    }
    let aug = m.hstack(rhs)?;
    let upper = match m.backend {
        Backend::Exact => bareiss_forward(aug, n, true)?.0,
        Backend::Float { .. } => gauss_forward(aug, n, m.max_abs())?.0,
    };
    back_substitute(&upper, n)
}

/// Fraction-free forward elimination on the first `n` columns. Returns the
/// upper-triangular result and the number of row swaps.
fn bareiss_forward(mut a: Matrix, n: usize, pivoting: bool) -> Result<(Matrix, usize)> {
    let cols = a.cols;
    let mut prev = a.backend.one();
    let mut swaps = 0;
    for k in 0..n {
        if a.get(k, k).is_zero() {
            if !pivoting {
                return Err(Error::Singular(format!("zero leading minor at order {}", k + 1)));
            }
            let p = (k + 1..n).find(|&r| !a.get(r, k).is_zero());
            match p {
                Some(p) => {
                    swap_rows(&mut a, k, p);
                    swaps += 1;
                }
                None => return Err(Error::Singular(format!("no pivot in column {k}"))),
            }
        }
        let pivot = a.get(k, k).clone();
        for i in k + 1..a.rows {
            let factor = a.get(i, k).clone();
            for j in k + 1..cols {
                let v = pivot.mul(a.get(i, j))?.sub(&factor.mul(a.get(k, j))?)?.div(&prev)?;
                a.set(i, j, v);
            }
            a.set(i, k, a.backend.zero());
        }
        prev = pivot;
    }
    Ok((a, swaps))
}

/// Partial-pivoting forward elimination. `scale` is the magnitude against
/// which pivots are judged.
fn gauss_forward(mut a: Matrix, n: usize, scale: Scalar) -> Result<(Matrix, usize)> {
    let threshold = threshold_for(&scale, a.backend);
    let cols = a.cols;
    let mut swaps = 0;
    for k in 0..n {
        let mut p = k;
        for r in k + 1..n {
            if a.get(r, k).abs_gt(a.get(p, k)) {
                p = r;
            }
        }
        if !a.get(p, k).abs_gt(&threshold) {
            return Err(Error::Singular(format!("pivot {:.3e} below threshold in column {k}", a.get(p, k).to_f64())));
        }
        if p != k {
            swap_rows(&mut a, k, p);
            swaps += 1;
        }
        let pivot = a.get(k, k).clone();
        for i in k + 1..a.rows {
            if a.get(i, k).is_zero() {
                continue;
            }
            let factor = a.get(i, k).div(&pivot)?;
            for j in k + 1..cols {
                let v = a.get(i, j).sub(&factor.mul(a.get(k, j))?)?;
                a.set(i, j, v);
            }
            a.set(i, k, a.backend.zero());
        }
    }
    Ok((a, swaps))
}

fn threshold_for(scale: &Scalar, backend: Backend) -> Scalar {
    match backend {
        Backend::Exact => backend.zero(),
        Backend::Float { digits } => {
            let eps = backend.parse(&format!("1e{}", -(digits as i32) + SINGULAR_SLACK)).expect("valid literal");
            eps.mul(scale).expect("same backend")
        }
    }
}

fn swap_rows(a: &mut Matrix, i: usize, j: usize) {
    if i == j {
        return;
    }
    for c in 0..a.cols {
        a.data.swap(i * a.cols + c, j * a.cols + c);
    }
}

fn back_substitute(upper: &Matrix, n: usize) -> Result<Matrix> {
    let k = upper.cols - n;
    let mut x = Matrix::zeros(upper.backend, n, k);
    for c in 0..k {
        for i in (0..n).rev() {
            let mut acc = upper.get(i, n + c).clone();
            for j in i + 1..n {
                let a = upper.get(i, j);
                if a.is_zero() {
                    continue;
                }
                acc = acc.sub(&a.mul(x.get(j, c))?)?;
            }
            x.set(i, c, acc.div(upper.get(i, i))?);
        }
    }
    Ok(x)
}

/// Determinant; exact mode via Bareiss, float mode via pivoted elimination
/// (numerically singular input gives zero).
pub fn determinant(m: &Matrix) -> Result<Scalar> {
    if m.rows != m.cols {
        return Err(Error::Shape("determinant of a non-square matrix".into()));
    }
    let n = m.rows;
    if n == 0 {
        return Ok(m.backend.one());
    }
    let result = match m.backend {
        Backend::Exact => bareiss_forward(m.clone(), n, true).map(|(u, s)| (u.get(n - 1, n - 1).clone(), s)),
        Backend::Float { .. } => gauss_forward(m.clone(), n, m.max_abs()).map(|(u, s)| {
            let mut d = m.backend.one();
            for i in 0..n {
                d = d.mul(u.get(i, i)).expect("same backend");
            }
            (d, s)
        }),
    };
    match result {
        Ok((d, swaps)) => Ok(if swaps % 2 == 1 { d.neg() } else { d }),
        Err(Error::Singular(_)) => Ok(m.backend.zero()),
        Err(e) => Err(e),
    }
}

/// Leading principal minors `det(m[..k, ..k])` for `k = 1..=n`, computed by
/// elimination without pivoting. Stops at the first vanishing minor (its
/// value is reported as zero and the rest are omitted).
pub fn leading_principal_minors(m: &Matrix) -> Result<Vec<Scalar>> {
    if m.rows != m.cols {
        return Err(Error::Shape("minors of a non-square matrix".into()));
    }
    let n = m.rows;
    let mut a = m.clone();
    let mut out = Vec::with_capacity(n);
    let mut prev = m.backend.one();
    let mut running = m.backend.one();
    for k in 0..n {
        let pivot = a.get(k, k).clone();
        match m.backend {
            Backend::Exact => out.push(pivot.clone()),
            Backend::Float { .. } => {
                running = running.mul(&pivot)?;
                out.push(running.clone());
            }
        }
        if pivot.is_zero() {
            break;
        }
        for i in k + 1..n {
            let factor = a.get(i, k).clone();
            for j in k + 1..n {
                let v = match m.backend {
                    Backend::Exact => pivot.mul(a.get(i, j))?.sub(&factor.mul(a.get(k, j))?)?.div(&prev)?,
                    Backend::Float { .. } => a.get(i, j).sub(&factor.div(&pivot)?.mul(a.get(k, j))?)?,
                };
                a.set(i, j, v);
            }
            a.set(i, k, m.backend.zero());
        }
        prev = pivot;
    }
    Ok(out)
}

/// Numerical rank: exact elimination, or pivoted elimination with relative
/// threshold `10^(-digits+10)` in float mode.
pub fn rank(m: &Matrix) -> Result<usize> {
    let threshold = threshold_for(&m.max_abs(), m.backend);
    let mut a = m.clone();
    let mut rank = 0;
    for c in 0..a.cols {
        if rank == a.rows {
            break;
        }
        let mut p = rank;
        for r in rank + 1..a.rows {
            if a.get(r, c).abs_gt(a.get(p, c)) {
                p = r;
            }
        }
        if !a.get(p, c).abs_gt(&threshold) {
            continue;
        }
        swap_rows(&mut a, rank, p);
        let pivot = a.get(rank, c).clone();
        for i in rank + 1..a.rows {
            if a.get(i, c).is_zero() {
                continue;
            }
            let factor = a.get(i, c).div(&pivot)?;
            for j in c..a.cols {
                let v = a.get(i, j).sub(&factor.mul(a.get(rank, j))?)?;
                a.set(i, j, v);
            }
        }
        rank += 1;
    }
    Ok(rank)
}

/// Solves an overdetermined consistent system `m · x = rhs` (more rows than
/// unknowns). A full-rank square subsystem is selected by pivoted elimination;
/// the returned scalar is the largest residual over all equations.
pub fn solve_overdetermined(m: &Matrix, rhs: &Matrix) -> Result<(Matrix, Scalar)> {
    if rhs.rows != m.rows {
        return Err(Error::Shape("rhs rows".into()));
    }
    let n = m.cols;
    let threshold = threshold_for(&m.max_abs(), m.backend);
    // Row selection by elimination on a working copy.
    let mut a = m.clone();
    let mut order: Vec<usize> = (0..m.rows).collect();
    for c in 0..n {
        let mut p = c;
        for r in c + 1..a.rows {
            if a.get(r, c).abs_gt(a.get(p, c)) {
                p = r;
            }
        }
        if p >= a.rows || !a.get(p, c).abs_gt(&threshold) {
            return Err(Error::Singular(format!("overdetermined system has rank < {n} (column {c})")));
        }
        swap_rows(&mut a, c, p);
        order.swap(c, p);
        let pivot = a.get(c, c).clone();
        for i in c + 1..a.rows {
            if a.get(i, c).is_zero() {
                continue;
            }
            let factor = a.get(i, c).div(&pivot)?;
            for j in c..n {
                let v = a.get(i, j).sub(&factor.mul(a.get(c, j))?)?;
                a.set(i, j, v);
            }
        }
    }
    let chosen = &order[..n];
    let sub = Matrix::from_fn(m.backend, n, n, |r, c| Ok(m.get(chosen[r], c).clone()))?;
    let sub_rhs = Matrix::from_fn(m.backend, n, rhs.cols, |r, c| Ok(rhs.get(chosen[r], c).clone()))?;
    let x = dense_solve(&sub, &sub_rhs)?;
    let residual = m.mul(&x)?.sub(rhs)?.max_abs();
    Ok((x, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Scalar {
        Backend::Exact.ratio(n, d)
    }

    fn exact(rows: &[&[i64]]) -> Matrix {
        Matrix::from_rows(Backend::Exact, rows.iter().map(|r| r.iter().map(|&v| q(v, 1)).collect()).collect()).unwrap()
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let i3 = Matrix::identity(Backend::Exact, 3);
        let rhs = exact(&[&[1, 2], &[3, 4], &[5, 6]]);
        assert_eq!(dense_solve(&i3, &rhs).unwrap(), rhs);
    }

    #[test]
    fn diagonal_solve() {
        let m = exact(&[&[2, 0], &[0, 4]]);
        let x = dense_solve(&m, &exact(&[&[1], &[1]])).unwrap();
        assert_eq!(x.get(0, 0), &q(1, 2));
        assert_eq!(x.get(1, 0), &q(1, 4));
    }

    #[test]
    fn needs_row_exchange() {
        let m = exact(&[&[0, 1], &[1, 0]]);
        let x = dense_solve(&m, &exact(&[&[3], &[7]])).unwrap();
        assert_eq!(x, exact(&[&[7], &[3]]));
    }

    #[test]
    fn singular_detected() {
        let m = exact(&[&[1, 2], &[2, 4]]);
        assert!(matches!(dense_solve(&m, &exact(&[&[1], &[1]])), Err(Error::Singular(_))));
        let b = Backend::float(40).unwrap();
        let f = Matrix::from_rows(b, vec![vec![b.int(1), b.int(2)], vec![b.int(2), b.int(4)]]).unwrap();
        let rhs = Matrix::from_rows(b, vec![vec![b.int(1)], vec![b.int(1)]]).unwrap();
        assert!(matches!(dense_solve(&f, &rhs), Err(Error::Singular(_))));
    }

    #[test]
    fn determinant_and_minors() {
        let m = exact(&[&[2, 1, 0], &[1, 3, 1], &[0, 1, 4]]);
        assert_eq!(determinant(&m).unwrap(), q(18, 1));
        let minors = leading_principal_minors(&m).unwrap();
        assert_eq!(minors, vec![q(2, 1), q(5, 1), q(18, 1)]);
        assert_eq!(determinant(&exact(&[&[0, 1], &[1, 0]])).unwrap(), q(-1, 1));
        assert_eq!(determinant(&exact(&[&[1, 2], &[2, 4]])).unwrap(), q(0, 1));
    }

    #[test]
    fn float_minors_match_exact() {
        let b = Backend::float(40).unwrap();
        let m = Matrix::from_fn(b, 3, 3, |r, c| Ok(b.ratio(1, (r + c + 1) as i64))).unwrap();
        let minors = leading_principal_minors(&m).unwrap();
        // Hilbert minors: 1, 1/12, 1/2160
        assert!((minors[1].to_f64() - 1.0 / 12.0).abs() < 1e-30);
        assert!((minors[2].to_f64() - 1.0 / 2160.0).abs() < 1e-30);
    }

    #[test]
    fn rank_and_overdetermined() {
        let m = exact(&[&[1, 0], &[0, 1], &[1, 1]]);
        assert_eq!(rank(&m).unwrap(), 2);
        let (x, res) = solve_overdetermined(&m, &exact(&[&[2], &[3], &[5]])).unwrap();
        assert_eq!(x, exact(&[&[2], &[3]]));
        assert!(res.is_zero());
        let (_, res) = solve_overdetermined(&m, &exact(&[&[2], &[3], &[6]])).unwrap();
        assert_eq!(res, q(1, 1));
        assert_eq!(rank(&exact(&[&[1, 2], &[2, 4], &[3, 6]])).unwrap(), 1);
    }

    #[test]
    fn empty_shapes() {
        let e = Matrix::zeros(Backend::Exact, 1, 0);
        let f = Matrix::zeros(Backend::Exact, 0, 2);
        let p = e.mul(&f).unwrap();
        assert_eq!(p.shape(), (1, 2));
        assert!(p.is_zero());
    }

    fn small_matrix() -> impl Strategy<Value = (Vec<i64>, Vec<i64>)> {
        (proptest::collection::vec(-9i64..10, 16), proptest::collection::vec(-9i64..10, 8))
    }

    proptest! {
        #[test]
        fn exact_residual_is_zero((mvals, rvals) in small_matrix()) {
            let m = Matrix::from_fn(Backend::Exact, 4, 4, |r, c| Ok(q(mvals[r * 4 + c] + if r == c { 40 } else { 0 }, 1))).unwrap();
            let rhs = Matrix::from_fn(Backend::Exact, 4, 2, |r, c| Ok(q(rvals[r * 2 + c], 3))).unwrap();
            let x = dense_solve(&m, &rhs).unwrap();
            prop_assert!(m.mul(&x).unwrap().sub(&rhs).unwrap().is_zero());
        }

        #[test]
        fn float_residual_bound((mvals, rvals) in small_matrix()) {
            let b = Backend::float(50).unwrap();
            let m = Matrix::from_fn(b, 4, 4, |r, c| Ok(b.ratio(mvals[r * 4 + c], 7))).unwrap();
            let rhs = Matrix::from_fn(b, 4, 2, |r, c| Ok(b.ratio(rvals[r * 2 + c], 3))).unwrap();
            if let Ok(x) = dense_solve(&m, &rhs) {
                let res = m.mul(&x).unwrap().sub(&rhs).unwrap().max_abs().to_f64();
                let bound = 1e-38 * m.max_abs().to_f64() * x.max_abs().to_f64().max(1.0) * 16.0;
                prop_assert!(res <= bound, "residual {res} > {bound}");
            }
        }
    }
}
