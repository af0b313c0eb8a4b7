//! Monomial exponents and the ordered monomial vectors they form.

use std::fmt;
use std::ops::Add;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Backend;

/// Exponent pair `(i, j)` of `x₁^i x₂^j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    pub i: i32,
    pub j: i32,
}

impl MultiIndex {
    pub const ZERO: MultiIndex = MultiIndex { i: 0, j: 0 };

    pub const fn new(i: i32, j: i32) -> Self {
        MultiIndex { i, j }
    }

    pub fn degree(&self) -> i32 {
        self.i + self.j
    }

    pub fn is_polynomial(&self) -> bool {
        self.i >= 0 && self.j >= 0
    }
}

impl Add for MultiIndex {
    type Output = MultiIndex;

    fn add(self, o: MultiIndex) -> MultiIndex {
        MultiIndex::new(self.i + o.i, self.j + o.j)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

/// `[(n,0), (n-1,1), …, (0,n)]`.
pub fn monomial_vector(n: usize) -> Vec<MultiIndex> {
    let n = n as i32;
    (0..=n).map(|k| MultiIndex::new(n - k, k)).collect()
}

/// `[(0,-n), (-1,-n+1), …, (-n,0)]`, i.e. `x₁⁻ⁿx₂⁻ⁿ` times [`monomial_vector`].
pub fn negative_monomial_vector(n: usize) -> Result<Vec<MultiIndex>> {
    if n == 0 {
        return Err(Error::InvalidArgument("negative monomial vector needs n >= 1".into()));
    }
    let shift = MultiIndex::new(-(n as i32), -(n as i32));
    Ok(monomial_vector(n).into_iter().map(|m| m + shift).collect())
}

/// Number of monomials of total degree at most `n`.
pub fn poly_dim(n: usize) -> usize {
    (n + 1) * (n + 2) / 2
}

/// Monomials of degree `0..=n`, each block in [`monomial_vector`] order.
pub fn monomials_up_to(n: usize) -> Vec<MultiIndex> {
    (0..=n).flat_map(monomial_vector).collect()
}

/// Position of `m` inside [`monomials_up_to`].
pub fn stacked_position(m: MultiIndex) -> usize {
    debug_assert!(m.is_polynomial());
    let d = m.degree() as usize;
    let before = if d == 0 { 0 } else { poly_dim(d - 1) };
    before + m.j as usize
}

/// `L_{n,axis}`: `[I | 0]` for axis 1, `[0 | I]` for axis 2.
pub fn shift_matrix(backend: Backend, n: usize, axis: u8) -> Result<Matrix> {
    let offset = match axis {
        1 => 0,
        2 => 1,
        _ => return Err(Error::InvalidArgument(format!("axis must be 1 or 2, got {axis}"))),
    };
    let mut l = Matrix::zeros(backend, n + 1, n + 2);
    for r in 0..=n {
        l.set(r, r + offset, backend.one());
    }
    Ok(l)
}
