//! Monic univariate orthogonal polynomials from moment sequences.

use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use dashu_int::IBig;
use dashu_ratio::RBig;

use crate::error::{Error, Result};
use crate::index::MultiIndex;
use crate::matrix::{dense_solve, max_abs, Matrix};
use crate::poly::BiPoly;
use crate::quadrature::{integrate_1d, pow_rational, rat, QuadratureConfig};
use crate::scalar::{Backend, Scalar};

/// Moment sequence `ν(j)` of a univariate weight.
pub trait UniMoments: Send + Sync {
    fn backend(&self) -> Backend;
    fn nu(&self, j: i32) -> Result<Scalar>;
}

/// Adapter turning a closure into a moment provider.
pub struct FnMoments<F> {
    backend: Backend,
    f: F,
}

impl<F: Fn(i32) -> Result<Scalar> + Send + Sync> FnMoments<F> {
    pub fn new(backend: Backend, f: F) -> Self {
        FnMoments { backend, f }
    }
}

impl<F: Fn(i32) -> Result<Scalar> + Send + Sync> UniMoments for FnMoments<F> {
    fn backend(&self) -> Backend {
        self.backend
    }

    fn nu(&self, j: i32) -> Result<Scalar> {
        (self.f)(j)
    }
}

/// Moments of `w(x)/xⁿ` from those of `w`.
pub struct Divided<M> {
    pub inner: M,
    pub power: i32,
}

impl<M: UniMoments> UniMoments for Divided<M> {
    fn backend(&self) -> Backend {
        self.inner.backend()
    }

    fn nu(&self, j: i32) -> Result<Scalar> {
        self.inner.nu(j - self.power)
    }
}

fn binomial(n: u32, k: u32) -> IBig {
    let mut acc = IBig::ONE;
    for i in 0..k {
        acc = acc * IBig::from(n - i) / IBig::from(i + 1);
    }
    acc
}

fn rational_powi(r: &RBig, n: i32) -> RBig {
    let p = r.pow(n.unsigned_abs() as usize);
    if n < 0 {
        RBig::ONE / p
    } else {
        p
    }
}

fn ratio(n: IBig, d: IBig) -> RBig {
    RBig::from_parts_signed(n, d)
}

/// Moment `∫ xʲ dx / √((x-a)(b-x))` over `(a, b)`.
///
/// Non-negative `j` use the closed form `π·E[(m + hX)ʲ]` with `X` arcsine on
/// `[-1, 1]`; negative `j` use `μ_{-(k+1)} = μ_k / β^{2k+1}`, `β = √(ab)`.
pub fn arcsine_moments(backend: Backend, a: &RBig, b: &RBig, j: i32) -> Result<Scalar> {
    if !(&RBig::ZERO < a && a < b) {
        return Err(Error::InvalidArgument("arcsine weight needs 0 < a < b".into()));
    }
    if j >= 0 {
        let two = RBig::from(2u8);
        let m = (a + b) / &two;
        let h = (b - a) / &two;
        let mut sum = RBig::ZERO;
        for i in (0..=j as u32).step_by(2) {
            let central = ratio(binomial(i, i / 2), IBig::from(4u8).pow((i / 2) as usize));
            sum += RBig::from(binomial(j as u32, i)) * m.pow((j as u32 - i) as usize) * h.pow(i as usize) * central;
        }
        return Ok(backend.rational_pi(&sum, 1));
    }
    let k = -j - 1;
    let pos = arcsine_moments(backend, a, b, k)?;
    let beta_sq = backend.rational(&(a * b));
    let beta =
        beta_sq.sqrt().map_err(|_| Error::NotExact(format!("sqrt({}) is irrational; use the float backend", a * b)))?;
    pos.div(&beta.powi(2 * k + 1)?)
}

/// Arcsine (Chebyshev first kind) weight on `(a, b)`.
#[derive(Clone, Debug)]
pub struct Arcsine {
    pub backend: Backend,
    pub a: RBig,
    pub b: RBig,
}

impl UniMoments for Arcsine {
    fn backend(&self) -> Backend {
        self.backend
    }

    fn nu(&self, j: i32) -> Result<Scalar> {
        arcsine_moments(self.backend, &self.a, &self.b, j)
    }
}

/// `scale · x^(-x_power) · Π (c0 + c1·x)^e` on `(a, b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct UniWeight {
    pub a: RBig,
    pub b: RBig,
    pub scale: RBig,
    /// `(c0, c1, e)` triples.
    pub factors: Vec<(RBig, RBig, RBig)>,
    pub x_power: i32,
}

impl UniWeight {
    /// `(x-a)^α (b-x)^β` on `(a, b)`.
    pub fn jacobi(a: RBig, b: RBig, alpha: RBig, beta: RBig) -> Self {
        let factors = vec![(-a.clone(), RBig::ONE, alpha), (b.clone(), -RBig::ONE, beta)];
        UniWeight { a, b, scale: RBig::ONE, factors, x_power: 0 }
    }

    pub fn times(mut self, c0: RBig, c1: RBig, e: RBig) -> Self {
        self.factors.push((c0, c1, e));
        self
    }

    pub fn divided_by_power(mut self, n: i32) -> Self {
        self.x_power += n;
        self
    }

    /// Combines factors with proportional forms (such as `b - x` appearing
    /// twice) so endpoint exponents are judged on the net power.
    pub fn simplified(&self) -> Self {
        let mut out: Vec<(RBig, RBig, RBig)> = Vec::new();
        let mut scale = self.scale.clone();
        for (c0, c1, e) in &self.factors {
            if e.is_zero() {
                continue;
            }
            let hit = out.iter().position(|(d0, d1, _)| !c1.is_zero() && !d1.is_zero() && c0 * d1 == d0 * c1);
            if let Some(p) = hit {
                // c0 + c1·x = λ·(d0 + d1·x)
                let lambda = c1 / &out[p].1;
                if lambda.is_one() || e.denominator().is_one() {
                    if !lambda.is_one() {
                        let n = i32::try_from(e.numerator()).expect("small exponent");
                        scale *= rational_powi(&lambda, n);
                    }
                    out[p].2 += e;
                    continue;
                }
            }
            out.push((c0.clone(), c1.clone(), e.clone()));
        }
        out.retain(|f| !f.2.is_zero());
        UniWeight { a: self.a.clone(), b: self.b.clone(), scale, factors: out, x_power: self.x_power }
    }

    /// Rejects weights whose integral diverges at an endpoint or whose
    /// factors vanish inside the interval.
    pub fn check_integrable(&self) -> Result<()> {
        if !(RBig::ZERO < self.a && self.a < self.b) {
            return Err(Error::InvalidArgument("univariate weight needs 0 < a < b".into()));
        }
        for end in [&self.a, &self.b] {
            let mut net = RBig::ZERO;
            for (c0, c1, e) in &self.factors {
                if (c0 + c1 * end).is_zero() {
                    net += e;
                }
            }
            if net <= -RBig::ONE {
                return Err(Error::NonIntegrable(format!("net endpoint exponent {net} at x = {end}")));
            }
        }
        for (c0, c1, e) in &self.factors {
            if c1.is_zero() {
                continue;
            }
            let root = -(c0 / c1);
            if self.a < root && root < self.b && !(e.denominator().is_one() && e >= &RBig::ZERO) {
                return Err(Error::NonIntegrable(format!(
                    "factor vanishes inside the interval at {root} with exponent {e}"
                )));
            }
        }
        Ok(())
    }

    /// Coefficients (ascending) of `scale · Π factors` when every exponent is
    /// a non-negative integer.
    fn polynomial_part(&self) -> Option<Vec<RBig>> {
        let mut poly = vec![self.scale.clone()];
        for (c0, c1, e) in &self.factors {
            if !e.denominator().is_one() || e < &RBig::ZERO {
                return None;
            }
            let times: usize = e.numerator().clone().try_into().ok()?;
            for _ in 0..times {
                let mut next = vec![RBig::ZERO; poly.len() + 1];
                for (i, p) in poly.iter().enumerate() {
                    next[i] += p * c0;
                    next[i + 1] += p * c1;
                }
                poly = next;
            }
        }
        Some(poly)
    }

    /// Exact `∫ xʲ w(x) dx` when the integrand is a polynomial.
    pub fn exact_moment(&self, j: i32) -> Option<RBig> {
        let shift = j - self.x_power;
        if shift < 0 {
            return None;
        }
        let poly = self.polynomial_part()?;
        let mut total = RBig::ZERO;
        for (i, c) in poly.iter().enumerate() {
            let p = i + shift as usize + 1;
            total += c * (self.b.pow(p) - self.a.pow(p)) / RBig::from(p);
        }
        Some(total)
    }

    /// Float moment by refined Gauss–Legendre quadrature.
    pub fn quadrature_moment(&self, backend: Backend, cfg: &QuadratureConfig, j: i32) -> Result<Scalar> {
        let f = integrate_1d(
            |x| {
                let bits = x.precision();
                let mut v = rat(&self.scale, bits) * x.powi(IBig::from(j - self.x_power));
                for (c0, c1, e) in &self.factors {
                    let base = rat(c0, bits) + rat(c1, bits) * x;
                    v *= pow_rational(&base, e, bits)?;
                }
                Ok(v)
            },
            &self.a,
            &self.b,
            cfg,
            backend,
        )?;
        backend.from_float(&f)
    }

    pub fn moment(&self, backend: Backend, cfg: &QuadratureConfig, j: i32) -> Result<Scalar> {
        self.check_integrable()?;
        match (self.exact_moment(j), backend) {
            (Some(r), _) => Ok(backend.rational(&r)),
            (None, Backend::Exact) => Err(Error::NotExact(format!("moment {j} of a non-polynomial weight"))),
            (None, Backend::Float { .. }) => self.quadrature_moment(backend, cfg, j),
        }
    }
}

/// Memoized moment provider for a [`UniWeight`].
pub struct WeightMoments {
    weight: UniWeight,
    backend: Backend,
    cfg: QuadratureConfig,
    cache: Mutex<HashMap<i32, Scalar>>,
}

impl WeightMoments {
    pub fn new(weight: UniWeight, backend: Backend, cfg: QuadratureConfig) -> Result<Self> {
        let weight = weight.simplified();
        weight.check_integrable()?;
        Ok(WeightMoments { weight, backend, cfg, cache: Mutex::new(HashMap::new()) })
    }

    pub fn weight(&self) -> &UniWeight {
        &self.weight
    }
}

impl UniMoments for WeightMoments {
    fn backend(&self) -> Backend {
        self.backend
    }

    fn nu(&self, j: i32) -> Result<Scalar> {
        let mut cache = self.cache.lock().expect("moment cache");
        if let Some(v) = cache.get(&j) {
            return Ok(v.clone());
        }
        let v = self.weight.moment(self.backend, &self.cfg, j)?;
        cache.insert(j, v.clone());
        Ok(v)
    }
}

/// `∫ xʲ (x-a)^α (b-x)^β x⁻ⁿ dx` over `(a, b)`.
pub fn modified_jacobi_moments(
    backend: Backend,
    alpha: &RBig,
    beta: &RBig,
    interval: (&RBig, &RBig),
    n: i32,
    j: i32,
) -> Result<Scalar> {
    UniWeight::jacobi(interval.0.clone(), interval.1.clone(), alpha.clone(), beta.clone()).divided_by_power(n).moment(
        backend,
        &QuadratureConfig::default(),
        j,
    )
}

/// Univariate polynomial with ascending coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct UniPoly {
    coeffs: Vec<Scalar>,
    monic: bool,
}

impl UniPoly {
    pub fn new(coeffs: Vec<Scalar>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument("polynomial needs at least one coefficient".into()));
        }
        let monic = coeffs.last().is_some_and(Scalar::is_one);
        Ok(UniPoly { coeffs, monic })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_monic(&self) -> bool {
        self.monic
    }

    pub fn coeffs(&self) -> &[Scalar] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> &Scalar {
        &self.coeffs[i]
    }

    pub fn backend(&self) -> Backend {
        self.coeffs[0].backend()
    }

    pub fn eval(&self, x: &Scalar) -> Result<Scalar> {
        let mut acc = self.backend().zero();
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(x)?.add(c)?;
        }
        Ok(acc)
    }

    /// The same polynomial in `x₁` (`axis = 1`) or `x₂` (`axis = 2`).
    pub fn to_bipoly(&self, axis: u8) -> Result<BiPoly> {
        let b = self.backend();
        BiPoly::from_terms(
            b,
            self.coeffs.iter().enumerate().map(|(i, c)| {
                let m = if axis == 1 { MultiIndex::new(i as i32, 0) } else { MultiIndex::new(0, i as i32) };
                (m, c.clone())
            }),
        )
    }

    /// `max_ℓ |Σ_j c_j ν(j+ℓ)|` over `ℓ < degree`.
    pub fn orthogonality_residual(&self, nu: &dyn UniMoments) -> Result<Scalar> {
        let mut vals = Vec::new();
        for l in 0..self.degree() as i32 {
            let mut s = nu.backend().zero();
            for (j, c) in self.coeffs.iter().enumerate() {
                s = s.add(&c.mul(&nu.nu(j as i32 + l)?)?)?;
            }
            vals.push(s);
        }
        Ok(max_abs(vals.iter(), nu.backend()))
    }
}

impl fmt::Display for UniPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| match (i, c.is_one()) {
                (0, _) => format!("({c})"),
                (1, true) => "x".into(),
                (_, true) => format!("x^{i}"),
                (1, false) => format!("({c})*x"),
                (_, false) => format!("({c})*x^{i}"),
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Monic degree-`m` orthogonal polynomial: solves the shifted Hankel system
/// `Σ_{j<m} c_j ν(j+ℓ) = -ν(m+ℓ)`, `ℓ = 0..m`.
pub fn monic_uops(nu: &dyn UniMoments, m: usize) -> Result<UniPoly> {
    let b = nu.backend();
    if m == 0 {
        return UniPoly::new(vec![b.one()]);
    }
    let mut hankel_vals = Vec::with_capacity(2 * m);
    for j in 0..2 * m as i32 {
        hankel_vals.push(nu.nu(j)?);
    }
    let h = Matrix::from_fn(b, m, m, |l, j| Ok(hankel_vals[l + j].clone()))?;
    let rhs = Matrix::from_fn(b, m, 1, |l, _| Ok(hankel_vals[m + l].neg()))?;
    let c = dense_solve(&h, &rhs).map_err(|e| Error::Singular(format!("Hankel system of order {m}: {e}")))?;
    let mut coeffs: Vec<Scalar> = (0..m).map(|j| c.get(j, 0).clone()).collect();
    coeffs.push(b.one());
    UniPoly::new(coeffs)
}

/// Evaluates `Σ c_i ν(i + shift)`, the integral of `x^shift·p(x)` against
/// the weight behind `nu`.
pub fn integrate_against(p: &UniPoly, nu: &dyn UniMoments, shift: i32) -> Result<Scalar> {
    let mut s = nu.backend().zero();
    for (i, c) in p.coeffs().iter().enumerate() {
        if !c.is_zero() {
            s = s.add(&c.mul(&nu.nu(i as i32 + shift)?)?)?;
        }
    }
    Ok(s)
}
