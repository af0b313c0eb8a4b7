//! Bivariate moment functionals, the varying inner product and moment
//! matrices.

use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use dashu_int::IBig;
use dashu_ratio::RBig;

use crate::error::{Error, Result};
use crate::index::{monomial_vector, poly_dim};
use crate::matrix::Matrix;
use crate::poly::BiPoly;
use crate::quadrature::{Affine, AffineFactor, Density, GenericWeight, MomentQuadrature, QuadratureConfig};
use crate::scalar::{Backend, Scalar};
use crate::univariate::{arcsine_moments, UniMoments};

/// Provider of `μ_{k,m}` for integer, possibly negative, indices.
pub trait MomentFunctional: Send + Sync {
    fn backend(&self) -> Backend;
    /// Largest `|k|`, `|m|` that [`MomentFunctional::mu`] serves.
    fn max_abs_index(&self) -> i32;
    fn mu(&self, k: i32, m: i32) -> Result<Scalar>;

    /// `μ^{(n)}_{k,m} = μ_{k-n, m-n}`.
    fn mu_n(&self, n: usize, k: i32, m: i32) -> Result<Scalar> {
        self.mu(k - n as i32, m - n as i32)
    }
}

/// Built-in weight families.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum WeightSpec {
    /// `1/√((x₁-a)(b-x₁)) · 1/√((x₂-c)(d-x₂))` on `(a,b)×(c,d)`.
    ProductChebyshev {
        a: RBig,
        b: RBig,
        c: RBig,
        d: RBig,
    },
    /// `τ (x₁-a)^α (x₂-c(b-x₁))^β (d(b-x₁)-x₂)^γ` on
    /// `a < x₁ < b`, `c(b-x₁) < x₂ < d(b-x₁)`.
    TriangleKoornwinder {
        alpha: u32,
        beta: u32,
        gamma: u32,
        a: RBig,
        b: RBig,
        c: RBig,
        d: RBig,
        tau: RBig,
    },
    /// `(x₁-a)^α (x₂-a)^β (a+b-x₁-x₂)^γ` on the simplex with corner `(a,a)`.
    ShiftedSimplex {
        alpha: u32,
        beta: u32,
        gamma: u32,
        a: RBig,
        b: RBig,
    },
    Generic(GenericWeight),
}

fn int(v: u32) -> RBig {
    RBig::from(v)
}

impl WeightSpec {
    pub fn name(&self) -> &'static str {
        match self {
            WeightSpec::ProductChebyshev { .. } => "product-chebyshev",
            WeightSpec::TriangleKoornwinder { .. } => "triangle-koornwinder",
            WeightSpec::ShiftedSimplex { .. } => "shifted-simplex",
            WeightSpec::Generic(_) => "generic",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let zero = RBig::ZERO;
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        match self {
            WeightSpec::ProductChebyshev { a, b, c, d } => {
                if !(&zero < a && a < b && &zero < c && c < d) {
                    return bad("product-chebyshev needs 0 < a < b and 0 < c < d");
                }
            }
            WeightSpec::TriangleKoornwinder { a, b, c, d, tau, .. } => {
                if !(&zero < a && a < b && &zero < c && c < d) {
                    return bad("triangle-koornwinder needs 0 < a < b and 0 < c < d");
                }
                if tau <= &zero {
                    return bad("normalization must be positive");
                }
            }
            WeightSpec::ShiftedSimplex { a, b, .. } => {
                if !(&zero < a && a < b) {
                    return bad("shifted-simplex needs 0 < a < b");
                }
            }
            WeightSpec::Generic(g) => g.validate()?,
        }
        Ok(())
    }

    /// Quadrature description of the weight, when one applies.
    pub fn generic(&self) -> Option<GenericWeight> {
        match self {
            WeightSpec::ProductChebyshev { .. } => None,
            WeightSpec::TriangleKoornwinder { alpha, beta, gamma, a, b, c, d, tau } => Some(GenericWeight {
                x1_range: (a.clone(), b.clone()),
                lower: Affine::in_x1(c * b, -c.clone()),
                upper: Affine::in_x1(d * b, -d.clone()),
                density: Density::Factors {
                    scale: tau.clone(),
                    factors: vec![
                        AffineFactor { form: Affine::new(-a.clone(), RBig::ONE, RBig::ZERO), exponent: int(*alpha) },
                        AffineFactor { form: Affine::new(-(c * b), c.clone(), RBig::ONE), exponent: int(*beta) },
                        AffineFactor { form: Affine::new(d * b, -d.clone(), -RBig::ONE), exponent: int(*gamma) },
                    ],
                },
            }),
            WeightSpec::ShiftedSimplex { alpha, beta, gamma, a, b } => Some(GenericWeight {
                x1_range: (a.clone(), b.clone()),
                lower: Affine::in_x1(a.clone(), RBig::ZERO),
                upper: Affine::in_x1(a + b, -RBig::ONE),
                density: Density::Factors {
                    scale: RBig::ONE,
                    factors: vec![
                        AffineFactor { form: Affine::new(-a.clone(), RBig::ONE, RBig::ZERO), exponent: int(*alpha) },
                        AffineFactor { form: Affine::new(-a.clone(), RBig::ZERO, RBig::ONE), exponent: int(*beta) },
                        AffineFactor { form: Affine::new(a + b, -RBig::ONE, -RBig::ONE), exponent: int(*gamma) },
                    ],
                },
            }),
            WeightSpec::Generic(g) => Some(g.clone()),
        }
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSpec::ProductChebyshev { a, b, c, d } => {
                write!(f, "product-chebyshev on ({a},{b})x({c},{d})")
            }
            WeightSpec::TriangleKoornwinder { alpha, beta, gamma, a, b, c, d, tau } => write!(
                f,
                "triangle-koornwinder alpha={alpha} beta={beta} gamma={gamma} a={a} b={b} c={c} d={d} tau={tau}"
            ),
            WeightSpec::ShiftedSimplex { alpha, beta, gamma, a, b } => {
                write!(f, "shifted-simplex alpha={alpha} beta={beta} gamma={gamma} a={a} b={b}")
            }
            WeightSpec::Generic(_) => write!(f, "generic"),
        }
    }
}

/// `μ_{k,m} = ν₁(k)·ν₂(m)`.
pub fn product_moments(nu1: &dyn UniMoments, nu2: &dyn UniMoments, k: i32, m: i32) -> Result<Scalar> {
    nu1.nu(k)?.mul(&nu2.nu(m)?)
}

/// `∬ u^p v^q (S-u-v)^γ du dv = S^{p+q+γ+2} p! q! γ! / (p+q+γ+2)!`.
fn dirichlet(p: u32, q: u32, gamma: u32, s: &RBig) -> RBig {
    let fact = |n: u32| -> IBig { (1..=n).fold(IBig::ONE, |acc, i| acc * IBig::from(i)) };
    let total = p + q + gamma + 2;
    s.pow(total as usize) * RBig::from_parts_signed(fact(p) * fact(q) * fact(gamma), fact(total))
}

fn binomial(n: u32, k: u32) -> IBig {
    let mut acc = IBig::ONE;
    for i in 0..k {
        acc = acc * IBig::from(n - i) / IBig::from(i + 1);
    }
    acc
}

/// Exact shifted-simplex moment for non-negative indices, by expanding
/// `(u+a)^k (v+a)^m` and integrating termwise.
pub fn simplex_moment_exact(alpha: u32, beta: u32, gamma: u32, a: &RBig, b: &RBig, k: i32, m: i32) -> Result<RBig> {
    if k < 0 || m < 0 {
        return Err(Error::NotExact(format!("simplex moment ({k},{m}) has a negative index; use quadrature")));
    }
    let s = b - a;
    let (k, m) = (k as u32, m as u32);
    let mut total = RBig::ZERO;
    for r in 0..=k {
        for t in 0..=m {
            let coeff = RBig::from(binomial(k, r) * binomial(m, t)) * a.pow((k - r + m - t) as usize);
            total += coeff * dirichlet(alpha + r, beta + t, gamma, &s);
        }
    }
    Ok(total)
}

/// One-off quadrature moment (no memoization).
pub fn quadrature_moment(
    spec: &WeightSpec,
    cfg: &QuadratureConfig,
    backend: Backend,
    k: i32,
    m: i32,
) -> Result<Scalar> {
    let g = spec.generic().ok_or_else(|| Error::InvalidArgument(format!("{} has no quadrature form", spec.name())))?;
    let mut q = MomentQuadrature::new(g, cfg.clone(), backend)?;
    backend.from_float(&q.moment(k, m)?)
}

struct State {
    cache: HashMap<(i32, i32), Scalar>,
    quad: Option<MomentQuadrature>,
}

/// Memoizing moment provider for a [`WeightSpec`].
pub struct Moments {
    spec: WeightSpec,
    backend: Backend,
    window: i32,
    divisor: Option<Scalar>,
    perturb: HashMap<(i32, i32), Scalar>,
    state: Mutex<State>,
}

/// Default validity window for a top degree `n_max`.
pub fn default_window(n_max: usize) -> i32 {
    2 * n_max as i32 + 2
}

impl Moments {
    pub fn new(spec: WeightSpec, backend: Backend, window: i32) -> Result<Self> {
        Self::with_config(spec, backend, window, QuadratureConfig::default())
    }

    pub fn with_config(spec: WeightSpec, backend: Backend, window: i32, cfg: QuadratureConfig) -> Result<Self> {
        spec.validate()?;
        if window < 0 {
            return Err(Error::InvalidArgument("window must be non-negative".into()));
        }
        let quad = match (&spec, backend) {
            (WeightSpec::ProductChebyshev { .. }, _) => None,
            (_, Backend::Float { .. }) => {
                Some(MomentQuadrature::new(spec.generic().expect("quadrature form"), cfg, backend)?)
            }
            (WeightSpec::ShiftedSimplex { .. }, Backend::Exact) => None,
            (_, Backend::Exact) => {
                return Err(Error::NotExact(format!("{} moments need the float backend", spec.name())))
            }
        };
        Ok(Moments {
            spec,
            backend,
            window,
            divisor: None,
            perturb: HashMap::new(),
            state: Mutex::new(State { cache: HashMap::new(), quad }),
        })
    }

    /// Rescales every moment so that `μ_{0,0} = 1`.
    pub fn normalized(mut self) -> Result<Self> {
        let m00 = self.raw(0, 0)?;
        self.divisor = Some(m00);
        self.state.lock().expect("moment state").cache.clear();
        Ok(self)
    }

    /// Adds `delta` to `μ_{k,m}` (after normalization). Used to exercise
    /// failure paths.
    pub fn with_perturbation(mut self, k: i32, m: i32, delta: Scalar) -> Self {
        self.perturb.insert((k, m), delta);
        self.state.lock().expect("moment state").cache.clear();
        self
    }

    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    pub fn is_normalized(&self) -> bool {
        self.divisor.is_some()
    }

    fn raw(&self, k: i32, m: i32) -> Result<Scalar> {
        let mut state = self.state.lock().expect("moment state");
        Self::raw_locked(&self.spec, self.backend, &mut state, k, m)
    }

    fn raw_locked(spec: &WeightSpec, backend: Backend, state: &mut State, k: i32, m: i32) -> Result<Scalar> {
        match spec {
            WeightSpec::ProductChebyshev { a, b, c, d } => {
                arcsine_moments(backend, a, b, k)?.mul(&arcsine_moments(backend, c, d, m)?)
            }
            WeightSpec::ShiftedSimplex { alpha, beta, gamma, a, b } if backend.is_exact() => {
                Ok(backend.rational(&simplex_moment_exact(*alpha, *beta, *gamma, a, b, k, m)?))
            }
            _ => {
                let q = state.quad.as_mut().expect("quadrature state");
                backend.from_float(&q.moment(k, m)?)
            }
        }
    }
}

impl MomentFunctional for Moments {
    fn backend(&self) -> Backend {
        self.backend
    }

    fn max_abs_index(&self) -> i32 {
        self.window
    }

    fn mu(&self, k: i32, m: i32) -> Result<Scalar> {
        if k.abs() > self.window || m.abs() > self.window {
            return Err(Error::OutsideWindow { k, m, max: self.window });
        }
        let mut state = self.state.lock().expect("moment state");
        if let Some(v) = state.cache.get(&(k, m)) {
            return Ok(v.clone());
        }
        let mut v = Self::raw_locked(&self.spec, self.backend, &mut state, k, m)?;
        if let Some(d) = &self.divisor {
            v = v.div(d)?;
        }
        if let Some(delta) = self.perturb.get(&(k, m)) {
            v = v.add(delta)?;
        }
        state.cache.insert((k, m), v.clone());
        Ok(v)
    }
}

/// `⟨f, g⟩_n = Σ f_{ij} g_{i'j'} μ_{i+i'-n, j+j'-n}`.
pub fn vip(f: &dyn MomentFunctional, p: &BiPoly, q: &BiPoly, n: usize) -> Result<Scalar> {
    let mut acc = f.backend().zero();
    for (ma, a) in p.terms() {
        for (mb, b) in q.terms() {
            let idx = *ma + *mb;
            let mu = f.mu_n(n, idx.i, idx.j)?;
            acc = acc.add(&a.mul(b)?.mul(&mu)?)?;
        }
    }
    Ok(acc)
}

/// `M^{(n)}_{r,s} = ⟨𝕏_r, 𝕏_sᵀ⟩_n`.
pub fn moment_block(f: &dyn MomentFunctional, r: usize, s: usize, n: usize) -> Result<Matrix> {
    let xr = monomial_vector(r);
    let xs = monomial_vector(s);
    Matrix::from_fn(f.backend(), r + 1, s + 1, |u, v| {
        let idx = xr[u] + xs[v];
        f.mu_n(n, idx.i, idx.j)
    })
}

/// Block matrix `(M^{(n)}_{r,s})_{0 ≤ r,s ≤ top}`.
fn block_matrix(f: &dyn MomentFunctional, top: usize, n: usize) -> Result<Matrix> {
    let size = poly_dim(top);
    let mut out = Matrix::zeros(f.backend(), size, size);
    let offset = |r: usize| if r == 0 { 0 } else { poly_dim(r - 1) };
    for r in 0..=top {
        for s in 0..=top {
            out.set_block(offset(r), offset(s), &moment_block(f, r, s, n)?);
        }
    }
    Ok(out)
}

/// `𝓜_n`, of size `t_n × t_n`.
pub fn moment_matrix(f: &dyn MomentFunctional, n: usize) -> Result<Matrix> {
    block_matrix(f, n, n)
}

/// `𝓜̂_n`: `𝓜_n` without its last block row and column.
pub fn truncated_moment_matrix(f: &dyn MomentFunctional, n: usize) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("truncated moment matrix needs n >= 1".into()));
    }
    block_matrix(f, n - 1, n)
}
