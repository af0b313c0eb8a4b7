//! Bivariate systems built from two univariate families and a linear `ρ`.

use dashu_ratio::RBig;

use crate::error::{Error, Result};
use crate::index::MultiIndex;
use crate::matrix::Matrix;
use crate::moments::WeightSpec;
use crate::poly::{apply, BiPoly, PolyVec};
use crate::quadrature::{Affine, AffineFactor, Density, GenericWeight, QuadratureConfig};
use crate::scalar::{Backend, Scalar};
use crate::univariate::{integrate_against, monic_uops, FnMoments, UniMoments, UniPoly, UniWeight, WeightMoments};

/// `W(x₁,x₂) = scale · w₁(x₁) · w₂(x₂/ρ(x₁))` on
/// `a < x₁ < b`, `c·ρ(x₁) < x₂ < d·ρ(x₁)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KoornwinderSpec {
    pub w1: UniWeight,
    pub w2: UniWeight,
    /// `ρ(x) = rho.0 + rho.1·x`.
    pub rho: (RBig, RBig),
    pub scale: RBig,
}

fn int(v: u32) -> RBig {
    RBig::from(v)
}

impl KoornwinderSpec {
    /// `w₁ = (x−a)^α (b−x)^{β+γ}`, `w₂ = (t−c)^β (d−t)^γ`, `ρ = b − x`, giving
    /// `τ (x₁−a)^α (x₂−cρ)^β (dρ−x₂)^γ` on the triangle below `x₂ = d(b−x₁)`.
    #[allow(clippy::too_many_arguments)]
    pub fn triangle(alpha: u32, beta: u32, gamma: u32, a: RBig, b: RBig, c: RBig, d: RBig, tau: RBig) -> Self {
        KoornwinderSpec {
            w1: UniWeight::jacobi(a, b.clone(), int(alpha), int(beta + gamma)),
            w2: UniWeight::jacobi(c, d, int(beta), int(gamma)),
            rho: (b, -RBig::ONE),
            scale: tau,
        }
    }

    /// The construction behind a bundled weight, where one exists.
    pub fn from_weight(spec: &WeightSpec) -> Option<Self> {
        match spec {
            WeightSpec::TriangleKoornwinder { alpha, beta, gamma, a, b, c, d, tau } => {
                Some(Self::triangle(*alpha, *beta, *gamma, a.clone(), b.clone(), c.clone(), d.clone(), tau.clone()))
            }
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.rho.1 == RBig::ZERO {
            return bad("rho must have degree one");
        }
        if !(RBig::ZERO < self.w1.a && self.w1.a < self.w1.b && RBig::ZERO < self.w2.a && self.w2.a < self.w2.b) {
            return bad("need 0 < a < b and 0 < c < d");
        }
        // ρ(b) = 0 is allowed: the domain then closes to a vertex there
        let at = |x: &RBig| &self.rho.0 + &self.rho.1 * x;
        if at(&self.w1.a) <= RBig::ZERO || at(&self.w1.b) < RBig::ZERO {
            return bad("rho must be positive on (a, b)");
        }
        if self.scale <= RBig::ZERO {
            return bad("scale must be positive");
        }
        self.w1.simplified().check_integrable()?;
        self.w2.simplified().check_integrable()
    }

    fn rho_scalars(&self, backend: Backend) -> (Scalar, Scalar) {
        (backend.rational(&self.rho.0), backend.rational(&self.rho.1))
    }

    /// Weight of `p^{(n,k)}`: `ρ^{2k+1−n} w₁ / xⁿ`.
    pub fn p_weight(&self, n: usize, k: usize) -> UniWeight {
        self.w1
            .clone()
            .times(self.rho.0.clone(), self.rho.1.clone(), RBig::from(2 * k as i64 + 1 - n as i64))
            .divided_by_power(n as i32)
    }

    /// Weight of `q^{(n)}`: `w₂ / tⁿ`.
    pub fn q_weight(&self, n: usize) -> UniWeight {
        self.w2.clone().divided_by_power(n as i32)
    }

    /// The induced bivariate weight as a quadrature description.
    pub fn induced_weight(&self) -> GenericWeight {
        let (r0, r1) = self.rho.clone();
        let mut factors = Vec::new();
        let mut rho_power = RBig::ZERO;
        for (c0, c1, e) in &self.w1.factors {
            factors.push(AffineFactor { form: Affine::in_x1(c0.clone(), c1.clone()), exponent: e.clone() });
        }
        if self.w1.x_power != 0 {
            factors.push(AffineFactor {
                form: Affine::in_x1(RBig::ZERO, RBig::ONE),
                exponent: RBig::from(-self.w1.x_power),
            });
        }
        // (c0 + c1·x₂/ρ)^e = (c0·ρ + c1·x₂)^e · ρ^(−e)
        for (c0, c1, e) in &self.w2.factors {
            factors.push(AffineFactor { form: Affine::new(c0 * &r0, c0 * &r1, c1.clone()), exponent: e.clone() });
            rho_power -= e;
        }
        if self.w2.x_power != 0 {
            factors.push(AffineFactor {
                form: Affine::new(RBig::ZERO, RBig::ZERO, RBig::ONE),
                exponent: RBig::from(-self.w2.x_power),
            });
            rho_power += RBig::from(self.w2.x_power);
        }
        if rho_power != RBig::ZERO {
            factors.push(AffineFactor { form: Affine::in_x1(r0.clone(), r1.clone()), exponent: rho_power });
        }
        let factors = merge_factors(factors);
        GenericWeight {
            x1_range: (self.w1.a.clone(), self.w1.b.clone()),
            lower: Affine::in_x1(&self.w2.a * &r0, &self.w2.a * &r1),
            upper: Affine::in_x1(&self.w2.b * &r0, &self.w2.b * &r1),
            density: Density::Factors { scale: &self.scale * &self.w1.scale * &self.w2.scale, factors },
        }
    }

    pub fn induced_spec(&self) -> WeightSpec {
        WeightSpec::Generic(self.induced_weight())
    }
}

/// Adds exponents of identical forms and drops zero powers, so that
/// cancelling `ρ` factors never reach the quadrature.
fn merge_factors(factors: Vec<AffineFactor>) -> Vec<AffineFactor> {
    let mut out: Vec<AffineFactor> = Vec::new();
    for f in factors {
        match out.iter_mut().find(|g| g.form == f.form) {
            Some(g) => g.exponent += &f.exponent,
            None => out.push(f),
        }
    }
    out.retain(|f| f.exponent != RBig::ZERO);
    out
}

/// `ρ^k · q(x₂/ρ) = Σ_j q_j x₂^j ρ^{k−j}`.
pub fn homogenize_q(k: usize, q: &UniPoly, rho: (&Scalar, &Scalar)) -> Result<BiPoly> {
    let b = q.backend();
    if q.degree() != k {
        return Err(Error::InvalidArgument(format!("q has degree {}, expected {k}", q.degree())));
    }
    let rho_poly = BiPoly::from_terms(b, [(MultiIndex::ZERO, rho.0.clone()), (MultiIndex::new(1, 0), rho.1.clone())])?;
    let mut powers = vec![BiPoly::one(b)];
    for j in 1..=k {
        powers.push(powers[j - 1].mul(&rho_poly)?);
    }
    let mut out = BiPoly::zero(b);
    for (j, c) in q.coeffs().iter().enumerate() {
        let term = powers[k - j].shift(MultiIndex::new(0, j as i32)).scale(c)?;
        out = out.add(&term)?;
    }
    Ok(out)
}

/// Univariate factors of one entry.
pub struct KoornwinderEntry {
    pub p: UniPoly,
    pub q: UniPoly,
    pub poly: BiPoly,
}

pub fn koornwinder_entry(
    spec: &KoornwinderSpec,
    n: usize,
    k: usize,
    backend: Backend,
    cfg: &QuadratureConfig,
) -> Result<KoornwinderEntry> {
    let pm = WeightMoments::new(spec.p_weight(n, k), backend, cfg.clone())?;
    let qm = WeightMoments::new(spec.q_weight(n), backend, cfg.clone())?;
    let p = monic_uops(&pm, n - k)?;
    let q = monic_uops(&qm, k)?;
    let (r0, r1) = spec.rho_scalars(backend);
    let poly = p.to_bipoly(1)?.mul(&homogenize_q(k, &q, (&r0, &r1))?)?;
    Ok(KoornwinderEntry { p, q, poly })
}

/// `(P_{n,0}, …, P_{0,n})` with `P_{n−k,k} = p^{(n,k)}_{n−k}(x₁) ρ^k q^{(n)}_k(x₂/ρ)`.
pub fn build_koornwinder_level(
    spec: &KoornwinderSpec,
    n: usize,
    backend: Backend,
    cfg: &QuadratureConfig,
) -> Result<PolyVec> {
    spec.validate()?;
    let entries =
        (0..=n).map(|k| koornwinder_entry(spec, n, k, backend, cfg).map(|e| e.poly)).collect::<Result<Vec<_>>>()?;
    PolyVec::new(n, entries)
}

/// The two univariate integrals that factor `⟨x₁^{m−j} x₂^j, P_{n−k,k}⟩_n`:
/// `∫ x^{m−j} p ρ^{j+k+1−n} w₁ x^{−n} dx` and `∫ t^j q w₂ t^{−n} dt`.
pub fn orthogonality_split_check(
    spec: &KoornwinderSpec,
    n: usize,
    k: usize,
    m: usize,
    j: usize,
    backend: Backend,
    cfg: &QuadratureConfig,
) -> Result<(Scalar, Scalar)> {
    if m >= n || j > m || k > n {
        return Err(Error::InvalidArgument(format!("need m < n, j <= m, k <= n (n={n}, k={k}, m={m}, j={j})")));
    }
    let entry = koornwinder_entry(spec, n, k, backend, cfg)?;
    let first_w = spec
        .w1
        .clone()
        .times(spec.rho.0.clone(), spec.rho.1.clone(), RBig::from((j + k + 1) as i64 - n as i64))
        .divided_by_power(n as i32);
    let first = integrate_against(&entry.p, &WeightMoments::new(first_w, backend, cfg.clone())?, (m - j) as i32)?;
    let qm = WeightMoments::new(spec.q_weight(n), backend, cfg.clone())?;
    let second = integrate_against(&entry.q, &qm, j as i32)?;
    Ok((first, second))
}

/// Product construction `P_{n−k,k} = p^{(n)}_{n−k}(x₁) q^{(n)}_k(x₂)` for a
/// product weight, with `p^{(n)}`, `q^{(n)}` orthogonal for `ν₁/xⁿ`, `ν₂/tⁿ`.
pub fn build_product_level(nu1: &dyn UniMoments, nu2: &dyn UniMoments, n: usize) -> Result<PolyVec> {
    let b = nu1.backend();
    let shift = n as i32;
    let d1 = FnMoments::new(b, |j| nu1.nu(j - shift));
    let d2 = FnMoments::new(b, |j| nu2.nu(j - shift));
    let entries = (0..=n)
        .map(|k| {
            let p = monic_uops(&d1, n - k)?.to_bipoly(1)?;
            let q = monic_uops(&d2, k)?.to_bipoly(2)?;
            p.mul(&q)
        })
        .collect::<Result<Vec<_>>>()?;
    PolyVec::new(n, entries)
}

/// Splits `K = G ℙ` for a vector `K` of degree `n` and a monic `ℙ`:
/// returns `G` (the leading matrix of `K`) and `max |K − Gℙ|`.
pub fn leading_transform(k: &PolyVec, monic: &PolyVec) -> Result<(Matrix, Scalar)> {
    let g = k.leading_matrix();
    let rebuilt = apply(&g, monic, k.degree())?;
    Ok((g.clone(), k.sub(&rebuilt)?.max_abs_coeff()))
}

/// Largest deviation of `G` from unit lower-triangular form.
pub fn unit_lower_defect(g: &Matrix) -> Result<Scalar> {
    let b = g.backend();
    let mut worst = b.zero();
    for r in 0..g.rows() {
        for c in 0..g.cols() {
            let v = if r == c {
                g.get(r, c).sub(&b.one())?.abs()
            } else if c > r {
                g.get(r, c).abs()
            } else {
                continue;
            };
            if v.abs_gt(&worst) {
                worst = v;
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::Moments;
    use crate::univariate::Arcsine;
    use crate::vops::build_level;

    fn r(n: i64, d: i64) -> RBig {
        RBig::from_parts_signed(n.into(), d.into())
    }

    fn triangle() -> KoornwinderSpec {
        KoornwinderSpec::triangle(1, 2, 1, r(1, 1), r(2, 1), r(3, 1), r(5, 1), r(45, 2))
    }

    #[test]
    fn homogenize_small_cases() {
        let e = Backend::Exact;
        let q = UniPoly::new(vec![e.int(-7), e.one()]).unwrap();
        let (r0, r1) = (e.int(2), e.int(-1));
        let h = homogenize_q(1, &q, (&r0, &r1)).unwrap();
        let want = BiPoly::from_terms(
            e,
            [(MultiIndex::new(0, 1), e.one()), (MultiIndex::new(1, 0), e.int(7)), (MultiIndex::ZERO, e.int(-14))],
        )
        .unwrap();
        assert_eq!(h, want);
        let one = UniPoly::new(vec![e.one()]).unwrap();
        assert_eq!(homogenize_q(0, &one, (&r0, &r1)).unwrap(), BiPoly::one(e));
    }

    #[test]
    fn induced_weight_matches_triangle_spec() {
        let k = triangle();
        let g = k.induced_weight();
        let direct = WeightSpec::TriangleKoornwinder {
            alpha: 1,
            beta: 2,
            gamma: 1,
            a: r(1, 1),
            b: r(2, 1),
            c: r(3, 1),
            d: r(5, 1),
            tau: r(45, 2),
        }
        .generic()
        .unwrap();
        assert_eq!(g.x1_range, direct.x1_range);
        assert_eq!(g.lower, direct.lower);
        assert_eq!(g.upper, direct.upper);
        let (x1, x2) = (r(3, 2), r(1, 5));
        let eval = |d: &Density| match d {
            Density::Factors { scale, factors } => {
                let mut v = scale.clone();
                for f in factors {
                    let e = i32::try_from(f.exponent.numerator()).unwrap();
                    let base = f.form.eval_rational(&x1, &x2);
                    v *= if e >= 0 { base.pow(e as usize) } else { RBig::ONE / base.pow((-e) as usize) };
                }
                v
            }
            Density::Custom(_) => unreachable!(),
        };
        assert_eq!(eval(&g.density), eval(&direct.density));
    }

    #[test]
    fn split_factors_vanish_where_expected() {
        let b = Backend::float(40).unwrap();
        let cfg = QuadratureConfig::default();
        let k = triangle();
        let tol = 1e-30;
        let (_, second) = orthogonality_split_check(&k, 2, 1, 1, 0, b, &cfg).unwrap();
        assert!(second.to_f64().abs() < tol);
        let (first, _) = orthogonality_split_check(&k, 2, 1, 1, 1, b, &cfg).unwrap();
        assert!(first.to_f64().abs() < tol);
        let (first, _) = orthogonality_split_check(&k, 1, 0, 0, 0, b, &cfg).unwrap();
        assert!(first.to_f64().abs() < tol);
    }

    #[test]
    fn degree_one_matches_printed_entry() {
        let b = Backend::float(40).unwrap();
        let l = build_koornwinder_level(&triangle(), 1, b, &QuadratureConfig::default()).unwrap();
        let p01 = l.entry(1);
        assert!(p01.coeff(MultiIndex::new(0, 1)).is_one());
        assert!((p01.coeff(MultiIndex::new(1, 0)).to_f64() - 4.16034291).abs() < 5e-7);
        assert!((p01.coeff(MultiIndex::ZERO).to_f64() + 8.32068582).abs() < 5e-7);
    }

    #[test]
    fn product_builder_matches_monic_rectangle() {
        let e = Backend::Exact;
        let nu1 = Arcsine { backend: e, a: r(1, 4), b: r(4, 1) };
        let nu2 = Arcsine { backend: e, a: r(4, 9), b: r(9, 1) };
        let f = Moments::new(WeightSpec::ProductChebyshev { a: r(1, 4), b: r(4, 1), c: r(4, 9), d: r(9, 1) }, e, 10)
            .unwrap();
        for n in 0..=3 {
            let prod = build_product_level(&nu1, &nu2, n).unwrap();
            assert_eq!(prod.entries(), build_level(&f, n).unwrap().p.entries());
        }
    }

    #[test]
    fn transform_helpers() {
        let e = Backend::Exact;
        let g = Matrix::from_rows(e, vec![vec![e.one(), e.int(0)], vec![e.int(3), e.one()]]).unwrap();
        assert!(unit_lower_defect(&g).unwrap().is_zero());
        assert!(!unit_lower_defect(&g.transpose()).unwrap().is_zero());
        let p = PolyVec::monomials(e, 1);
        let k = apply(&g, &p, 1).unwrap();
        let (g2, res) = leading_transform(&k, &p).unwrap();
        assert_eq!(g2, g);
        assert!(res.is_zero());
    }
}
