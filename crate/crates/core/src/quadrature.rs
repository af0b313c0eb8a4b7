//! Gauss–Legendre rules at arbitrary binary precision, and lazily refined
//! one- and two-dimensional integrators built on them.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use dashu_base::BitTest;
use dashu_int::IBig;
use dashu_ratio::RBig;

use crate::error::{Error, Result};
use crate::scalar::{rational_to_float, Backend, Float};

/// Extra bits carried by quadrature sums beyond the working precision.
pub const GUARD_BITS: usize = 32;

/// Refinement schedule shared by every quadrature-backed provider.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureConfig {
    /// Nodes per axis on the first round.
    pub base_nodes: usize,
    /// Node multiplier between rounds.
    pub factor: usize,
    /// Relative agreement between successive rounds; `None` means
    /// `10^(-digits+8)`.
    pub rel_threshold: Option<f64>,
    /// Number of rounds, the first included.
    pub max_rounds: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { base_nodes: 64, factor: 2, rel_threshold: None, max_rounds: 6 }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.base_nodes < 8 {
            return Err(Error::InvalidArgument("base node count must be at least 8".into()));
        }
        if self.factor < 2 {
            return Err(Error::InvalidArgument("refinement factor must be at least 2".into()));
        }
        if self.max_rounds < 2 {
            return Err(Error::InvalidArgument("at least two rounds are needed to judge convergence".into()));
        }
        if let Some(t) = self.rel_threshold {
            // also rejects NaN
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(t > 0.0) {
                return Err(Error::InvalidArgument("threshold must be positive".into()));
            }
        }
        Ok(())
    }

    /// `log10` of the relative threshold for `backend`.
    pub fn log10_threshold(&self, backend: Backend) -> f64 {
        match self.rel_threshold {
            Some(t) => t.log10(),
            None => -(backend.digits().unwrap_or(50) as f64) + 8.0,
        }
    }

    pub fn nodes_at(&self, round: usize) -> usize {
        self.base_nodes * self.factor.pow(round as u32)
    }
}

pub(crate) fn fl(v: i64, bits: usize) -> Float {
    Float::from(v).with_precision(bits).value()
}

pub(crate) fn rat(r: &RBig, bits: usize) -> Float {
    rational_to_float(r, bits)
}

/// Rough `log2 |x|`; very negative for zero.
pub(crate) fn log2_abs(x: &Float) -> isize {
    let sig = x.repr().significand();
    if sig.is_zero() {
        return isize::MIN / 2;
    }
    let mag = if sig < &IBig::ZERO { -sig.clone() } else { sig.clone() };
    mag.bit_len() as isize + x.repr().exponent()
}

pub(crate) fn log10_abs(x: &Float) -> f64 {
    if x.repr().is_zero() {
        return f64::NEG_INFINITY;
    }
    crate::scalar::Scalar::Float(x.clone()).log10_abs()
}

fn legendre_f64(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 1..n {
        let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn legendre(n: usize, x: &Float, bits: usize) -> (Float, Float) {
    let mut p0 = fl(1, bits);
    let mut p1 = x.clone();
    for k in 1..n {
        let p2 = (x * &p1 * (2 * k + 1) as i64 - &p0 * k as i64) / (k + 1) as i64;
        p0 = p1;
        p1 = p2;
    }
    let dp = (x * &p1 - &p0) * n as i64 / (x * x - fl(1, bits));
    (p1, dp)
}

fn compute_rule(n: usize, bits: usize) -> Vec<(Float, Float)> {
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        if n % 2 == 1 && i == n / 2 {
            x = 0.0;
        }
        for _ in 0..50 {
            let (p, dp) = legendre_f64(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let mut xf = Float::try_from(x).expect("finite").with_precision(bits).value();
        for _ in 0..12 {
            let (p, dp) = legendre(n, &xf, bits);
            let dx = p / dp;
            xf = &xf - &dx;
            if log2_abs(&dx) < -(bits as isize) + 4 {
                break;
            }
        }
        let (_, dp) = legendre(n, &xf, bits);
        let w = fl(2, bits) / ((fl(1, bits) - &xf * &xf) * &dp * &dp);
        rule.push((xf, w));
    }
    rule.reverse();
    rule
}

/// `n`-point Gauss–Legendre nodes and weights on `[-1, 1]`, ascending,
/// memoized per `(n, bits)`.
pub fn gauss_legendre(n: usize, bits: usize) -> Arc<Vec<(Float, Float)>> {
    type Rule = Arc<Vec<(Float, Float)>>;
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().expect("rule cache").get(&(n, bits)) {
        return r.clone();
    }
    let rule = Arc::new(compute_rule(n, bits));
    cache.lock().expect("rule cache").insert((n, bits), rule.clone());
    rule
}

/// Nodes and weights mapped to `[a, b]`.
pub fn mapped_rule(n: usize, bits: usize, a: &Float, b: &Float) -> Vec<(Float, Float)> {
    let two = fl(2, bits);
    let half = (b - a) / &two;
    let mid = (a + b) / &two;
    gauss_legendre(n, bits).iter().map(|(x, w)| (&half * x + &mid, &half * w)).collect()
}

/// Compares successive refinements. `Ok(true)` when they agree.
pub(crate) fn agrees(prev: &Float, last: &Float, log10_thr: f64) -> bool {
    if last.repr().is_zero() && prev.repr().is_zero() {
        return true;
    }
    let gap = log10_abs(&(last - prev));
    let scale = log10_abs(last).max(log10_abs(prev));
    gap - scale <= log10_thr
}

pub(crate) fn non_convergence(k: i32, m: i32, prev: &Float, last: &Float) -> Error {
    let gap = log10_abs(&(last - prev)) - log10_abs(last);
    Error::NonConvergence {
        k,
        m,
        last: crate::scalar::Scalar::Float(last.clone()).to_decimal_string(20),
        previous: crate::scalar::Scalar::Float(prev.clone()).to_decimal_string(20),
        gap: 10f64.powf(gap),
    }
}

/// Integrates `f` over `[a, b]` with successive Gauss–Legendre refinement.
/// `f` may fail (e.g. on a non-integrable point evaluation).
pub fn integrate_1d(
    f: impl Fn(&Float) -> Result<Float>,
    a: &RBig,
    b: &RBig,
    cfg: &QuadratureConfig,
    backend: Backend,
) -> Result<Float> {
    cfg.validate()?;
    let bits = backend.bits() + GUARD_BITS;
    let (af, bf) = (rat(a, bits), rat(b, bits));
    let thr = cfg.log10_threshold(backend);
    let mut prev: Option<Float> = None;
    for round in 0..cfg.max_rounds {
        let mut sum = fl(0, bits);
        for (x, w) in mapped_rule(cfg.nodes_at(round), bits, &af, &bf) {
            sum += w * f(&x)?;
        }
        if let Some(p) = &prev {
            if agrees(p, &sum, thr) {
                return Ok(sum.with_precision(backend.bits()).value());
            }
        }
        if round + 1 == cfg.max_rounds {
            return Err(non_convergence(0, 0, prev.as_ref().unwrap_or(&sum), &sum));
        }
        prev = Some(sum);
    }
    unreachable!("max_rounds >= 2")
}

/// Affine form `c0 + c1·x₁ + c2·x₂` with rational coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Affine {
    pub c0: RBig,
    pub c1: RBig,
    pub c2: RBig,
}

impl Affine {
    pub fn new(c0: RBig, c1: RBig, c2: RBig) -> Self {
        Affine { c0, c1, c2 }
    }

    pub fn is_zero(&self) -> bool {
        self.c0.is_zero() && self.c1.is_zero() && self.c2.is_zero()
    }

    /// `c0 + c1·x₁`.
    pub fn in_x1(c0: RBig, c1: RBig) -> Self {
        Affine::new(c0, c1, RBig::ZERO)
    }

    pub fn eval_rational(&self, x1: &RBig, x2: &RBig) -> RBig {
        &self.c0 + &self.c1 * x1 + &self.c2 * x2
    }

    pub fn eval(&self, x1: &Float, x2: &Float, bits: usize) -> Float {
        let mut v = rat(&self.c0, bits);
        if !self.c1.is_zero() {
            v += rat(&self.c1, bits) * x1;
        }
        if !self.c2.is_zero() {
            v += rat(&self.c2, bits) * x2;
        }
        v
    }
}

/// `form^exponent`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineFactor {
    pub form: Affine,
    pub exponent: RBig,
}

pub type PointWeight = Arc<dyn Fn(&Float, &Float) -> Result<Float> + Send + Sync>;

/// Pointwise density of a bivariate weight.
#[derive(Clone)]
pub enum Density {
    /// `scale · Π factorᵉ`.
    Factors { scale: RBig, factors: Vec<AffineFactor> },
    /// Arbitrary evaluator at the requested precision.
    Custom(PointWeight),
}

impl std::fmt::Debug for Density {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Density::Factors { scale, factors } => {
                f.debug_struct("Factors").field("scale", scale).field("factors", factors).finish()
            }
            Density::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Density {
    pub fn eval(&self, x1: &Float, x2: &Float, bits: usize) -> Result<Float> {
        match self {
            Density::Factors { scale, factors } => {
                let mut v = rat(scale, bits);
                for fct in factors {
                    let base = fct.form.eval(x1, x2, bits);
                    v *= pow_rational(&base, &fct.exponent, bits)?;
                }
                Ok(v)
            }
            Density::Custom(f) => f(x1, x2),
        }
    }
}

pub(crate) fn pow_rational(base: &Float, e: &RBig, bits: usize) -> Result<Float> {
    if e.is_zero() {
        return Ok(fl(1, bits));
    }
    if e.denominator().is_one() {
        if base.repr().is_zero() {
            return if e.numerator() > &IBig::ZERO {
                Ok(fl(0, bits))
            } else {
                Err(Error::NonIntegrable("negative power of zero".into()))
            };
        }
        return Ok(base.powi(e.numerator().clone()));
    }
    if base.repr().significand() < &IBig::ZERO {
        return Err(Error::NonIntegrable("fractional power of a negative factor".into()));
    }
    if base.repr().is_zero() {
        return Ok(fl(0, bits));
    }
    Ok(base.powf(&rat(e, bits)))
}

/// Bivariate weight on `{x₁ ∈ [a, b], lower(x₁) ≤ x₂ ≤ upper(x₁)}`.
#[derive(Clone, Debug)]
pub struct GenericWeight {
    pub x1_range: (RBig, RBig),
    /// Lower `x₂` bound as an affine form in `x₁` (`c2` must be zero).
    pub lower: Affine,
    pub upper: Affine,
    pub density: Density,
}

impl GenericWeight {
    pub fn validate(&self) -> Result<()> {
        let (a, b) = &self.x1_range;
        if !(a < b) {
            return Err(Error::InvalidArgument("x1 range must satisfy a < b".into()));
        }
        if !self.lower.c2.is_zero() || !self.upper.c2.is_zero() {
            return Err(Error::InvalidArgument("domain bounds may depend on x1 only".into()));
        }
        for x in [a, b] {
            let lo = self.lower.eval_rational(x, &RBig::ZERO);
            let up = self.upper.eval_rational(x, &RBig::ZERO);
            if lo > up {
                return Err(Error::InvalidArgument("lower bound exceeds upper bound".into()));
            }
            if lo < RBig::ZERO {
                return Err(Error::InvalidArgument("domain leaves the positive quadrant".into()));
            }
        }
        if a <= &RBig::ZERO {
            return Err(Error::InvalidArgument("domain leaves the positive quadrant".into()));
        }
        Ok(())
    }

    /// Rejects moments whose integrand diverges on the boundary. Along an
    /// edge the net power of the forms vanishing on it must exceed `−1`; at
    /// a vertex the integrand scales like `r^s` with `s` the sum of the
    /// exponents vanishing there, which needs `s > −2`. The monomial counts
    /// as the factor `x₂ᵐ` (the domain stays clear of `x₁ = 0`).
    pub fn check_moment_integrable(&self, k: i32, m: i32) -> Result<()> {
        let Density::Factors { factors, .. } = &self.density else {
            return Ok(());
        };
        let bad = |why: String| Err(Error::NonIntegrable(format!("moment ({k}, {m}): {why}")));
        let x2 = AffineFactor { form: Affine::new(RBig::ZERO, RBig::ZERO, RBig::ONE), exponent: RBig::from(m) };
        let all: Vec<&AffineFactor> = factors.iter().chain(std::iter::once(&x2)).collect();
        let power_where = |vanishes: &dyn Fn(&Affine) -> bool| {
            all.iter().filter(|f| vanishes(&f.form)).fold(RBig::ZERO, |acc, f| acc + &f.exponent)
        };
        let (a, b) = &self.x1_range;
        for (name, edge) in [("lower", &self.lower), ("upper", &self.upper)] {
            let s = power_where(&|f: &Affine| {
                !f.is_zero() && (&f.c0 + &f.c2 * &edge.c0).is_zero() && (&f.c1 + &f.c2 * &edge.c1).is_zero()
            });
            if s <= -RBig::ONE {
                return bad(format!("power {s} along the {name} edge"));
            }
        }
        for x in [a, b] {
            let (lo, up) = (self.lower.eval_rational(x, &RBig::ZERO), self.upper.eval_rational(x, &RBig::ZERO));
            if lo < up {
                let s = power_where(&|f: &Affine| {
                    f.c2.is_zero() && !f.c1.is_zero() && f.eval_rational(x, &RBig::ZERO).is_zero()
                });
                if s <= -RBig::ONE {
                    return bad(format!("power {s} along the edge x1 = {x}"));
                }
            }
            for y in [lo, up] {
                let s = power_where(&|f: &Affine| f.eval_rational(x, &y).is_zero());
                if s <= RBig::from(-2) {
                    return bad(format!("local power {s} at the vertex ({x}, {y})"));
                }
            }
        }
        Ok(())
    }
}

/// One refinement round of a two-dimensional product rule.
struct Level {
    x1: Vec<Float>,
    x2: Vec<Vec<Float>>,
    cw: Vec<Vec<Float>>,
    inner: HashMap<i32, Vec<Float>>,
    values: HashMap<(i32, i32), Float>,
}

/// Lazily refined iterated Gauss–Legendre moments `∬ x₁ᵏ x₂ᵐ W`.
pub struct MomentQuadrature {
    weight: GenericWeight,
    cfg: QuadratureConfig,
    backend: Backend,
    bits: usize,
    levels: Vec<Level>,
}

impl MomentQuadrature {
    pub fn new(weight: GenericWeight, cfg: QuadratureConfig, backend: Backend) -> Result<Self> {
        if backend.is_exact() {
            return Err(Error::NotExact("quadrature needs the float backend".into()));
        }
        cfg.validate()?;
        weight.validate()?;
        Ok(MomentQuadrature { weight, cfg, backend, bits: backend.bits() + GUARD_BITS, levels: Vec::new() })
    }

    fn level(&mut self, round: usize) -> Result<&mut Level> {
        while self.levels.len() <= round {
            let n = self.cfg.nodes_at(self.levels.len());
            let bits = self.bits;
            let (a, b) = (rat(&self.weight.x1_range.0, bits), rat(&self.weight.x1_range.1, bits));
            let rule = gauss_legendre(n, bits);
            let outer = mapped_rule(n, bits, &a, &b);
            let zero = fl(0, bits);
            let two = fl(2, bits);
            let mut x1s = Vec::with_capacity(n);
            let mut x2s = Vec::with_capacity(n);
            let mut cws = Vec::with_capacity(n);
            for (x1, w1) in outer {
                let lo = self.weight.lower.eval(&x1, &zero, bits);
                let up = self.weight.upper.eval(&x1, &zero, bits);
                let half = (&up - &lo) / &two;
                let mid = (&up + &lo) / &two;
                let mut xs = Vec::with_capacity(n);
                let mut cs = Vec::with_capacity(n);
                for (t, w) in rule.iter() {
                    let x2 = &half * t + &mid;
                    let dens = self.weight.density.eval(&x1, &x2, bits)?;
                    cs.push(&w1 * &half * w * dens);
                    xs.push(x2);
                }
                x1s.push(x1);
                x2s.push(xs);
                cws.push(cs);
            }
            self.levels.push(Level { x1: x1s, x2: x2s, cw: cws, inner: HashMap::new(), values: HashMap::new() });
        }
        Ok(&mut self.levels[round])
    }

    fn value_at(&mut self, round: usize, k: i32, m: i32) -> Result<Float> {
        let bits = self.bits;
        let level = self.level(round)?;
        if let Some(v) = level.values.get(&(k, m)) {
            return Ok(v.clone());
        }
        if !level.inner.contains_key(&m) {
            let sums = level
                .x2
                .iter()
                .zip(&level.cw)
                .map(|(xs, cs)| {
                    let mut s = fl(0, bits);
                    for (x, c) in xs.iter().zip(cs) {
                        if !c.repr().is_zero() {
                            s += c * x.powi(IBig::from(m));
                        }
                    }
                    s
                })
                .collect();
            level.inner.insert(m, sums);
        }
        let sums = &level.inner[&m];
        let mut total = fl(0, bits);
        for (x1, s) in level.x1.iter().zip(sums) {
            total += x1.powi(IBig::from(k)) * s;
        }
        level.values.insert((k, m), total.clone());
        Ok(total)
    }

    /// Converged moment at the working precision.
    pub fn moment(&mut self, k: i32, m: i32) -> Result<Float> {
        self.weight.check_moment_integrable(k, m)?;
        let thr = self.cfg.log10_threshold(self.backend);
        let mut prev = self.value_at(0, k, m)?;
        for round in 1..self.cfg.max_rounds {
            let last = self.value_at(round, k, m)?;
            if agrees(&prev, &last, thr) {
                return Ok(last.with_precision(self.backend.bits()).value());
            }
            if round + 1 == self.cfg.max_rounds {
                return Err(non_convergence(k, m, &prev, &last));
            }
            prev = last;
        }
        unreachable!("max_rounds >= 2")
    }
}
