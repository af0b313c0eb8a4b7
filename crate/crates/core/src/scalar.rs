//! Field elements with two interchangeable backends.
//!
//! The exact backend stores a canonical rational together with an integer
//! exponent of π, so that moments of arcsine-type weights (rational multiples
//! of π per axis) stay exact. The float backend wraps a binary
//! arbitrary-precision float whose precision is fixed when the [`Backend`]
//! is created.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use dashu_base::{BitTest, SquareRoot, UnsignedAbs};
use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use dashu_int::{IBig, UBig};
use dashu_ratio::RBig;

use crate::error::{Error, Result};

/// Binary float with round-half-to-even.
pub type Float = FBig<HalfEven, 2>;

pub const DEFAULT_DIGITS: u32 = 50;
pub const MIN_DIGITS: u32 = 30;

const LOG2_10: f64 = std::f64::consts::LOG2_10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    Exact,
    Float { digits: u32 },
}

impl Backend {
    pub fn float(digits: u32) -> Result<Self> {
        if digits < MIN_DIGITS {
            return Err(Error::InvalidArgument(format!(
                "float precision must be at least {MIN_DIGITS} digits, got {digits}"
            )));
        }
        Ok(Backend::Float { digits })
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Backend::Exact)
    }

    pub fn digits(&self) -> Option<u32> {
        match self {
            Backend::Exact => None,
            Backend::Float { digits } => Some(*digits),
        }
    }

    /// Binary precision used for a decimal precision of `digits`.
    pub fn bits(&self) -> usize {
        match self {
            Backend::Exact => 0,
            Backend::Float { digits } => digits_to_bits(*digits),
        }
    }

    pub fn zero(&self) -> Scalar {
        self.int(0)
    }

    pub fn one(&self) -> Scalar {
        self.int(1)
    }

    pub fn int(&self, v: i64) -> Scalar {
        self.rational(&RBig::from(v))
    }

    pub fn ratio(&self, num: i64, den: i64) -> Scalar {
        assert!(den != 0, "zero denominator");
        self.rational(&RBig::from_parts_signed(IBig::from(num), IBig::from(den)))
    }

    pub fn rational(&self, r: &RBig) -> Scalar {
        match self {
            Backend::Exact => Scalar::Exact { value: r.clone(), pi_exp: 0 },
            Backend::Float { .. } => Scalar::Float(rational_to_float(r, self.bits())),
        }
    }

    /// `r·π^pi_exp`, exact when the backend is exact.
    pub fn rational_pi(&self, r: &RBig, pi_exp: i32) -> Scalar {
        match self {
            Backend::Exact => Scalar::exact(r.clone(), pi_exp),
            Backend::Float { .. } => {
                let mut v = rational_to_float(r, self.bits());
                let pi = float_pi(self.bits());
                if pi_exp >= 0 {
                    for _ in 0..pi_exp {
                        v = &v * &pi;
                    }
                } else {
                    for _ in 0..(-pi_exp) {
                        v = &v / &pi;
                    }
                }
                Scalar::Float(v)
            }
        }
    }

    pub fn pi(&self) -> Scalar {
        self.rational_pi(&RBig::ONE, 1)
    }

    pub fn from_float(&self, f: &Float) -> Result<Scalar> {
        match self {
            Backend::Exact => Err(Error::BackendMismatch("float value supplied to exact backend".into())),
            Backend::Float { .. } => Ok(Scalar::Float(f.clone().with_precision(self.bits()).value())),
        }
    }

    /// Parses `"p/q"`, an integer, or a decimal literal such as `"-1.25e-3"`.
    /// Decimal literals are read as exact rationals first, then rounded once
    /// in float mode.
    pub fn parse(&self, s: &str) -> Result<Scalar> {
        let r = parse_rational(s)?;
        Ok(self.rational(&r))
    }

    /// Absolute tolerance `10^(-digits + slack)` in float mode, zero in exact mode.
    pub fn tolerance(&self, slack: i32) -> f64 {
        match self {
            Backend::Exact => 0.0,
            Backend::Float { digits } => 10f64.powi(-(*digits as i32) + slack),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Exact => write!(f, "exact"),
            Backend::Float { digits } => write!(f, "float({digits})"),
        }
    }
}

pub fn digits_to_bits(digits: u32) -> usize {
    (digits as f64 * LOG2_10).ceil() as usize
}

#[derive(Clone, Debug, PartialEq)]
pub enum Scalar {
    /// `value · π^pi_exp`. Zero is always stored with `pi_exp == 0`.
    Exact {
        value: RBig,
        pi_exp: i32,
    },
    Float(Float),
}

impl Scalar {
    pub fn exact(value: RBig, pi_exp: i32) -> Self {
        let pi_exp = if value.is_zero() { 0 } else { pi_exp };
        Scalar::Exact { value, pi_exp }
    }

    pub fn backend(&self) -> Backend {
        match self {
            Scalar::Exact { .. } => Backend::Exact,
            Scalar::Float(f) => Backend::Float { digits: (f.precision() as f64 / LOG2_10).floor() as u32 },
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact { value, .. } => value.is_zero(),
            Scalar::Float(f) => f.repr().is_zero(),
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Scalar::Exact { value, pi_exp } => value.is_one() && *pi_exp == 0,
            Scalar::Float(f) => *f == Float::ONE,
        }
    }

    pub fn pi_exp(&self) -> i32 {
        match self {
            Scalar::Exact { pi_exp, .. } => *pi_exp,
            Scalar::Float(_) => 0,
        }
    }

    pub fn as_rational(&self) -> Option<&RBig> {
        match self {
            Scalar::Exact { value, .. } => Some(value),
            Scalar::Float(_) => None,
        }
    }

    pub fn as_float(&self) -> Option<&Float> {
        match self {
            Scalar::Float(f) => Some(f),
            Scalar::Exact { .. } => None,
        }
    }

    /// `-1`, `0` or `1`.
    pub fn signum(&self) -> i32 {
        match self {
            Scalar::Exact { value, .. } => {
                if value.is_zero() {
                    0
                } else if value.numerator() < &IBig::ZERO {
                    -1
                } else {
                    1
                }
            }
            Scalar::Float(f) => {
                if f.repr().is_zero() {
                    0
                } else if f.repr().significand() < &IBig::ZERO {
                    -1
                } else {
                    1
                }
            }
        }
    }

    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::Exact { value, pi_exp } => Scalar::Exact { value: -value.clone(), pi_exp: *pi_exp },
            Scalar::Float(f) => Scalar::Float(-f.clone()),
        }
    }

    pub fn abs(&self) -> Scalar {
        if self.signum() < 0 {
            self.neg()
        } else {
            self.clone()
        }
    }

    /// Approximate value including the π factor. Underflows to 0 and
    /// overflows to ±inf like any `f64`.
    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact { value, pi_exp } => value.to_f64().value() * std::f64::consts::PI.powi(*pi_exp),
            Scalar::Float(f) => f.to_f64().value(),
        }
    }

    /// `log10 |x|`, robust against f64 underflow. `-inf` for zero.
    pub fn log10_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let (sig, exp2): (f64, f64) = match self {
            Scalar::Exact { value, pi_exp } => {
                let n = value.numerator();
                let d = value.denominator();
                let (ns, ne) = ibig_log2_parts(n);
                let (ds, de) = ibig_log2_parts(&IBig::from(d.clone()));
                (ns / ds * std::f64::consts::PI.powi(*pi_exp), (ne as f64) - (de as f64))
            }
            Scalar::Float(f) => {
                let (s, e) = ibig_log2_parts(f.repr().significand());
                (s, e as f64 + f.repr().exponent() as f64)
            }
        };
        sig.abs().log10() + exp2 * std::f64::consts::LOG10_2
    }

    fn check_same(&self, other: &Scalar) -> Result<()> {
        match (self, other) {
            (Scalar::Exact { .. }, Scalar::Exact { .. }) => Ok(()),
            (Scalar::Float(a), Scalar::Float(b)) => {
                if a.precision() == b.precision() {
                    Ok(())
                } else {
                    Err(Error::BackendMismatch(format!(
                        "float precisions {} and {} bits",
                        a.precision(),
                        b.precision()
                    )))
                }
            }
            _ => Err(Error::BackendMismatch("exact and float operands mixed".into())),
        }
    }

    pub fn add(&self, other: &Scalar) -> Result<Scalar> {
        self.check_same(other)?;
        match (self, other) {
            (Scalar::Exact { value: a, pi_exp: pa }, Scalar::Exact { value: b, pi_exp: pb }) => {
                if a.is_zero() {
                    return Ok(other.clone());
                }
                if b.is_zero() {
                    return Ok(self.clone());
                }
                if pa != pb {
                    return Err(Error::PiExponentMismatch { left: *pa, right: *pb });
                }
                Ok(Scalar::exact(a + b, *pa))
            }
            (Scalar::Float(a), Scalar::Float(b)) => Ok(Scalar::Float(fit(a + b))),
            _ => unreachable!(),
        }
    }

    pub fn sub(&self, other: &Scalar) -> Result<Scalar> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Scalar) -> Result<Scalar> {
        self.check_same(other)?;
        match (self, other) {
            (Scalar::Exact { value: a, pi_exp: pa }, Scalar::Exact { value: b, pi_exp: pb }) => {
                Ok(Scalar::exact(a * b, pa + pb))
            }
            (Scalar::Float(a), Scalar::Float(b)) => Ok(Scalar::Float(fit(a * b))),
            _ => unreachable!(),
        }
    }

    pub fn div(&self, other: &Scalar) -> Result<Scalar> {
        self.check_same(other)?;
        if other.is_zero() {
            return Err(Error::DivisionByZero);
        }
        match (self, other) {
            (Scalar::Exact { value: a, pi_exp: pa }, Scalar::Exact { value: b, pi_exp: pb }) => {
                Ok(Scalar::exact(a / b, pa - pb))
            }
            (Scalar::Float(a), Scalar::Float(b)) => Ok(Scalar::Float(fit(a / b))),
            _ => unreachable!(),
        }
    }

    pub fn recip(&self) -> Result<Scalar> {
        self.backend().one().with_precision_of(self).div(self)
    }

    /// Integer power; negative exponents invert.
    pub fn powi(&self, e: i32) -> Result<Scalar> {
        let mut acc = self.backend().one().with_precision_of(self);
        for _ in 0..e.unsigned_abs() {
            acc = acc.mul(self)?;
        }
        if e < 0 {
            acc.recip()
        } else {
            Ok(acc)
        }
    }

    /// Rational power of a positive value. Integer exponents defer to
    /// [`Scalar::powi`]; fractional ones need the float backend.
    pub fn powr(&self, e: &RBig) -> Result<Scalar> {
        if e.denominator().is_one() {
            let n =
                i32::try_from(e.numerator()).map_err(|_| Error::InvalidArgument(format!("exponent {e} too large")))?;
            return self.powi(n);
        }
        match self {
            Scalar::Exact { .. } => Err(Error::NotExact(format!("fractional power {e}"))),
            Scalar::Float(f) => {
                if self.signum() < 0 {
                    return Err(Error::InvalidArgument("fractional power of a negative value".into()));
                }
                if self.is_zero() {
                    return Ok(self.clone());
                }
                let ef = rational_to_float(e, f.precision());
                Ok(Scalar::Float(fit(f.powf(&ef))))
            }
        }
    }

    /// Square root. Exact only for squares of rationals with even π exponent.
    pub fn sqrt(&self) -> Result<Scalar> {
        if self.signum() < 0 {
            return Err(Error::InvalidArgument("square root of a negative value".into()));
        }
        match self {
            Scalar::Exact { value, pi_exp } => {
                if pi_exp % 2 != 0 {
                    return Err(Error::NotExact("odd power of pi under a square root".into()));
                }
                let n = isqrt_exact(&UBig::try_from(value.numerator().clone()).unwrap());
                let d = isqrt_exact(value.denominator());
                match (n, d) {
                    (Some(n), Some(d)) => Ok(Scalar::exact(RBig::from_parts(IBig::from(n), d), pi_exp / 2)),
                    _ => Err(Error::NotExact(format!("{value} is not the square of a rational"))),
                }
            }
            Scalar::Float(f) => {
                if f.repr().is_zero() {
                    Ok(self.clone())
                } else {
                    Ok(Scalar::Float(fit(f.sqrt())))
                }
            }
        }
    }

    /// Same value but carrying the float precision of `like` (no-op for exact).
    fn with_precision_of(self, like: &Scalar) -> Scalar {
        match (self, like) {
            (Scalar::Float(f), Scalar::Float(l)) => Scalar::Float(f.with_precision(l.precision()).value()),
            (s, _) => s,
        }
    }

    /// Exact rational value of the payload (float significand·2^exponent),
    /// ignoring the π exponent.
    pub fn to_rational(&self) -> RBig {
        match self {
            Scalar::Exact { value, .. } => value.clone(),
            Scalar::Float(f) => float_to_rational(f),
        }
    }

    /// Magnitude comparison that stays exact whenever both operands are exact
    /// with the same π exponent.
    pub fn abs_gt(&self, other: &Scalar) -> bool {
        match (self, other) {
            (Scalar::Exact { value: a, pi_exp: pa }, Scalar::Exact { value: b, pi_exp: pb })
                if pa == pb || a.is_zero() || b.is_zero() =>
            {
                abs_rational(a) > abs_rational(b)
            }
            (Scalar::Float(a), Scalar::Float(b)) => {
                let a = if a.repr().significand() < &IBig::ZERO { -a.clone() } else { a.clone() };
                let b = if b.repr().significand() < &IBig::ZERO { -b.clone() } else { b.clone() };
                a > b
            }
            _ => self.log10_abs() > other.log10_abs(),
        }
    }

    /// Decimal rendering with `digits` significant digits (floats) or `p/q`
    /// (exact, π exponent not included).
    pub fn to_decimal_string(&self, digits: usize) -> String {
        format_decimal(&self.to_rational(), digits)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact { value, pi_exp } => match pi_exp {
                0 => write!(f, "{value}"),
                1 => write!(f, "{value}*pi"),
                e => write!(f, "{value}*pi^{e}"),
            },
            Scalar::Float(v) => {
                let digits = serialization_digits(v.precision());
                write!(f, "{}", format_decimal(&float_to_rational(v), digits))
            }
        }
    }
}

/// Number of significant decimal digits that round-trips a `bits`-bit float.
pub fn serialization_digits(bits: usize) -> usize {
    (bits as f64 / LOG2_10).ceil() as usize + 1
}

/// Rounds a significand that outgrew its precision (a rounding carry can
/// leave one extra bit).
fn fit(f: Float) -> Float {
    let p = f.precision();
    if p == 0 || f.repr().digits() <= p {
        return f;
    }
    // shrinking is the only path that rounds
    f.with_precision(p + 1).value().with_precision(p).value()
}

pub fn rational_to_float(r: &RBig, bits: usize) -> Float {
    r.to_float(bits).value()
}

pub fn float_to_rational(f: &Float) -> RBig {
    let sig = f.repr().significand().clone();
    let exp = f.repr().exponent();
    if exp >= 0 {
        RBig::from(sig << exp as usize)
    } else {
        RBig::from_parts(sig, UBig::ONE << (-exp) as usize)
    }
}

fn abs_rational(r: &RBig) -> RBig {
    if r.numerator() < &IBig::ZERO {
        -r.clone()
    } else {
        r.clone()
    }
}

/// Splits `n` into `(mantissa, exponent)` with `|n| ≈ mantissa·2^exponent`
/// and the mantissa representable as an f64.
fn ibig_log2_parts(n: &IBig) -> (f64, i64) {
    let bits = n.unsigned_abs().bit_len() as i64;
    if bits <= 60 {
        return (n.to_f64().value(), 0);
    }
    let shift = bits - 60;
    let top: IBig = n.clone() >> shift as usize;
    (top.to_f64().value(), shift)
}

fn isqrt_exact(n: &UBig) -> Option<UBig> {
    let x = n.sqrt();
    if &(&x * &x) == n {
        Some(x)
    } else {
        None
    }
}

/// π to `bits` binary digits via Machin's formula, memoized per precision.
pub fn float_pi(bits: usize) -> Float {
    static CACHE: OnceLock<Mutex<HashMap<usize, Float>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().unwrap().get(&bits) {
        return v.clone();
    }
    let work = bits + 32;
    let atan_inv = |x: u32| -> Float {
        let one = Float::ONE.with_precision(work).value();
        let xf = Float::from(x).with_precision(work).value();
        let x2 = &xf * &xf;
        let mut power = &one / &xf;
        let mut sum = power.clone();
        let mut k: u32 = 1;
        let eps = Float::from_parts(IBig::ONE, -(work as isize));
        loop {
            power = &power / &x2;
            let term = &power / &Float::from(2 * k + 1).with_precision(work).value();
            if term < eps {
                break;
            }
            if k % 2 == 1 {
                sum = &sum - &term;
            } else {
                sum = &sum + &term;
            }
            k += 1;
        }
        sum
    };
    let pi = &(&atan_inv(5) * &Float::from(16).with_precision(work).value())
        - &(&atan_inv(239) * &Float::from(4).with_precision(work).value());
    let pi = pi.with_precision(bits).value();
    cache.lock().unwrap().insert(bits, pi.clone());
    pi
}

/// Parses `"p/q"`, integers and decimal literals (with optional exponent)
/// into an exact rational.
pub fn parse_rational(s: &str) -> Result<RBig> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty number".into()));
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = IBig::from_str(n.trim()).map_err(|e| Error::Parse(format!("{s}: {e}")))?;
        let d = IBig::from_str(d.trim()).map_err(|e| Error::Parse(format!("{s}: {e}")))?;
        if d == IBig::ZERO {
            return Err(Error::Parse(format!("{s}: zero denominator")));
        }
        return Ok(RBig::from_parts_signed(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(pos) => {
            let e: i64 = s[pos + 1..].parse().map_err(|e| Error::Parse(format!("{s}: {e}")))?;
            (&s[..pos], e)
        }
        None => (s, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(Error::Parse(format!("{s}: no digits")));
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(Error::Parse(format!("{s}: not a number")));
    }
    let digits = format!("{int_part}{frac_part}");
    let mut n = IBig::from_str(&digits).map_err(|e| Error::Parse(format!("{s}: {e}")))?;
    if neg {
        n = -n;
    }
    let scale = exp - frac_part.len() as i64;
    let ten = UBig::from(10u8);
    Ok(if scale >= 0 {
        RBig::from(n * IBig::from(ten.pow(scale as usize)))
    } else {
        RBig::from_parts(n, ten.pow((-scale) as usize))
    })
}

/// Scientific notation with `digits` significant digits, rounded half away
/// from zero: `-1.2340000e-5`. Zero renders as `0`.
pub fn format_decimal(r: &RBig, digits: usize) -> String {
    assert!(digits >= 1);
    if r.is_zero() {
        return "0".to_string();
    }
    let neg = r.numerator() < &IBig::ZERO;
    let num = r.numerator().unsigned_abs();
    let den = r.denominator().clone();
    // Estimate the decimal exponent, then correct it.
    let est = Scalar::exact(RBig::from_parts(IBig::from(num.clone()), den.clone()), 0).log10_abs();
    let mut e = est.floor() as i64;
    let ten = UBig::from(10u8);
    let scaled = |e: i64| -> UBig {
        // round(|r| · 10^(digits-1-e))
        let shift = digits as i64 - 1 - e;
        let (n, d) = if shift >= 0 {
            (&num * ten.pow(shift as usize), den.clone())
        } else {
            (num.clone(), &den * ten.pow((-shift) as usize))
        };
        (&n * UBig::from(2u8) + &d) / (&d * UBig::from(2u8))
    };
    let lower = ten.pow(digits - 1);
    let upper = ten.pow(digits);
    let mut m = scaled(e);
    for _ in 0..4 {
        if m >= upper {
            e += 1;
            m = scaled(e);
        } else if m < lower {
            e -= 1;
            m = scaled(e);
        } else {
            break;
        }
    }
    let s = m.to_string();
    let (head, tail) = s.split_at(1);
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push_str(head);
    if !tail.is_empty() {
        out.push('.');
        out.push_str(tail);
    }
    out.push_str(&format!("e{e}"));
    out
}
