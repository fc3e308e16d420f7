//! Scalar fields used by operators.
//!
//! Two arithmetic modes are supported. [`Exact`] is a complex number whose
//! real and imaginary parts live in a quadratic field `Q(√r)`; it is what ray
//! configurations such as the 33-ray set (components in `{0, ±1, ±√2}`) need
//! for orthogonality to be decided without rounding. [`C64`] is the ordinary
//! float complex type. Both implement [`Scalar`], so matrices, projections and
//! measures are written once and instantiated in either mode.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

pub use num::complex::Complex64 as C64;

use crate::error::Error;

/// `a + b√r` with rational `a`, `b` and a square-free radicand `r ≥ 2`.
///
/// A value with `b = 0` carries radicand 0 and combines with any field.
/// Combining two irrational values from different fields panics; the ray-set
/// parser rejects documents that mix radicands, so this only fires on misuse.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Surd {
    rational: BigRational,
    irrational: BigRational,
    radicand: u32,
}

fn common_radicand(a: u32, b: u32) -> u32 {
    match (a, b) {
        (0, r) | (r, 0) => r,
        (r, s) if r == s => r,
        (r, s) => panic!("mixed quadratic fields √{r} and √{s}"),
    }
}

/// Splits `n` as `k² · m` with `m` square-free; returns `(k, m)`.
pub fn square_free_split(mut n: u64) -> (u64, u64) {
    let mut k = 1u64;
    let mut m = 1u64;
    let mut p = 2u64;
    while p * p <= n {
        let mut e = 0;
        while n.is_multiple_of(p) {
            n /= p;
            e += 1;
        }
        k *= p.pow(e / 2);
        if e % 2 == 1 {
            m *= p;
        }
        p += 1;
    }
    (k, m * n)
}

impl Surd {
    pub fn new(rational: BigRational, irrational: BigRational, radicand: u32) -> Self {
        let mut s = Surd { rational, irrational, radicand };
        s.normalize();
        s
    }

    pub fn rational(q: BigRational) -> Self {
        Surd { rational: q, irrational: BigRational::zero(), radicand: 0 }
    }

    pub fn from_int(n: i64) -> Self {
        Self::rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_ratio(p: i64, q: i64) -> Self {
        Self::rational(BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    /// `coefficient · √radicand`, reducing the radicand to square-free form.
    pub fn sqrt_term(coefficient: BigRational, radicand: u64) -> Self {
        let (k, m) = square_free_split(radicand);
        let c = coefficient * BigRational::from_integer(BigInt::from(k));
        if m == 1 {
            Self::rational(c)
        } else {
            Surd::new(BigRational::zero(), c, m as u32)
        }
    }

    fn normalize(&mut self) {
        if self.irrational.is_zero() {
            self.radicand = 0;
        }
    }

    pub fn rational_part(&self) -> &BigRational {
        &self.rational
    }

    pub fn irrational_part(&self) -> &BigRational {
        &self.irrational
    }

    pub fn radicand(&self) -> u32 {
        self.radicand
    }

    pub fn is_rational(&self) -> bool {
        self.radicand == 0
    }

    pub fn is_zero(&self) -> bool {
        self.rational.is_zero() && self.irrational.is_zero()
    }

    /// Exact sign: -1, 0 or 1.
    pub fn signum(&self) -> i32 {
        let sa = sign_of(&self.rational);
        let sb = sign_of(&self.irrational);
        if sb == 0 {
            return sa;
        }
        if sa == 0 || sa == sb {
            return sb;
        }
        let a2 = &self.rational * &self.rational;
        let b2r = &self.irrational * &self.irrational * BigRational::from_integer(BigInt::from(self.radicand));
        if a2 > b2r {
            sa
        } else {
            sb
        }
    }

    pub fn to_f64(&self) -> f64 {
        let a = ratio_to_f64(&self.rational);
        if self.radicand == 0 {
            a
        } else {
            a + ratio_to_f64(&self.irrational) * (self.radicand as f64).sqrt()
        }
    }

    pub fn inverse(&self) -> Surd {
        assert!(!self.is_zero(), "division by zero");
        if self.radicand == 0 {
            return Surd::rational(self.rational.recip());
        }
        let r = BigRational::from_integer(BigInt::from(self.radicand));
        let norm = &self.rational * &self.rational - &self.irrational * &self.irrational * r;
        Surd::new(&self.rational / &norm, -(&self.irrational / &norm), self.radicand)
    }

    /// Square root when it lies in the same field; only rational perfect
    /// squares and squares of field elements of the form `c√r` are detected.
    pub fn sqrt(&self) -> Option<Surd> {
        if self.signum() < 0 {
            return None;
        }
        if self.is_zero() {
            return Some(Surd::from_int(0));
        }
        if self.radicand != 0 {
            return None;
        }
        let num = self.rational.numer().to_biguint()?;
        let den = self.rational.denom().to_biguint()?;
        let sn = num.sqrt();
        let sd = den.sqrt();
        if &sn * &sn == num && &sd * &sd == den {
            return Some(Surd::rational(BigRational::new(sn.into(), sd.into())));
        }
        // q = m/k with m·k square-free-ish: √q = √(m k)/k
        let mk = (&num * &den).to_u64()?;
        let (k, m) = square_free_split(mk);
        let coeff = BigRational::new(BigInt::from(k), self.rational.denom().clone());
        Some(Surd::new(BigRational::zero(), coeff, m as u32))
    }
}

fn sign_of(q: &BigRational) -> i32 {
    if q.is_zero() {
        0
    } else if q.is_positive() {
        1
    } else {
        -1
    }
}

pub(crate) fn ratio_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        let n = q.numer().to_f64().unwrap_or(f64::NAN);
        let d = q.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

fn fmt_ratio(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.radicand == 0 {
            return write!(f, "{}", fmt_ratio(&self.rational));
        }
        let b = self.irrational.abs();
        let surd = if b.is_one() {
            format!("√{}", self.radicand)
        } else {
            format!("{}√{}", fmt_ratio(&b), self.radicand)
        };
        let neg = self.irrational.is_negative();
        if self.rational.is_zero() {
            write!(f, "{}{}", if neg { "-" } else { "" }, surd)
        } else {
            write!(f, "{}{}{}", fmt_ratio(&self.rational), if neg { "-" } else { "+" }, surd)
        }
    }
}

impl fmt::Debug for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

fn parse_ratio(s: &str) -> Result<BigRational, Error> {
    let bad = || Error::Parse(format!("bad rational literal `{s}`"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((p, q)) = s.split_once('/') {
        let p = BigInt::from_str(p).map_err(|_| bad())?;
        let q = BigInt::from_str(q).map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        Ok(BigRational::new(p, q))
    } else if s.contains(['.', 'e', 'E']) {
        parse_decimal(s)
    } else {
        Ok(BigRational::from_integer(BigInt::from_str(s).map_err(|_| bad())?))
    }
}

/// Parses a decimal literal such as `-0.125` or `2.5e-3` into its exact value.
pub fn parse_decimal(s: &str) -> Result<BigRational, Error> {
    let bad = || Error::Parse(format!("bad decimal literal `{s}`"));
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let mut value = BigRational::from_integer(BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| bad())?);
    let shift = exp - frac_part.len() as i32;
    let ten = BigRational::from_integer(BigInt::from(10));
    if shift >= 0 {
        value *= num::pow(ten, shift as usize);
    } else {
        value /= num::pow(ten, (-shift) as usize);
    }
    Ok(if neg { -value } else { value })
}

impl FromStr for Surd {
    type Err = Error;

    /// Accepts `p`, `p/q`, decimals, `√r`, `b√r`, `a+b√r`, `a-b√r`; `sqrt(r)`
    /// is accepted as an ASCII spelling of `√r`.
    fn from_str(raw: &str) -> Result<Self, Error> {
        let s = raw.trim().replace("sqrt(", "√").replace(')', "");
        let bad = || Error::Parse(format!("bad exact literal `{raw}`"));
        let Some(root) = s.find('√') else {
            return Ok(Surd::rational(parse_ratio(&s)?));
        };
        let radicand: u64 = s[root + '√'.len_utf8()..].parse().map_err(|_| bad())?;
        if radicand == 0 {
            return Err(bad());
        }
        let head = &s[..root];
        // split head into rational part and coefficient at the last sign that
        // is not the leading sign
        let split = head
            .char_indices()
            .filter(|&(i, c)| i > 0 && (c == '+' || c == '-'))
            .map(|(i, _)| i)
            .next_back();
        let (rat, coeff) = match split {
            Some(i) => (&head[..i], &head[i..]),
            None => ("", head),
        };
        let rational = if rat.is_empty() { BigRational::zero() } else { parse_ratio(rat)? };
        let coefficient = match coeff {
            "" | "+" => BigRational::one(),
            "-" => -BigRational::one(),
            c => parse_ratio(c.strip_prefix('+').unwrap_or(c))?,
        };
        Ok(Surd::rational(rational) + Surd::sqrt_term(coefficient, radicand))
    }
}

impl Add for Surd {
    type Output = Surd;
    fn add(self, o: Surd) -> Surd {
        if o.is_zero() {
            return self;
        }
        if self.is_zero() {
            return o;
        }
        let r = common_radicand(self.radicand, o.radicand);
        Surd::new(self.rational + o.rational, self.irrational + o.irrational, r)
    }
}

impl Sub for Surd {
    type Output = Surd;
    fn sub(self, o: Surd) -> Surd {
        if o.is_zero() {
            return self;
        }
        let r = common_radicand(self.radicand, o.radicand);
        Surd::new(self.rational - o.rational, self.irrational - o.irrational, r)
    }
}

impl Mul for Surd {
    type Output = Surd;
    fn mul(self, o: Surd) -> Surd {
        if self.is_zero() || o.is_zero() {
            return Surd::from_int(0);
        }
        if self.radicand == 0 && o.radicand == 0 {
            return Surd::rational(self.rational * o.rational);
        }
        let r = common_radicand(self.radicand, o.radicand);
        let rr = BigRational::from_integer(BigInt::from(r));
        let a = &self.rational * &o.rational + &self.irrational * &o.irrational * rr;
        let b = &self.rational * &o.irrational + &self.irrational * &o.rational;
        Surd::new(a, b, r)
    }
}

impl Div for Surd {
    type Output = Surd;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Surd) -> Surd {
        self * o.inverse()
    }
}

impl Neg for Surd {
    type Output = Surd;
    fn neg(self) -> Surd {
        Surd { rational: -self.rational, irrational: -self.irrational, radicand: self.radicand }
    }
}

impl PartialOrd for Surd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Surd {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.clone() - other.clone()).signum().cmp(&0)
    }
}

/// Exact complex number over a quadratic field.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Exact {
    pub re: Surd,
    pub im: Surd,
}

impl Exact {
    pub fn new(re: Surd, im: Surd) -> Self {
        Exact { re, im }
    }

    pub fn real(re: Surd) -> Self {
        Exact { re, im: Surd::from_int(0) }
    }

    pub fn from_ratio(p: i64, q: i64) -> Self {
        Exact::real(Surd::from_ratio(p, q))
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            write!(f, "{}", self.re)
        } else if self.re.is_zero() {
            write!(f, "({})i", self.im)
        } else {
            write!(f, "{}+({})i", self.re, self.im)
        }
    }
}

impl fmt::Debug for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Add for Exact {
    type Output = Exact;
    fn add(self, o: Exact) -> Exact {
        Exact { re: self.re + o.re, im: self.im + o.im }
    }
}

impl Sub for Exact {
    type Output = Exact;
    fn sub(self, o: Exact) -> Exact {
        Exact { re: self.re - o.re, im: self.im - o.im }
    }
}

impl Mul for Exact {
    type Output = Exact;
    fn mul(self, o: Exact) -> Exact {
        if self.im.is_zero() && o.im.is_zero() {
            return Exact { re: self.re * o.re, im: self.im };
        }
        let re = self.re.clone() * o.re.clone() - self.im.clone() * o.im.clone();
        let im = self.re * o.im + self.im * o.re;
        Exact { re, im }
    }
}

impl Div for Exact {
    type Output = Exact;
    fn div(self, o: Exact) -> Exact {
        let norm = o.re.clone() * o.re.clone() + o.im.clone() * o.im.clone();
        let inv = norm.inverse();
        let num = self * Exact { re: o.re, im: -o.im };
        Exact { re: num.re * inv.clone(), im: num.im * inv }
    }
}

impl Neg for Exact {
    type Output = Exact;
    fn neg(self) -> Exact {
        Exact { re: -self.re, im: -self.im }
    }
}

/// Field operations shared by exact and float scalars.
pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// True for exact arithmetic; tolerances are ignored in that mode.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn i() -> Self;
    fn from_i64(n: i64) -> Self;
    fn from_ratio(p: i64, q: i64) -> Self;
    fn conj(&self) -> Self;
    fn re(&self) -> Self;
    fn im(&self) -> Self;
    fn to_c64(&self) -> C64;
    /// Converts a float. Exact mode snaps to the binary rational value.
    fn from_c64(z: C64) -> Self;
    /// `|self| ≤ tol` in float mode; `self == 0` in exact mode.
    fn is_negligible(&self, tol: f64) -> bool;
    /// Compares real parts.
    fn cmp_re(&self, other: &Self) -> Ordering;
    /// Square root of a non-negative real, if representable.
    fn sqrt_re(&self) -> Option<Self>;
    /// A stable textual key; used to index exact values.
    fn key(&self) -> String;
    /// Radicand of the quadratic field the value lives in (0 if none).
    fn radicand(&self) -> u32 {
        0
    }

    fn abs(&self) -> f64 {
        self.to_c64().norm()
    }

    fn re_f64(&self) -> f64 {
        self.to_c64().re
    }

    fn near(&self, other: &Self, tol: f64) -> bool {
        (self.clone() - other.clone()).is_negligible(tol)
    }

    fn is_zero_exact(&self) -> bool {
        self.is_negligible(0.0)
    }
}

impl Scalar for Exact {
    const EXACT: bool = true;

    fn zero() -> Self {
        Exact::from_ratio(0, 1)
    }
    fn one() -> Self {
        Exact::from_ratio(1, 1)
    }
    fn i() -> Self {
        Exact { re: Surd::from_int(0), im: Surd::from_int(1) }
    }
    fn from_i64(n: i64) -> Self {
        Exact::real(Surd::from_int(n))
    }
    fn from_ratio(p: i64, q: i64) -> Self {
        Exact::from_ratio(p, q)
    }
    fn conj(&self) -> Self {
        Exact { re: self.re.clone(), im: -self.im.clone() }
    }
    fn re(&self) -> Self {
        Exact::real(self.re.clone())
    }
    fn im(&self) -> Self {
        Exact::real(self.im.clone())
    }
    fn to_c64(&self) -> C64 {
        C64::new(self.re.to_f64(), self.im.to_f64())
    }
    fn from_c64(z: C64) -> Self {
        let conv = |x: f64| Surd::rational(BigRational::from_float(x).expect("finite float"));
        Exact { re: conv(z.re), im: conv(z.im) }
    }
    fn is_negligible(&self, _tol: f64) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn cmp_re(&self, other: &Self) -> Ordering {
        self.re.cmp(&other.re)
    }
    fn sqrt_re(&self) -> Option<Self> {
        if !self.im.is_zero() {
            return None;
        }
        self.re.sqrt().map(Exact::real)
    }
    fn key(&self) -> String {
        self.to_string()
    }
    fn radicand(&self) -> u32 {
        self.re.radicand().max(self.im.radicand())
    }
}

impl Scalar for C64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn one() -> Self {
        C64::new(1.0, 0.0)
    }
    fn i() -> Self {
        C64::new(0.0, 1.0)
    }
    fn from_i64(n: i64) -> Self {
        C64::new(n as f64, 0.0)
    }
    fn from_ratio(p: i64, q: i64) -> Self {
        C64::new(p as f64 / q as f64, 0.0)
    }
    fn conj(&self) -> Self {
        C64::conj(self)
    }
    fn re(&self) -> Self {
        C64::new(self.re, 0.0)
    }
    fn im(&self) -> Self {
        C64::new(self.im, 0.0)
    }
    fn to_c64(&self) -> C64 {
        *self
    }
    fn from_c64(z: C64) -> Self {
        z
    }
    fn is_negligible(&self, tol: f64) -> bool {
        self.norm() <= tol
    }
    fn cmp_re(&self, other: &Self) -> Ordering {
        self.re.total_cmp(&other.re)
    }
    fn sqrt_re(&self) -> Option<Self> {
        (self.re >= 0.0).then(|| C64::new(self.re.sqrt(), 0.0))
    }
    fn key(&self) -> String {
        format!("{:.12e},{:.12e}", self.re, self.im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> Surd {
        x.parse().unwrap()
    }

    #[test]
    fn parses_literals() {
        assert_eq!(s("3/6"), Surd::from_ratio(1, 2));
        assert_eq!(s("-0.25"), Surd::from_ratio(-1, 4));
        assert_eq!(s("√2").to_string(), "√2");
        assert_eq!(s("-√2").to_string(), "-√2");
        assert_eq!(s("1-2√2").to_string(), "1-2√2");
        assert_eq!(s("1/2+3/4√2").to_string(), "1/2+3/4√2");
        assert_eq!(s("√8"), s("2√2"));
        assert_eq!(s("√9"), Surd::from_int(3));
        assert_eq!(s("sqrt(2)"), s("√2"));
        assert!("1+√".parse::<Surd>().is_err());
        assert!("abc".parse::<Surd>().is_err());
    }

    #[test]
    fn field_arithmetic() {
        let r2 = s("√2");
        assert_eq!(r2.clone() * r2.clone(), Surd::from_int(2));
        let x = s("1+√2");
        assert_eq!(x.clone() * x.inverse(), Surd::from_int(1));
        assert_eq!(x.clone() / x.clone(), Surd::from_int(1));
        assert!((x.to_f64() - (1.0 + 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn exact_sign() {
        assert_eq!(s("1-√2").signum(), -1);
        assert_eq!(s("3/2-√2").signum(), 1);
        assert_eq!(s("-3+2√2").signum(), -1);
        assert!(s("√2") > s("7/5"));
        assert!(s("√2") < s("3/2"));
    }

    #[test]
    fn sqrt_detection() {
        assert_eq!(Surd::from_ratio(9, 4).sqrt(), Some(Surd::from_ratio(3, 2)));
        assert_eq!(Surd::from_int(2).sqrt(), Some(s("√2")));
        assert_eq!(Surd::from_ratio(1, 2).sqrt(), Some(s("1/2√2")));
        assert_eq!(Surd::from_int(-1).sqrt(), None);
    }

    #[test]
    fn exact_complex_division() {
        let z = Exact::new(s("1"), s("1"));
        let w = z.clone() / z.clone();
        assert_eq!(w, Exact::one());
        assert_eq!(Exact::i() * Exact::i(), -Exact::one());
    }

    #[test]
    #[should_panic(expected = "mixed quadratic fields")]
    fn mixed_fields_panic() {
        let _ = s("√2") + s("√3");
    }
}
