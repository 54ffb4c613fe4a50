//! Multiprecision real and complex arithmetic on top of MPFR.
//!
//! [`Cx`] is a plain rectangular complex number whose parts are [`rug::Float`]
//! values carrying the working precision. Binary operations take the
//! precision of the left operand.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use rug::float::Constant;
use rug::{Assign, Float, Rational};

use crate::error::{Error, Result};

/// Working precision in bits.
pub type Prec = u32;

pub fn pi(prec: Prec) -> Float {
    Float::with_val(prec, Constant::Pi)
}

pub fn two_pi(prec: Prec) -> Float {
    let mut p = pi(prec);
    p *= 2u32;
    p
}

pub fn real(prec: Prec, v: f64) -> Float {
    Float::with_val(prec, v)
}

pub fn ratio(prec: Prec, num: i64, den: i64) -> Float {
    Float::with_val(prec, Rational::from((num, den)))
}

/// Parses a decimal literal such as `-1.25e3` at the given precision.
pub fn parse_real(prec: Prec, text: &str) -> Result<Float> {
    let t = text.trim();
    let parsed = Float::parse(t).map_err(|_| Error::Parse(format!("not a real number: {t:?}")))?;
    Ok(Float::with_val(prec, parsed))
}

/// Decimal digits needed so that printing and re-parsing at `prec` bits is exact.
pub fn roundtrip_digits(prec: Prec) -> usize {
    (f64::from(prec) * std::f64::consts::LOG10_2).ceil() as usize + 2
}

/// Formats a real with `digits` significant decimal digits.
pub fn fmt_real(x: &Float, digits: usize) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    x.to_string_radix(10, Some(digits))
}

#[derive(Clone, PartialEq)]
pub struct Cx {
    pub re: Float,
    pub im: Float,
}

impl fmt::Debug for Cx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} + {}i)", self.re.to_f64(), self.im.to_f64())
    }
}

impl fmt::Display for Cx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or(20);
        write!(f, "{} {}", fmt_real(&self.re, digits), fmt_real(&self.im, digits))
    }
}

impl Cx {
    pub fn new(re: Float, im: Float) -> Self {
        Cx { re, im }
    }

    pub fn zero(prec: Prec) -> Self {
        Cx { re: Float::new(prec), im: Float::new(prec) }
    }

    pub fn one(prec: Prec) -> Self {
        Cx { re: Float::with_val(prec, 1), im: Float::new(prec) }
    }

    pub fn i(prec: Prec) -> Self {
        Cx { re: Float::new(prec), im: Float::with_val(prec, 1) }
    }

    pub fn from_f64(prec: Prec, re: f64, im: f64) -> Self {
        Cx { re: Float::with_val(prec, re), im: Float::with_val(prec, im) }
    }

    pub fn from_real(x: Float) -> Self {
        let prec = x.prec();
        Cx { re: x, im: Float::new(prec) }
    }

    pub fn from_int(prec: Prec, n: i64) -> Self {
        Cx { re: Float::with_val(prec, n), im: Float::new(prec) }
    }

    pub fn from_rational(prec: Prec, q: &Rational) -> Self {
        Cx { re: Float::with_val(prec, q), im: Float::new(prec) }
    }

    /// `e^{i theta}`.
    pub fn cis(theta: &Float) -> Self {
        let prec = theta.prec();
        let (s, c) = theta.clone().sin_cos(Float::new(prec));
        Cx { re: c, im: s }
    }

    /// `e(x) = e^{2 pi i x}` for a rational `x = num/den`.
    pub fn e_frac(prec: Prec, num: i64, den: i64) -> Self {
        let r = num.rem_euclid(den);
        let mut th = two_pi(prec + 16);
        th *= Rational::from((r, den));
        let v = Cx::cis(&th);
        v.with_prec(prec)
    }

    pub fn prec(&self) -> Prec {
        self.re.prec()
    }

    pub fn with_prec(&self, prec: Prec) -> Self {
        Cx { re: Float::with_val(prec, &self.re), im: Float::with_val(prec, &self.im) }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }

    pub fn conj(&self) -> Self {
        Cx { re: self.re.clone(), im: Float::with_val(self.prec(), -&self.im) }
    }

    pub fn abs(&self) -> Float {
        Float::with_val(self.prec(), self.re.hypot_ref(&self.im))
    }

    pub fn norm_sqr(&self) -> Float {
        let p = self.prec();
        let mut a = Float::with_val(p, self.re.square_ref());
        a += Float::with_val(p, self.im.square_ref());
        a
    }

    pub fn arg(&self) -> Float {
        Float::with_val(self.prec(), self.im.atan2_ref(&self.re))
    }

    pub fn scale(&self, k: &Float) -> Self {
        let p = self.prec();
        Cx { re: Float::with_val(p, &self.re * k), im: Float::with_val(p, &self.im * k) }
    }

    pub fn scale_i64(&self, k: i64) -> Self {
        let p = self.prec();
        Cx { re: Float::with_val(p, &self.re * k), im: Float::with_val(p, &self.im * k) }
    }

    pub fn scale_rational(&self, q: &Rational) -> Self {
        let p = self.prec();
        Cx { re: Float::with_val(p, &self.re * q), im: Float::with_val(p, &self.im * q) }
    }

    /// Multiplication by `i`.
    pub fn mul_i(&self) -> Self {
        let p = self.prec();
        Cx { re: Float::with_val(p, -&self.im), im: self.re.clone() }
    }

    pub fn add_real(&self, x: &Float) -> Self {
        Cx { re: Float::with_val(self.prec(), &self.re + x), im: self.im.clone() }
    }

    pub fn add_i64(&self, k: i64) -> Self {
        Cx { re: Float::with_val(self.prec(), &self.re + k), im: self.im.clone() }
    }

    pub fn recip(&self) -> Self {
        let p = self.prec();
        let n = self.norm_sqr();
        Cx { re: Float::with_val(p, &self.re / &n), im: -Float::with_val(p, &self.im / &n) }
    }

    pub fn exp(&self) -> Self {
        let p = self.prec();
        let m = Float::with_val(p, self.re.exp_ref());
        let (s, c) = self.im.clone().sin_cos(Float::new(p));
        Cx { re: Float::with_val(p, &m * &c), im: Float::with_val(p, &m * &s) }
    }

    /// Principal logarithm.
    pub fn ln(&self) -> Self {
        let p = self.prec();
        let r = self.abs();
        Cx { re: Float::with_val(p, r.ln_ref()), im: self.arg() }
    }

    pub fn sqrt(&self) -> Self {
        let p = self.prec();
        if self.is_zero() {
            return Cx::zero(p);
        }
        let r = self.abs();
        // sqrt((r + |re|)/2) is computed without cancellation.
        let mut t = Float::with_val(p, self.re.abs_ref()) + &r;
        t /= 2u32;
        t.sqrt_mut();
        let half = Float::with_val(p, &self.im / &t) / 2u32;
        if self.re >= 0 {
            Cx { re: t, im: Float::with_val(p, half) }
        } else if self.im >= 0 {
            Cx { re: Float::with_val(p, half), im: t }
        } else {
            Cx { re: Float::with_val(p, -half), im: Float::with_val(p, -t) }
        }
    }

    /// Principal power `self^w`.
    pub fn pow(&self, w: &Cx) -> Self {
        (&self.ln() * w).exp()
    }

    pub fn powi(&self, n: i64) -> Self {
        let p = self.prec();
        let mut base = if n < 0 { self.recip() } else { self.clone() };
        let mut e = n.unsigned_abs();
        let mut acc = Cx::one(p);
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// `x^{self}` for a positive real base `x`, given `ln x`.
    pub fn exp_with_log(&self, ln_x: &Float) -> Self {
        self.scale(ln_x).exp()
    }

    /// In-place fused `self += a * b`.
    pub fn add_mul(&mut self, a: &Cx, b: &Cx) {
        let p = self.prec();
        let mut t = Float::with_val(p, &a.re * &b.re);
        t -= Float::with_val(p, &a.im * &b.im);
        self.re += &t;
        t.assign(&a.re * &b.im);
        t += Float::with_val(p, &a.im * &b.re);
        self.im += &t;
    }

    /// Distance `|self - other|`.
    pub fn dist(&self, other: &Cx) -> Float {
        (self - other).abs()
    }
}

impl<'a> Add<&'a Cx> for &'a Cx {
    type Output = Cx;
    fn add(self, o: &Cx) -> Cx {
        let p = self.prec();
        Cx { re: Float::with_val(p, &self.re + &o.re), im: Float::with_val(p, &self.im + &o.im) }
    }
}

impl<'a> Sub<&'a Cx> for &'a Cx {
    type Output = Cx;
    fn sub(self, o: &Cx) -> Cx {
        let p = self.prec();
        Cx { re: Float::with_val(p, &self.re - &o.re), im: Float::with_val(p, &self.im - &o.im) }
    }
}

impl<'a> Mul<&'a Cx> for &'a Cx {
    type Output = Cx;
    fn mul(self, o: &Cx) -> Cx {
        let p = self.prec();
        let mut re = Float::with_val(p, &self.re * &o.re);
        re -= Float::with_val(p, &self.im * &o.im);
        let mut im = Float::with_val(p, &self.re * &o.im);
        im += Float::with_val(p, &self.im * &o.re);
        Cx { re, im }
    }
}

impl<'a> Div<&'a Cx> for &'a Cx {
    type Output = Cx;
    fn div(self, o: &Cx) -> Cx {
        let p = self.prec();
        let n = o.norm_sqr();
        let mut re = Float::with_val(p, &self.re * &o.re);
        re += Float::with_val(p, &self.im * &o.im);
        re /= &n;
        let mut im = Float::with_val(p, &self.im * &o.re);
        im -= Float::with_val(p, &self.re * &o.im);
        im /= &n;
        Cx { re, im }
    }
}

impl Neg for &Cx {
    type Output = Cx;
    fn neg(self) -> Cx {
        let p = self.prec();
        Cx { re: Float::with_val(p, -&self.re), im: Float::with_val(p, -&self.im) }
    }
}

impl Neg for Cx {
    type Output = Cx;
    fn neg(self) -> Cx {
        Cx { re: -self.re, im: -self.im }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Cx> for Cx {
            type Output = Cx;
            fn $m(self, o: Cx) -> Cx {
                (&self).$m(&o)
            }
        }
        impl<'a> $tr<&'a Cx> for Cx {
            type Output = Cx;
            fn $m(self, o: &Cx) -> Cx {
                (&self).$m(o)
            }
        }
        impl<'a> $tr<Cx> for &'a Cx {
            type Output = Cx;
            fn $m(self, o: Cx) -> Cx {
                self.$m(&o)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl AddAssign<&Cx> for Cx {
    fn add_assign(&mut self, o: &Cx) {
        self.re += &o.re;
        self.im += &o.im;
    }
}

impl AddAssign<Cx> for Cx {
    fn add_assign(&mut self, o: Cx) {
        self.re += o.re;
        self.im += o.im;
    }
}

impl SubAssign<&Cx> for Cx {
    fn sub_assign(&mut self, o: &Cx) {
        self.re -= &o.re;
        self.im -= &o.im;
    }
}

impl SubAssign<Cx> for Cx {
    fn sub_assign(&mut self, o: Cx) {
        self.re -= o.re;
        self.im -= o.im;
    }
}

impl MulAssign<&Cx> for Cx {
    fn mul_assign(&mut self, o: &Cx) {
        let p = self.prec();
        let mut re = Float::with_val(p, &self.re * &o.re);
        re -= Float::with_val(p, &self.im * &o.im);
        self.im *= &o.re;
        self.im += Float::with_val(p, &self.re * &o.im);
        self.re = re;
    }
}
