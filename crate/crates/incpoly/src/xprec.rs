//! Extended-precision complex arithmetic on top of `astro-float`.
//!
//! Values carry a binary significand of the requested width and a 32-bit
//! binary exponent, so magnitudes such as `3^5000` or `3^-5000` stay finite.

use astro_float::{BigFloat, RoundingMode, Sign};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const RM: RoundingMode = RoundingMode::ToEven;

/// Smallest significand width used in extended mode.
pub const MIN_EXTENDED_BITS: usize = 160;

/// Splits a finite non-zero `BigFloat` into `m * 2^e` with `0.5 <= |m| < 1`.
/// Zero maps to `(0.0, 0)`.
pub fn frexp(x: &BigFloat) -> (f64, i64) {
    if x.is_zero() {
        return (0.0, 0);
    }
    match x.as_raw_parts() {
        Some((words, _bits, sign, exp, _)) => {
            let top = *words.last().unwrap_or(&0) as f64;
            let next = if words.len() > 1 {
                words[words.len() - 2] as f64
            } else {
                0.0
            };
            let two64 = 18446744073709551616.0_f64;
            let mut m = (top + next / two64) / two64;
            if m >= 1.0 {
                m = 0.5;
                return (if sign == Sign::Neg { -m } else { m }, exp as i64 + 1);
            }
            (if sign == Sign::Neg { -m } else { m }, exp as i64)
        }
        None => (f64::NAN, 0),
    }
}

/// Converts to `f64`, saturating to zero or infinity outside the double range.
pub fn to_f64(x: &BigFloat) -> f64 {
    let (m, e) = frexp(x);
    if m == 0.0 {
        return 0.0;
    }
    if e > 1100 {
        return m.signum() * f64::INFINITY;
    }
    if e < -1100 {
        return 0.0;
    }
    m * 2f64.powi(e as i32)
}

/// Extended-precision complex number.
#[derive(Debug, Clone)]
pub struct XComplex {
    pub re: BigFloat,
    pub im: BigFloat,
}

impl XComplex {
    pub fn zero(bits: usize) -> Self {
        XComplex {
            re: BigFloat::from_f64(0.0, bits),
            im: BigFloat::from_f64(0.0, bits),
        }
    }

    pub fn from_c64(z: Complex64, bits: usize) -> Self {
        XComplex {
            re: BigFloat::from_f64(z.re, bits),
            im: BigFloat::from_f64(z.im, bits),
        }
    }

    /// Builds `exp(log_mag) * e^{i phase}` without passing through `f64` overflow.
    pub fn from_log_polar(log_mag: f64, phase: f64, bits: usize) -> Self {
        let l2 = log_mag / std::f64::consts::LN_2;
        let e = l2.floor();
        let frac = (l2 - e) * std::f64::consts::LN_2;
        let r = frac.exp();
        let mut z = Self::from_c64(Complex64::from_polar(r, phase), bits);
        z.mul_pow2(e as i64);
        z
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn add(&self, o: &Self, bits: usize) -> Self {
        XComplex {
            re: self.re.add(&o.re, bits, RM),
            im: self.im.add(&o.im, bits, RM),
        }
    }

    pub fn sub(&self, o: &Self, bits: usize) -> Self {
        XComplex {
            re: self.re.sub(&o.re, bits, RM),
            im: self.im.sub(&o.im, bits, RM),
        }
    }

    pub fn mul(&self, o: &Self, bits: usize) -> Self {
        let rr = self.re.mul(&o.re, bits, RM);
        let ii = self.im.mul(&o.im, bits, RM);
        let ri = self.re.mul(&o.im, bits, RM);
        let ir = self.im.mul(&o.re, bits, RM);
        XComplex {
            re: rr.sub(&ii, bits, RM),
            im: ri.add(&ir, bits, RM),
        }
    }

    pub fn neg(&self) -> Self {
        XComplex {
            re: self.re.neg(),
            im: self.im.neg(),
        }
    }

    /// Quotient; division by zero gives NaN parts.
    pub fn div(&self, o: &Self, bits: usize) -> Self {
        let w = bits + 64;
        let den = o.re.mul(&o.re, w, RM).add(&o.im.mul(&o.im, w, RM), w, RM);
        let conj = XComplex {
            re: o.re.clone(),
            im: o.im.neg(),
        };
        let num = self.mul(&conj, w);
        XComplex {
            re: num.re.div(&den, bits, RM),
            im: num.im.div(&den, bits, RM),
        }
    }

    /// `self^e` by binary powering.
    pub fn powu(&self, mut e: u64, bits: usize) -> Self {
        let mut base = self.clone();
        let mut acc = XComplex::from_c64(Complex64::new(1.0, 0.0), bits);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base, bits);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base, bits);
            }
        }
        acc
    }

    /// Multiplies in place by `2^k`.
    pub fn mul_pow2(&mut self, k: i64) {
        for part in [&mut self.re, &mut self.im] {
            if let Some(e) = part.exponent() {
                if !part.is_zero() {
                    part.set_exponent((e as i64 + k) as i32);
                }
            }
        }
    }

    /// Natural logarithm of the modulus; `-inf` for zero.
    pub fn ln_abs(&self) -> f64 {
        let (mr, er) = frexp(&self.re);
        let (mi, ei) = frexp(&self.im);
        if mr == 0.0 && mi == 0.0 {
            return f64::NEG_INFINITY;
        }
        let e = if mr == 0.0 {
            ei
        } else if mi == 0.0 {
            er
        } else {
            er.max(ei)
        };
        let a = mr * 2f64.powi((er - e).max(-1100) as i32);
        let b = mi * 2f64.powi((ei - e).max(-1100) as i32);
        a.hypot(b).ln() + e as f64 * std::f64::consts::LN_2
    }

    /// Argument in `(-pi, pi]`.
    pub fn arg(&self) -> f64 {
        let (mr, er) = frexp(&self.re);
        let (mi, ei) = frexp(&self.im);
        let e = er.max(ei);
        let a = mr * 2f64.powi((er - e).max(-1100) as i32);
        let b = mi * 2f64.powi((ei - e).max(-1100) as i32);
        b.atan2(a)
    }

    /// Nearest double-precision complex value (saturating).
    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(to_f64(&self.re), to_f64(&self.im))
    }
}

/// Exact image of a `BigFloat` (mantissa words, significant bits, sign,
/// binary exponent) for lossless serialization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FloatBits {
    pub words: Vec<u64>,
    pub significant: usize,
    pub negative: bool,
    pub exponent: i32,
}

impl FloatBits {
    pub fn of(x: &BigFloat) -> Option<FloatBits> {
        let (words, significant, sign, exponent, _) = x.as_raw_parts()?;
        Some(FloatBits {
            words: words.iter().map(|&w| w as u64).collect(),
            significant,
            negative: sign == Sign::Neg,
            exponent,
        })
    }

    /// Inverse of [`FloatBits::of`]; malformed parts give `None`.
    pub fn to_float(&self) -> Option<BigFloat> {
        let words: Vec<astro_float::Word> = self.words.iter().map(|&w| w as astro_float::Word).collect();
        let sign = if self.negative { Sign::Neg } else { Sign::Pos };
        let x = BigFloat::from_raw_parts(&words, self.significant, sign, self.exponent, false);
        (!x.is_nan()).then_some(x)
    }
}

/// Lossless image of an [`XComplex`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct XComplexBits {
    pub re: FloatBits,
    pub im: FloatBits,
}

impl XComplexBits {
    pub fn of(z: &XComplex) -> Option<XComplexBits> {
        Some(XComplexBits {
            re: FloatBits::of(&z.re)?,
            im: FloatBits::of(&z.im)?,
        })
    }

    pub fn to_xcomplex(&self) -> Option<XComplex> {
        Some(XComplex {
            re: self.re.to_float()?,
            im: self.im.to_float()?,
        })
    }
}

/// Horner evaluation of `sum coeffs[k] z^k` in extended precision.
pub fn horner(coeffs: &[XComplex], z: &XComplex, bits: usize) -> XComplex {
    let mut acc = XComplex::zero(bits);
    for c in coeffs.iter().rev() {
        acc = acc.mul(z, bits).add(c, bits);
    }
    acc
}

/// Working precision for a computation whose intermediate terms exceed the
/// result by up to `cancellation_log2` binary orders, targeting `target_bits`
/// of final accuracy.
pub fn bits_for(cancellation_log2: f64, target_bits: usize) -> usize {
    let extra = if cancellation_log2.is_finite() && cancellation_log2 > 0.0 {
        cancellation_log2.ceil() as usize
    } else {
        0
    };
    let b = (target_bits + extra + 32).max(MIN_EXTENDED_BITS);
    b.div_ceil(64) * 64
}

/// Arithmetic mode for polynomial coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Precision {
    Standard,
    /// Significand width in bits.
    Extended(usize),
}

impl Precision {
    /// Escalates `Standard` to extended when `n ln(max|z|) > 600`.
    pub fn resolve(self, n: usize, max_abs: f64) -> Precision {
        match self {
            Precision::Standard if n as f64 * max_abs.max(1.0).ln() > 600.0 => {
                Precision::Extended(MIN_EXTENDED_BITS)
            }
            p => p,
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = String;

    /// Accepts `standard`, `extended` and `ext:<bits>`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "standard" => Ok(Precision::Standard),
            "extended" | "ext" => Ok(Precision::Extended(MIN_EXTENDED_BITS)),
            _ => {
                let bits = s
                    .strip_prefix("ext:")
                    .and_then(|b| b.parse::<usize>().ok())
                    .ok_or_else(|| format!("unknown precision `{s}` (standard | ext:<bits>)"))?;
                if bits < MIN_EXTENDED_BITS {
                    return Err(format!("extended precision needs at least {MIN_EXTENDED_BITS} bits"));
                }
                Ok(Precision::Extended(bits))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frexp_roundtrip() {
        for &x in &[1.0, -3.5, 1e-300, 7.25e250, 0.1] {
            let b = BigFloat::from_f64(x, 192);
            let (m, e) = frexp(&b);
            assert!((0.5..1.0).contains(&m.abs()));
            assert!((m * 2f64.powi(e as i32) - x).abs() <= 1e-15 * x.abs());
            assert_eq!(to_f64(&b), x);
        }
        assert_eq!(frexp(&BigFloat::from_f64(0.0, 192)), (0.0, 0));
    }

    #[test]
    fn wide_exponent_log_magnitude() {
        let bits = 192;
        let three = XComplex::from_c64(Complex64::new(3.0, 0.0), bits);
        let mut acc = XComplex::from_c64(Complex64::new(1.0, 0.0), bits);
        for _ in 0..5000 {
            acc = acc.mul(&three, bits);
        }
        let expect = 5000.0 * 3f64.ln();
        assert!((acc.ln_abs() - expect).abs() < 1e-9 * expect);
        assert!(acc.to_c64().re.is_infinite());
    }

    #[test]
    fn log_polar_roundtrip() {
        let z = XComplex::from_log_polar(-2000.0, 1.0, 192);
        assert!((z.ln_abs() + 2000.0).abs() < 1e-10);
        assert!((z.arg() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn division_and_powers() {
        let bits = 256;
        let a = XComplex::from_c64(Complex64::new(1.5, -2.0), bits);
        let b = XComplex::from_c64(Complex64::new(-0.25, 3.0), bits);
        let q = a.div(&b, bits).to_c64();
        let expect = Complex64::new(1.5, -2.0) / Complex64::new(-0.25, 3.0);
        assert!((q - expect).norm() < 1e-15);
        let p = b.powu(7, bits).to_c64();
        assert!((p - Complex64::new(-0.25, 3.0).powu(7)).norm() < 1e-9 * p.norm());
        let big = XComplex::from_c64(Complex64::new(0.0, 3.0), bits).powu(4001, bits);
        assert!((big.ln_abs() - 4001.0 * 3f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn bits_roundtrip_is_exact() {
        let bits = 320;
        let z = XComplex::from_log_polar(-12345.678, 2.5, bits).add(&XComplex::from_c64(Complex64::new(0.0, 0.0), bits), bits);
        let back = XComplexBits::of(&z).unwrap().to_xcomplex().unwrap();
        assert_eq!(back.re, z.re);
        assert_eq!(back.im, z.im);
        let zero = XComplex::zero(bits);
        let back = XComplexBits::of(&zero).unwrap().to_xcomplex().unwrap();
        assert!(back.is_zero());
    }

    #[test]
    fn horner_matches_double() {
        let c: Vec<Complex64> = (0..8).map(|k| Complex64::new(k as f64, 1.0 - k as f64)).collect();
        let z = Complex64::new(0.3, -0.7);
        let direct = c.iter().rev().fold(Complex64::new(0.0, 0.0), |a, &b| a * z + b);
        let xc: Vec<XComplex> = c.iter().map(|&v| XComplex::from_c64(v, 192)).collect();
        let h = horner(&xc, &XComplex::from_c64(z, 192), 192).to_c64();
        assert!((h - direct).norm() < 1e-13);
    }
}
