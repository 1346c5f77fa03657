//! Dense polynomials with explicit valuation and degree.
//!
//! Coefficients live either in hardware doubles or in extended precision.
//! The zero polynomial reports valuation and degree `-1`.

use crate::xprec::{self, XComplex};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type C64 = Complex64;

#[derive(Debug, Clone)]
pub enum Coeffs {
    Standard(Vec<C64>),
    Extended { bits: usize, coeffs: Vec<XComplex> },
}

#[derive(Debug, Clone)]
pub struct Polynomial {
    coeffs: Coeffs,
}

/// Sparse serialisable coefficient record: `c_k = sign-phase * exp(log_mag)`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CoeffRecord {
    pub index: usize,
    pub phase: f64,
    pub log_mag: f64,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial {
            coeffs: Coeffs::Standard(Vec::new()),
        }
    }

    pub fn constant(c: C64) -> Self {
        Self::from_coeffs(vec![c])
    }

    pub fn monomial(k: usize, c: C64) -> Self {
        let mut v = vec![C64::new(0.0, 0.0); k + 1];
        v[k] = c;
        Self::from_coeffs(v)
    }

    pub fn from_coeffs(mut v: Vec<C64>) -> Self {
        while v.last().is_some_and(|c| *c == C64::new(0.0, 0.0)) {
            v.pop();
        }
        Polynomial {
            coeffs: Coeffs::Standard(v),
        }
    }

    pub fn from_extended(bits: usize, mut v: Vec<XComplex>) -> Self {
        while v.last().is_some_and(|c| c.is_zero()) {
            v.pop();
        }
        Polynomial {
            coeffs: Coeffs::Extended { bits, coeffs: v },
        }
    }

    /// Monic polynomial with the given zeros.
    pub fn from_roots(roots: &[C64]) -> Self {
        let mut c = vec![C64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![C64::new(0.0, 0.0); c.len() + 1];
            for (k, &a) in c.iter().enumerate() {
                next[k + 1] += a;
                next[k] -= a * r;
            }
            c = next;
        }
        Self::from_coeffs(c)
    }

    /// Monic polynomial with the given zeros, expanded in extended precision.
    pub fn from_roots_extended(roots: &[C64], bits: usize) -> Self {
        let mut c = vec![XComplex::from_c64(C64::new(1.0, 0.0), bits)];
        for &r in roots {
            let xr = XComplex::from_c64(r, bits);
            let mut next = vec![XComplex::zero(bits); c.len() + 1];
            for (k, a) in c.iter().enumerate() {
                next[k + 1] = next[k + 1].add(a, bits);
                next[k] = next[k].sub(&a.mul(&xr, bits), bits);
            }
            c = next;
        }
        Self::from_extended(bits, c)
    }

    pub fn coeffs(&self) -> &Coeffs {
        &self.coeffs
    }

    pub fn is_extended(&self) -> bool {
        matches!(self.coeffs, Coeffs::Extended { .. })
    }

    pub fn bits(&self) -> Option<usize> {
        match &self.coeffs {
            Coeffs::Extended { bits, .. } => Some(*bits),
            Coeffs::Standard(_) => None,
        }
    }

    fn len(&self) -> usize {
        match &self.coeffs {
            Coeffs::Standard(v) => v.len(),
            Coeffs::Extended { coeffs, .. } => coeffs.len(),
        }
    }

    fn is_nonzero_at(&self, k: usize) -> bool {
        match &self.coeffs {
            Coeffs::Standard(v) => v[k] != C64::new(0.0, 0.0),
            Coeffs::Extended { coeffs, .. } => !coeffs[k].is_zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.degree() < 0
    }

    /// Largest index with a non-zero coefficient, `-1` for the zero polynomial.
    pub fn degree(&self) -> i64 {
        (0..self.len())
            .rev()
            .find(|&k| self.is_nonzero_at(k))
            .map_or(-1, |k| k as i64)
    }

    /// Smallest index with a non-zero coefficient, `-1` for the zero polynomial.
    pub fn valuation(&self) -> i64 {
        (0..self.len())
            .find(|&k| self.is_nonzero_at(k))
            .map_or(-1, |k| k as i64)
    }

    /// Coefficient `k` rounded to double precision.
    pub fn coeff(&self, k: usize) -> C64 {
        match &self.coeffs {
            Coeffs::Standard(v) => v.get(k).copied().unwrap_or_default(),
            Coeffs::Extended { coeffs, .. } => {
                coeffs.get(k).map(|c| c.to_c64()).unwrap_or_default()
            }
        }
    }

    /// Horner evaluation. Extended polynomials are evaluated at full width
    /// and rounded once at the end.
    pub fn eval(&self, z: C64) -> C64 {
        match &self.coeffs {
            Coeffs::Standard(v) => v.iter().rev().fold(C64::new(0.0, 0.0), |a, &c| a * z + c),
            Coeffs::Extended { bits, coeffs } => {
                xprec::horner(coeffs, &XComplex::from_c64(z, *bits), *bits).to_c64()
            }
        }
    }

    /// Extended Horner evaluation returning the full-width value.
    pub fn eval_extended(&self, z: C64, bits: usize) -> XComplex {
        let xz = XComplex::from_c64(z, bits);
        match &self.coeffs {
            Coeffs::Standard(v) => {
                let xc: Vec<XComplex> = v.iter().map(|&c| XComplex::from_c64(c, bits)).collect();
                xprec::horner(&xc, &xz, bits)
            }
            Coeffs::Extended { coeffs, .. } => xprec::horner(coeffs, &xz, bits),
        }
    }

    /// Evaluation by summing the terms `c_k z^k` one at a time.
    pub fn eval_term_sum(&self, z: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        let mut zk = C64::new(1.0, 0.0);
        for k in 0..self.len() {
            acc += self.coeff(k) * zk;
            zk *= z;
        }
        acc
    }

    /// Maximum modulus over a sample set.
    pub fn sup_norm(&self, samples: &[C64]) -> f64 {
        samples.iter().map(|&z| self.eval(z).norm()).fold(0.0, f64::max)
    }

    /// Partial sum `S_l`: the coefficients with index at most `l`.
    pub fn truncate(&self, l: usize) -> Self {
        match &self.coeffs {
            Coeffs::Standard(v) => Self::from_coeffs(v.iter().take(l + 1).copied().collect()),
            Coeffs::Extended { bits, coeffs } => {
                Self::from_extended(*bits, coeffs.iter().take(l + 1).cloned().collect())
            }
        }
    }

    /// Lifts to extended precision with `bits` of significand.
    pub fn to_extended(&self, bits: usize) -> Self {
        let coeffs = (0..self.len())
            .map(|k| match &self.coeffs {
                Coeffs::Standard(v) => XComplex::from_c64(v[k], bits),
                Coeffs::Extended { coeffs, .. } => coeffs[k].clone(),
            })
            .collect();
        Self::from_extended(bits, coeffs)
    }

    /// Sum of two polynomials; the result is extended if either operand is.
    pub fn add(&self, o: &Self) -> Self {
        let bits = self.bits().into_iter().chain(o.bits()).max();
        match bits {
            None => {
                let n = self.len().max(o.len());
                Self::from_coeffs((0..n).map(|k| self.coeff(k) + o.coeff(k)).collect())
            }
            Some(b) => {
                let a = self.to_extended(b);
                let c = o.to_extended(b);
                let (Coeffs::Extended { coeffs: x, .. }, Coeffs::Extended { coeffs: y, .. }) =
                    (&a.coeffs, &c.coeffs)
                else {
                    unreachable!()
                };
                let n = x.len().max(y.len());
                let z = XComplex::zero(b);
                let v = (0..n)
                    .map(|k| x.get(k).unwrap_or(&z).add(y.get(k).unwrap_or(&z), b))
                    .collect();
                Self::from_extended(b, v)
            }
        }
    }

    pub fn neg(&self) -> Self {
        match &self.coeffs {
            Coeffs::Standard(v) => Self::from_coeffs(v.iter().map(|c| -c).collect()),
            Coeffs::Extended { bits, coeffs } => {
                Self::from_extended(*bits, coeffs.iter().map(|c| c.neg()).collect())
            }
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    /// Non-zero coefficients as (index, phase, log-magnitude) records.
    pub fn records(&self) -> Vec<CoeffRecord> {
        (0..self.len())
            .filter(|&k| self.is_nonzero_at(k))
            .map(|k| {
                let (phase, log_mag) = match &self.coeffs {
                    Coeffs::Standard(v) => (v[k].arg(), v[k].norm().ln()),
                    Coeffs::Extended { coeffs, .. } => (coeffs[k].arg(), coeffs[k].ln_abs()),
                };
                CoeffRecord {
                    index: k,
                    phase,
                    log_mag,
                }
            })
            .collect()
    }

    /// Rebuilds a polynomial from sparse records.
    pub fn from_records(records: &[CoeffRecord], bits: Option<usize>) -> Self {
        let n = records.iter().map(|r| r.index + 1).max().unwrap_or(0);
        match bits {
            None => {
                let mut v = vec![C64::new(0.0, 0.0); n];
                for r in records {
                    v[r.index] = C64::from_polar(r.log_mag.exp(), r.phase);
                }
                Self::from_coeffs(v)
            }
            Some(b) => {
                let mut v = vec![XComplex::zero(b); n];
                for r in records {
                    v[r.index] = XComplex::from_log_polar(r.log_mag, r.phase, b);
                }
                Self::from_extended(b, v)
            }
        }
    }
}
