//! Frequency families: pairwise disjoint integer sets with cross-set
//! separation.
//!
//! Both kinds are unions of blocks indexed by an exponent `u`, each block
//! holding the multiples of a divisor inside an interval:
//!
//! * natural kind: `[a^u, C a^u]` with multiples of `nu`, and ratio separation
//!   `n > kappa m`;
//! * log kind: `[2^{(1-eps) a^{2u}}, 2^{(1+eps) a^{2u}}]` with multiples of
//!   `N_p(i)`, and quadratic separation `n > m^2`.
//!
//! Block endpoints are exact big integers, so every structural check below
//! is exact.

use astro_float::{BigFloat, Consts, RoundingMode};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize, Serializer};

use crate::density::{lower_density, IndexSet, WeightSequence};
use crate::error::{Error, Result};

/// Assignment of exponents `u` to the sets of a finite family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentSchedule {
    /// Set `j < J-1` takes the `u` with `v_2(u+1) = j`; the last set takes
    /// `v_2(u+1) >= J-1`. Gaps are `2^{j+1}`, and `2^{J-1}` for the last set.
    Dyadic,
    /// Set `j` takes `u = j mod J`. Every gap equals `J`.
    Cyclic,
}

impl ExponentSchedule {
    pub fn owner(self, u: u32, count: usize) -> usize {
        match self {
            ExponentSchedule::Cyclic => u as usize % count,
            ExponentSchedule::Dyadic => ((u + 1).trailing_zeros() as usize).min(count - 1),
        }
    }

    /// Largest distance between consecutive exponents owned by set `j`.
    pub fn gap(self, j: usize, count: usize) -> u32 {
        match self {
            ExponentSchedule::Cyclic => count as u32,
            ExponentSchedule::Dyadic if j + 1 < count => 1 << (j + 1),
            ExponentSchedule::Dyadic => 1 << (count - 1),
        }
    }
}

fn ser_big<S: Serializer>(x: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_str_radix(10))
}

fn de_big<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<BigUint, D::Error> {
    let s = String::deserialize(d)?;
    s.parse::<BigUint>().map_err(serde::de::Error::custom)
}

fn ceil_div(x: &BigUint, d: &BigUint) -> BigUint {
    (x + d - 1u32) / d
}

/// Multiples of `step` from `first` to `last` inclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub u: u32,
    #[serde(serialize_with = "ser_big", deserialize_with = "de_big")]
    pub first: BigUint,
    #[serde(serialize_with = "ser_big", deserialize_with = "de_big")]
    pub last: BigUint,
    #[serde(serialize_with = "ser_big", deserialize_with = "de_big")]
    pub step: BigUint,
}

impl Block {
    pub fn count(&self) -> BigUint {
        (&self.last - &self.first) / &self.step + 1u32
    }

    /// Smallest element at or above `x`.
    fn at_or_above(&self, x: &BigUint) -> Option<BigUint> {
        if x <= &self.first {
            return Some(self.first.clone());
        }
        if x > &self.last {
            return None;
        }
        let k = ceil_div(&(x - &self.first), &self.step);
        Some(&self.first + k * &self.step)
    }

    /// Largest element strictly below `x`.
    fn below(&self, x: &BigUint) -> Option<BigUint> {
        if x <= &self.first {
            return None;
        }
        if x > &self.last {
            return Some(self.last.clone());
        }
        let k = (x - &self.first - 1u32) / &self.step;
        Some(&self.first + k * &self.step)
    }

    /// Smallest element strictly above `x`.
    fn above(&self, x: &BigUint) -> Option<BigUint> {
        if x >= &self.last {
            return None;
        }
        if x < &self.first {
            return Some(self.first.clone());
        }
        let k = (x - &self.first) / &self.step + 1u32;
        Some(&self.first + k * &self.step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySet {
    /// `(p, i)`; natural families use `i = 0`.
    pub p: usize,
    pub i: usize,
    #[serde(serialize_with = "ser_big", deserialize_with = "de_big")]
    pub divisor: BigUint,
    #[serde(serialize_with = "ser_big", deserialize_with = "de_big")]
    pub floor: BigUint,
    pub blocks: Vec<Block>,
}

impl FamilySet {
    pub fn min_element(&self) -> Option<&BigUint> {
        self.blocks.iter().map(|b| &b.first).min()
    }

    /// Elements up to `horizon`, as an index set.
    pub fn index_set(&self, horizon: u64) -> IndexSet {
        let mut elements = Vec::new();
        for b in &self.blocks {
            let (Some(first), Some(step)) = (b.first.to_u64(), b.step.to_u64()) else {
                continue;
            };
            if first > horizon {
                continue;
            }
            let last = b.last.to_u64().unwrap_or(u64::MAX).min(horizon);
            elements.extend((first..=last).step_by(step as usize));
        }
        IndexSet::explicit(elements)
    }

    /// Number of elements in each block.
    pub fn census(&self) -> Vec<(u32, BigUint)> {
        self.blocks.iter().map(|b| (b.u, b.count())).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Separation {
    /// `n > kappa m`.
    Ratio { kappa: f64 },
    /// `n > m^2`.
    Quadratic,
}

impl Separation {
    /// Whether `n` is far enough above `m`, decided in exact integer arithmetic.
    pub fn separated(&self, n: &BigUint, m: &BigUint) -> bool {
        match self {
            Separation::Quadratic => n > &(m * m),
            Separation::Ratio { kappa } => {
                let (mant, exp) = f64_parts(*kappa);
                // kappa = mant * 2^exp
                if exp >= 0 {
                    n > &((m * mant) << exp as usize)
                } else {
                    (n << (-exp) as usize) > m * mant
                }
            }
        }
    }
}

/// Exact decomposition `x = mant * 2^exp` of a positive finite double.
fn f64_parts(x: f64) -> (u64, i64) {
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FamilyParams {
    Natural {
        kappa: f64,
        nu: u64,
        a: f64,
        #[serde(rename = "C")]
        c: f64,
    },
    Log {
        a: f64,
        eps: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyFamily {
    pub params: FamilyParams,
    pub separation: Separation,
    pub schedule: ExponentSchedule,
    /// Blocks are materialised while their first element is at most this bound.
    #[serde(serialize_with = "ser_big", deserialize_with = "de_big")]
    pub bound: BigUint,
    pub sets: Vec<FamilySet>,
}

impl FrequencyFamily {
    pub fn set(&self, p: usize, i: usize) -> Option<&FamilySet> {
        self.sets.iter().find(|s| s.p == p && s.i == i)
    }
}

/// Builds the natural-density family
/// `E_p = union_{u in A_p} [a^u, C a^u] cap nu N`.
///
/// Blocks of different sets satisfy `min(later) / max(earlier) >= a / C > kappa + 1`.
/// Exponents are assigned by `schedule`; set `p` starts at the first owned
/// exponent whose block lies above `floors[p]` and contains a multiple of `nu`.
pub fn build_natural_family(
    kappa: f64,
    nu: u64,
    floors: &[u64],
    count: usize,
    a: f64,
    c: f64,
    schedule: ExponentSchedule,
    horizon: u64,
) -> Result<FrequencyFamily> {
    if !(kappa > 1.0) || nu == 0 || count == 0 {
        return Err(Error::InvalidArgument("need kappa > 1, nu >= 1, count >= 1".into()));
    }
    if !(c > 1.0) || !(a > (kappa + 1.0) * c) {
        return Err(Error::ParameterInfeasible(format!(
            "need C > 1 and a > (kappa + 1) C = {:.4}, got a = {a}, C = {c}",
            (kappa + 1.0) * c
        )));
    }
    if floors.len() < count {
        return Err(Error::InvalidArgument(format!("{count} sets need {count} floors, got {}", floors.len())));
    }
    let mut sets: Vec<FamilySet> = (0..count)
        .map(|p| FamilySet {
            p,
            i: 0,
            divisor: BigUint::from(nu),
            floor: BigUint::from(floors[p]),
            blocks: Vec::new(),
        })
        .collect();
    let mut u = 0u32;
    loop {
        let base = a.powi(u as i32);
        if base > horizon as f64 {
            break;
        }
        let j = schedule.owner(u, count);
        // integer block [ceil(a^u), floor(C a^u)] intersected with nu N
        let lo = base.ceil() as u64;
        let hi = (c * base).floor() as u64;
        let first = lo.max(floors[j]).div_ceil(nu) * nu;
        let last = hi / nu * nu;
        if lo >= floors[j] && first <= last {
            sets[j].blocks.push(Block {
                u,
                first: first.into(),
                last: last.into(),
                step: nu.into(),
            });
        }
        u += 1;
    }
    Ok(FrequencyFamily {
        params: FamilyParams::Natural { kappa, nu, a, c },
        separation: Separation::Ratio { kappa },
        schedule,
        bound: horizon.into(),
        sets,
    })
}

/// `floor(2^x)` and `ceil(2^x)` for `x >= 0`, with a certificate that the
/// rounding is decided: the computed fractional part must sit at least
/// 256 units in the last place away from an integer.
fn pow2_floor_ceil(x: &BigFloat, x_int: u64, cc: &mut Consts) -> Result<(BigUint, BigUint)> {
    let rm = RoundingMode::ToEven;
    let p = ((x_int as usize + 192).div_ceil(64)) * 64;
    let two = BigFloat::from_f64(2.0, p);
    let v = two.pow(x, p, rm, cc);
    let (words, _, _, e, _) = v
        .as_raw_parts()
        .ok_or_else(|| Error::InvalidArgument("2^x is not finite".into()))?;
    let mut mant = BigUint::zero();
    for w in words.iter().rev() {
        mant = (mant << 64) + BigUint::from(*w);
    }
    let width = (words.len() * 64) as i64;
    let shift = width - e as i64;
    if shift < 16 {
        return Err(Error::InvalidArgument("insufficient precision for 2^x".into()));
    }
    let shift = shift as usize;
    let floor = &mant >> shift;
    let frac = &mant - (&floor << shift);
    let guard = BigUint::from(256u32);
    let full = BigUint::one() << shift;
    if frac < guard || &full - &frac < guard {
        return Err(Error::ParameterInfeasible(
            "2^x is too close to an integer to certify its rounding".into(),
        ));
    }
    let ceil = &floor + 1u32;
    Ok((floor, ceil))
}

/// Endpoints `ceil(2^{(1-eps) a^{2u}})` and `floor(2^{(1+eps) a^{2u}})`.
pub fn log_interval(a: f64, eps: f64, u: u32, cc: &mut Consts) -> Result<(BigUint, BigUint)> {
    let rm = RoundingMode::ToEven;
    let prec = 64 * (2 + (2 * u as usize * 53).div_ceil(64));
    let av = BigFloat::from_f64(a, prec);
    let mut a2u = BigFloat::from_f64(1.0, prec);
    for _ in 0..2 * u {
        a2u = a2u.mul(&av, prec, rm);
    }
    let one = BigFloat::from_f64(1.0, prec);
    let e = BigFloat::from_f64(eps, prec);
    let xlo = one.sub(&e, prec, rm).mul(&a2u, prec, rm);
    let xhi = one.add(&e, prec, rm).mul(&a2u, prec, rm);
    let a2u_f = a.powi(2 * u as i32);
    let (_, lo) = pow2_floor_ceil(&xlo, ((1.0 - eps) * a2u_f).floor() as u64, cc)?;
    let (hi, _) = pow2_floor_ceil(&xhi, ((1.0 + eps) * a2u_f).floor() as u64, cc)?;
    Ok((lo, hi))
}

/// Builds the log-density family
/// `E_p(i) = union_{u in A_p(i)} I_u cap N_p(i) N` with
/// `I_u = [2^{(1-eps) a^{2u}}, 2^{(1+eps) a^{2u}}]`.
///
/// `floors[i][p]` is `N_p(i)`. The sets are ordered `(p, i)` with `p` fastest,
/// and exponents are assigned by `schedule` over that order. An owned
/// exponent is skipped while `2^{(1+eps) a^{2u}} <= 2 N_p(i)`. Blocks are
/// materialised while `(1-eps) a^{2u} <= max_bits`.
pub fn build_log_family(
    a: f64,
    eps: f64,
    floors: &[Vec<u64>],
    count_p: usize,
    count_i: usize,
    schedule: ExponentSchedule,
    max_bits: u64,
) -> Result<FrequencyFamily> {
    if !(eps > 0.0 && eps < 0.2) {
        return Err(Error::ParameterInfeasible(format!("need 0 < eps < 1/5, got {eps}")));
    }
    let need = 2.0 * (1.0 + eps) / (1.0 - eps);
    if !(a > 1.0 && a * a > need) {
        return Err(Error::ParameterInfeasible(format!(
            "need a > 1 and a^2 > 2(1+eps)/(1-eps) = {need:.4}, got a = {a}"
        )));
    }
    if count_p == 0 || count_i == 0 || floors.len() < count_i || floors.iter().any(|f| f.len() < count_p) {
        return Err(Error::InvalidArgument("floors must be a count_i x count_p table".into()));
    }
    if floors.iter().flatten().any(|&n| n == 0) {
        return Err(Error::InvalidArgument("floors must be positive".into()));
    }
    let total = count_p * count_i;
    let mut sets: Vec<FamilySet> = (0..total)
        .map(|j| {
            let (p, i) = (j % count_p, j / count_p);
            FamilySet {
                p,
                i,
                divisor: BigUint::from(floors[i][p]),
                floor: BigUint::from(floors[i][p]),
                blocks: Vec::new(),
            }
        })
        .collect();
    let mut cc = Consts::new().map_err(|e| Error::InvalidArgument(format!("constant cache: {e:?}")))?;
    let mut u = 0u32;
    while (1.0 - eps) * a.powi(2 * u as i32) <= max_bits as f64 {
        let j = schedule.owner(u, total);
        let n = BigUint::from(floors[j / count_p][j % count_p]);
        let (lo, hi) = log_interval(a, eps, u, &mut cc)?;
        // floor(2^x) >= 2N iff 2^x > 2N, since 2^x is certified non-integral
        let top_ok = hi >= (&n << 1usize);
        if top_ok {
            let first = ceil_div(&lo, &n) * &n;
            let last = &hi / &n * &n;
            if first > last {
                return Err(Error::ParameterInfeasible(format!(
                    "interval for u = {u} holds no multiple of {n}"
                )));
            }
            sets[j].blocks.push(Block {
                u,
                first,
                last,
                step: n,
            });
        }
        u += 1;
    }
    let bound = BigUint::one() << max_bits as usize;
    Ok(FrequencyFamily {
        params: FamilyParams::Log { a, eps },
        separation: Separation::Quadratic,
        schedule,
        bound,
        sets,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    Overlap {
        sets: [(usize, usize); 2],
        #[serde(serialize_with = "ser_big", deserialize_with = "de_big")]
        element: BigUint,
    },
    Separation {
        /// Set of the larger element `n`, then of the smaller `m`.
        sets: [(usize, usize); 2],
        #[serde(serialize_with = "ser_big", deserialize_with = "de_big")]
        n: BigUint,
        #[serde(serialize_with = "ser_big", deserialize_with = "de_big")]
        m: BigUint,
    },
    Divisibility {
        set: (usize, usize),
        #[serde(serialize_with = "ser_big", deserialize_with = "de_big")]
        element: BigUint,
    },
    Floor {
        set: (usize, usize),
        #[serde(serialize_with = "ser_big", deserialize_with = "de_big")]
        min: BigUint,
    },
    Malformed {
        set: (usize, usize),
        detail: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetSummary {
    pub p: usize,
    pub i: usize,
    /// Lower density at the horizon, absent when the set is too sparse there.
    pub density: Option<f64>,
    pub min_element: Option<String>,
    pub blocks: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyReport {
    pub sets: Vec<SetSummary>,
    pub violations: Vec<Violation>,
    /// Whether the element scan enumerated every candidate pair.
    pub complete: bool,
}

impl FamilyReport {
    pub fn densities(&self) -> Vec<Option<f64>> {
        self.sets.iter().map(|s| s.density).collect()
    }
}

/// Most elements enumerated per block when searching for a witness pair
/// inside overlapping ranges.
const WITNESS_SCAN: u64 = 1 << 20;

/// Finds `n` in `hi_block` and `m` in `lo_block` with `n > m` that fail the
/// separation, or proves there is none. Returns `(witness, complete)`.
fn separation_witness(
    sep: &Separation,
    nb: &Block,
    mb: &Block,
) -> (Option<(BigUint, BigUint)>, bool) {
    // m below the first element of nb: the closest such m is the worst case.
    if let Some(m) = mb.below(&nb.first) {
        if !sep.separated(&nb.first, &m) {
            return (Some((nb.first.clone(), m)), true);
        }
    }
    // m inside [nb.first, nb.last): pair each m with the next element of nb.
    if mb.last < nb.first || mb.first >= nb.last {
        return (None, true);
    }
    let Some(mut m) = mb.at_or_above(&nb.first) else {
        return (None, true);
    };
    let mut scanned = 0u64;
    while m < nb.last && m <= mb.last {
        if let Some(n) = nb.above(&m) {
            if !sep.separated(&n, &m) {
                return (Some((n, m)), true);
            }
        }
        scanned += 1;
        if scanned >= WITNESS_SCAN {
            return (None, false);
        }
        m += &mb.step;
    }
    (None, true)
}

fn common_element(a: &Block, b: &Block) -> Option<BigUint> {
    let lo = (&a.first).max(&b.first).clone();
    let hi = (&a.last).min(&b.last).clone();
    if lo > hi {
        return None;
    }
    // brute force over the smaller step's progression, bounded
    let (x, y) = if a.step >= b.step { (a, b) } else { (b, a) };
    let mut k = x.at_or_above(&lo)?;
    let mut scanned = 0u64;
    while k <= hi && scanned < WITNESS_SCAN {
        if k >= y.first && ((&k - &y.first) % &y.step).is_zero() {
            return Some(k);
        }
        k += &x.step;
        scanned += 1;
    }
    None
}

/// Checks disjointness, separation, divisibility and floors exactly on the
/// block structure, and measures each set's lower `alpha`-density up to
/// `horizon`.
pub fn verify_family(family: &FrequencyFamily, alpha: &WeightSequence, horizon: u64) -> FamilyReport {
    let mut violations = Vec::new();
    let mut complete = true;
    for s in &family.sets {
        let id = (s.p, s.i);
        for b in &s.blocks {
            if b.step.is_zero() || b.first > b.last || !((&b.last - &b.first) % &b.step).is_zero() {
                violations.push(Violation::Malformed {
                    set: id,
                    detail: format!("block u = {} is not an arithmetic progression", b.u),
                });
                continue;
            }
            if !(&b.step % &s.divisor).is_zero() || !(&b.first % &s.divisor).is_zero() {
                violations.push(Violation::Divisibility {
                    set: id,
                    element: if (&b.first % &s.divisor).is_zero() {
                        &b.first + &b.step
                    } else {
                        b.first.clone()
                    },
                });
            }
        }
        if let Some(m) = s.min_element() {
            if m < &s.floor {
                violations.push(Violation::Floor { set: id, min: m.clone() });
            }
        }
    }
    let pairs: Vec<(usize, usize)> = (0..family.sets.len())
        .flat_map(|x| (0..family.sets.len()).filter(move |&y| y != x).map(move |y| (x, y)))
        .collect();
    let found = crate::par::map_slice(&pairs, |&(x, y)| {
        let (sx, sy) = (&family.sets[x], &family.sets[y]);
        let mut out = Vec::new();
        let mut done = true;
        for nb in &sx.blocks {
            for mb in &sy.blocks {
                if x < y {
                    if let Some(e) = common_element(nb, mb) {
                        out.push(Violation::Overlap {
                            sets: [(sx.p, sx.i), (sy.p, sy.i)],
                            element: e,
                        });
                    }
                }
                let (w, c) = separation_witness(&family.separation, nb, mb);
                done &= c;
                if let Some((n, m)) = w {
                    out.push(Violation::Separation {
                        sets: [(sx.p, sx.i), (sy.p, sy.i)],
                        n,
                        m,
                    });
                }
            }
        }
        (out, done)
    });
    for (v, c) in found {
        violations.extend(v);
        complete &= c;
    }
    let sets = crate::par::map_slice(&family.sets, |s| {
        let e = s.index_set(horizon);
        SetSummary {
            p: s.p,
            i: s.i,
            density: lower_density(&e, alpha, horizon).ok().map(|d| d.estimate),
            min_element: s.min_element().map(|m| m.to_str_radix(10)),
            blocks: s.blocks.len(),
        }
    });
    FamilyReport {
        sets,
        violations,
        complete,
    }
}
