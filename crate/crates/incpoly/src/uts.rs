//! Finite-horizon constructions of frequently universal Taylor series.
//!
//! A series `f = sum_n P_n` is assembled block by block along the increasing
//! enumeration `s_0 < s_1 < ...` of the union of a frequency family. Block
//! `n` approximates `phi_{p_n} - sum_{j<n} P_j` on the compact assigned to
//! the set containing `s_n`, with coefficients confined to an incomplete
//! window ending at `s_n`; consecutive enumeration indices in the same set
//! give a zero block. Every block is checked against its valuation, disc
//! norm and approximation bounds as it is produced.
//!
//! Coefficients are extended-precision complex numbers. A nonzero block is
//! stored as `z^v Q(z)` with a short `Q`, so partial sums are evaluated by
//! binary powering and never by Horner over the full degree.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::approx::{self, BoundSetup, FitOptions};
use crate::density::{lower_density, IndexSet, WeightSequence};
use crate::error::{Error, Result};
use crate::freqsets::{FamilyParams, FrequencyFamily};
use crate::geometry::{self, CompactSetSample};
use crate::par;
use crate::poly::Polynomial;
use crate::xprec::{self, XComplex, XComplexBits};
use crate::C64;

/// Common denominator of target coefficients.
pub const TARGET_DENOMINATOR: i64 = 8;

/// Largest `tau` tried by the sweeps.
pub const TAU_CAP: f64 = 1024.0;

/// Widest coefficient window handed to the linear-programming backend.
pub const MAX_LP_WINDOW: u64 = 256;

const MAX_REFINEMENTS: usize = 64;

// ---------------------------------------------------------------------------
// targets

/// A target `(phi_p, r_p)`: coefficients of `phi_p` in ascending degree and
/// the ball radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub coeffs: Vec<C64>,
    pub radius: f64,
    /// Maximum of `|phi_p|` over the `U` samples used at enumeration time.
    pub norm_u: f64,
    pub label: String,
}

impl Target {
    pub fn new(coeffs: Vec<C64>, radius: f64, u_samples: &[C64], label: String) -> Target {
        let mut t = Target {
            coeffs,
            radius,
            norm_u: 0.0,
            label,
        };
        t.norm_u = t.norm_on(u_samples);
        t
    }

    pub fn polynomial(&self) -> Polynomial {
        Polynomial::from_coeffs(self.coeffs.clone())
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |a, &c| a * z + c)
    }

    pub fn eval_extended(&self, z: &XComplex, bits: usize) -> XComplex {
        let c: Vec<XComplex> = self.coeffs.iter().map(|&c| XComplex::from_c64(c, bits)).collect();
        xprec::horner(&c, z, bits)
    }

    pub fn norm_on(&self, samples: &[C64]) -> f64 {
        samples.iter().map(|&z| self.eval(z).norm()).fold(0.0, f64::max)
    }

    /// `z -> phi(e^{-i angle} z)`, the target matching a compact rotated by `angle`.
    pub fn rotated(&self, angle: f64, u_samples: &[C64]) -> Target {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| c * C64::from_polar(1.0, -(k as f64) * angle))
            .collect();
        Target::new(coeffs, self.radius, u_samples, format!("{} rotated by {angle}", self.label))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEnumeration {
    pub targets: Vec<Target>,
    pub seed: u64,
}

impl TargetEnumeration {
    /// `max_p ||phi_p||_U / p` over `p >= 1`, with `phi_0 = 0` required.
    pub fn check_norms(&self, u_samples: &[C64]) -> Result<()> {
        for (p, t) in self.targets.iter().enumerate() {
            let norm = t.norm_on(u_samples);
            if norm > p as f64 / 4.0 * (1.0 + 1e-12) {
                return Err(Error::PreconditionViolated(format!(
                    "target {p} has norm {norm:.4} on U, above p/4 = {:.4}",
                    p as f64 / 4.0
                )));
            }
        }
        Ok(())
    }
}

/// `r_p = 2^{-(1 + p mod 3)}`.
pub fn target_radius(p: usize) -> f64 {
    0.5f64.powi(1 + (p % 3) as i32)
}

fn label_of(num: &[[i64; 2]]) -> String {
    let terms: Vec<String> = num
        .iter()
        .enumerate()
        .filter(|(_, c)| c[0] != 0 || c[1] != 0)
        .map(|(k, c)| {
            let z = match k {
                0 => String::new(),
                1 => " z".into(),
                _ => format!(" z^{k}"),
            };
            format!("({}{:+}i)/{TARGET_DENOMINATOR}{z}", c[0], c[1])
        })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

/// Level `h` of the candidate pool: polynomials of degree `<= h - 1` whose
/// coefficient numerators lie in `[-h, h]^2`, minus the earlier levels.
fn candidate_level(h: i64) -> Vec<Vec<[i64; 2]>> {
    let len = h as usize;
    let side = (2 * h + 1) as usize;
    let total = side.pow(2 * len as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut c = code;
        let mut num = vec![[0i64; 2]; len];
        for slot in num.iter_mut() {
            for part in slot.iter_mut() {
                *part = (c % side) as i64 - h;
                c /= side;
            }
        }
        if num.iter().all(|x| x[0] == 0 && x[1] == 0) {
            continue;
        }
        let earlier = num[len - 1] == [0, 0] && num.iter().all(|x| x[0].abs() < h && x[1].abs() < h);
        if !earlier {
            out.push(num);
        }
    }
    out
}

/// The first `count` targets of a fixed enumeration of polynomials with
/// Gaussian-rational coefficients (denominator 8), arranged so that
/// `||phi_p||_U <= p/4`. Candidates are ordered by level, then by norm on
/// `U`; the seed only permutes candidates of equal level and norm. Position
/// `p` takes the earliest unused candidate within its norm budget.
pub fn enumerate_targets(u_samples: &[C64], count: usize, seed: u64) -> Result<TargetEnumeration> {
    if count == 0 {
        return Err(Error::InvalidArgument("target count must be >= 1".into()));
    }
    if u_samples.is_empty() {
        return Err(Error::InvalidArgument("U has no samples".into()));
    }
    let to_c = |num: &[[i64; 2]]| -> Vec<C64> {
        num.iter()
            .map(|c| C64::new(c[0] as f64, c[1] as f64) / TARGET_DENOMINATOR as f64)
            .collect()
    };
    let mut pool: Vec<(Vec<[i64; 2]>, f64)> = Vec::new();
    let mut used: Vec<bool> = Vec::new();
    let mut level = 0i64;
    let mut targets = vec![Target::new(vec![], target_radius(0), u_samples, "0".into())];
    for p in 1..count {
        let budget = p as f64 / 4.0;
        loop {
            if let Some(idx) = (0..pool.len()).find(|&i| !used[i] && pool[i].1 <= budget) {
                used[idx] = true;
                let (num, _) = &pool[idx];
                let mut coeffs = to_c(num);
                while coeffs.last() == Some(&C64::new(0.0, 0.0)) {
                    coeffs.pop();
                }
                targets.push(Target::new(coeffs, target_radius(p), u_samples, label_of(num)));
                break;
            }
            level += 1;
            if level > 3 {
                return Err(Error::InvalidArgument(format!("target pool exhausted at p = {p}")));
            }
            let mut cands: Vec<(Vec<[i64; 2]>, f64)> = candidate_level(level)
                .into_iter()
                .map(|num| {
                    let c = to_c(&num);
                    let norm = u_samples
                        .iter()
                        .map(|&z| c.iter().rev().fold(C64::new(0.0, 0.0), |a, &b| a * z + b).norm())
                        .fold(0.0, f64::max);
                    (num, norm)
                })
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (level as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            cands.shuffle(&mut rng);
            cands.sort_by(|a, b| a.1.total_cmp(&b.1));
            used.extend(std::iter::repeat(false).take(cands.len()));
            pool.extend(cands);
        }
    }
    Ok(TargetEnumeration { targets, seed })
}

// ---------------------------------------------------------------------------
// constants

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantSource {
    /// From the incomplete Bernstein–Walsh bound.
    Bound,
    /// From measured block-fit errors.
    Measured,
}

/// `tau`, `theta`, `N` and `G_U`, with `contraction = G_U^{1/tau} theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauChoice {
    pub tau: f64,
    pub theta: f64,
    pub n: u64,
    pub g_u: f64,
    pub contraction: f64,
    pub margin: f64,
    pub source: ConstantSource,
}

/// `G_U = max over U of exp(g(z, inf))` for the closed unit disc, where the
/// Green function is `log |z|` outside the disc and zero inside.
pub fn g_unit_disc(u_samples: &[C64]) -> f64 {
    u_samples.iter().map(|z| z.norm()).fold(1.0, f64::max)
}

fn first_root_below(setup: &BoundSetup, tau: f64, theta: f64) -> Result<Option<u64>> {
    let root = |n: u64| -> Result<f64> { Ok(approx::theorem_c_bound(setup, n as usize, tau, 1.0)?.root) };
    let cap = 1u64 << 36;
    let mut hi = 8u64;
    'search: while hi <= cap {
        if root(hi)? <= theta {
            let mut lo = hi / 2;
            if lo >= 1 && root(lo)? <= theta {
                lo = 1;
            }
            let mut h = hi;
            while h - lo > 1 {
                let mid = lo + (h - lo) / 2;
                if root(mid)? <= theta {
                    h = mid;
                } else {
                    lo = mid;
                }
            }
            // the root must stay below theta along a geometric grid
            let mut probe = 2 * h;
            while probe <= 1024 * h && probe <= cap {
                if root(probe)? > theta {
                    hi = 2 * probe;
                    continue 'search;
                }
                probe *= 2;
            }
            return Ok(Some(h));
        }
        hi *= 2;
    }
    Ok(None)
}

/// Smallest `tau` in `2, 4, ..., 1024` for which the bound's limiting rate
/// `growth^{1/tau} G^{1-1/tau}` lies below `(1 - margin) G_U^{-1/tau}`.
/// `theta` is the midpoint of those two numbers and `N` is the first `n`
/// from which the per-`n` root of the bound stays at or below `theta`.
pub fn choose_tau(setup: &BoundSetup, u_samples: &[C64], margin: f64) -> Result<TauChoice> {
    if !(0.0..1.0).contains(&margin) {
        return Err(Error::InvalidArgument(format!("margin must lie in [0, 1), got {margin}")));
    }
    let g_u = g_unit_disc(u_samples);
    let mut tau = 2.0;
    while tau <= TAU_CAP {
        let limit = setup.growth_ratio().powf(1.0 / tau) * setup.g.powf(1.0 - 1.0 / tau);
        let ceiling = (1.0 - margin) * g_u.powf(-1.0 / tau);
        if limit < ceiling {
            let theta = 0.5 * (limit + ceiling);
            if let Some(n) = first_root_below(setup, tau, theta)? {
                return Ok(TauChoice {
                    tau,
                    theta,
                    n,
                    g_u,
                    contraction: g_u.powf(1.0 / tau) * theta,
                    margin,
                    source: ConstantSource::Bound,
                });
            }
        }
        tau *= 2.0;
    }
    Err(Error::NoFeasibleTau { cap: TAU_CAP })
}

fn probe_targets() -> [Target; 2] {
    let one = Target {
        coeffs: vec![C64::new(1.0, 0.0)],
        radius: 1.0,
        norm_u: 1.0,
        label: "1".into(),
    };
    let z = Target {
        coeffs: vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        radius: 1.0,
        norm_u: 0.0,
        label: "z".into(),
    };
    [one, z]
}

/// Largest `(err_n / ||phi||_U)^{1/n}` over the probe degrees and
/// `phi in {1, z}`, where `err_n` is the larger of the `K` error and the
/// certified unit-disc norm of the block fit with valuation floor `v_min(n)`.
fn measured_theta(
    k: &CompactSetSample,
    u_samples: &[C64],
    probes: &[u64],
    l_radius: f64,
    v_min: &dyn Fn(u64) -> Result<u64>,
) -> Result<f64> {
    let ks = k.all_samples();
    let bits = xprec::MIN_EXTENDED_BITS * 2 + interpolation_bits(&ks);
    let xk: Vec<XComplex> = ks.iter().map(|&z| XComplex::from_c64(z, bits)).collect();
    let mut theta = 0.0f64;
    for phi in probe_targets() {
        let norm = phi.norm_on(u_samples).max(1.0);
        let values: Vec<XComplex> = xk.iter().map(|z| phi.eval_extended(z, bits)).collect();
        for &n in probes {
            let fit = fit_block(&ks, &values, v_min(n)?, n, l_radius, bits, None)?;
            let err = fit.log_err_k.unwrap_or(f64::NEG_INFINITY).max(fit.log_norm(l_radius, bits).unwrap_or(f64::NEG_INFINITY));
            if err.is_finite() {
                theta = theta.max(((err - norm.ln()) / n as f64).exp());
            }
        }
    }
    Ok(theta)
}

/// Measured-constant analogue of [`choose_tau`]: `theta` is the largest
/// per-degree root of the block fitter's errors over `probes`, and `N` the
/// smallest probe degree.
pub fn calibrate_tau(k: &CompactSetSample, u_samples: &[C64], probes: &[u64], margin: f64) -> Result<TauChoice> {
    if probes.is_empty() {
        return Err(Error::InvalidArgument("calibration needs probe degrees".into()));
    }
    let g_u = g_unit_disc(u_samples);
    let mut tau = 2.0;
    while tau <= TAU_CAP {
        let theta = measured_theta(k, u_samples, probes, 1.0, &|n| Ok(approx::window_start(n as usize, tau)? as u64 + 1))?;
        let contraction = g_u.powf(1.0 / tau) * theta;
        if theta > 0.0 && contraction < 1.0 - margin {
            return Ok(TauChoice {
                tau,
                theta,
                n: *probes.iter().min().unwrap_or(&1),
                g_u,
                contraction,
                margin,
                source: ConstantSource::Measured,
            });
        }
        tau *= 2.0;
    }
    Err(Error::NoFeasibleTau { cap: TAU_CAP })
}

/// Smallest `N >= 1` with `f(n) < 0` for every `n >= N`, given that the
/// derivative `d` is non-increasing (so once `d < 0` and `f < 0`, both stay so).
fn eventual_floor(f: impl Fn(f64) -> f64, d: impl Fn(f64) -> f64, cap: u64) -> Result<u64> {
    let mut last_fail = 0u64;
    for n in 1..=cap {
        let x = n as f64;
        let v = f(x);
        if v >= 0.0 || !v.is_finite() {
            last_fail = n;
        } else if d(x) < 0.0 {
            return Ok(last_fail + 1);
        }
    }
    Err(Error::ParameterInfeasible(format!("floor inequality still fails at n = {cap}")))
}

/// Floors `N_p`: strictly increasing, at least `n_min`, and
/// `n q^n < min(1/2, r_p)` for every `n >= N_p`.
pub fn natural_floors(contraction: f64, radii: &[f64], n_min: u64) -> Result<Vec<u64>> {
    if !(contraction > 0.0 && contraction < 1.0) {
        return Err(Error::ParameterInfeasible(format!("contraction {contraction} is not in (0, 1)")));
    }
    let lq = contraction.ln();
    let mut out: Vec<u64> = Vec::with_capacity(radii.len());
    for &r in radii {
        let target = r.min(0.5).ln();
        let n = eventual_floor(|x| x.ln() + x * lq - target, |x| 1.0 / x + lq, 100_000_000)?;
        let prev = out.last().map_or(0, |&p| p + 1);
        out.push(n.max(n_min).max(prev));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// blocks

/// `z^v (c_0 + c_1 z + ...)`.
#[derive(Debug, Clone)]
pub struct Window {
    pub v: u64,
    pub coeffs: Vec<XComplex>,
}

impl Window {
    fn nonzero(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.coeffs.len()).filter(|&k| !self.coeffs[k].is_zero())
    }

    pub fn valuation(&self) -> Option<u64> {
        self.nonzero().next().map(|k| self.v + k as u64)
    }

    pub fn degree(&self) -> Option<u64> {
        self.nonzero().last().map(|k| self.v + k as u64)
    }

    pub fn eval(&self, z: &XComplex, bits: usize) -> XComplex {
        self.eval_upto(z, u64::MAX, bits)
    }

    /// Sum of the terms with exponent at most `l`.
    pub fn eval_upto(&self, z: &XComplex, l: u64, bits: usize) -> XComplex {
        if l < self.v {
            return XComplex::zero(bits);
        }
        let upto = ((l - self.v).saturating_add(1)).min(self.coeffs.len() as u64) as usize;
        let q = xprec::horner(&self.coeffs[..upto], z, bits);
        if q.is_zero() {
            return q;
        }
        z.powu(self.v, bits).mul(&q, bits)
    }

    /// Certified upper bound for `ln max_{|z| = radius} |P|`. Samples `Q` at
    /// `M >= 16 (deg Q + 1)` equispaced points; Bernstein's inequality for the
    /// derivative bounds the loss between samples by the factor
    /// `1 / (1 - pi deg Q / M)`.
    pub fn log_norm_circle(&self, radius: f64, bits: usize) -> Option<f64> {
        let m = self.nonzero().last()?;
        let count = (16 * (m + 1)).max(64);
        let c = &self.coeffs[..=m];
        let vals = par::map_range(count, |t| {
            let z = C64::from_polar(radius, std::f64::consts::TAU * t as f64 / count as f64);
            xprec::horner(c, &XComplex::from_c64(z, bits), bits).ln_abs()
        });
        let best = vals.into_iter().fold(f64::NEG_INFINITY, f64::max);
        let loss = -(1.0 - std::f64::consts::PI * m as f64 / count as f64).ln();
        Some(self.v as f64 * radius.ln() + best + loss)
    }
}

#[derive(Serialize, Deserialize)]
struct CoeffEntry {
    index: u64,
    phase: f64,
    log_mag: f64,
    exact: XComplexBits,
}

#[derive(Serialize, Deserialize)]
struct WindowRepr {
    v: u64,
    len: usize,
    records: Vec<CoeffEntry>,
}

impl Serialize for Window {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let records = self
            .nonzero()
            .map(|k| {
                let c = &self.coeffs[k];
                CoeffEntry {
                    index: self.v + k as u64,
                    phase: c.arg(),
                    log_mag: c.ln_abs(),
                    exact: XComplexBits::of(c).expect("finite coefficient"),
                }
            })
            .collect();
        WindowRepr {
            v: self.v,
            len: self.coeffs.len(),
            records,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Window {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = WindowRepr::deserialize(d)?;
        let bits = r
            .records
            .iter()
            .map(|e| e.exact.re.words.len().max(e.exact.im.words.len()) * 64)
            .max()
            .unwrap_or(xprec::MIN_EXTENDED_BITS)
            .max(xprec::MIN_EXTENDED_BITS);
        let mut coeffs = vec![XComplex::zero(bits); r.len];
        for e in r.records {
            let k = e
                .index
                .checked_sub(r.v)
                .filter(|&k| (k as usize) < r.len)
                .ok_or_else(|| D::Error::custom(format!("record index {} outside the window", e.index)))?;
            coeffs[k as usize] = e
                .exact
                .to_xcomplex()
                .unwrap_or_else(|| XComplex::from_log_polar(e.log_mag, e.phase, bits));
        }
        Ok(Window { v: r.v, coeffs })
    }
}

/// How a block was fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockMethod {
    /// Interpolation at every sample of `K`, top-aligned window.
    Interpolation,
    /// Minimax linear program with extended-precision residual refinement.
    Minimax,
}

/// Result of one block fit: the window and `ln ||P - target||_K`.
#[derive(Debug, Clone)]
pub struct BlockFit {
    pub window: Window,
    pub method: BlockMethod,
    pub log_err_k: Option<f64>,
    pub rounds: usize,
}

impl BlockFit {
    pub fn log_norm(&self, radius: f64, bits: usize) -> Option<f64> {
        self.window.log_norm_circle(radius, bits)
    }
}

fn distinct(samples: &[C64]) -> Vec<usize> {
    let mut seen = std::collections::HashSet::new();
    (0..samples.len())
        .filter(|&i| seen.insert((samples[i].re.to_bits(), samples[i].im.to_bits())))
        .collect()
}

fn log_max_abs(v: &[XComplex]) -> Option<f64> {
    let m = v.iter().map(|z| z.ln_abs()).fold(f64::NEG_INFINITY, f64::max);
    m.is_finite().then_some(m)
}

/// Extra working bits for interpolating at the distinct samples of `K`:
/// divided differences of order `k` lose up to `k log2(2 max|z| / min gap)`
/// bits, and the same amount cancels when the result is evaluated on `K`.
pub fn interpolation_bits(k_samples: &[C64]) -> usize {
    let idx = distinct(k_samples);
    let max_abs = k_samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut min_gap = f64::INFINITY;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            min_gap = min_gap.min((k_samples[i] - k_samples[j]).norm());
        }
    }
    let spread = if min_gap.is_finite() { (2.0 * max_abs / min_gap).log2().max(0.0) } else { 0.0 };
    64 + (spread * idx.len() as f64).ceil() as usize
}

/// Newton interpolation of `values` at `nodes`, expanded to ascending
/// monomial coefficients.
fn interpolate(nodes: &[XComplex], values: &[XComplex], bits: usize) -> Vec<XComplex> {
    let k = nodes.len();
    let mut c = values.to_vec();
    for lvl in 1..k {
        for j in (lvl..k).rev() {
            let num = c[j].sub(&c[j - 1], bits);
            let den = nodes[j].sub(&nodes[j - lvl], bits);
            c[j] = num.div(&den, bits);
        }
    }
    let mut poly = vec![c[k - 1].clone()];
    for j in (0..k - 1).rev() {
        // poly <- poly * (z - x_j) + c_j
        let mut next = vec![XComplex::zero(bits); poly.len() + 1];
        for (i, a) in poly.iter().enumerate() {
            next[i + 1] = next[i + 1].add(a, bits);
            next[i] = next[i].sub(&a.mul(&nodes[j], bits), bits);
        }
        next[0] = next[0].add(&c[j], bits);
        poly = next;
    }
    poly
}

/// Fits `P` with `v_min <= val P` and `deg P <= s` to `target` on the samples
/// of `K` while keeping `P` small on `|z| <= l_radius`.
///
/// When `K` has no more distinct samples than the window has coefficients,
/// `P = z^v Q` interpolates the target at every sample with the window
/// aligned to end at `s`. Otherwise the minimax linear program runs on the
/// window `v_min..=s` over the samples of `K` and of the circle, followed by
/// refinement rounds on the extended-precision residual until the `K` error
/// drops below `exp(goal)` or stops shrinking.
pub fn fit_block(
    k_samples: &[C64],
    target: &[XComplex],
    v_min: u64,
    s: u64,
    l_radius: f64,
    bits: usize,
    goal: Option<f64>,
) -> Result<BlockFit> {
    if v_min > s {
        return Err(Error::PreconditionViolated(format!("empty window {v_min}..={s}")));
    }
    if k_samples.len() != target.len() || k_samples.is_empty() {
        return Err(Error::InvalidArgument("target values must match the K samples".into()));
    }
    let idx = distinct(k_samples);
    if k_samples.iter().any(|z| z.norm() == 0.0) && v_min > 0 {
        return Err(Error::PreconditionViolated("K contains the origin".into()));
    }
    let xk: Vec<XComplex> = k_samples.iter().map(|&z| XComplex::from_c64(z, bits)).collect();
    let width = s - v_min + 1;
    if idx.len() as u64 <= width {
        let v = s + 1 - idx.len() as u64;
        let wbits = (bits + interpolation_bits(k_samples)).div_ceil(64) * 64;
        let nodes: Vec<XComplex> = idx.iter().map(|&i| XComplex::from_c64(k_samples[i], wbits)).collect();
        let values: Vec<XComplex> = idx
            .iter()
            .zip(&nodes)
            .map(|(&i, x)| target[i].div(&x.powu(v, wbits), wbits))
            .collect();
        let coeffs = interpolate(&nodes, &values, wbits);
        let window = Window { v, coeffs };
        let resid: Vec<XComplex> = k_samples
            .iter()
            .zip(target)
            .map(|(&z, t)| window.eval(&XComplex::from_c64(z, wbits), wbits).sub(t, wbits))
            .collect();
        return Ok(BlockFit {
            window,
            method: BlockMethod::Interpolation,
            log_err_k: log_max_abs(&resid),
            rounds: 1,
        });
    }
    fit_minimax(k_samples, &xk, target, v_min, s, l_radius, bits, goal)
}

#[allow(clippy::too_many_arguments)]
fn fit_minimax(
    k_samples: &[C64],
    xk: &[XComplex],
    target: &[XComplex],
    v: u64,
    s: u64,
    l_radius: f64,
    bits: usize,
    goal: Option<f64>,
) -> Result<BlockFit> {
    let width = s - v + 1;
    if width > MAX_LP_WINDOW {
        return Err(Error::IllConditioned(format!(
            "window of {width} coefficients exceeds the LP limit {MAX_LP_WINDOW}"
        )));
    }
    let m_k = k_samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let range = v as f64 * (m_k / l_radius).ln().abs();
    if range > 69.0 {
        return Err(Error::IllConditioned(format!(
            "basis dynamic range e^{range:.0} between K and the disc exceeds double precision"
        )));
    }
    let circle_count = (4 * width as usize).max(64);
    let circle: Vec<C64> = (0..circle_count)
        .map(|t| C64::from_polar(l_radius, std::f64::consts::TAU * t as f64 / circle_count as f64))
        .collect();
    let xc: Vec<XComplex> = circle.iter().map(|&z| XComplex::from_c64(z, bits)).collect();
    let pts: Vec<C64> = k_samples.iter().chain(&circle).copied().collect();
    let opts = FitOptions {
        skip_monomial: true,
        ..FitOptions::default()
    };
    let mut window = Window {
        v,
        coeffs: vec![XComplex::zero(bits); width as usize],
    };
    let mut best = f64::INFINITY;
    let mut rounds = 0;
    let mut log_err_k = None;
    for _ in 0..MAX_REFINEMENTS {
        let rk: Vec<XComplex> = xk.iter().zip(target).map(|(z, t)| t.sub(&window.eval(z, bits), bits)).collect();
        let rl: Vec<XComplex> = xc.iter().map(|z| window.eval(z, bits).neg()).collect();
        log_err_k = log_max_abs(&rk);
        let scale = log_err_k.unwrap_or(f64::NEG_INFINITY).max(log_max_abs(&rl).unwrap_or(f64::NEG_INFINITY));
        if !scale.is_finite() || goal.is_some_and(|g| log_err_k.map_or(true, |e| e <= g)) || scale > best + (0.5f64).ln() {
            break;
        }
        best = scale;
        let e2 = (scale / std::f64::consts::LN_2).floor() as i64;
        let values: Vec<C64> = rk
            .iter()
            .chain(&rl)
            .map(|r| {
                let mut r = r.clone();
                r.mul_pow2(-e2);
                r.to_c64()
            })
            .collect();
        let rep = approx::minimax_window(&pts, &values, &[], v as usize, s as usize, &opts)?;
        let form = rep.form.ok_or_else(|| Error::Lp("minimax fit returned no window form".into()))?;
        let radius = m_k.max(l_radius);
        let (_, coeffs) = form.to_coeffs(radius);
        for (k, c) in coeffs.into_iter().skip(v as usize).enumerate() {
            let mut c = c;
            c.mul_pow2(e2);
            window.coeffs[k] = window.coeffs[k].add(&c, bits);
        }
        rounds += 1;
    }
    Ok(BlockFit {
        window,
        method: BlockMethod::Minimax,
        log_err_k,
        rounds,
    })
}

// ---------------------------------------------------------------------------
// state

/// Roles of a family set in a construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetAssignment {
    /// Position of the set in `family.sets`.
    pub set: usize,
    pub p: usize,
    pub i: usize,
    pub compact: usize,
    pub target: usize,
}

/// One term `P_n` of the series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Block {
    pub n: usize,
    pub s: u64,
    pub set: usize,
    pub compact: usize,
    pub target: usize,
    /// `None` for a zero block.
    pub window: Option<Window>,
    pub method: Option<BlockMethod>,
    /// `ln ||P_n - (phi - sum_{j<n} P_j)||_K`.
    pub log_err_k: Option<f64>,
    /// Certified `ln ||P_n||` on the closed disc of radius `l_radius`.
    pub log_norm_l: Option<f64>,
    /// Certified `ln ||P_n||_{D(0,1)}`.
    pub log_norm_unit: Option<f64>,
    /// Certified `ln ||P_n||_{D(0,1/2)}`.
    pub log_norm_half: Option<f64>,
    pub log_bound: Option<f64>,
    pub l_radius: f64,
}

impl Block {
    pub fn is_zero(&self) -> bool {
        self.window.is_none()
    }
}

/// Natural-density or logarithmic-density construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Constants {
    Natural { choice: TauChoice, kappa: f64 },
    Log { compacts: Vec<LogConstants>, exhaustion: Exhaustion },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtsState {
    pub constants: Constants,
    pub assignment: Vec<SetAssignment>,
    pub horizon: u64,
    pub bits: usize,
    pub config_hash: String,
    pub blocks: Vec<Block>,
}

impl UtsState {
    pub fn nonzero_blocks(&self) -> impl Iterator<Item = &Block> {
        self.blocks.iter().filter(|b| !b.is_zero())
    }

    /// Sparse coefficient map `k -> a_k` of `f` up to the horizon.
    pub fn coefficients(&self) -> Vec<(u64, XComplex)> {
        let mut out = Vec::new();
        for b in self.nonzero_blocks() {
            let w = b.window.as_ref().expect("nonzero block");
            for (k, c) in w.coeffs.iter().enumerate() {
                if !c.is_zero() {
                    out.push((w.v + k as u64, c.clone()));
                }
            }
        }
        out
    }

    /// `S_l(f)(z)` in extended precision.
    pub fn partial_sum(&self, l: u64, z: &XComplex) -> XComplex {
        let mut acc = XComplex::zero(self.bits);
        for b in self.nonzero_blocks() {
            let w = b.window.as_ref().expect("nonzero block");
            acc = acc.add(&w.eval_upto(z, l, self.bits), self.bits);
        }
        acc
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<UtsState> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<UtsState> {
        UtsState::from_json(&std::fs::read_to_string(path)?)
    }
}

/// `sup_K |S_l(f) - phi|` over the samples of `K`, in extended precision.
pub fn partial_sum_error(state: &UtsState, l: u64, k: &CompactSetSample, phi: &Polynomial) -> f64 {
    let bits = state.bits;
    let vals = par::map_slice(&k.all_samples(), |&z| {
        let xz = XComplex::from_c64(z, bits);
        state.partial_sum(l, &xz).sub(&phi.eval_extended(z, bits), bits).ln_abs()
    });
    vals.into_iter().fold(f64::NEG_INFINITY, f64::max).exp()
}

// ---------------------------------------------------------------------------
// construction

/// Per-construction rules: valuation floor, check radius and bound.
trait Rule {
    fn v_min(&self, s: u64) -> Result<u64>;
    fn l_radius(&self, a: &SetAssignment, s: u64, floor: u64) -> f64;
    fn log_bound(&self, first: bool, s: u64, radius: f64) -> f64;
    /// `(G_i, probe samples)` for the norm-transfer check, if any.
    fn bernstein(&self, _compact: usize) -> Option<f64> {
        None
    }
}

struct NaturalRule {
    tau: f64,
    theta: f64,
    contraction: f64,
}

impl Rule for NaturalRule {
    fn v_min(&self, s: u64) -> Result<u64> {
        Ok(approx::window_start(s as usize, self.tau)? as u64 + 1)
    }

    fn l_radius(&self, _: &SetAssignment, _: u64, _: u64) -> f64 {
        1.0
    }

    fn log_bound(&self, first: bool, s: u64, _: f64) -> f64 {
        let q = if first { self.theta } else { self.contraction };
        (s as f64).ln() + s as f64 * q.ln()
    }
}

struct LogRule<'a> {
    constants: &'a [LogConstants],
    exhaustion: Exhaustion,
}

/// Smallest `v` with `v^2 >= s`.
pub fn ceil_sqrt(s: u64) -> u64 {
    let mut v = (s as f64).sqrt() as u64;
    while v.saturating_mul(v) < s {
        v += 1;
    }
    while v > 0 && (v - 1).saturating_mul(v - 1) >= s {
        v -= 1;
    }
    v
}

impl Rule for LogRule<'_> {
    fn v_min(&self, s: u64) -> Result<u64> {
        Ok(ceil_sqrt(s))
    }

    fn l_radius(&self, a: &SetAssignment, s: u64, floor: u64) -> f64 {
        self.exhaustion.radius(a.i, s.saturating_sub(floor))
    }

    fn log_bound(&self, _: bool, s: u64, radius: f64) -> f64 {
        radius.ln() - 2.0 * (s as f64).ln()
    }

    fn bernstein(&self, compact: usize) -> Option<f64> {
        Some(self.constants[compact].g)
    }
}

fn violation(block: usize, which: char, detail: String) -> Error {
    Error::ConstraintViolation { block, which, detail }
}

/// Enumeration `s_0 < s_1 < ...` of the union of the family below the
/// horizon, with the owning set of each element.
pub fn union_enumeration(family: &FrequencyFamily, horizon: u64) -> Result<Vec<(u64, usize)>> {
    let mut all: Vec<(u64, usize)> = Vec::new();
    for (j, set) in family.sets.iter().enumerate() {
        for l in set.index_set(horizon).elements(horizon) {
            all.push((l, j));
        }
    }
    all.sort_unstable();
    if let Some(w) = all.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::PreconditionViolated(format!("sets {} and {} share {}", w[0].1, w[1].1, w[0].0)));
    }
    Ok(all)
}

struct Probe {
    points: Vec<XComplex>,
    sum: Vec<XComplex>,
}

impl Probe {
    fn new(samples: &[C64], bits: usize) -> Probe {
        Probe {
            points: samples.iter().map(|&z| XComplex::from_c64(z, bits)).collect(),
            sum: vec![XComplex::zero(bits); samples.len()],
        }
    }

    fn add(&mut self, w: &Window, bits: usize) {
        let vals = par::map_slice(&self.points, |z| w.eval(z, bits));
        for (s, v) in self.sum.iter_mut().zip(vals) {
            *s = s.add(&v, bits);
        }
    }
}

struct Job<'a> {
    compacts: &'a [CompactSetSample],
    /// Samples of `U_i` for the norm-transfer check (log constructions).
    u_sets: Option<&'a [Vec<C64>]>,
    targets: &'a TargetEnumeration,
    family: &'a FrequencyFamily,
    assignment: Vec<SetAssignment>,
    horizon: u64,
}

fn run(job: &Job<'_>, rule: &dyn Rule, bits: usize) -> Result<Vec<Block>> {
    let enumeration = union_enumeration(job.family, job.horizon)?;
    let ks: Vec<Vec<C64>> = job.compacts.iter().map(|k| k.all_samples()).collect();
    let mut probes: Vec<Probe> = ks.iter().map(|s| Probe::new(s, bits)).collect();
    let mut u_probes: Vec<Probe> = job
        .u_sets
        .map(|u| u.iter().map(|s| Probe::new(s, bits)).collect())
        .unwrap_or_default();
    let mut blocks: Vec<Block> = Vec::with_capacity(enumeration.len());
    let mut prev_set: Option<usize> = None;
    let mut last_degree: Option<u64> = None;
    let mut half_norms: Vec<f64> = Vec::new();
    for (n, &(s, set)) in enumeration.iter().enumerate() {
        let a = job.assignment[set];
        if prev_set == Some(set) {
            blocks.push(Block {
                n,
                s,
                set,
                compact: a.compact,
                target: a.target,
                window: None,
                method: None,
                log_err_k: None,
                log_norm_l: None,
                log_norm_unit: None,
                log_norm_half: None,
                log_bound: None,
                l_radius: 1.0,
            });
            continue;
        }
        prev_set = Some(set);
        let first = last_degree.is_none() && blocks.iter().all(|b| b.is_zero());
        let phi = &job.targets.targets[a.target];
        let probe = &probes[a.compact];
        let residual: Vec<XComplex> = probe
            .points
            .iter()
            .zip(&probe.sum)
            .map(|(z, acc)| phi.eval_extended(z, bits).sub(acc, bits))
            .collect();

        if let (Some(g), Some(u)) = (rule.bernstein(a.compact), u_probes.get(a.compact)) {
            // ||sum_{j<n} P_j||_U <= ||sum_{j<n} P_j||_{D(0,1/2)} G^{deg}, with deg^2 <= s
            if let Some(d) = last_degree {
                if d.saturating_mul(d) > s {
                    return Err(violation(n, 'B', format!("previous degree {d} exceeds sqrt({s})")));
                }
                let lhs = log_max_abs(&u.sum).unwrap_or(f64::NEG_INFINITY);
                let half = half_norms.iter().map(|&x| (x - half_norms[0]).exp()).sum::<f64>().ln() + half_norms[0];
                let rhs = half + d as f64 * g.ln();
                if lhs > rhs + 1e-9 * rhs.abs().max(1.0) {
                    return Err(violation(n, 'B', format!("ln ||sum P||_U = {lhs:.6} exceeds ln bound {rhs:.6}")));
                }
            }
        }

        let v_min = rule.v_min(s)?;
        let floor = job.family.sets[set].floor.clone();
        let floor = num_traits::ToPrimitive::to_u64(&floor).unwrap_or(u64::MAX);
        let radius = rule.l_radius(&a, s, floor);
        let log_bound = rule.log_bound(first, s, phi.radius);
        let fit = fit_block(&ks[a.compact], &residual, v_min, s, radius, bits, Some(log_bound - 2f64.ln()))?;
        let w = &fit.window;
        let (Some(val), Some(deg)) = (w.valuation(), w.degree()) else {
            // the residual vanishes on K, so P_n = 0 meets every bound
            blocks.push(Block {
                n,
                s,
                set,
                compact: a.compact,
                target: a.target,
                window: None,
                method: Some(fit.method),
                log_err_k: fit.log_err_k,
                log_norm_l: None,
                log_norm_unit: None,
                log_norm_half: None,
                log_bound: Some(log_bound),
                l_radius: radius,
            });
            continue;
        };
        if val < v_min || deg > s {
            return Err(violation(n, 'a', format!("valuation {val} < {v_min} or degree {deg} > {s}")));
        }
        if let Some(d) = last_degree {
            if val <= d {
                return Err(violation(n, 'a', format!("window starts at {val}, previous block reaches {d}")));
            }
        }
        let log_norm_l = w.log_norm_circle(radius, bits);
        let log_err_k = fit.log_err_k;
        if let Some(nl) = log_norm_l {
            if nl > log_bound {
                return Err(violation(n, 'b', format!("ln ||P_n||_L = {nl:.4} exceeds ln bound {log_bound:.4}")));
            }
        }
        if let Some(ek) = log_err_k {
            if ek > log_bound {
                return Err(violation(n, 'c', format!("ln K error = {ek:.4} exceeds ln bound {log_bound:.4}")));
            }
        }
        let log_norm_half = w.log_norm_circle(0.5, bits);
        half_norms.push(log_norm_half.unwrap_or(f64::NEG_INFINITY));
        for p in probes.iter_mut() {
            p.add(w, bits);
        }
        for p in u_probes.iter_mut() {
            p.add(w, bits);
        }
        last_degree = Some(deg);
        blocks.push(Block {
            n,
            s,
            set,
            compact: a.compact,
            target: a.target,
            log_norm_unit: if radius == 1.0 { log_norm_l } else { w.log_norm_circle(1.0, bits) },
            window: Some(fit.window),
            method: Some(fit.method),
            log_err_k,
            log_norm_l,
            log_norm_half,
            log_bound: Some(log_bound),
            l_radius: radius,
        });
    }
    Ok(blocks)
}

/// Working precision covering the smallest bound met below the horizon and
/// the interpolation loss on the widest compact, with 128 bits to spare.
fn bits_for_bounds(
    rule: &dyn Rule,
    compacts: &[CompactSetSample],
    family: &FrequencyFamily,
    targets: &TargetEnumeration,
    horizon: u64,
) -> Result<usize> {
    let mut worst = 0.0f64;
    let r = targets.targets.iter().map(|t| t.radius).fold(1.0, f64::min);
    for (n, (s, _)) in union_enumeration(family, horizon)?.into_iter().enumerate() {
        worst = worst.min(rule.log_bound(n == 0, s, r));
    }
    let interp = compacts.iter().map(|k| interpolation_bits(&k.all_samples())).max().unwrap_or(0);
    Ok(xprec::bits_for(-worst / std::f64::consts::LN_2, 128) + interp.div_ceil(64) * 64)
}

fn config_digest(
    constants: &Constants,
    assignment: &[SetAssignment],
    targets: &TargetEnumeration,
    family: &FrequencyFamily,
    compacts: &[CompactSetSample],
    horizon: u64,
) -> Result<String> {
    let samples: Vec<Vec<[f64; 2]>> = compacts
        .iter()
        .map(|k| k.all_samples().iter().map(|z| [z.re, z.im]).collect())
        .collect();
    let v = serde_json::json!({
        "constants": constants,
        "assignment": assignment,
        "targets": targets,
        "family": family,
        "compacts": samples,
        "horizon": horizon,
    });
    Ok(crate::config_hash(&v))
}

/// Builds `f = sum P_n` for one compact `K` outside the closed unit disc.
/// Identical to [`build_multi_futs`] with a single compact.
pub fn build_futs(
    k: &CompactSetSample,
    u_samples: &[C64],
    targets: &TargetEnumeration,
    family: &FrequencyFamily,
    choice: &TauChoice,
    horizon: u64,
) -> Result<UtsState> {
    build_multi_futs(std::slice::from_ref(k), u_samples, targets, family, choice, horizon)
}

/// Natural-density construction for several compacts sharing one `tau`.
/// Set `p` of the family serves compact `p mod C` and target `p div C`,
/// which interleaves the compacts along the enumeration.
pub fn build_multi_futs(
    compacts: &[CompactSetSample],
    u_samples: &[C64],
    targets: &TargetEnumeration,
    family: &FrequencyFamily,
    choice: &TauChoice,
    horizon: u64,
) -> Result<UtsState> {
    if compacts.is_empty() {
        return Err(Error::InvalidArgument("need at least one compact".into()));
    }
    let FamilyParams::Natural { kappa, .. } = family.params else {
        return Err(Error::PreconditionViolated("natural construction needs a ratio-separated family".into()));
    };
    if kappa < choice.tau + 1.0 - 1e-12 {
        return Err(Error::PreconditionViolated(format!(
            "family separation kappa = {kappa} is below tau + 1 = {}",
            choice.tau + 1.0
        )));
    }
    if !(choice.contraction < 1.0 && choice.theta < 1.0) {
        return Err(Error::PreconditionViolated("need G_U^{1/tau} theta < 1".into()));
    }
    targets.check_norms(u_samples)?;
    for k in compacts {
        if k.min_radius <= 1.0 {
            return Err(Error::PreconditionViolated("every compact must lie outside the closed unit disc".into()));
        }
    }
    let c = compacts.len();
    let assignment: Vec<SetAssignment> = family
        .sets
        .iter()
        .enumerate()
        .map(|(set, fs)| SetAssignment {
            set,
            p: fs.p,
            i: fs.i,
            compact: fs.p % c,
            target: fs.p / c,
        })
        .collect();
    if let Some(a) = assignment.iter().find(|a| a.target >= targets.targets.len()) {
        return Err(Error::InvalidArgument(format!("set {} needs target {} but only {} exist", a.set, a.target, targets.targets.len())));
    }
    let rule = NaturalRule {
        tau: choice.tau,
        theta: choice.theta,
        contraction: choice.contraction,
    };
    let bits = bits_for_bounds(&rule, compacts, family, targets, horizon)?;
    let job = Job {
        compacts,
        u_sets: None,
        targets,
        family,
        assignment,
        horizon,
    };
    let blocks = run(&job, &rule, bits)?;
    let constants = Constants::Natural {
        choice: choice.clone(),
        kappa,
    };
    let config_hash = config_digest(&constants, &job.assignment, targets, family, compacts, horizon)?;
    Ok(UtsState {
        constants,
        assignment: job.assignment,
        horizon,
        bits,
        config_hash,
        blocks,
    })
}

// ---------------------------------------------------------------------------
// logarithmic density

/// Constants of one compact of the logarithmic construction: measured
/// `theta_i` for windows `ceil(sqrt n)..n` against the closed unit disc,
/// the first admissible degree `N_i`, and `G_i = max over U_i of 2|z|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogConstants {
    pub theta: f64,
    pub n0: u64,
    pub g: f64,
}

/// Exhaustion `L^i_n = closed D(0, 1 - 1/(i + 2 + floor(n / repeat)))`: each
/// disc is repeated `repeat` times and `L^i_0 = closed D(0, 1 - 1/(i+2))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exhaustion {
    pub repeat: u64,
}

impl Exhaustion {
    pub fn radius(&self, i: usize, n: u64) -> f64 {
        1.0 - 1.0 / (i as f64 + 2.0 + (n / self.repeat.max(1)) as f64)
    }
}

/// Measures the constants of one compact. `U` must avoid `D(0, 2/3)`.
pub fn calibrate_log(k: &CompactSetSample, u_samples: &[C64], probes: &[u64]) -> Result<LogConstants> {
    if probes.is_empty() {
        return Err(Error::InvalidArgument("calibration needs probe degrees".into()));
    }
    if u_samples.iter().any(|z| z.norm() < 2.0 / 3.0) {
        return Err(Error::PreconditionViolated("U meets D(0, 2/3)".into()));
    }
    let theta = measured_theta(k, u_samples, probes, 1.0, &|n| Ok(ceil_sqrt(n)))?;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::ParameterInfeasible(format!("measured theta {theta} is not in (0, 1)")));
    }
    Ok(LogConstants {
        theta,
        n0: *probes.iter().min().unwrap_or(&1),
        g: u_samples.iter().map(|z| 2.0 * z.norm()).fold(1.0, f64::max),
    })
}

/// Floors `N_p(i)`, increasing in `p`, with `N_p(i) >= ||phi_p||_{U_i}`,
/// `N_p(i) >= N_i` and `2 n G_i^{sqrt n} theta_i^n <= r_p / n^2` for every
/// `n >= N_p(i)`. Because `theta_i` is measured against the closed unit disc,
/// which contains every `L^i_n`, the same inequality covers all exhaustion
/// indices. Returned as `[i][p]`.
pub fn log_floors(constants: &[LogConstants], targets: &TargetEnumeration, u_sets: &[Vec<C64>], count_p: usize) -> Result<Vec<Vec<u64>>> {
    if u_sets.len() < constants.len() || targets.targets.len() < count_p {
        return Err(Error::InvalidArgument("need U samples per compact and count_p targets".into()));
    }
    let mut out = Vec::with_capacity(constants.len());
    for (c, u) in constants.iter().zip(u_sets) {
        let (lt, lg) = (c.theta.ln(), c.g.ln());
        let mut row: Vec<u64> = Vec::with_capacity(count_p);
        for t in &targets.targets[..count_p] {
            let lr = t.radius.ln();
            let f = |x: f64| 2f64.ln() + 3.0 * x.ln() + x.sqrt() * lg + x * lt - lr;
            let d = |x: f64| 3.0 / x + lg / (2.0 * x.sqrt()) + lt;
            let n = eventual_floor(f, d, 100_000_000)?;
            let norm = t.norm_on(u).ceil() as u64;
            let prev = row.last().map_or(0, |&p| p + 1);
            row.push(n.max(norm).max(c.n0).max(prev));
        }
        out.push(row);
    }
    Ok(out)
}

/// Logarithmic-density construction over the compacts `K_i`. Set `(p, i)`
/// of the family serves compact `i` and target `p`. Blocks have valuation
/// at least `ceil(sqrt s)`, are bounded by `r_p / s^2` on `L^i_{s - N_p(i)}`
/// and on `K_i`, and the norm transfer from `D(0,1/2)` to `U_i` is checked
/// before every nonzero block.
pub fn build_log_futs(
    compacts: &[CompactSetSample],
    u_sets: &[Vec<C64>],
    constants: &[LogConstants],
    exhaustion: Exhaustion,
    targets: &TargetEnumeration,
    family: &FrequencyFamily,
    horizon: u64,
) -> Result<UtsState> {
    let FamilyParams::Log { .. } = family.params else {
        return Err(Error::PreconditionViolated("log construction needs a quadratically separated family".into()));
    };
    if compacts.len() != u_sets.len() || compacts.len() != constants.len() {
        return Err(Error::InvalidArgument("compacts, U samples and constants must align".into()));
    }
    for (i, k) in compacts.iter().enumerate() {
        if k.min_radius < 1.0 {
            return Err(Error::PreconditionViolated(format!("compact {i} meets the open unit disc")));
        }
        if u_sets[i].iter().any(|z| z.norm() < 2.0 / 3.0) {
            return Err(Error::PreconditionViolated(format!("U_{i} meets D(0, 2/3)")));
        }
    }
    let assignment: Vec<SetAssignment> = family
        .sets
        .iter()
        .enumerate()
        .map(|(set, fs)| SetAssignment {
            set,
            p: fs.p,
            i: fs.i,
            compact: fs.i,
            target: fs.p,
        })
        .collect();
    if let Some(a) = assignment.iter().find(|a| a.compact >= compacts.len() || a.target >= targets.targets.len()) {
        return Err(Error::InvalidArgument(format!("set {} refers to a missing compact or target", a.set)));
    }
    let rule = LogRule { constants, exhaustion };
    let bits = bits_for_bounds(&rule, compacts, family, targets, horizon)?;
    let job = Job {
        compacts,
        u_sets: Some(u_sets),
        targets,
        family,
        assignment,
        horizon,
    };
    let blocks = run(&job, &rule, bits)?;
    let constants = Constants::Log {
        compacts: constants.to_vec(),
        exhaustion,
    };
    let config_hash = config_digest(&constants, &job.assignment, targets, family, compacts, horizon)?;
    Ok(UtsState {
        constants,
        assignment: job.assignment,
        horizon,
        bits,
        config_hash,
        blocks,
    })
}

// ---------------------------------------------------------------------------
// verification

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetCheck {
    pub set: usize,
    pub p: usize,
    pub i: usize,
    pub compact: usize,
    pub target: usize,
    /// Elements of the set up to the horizon.
    pub elements: usize,
    pub hits: usize,
    pub misses: usize,
    pub worst_error: f64,
    pub worst_at: Option<u64>,
    /// Lower density estimate of the hit set (natural or logarithmic).
    pub density_estimate: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub horizon: u64,
    pub targets: Vec<TargetCheck>,
    /// Sum of the certified norms `||P_n||` on the closed unit disc.
    pub tail_sum: f64,
    /// Certified `||P_n||` on the disc of each nonzero block, in order.
    pub increments: Vec<f64>,
    /// Largest increment after the second nonzero block (zero if none).
    pub late_increment: f64,
    pub violations: Vec<String>,
}

impl VerifyReport {
    /// No misses and every set represented below the horizon.
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `||S_l(f) - phi_p||_K < r_p` for every `l` of every set up to the
/// horizon, caching partial sums by the set of coefficients they include.
/// A set with no element below the horizon is reported as a violation.
pub fn verify_futs(
    state: &UtsState,
    compacts: &[CompactSetSample],
    targets: &TargetEnumeration,
    family: &FrequencyFamily,
    horizon: u64,
) -> Result<VerifyReport> {
    if horizon > state.horizon {
        return Err(Error::PreconditionViolated(format!(
            "verification horizon {horizon} exceeds the construction horizon {}",
            state.horizon
        )));
    }
    let weight = match family.params {
        FamilyParams::Natural { .. } => WeightSequence::constant(),
        FamilyParams::Log { .. } => WeightSequence::log(),
    };
    let bits = state.bits;
    let windows: Vec<&Window> = state.nonzero_blocks().map(|b| b.window.as_ref().expect("nonzero")).collect();
    let points: Vec<Vec<XComplex>> = compacts
        .iter()
        .map(|k| k.all_samples().iter().map(|&z| XComplex::from_c64(z, bits)).collect())
        .collect();
    let mut violations = Vec::new();
    let mut checks = Vec::new();
    for a in &state.assignment {
        let set = family
            .sets
            .get(a.set)
            .ok_or_else(|| Error::InvalidArgument(format!("family has no set {}", a.set)))?;
        let phi = targets
            .targets
            .get(a.target)
            .ok_or_else(|| Error::InvalidArgument(format!("no target {}", a.target)))?;
        let pts = points
            .get(a.compact)
            .ok_or_else(|| Error::InvalidArgument(format!("no compact {}", a.compact)))?;
        let elements = set.index_set(horizon).elements(horizon);
        let key = |l: u64| -> Vec<u64> {
            windows
                .iter()
                .map(|w| if l < w.v { 0 } else { (l - w.v + 1).min(w.coeffs.len() as u64) })
                .collect()
        };
        let mut keys: Vec<Vec<u64>> = elements.iter().map(|&l| key(l)).collect();
        keys.sort();
        keys.dedup();
        let errs = par::map_slice(&keys, |kv| {
            pts.iter()
                .map(|z| {
                    let mut acc = XComplex::zero(bits);
                    for (w, &cnt) in windows.iter().zip(kv) {
                        if cnt > 0 {
                            acc = acc.add(&w.eval_upto(z, w.v + cnt - 1, bits), bits);
                        }
                    }
                    acc.sub(&phi.eval_extended(z, bits), bits).ln_abs()
                })
                .fold(f64::NEG_INFINITY, f64::max)
                .exp()
        });
        let cache: HashMap<Vec<u64>, f64> = keys.into_iter().zip(errs).collect();
        let mut hits = Vec::new();
        let mut misses = 0usize;
        let mut worst = 0.0f64;
        let mut worst_at = None;
        for &l in &elements {
            let e = cache[&key(l)];
            if e > worst || worst_at.is_none() {
                worst = worst.max(e);
                worst_at = Some(l);
            }
            if e < phi.radius {
                hits.push(l);
            } else {
                misses += 1;
                if violations.len() < 64 {
                    violations.push(format!("set {} (target {}): error {e:.3e} >= r = {} at l = {l}", a.set, a.target, phi.radius));
                }
            }
        }
        if elements.is_empty() {
            violations.push(format!("set {} has no element up to {horizon}", a.set));
        }
        let density_estimate = if hits.is_empty() {
            None
        } else {
            lower_density(&IndexSet::explicit(hits.clone()), &weight, horizon).ok().map(|d| d.estimate)
        };
        checks.push(TargetCheck {
            set: a.set,
            p: a.p,
            i: a.i,
            compact: a.compact,
            target: a.target,
            elements: elements.len(),
            hits: hits.len(),
            misses,
            worst_error: worst,
            worst_at,
            density_estimate,
        });
    }
    let increments: Vec<f64> = state
        .nonzero_blocks()
        .map(|b| b.log_norm_unit.map_or(0.0, f64::exp))
        .collect();
    let tail_sum = increments.iter().sum();
    let late_increment = increments.iter().skip(2).copied().fold(0.0, f64::max);
    Ok(VerifyReport {
        horizon,
        targets: checks,
        tail_sum,
        increments,
        late_increment,
        violations,
    })
}

// ---------------------------------------------------------------------------
// exhausting compacts

/// Level and slit index of the `i`-th compact: level `m` holds `2^{m+2}`
/// members, one per slit direction.
pub fn nestoridis_index(i: usize) -> (u32, u64) {
    let mut m = 0u32;
    let mut start = 0usize;
    loop {
        let size = 1usize << (m + 2);
        if i < start + size {
            return (m, (i - start) as u64);
        }
        start += size;
        m += 1;
    }
}

/// Cells of side `h = 2^{-(m+1)}` lying in the annulus `1 + h <= |z| <= 3 + m`,
/// except those within `1.5 h` of the ray at angle `2 pi j / 2^{m+2}`.
/// The removed strip joins the inner hole to the unbounded component, so
/// the union has connected complement; as `m` grows the cells refine, the
/// annulus widens and the slit directions become dense.
pub fn nestoridis_cells(i: usize) -> (f64, Vec<(i64, i64)>) {
    let (m, j) = nestoridis_index(i);
    let h = 0.5f64.powi(m as i32 + 1);
    let outer = 3.0 + m as f64;
    let psi = std::f64::consts::TAU * j as f64 / (1u64 << (m + 2)) as f64;
    let dir = C64::from_polar(1.0, -psi);
    let reach = (outer / h).ceil() as i64 + 1;
    let mut cells = Vec::new();
    for a in -reach..reach {
        for b in -reach..reach {
            let (x0, y0) = (a as f64 * h, b as f64 * h);
            let (x1, y1) = (x0 + h, y0 + h);
            let near = C64::new(0f64.clamp(x0, x1), 0f64.clamp(y0, y1)).norm();
            let far = x0.abs().max(x1.abs()).hypot(y0.abs().max(y1.abs()));
            if near < 1.0 + h || far > outer {
                continue;
            }
            let c = C64::new(x0 + 0.5 * h, y0 + 0.5 * h) * dir;
            let to_ray = if c.re <= 0.0 { c.norm() } else { c.im.abs() };
            // the cell centre is within h / sqrt 2 of every point of the cell
            if to_ray <= 1.5 * h + h * std::f64::consts::FRAC_1_SQRT_2 {
                continue;
            }
            cells.push((a, b));
        }
    }
    (h, cells)
}

/// The `i`-th member of the exhausting sequence of lattice compacts.
pub fn nestoridis_family(i: usize) -> CompactSetSample {
    let (h, cells) = nestoridis_cells(i);
    geometry::lattice_union(h, &cells, 4)
}

/// Whether the complement of a union of closed lattice cells is connected.
/// Two empty cells communicate exactly when they share an edge, so this is
/// 4-connectivity of the empty cells in a padded bounding box.
pub fn lattice_complement_connected(cells: &[(i64, i64)]) -> bool {
    if cells.is_empty() {
        return true;
    }
    let (mut a0, mut a1, mut b0, mut b1) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
    for &(a, b) in cells {
        a0 = a0.min(a - 1);
        a1 = a1.max(a + 1);
        b0 = b0.min(b - 1);
        b1 = b1.max(b + 1);
    }
    let nx = (a1 - a0 + 1) as usize;
    let ny = (b1 - b0 + 1) as usize;
    let mut blocked = vec![false; nx * ny];
    for &(a, b) in cells {
        blocked[(b - b0) as usize * nx + (a - a0) as usize] = true;
    }
    let mut seen = vec![false; nx * ny];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(idx) = stack.pop() {
        let (i, j) = (idx % nx, idx / nx);
        let mut next = Vec::with_capacity(4);
        if i > 0 {
            next.push(idx - 1);
        }
        if i + 1 < nx {
            next.push(idx + 1);
        }
        if j > 0 {
            next.push(idx - nx);
        }
        if j + 1 < ny {
            next.push(idx + nx);
        }
        for n in next {
            if !blocked[n] && !seen[n] {
                seen[n] = true;
                stack.push(n);
            }
        }
    }
    blocked.iter().zip(&seen).all(|(&b, &s)| b || s)
}

/// Every sample of `probe` lies in `k`.
pub fn embeds_in(k: &CompactSetSample, probe: &CompactSetSample) -> bool {
    probe.all_samples().iter().all(|&z| k.dist(z) <= 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_sqrt_is_exact() {
        for s in [0u64, 1, 2, 3, 4, 15, 16, 17, 99, 100, 101, (1 << 40) + 1] {
            let v = ceil_sqrt(s);
            assert!(v * v >= s);
            assert!(v == 0 || (v - 1) * (v - 1) < s, "s = {s}");
        }
    }

    #[test]
    fn nestoridis_levels() {
        assert_eq!(nestoridis_index(0), (0, 0));
        assert_eq!(nestoridis_index(3), (0, 3));
        assert_eq!(nestoridis_index(4), (1, 0));
        assert_eq!(nestoridis_index(11), (1, 7));
        assert_eq!(nestoridis_index(12), (2, 0));
    }

    #[test]
    fn floors_satisfy_their_inequality() {
        let q: f64 = 0.7;
        let f = natural_floors(q, &[0.5, 0.25, 0.125], 3).unwrap();
        assert!(f.windows(2).all(|w| w[0] < w[1]));
        for (p, &n) in f.iter().enumerate() {
            let r = target_radius(p).min(0.5);
            for k in n..n + 2000 {
                assert!((k as f64) * q.powi(k as i32) < r);
            }
            if n > 3 && (p == 0 || n > f[p - 1] + 1) {
                let k = n - 1;
                assert!((k as f64) * q.powi(k as i32) >= r);
            }
        }
    }

    #[test]
    fn interpolation_hits_the_values() {
        let bits = 256;
        let xs = [C64::new(3.0, 0.0), C64::new(2.9, 0.4), C64::new(3.1, -0.3)];
        let nodes: Vec<XComplex> = xs.iter().map(|&z| XComplex::from_c64(z, bits)).collect();
        let vals: Vec<XComplex> = [1.0, -2.0, 0.5].iter().map(|&v| XComplex::from_c64(C64::new(v, v), bits)).collect();
        let c = interpolate(&nodes, &vals, bits);
        for (x, y) in nodes.iter().zip(&vals) {
            let got = xprec::horner(&c, x, bits).sub(y, bits);
            assert!(got.ln_abs() < -150.0);
        }
    }
}
