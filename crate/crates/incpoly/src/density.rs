//! Weighted densities of integer sets.
//!
//! A weight `alpha = (alpha_k)_{k >= 1}` is handled through its logarithms
//! `ln alpha_k`, so families such as `exp(k)` never overflow. For a set `E`
//! the density ratio at `n` is
//!
//! ```text
//! r_E(n) = sum_{k <= n, k in E} alpha_k / phi_alpha(n),   phi_alpha(n) = sum_{k <= n} alpha_k
//! ```
//!
//! and the lower/upper densities are estimated by the minimum/maximum of
//! `r_E` over the tail window `[horizon/2, horizon]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// First index used by the `D_s` and `L_l` families.
pub const ITERATED_LOG_K0: u64 = 17;

/// Weight families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum WeightFamily {
    /// `alpha_k = a`.
    #[serde(rename = "constant")]
    Constant {
        #[serde(default = "one")]
        a: f64,
    },
    /// `alpha_k = 1/k`.
    #[serde(rename = "log")]
    Log,
    /// `alpha_k = k^r`, `r > -1`.
    #[serde(rename = "P_r")]
    Power { r: f64 },
    /// `alpha_k = exp(k^eps)`, `0 <= eps <= 1`.
    #[serde(rename = "E_eps")]
    ExpPower { eps: f64 },
    /// `alpha_k = exp(k / log_(s) k)`; `s = None` means `log_(inf) = 1`.
    #[serde(rename = "D_s")]
    SubExp { s: Option<u32> },
    /// `alpha_k = exp(log k * log_(l) k)`, `l >= 1`.
    #[serde(rename = "L_l")]
    LogPower { l: u32 },
    /// Explicit `ln alpha_k` for `k = 1, 2, ...`; zero weight past the end.
    #[serde(rename = "custom")]
    Custom { log_weights: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

fn one_u64() -> u64 {
    1
}

fn iterated_log(x: f64, s: u32) -> f64 {
    (0..s).fold(x, |acc, _| acc.ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSequence {
    #[serde(flatten)]
    pub family: WeightFamily,
    /// Weights vanish below this index.
    pub k0: u64,
}

impl WeightSequence {
    pub fn new(family: WeightFamily) -> Result<Self> {
        let k0 = match &family {
            WeightFamily::Constant { a } if !(*a > 0.0) => {
                return Err(Error::InvalidArgument(format!("constant weight must be positive, got {a}")))
            }
            WeightFamily::Power { r } if !(*r > -1.0) => {
                return Err(Error::InvalidArgument(format!("P_r needs r > -1, got {r}")))
            }
            WeightFamily::ExpPower { eps } if !(0.0..=1.0).contains(eps) => {
                return Err(Error::InvalidArgument(format!("E_eps needs 0 <= eps <= 1, got {eps}")))
            }
            WeightFamily::SubExp { s: Some(s) } if *s > 3 => {
                return Err(Error::InvalidArgument(format!(
                    "D_s with s = {s} needs k0 beyond any practical horizon"
                )))
            }
            WeightFamily::LogPower { l } if *l == 0 || *l > 3 => {
                return Err(Error::InvalidArgument(format!("L_l needs 1 <= l <= 3, got {l}")))
            }
            WeightFamily::SubExp { s: Some(s) } if *s >= 1 => ITERATED_LOG_K0,
            WeightFamily::LogPower { .. } => ITERATED_LOG_K0,
            _ => 1,
        };
        Ok(WeightSequence { family, k0 })
    }

    pub fn constant() -> Self {
        WeightSequence {
            family: WeightFamily::Constant { a: 1.0 },
            k0: 1,
        }
    }

    pub fn log() -> Self {
        WeightSequence {
            family: WeightFamily::Log,
            k0: 1,
        }
    }

    /// `ln alpha_k`, `-inf` where the weight vanishes.
    pub fn log_weight(&self, k: u64) -> f64 {
        if k < self.k0.max(1) {
            return f64::NEG_INFINITY;
        }
        let x = k as f64;
        match &self.family {
            WeightFamily::Constant { a } => a.ln(),
            WeightFamily::Log => -x.ln(),
            WeightFamily::Power { r } => r * x.ln(),
            WeightFamily::ExpPower { eps } => x.powf(*eps),
            WeightFamily::SubExp { s: None } => x,
            WeightFamily::SubExp { s: Some(s) } => x / iterated_log(x, *s),
            WeightFamily::LogPower { l } => x.ln() * iterated_log(x, *l),
            WeightFamily::Custom { log_weights } => log_weights
                .get(k as usize - 1)
                .copied()
                .unwrap_or(f64::NEG_INFINITY),
        }
    }

    pub fn weight_at(&self, k: u64) -> f64 {
        self.log_weight(k).exp()
    }

    /// `ln phi_alpha(n)` for `n = 0..=horizon` (`-inf` while the sum is empty).
    pub fn log_partial_sums(&self, horizon: u64) -> Vec<f64> {
        let mut acc = LogSum::default();
        let mut out = Vec::with_capacity(horizon as usize + 1);
        out.push(f64::NEG_INFINITY);
        for k in 1..=horizon {
            acc.add(self.log_weight(k));
            out.push(acc.ln());
        }
        out
    }

    /// `ln phi_alpha(x)`.
    pub fn log_partial_sum(&self, x: u64) -> f64 {
        let mut acc = LogSum::default();
        for k in 1..=x {
            acc.add(self.log_weight(k));
        }
        acc.ln()
    }
}

/// Compensated sum of `exp(l_i)` kept as `exp(reference) * (sum + comp)`.
#[derive(Debug, Clone, Copy)]
pub struct LogSum {
    reference: f64,
    sum: f64,
    comp: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        LogSum {
            reference: f64::NEG_INFINITY,
            sum: 0.0,
            comp: 0.0,
        }
    }
}

impl LogSum {
    pub fn add(&mut self, l: f64) {
        if l == f64::NEG_INFINITY {
            return;
        }
        if self.sum == 0.0 {
            self.reference = l;
            self.sum = 1.0;
            self.comp = 0.0;
            return;
        }
        if l - self.reference > 300.0 {
            let f = (self.reference - l).exp();
            self.sum *= f;
            self.comp *= f;
            self.reference = l;
        }
        let x = (l - self.reference).exp();
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn ln(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.reference + (self.sum + self.comp).ln()
        }
    }
}

/// Subset of the positive integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum IndexSet {
    /// Strictly increasing list of elements.
    Explicit { elements: Vec<u64> },
    /// Multiples of `step` in disjoint closed intervals `[lo, hi]`, sorted.
    Intervals {
        intervals: Vec<(u64, u64)>,
        #[serde(default = "one_u64")]
        step: u64,
    },
    /// `N cap union_n [a^n, C a^n]` over `n >= 0` of the given parity.
    BlockUnion {
        a: f64,
        #[serde(rename = "C")]
        c: f64,
        #[serde(default)]
        parity: Parity,
    },
    /// `{k : k mod modulus in residues}`.
    Modular { modulus: u64, residues: Vec<u64> },
    /// All positive integers.
    Natural,
    Complement { of: Box<IndexSet> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parity {
    #[default]
    All,
    Even,
    Odd,
}

impl IndexSet {
    pub fn explicit(mut elements: Vec<u64>) -> Self {
        elements.sort_unstable();
        elements.dedup();
        IndexSet::Explicit { elements }
    }

    pub fn evens() -> Self {
        IndexSet::Modular {
            modulus: 2,
            residues: vec![0],
        }
    }

    pub fn complement(&self) -> Self {
        match self {
            IndexSet::Complement { of } => (**of).clone(),
            s => IndexSet::Complement { of: Box::new(s.clone()) },
        }
    }

    /// Union of `[floor(n_k / c), n_k]` over the given `n_k`.
    pub fn shrinking_blocks(n_seq: &[u64], c: f64) -> Result<Self> {
        if !(c > 1.0) {
            return Err(Error::InvalidArgument(format!("block factor must exceed 1, got {c}")));
        }
        let mut iv: Vec<(u64, u64)> = n_seq
            .iter()
            .map(|&n| (((n as f64 / c).floor() as u64).max(1), n))
            .collect();
        iv.sort_unstable();
        let mut merged: Vec<(u64, u64)> = Vec::new();
        for (lo, hi) in iv {
            match merged.last_mut() {
                Some(last) if lo <= last.1 + 1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        Ok(IndexSet::Intervals {
            intervals: merged,
            step: 1,
        })
    }

    /// Blocks `[ceil(a^n), floor(C a^n)]` reaching at most `horizon`.
    fn blocks(a: f64, c: f64, parity: Parity, horizon: u64) -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        let mut n = 0i32;
        loop {
            let base = a.powi(n);
            if base > horizon as f64 {
                break;
            }
            let keep = match parity {
                Parity::All => true,
                Parity::Even => n % 2 == 0,
                Parity::Odd => n % 2 == 1,
            };
            if keep {
                let lo = (base - 1e-9 * base).ceil().max(1.0) as u64;
                let hi = (c * base + 1e-9 * c * base).floor() as u64;
                if hi >= lo {
                    out.push((lo, hi));
                }
            }
            n += 1;
        }
        out
    }

    pub fn contains(&self, k: u64) -> bool {
        match self {
            IndexSet::Explicit { elements } => elements.binary_search(&k).is_ok(),
            IndexSet::Intervals { intervals, step } => {
                k % step == 0 && intervals.iter().any(|&(lo, hi)| lo <= k && k <= hi)
            }
            IndexSet::BlockUnion { a, c, parity } => Self::blocks(*a, *c, *parity, k)
                .iter()
                .any(|&(lo, hi)| lo <= k && k <= hi),
            IndexSet::Modular { modulus, residues } => residues.contains(&(k % modulus)),
            IndexSet::Natural => k >= 1,
            IndexSet::Complement { of } => k >= 1 && !of.contains(k),
        }
    }

    /// Indicator of the set on `0..=horizon` (index `0` is never a member).
    pub fn indicator(&self, horizon: u64) -> Vec<bool> {
        let h = horizon as usize;
        let mut ind = vec![false; h + 1];
        match self {
            IndexSet::Explicit { elements } => {
                for &e in elements.iter().take_while(|&&e| e <= horizon) {
                    ind[e as usize] = true;
                }
            }
            IndexSet::Intervals { intervals, step } => {
                for &(lo, hi) in intervals {
                    let first = lo.max(1).div_ceil(*step) * step;
                    for k in (first..=hi.min(horizon)).step_by(*step as usize) {
                        ind[k as usize] = true;
                    }
                }
            }
            IndexSet::BlockUnion { a, c, parity } => {
                for (lo, hi) in Self::blocks(*a, *c, *parity, horizon) {
                    for k in lo..=hi.min(horizon) {
                        ind[k as usize] = true;
                    }
                }
            }
            IndexSet::Modular { modulus, residues } => {
                for (k, slot) in ind.iter_mut().enumerate().skip(1) {
                    *slot = residues.contains(&(k as u64 % modulus));
                }
            }
            IndexSet::Natural => ind.iter_mut().skip(1).for_each(|x| *x = true),
            IndexSet::Complement { of } => {
                let inner = of.indicator(horizon);
                for k in 1..=h {
                    ind[k] = !inner[k];
                }
            }
        }
        ind
    }

    /// Increasing enumeration of the elements up to `horizon`.
    pub fn elements(&self, horizon: u64) -> Vec<u64> {
        self.indicator(horizon)
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(k, _)| k as u64)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            IndexSet::Explicit { elements } if elements.windows(2).any(|w| w[1] <= w[0]) => {
                Err(Error::InvalidArgument("explicit set must be strictly increasing".into()))
            }
            IndexSet::Intervals { step: 0, .. } => Err(Error::InvalidArgument("interval step must be positive".into())),
            IndexSet::Intervals { intervals, .. } if intervals.iter().any(|&(lo, hi)| lo > hi) => {
                Err(Error::InvalidArgument("interval with lo > hi".into()))
            }
            IndexSet::Intervals { intervals, .. } if intervals.windows(2).any(|w| w[1].0 <= w[0].1) => {
                Err(Error::InvalidArgument("intervals must be sorted and disjoint".into()))
            }
            IndexSet::BlockUnion { a, c, .. } if !(*a > 1.0 && *c >= 1.0) => {
                Err(Error::InvalidArgument(format!("block union needs a > 1, C >= 1 (a = {a}, C = {c})")))
            }
            IndexSet::Modular { modulus, .. } if *modulus == 0 => {
                Err(Error::InvalidArgument("modulus must be positive".into()))
            }
            IndexSet::Complement { of } => of.validate(),
            _ => Ok(()),
        }
    }
}

/// Density ratio evaluated at `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub n: u64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub estimate: f64,
    pub horizon: u64,
    /// Index at which the extremum over the tail window is attained.
    pub attained_at: u64,
    /// `alpha_n / phi_alpha(n)` at the horizon.
    pub last_weight_share: f64,
    /// Ratio at every `n <= horizon` where membership changes, and at the horizon.
    /// The ratio is monotone between consecutive trace points.
    pub trace: Vec<TracePoint>,
}

/// `ln` of `sum_{k <= n, k in E} alpha_k` and `ln phi_alpha(n)` for `n = 0..=horizon`.
fn log_sums(ind: &[bool], alpha: &WeightSequence) -> (Vec<f64>, Vec<f64>) {
    let mut se = LogSum::default();
    let mut sa = LogSum::default();
    let mut le = Vec::with_capacity(ind.len());
    let mut la = Vec::with_capacity(ind.len());
    le.push(f64::NEG_INFINITY);
    la.push(f64::NEG_INFINITY);
    for (k, &member) in ind.iter().enumerate().skip(1) {
        let w = alpha.log_weight(k as u64);
        sa.add(w);
        if member {
            se.add(w);
        }
        le.push(se.ln());
        la.push(sa.ln());
    }
    (le, la)
}

fn ratio(le: f64, la: f64) -> f64 {
    if la == f64::NEG_INFINITY || le == f64::NEG_INFINITY {
        0.0
    } else {
        (le - la).exp().min(1.0)
    }
}

/// Density ratios at every `n` in `0..=horizon` (zero before the first positive weight).
pub fn density_ratios(e: &IndexSet, alpha: &WeightSequence, horizon: u64) -> Vec<f64> {
    let ind = e.indicator(horizon);
    let (le, la) = log_sums(&ind, alpha);
    le.iter().zip(&la).map(|(&a, &b)| ratio(a, b)).collect()
}

const MIN_TAIL_ELEMENTS: usize = 10;

fn tail_extremum(e: &IndexSet, alpha: &WeightSequence, horizon: u64, lower: bool) -> Result<DensityEstimate> {
    e.validate()?;
    let ind = e.indicator(horizon);
    let count = ind.iter().filter(|&&b| b).count();
    if count < MIN_TAIL_ELEMENTS {
        return Err(Error::HorizonTooSmall(format!(
            "set has {count} elements up to {horizon}, need at least {MIN_TAIL_ELEMENTS}"
        )));
    }
    let (le, la) = log_sums(&ind, alpha);
    let h = horizon as usize;
    let start = (h / 2).max(alpha.k0 as usize).max(1);
    if start > h {
        return Err(Error::HorizonTooSmall(format!("horizon {horizon} is below k0 = {}", alpha.k0)));
    }
    let mut best = (start, ratio(le[start], la[start]));
    for n in start..=h {
        let r = ratio(le[n], la[n]);
        if (lower && r < best.1) || (!lower && r > best.1) {
            best = (n, r);
        }
    }
    let mut trace = Vec::new();
    for n in 1..=h {
        if n == h || ind[n] != ind[n + 1] {
            trace.push(TracePoint {
                n: n as u64,
                ratio: ratio(le[n], la[n]),
            });
        }
    }
    let last_weight_share = (alpha.log_weight(horizon) - la[h]).exp();
    Ok(DensityEstimate {
        estimate: best.1,
        horizon,
        attained_at: best.0 as u64,
        last_weight_share,
        trace,
    })
}

/// Lower `alpha`-density estimate: minimum of the density ratio over `[horizon/2, horizon]`.
pub fn lower_density(e: &IndexSet, alpha: &WeightSequence, horizon: u64) -> Result<DensityEstimate> {
    tail_extremum(e, alpha, horizon, true)
}

/// Upper `alpha`-density estimate: maximum of the density ratio over `[horizon/2, horizon]`.
pub fn upper_density(e: &IndexSet, alpha: &WeightSequence, horizon: u64) -> Result<DensityEstimate> {
    tail_extremum(e, alpha, horizon, false)
}

/// Enumeration form `sum_{j <= k} alpha_{n_j} / phi_alpha(n_k)` at every element `n_k <= horizon`.
pub fn enumeration_ratios(e: &IndexSet, alpha: &WeightSequence, horizon: u64) -> Vec<TracePoint> {
    let lphi = alpha.log_partial_sums(horizon);
    let mut acc = LogSum::default();
    e.elements(horizon)
        .into_iter()
        .map(|n| {
            acc.add(alpha.log_weight(n));
            TracePoint {
                n,
                ratio: ratio(acc.ln(), lphi[n as usize]),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Delta2Verdict {
    Bounded { sup_ratio: f64 },
    /// `elasticity` is the slope of `ln ln(phi(2x)/phi(x))` against `ln x` on the upper grid.
    Diverging { elasticity: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Delta2Report {
    pub verdict: Delta2Verdict,
    /// `(x, phi(2x)/phi(x))`, with the ratio as a log value.
    pub log_ratios: Vec<(u64, f64)>,
    pub worst_log_ratio: f64,
}

/// Elasticity above which the doubling ratio is classified as diverging.
pub const DELTA2_ELASTICITY: f64 = 0.1;

/// Evaluates `phi(2x)/phi(x)` over `x_grid`.
pub fn delta2_check(alpha: &WeightSequence, x_grid: &[u64]) -> Result<Delta2Report> {
    let mut grid: Vec<u64> = x_grid.iter().copied().filter(|&x| x >= alpha.k0.max(1)).collect();
    grid.sort_unstable();
    grid.dedup();
    if grid.len() < 2 {
        return Err(Error::InvalidArgument("delta2 grid needs two points at or above k0".into()));
    }
    let xmax = *grid.last().unwrap();
    let lphi = alpha.log_partial_sums(2 * xmax);
    let log_ratios: Vec<(u64, f64)> = grid
        .iter()
        .map(|&x| (x, lphi[2 * x as usize] - lphi[x as usize]))
        .collect();
    let worst = log_ratios.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let upper = &log_ratios[log_ratios.len() / 2..];
    let (a, b) = (upper.first().unwrap(), upper.last().unwrap());
    let elasticity = if b.0 > a.0 && a.1 > 0.0 && b.1 > 0.0 {
        (b.1.ln() - a.1.ln()) / ((b.0 as f64).ln() - (a.0 as f64).ln())
    } else {
        0.0
    };
    let verdict = if elasticity > DELTA2_ELASTICITY {
        Delta2Verdict::Diverging { elasticity }
    } else {
        Delta2Verdict::Bounded { sup_ratio: worst.exp() }
    };
    Ok(Delta2Report {
        verdict,
        log_ratios,
        worst_log_ratio: worst,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibleReport {
    pub admissible: bool,
    pub divergent_sum: bool,
    pub vanishing_share: bool,
    /// Geometric mean ratio of successive dyadic increments of `phi`.
    pub increment_ratio: f64,
    /// `alpha_n / phi(n)` at `horizon/2` and `horizon`.
    pub share_half: f64,
    pub share_end: f64,
}

/// Checks `sum alpha_k = inf` and `alpha_n / phi(n) -> 0` on `1..=horizon`.
///
/// The sum is classified as divergent when the increments of `phi` over
/// successive dyadic blocks do not shrink (ratio at least `0.99`). The share
/// `alpha_n / phi(n)` must be below `0.05` at the horizon and not increasing.
pub fn admissible_check(alpha: &WeightSequence, horizon: u64) -> Result<AdmissibleReport> {
    if horizon < 64 {
        return Err(Error::HorizonTooSmall(format!("admissibility needs horizon >= 64, got {horizon}")));
    }
    let lphi = alpha.log_partial_sums(horizon);
    let mut cuts = Vec::new();
    let mut x = horizon;
    while x >= 4 && cuts.len() < 6 {
        cuts.push(x);
        x /= 2;
    }
    cuts.reverse();
    // ln of phi(cuts[i+1]) - phi(cuts[i])
    let incs: Vec<f64> = cuts
        .windows(2)
        .map(|w| {
            let (a, b) = (lphi[w[0] as usize], lphi[w[1] as usize]);
            if a == f64::NEG_INFINITY {
                b
            } else {
                b + (-(a - b).exp()).ln_1p()
            }
        })
        .collect();
    let steps: Vec<f64> = incs.windows(2).map(|w| w[1] - w[0]).collect();
    let increment_ratio = (steps.iter().sum::<f64>() / steps.len().max(1) as f64).exp();
    let divergent_sum = increment_ratio >= 0.99;
    let share = |n: u64| (alpha.log_weight(n) - lphi[n as usize]).exp();
    let (share_half, share_end) = (share(horizon / 2), share(horizon));
    let vanishing_share = share_end < 0.05 && share_end <= share_half * (1.0 + 1e-9);
    Ok(AdmissibleReport {
        admissible: divergent_sum && vanishing_share,
        divergent_sum,
        vanishing_share,
        increment_ratio,
        share_half,
        share_end,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainRow {
    pub dlow_beta: f64,
    pub dlow_alpha: f64,
    pub dup_alpha: f64,
    pub dup_beta: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaleReport {
    pub rows: Vec<ChainRow>,
    pub all_hold: bool,
}

/// Slack allowed in each link of the density chain.
pub const CHAIN_TOLERANCE: f64 = 0.02;

/// Checks `dlow_beta <= dlow_alpha <= dup_alpha <= dup_beta` on each sample set,
/// after confirming that `alpha_k / beta_k` is non-increasing on `[horizon/4, horizon]`.
pub fn scale_comparison(
    alpha: &WeightSequence,
    beta: &WeightSequence,
    sets: &[IndexSet],
    horizon: u64,
) -> Result<ScaleReport> {
    let from = (horizon / 4).max(alpha.k0).max(beta.k0).max(1);
    let mut prev = f64::INFINITY;
    for k in from..=horizon {
        let d = alpha.log_weight(k) - beta.log_weight(k);
        if d > prev + 1e-12 * (1.0 + prev.abs()) {
            return Err(Error::PreconditionViolated(format!(
                "alpha_k / beta_k increases at k = {k}"
            )));
        }
        prev = d;
    }
    let rows = crate::par::map_slice(sets, |e| -> Result<ChainRow> {
        let lb = lower_density(e, beta, horizon)?.estimate;
        let la = lower_density(e, alpha, horizon)?.estimate;
        let ua = upper_density(e, alpha, horizon)?.estimate;
        let ub = upper_density(e, beta, horizon)?.estimate;
        let t = CHAIN_TOLERANCE;
        Ok(ChainRow {
            dlow_beta: lb,
            dlow_alpha: la,
            dup_alpha: ua,
            dup_beta: ub,
            holds: lb <= la + t && la <= ua + t && ua <= ub + t,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let all_hold = rows.iter().all(|r| r.holds);
    Ok(ScaleReport { rows, all_hold })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub a: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub disjoint: bool,
    /// Lower `alpha`-density of `E`.
    pub dlow_alpha: f64,
    /// Lower natural density of `E`.
    pub dlow_natural: f64,
    /// `(C - 1) / a^2`.
    pub natural_floor: f64,
    pub delta2: Delta2Verdict,
}

/// Builds `E = union [a^{2n}, C a^{2n}]` and `F = union [a^{2n+1}, C a^{2n+1}]`
/// and measures their densities.
pub fn prop34_counterexample(a: f64, c: f64, alpha: &WeightSequence, horizon: u64) -> Result<CounterexampleReport> {
    if !(a > c && c > 1.0) {
        return Err(Error::InvalidArgument(format!("need a > C > 1, got a = {a}, C = {c}")));
    }
    let e = IndexSet::BlockUnion { a, c, parity: Parity::Even };
    let f = IndexSet::BlockUnion { a, c, parity: Parity::Odd };
    let (ie, ifl) = (e.indicator(horizon), f.indicator(horizon));
    let disjoint = !ie.iter().zip(&ifl).any(|(x, y)| *x && *y);
    let grid: Vec<u64> = (0..)
        .map(|j| 1u64 << j)
        .take_while(|&x| x <= horizon / 2)
        .filter(|&x| x >= alpha.k0.max(1))
        .collect();
    let delta2 = delta2_check(alpha, &grid)?.verdict;
    Ok(CounterexampleReport {
        a,
        c,
        disjoint,
        dlow_alpha: lower_density(&e, alpha, horizon)?.estimate,
        dlow_natural: lower_density(&e, &WeightSequence::constant(), horizon)?.estimate,
        natural_floor: (c - 1.0) / (a * a),
        delta2,
    })
}

/// Upper `alpha`-density of `union_{k >= k0} [floor(n_k / C), n_k]` with
/// `n_k = base^k`.
pub fn shrinking_union_density(
    base: u64,
    c: f64,
    k0: u32,
    alpha: &WeightSequence,
    horizon: u64,
) -> Result<DensityEstimate> {
    if base < 2 {
        return Err(Error::InvalidArgument("base must be at least 2".into()));
    }
    let mut seq = Vec::new();
    let mut k = k0;
    loop {
        let Some(n) = base.checked_pow(k) else { break };
        seq.push(n);
        if n > horizon {
            break;
        }
        k += 1;
    }
    let e = IndexSet::shrinking_blocks(&seq, c)?;
    upper_density(&e, alpha, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_matches_direct_sum() {
        let mut acc = LogSum::default();
        let mut direct = 0.0;
        for k in 1..=1000 {
            let w = (k as f64).sqrt().ln();
            acc.add(w);
            direct += (k as f64).sqrt();
        }
        assert!((acc.ln() - direct.ln()).abs() < 1e-14);
    }

    #[test]
    fn exploding_weights_stay_finite() {
        let e1 = WeightSequence::new(WeightFamily::ExpPower { eps: 1.0 }).unwrap();
        let l = e1.log_partial_sum(5000);
        // phi(n) = e (e^n - 1)/(e - 1)
        let expect = 5000.0 + 1.0 - (std::f64::consts::E - 1.0).ln();
        assert!((l - expect).abs() < 1e-9);
    }

    #[test]
    fn iterated_log_families_start_at_k0() {
        let d2 = WeightSequence::new(WeightFamily::SubExp { s: Some(2) }).unwrap();
        assert_eq!(d2.k0, ITERATED_LOG_K0);
        assert_eq!(d2.weight_at(16), 0.0);
        assert!(d2.log_weight(17).is_finite());
        assert!(WeightSequence::new(WeightFamily::SubExp { s: Some(4) }).is_err());
    }

    #[test]
    fn block_union_membership() {
        let e = IndexSet::BlockUnion { a: 3.0, c: 2.0, parity: Parity::Even };
        for k in [1u64, 2, 9, 18, 81, 162] {
            assert!(e.contains(k), "{k}");
        }
        for k in [3u64, 8, 19, 27, 80, 163] {
            assert!(!e.contains(k), "{k}");
        }
    }
}
