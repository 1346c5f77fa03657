//! Fekete tuples, n-th diameters, capacity, Green-function values, Harnack
//! exponents and the theta sequence of the incomplete Bernstein–Walsh bound.
//!
//! Every product of distances is accumulated as a sum of logarithms.

use crate::error::{Error, Result};
use crate::geometry::{CompactSetSample, ContourQuadrature};
use crate::par;
use crate::poly::Polynomial;
use crate::C64;
use serde::{Deserialize, Serialize};

/// Default limit on the number of unordered tuples visited by exact search.
pub const DEFAULT_EXACT_BUDGET: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeketeMode {
    Exact,
    Greedy,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeketeResult {
    pub points: Vec<C64>,
    pub n: usize,
    /// `log prod_{j<k} |w_j - w_k|`, `-inf` when two points coincide.
    pub pair_product: f64,
    pub delta_n: f64,
    pub mode: FeketeMode,
}

impl FeketeResult {
    fn from_points(points: Vec<C64>, mode: FeketeMode) -> Self {
        let n = points.len();
        let pp = log_pair_product(&points);
        FeketeResult {
            n,
            delta_n: delta_from_log(pp, n),
            pair_product: pp,
            points,
            mode,
        }
    }
}

/// `sum_{j<k} log |w_j - w_k|`.
pub fn log_pair_product(points: &[C64]) -> f64 {
    let mut s = 0.0;
    for j in 0..points.len() {
        for k in j + 1..points.len() {
            s += (points[j] - points[k]).norm().ln();
        }
    }
    s
}

fn delta_from_log(pp: f64, n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    if pp == f64::NEG_INFINITY {
        0.0
    } else {
        (pp * 2.0 / (n as f64 * (n as f64 - 1.0))).exp()
    }
}

fn distinct_samples(k: &CompactSetSample) -> Vec<C64> {
    let mut out: Vec<C64> = Vec::new();
    for z in k.all_samples() {
        if !out.iter().any(|u| (u - z).norm() <= 1e-14 * (1.0 + z.norm())) {
            out.push(z);
        }
    }
    out
}

fn ln_binom(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// Fekete `n`-tuple over the samples of `k` using the default exact budget.
pub fn fekete_tuple(k: &CompactSetSample, n: usize, mode: FeketeMode) -> Result<FeketeResult> {
    fekete_tuple_with_budget(k, n, mode, DEFAULT_EXACT_BUDGET)
}

/// Fekete `n`-tuple over the samples of `k`.
///
/// Exact mode returns a global maximiser of the pair product over all
/// `n`-subsets of the samples; the budget counts unordered subsets. Greedy
/// mode returns a Leja sequence polished by single-point exchanges until no
/// swap improves the product.
pub fn fekete_tuple_with_budget(
    k: &CompactSetSample,
    n: usize,
    mode: FeketeMode,
    budget: f64,
) -> Result<FeketeResult> {
    if n < 2 {
        return Err(Error::InvalidArgument("Fekete tuples need n >= 2".into()));
    }
    let s = distinct_samples(k);
    if s.len() < n {
        let mut pts = s.clone();
        while pts.len() < n {
            pts.push(s[0]);
        }
        return Ok(FeketeResult::from_points(pts, mode));
    }
    match mode {
        FeketeMode::Greedy => Ok(FeketeResult::from_points(greedy_fekete(&s, n), mode)),
        FeketeMode::Exact => {
            let needed = ln_binom(s.len(), n).exp();
            if needed > budget {
                return Err(Error::BudgetExceeded { needed, budget });
            }
            Ok(FeketeResult::from_points(exact_fekete(&s, n), mode))
        }
    }
}

/// Leja sequence on `s` started at the sample of largest modulus.
pub fn leja_indices(s: &[C64], n: usize) -> Vec<usize> {
    let first = (0..s.len())
        .max_by(|&a, &b| s[a].norm().total_cmp(&s[b].norm()).then(b.cmp(&a)))
        .unwrap_or(0);
    let mut idx = vec![first];
    let mut acc: Vec<f64> = s.iter().map(|z| (z - s[first]).norm().ln()).collect();
    while idx.len() < n {
        let mut best = None;
        for (j, &v) in acc.iter().enumerate() {
            if v.is_finite() && best.is_none_or(|(_, b)| v > b) {
                best = Some((j, v));
            }
        }
        let Some((j, _)) = best else { break };
        idx.push(j);
        let zj = s[j];
        for (a, z) in acc.iter_mut().zip(s) {
            *a += (z - zj).norm().ln();
        }
    }
    idx
}

fn greedy_fekete(s: &[C64], n: usize) -> Vec<C64> {
    let mut idx = leja_indices(s, n);
    let mut in_set = vec![false; s.len()];
    for &i in &idx {
        in_set[i] = true;
    }
    // contribution[x] = sum over tuple members t != x of log|x - t|
    let mut contrib: Vec<f64> = par::map_range(s.len(), |x| {
        idx.iter()
            .filter(|&&t| t != x)
            .map(|&t| (s[x] - s[t]).norm().ln())
            .sum()
    });
    for _sweep in 0..200 {
        let mut improved = false;
        for slot in 0..n {
            let j = idx[slot];
            let current = contrib[j];
            let zj = s[j];
            let mut best: Option<(usize, f64)> = None;
            for x in 0..s.len() {
                if in_set[x] {
                    continue;
                }
                let v = contrib[x] - (s[x] - zj).norm().ln();
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((x, v));
                }
            }
            if let Some((x, v)) = best {
                if v > current + 1e-13 * (1.0 + current.abs()) {
                    let zx = s[x];
                    for y in 0..s.len() {
                        let add = if y == x { 0.0 } else { (s[y] - zx).norm().ln() };
                        let sub = if y == j { 0.0 } else { (s[y] - zj).norm().ln() };
                        contrib[y] += add - sub;
                    }
                    in_set[j] = false;
                    in_set[x] = true;
                    idx[slot] = x;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    idx.sort_unstable();
    idx.into_iter().map(|i| s[i]).collect()
}

fn exact_fekete(s: &[C64], n: usize) -> Vec<C64> {
    let m = s.len();
    let d: Vec<f64> = (0..m * m)
        .map(|ij| {
            let (i, j) = (ij / m, ij % m);
            if i == j {
                0.0
            } else {
                (s[i] - s[j]).norm().ln()
            }
        })
        .collect();
    let log_diam = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let seed = greedy_fekete(s, n);
    let seed_val = log_pair_product(&seed);

    struct Search<'a> {
        d: &'a [f64],
        m: usize,
        n: usize,
        log_diam: f64,
        best: f64,
        best_idx: Vec<usize>,
        stack: Vec<usize>,
    }
    impl Search<'_> {
        fn go(&mut self, start: usize, val: f64) {
            let depth = self.stack.len();
            if depth == self.n {
                if val > self.best {
                    self.best = val;
                    self.best_idx = self.stack.clone();
                }
                return;
            }
            let r = self.n - depth;
            let pairs_left = (r * depth + r * (r - 1) / 2) as f64;
            if val + pairs_left * self.log_diam <= self.best {
                return;
            }
            for i in start..=(self.m - r) {
                let add: f64 = self.stack.iter().map(|&t| self.d[i * self.m + t]).sum();
                self.stack.push(i);
                self.go(i + 1, val + add);
                self.stack.pop();
            }
        }
    }
    let results = par::map_range(m - n + 1, |first| {
        let mut srch = Search {
            d: &d,
            m,
            n,
            log_diam,
            best: seed_val - 1e-12 * (1.0 + seed_val.abs()),
            best_idx: Vec::new(),
            stack: vec![first],
        };
        srch.go(first + 1, 0.0);
        (srch.best, srch.best_idx)
    });
    let mut best: Option<(f64, Vec<usize>)> = None;
    for (v, idx) in results {
        if !idx.is_empty() && best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, idx));
        }
    }
    match best {
        Some((_, idx)) => idx.into_iter().map(|i| s[i]).collect(),
        None => seed,
    }
}

/// `delta_n(K)`, exact when the budget allows and greedy otherwise.
pub fn nth_diameter(k: &CompactSetSample, n: usize) -> Result<f64> {
    let exact = fekete_tuple(k, n, FeketeMode::Exact);
    match exact {
        Ok(r) => Ok(r.delta_n),
        Err(Error::BudgetExceeded { .. }) => Ok(fekete_tuple(k, n, FeketeMode::Greedy)?.delta_n),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityReport {
    pub capacity: f64,
    pub polar: bool,
    /// `(n, delta_n)` for `n = 4..=n_max`.
    pub delta_table: Vec<(usize, f64)>,
    /// True when the table is non-increasing up to `1e-9` relative slack.
    pub monotone: bool,
    /// Coefficients of the fit `log delta_n = log c + a log(n)/(n-1) + b/(n-1)`.
    pub fit: [f64; 3],
}

/// Capacity by extrapolating the greedy `delta_n` table, `n = 4..=n_max`.
pub fn capacity(k: &CompactSetSample, n_max: usize) -> Result<CapacityReport> {
    if n_max < 4 {
        return Err(Error::InvalidArgument("capacity needs n_max >= 4".into()));
    }
    let ns: Vec<usize> = (4..=n_max).collect();
    let deltas = par::map_slice(&ns, |&n| {
        fekete_tuple(k, n, FeketeMode::Greedy).map(|r| r.delta_n)
    });
    let mut table = Vec::with_capacity(ns.len());
    for (n, d) in ns.iter().zip(deltas) {
        table.push((*n, d?));
    }
    let monotone = table.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-9));
    if table.iter().any(|&(_, d)| d <= 0.0) {
        return Ok(CapacityReport {
            capacity: 0.0,
            polar: true,
            delta_table: table,
            monotone,
            fit: [f64::NEG_INFINITY, 0.0, 0.0],
        });
    }
    let rows: Vec<[f64; 3]> = table
        .iter()
        .map(|&(n, _)| {
            let m = n as f64 - 1.0;
            [1.0, (n as f64).ln() / m, 1.0 / m]
        })
        .collect();
    let ys: Vec<f64> = table.iter().map(|&(_, d)| d.ln()).collect();
    let fit = least_squares3(&rows, &ys);
    Ok(CapacityReport {
        capacity: fit[0].exp(),
        polar: false,
        delta_table: table,
        monotone,
        fit,
    })
}

/// Closed-form capacity for a single disc (radius) or segment (length / 4).
pub fn closed_form_capacity(k: &CompactSetSample) -> Option<f64> {
    if let Some((_, r)) = k.as_disc() {
        return Some(r);
    }
    k.as_segment().map(|(a, b)| (b - a).norm() / 4.0)
}

/// Capacity from the closed form when available, otherwise extrapolated.
pub fn capacity_value(k: &CompactSetSample, n_max: usize) -> Result<f64> {
    match closed_form_capacity(k) {
        Some(c) => Ok(c),
        None => Ok(capacity(k, n_max)?.capacity),
    }
}

fn least_squares3(rows: &[[f64; 3]], ys: &[f64]) -> [f64; 3] {
    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for (r, &y) in rows.iter().zip(ys) {
        for i in 0..3 {
            b[i] += r[i] * y;
            for j in 0..3 {
                a[i][j] += r[i] * r[j];
            }
        }
    }
    solve3(a, b)
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in 0..3 {
            if row != col && a[col][col] != 0.0 {
                let f = a[row][col] / a[col][col];
                for k in 0..3 {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    [b[0] / a[0][0], b[1] / a[1][1], b[2] / a[2][2]]
}

/// Monic polynomial vanishing on the greedy Fekete `m`-tuple.
pub fn fekete_polynomial(k: &CompactSetSample, m: usize) -> Result<Polynomial> {
    let r = fekete_tuple(k, m, FeketeMode::Greedy)?;
    Ok(Polynomial::from_roots(&r.points))
}

/// True when the samples hold fewer than `m + 1` distinct points, so no
/// degree-`m` Fekete polynomial separates them from a continuum.
fn is_polar_sample(k: &CompactSetSample, m: usize) -> bool {
    k.kind == crate::geometry::SetKind::FinitePointSet && k.pad == 0.0
        || distinct_samples(k).len() <= m
}

/// Bernstein-lemma estimate `(1/m) log(|q_m(z)| / ||q_m||_K)` with `q_m` the
/// greedy Fekete polynomial; never uses closed forms.
pub fn green_estimate(k: &CompactSetSample, z: C64, m: usize) -> Result<f64> {
    let zeros = fekete_tuple(k, m, FeketeMode::Greedy)?.points;
    green_estimate_with_zeros(k, &zeros, z)
}

fn green_estimate_with_zeros(k: &CompactSetSample, zeros: &[C64], z: C64) -> Result<f64> {
    let m = zeros.len() as f64;
    let logq = |w: C64| zeros.iter().map(|r| (w - r).norm().ln()).sum::<f64>();
    let norm = k
        .all_samples()
        .iter()
        .map(|&w| logq(w))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(((logq(z) - norm) / m).max(0.0))
}

/// Green function of the complement of `k` with pole at infinity.
/// Closed forms are used for a single disc or segment.
pub fn green_at(k: &CompactSetSample, z: C64, m: usize) -> Result<f64> {
    if let Some((c, r)) = k.as_disc() {
        return Ok(((z - c).norm() / r).ln().max(0.0));
    }
    if let Some((a, b)) = k.as_segment() {
        let w = (2.0 * z - a - b) / (b - a);
        let s = (w * w - 1.0).sqrt();
        let g = (w + s).norm().max((w - s).norm());
        return Ok(g.ln().max(0.0));
    }
    if is_polar_sample(k, m) {
        return Err(Error::PolarInput);
    }
    green_estimate(k, z, m)
}

/// Green values at many points sharing one Fekete polynomial.
pub fn green_many(k: &CompactSetSample, zs: &[C64], m: usize) -> Result<Vec<f64>> {
    if k.as_disc().is_some() || k.as_segment().is_some() {
        return zs.iter().map(|&z| green_at(k, z, m)).collect();
    }
    if is_polar_sample(k, m) {
        return Err(Error::PolarInput);
    }
    let zeros = fekete_tuple(k, m, FeketeMode::Greedy)?.points;
    let samples = k.all_samples();
    let logq = |w: C64| zeros.iter().map(|r| (w - r).norm().ln()).sum::<f64>();
    let norm = par::map_slice(&samples, |&w| logq(w))
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let mf = zeros.len() as f64;
    Ok(par::map_slice(zs, |&z| ((logq(z) - norm) / mf).max(0.0)))
}

/// Harnack distance `d(z, inf)` in the exterior of the disc `D(center, radius)`.
/// `None` stands for the point at infinity.
pub fn harnack_exponent(center: C64, radius: f64, z: Option<C64>) -> Result<f64> {
    let Some(z) = z else { return Ok(1.0) };
    let dist = (z - center).norm();
    if !(dist > radius) {
        return Err(Error::UnsupportedDomain(format!(
            "point at distance {dist} is not outside the disc of radius {radius}"
        )));
    }
    let rho = radius / dist;
    Ok((1.0 + rho) / (1.0 - rho))
}

/// Source of the Harnack exponent entering theta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Harnack {
    /// Exact disc-exterior value, maximised over the contour nodes.
    ExactDisc,
    /// User-supplied upper bound.
    Bound(f64),
}

pub const DEFAULT_HARNACK_BOUND: f64 = 10.0;

#[derive(Debug, Clone, Serialize)]
pub struct ThetaTable {
    pub capacity: f64,
    pub harnack: f64,
    /// `(m, delta_m, theta_m)` for `m = 2..=m_max`.
    pub rows: Vec<(usize, f64, f64)>,
}

impl ThetaTable {
    /// `theta_m`, clamped to the last tabulated value beyond `m_max`.
    pub fn theta(&self, m: usize) -> f64 {
        match self.rows.iter().find(|r| r.0 == m) {
            Some(r) => r.2,
            None if m < 2 => f64::INFINITY,
            None => self.rows.last().map_or(f64::INFINITY, |r| r.2),
        }
    }
}

/// `theta_m = (delta_m(KuL) / c(KuL))^d` for `m = 2..=m_max`.
pub fn theta_sequence(
    kul: &CompactSetSample,
    gamma: &ContourQuadrature,
    m_max: usize,
    harnack: Harnack,
) -> Result<ThetaTable> {
    let d = match harnack {
        Harnack::Bound(b) if b >= 1.0 => b,
        Harnack::Bound(b) => {
            return Err(Error::InvalidArgument(format!("Harnack bound must be >= 1, got {b}")))
        }
        Harnack::ExactDisc => {
            let (c, r) = kul.as_disc().ok_or_else(|| {
                Error::UnsupportedDomain("exact Harnack exponent needs a single disc".into())
            })?;
            gamma
                .nodes
                .iter()
                .map(|&z| harnack_exponent(c, r, Some(z)))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(1.0, f64::max)
        }
    };
    let cap = capacity_value(kul, 40.min(m_max.max(4)))?;
    if cap <= 0.0 {
        return Err(Error::PolarInput);
    }
    let ms: Vec<usize> = (2..=m_max).collect();
    let deltas = par::map_slice(&ms, |&m| fekete_tuple(kul, m, FeketeMode::Greedy).map(|r| r.delta_n));
    let mut rows = Vec::with_capacity(ms.len());
    for (m, dm) in ms.into_iter().zip(deltas) {
        let dm = dm?;
        rows.push((m, dm, (dm / cap).powf(d)));
    }
    Ok(ThetaTable {
        capacity: cap,
        harnack: d,
        rows,
    })
}

/// `max over the contour of exp(-g_{KuL})`.
pub fn g_constant(kul: &CompactSetSample, gamma: &ContourQuadrature, m: usize) -> Result<f64> {
    let g = green_many(kul, &gamma.nodes, m)?;
    Ok(g.into_iter().map(|v| (-v).exp()).fold(0.0, f64::max))
}

/// Bundle of constants entering the incomplete Bernstein–Walsh bound.
#[derive(Debug, Clone, Serialize)]
pub struct PotentialConstants {
    pub capacity: f64,
    pub polar: bool,
    pub g: f64,
    pub harnack: f64,
    pub theta: Vec<(usize, f64)>,
}

pub fn potential_constants(
    kul: &CompactSetSample,
    gamma: &ContourQuadrature,
    m_max: usize,
    harnack: Harnack,
    green_degree: usize,
) -> Result<PotentialConstants> {
    let t = theta_sequence(kul, gamma, m_max, harnack)?;
    let g = g_constant(kul, gamma, green_degree)?;
    Ok(PotentialConstants {
        capacity: t.capacity,
        polar: false,
        g,
        harnack: t.harnack,
        theta: t.rows.iter().map(|r| (r.0, r.2)).collect(),
    })
}

/// `|p(z)| / (||p||_K exp(deg(p) g(z)))`; at most `1` by Bernstein's lemma.
pub fn bernstein_growth_check(p: &Polynomial, k: &CompactSetSample, z: C64, m: usize) -> Result<f64> {
    let deg = p.degree().max(0) as f64;
    let g = if deg > 0.0 { green_at(k, z, m)? } else { 0.0 };
    let norm = p.sup_norm(&k.all_samples());
    if norm == 0.0 {
        return Ok(0.0);
    }
    Ok(p.eval(z).norm() / (norm * (deg * g).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_compact, SetDescriptor};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn circle(n: usize) -> CompactSetSample {
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                [t.cos(), t.sin()]
            })
            .collect();
        make_compact(&SetDescriptor {
            kind: "explicit-samples".into(),
            params: serde_json::json!({ "points": pts }),
            resolution: Some(2.0 * (PI / n as f64).sin()),
        })
        .unwrap()
    }

    #[test]
    fn two_point_tuple_is_diameter() {
        let k = make_compact(&SetDescriptor::segment(c(-1.0, 0.5), c(2.0, 0.5), 0.05)).unwrap();
        let r = fekete_tuple(&k, 2, FeketeMode::Exact).unwrap();
        assert!((r.delta_n - 3.0).abs() < 1e-12);
    }

    #[test]
    fn exact_triangle_on_circle() {
        let k = circle(360);
        let r = fekete_tuple(&k, 3, FeketeMode::Exact).unwrap();
        assert!((r.delta_n - 3f64.sqrt()).abs() <= k.resolution);
    }

    #[test]
    fn exact_square_on_circle() {
        let k = circle(120);
        let d = nth_diameter(&k, 4).unwrap();
        assert!((d - 4f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn segment_three_points() {
        let k = make_compact(&SetDescriptor::segment(c(-1.0, 0.0), c(1.0, 0.0), 0.01)).unwrap();
        let mut r = fekete_tuple(&k, 3, FeketeMode::Exact).unwrap().points;
        r.sort_by(|a, b| a.re.total_cmp(&b.re));
        for (z, e) in r.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((z.re - e).abs() <= k.resolution);
        }
    }

    #[test]
    fn two_point_set_has_zero_third_diameter() {
        let k = make_compact(&SetDescriptor::points(&[c(0.0, 0.0), c(1.0, 0.0)])).unwrap();
        assert_eq!(nth_diameter(&k, 3).unwrap(), 0.0);
        let r = capacity(&make_compact(&SetDescriptor::points(&[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)])).unwrap(), 8).unwrap();
        assert!(r.polar);
        assert_eq!(r.capacity, 0.0);
    }

    #[test]
    fn green_closed_forms() {
        let unit = make_compact(&SetDescriptor::disc(c(0.0, 0.0), 1.0, 0.01)).unwrap();
        assert!((green_at(&unit, c(2.0, 0.0), 64).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(green_at(&unit, c(0.0, 1.0), 64).unwrap().abs() < 1e-15);
        let seg = make_compact(&SetDescriptor::segment(c(-2.0, 0.0), c(2.0, 0.0), 0.01)).unwrap();
        let g = green_at(&seg, c(4.0, 0.0), 64).unwrap();
        assert!((g - (2.0 + 3f64.sqrt()).ln()).abs() < 1e-12);
        assert!((g - 1.3170).abs() < 1e-4);
    }

    #[test]
    fn green_estimator_matches_closed_forms() {
        let unit = make_compact(&SetDescriptor::disc(c(0.0, 0.0), 1.0, 0.01)).unwrap();
        let e = green_estimate(&unit, c(2.0, 0.0), 64).unwrap();
        assert!((e / 2f64.ln() - 1.0).abs() < 0.05, "{e}");
        let seg = make_compact(&SetDescriptor::segment(c(-2.0, 0.0), c(2.0, 0.0), 0.005)).unwrap();
        let e = green_estimate(&seg, c(4.0, 0.0), 64).unwrap();
        assert!((e / (2.0 + 3f64.sqrt()).ln() - 1.0).abs() < 0.05, "{e}");
    }

    #[test]
    fn polar_sets_have_no_green_function() {
        let k = make_compact(&SetDescriptor::points(&[c(1.5, 0.0), c(2.0, 1.0)])).unwrap();
        assert!(matches!(green_at(&k, c(5.0, 0.0), 8), Err(Error::PolarInput)));
    }

    #[test]
    fn harnack_examples() {
        assert_eq!(harnack_exponent(c(0.0, 0.0), 1.0, None).unwrap(), 1.0);
        assert!((harnack_exponent(c(0.0, 0.0), 1.0, Some(c(2.0, 0.0))).unwrap() - 3.0).abs() < 1e-15);
        assert!((harnack_exponent(c(1.0, 1.0), 0.5, Some(c(1.0, 3.0))).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        assert!(harnack_exponent(c(0.0, 0.0), 1.0, Some(c(0.5, 0.0))).is_err());
    }

    #[test]
    fn theta_on_unit_circle() {
        let k = circle(720);
        let g = ContourQuadrature::circle(c(0.0, 0.0), 2.0, 64);
        let t = theta_sequence(&k, &g, 60, Harnack::Bound(3.0)).unwrap();
        for &(m, dm, th) in &t.rows {
            let exact = (m as f64).powf(1.0 / (m as f64 - 1.0));
            assert!(dm <= exact * (1.0 + 1e-12));
            assert!((dm / exact - 1.0).abs() < 2e-3, "m={m} {dm} {exact}");
            assert!(th >= 1.0 - 1e-3);
        }
        // with d = 3 the closed form m^{3/(m-1)} first drops below 1.1 near m = 162
        let closed = |m: f64| m.powf(3.0 / (m - 1.0));
        assert!(closed(50.0) - 1.0 > 0.1);
        assert!((165..2000).all(|m| closed(m as f64) - 1.0 < 0.1));
    }

    #[test]
    fn bernstein_extremal_cases() {
        let unit = make_compact(&SetDescriptor::disc(c(0.0, 0.0), 1.0, 0.01)).unwrap();
        let p = Polynomial::monomial(7, c(1.0, 0.0));
        let r = bernstein_growth_check(&p, &unit, c(2.0, 0.0), 16).unwrap();
        assert!((r - 1.0).abs() < 1e-9);
        let k = Polynomial::constant(c(-3.0, 1.0));
        assert!((bernstein_growth_check(&k, &unit, c(2.0, 0.0), 16).unwrap() - 1.0).abs() < 1e-15);
    }
}
