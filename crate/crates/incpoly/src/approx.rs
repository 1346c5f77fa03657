//! Incomplete polynomial approximants `sum_{k = floor(n/tau)}^n a_k z^k`
//! that follow a target on `K` while staying small on a second set `L`.
//!
//! Two producers are available. The minimax oracle solves a linear program in
//! a weighted Lagrange basis of the coefficient window; the Fekete–Cauchy
//! construction evaluates the contour formula with a Fekete polynomial of
//! `K u L`. Errors are always measured through a stable evaluation form, and
//! the monomial coefficients are produced in extended precision.

use crate::error::{Error, Result};
use crate::geometry::{CompactSetSample, ContourQuadrature};
use crate::lp;
use crate::par;
use crate::poly::Polynomial;
use crate::potential::{self, FeketeMode, Harnack, ThetaTable};
use crate::xprec::{self, Precision, XComplex};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;

/// Schedule `n -> tau_n` of window ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum IncompletenessSchedule {
    #[serde(rename = "constant-tau")]
    Constant { tau: f64 },
    /// `tau_n = scale * n^power`.
    #[serde(rename = "diverging-tau")]
    Diverging { scale: f64, power: f64 },
    /// Explicit table, typically produced by [`strongly_incomplete_schedule`].
    #[serde(rename = "strongly-incomplete-tau")]
    StronglyIncomplete { table: Vec<(usize, f64)> },
}

impl IncompletenessSchedule {
    pub fn tau_at(&self, n: usize) -> Result<f64> {
        let t = match self {
            IncompletenessSchedule::Constant { tau } => *tau,
            IncompletenessSchedule::Diverging { scale, power } => scale * (n as f64).powf(*power),
            IncompletenessSchedule::StronglyIncomplete { table } => table
                .iter()
                .find(|r| r.0 == n)
                .map(|r| r.1)
                .ok_or_else(|| Error::InvalidArgument(format!("schedule has no entry for n = {n}")))?,
        };
        if t > 1.0 && t.is_finite() {
            Ok(t)
        } else {
            Err(Error::InvalidArgument(format!("tau_{n} = {t} is not > 1")))
        }
    }
}

/// First index `floor(n / tau)` of the coefficient window.
pub fn window_start(n: usize, tau: f64) -> Result<usize> {
    if !(tau >= 1.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("tau must be >= 1, got {tau}")));
    }
    let r = n as f64 / tau;
    Ok((r + 1e-12 * r.max(1.0)).floor() as usize)
}

/// Polynomial `z^v Q(z)`, `deg Q <= m`, stored by its values at `m + 1`
/// nodes: `P(z) = sum_j values[j] (z / x_j)^v L_j(z)` with `L_j` the
/// Lagrange basis of the nodes. Evaluation runs in the log domain, and at a
/// node it returns the stored value exactly.
#[derive(Debug, Clone)]
pub struct WindowPoly {
    pub v: usize,
    pub nodes: Vec<C64>,
    pub values: Vec<C64>,
    log_nodes: Vec<C64>,
    log_w: Vec<C64>,
}

fn wrap_phase(z: C64) -> C64 {
    C64::new(z.re, z.im.rem_euclid(TWO_PI))
}

impl WindowPoly {
    /// Nodes must be distinct and non-zero when `v > 0`.
    pub fn new(v: usize, nodes: Vec<C64>, values: Vec<C64>) -> Self {
        assert_eq!(nodes.len(), values.len());
        let log_nodes = nodes.iter().map(|x| if v > 0 { x.ln() } else { C64::new(0.0, 0.0) }).collect();
        let log_w = (0..nodes.len())
            .map(|j| {
                let s: C64 = nodes
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != j)
                    .fold(C64::new(0.0, 0.0), |acc, (_, &x)| wrap_phase(acc + (nodes[j] - x).ln()));
                -s
            })
            .collect();
        WindowPoly {
            v,
            nodes,
            values,
            log_nodes,
            log_w,
        }
    }

    pub fn zero(v: usize) -> Self {
        WindowPoly::new(v, Vec::new(), Vec::new())
    }

    /// Upper bound on the degree: `v + #nodes - 1`.
    pub fn degree_bound(&self) -> usize {
        (self.v + self.nodes.len()).saturating_sub(1)
    }

    /// Basis values `b_j(z)`.
    pub fn basis(&self, z: C64) -> Vec<C64> {
        let m = self.nodes.len();
        let mut out = vec![C64::new(0.0, 0.0); m];
        if let Some(k) = self.nodes.iter().position(|&x| x == z) {
            out[k] = C64::new(1.0, 0.0);
            return out;
        }
        if self.v > 0 && z == C64::new(0.0, 0.0) {
            return out;
        }
        let lz = if self.v > 0 { z.ln() } else { C64::new(0.0, 0.0) };
        let diffs: Vec<C64> = self.nodes.iter().map(|&x| (z - x).ln()).collect();
        let lell = diffs.iter().fold(C64::new(0.0, 0.0), |acc, &d| wrap_phase(acc + d));
        let v = self.v as f64;
        for j in 0..m {
            let e = (lz - self.log_nodes[j]) * v + self.log_w[j] + lell - diffs[j];
            out[j] = wrap_phase(e).exp();
        }
        out
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.basis(z).iter().zip(&self.values).map(|(b, c)| b * c).sum()
    }

    /// Max over the samples of `|P|`.
    pub fn sup_norm(&self, samples: &[C64]) -> f64 {
        par::map_slice(samples, |&z| self.eval(z).norm())
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// Monomial coefficients (index `v + k`), computed with enough working
    /// precision that Horner evaluation on `|z| <= radius` loses at most
    /// `2^-64` relative to the node values.
    pub fn to_coeffs(&self, radius: f64) -> (usize, Vec<XComplex>) {
        let m = self.nodes.len();
        let scale = self.values.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if m == 0 || scale == 0.0 {
            return (xprec::MIN_EXTENDED_BITS, Vec::new());
        }
        let v = self.v as f64;
        // d_j = c_j x_j^{-v} w_j in log form
        let log_d: Vec<Option<C64>> = (0..m)
            .map(|j| {
                let c = self.values[j];
                (c != C64::new(0.0, 0.0)).then(|| c.ln() - self.log_nodes[j] * v + self.log_w[j])
            })
            .collect();
        let max_log_d = log_d.iter().flatten().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        let ell_mag: f64 = self.nodes.iter().map(|x| (1.0 + x.norm()).log2()).sum();
        let reach = (self.v + m) as f64 * radius.max(1.0).log2();
        let cancel = max_log_d / std::f64::consts::LN_2 + ell_mag + reach + 2.0 * (m as f64).log2()
            - scale.log2();
        let bits = xprec::bits_for(cancel, 64);

        // ell(z) = prod (z - x_i), ascending coefficients
        let mut ell = vec![XComplex::from_c64(C64::new(1.0, 0.0), bits)];
        for &x in &self.nodes {
            let xr = XComplex::from_c64(x, bits);
            let mut next = vec![XComplex::zero(bits); ell.len() + 1];
            for (k, c) in ell.iter().enumerate() {
                next[k + 1] = next[k + 1].add(c, bits);
                next[k] = next[k].sub(&c.mul(&xr, bits), bits);
            }
            ell = next;
        }
        let chunk = 16;
        let parts = par::map_range(m.div_ceil(chunk), |ci| {
            let mut acc = vec![XComplex::zero(bits); m];
            for j in ci * chunk..((ci + 1) * chunk).min(m) {
                let Some(ld) = log_d[j] else { continue };
                let d = XComplex::from_log_polar(ld.re, ld.im, bits);
                let xj = XComplex::from_c64(self.nodes[j], bits);
                // synthetic division ell / (z - x_j), highest coefficient first
                let mut q = ell[m].clone();
                acc[m - 1] = acc[m - 1].add(&q.mul(&d, bits), bits);
                for k in (1..m).rev() {
                    q = ell[k].add(&xj.mul(&q, bits), bits);
                    acc[k - 1] = acc[k - 1].add(&q.mul(&d, bits), bits);
                }
            }
            acc
        });
        let mut acc = vec![XComplex::zero(bits); m];
        for part in parts {
            for (a, p) in acc.iter_mut().zip(part) {
                *a = a.add(&p, bits);
            }
        }
        let mut coeffs = vec![XComplex::zero(bits); self.v];
        coeffs.extend(acc);
        (bits, coeffs)
    }

    /// Monomial form in the requested precision.
    pub fn to_polynomial(&self, precision: Precision, radius: f64) -> Polynomial {
        let (bits, coeffs) = self.to_coeffs(radius);
        let p = Polynomial::from_extended(bits, coeffs);
        match precision.resolve(self.degree_bound(), radius) {
            Precision::Standard => Polynomial::from_coeffs((0..=p.degree().max(-1)).map(|k| p.coeff(k as usize)).collect()),
            Precision::Extended(b) if b > bits => p.to_extended(b),
            Precision::Extended(_) => p,
        }
    }
}

/// Which producer built an approximant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    Minimax,
    Interpolation,
    FeketeCauchy,
}

#[derive(Debug, Clone)]
pub struct ApproxReport {
    pub n: usize,
    pub tau: f64,
    /// `floor(n / tau)`.
    pub v: usize,
    pub method: FitMethod,
    pub polynomial: Polynomial,
    /// Stable evaluation form (minimax and interpolation only).
    pub form: Option<WindowPoly>,
    pub err_k: f64,
    pub err_l: f64,
    pub bound: Option<CBound>,
    /// Optimal LP value including the polygonal relaxation.
    pub lp_value: Option<f64>,
}

impl ApproxReport {
    pub fn err(&self) -> f64 {
        self.err_k.max(self.err_l)
    }
}

/// Tunables for the fitting routines.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub precision: Precision,
    /// Number of directions in the polygonal modulus relaxation.
    pub directions: usize,
    /// Largest admissible `max_z sum_j |b_j(z)|` over the samples.
    pub max_lebesgue: f64,
    /// Skip the monomial conversion (the report then holds the zero polynomial).
    pub skip_monomial: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            precision: Precision::Standard,
            directions: 16,
            max_lebesgue: 1e10,
            skip_monomial: false,
        }
    }
}

fn key(z: &C64) -> (u64, u64) {
    (z.re.to_bits(), z.im.to_bits())
}

/// Weighted Leja sequence for the weight `|z|^v`: each new point maximises
/// `v ln|z| + sum ln|z - x_i|` over the candidates, ties to the lower index.
pub fn weighted_leja(cands: &[C64], v: usize, count: usize) -> Vec<usize> {
    let count = count.min(cands.len());
    let mut score: Vec<f64> = cands.iter().map(|z| v as f64 * z.norm().ln()).collect();
    let mut taken = vec![false; cands.len()];
    let mut out = Vec::with_capacity(count);
    let first = (0..cands.len()).fold(0, |b, i| if cands[i].norm() > cands[b].norm() { i } else { b });
    for step in 0..count {
        let pick = if step == 0 {
            first
        } else {
            let mut best = usize::MAX;
            for i in 0..cands.len() {
                if !taken[i] && (best == usize::MAX || score[i] > score[best]) {
                    best = i;
                }
            }
            best
        };
        taken[pick] = true;
        out.push(pick);
        let x = cands[pick];
        for (i, s) in score.iter_mut().enumerate() {
            if !taken[i] {
                *s += (cands[i] - x).norm().ln();
            }
        }
    }
    out
}

/// Minimax core on explicit samples. `k_values` are the target values on
/// `k_samples`; `L` samples are driven towards zero.
pub fn minimax_on_samples(
    k_samples: &[C64],
    k_values: &[C64],
    l_samples: &[C64],
    n: usize,
    tau: f64,
    opts: &FitOptions,
) -> Result<ApproxReport> {
    let v = window_start(n, tau)?;
    if v > n {
        return Err(Error::PreconditionViolated("empty coefficient window".into()));
    }
    let mut r = minimax_window(k_samples, k_values, l_samples, v, n, opts)?;
    r.tau = tau;
    Ok(r)
}

/// Minimax fit with the explicit coefficient window `v..=deg`.
pub fn minimax_window(
    k_samples: &[C64],
    k_values: &[C64],
    l_samples: &[C64],
    v: usize,
    deg: usize,
    opts: &FitOptions,
) -> Result<ApproxReport> {
    if k_samples.is_empty() {
        return Err(Error::PreconditionViolated("K has no samples".into()));
    }
    if v > deg {
        return Err(Error::PreconditionViolated("empty coefficient window".into()));
    }
    let (n, m) = (deg, deg - v);
    let tau = if v == 0 { f64::INFINITY } else { n as f64 / v as f64 };
    let mut seen = std::collections::BTreeMap::new();
    let mut cands = Vec::new();
    let mut cand_val = Vec::new();
    for (z, val) in k_samples
        .iter()
        .zip(k_values.iter().copied())
        .chain(l_samples.iter().map(|z| (z, C64::new(0.0, 0.0))))
    {
        if v > 0 && *z == C64::new(0.0, 0.0) {
            continue;
        }
        if seen.insert(key(z), ()).is_none() {
            cands.push(*z);
            cand_val.push(val);
        }
    }
    let radius = k_samples
        .iter()
        .chain(l_samples)
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if cands.is_empty() {
        let zero = WindowPoly::zero(v);
        let err_k = k_values.iter().map(|c| c.norm()).fold(0.0, f64::max);
        return Ok(ApproxReport {
            n,
            tau,
            v,
            method: FitMethod::Interpolation,
            polynomial: Polynomial::zero(),
            form: Some(zero),
            err_k,
            err_l: 0.0,
            bound: None,
            lp_value: None,
        });
    }
    let count = (m + 1).min(cands.len());
    let idx = weighted_leja(&cands, v, count);
    let nodes: Vec<C64> = idx.iter().map(|&i| cands[i]).collect();

    let (form, method, lp_value) = if count == cands.len() {
        let values = idx.iter().map(|&i| cand_val[i]).collect();
        (WindowPoly::new(v, nodes, values), FitMethod::Interpolation, None)
    } else {
        let shell = WindowPoly::new(v, nodes, vec![C64::new(0.0, 0.0); count]);
        let (values, t) = lp_fit(&shell, k_samples, k_values, l_samples, opts)?;
        (WindowPoly { values, ..shell }, FitMethod::Minimax, Some(t))
    };
    let err_k = par::map_range(k_samples.len(), |i| (form.eval(k_samples[i]) - k_values[i]).norm())
        .into_iter()
        .fold(0.0, f64::max);
    let err_l = form.sup_norm(l_samples);
    let polynomial = if opts.skip_monomial {
        Polynomial::zero()
    } else {
        form.to_polynomial(opts.precision, radius)
    };
    Ok(ApproxReport {
        n,
        tau,
        v,
        method,
        polynomial,
        form: Some(form),
        err_k,
        err_l,
        bound: None,
        lp_value,
    })
}

fn lp_fit(
    shell: &WindowPoly,
    k_samples: &[C64],
    k_values: &[C64],
    l_samples: &[C64],
    opts: &FitOptions,
) -> Result<(Vec<C64>, f64)> {
    let mut pts: Vec<(C64, C64)> = k_samples.iter().copied().zip(k_values.iter().copied()).collect();
    for &z in l_samples {
        if !(shell.v > 0 && z == C64::new(0.0, 0.0)) {
            pts.push((z, C64::new(0.0, 0.0)));
        }
    }
    let basis = par::map_slice(&pts, |(z, _)| shell.basis(*z));
    let lebesgue = basis
        .iter()
        .map(|b| b.iter().map(|c| c.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    if !(lebesgue <= opts.max_lebesgue) {
        return Err(Error::IllConditioned(format!(
            "window basis Lebesgue constant {lebesgue:.3e} exceeds {:.1e}",
            opts.max_lebesgue
        )));
    }
    if !(3..=32).contains(&opts.directions) {
        return Err(Error::InvalidArgument(format!(
            "direction count {} outside 3..=32",
            opts.directions
        )));
    }
    let mcount = shell.nodes.len();
    let p = 2 * mcount;
    let dirs: Vec<C64> = (0..opts.directions)
        .map(|d| C64::from_polar(1.0, -TWO_PI * d as f64 / opts.directions as f64))
        .collect();
    let mut colmax = vec![0.0f64; p];
    for b in &basis {
        for j in 0..mcount {
            let a = b[j].norm();
            colmax[2 * j] = colmax[2 * j].max(a);
            colmax[2 * j + 1] = colmax[2 * j + 1].max(a);
        }
    }
    let scale: Vec<f64> = colmax.iter().map(|&c| if c > 0.0 { 1.0 / c } else { 1.0 }).collect();
    let mut lp = lp::MinimaxLp::new(p);
    let mut row = vec![0.0; p];
    let mut active = vec![0u32; pts.len()];
    let mut add = |lp: &mut lp::MinimaxLp, i: usize, d: usize, active: &mut [u32]| {
        if active[i] & (1 << d) != 0 {
            return;
        }
        active[i] |= 1 << d;
        let e = dirs[d];
        for j in 0..mcount {
            let r = e * basis[i][j];
            row[2 * j] = r.re * scale[2 * j];
            row[2 * j + 1] = -r.im * scale[2 * j + 1];
        }
        lp.push_row(&row, (e * pts[i].1).re);
    };
    // Seed with the interpolation nodes and an even spread of samples.
    let stride = (pts.len() / (2 * mcount + 32)).max(1);
    for i in 0..pts.len() {
        let node = shell.nodes.contains(&pts[i].0);
        if node || i % stride == 0 {
            for d in 0..dirs.len() {
                add(&mut lp, i, d, &mut active);
            }
        }
    }
    let vmax = pts.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max);
    let max_iter = 200 * (p + 1) + 10_000;
    let per_round = (p / 2).max(16);
    for _ in 0..MAX_CUT_ROUNDS {
        let (x, t) = lp.solve(max_iter)?;
        let values: Vec<C64> = (0..mcount)
            .map(|j| C64::new(x[2 * j] * scale[2 * j], x[2 * j + 1] * scale[2 * j + 1]))
            .collect();
        let tol = 1e-9 * t.abs() + 1e-13 * vmax;
        let resid: Vec<(f64, usize, usize)> = par::map_slice(&basis, |b| {
            b.iter().zip(&values).map(|(bj, cj)| bj * cj).sum::<C64>()
        })
        .into_iter()
        .enumerate()
        .filter_map(|(i, fz)| {
            let r = fz - pts[i].1;
            let (d, over) = dirs
                .iter()
                .enumerate()
                .map(|(d, e)| (d, (e * r).re))
                .max_by(|a, b| a.1.total_cmp(&b.1))?;
            (over > t + tol && active[i] & (1 << d) == 0).then_some((over, i, d))
        })
        .collect();
        if resid.is_empty() {
            return Ok((values, t.max(0.0)));
        }
        let mut worst = resid;
        worst.sort_by(|a, b| b.0.total_cmp(&a.0));
        for &(_, i, d) in worst.iter().take(per_round) {
            let nd = dirs.len();
            for dd in [d, (d + 1) % nd, (d + nd - 1) % nd] {
                add(&mut lp, i, dd, &mut active);
            }
        }
    }
    Err(Error::Lp(format!("cutting planes did not settle in {MAX_CUT_ROUNDS} rounds")))
}

const MAX_CUT_ROUNDS: usize = 200;

/// Minimax incomplete approximation of `phi` on `K` (and of `0` on `L`) with
/// window `floor(n/tau)..n`.
pub fn incomplete_fit_minimax(
    phi: &Polynomial,
    k: &CompactSetSample,
    l: Option<&CompactSetSample>,
    n: usize,
    tau: f64,
    opts: &FitOptions,
) -> Result<ApproxReport> {
    let ks = k.all_samples();
    let kv: Vec<C64> = ks.iter().map(|&z| phi.eval(z)).collect();
    let ls = l.map(|l| l.all_samples()).unwrap_or_default();
    minimax_on_samples(&ks, &kv, &ls, n, tau, opts)
}

/// Constants entering the incomplete Bernstein–Walsh bound for a fixed
/// triple `(K, L, Gamma)`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundSetup {
    /// `l(Gamma) / (2 pi dist(Gamma, K))`.
    pub c: f64,
    /// `max over Gamma of exp(-g_{K u L})`.
    pub g: f64,
    pub harnack: f64,
    pub capacity: f64,
    /// `log delta_n` model `[log c, a, b]` used beyond the tabulated range.
    pub fit: [f64; 3],
    /// `max |z|` over `K u L`.
    pub m_union: f64,
    /// `min |z|` over `K`.
    pub m_k: f64,
    pub gamma_min_abs: f64,
    #[serde(skip)]
    pub theta: ThetaTable,
}

impl BoundSetup {
    /// `theta_m`; beyond the table the fitted `delta_m / c` model is used,
    /// floored at `1`.
    pub fn theta(&self, m: usize) -> f64 {
        let last = self.theta.rows.last().map_or(0, |r| r.0);
        if m <= last {
            return self.theta.theta(m);
        }
        let mf = m as f64;
        let log_ratio = (self.fit[1] * mf.ln() + self.fit[2]) / (mf - 1.0);
        (log_ratio.max(0.0) * self.harnack).exp()
    }

    /// `M_{K u L} / (m_K / 2)`.
    pub fn growth_ratio(&self) -> f64 {
        self.m_union / (0.5 * self.m_k)
    }
}

/// Computes `C`, `G`, the `theta_m` table up to `m_max` and the capacity
/// model of `K u L`.
pub fn bound_setup(
    k: &CompactSetSample,
    l: Option<&CompactSetSample>,
    gamma: &ContourQuadrature,
    m_max: usize,
    harnack: Harnack,
    green_degree: usize,
) -> Result<BoundSetup> {
    let kul = match l {
        Some(l) => k.union(l),
        None => k.clone(),
    };
    let dist = gamma
        .nodes
        .iter()
        .map(|&z| k.dist(z))
        .fold(f64::INFINITY, f64::min)
        .min(gamma.distance_to(k));
    if !(dist > 0.0) {
        return Err(Error::PreconditionViolated("contour meets K".into()));
    }
    let cap = potential::capacity(&kul, 40.min(m_max.max(4)))?;
    if cap.polar {
        return Err(Error::PolarInput);
    }
    let theta = potential::theta_sequence(&kul, gamma, m_max.max(2), harnack)?;
    let g = potential::g_constant(&kul, gamma, green_degree)?;
    Ok(BoundSetup {
        c: gamma.length / (TWO_PI * dist),
        g,
        harnack: theta.harnack,
        capacity: cap.capacity,
        fit: cap.fit,
        m_union: kul.bounding_radius + kul.pad,
        m_k: k.min_radius - k.pad,
        gamma_min_abs: gamma.min_abs,
        theta,
    })
}

/// Value of the incomplete Bernstein–Walsh bound.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct CBound {
    pub log_bound: f64,
    pub bound: f64,
    /// `bound^(1/n)`.
    pub root: f64,
}

/// `C ||phi|| (M/(m_K/2))^(n/tau) (G theta_m)^m` with `m = n - floor(n/tau)`,
/// evaluated in the log domain.
pub fn theorem_c_bound(setup: &BoundSetup, n: usize, tau: f64, phi_norm: f64) -> Result<CBound> {
    let v = window_start(n, tau)?;
    let m = n - v;
    if phi_norm == 0.0 {
        return Ok(CBound {
            log_bound: f64::NEG_INFINITY,
            bound: 0.0,
            root: 0.0,
        });
    }
    let theta = setup.theta(m);
    let log_bound = setup.c.ln()
        + phi_norm.ln()
        + n as f64 / tau * setup.growth_ratio().ln()
        + m as f64 * (setup.g.ln() + theta.ln());
    Ok(CBound {
        log_bound,
        bound: log_bound.exp(),
        root: (log_bound / n.max(1) as f64).exp(),
    })
}

/// Fekete–Cauchy construction `P_n = z^v Q_m` with `Q_m` given by the contour
/// formula discretised on `Gamma`. The contour must be a circle; the node
/// count is raised to at least `4n + 64` (power of two) and checked against
/// a doubled rule.
pub fn incomplete_fit_fekete(
    phi: &Polynomial,
    k: &CompactSetSample,
    l: Option<&CompactSetSample>,
    gamma: &ContourQuadrature,
    n: usize,
    tau: f64,
    setup: Option<&BoundSetup>,
    opts: &FitOptions,
) -> Result<ApproxReport> {
    let v = window_start(n, tau)?;
    let m = n - v;
    if m < 2 {
        return Err(Error::PreconditionViolated(format!("window length m = {m} < 2")));
    }
    let (center, radius) = gamma
        .circle
        .ok_or_else(|| Error::UnsupportedDomain("Fekete construction needs a circular contour".into()))?;
    if gamma.min_abs < 0.5 * (k.min_radius - k.pad) * (1.0 - 1e-12) {
        return Err(Error::PreconditionViolated(format!(
            "contour modulus {:.4} below m_K/2",
            gamma.min_abs
        )));
    }
    let kul = match l {
        Some(l) => k.union(l),
        None => k.clone(),
    };
    let fek = potential::fekete_tuple(&kul, m, FeketeMode::Greedy)?;
    if fek.delta_n <= 0.0 {
        return Err(Error::PolarInput);
    }
    let zeros = fek.points;
    let ks = k.all_samples();
    let ls = l.map(|l| l.all_samples()).unwrap_or_default();
    let n0 = gamma.n_nodes().max(4 * n + 64).next_power_of_two();
    let coarse = cauchy_eval(phi, &zeros, v, &ContourQuadrature::circle(center, radius, n0), &ks, &ls);
    let fine_q = ContourQuadrature::circle(center, radius, 2 * n0);
    let fine = cauchy_eval(phi, &zeros, v, &fine_q, &ks, &ls);
    let scale = fine
        .p_values
        .iter()
        .map(|c| c.norm())
        .chain(ks.iter().map(|&z| phi.eval(z).norm()))
        .fold(f64::MIN_POSITIVE, f64::max);
    let change = coarse
        .p_values
        .iter()
        .zip(&fine.p_values)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    if change > 1e-6 * scale {
        return Err(Error::QuadratureUnconverged(format!(
            "doubling {n0} nodes moved values by {:.3e} relative",
            change / scale
        )));
    }
    let rmax = ks.iter().chain(&ls).map(|z| z.norm()).fold(0.0, f64::max);
    let polynomial = if opts.skip_monomial {
        Polynomial::zero()
    } else {
        cauchy_coefficients(&fine_q, &fine.log_c, &zeros, v, rmax, phi.sup_norm(&ks), opts.precision)
    };
    let bound = match setup {
        Some(s) => {
            let norm_u = gamma.nodes.iter().map(|&z| phi.eval(z).norm()).fold(0.0, f64::max);
            Some(theorem_c_bound(s, n, tau, norm_u)?)
        }
        None => None,
    };
    Ok(ApproxReport {
        n,
        tau,
        v,
        method: FitMethod::FeketeCauchy,
        polynomial,
        form: None,
        err_k: fine.err_k,
        err_l: fine.err_l,
        bound,
        lp_value: None,
    })
}

struct CauchyEval {
    /// `log c_k` with `c_k = W_k h(z_k) / (2 pi i q(z_k))`; `None` when zero.
    log_c: Vec<Option<C64>>,
    p_values: Vec<C64>,
    err_k: f64,
    err_l: f64,
}

/// Evaluates `P - target` on the samples through
/// `w^v q(w) I(w) + w^v (C(w) - h_in(w))`, where `I` collects the quadrature
/// of `h / (q (w - z))` and `C` the Cauchy sum of `h`.
fn cauchy_eval(
    phi: &Polynomial,
    zeros: &[C64],
    v: usize,
    quad: &ContourQuadrature,
    ks: &[C64],
    ls: &[C64],
) -> CauchyEval {
    let vf = v as f64;
    let logq = |w: C64| zeros.iter().fold(C64::new(0.0, 0.0), |acc, &r| wrap_phase(acc + (w - r).ln()));
    let i2pi = C64::new(0.0, TWO_PI);
    let mut a = Vec::with_capacity(quad.nodes.len());
    let mut log_c = Vec::with_capacity(quad.nodes.len());
    for (&z, &w) in quad.nodes.iter().zip(&quad.weights) {
        let h = phi.eval(z) * (-(z.ln()) * vf).exp();
        let ak = w * h / i2pi;
        a.push(ak);
        log_c.push((ak != C64::new(0.0, 0.0)).then(|| wrap_phase(ak.ln() - logq(z))));
    }
    let eval = |w: C64, inside: bool| -> (C64, C64) {
        if v > 0 && w == C64::new(0.0, 0.0) {
            let t = if inside { -phi.eval(w) } else { C64::new(0.0, 0.0) };
            return (C64::new(0.0, 0.0), t);
        }
        let lw = if v > 0 { w.ln() * vf } else { C64::new(0.0, 0.0) };
        let lqw = logq(w);
        let mut e = C64::new(0.0, 0.0);
        let mut cn = C64::new(0.0, 0.0);
        for ((&z, lc), &ak) in quad.nodes.iter().zip(&log_c).zip(&a) {
            if let Some(lc) = lc {
                e += wrap_phase(lw + lqw + *lc).exp() / (w - z);
                cn += ak / (z - w);
            }
        }
        let wv = lw.exp();
        let p = e + wv * cn;
        let diff = if inside { p - phi.eval(w) } else { p };
        (p, diff)
    };
    let kres = par::map_slice(ks, |&w| eval(w, true));
    let lres = par::map_slice(ls, |&w| eval(w, false));
    let err_k = kres.iter().map(|r| r.1.norm()).fold(0.0, f64::max);
    let err_l = lres.iter().map(|r| r.1.norm()).fold(0.0, f64::max);
    let p_values = kres.iter().chain(&lres).map(|r| r.0).collect();
    CauchyEval {
        log_c,
        p_values,
        err_k,
        err_l,
    }
}

/// Monomial coefficients of `z^v Q` with
/// `Q(w) = sum_k c_k (q(w) - q(z_k)) / (w - z_k)`, expanded through the
/// divided differences `sum_{i>j} b_i z_k^{i-1-j}` in extended precision.
fn cauchy_coefficients(
    quad: &ContourQuadrature,
    log_c: &[Option<C64>],
    zeros: &[C64],
    v: usize,
    rmax: f64,
    phi_norm: f64,
    precision: Precision,
) -> Polynomial {
    let m = zeros.len();
    let max_term = quad
        .nodes
        .iter()
        .zip(log_c)
        .filter_map(|(&z, lc)| {
            lc.map(|lc| lc.re / std::f64::consts::LN_2 + zeros.iter().map(|r| (z.norm() + r.norm()).log2()).sum::<f64>())
        })
        .fold(f64::NEG_INFINITY, f64::max);
    if max_term == f64::NEG_INFINITY {
        return Polynomial::zero();
    }
    let cancel = max_term + 2.0 * (m as f64).log2() + (v + m) as f64 * rmax.max(1.0).log2()
        - phi_norm.max(f64::MIN_POSITIVE).log2();
    let bits = xprec::bits_for(cancel, 64);
    // q(w) = prod (w - r), ascending
    let mut b = vec![XComplex::from_c64(C64::new(1.0, 0.0), bits)];
    for &r in zeros {
        let rr = XComplex::from_c64(r, bits);
        let mut next = vec![XComplex::zero(bits); b.len() + 1];
        for (k, c) in b.iter().enumerate() {
            next[k + 1] = next[k + 1].add(c, bits);
            next[k] = next[k].sub(&c.mul(&rr, bits), bits);
        }
        b = next;
    }
    let chunk = 64;
    let nchunks = quad.nodes.len().div_ceil(chunk);
    let parts = par::map_range(nchunks, |ci| {
        let mut acc = vec![XComplex::zero(bits); m];
        for k in ci * chunk..((ci + 1) * chunk).min(quad.nodes.len()) {
            let Some(lc) = log_c[k] else { continue };
            let c = XComplex::from_log_polar(lc.re, lc.im, bits);
            let z = XComplex::from_c64(quad.nodes[k], bits);
            let mut d = b[m].clone();
            acc[m - 1] = acc[m - 1].add(&d.mul(&c, bits), bits);
            for j in (1..m).rev() {
                d = b[j].add(&z.mul(&d, bits), bits);
                acc[j - 1] = acc[j - 1].add(&d.mul(&c, bits), bits);
            }
        }
        acc
    });
    let mut acc = vec![XComplex::zero(bits); m];
    for part in parts {
        for (a, p) in acc.iter_mut().zip(part) {
            *a = a.add(&p, bits);
        }
    }
    let mut coeffs = vec![XComplex::zero(bits); v];
    coeffs.extend(acc);
    let p = Polynomial::from_extended(bits, coeffs);
    match precision.resolve(v + m, rmax) {
        Precision::Standard => Polynomial::from_coeffs((0..=p.degree().max(-1)).map(|k| p.coeff(k as usize)).collect()),
        Precision::Extended(b) if b > bits => p.to_extended(b),
        Precision::Extended(_) => p,
    }
}

/// Minimal ratio `(a + r) / (a - r)` for which windows `n/tau..n` can
/// approximate on the disc `D(a, r)`.
pub fn disc_infeasibility_bound(a: f64, r: f64) -> Result<f64> {
    if !(a > 0.0) || !(r >= 0.0) || r >= a {
        return Err(Error::InvalidArgument(format!("need 0 <= r < a, got a = {a}, r = {r}")));
    }
    Ok((a + r) / (a - r))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DecayRow {
    pub n: usize,
    pub tau: f64,
    pub err_k: f64,
    pub err_l: f64,
    pub bound: Option<f64>,
    pub bound_root: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayCurve {
    pub rows: Vec<DecayRow>,
    pub fitted_rate: f64,
}

/// `exp(slope)` of the least-squares line through `(n, ln err)` over the
/// strictly positive errors; `0` when every error vanishes.
pub fn fitted_rate(points: &[(usize, f64)]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|&(n, e)| (n as f64, e.ln()))
        .collect();
    if pts.is_empty() {
        return Ok(0.0);
    }
    if pts.len() < 2 {
        return Err(Error::InvalidArgument("rate fit needs two non-zero errors".into()));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("rate fit needs two distinct n".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok((sxy / sxx).exp())
}

/// Minimax errors along `n_grid` with `tau = schedule(n)`.
pub fn decay_curve(
    phi: &Polynomial,
    k: &CompactSetSample,
    l: Option<&CompactSetSample>,
    schedule: &IncompletenessSchedule,
    n_grid: &[usize],
    setup: Option<&BoundSetup>,
    phi_norm_u: f64,
    opts: &FitOptions,
) -> Result<DecayCurve> {
    if n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("n_grid must be increasing".into()));
    }
    let mut o = opts.clone();
    o.skip_monomial = true;
    let ks = k.all_samples();
    let kv: Vec<C64> = ks.iter().map(|&z| phi.eval(z)).collect();
    let ls = l.map(|l| l.all_samples()).unwrap_or_default();
    let rows = par::map_slice(n_grid, |&n| -> Result<DecayRow> {
        let tau = schedule.tau_at(n)?;
        let r = minimax_on_samples(&ks, &kv, &ls, n, tau, &o)?;
        let b = match setup {
            Some(s) => Some(theorem_c_bound(s, n, tau, phi_norm_u)?),
            None => None,
        };
        Ok(DecayRow {
            n,
            tau,
            err_k: r.err_k,
            err_l: r.err_l,
            bound: b.map(|b| b.bound),
            bound_root: b.map(|b| b.root),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let rate = fitted_rate(&rows.iter().map(|r| (r.n, r.err_k.max(r.err_l))).collect::<Vec<_>>())?;
    Ok(DecayCurve {
        rows,
        fitted_rate: rate,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrongRow {
    pub n: usize,
    pub tau: f64,
    pub eta: f64,
    pub g_n: f64,
    pub theta_n: f64,
    pub harnack_n: f64,
    /// `C^(1/n) exp(-sqrt(-log(theta G_n)))`.
    pub eta_ceiling: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrongSchedule {
    /// `sup theta_n` over the computed rows.
    pub theta: f64,
    pub c: f64,
    /// `M / (m / 2)` for the first dilation.
    pub growth_ratio: f64,
    pub rows: Vec<StrongRow>,
}

impl StrongSchedule {
    pub fn as_schedule(&self) -> IncompletenessSchedule {
        IncompletenessSchedule::StronglyIncomplete {
            table: self.rows.iter().map(|r| (r.n, r.tau)).collect(),
        }
    }
}

/// Window ratios `tau_n -> 1` and rates `eta_n -> 0` for a finite set `K`
/// from its dilations `K_n = K^{1/n}`. The Harnack exponent of `K_n` is
/// bounded by the exact one for the exterior of a disc about the contour
/// centre containing `K_n`.
pub fn strongly_incomplete_schedule(
    k: &CompactSetSample,
    gamma: &ContourQuadrature,
    n_range: &[usize],
) -> Result<StrongSchedule> {
    if k.kind != crate::geometry::SetKind::FinitePointSet || k.pad > 0.0 {
        let c = potential::capacity_value(k, 20).unwrap_or(f64::NAN);
        return Err(Error::NonPolarInput(c));
    }
    let n0 = *n_range
        .iter()
        .min()
        .ok_or_else(|| Error::InvalidArgument("empty n range".into()))?;
    let pts = k.all_samples();
    let center = gamma.circle.map_or_else(|| k.centroid(), |c| c.0);
    let e0 = 1.0 / n0 as f64;
    let big_m = pts.iter().map(|z| z.norm()).fold(0.0, f64::max) + e0;
    let small_m = pts.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min) - e0;
    if !(small_m > 0.0) {
        return Err(Error::PreconditionViolated("the first dilation reaches 0".into()));
    }
    if gamma.min_abs < 0.5 * small_m {
        return Err(Error::PreconditionViolated("contour modulus below m/2".into()));
    }
    let dist0 = gamma
        .nodes
        .iter()
        .map(|&z| pts.iter().map(|p| (z - p).norm()).fold(f64::INFINITY, f64::min))
        .fold(f64::INFINITY, f64::min)
        - e0;
    if !(dist0 > 0.0) {
        return Err(Error::PreconditionViolated("contour meets the first dilation".into()));
    }
    for p in &pts {
        if (gamma.winding(*p) - 1.0).abs() > 1e-6 {
            return Err(Error::PreconditionViolated("contour does not wind once around K".into()));
        }
    }
    if gamma.winding(C64::new(0.0, 0.0)).abs() > 1e-6 {
        return Err(Error::PreconditionViolated("contour winds around 0".into()));
    }
    let c = gamma.length / (TWO_PI * dist0);
    let reach = pts.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
    let per_n = par::map_slice(n_range, |&n| -> Result<(f64, f64, f64)> {
        let eps = 1.0 / n as f64;
        let per_disc = (2 * n).max(64) as f64;
        let kn = crate::geometry::dilate_with(k, eps, TWO_PI * eps / per_disc)?;
        let delta = potential::fekete_tuple(&kn, n, FeketeMode::Greedy)?.delta_n;
        let cap = potential::capacity_value(&kn, 40)?;
        let d = gamma
            .nodes
            .iter()
            .map(|&z| potential::harnack_exponent(center, reach + eps, Some(z)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(1.0, f64::max);
        let g = potential::green_many(&kn, &gamma.nodes, 128)?
            .into_iter()
            .map(|g| (-g).exp())
            .fold(0.0, f64::max);
        Ok(((delta / cap).powf(d), g, d))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let theta = per_n.iter().map(|r| r.0).fold(0.0, f64::max);
    let lr = (big_m / (0.5 * small_m)).ln();
    let mut rows = Vec::with_capacity(n_range.len());
    for (&n, &(theta_n, g, d)) in n_range.iter().zip(&per_n) {
        let lg = theta.ln() + g.ln();
        if !(lg < -1.0) {
            return Err(Error::ParameterInfeasible(format!(
                "theta * G_n = {:.4} is not below 1/e at n = {n}; start the range later",
                lg.exp()
            )));
        }
        let s = (-lg).sqrt();
        let tau = lg / (lg + s) * (1.0 - lr / lg) + 1.0 / n as f64;
        let nf = n as f64;
        let log_eta = c.ln() / nf + lr / tau + (tau - 1.0) / tau * lg;
        rows.push(StrongRow {
            n,
            tau,
            eta: log_eta.exp(),
            g_n: g,
            theta_n,
            harnack_n: d,
            eta_ceiling: (c.ln() / nf - s).exp(),
        });
    }
    Ok(StrongSchedule {
        theta,
        c,
        growth_ratio: big_m / (0.5 * small_m),
        rows,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrongCheck {
    pub n: usize,
    pub tau: f64,
    pub err: f64,
    /// `ln ||phi||_U + n ln eta_n`.
    pub log_rhs: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremEReport {
    pub schedule: StrongSchedule,
    pub checks: Vec<StrongCheck>,
    pub violations: Vec<usize>,
}

/// Runs the minimax oracle with window `floor(n/tau_n)..n` on `K` and compares
/// `ln err` with `ln ||phi||_U + n ln eta_n`.
pub fn verify_theorem_e(
    k: &CompactSetSample,
    phi: &Polynomial,
    gamma: &ContourQuadrature,
    n_range: &[usize],
) -> Result<TheoremEReport> {
    let schedule = strongly_incomplete_schedule(k, gamma, n_range)?;
    let norm_u = gamma.nodes.iter().map(|&z| phi.eval(z).norm()).fold(0.0, f64::max);
    let opts = FitOptions {
        skip_monomial: true,
        ..FitOptions::default()
    };
    let checks = par::map_slice(&schedule.rows, |row| -> Result<StrongCheck> {
        let r = incomplete_fit_minimax(phi, k, None, row.n, row.tau, &opts)?;
        let log_rhs = norm_u.ln() + row.n as f64 * row.eta.ln();
        let ok = r.err_k == 0.0 || r.err_k.ln() <= log_rhs;
        Ok(StrongCheck {
            n: row.n,
            tau: row.tau,
            err: r.err_k,
            log_rhs,
            ok,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let violations = checks.iter().filter(|c| !c.ok).map(|c| c.n).collect();
    Ok(TheoremEReport {
        schedule,
        checks,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_compact, SetDescriptor};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn basis_is_cardinal_and_reproduces_window_monomials() {
        let nodes = vec![c(2.0, 0.0), c(0.0, 1.5), c(-1.0, -1.0), c(1.0, 1.0)];
        let v = 3;
        // values of z^v (z^2 - 1) at the nodes
        let f = |z: C64| z.powu(v as u32) * (z * z - 1.0);
        let w = WindowPoly::new(v, nodes.clone(), nodes.iter().map(|&z| f(z)).collect());
        for (i, &x) in nodes.iter().enumerate() {
            let b = w.basis(x);
            for (j, bj) in b.iter().enumerate() {
                assert_eq!(*bj, if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) });
            }
        }
        for &z in &[c(0.3, 0.2), c(-2.0, 0.5), c(1.1, -0.7)] {
            assert!((w.eval(z) - f(z)).norm() < 1e-12 * (1.0 + f(z).norm()));
        }
        let p = w.to_polynomial(Precision::Standard, 2.0);
        assert_eq!(p.valuation(), 3);
        assert!(p.degree() <= 6);
        assert!(p.coeff(6).norm() < 1e-14);
        assert!((p.coeff(5) - 1.0).norm() < 1e-14);
        assert!((p.coeff(3) + 1.0).norm() < 1e-14);
        assert!(p.coeff(4).norm() < 1e-14);
    }

    #[test]
    fn single_point_interpolation() {
        let k = make_compact(&SetDescriptor::points(&[c(2.0, 0.0)])).unwrap();
        let r = incomplete_fit_minimax(&Polynomial::constant(c(1.0, 0.0)), &k, None, 4, 2.0, &FitOptions::default())
            .unwrap();
        assert_eq!(r.err_k, 0.0);
        assert_eq!(r.polynomial.valuation(), 2);
        assert_eq!(r.polynomial.degree(), 2);
        assert!((r.polynomial.coeff(2) - 0.25).norm() < 1e-15);
    }

    #[test]
    fn disc_bound_examples() {
        assert_eq!(disc_infeasibility_bound(2.0, 1.0).unwrap(), 3.0);
        assert_eq!(disc_infeasibility_bound(2.0, 0.0).unwrap(), 1.0);
        assert_eq!(disc_infeasibility_bound(3.0, 1.0).unwrap(), 2.0);
        assert!(disc_infeasibility_bound(1.0, 1.0).is_err());
    }

    #[test]
    fn rate_fit() {
        let pts: Vec<(usize, f64)> = (1..10).map(|n| (n, 0.5f64.powi(n as i32) * 3.0)).collect();
        assert!((fitted_rate(&pts).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(fitted_rate(&[(1, 0.0), (2, 0.0)]).unwrap(), 0.0);
    }

    #[test]
    fn precision_parsing() {
        assert_eq!("standard".parse::<Precision>().unwrap(), Precision::Standard);
        assert_eq!("ext:256".parse::<Precision>().unwrap(), Precision::Extended(256));
        assert!("ext:64".parse::<Precision>().is_err());
        assert_eq!(Precision::Standard.resolve(1000, 3.0), Precision::Extended(160));
        assert_eq!(Precision::Standard.resolve(100, 3.0), Precision::Standard);
    }
}
