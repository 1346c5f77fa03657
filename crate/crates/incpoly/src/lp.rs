//! Dense revised simplex for standard-form linear programs
//! `min c^T y  s.t.  A y = b, y >= 0`.
//!
//! Entering columns follow Dantzig pricing with ties broken by the smallest
//! index; after a run of degenerate pivots the rule switches to Bland's rule
//! until the objective moves again. Leaving rows are tie-broken by the
//! smallest basic variable index. The run is fully deterministic.

use crate::error::{Error, Result};

/// Column-major dense matrix with `rows` rows.
#[derive(Debug, Clone)]
pub struct DenseColumns {
    pub rows: usize,
    pub data: Vec<f64>,
}

impl DenseColumns {
    pub fn new(rows: usize) -> Self {
        DenseColumns { rows, data: Vec::new() }
    }

    pub fn push(&mut self, col: &[f64]) {
        assert_eq!(col.len(), self.rows);
        self.data.extend_from_slice(col);
    }

    pub fn cols(&self) -> usize {
        if self.rows == 0 {
            0
        } else {
            self.data.len() / self.rows
        }
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    /// Optimal primal point `y`.
    pub y: Vec<f64>,
    /// Simplex multipliers `pi = c_B^T B^{-1}` (an optimal dual point).
    pub pi: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

const PIVOT_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;
const REINVERT_EVERY: usize = 64;
const DEGENERATE_SWITCH: usize = 50;

/// Standard-form program whose column set may grow between solves. After a
/// solve the optimal basis is kept, and the next solve starts from it: new
/// columns enter at zero, so the basis stays primal feasible.
#[derive(Debug, Clone)]
pub struct Simplex {
    m: usize,
    /// Row signs making `b >= 0`.
    sign: Vec<f64>,
    b: Vec<f64>,
    /// Sign-adjusted columns, column-major.
    a: Vec<f64>,
    c: Vec<f64>,
    /// Basis entries `j < n` are structural, `ARTIFICIAL + i` is the unit column of row `i`.
    basis: Vec<usize>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    feasible: bool,
}

const ARTIFICIAL: usize = usize::MAX / 2;

impl Simplex {
    pub fn new(b: &[f64]) -> Self {
        let m = b.len();
        let sign: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
        let bb: Vec<f64> = b.iter().zip(&sign).map(|(v, s)| v * s).collect();
        Simplex {
            m,
            sign,
            xb: bb.clone(),
            b: bb,
            a: Vec::new(),
            c: Vec::new(),
            basis: (0..m).map(|i| ARTIFICIAL + i).collect(),
            binv: identity(m),
            feasible: false,
        }
    }

    pub fn cols(&self) -> usize {
        self.c.len()
    }

    pub fn push_column(&mut self, col: &[f64], cost: f64) {
        assert_eq!(col.len(), self.m);
        self.a.extend(col.iter().zip(&self.sign).map(|(v, s)| v * s));
        self.c.push(cost);
    }

    fn column(&self, j: usize, out: &mut [f64]) {
        if j >= ARTIFICIAL {
            out.iter_mut().for_each(|o| *o = 0.0);
            out[j - ARTIFICIAL] = 1.0;
        } else {
            out.copy_from_slice(&self.a[j * self.m..(j + 1) * self.m]);
        }
    }

    /// Optimises from the current basis.
    pub fn solve(&mut self, max_iter: usize) -> Result<LpSolution> {
        let n = self.cols();
        let scale = 1.0 + self.b.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let mut iterations = 0;
        if !self.feasible {
            iterations += self.run(true, max_iter)?;
            let infeas: f64 = self
                .basis
                .iter()
                .zip(&self.xb)
                .filter(|(&j, _)| j >= ARTIFICIAL)
                .map(|(_, &x)| x)
                .sum();
            if infeas > 1e-8 * scale {
                return Err(Error::Lp(format!("infeasible (phase one residual {infeas:.3e})")));
            }
            self.feasible = true;
        }
        iterations += self.run(false, max_iter)?;
        let mut y = vec![0.0; n];
        for (&j, &x) in self.basis.iter().zip(&self.xb) {
            if j < n {
                y[j] = x.max(0.0);
            }
        }
        let pi_flipped = self.multipliers(false);
        let pi: Vec<f64> = pi_flipped.iter().zip(&self.sign).map(|(p, s)| p * s).collect();
        let objective = y.iter().zip(&self.c).map(|(a, b)| a * b).sum();
        Ok(LpSolution {
            y,
            pi,
            objective,
            iterations,
        })
    }

    fn cost(&self, j: usize, phase_one: bool) -> f64 {
        match (j >= ARTIFICIAL, phase_one) {
            (true, true) => 1.0,
            (true, false) => 0.0,
            (false, true) => 0.0,
            (false, false) => self.c[j],
        }
    }

    fn multipliers(&self, phase_one: bool) -> Vec<f64> {
        let m = self.m;
        let mut pi = vec![0.0; m];
        for (i, &j) in self.basis.iter().enumerate() {
            let cb = self.cost(j, phase_one);
            if cb != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (p, r) in pi.iter_mut().zip(row) {
                    *p += cb * r;
                }
            }
        }
        pi
    }

    /// Rebuilds `B^{-1}` from scratch; keeps the updated inverse when the
    /// basis is numerically singular.
    fn reinvert(&mut self) {
        let m = self.m;
        let mut bm = vec![0.0; m * m];
        let mut col = vec![0.0; m];
        for (k, &j) in self.basis.iter().enumerate() {
            self.column(j, &mut col);
            for i in 0..m {
                bm[i * m + k] = col[i];
            }
        }
        let mut inv = identity(m);
        for c in 0..m {
            let p = (c..m)
                .max_by(|&x, &y| bm[x * m + c].abs().total_cmp(&bm[y * m + c].abs()))
                .unwrap();
            let pv = bm[p * m + c];
            if pv.abs() < 1e-14 {
                return;
            }
            if p != c {
                for k in 0..m {
                    bm.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let ip = 1.0 / pv;
            for k in 0..m {
                bm[c * m + k] *= ip;
                inv[c * m + k] *= ip;
            }
            for r in 0..m {
                if r != c {
                    let f = bm[r * m + c];
                    if f != 0.0 {
                        for k in 0..m {
                            bm[r * m + k] -= f * bm[c * m + k];
                            inv[r * m + k] -= f * inv[c * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        for i in 0..m {
            self.xb[i] = (0..m).map(|k| self.binv[i * m + k] * self.b[k]).sum();
        }
    }

    fn run(&mut self, phase_one: bool, max_iter: usize) -> Result<usize> {
        let m = self.m;
        let n = self.cols();
        let mut in_basis = vec![false; n];
        let mut art_in = vec![false; m];
        for &j in &self.basis {
            if j >= ARTIFICIAL {
                art_in[j - ARTIFICIAL] = true;
            } else {
                in_basis[j] = true;
            }
        }
        let mut col = vec![0.0; m];
        let mut u = vec![0.0; m];
        let mut degenerate_run = 0usize;
        let mut iters = 0usize;
        // Columns whose pivot column vanished numerically since the last pivot.
        let mut banned: Vec<usize> = Vec::new();
        let cscale = 1.0 + self.c.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        loop {
            if iters >= max_iter {
                return Err(Error::Lp(format!("iteration limit {max_iter} reached")));
            }
            if iters > 0 && iters % REINVERT_EVERY == 0 {
                self.reinvert();
            }
            let pi = self.multipliers(phase_one);
            let bland = degenerate_run >= DEGENERATE_SWITCH;
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..n {
                if in_basis[j] || banned.contains(&j) {
                    continue;
                }
                let aj = &self.a[j * m..(j + 1) * m];
                let d = self.cost(j, phase_one) - dot(&pi, aj);
                if d < -1e-10 * cscale {
                    if bland {
                        enter = Some((j, d));
                        break;
                    }
                    if enter.is_none_or(|(_, best)| d < best) {
                        enter = Some((j, d));
                    }
                }
            }
            if phase_one && enter.is_none() {
                for i in 0..m {
                    if !art_in[i] {
                        let d = 1.0 - pi[i];
                        if d < -1e-10 * cscale && enter.is_none_or(|(_, best)| d < best) {
                            enter = Some((ARTIFICIAL + i, d));
                        }
                    }
                }
            }
            let Some((q, _)) = enter else { return Ok(iters) };
            self.column(q, &mut col);
            for i in 0..m {
                u[i] = dot(&self.binv[i * m..(i + 1) * m], &col);
            }
            // Two-pass ratio test: the bound is relaxed by FEAS_TOL, then the
            // largest pivot within the relaxed bound leaves.
            let umax = u.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
            let ptol = PIVOT_TOL * umax.max(1.0);
            let eligible = |i: usize| -> Option<f64> {
                let art_stuck = !phase_one && self.basis[i] >= ARTIFICIAL && u[i].abs() > ptol;
                if art_stuck {
                    Some(0.0)
                } else if u[i] > ptol {
                    Some(self.xb[i].max(0.0) / u[i])
                } else {
                    None
                }
            };
            let mut bound = f64::INFINITY;
            for i in 0..m {
                if let Some(ratio) = eligible(i) {
                    let relaxed = if ratio == 0.0 && self.xb[i] <= 0.0 && u[i] <= 0.0 {
                        0.0
                    } else {
                        ratio + FEAS_TOL / u[i].abs()
                    };
                    bound = bound.min(relaxed);
                }
            }
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                if let Some(ratio) = eligible(i) {
                    if ratio > bound {
                        continue;
                    }
                    let better = match leave {
                        None => true,
                        Some((r, _)) if bland => self.basis[i] < self.basis[r],
                        Some((r, _)) => {
                            u[i].abs() > u[r].abs()
                                || (u[i].abs() == u[r].abs() && self.basis[i] < self.basis[r])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, theta)) = leave else {
                if phase_one || u.iter().all(|x| x.abs() <= PIVOT_TOL) {
                    banned.push(q);
                    continue;
                }
                return Err(Error::Lp("unbounded objective".into()));
            };
            banned.clear();
            if theta <= 1e-14 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            for i in 0..m {
                if i != r {
                    self.xb[i] -= theta * u[i];
                }
            }
            self.xb[r] = theta;
            let pr = u[r];
            for k in 0..m {
                self.binv[r * m + k] /= pr;
            }
            let pivot_row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            for i in 0..m {
                if i != r && u[i] != 0.0 {
                    let f = u[i];
                    let row = &mut self.binv[i * m..(i + 1) * m];
                    for (x, p) in row.iter_mut().zip(&pivot_row) {
                        *x -= f * p;
                    }
                }
            }
            let old = self.basis[r];
            if old >= ARTIFICIAL {
                art_in[old - ARTIFICIAL] = false;
            } else {
                in_basis[old] = false;
            }
            if q >= ARTIFICIAL {
                art_in[q - ARTIFICIAL] = true;
            } else {
                in_basis[q] = true;
            }
            self.basis[r] = q;
            iters += 1;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        for l in 0..4 {
            s[l] += a[4 * k + l] * b[4 * k + l];
        }
    }
    let mut t = (s[0] + s[1]) + (s[2] + s[3]);
    for k in 4 * chunks..a.len() {
        t += a[k] * b[k];
    }
    t
}

/// Solves `min c^T y  s.t.  A y = b, y >= 0`.
pub fn solve(a: &DenseColumns, b: &[f64], c: &[f64], max_iter: usize) -> Result<LpSolution> {
    if b.len() != a.rows || c.len() != a.cols() {
        return Err(Error::Lp("dimension mismatch".into()));
    }
    let mut s = Simplex::new(b);
    for j in 0..a.cols() {
        s.push_column(a.col(j), c[j]);
    }
    s.solve(max_iter)
}

fn identity(m: usize) -> Vec<f64> {
    let mut v = vec![0.0; m * m];
    for i in 0..m {
        v[i * m + i] = 1.0;
    }
    v
}

/// Minimises `t` subject to `rows[r] . x - t <= rhs[r]` with `x` free, by
/// solving the standard-form dual. Returns `(x, t)`.
pub fn minimax_rows(rows: &[Vec<f64>], rhs: &[f64], max_iter: usize) -> Result<(Vec<f64>, f64)> {
    let p = rows.first().map_or(0, |r| r.len());
    let mut lp = MinimaxLp::new(p);
    for (row, &r) in rows.iter().zip(rhs) {
        lp.push_row(row, r);
    }
    let (x, _) = lp.solve(max_iter)?;
    let t = rows
        .iter()
        .zip(rhs)
        .map(|(row, &r)| dot(row, &x) - r)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((x, t))
}

/// Incremental form of [`minimax_rows`]: rows may be added between solves
/// and each solve restarts from the previous optimal basis.
#[derive(Debug, Clone)]
pub struct MinimaxLp {
    p: usize,
    inner: Simplex,
    col: Vec<f64>,
}

impl MinimaxLp {
    pub fn new(p: usize) -> Self {
        let mut b = vec![0.0; p + 1];
        b[p] = 1.0;
        MinimaxLp {
            p,
            inner: Simplex::new(&b),
            col: vec![0.0; p + 1],
        }
    }

    pub fn rows(&self) -> usize {
        self.inner.cols()
    }

    pub fn push_row(&mut self, row: &[f64], rhs: f64) {
        self.col[..self.p].copy_from_slice(row);
        self.col[self.p] = 1.0;
        let col = std::mem::take(&mut self.col);
        self.inner.push_column(&col, rhs);
        self.col = col;
    }

    /// Returns `(x, t)` with `t` the optimal value of the current row set.
    pub fn solve(&mut self, max_iter: usize) -> Result<(Vec<f64>, f64)> {
        let sol = self.inner.solve(max_iter)?;
        Ok((sol.pi[..self.p].to_vec(), -sol.objective))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_standard_form() {
        // min -x1 - 2 x2  s.t. x1 + x2 + s1 = 4, x1 + 3 x2 + s2 = 6
        let mut a = DenseColumns::new(2);
        a.push(&[1.0, 1.0]);
        a.push(&[1.0, 3.0]);
        a.push(&[1.0, 0.0]);
        a.push(&[0.0, 1.0]);
        let s = solve(&a, &[4.0, 6.0], &[-1.0, -2.0, 0.0, 0.0], 100).unwrap();
        assert!((s.objective + 5.0).abs() < 1e-12);
        assert!((s.y[0] - 3.0).abs() < 1e-12 && (s.y[1] - 1.0).abs() < 1e-12);
        let dual: f64 = s.pi[0] * 4.0 + s.pi[1] * 6.0;
        assert!((dual - s.objective).abs() < 1e-12);
    }

    #[test]
    fn infeasible_detected() {
        let mut a = DenseColumns::new(1);
        a.push(&[1.0]);
        assert!(solve(&a, &[-1.0], &[1.0], 100).is_err());
    }

    #[test]
    fn chebyshev_line_fit() {
        // best uniform fit of |x| on {-1, 0, 1} by a constant: t = 1/2
        let pts = [-1.0f64, 0.0, 1.0];
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for &x in &pts {
            rows.push(vec![1.0]);
            rhs.push(x.abs());
            rows.push(vec![-1.0]);
            rhs.push(-x.abs());
        }
        let (x, t) = minimax_rows(&rows, &rhs, 100).unwrap();
        assert!((t - 0.5).abs() < 1e-12);
        assert!((x[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn incremental_rows_match_batch_solve() {
        // fit a + b x to x^2 on a grid, adding rows in two batches
        let pts: Vec<f64> = (0..21).map(|k| -1.0 + 0.1 * k as f64).collect();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for &x in &pts {
            rows.push(vec![1.0, x]);
            rhs.push(x * x);
            rows.push(vec![-1.0, -x]);
            rhs.push(-x * x);
        }
        let (_, t_batch) = minimax_rows(&rows, &rhs, 1000).unwrap();
        let mut lp = MinimaxLp::new(2);
        for r in (0..rows.len()).step_by(7) {
            lp.push_row(&rows[r], rhs[r]);
        }
        let (_, t_partial) = lp.solve(1000).unwrap();
        for r in 0..rows.len() {
            if r % 7 != 0 {
                lp.push_row(&rows[r], rhs[r]);
            }
        }
        let (x, t) = lp.solve(1000).unwrap();
        assert!(t_partial <= t + 1e-12);
        assert!((t - t_batch).abs() < 1e-12 && (t - 0.5).abs() < 1e-12);
        assert!((x[0] - 0.5).abs() < 1e-12 && x[1].abs() < 1e-12);
    }
}
