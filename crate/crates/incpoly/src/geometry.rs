//! Compact sets as finite sample clouds, their dilations, and circular
//! integration contours.
//!
//! A [`CompactSetSample`] remembers the exact shapes it was sampled from, so
//! membership and distance queries stay exact while every "max over K"
//! quantity is taken over the samples.

use crate::error::{Error, Result};
use crate::par;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

pub type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetKind {
    Disc,
    AnnularArc,
    Segment,
    FinitePointSet,
    LatticeSquareUnion,
    ExplicitSamples,
}

/// Exact description of one piece of a compact set.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Closed disc, or only its boundary circle when `filled` is false.
    Disc { center: C64, radius: f64, filled: bool },
    /// Closed annular sector `r_in <= |z-c| <= r_out`, `t0 <= arg <= t1`.
    AnnularArc {
        center: C64,
        r_in: f64,
        r_out: f64,
        t0: f64,
        t1: f64,
    },
    Segment { a: C64, b: C64 },
    Point(C64),
    /// Closed axis-parallel square with lower-left corner `corner`.
    Square { corner: C64, side: f64 },
    Cloud(Vec<C64>),
}

impl Shape {
    /// Euclidean distance from `z` to the shape.
    pub fn dist(&self, z: C64) -> f64 {
        match self {
            Shape::Disc {
                center,
                radius,
                filled,
            } => {
                let d = (z - center).norm() - radius;
                if *filled {
                    d.max(0.0)
                } else {
                    d.abs()
                }
            }
            Shape::AnnularArc {
                center,
                r_in,
                r_out,
                t0,
                t1,
            } => {
                let w = z - center;
                let rho = w.norm();
                if t1 - t0 >= 2.0 * PI - 1e-12 || angle_in(w.arg(), *t0, *t1) {
                    (r_in - rho).max(rho - r_out).max(0.0)
                } else {
                    let e0 = C64::from_polar(1.0, *t0);
                    let e1 = C64::from_polar(1.0, *t1);
                    seg_dist(z, center + e0 * r_in, center + e0 * r_out)
                        .min(seg_dist(z, center + e1 * r_in, center + e1 * r_out))
                }
            }
            Shape::Segment { a, b } => seg_dist(z, *a, *b),
            Shape::Point(p) => (z - p).norm(),
            Shape::Square { corner, side } => {
                let dx = (corner.re - z.re).max(z.re - corner.re - side).max(0.0);
                let dy = (corner.im - z.im).max(z.im - corner.im - side).max(0.0);
                dx.hypot(dy)
            }
            Shape::Cloud(pts) => pts.iter().map(|p| (z - p).norm()).fold(f64::INFINITY, f64::min),
        }
    }
}

fn angle_in(a: f64, t0: f64, t1: f64) -> bool {
    let span = t1 - t0;
    let rel = (a - t0).rem_euclid(2.0 * PI);
    rel <= span + 1e-12
}

fn seg_dist(z: C64, a: C64, b: C64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (z - a).norm();
    }
    let t = ((z - a).re * d.re + (z - a).im * d.im) / len2;
    (z - (a + d * t.clamp(0.0, 1.0))).norm()
}

/// A discretised compact subset of the plane.
#[derive(Debug, Clone)]
pub struct CompactSetSample {
    pub kind: SetKind,
    pub boundary_samples: Vec<C64>,
    /// Optional extra samples strictly inside the set (interior grids).
    pub interior_samples: Vec<C64>,
    pub interior_probe: Option<C64>,
    pub resolution: f64,
    pub bounding_radius: f64,
    pub min_radius: f64,
    pub shapes: Vec<Shape>,
    /// The set is the closed `pad`-neighbourhood of the union of `shapes`.
    pub pad: f64,
}

/// JSON set descriptor: `{"kind": ..., "params": {...}, "resolution": r}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SetDescriptor {
    pub kind: String,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub resolution: Option<f64>,
}

impl SetDescriptor {
    pub fn disc(center: C64, radius: f64, resolution: f64) -> Self {
        SetDescriptor {
            kind: "disc".into(),
            params: serde_json::json!({"center": [center.re, center.im], "radius": radius}),
            resolution: Some(resolution),
        }
    }

    pub fn circle(center: C64, radius: f64, resolution: f64) -> Self {
        SetDescriptor {
            kind: "disc".into(),
            params: serde_json::json!({"center": [center.re, center.im], "radius": radius, "boundary_only": true}),
            resolution: Some(resolution),
        }
    }

    pub fn segment(a: C64, b: C64, resolution: f64) -> Self {
        SetDescriptor {
            kind: "segment".into(),
            params: serde_json::json!({"a": [a.re, a.im], "b": [b.re, b.im]}),
            resolution: Some(resolution),
        }
    }

    pub fn points(pts: &[C64]) -> Self {
        let v: Vec<[f64; 2]> = pts.iter().map(|p| [p.re, p.im]).collect();
        SetDescriptor {
            kind: "finite-point-set".into(),
            params: serde_json::json!({ "points": v }),
            resolution: None,
        }
    }
}

fn param_c64(p: &serde_json::Value, key: &str) -> Result<C64> {
    let v = p
        .get(key)
        .ok_or_else(|| Error::InvalidDescriptor(format!("missing parameter `{key}`")))?;
    parse_c64(v).ok_or_else(|| Error::InvalidDescriptor(format!("`{key}` must be [re, im] or a number")))
}

/// Parses `[re, im]` or a bare real number.
pub fn parse_c64(v: &serde_json::Value) -> Option<C64> {
    if let Some(x) = v.as_f64() {
        return Some(C64::new(x, 0.0));
    }
    let a = v.as_array()?;
    if a.len() != 2 {
        return None;
    }
    Some(C64::new(a[0].as_f64()?, a[1].as_f64()?))
}

fn param_f64(p: &serde_json::Value, key: &str) -> Result<f64> {
    p.get(key)
        .and_then(|v| v.as_f64())
        .ok_or_else(|| Error::InvalidDescriptor(format!("missing numeric parameter `{key}`")))
}

fn param_points(p: &serde_json::Value, key: &str) -> Result<Vec<C64>> {
    let arr = p
        .get(key)
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::InvalidDescriptor(format!("missing point list `{key}`")))?;
    arr.iter()
        .map(|v| parse_c64(v).ok_or_else(|| Error::InvalidDescriptor("points must be [re, im]".into())))
        .collect()
}

fn circle_points(center: C64, radius: f64, n: usize) -> Vec<C64> {
    (0..n)
        .map(|k| center + C64::from_polar(radius, 2.0 * PI * k as f64 / n as f64))
        .collect()
}

fn arc_points(center: C64, radius: f64, t0: f64, t1: f64, res: f64) -> Vec<C64> {
    let n = ((radius * (t1 - t0)) / res).ceil().max(1.0) as usize;
    (0..=n)
        .map(|k| center + C64::from_polar(radius, t0 + (t1 - t0) * k as f64 / n as f64))
        .collect()
}

fn line_points(a: C64, b: C64, res: f64) -> Vec<C64> {
    let n = ((b - a).norm() / res).ceil().max(1.0) as usize;
    (0..=n).map(|k| a + (b - a) * (k as f64 / n as f64)).collect()
}

fn default_resolution(desc: &SetDescriptor, scale: f64) -> f64 {
    desc.resolution.unwrap_or(scale * 2.0 * PI / 256.0)
}

/// Builds a sample cloud from a descriptor.
pub fn make_compact(desc: &SetDescriptor) -> Result<CompactSetSample> {
    let p = &desc.params;
    if let Some(r) = desc.resolution {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidDescriptor(format!("resolution must be positive, got {r}")));
        }
    }
    let (kind, shapes, boundary, interior, probe, resolution) = match desc.kind.as_str() {
        "disc" | "circle" => {
            let center = param_c64(p, "center")?;
            let radius = param_f64(p, "radius")?;
            if !(radius > 0.0) {
                return Err(Error::InvalidDescriptor(format!("radius must be positive, got {radius}")));
            }
            let filled = desc.kind == "disc"
                && !p.get("boundary_only").and_then(|v| v.as_bool()).unwrap_or(false);
            let res = default_resolution(desc, radius);
            let n = ((2.0 * PI * radius) / res).ceil().max(3.0) as usize;
            let boundary = circle_points(center, radius, n);
            let mut interior = Vec::new();
            if let Some(step) = p.get("interior_grid").and_then(|v| v.as_f64()) {
                if !(step > 0.0) {
                    return Err(Error::InvalidDescriptor("interior_grid must be positive".into()));
                }
                let m = (radius / step).floor() as i64;
                for i in -m..=m {
                    for j in -m..=m {
                        let w = C64::new(i as f64 * step, j as f64 * step);
                        if w.norm() < radius - 0.5 * step {
                            interior.push(center + w);
                        }
                    }
                }
            }
            let resolution = 2.0 * radius * (PI / n as f64).sin();
            (
                SetKind::Disc,
                vec![Shape::Disc {
                    center,
                    radius,
                    filled,
                }],
                boundary,
                interior,
                if filled { Some(center) } else { None },
                resolution,
            )
        }
        "annular-arc" => {
            let center = param_c64(p, "center")?;
            let r_in = param_f64(p, "r_in")?;
            let r_out = param_f64(p, "r_out")?;
            let t0 = p.get("t0").and_then(|v| v.as_f64()).unwrap_or(0.0);
            let t1 = p.get("t1").and_then(|v| v.as_f64()).unwrap_or(t0 + 2.0 * PI);
            if !(r_in >= 0.0 && r_out > r_in) || !(t1 > t0) {
                return Err(Error::InvalidDescriptor(
                    "annular arc needs 0 <= r_in < r_out and t0 < t1".into(),
                ));
            }
            let t1 = t1.min(t0 + 2.0 * PI);
            let res = default_resolution(desc, r_out);
            let full = t1 - t0 >= 2.0 * PI - 1e-12;
            let mut b = Vec::new();
            if full {
                let n = ((2.0 * PI * r_out) / res).ceil().max(3.0) as usize;
                b.extend(circle_points(center, r_out, n));
                if r_in > 0.0 {
                    let n = ((2.0 * PI * r_in) / res).ceil().max(3.0) as usize;
                    b.extend(circle_points(center, r_in, n));
                }
            } else {
                b.extend(arc_points(center, r_out, t0, t1, res));
                if r_in > 0.0 {
                    b.extend(arc_points(center, r_in, t0, t1, res));
                }
                for t in [t0, t1] {
                    let e = C64::from_polar(1.0, t);
                    let mut l = line_points(center + e * r_in, center + e * r_out, res);
                    l.pop();
                    l.remove(0);
                    b.extend(l);
                }
            }
            let mid = center + C64::from_polar(0.5 * (r_in + r_out), 0.5 * (t0 + t1));
            (
                SetKind::AnnularArc,
                vec![Shape::AnnularArc {
                    center,
                    r_in,
                    r_out,
                    t0,
                    t1,
                }],
                b,
                Vec::new(),
                Some(mid),
                res,
            )
        }
        "segment" => {
            let a = param_c64(p, "a")?;
            let b = param_c64(p, "b")?;
            if (b - a).norm() == 0.0 {
                return Err(Error::InvalidDescriptor("segment endpoints coincide".into()));
            }
            let res = default_resolution(desc, (b - a).norm());
            let pts = line_points(a, b, res);
            let actual = (b - a).norm() / (pts.len() - 1) as f64;
            (
                SetKind::Segment,
                vec![Shape::Segment { a, b }],
                pts,
                Vec::new(),
                None,
                actual,
            )
        }
        "finite-point-set" => {
            let pts = param_points(p, "points")?;
            if pts.is_empty() {
                return Err(Error::InvalidDescriptor("empty point list".into()));
            }
            (
                SetKind::FinitePointSet,
                pts.iter().map(|&z| Shape::Point(z)).collect(),
                pts,
                Vec::new(),
                None,
                0.0,
            )
        }
        "lattice-square-union" => {
            let arr = p
                .get("squares")
                .and_then(|v| v.as_array())
                .ok_or_else(|| Error::InvalidDescriptor("missing `squares`".into()))?;
            let mut squares = Vec::new();
            for s in arr {
                let a = s.as_array().filter(|a| a.len() == 3).ok_or_else(|| {
                    Error::InvalidDescriptor("square must be [x, y, side]".into())
                })?;
                let v: Vec<f64> = a.iter().filter_map(|x| x.as_f64()).collect();
                if v.len() != 3 || !(v[2] > 0.0) {
                    return Err(Error::InvalidDescriptor("square must be [x, y, side > 0]".into()));
                }
                squares.push((C64::new(v[0], v[1]), v[2]));
            }
            if squares.is_empty() {
                return Err(Error::InvalidDescriptor("empty square list".into()));
            }
            let res = default_resolution(desc, squares[0].1);
            return Ok(square_union(&squares, res));
        }
        "explicit-samples" => {
            let pts = param_points(p, "points")?;
            if pts.is_empty() {
                return Err(Error::InvalidDescriptor("empty sample list".into()));
            }
            let res = desc.resolution.unwrap_or(0.0);
            (
                SetKind::ExplicitSamples,
                vec![Shape::Cloud(pts.clone())],
                pts,
                Vec::new(),
                None,
                res,
            )
        }
        other => return Err(Error::InvalidDescriptor(format!("unknown kind `{other}`"))),
    };
    Ok(CompactSetSample::new(kind, shapes, boundary, interior, probe, resolution, 0.0))
}

/// Union of closed squares; boundary samples are the square perimeters with
/// points interior to the union removed.
pub fn square_union(squares: &[(C64, f64)], res: f64) -> CompactSetSample {
    let shapes: Vec<Shape> = squares
        .iter()
        .map(|&(corner, side)| Shape::Square { corner, side })
        .collect();
    let mut b = Vec::new();
    for &(c, s) in squares {
        let corners = [c, c + C64::new(s, 0.0), c + C64::new(s, s), c + C64::new(0.0, s)];
        for k in 0..4 {
            let mut l = line_points(corners[k], corners[(k + 1) % 4], res);
            l.pop();
            b.extend(l);
        }
    }
    let eps = 1e-9 * res;
    let boundary: Vec<C64> = b
        .into_iter()
        .filter(|&z| {
            // keep a perimeter point unless a small disc around it lies in the union
            let probes = [
                C64::new(eps, 0.0),
                C64::new(-eps, 0.0),
                C64::new(0.0, eps),
                C64::new(0.0, -eps),
            ];
            !probes
                .iter()
                .all(|d| shapes.iter().any(|s| s.dist(z + d * 1e3) == 0.0))
        })
        .collect();
    let mut uniq: Vec<C64> = Vec::with_capacity(boundary.len());
    for z in boundary {
        if !uniq.iter().any(|u| (u - z).norm() < 1e-12) {
            uniq.push(z);
        }
    }
    let probe = Some(squares[0].0 + C64::new(0.5 * squares[0].1, 0.5 * squares[0].1));
    CompactSetSample::new(SetKind::LatticeSquareUnion, shapes, uniq, Vec::new(), probe, res, 0.0)
}

/// Union of closed lattice squares `[a h, (a+1) h] x [b h, (b+1) h]`.
/// Boundary samples lie on the edges shared with unoccupied cells, `per_edge`
/// points per edge.
pub fn lattice_union(h: f64, cells: &[(i64, i64)], per_edge: usize) -> CompactSetSample {
    let occupied: std::collections::HashSet<(i64, i64)> = cells.iter().copied().collect();
    let per_edge = per_edge.max(1) as i64;
    // points on lattice lines, keyed in units of h / per_edge
    let mut keys = std::collections::BTreeSet::new();
    for &(a, b) in &occupied {
        let (x0, y0) = (a * per_edge, b * per_edge);
        let edges = [
            ((a, b - 1), (x0, y0), (1, 0)),
            ((a, b + 1), (x0, y0 + per_edge), (1, 0)),
            ((a - 1, b), (x0, y0), (0, 1)),
            ((a + 1, b), (x0 + per_edge, y0), (0, 1)),
        ];
        for (nb, start, dir) in edges {
            if occupied.contains(&nb) {
                continue;
            }
            for k in 0..=per_edge {
                keys.insert((start.0 + dir.0 * k, start.1 + dir.1 * k));
            }
        }
    }
    let unit = h / per_edge as f64;
    let boundary: Vec<C64> = keys
        .into_iter()
        .map(|(x, y)| C64::new(x as f64 * unit, y as f64 * unit))
        .collect();
    let mut sorted: Vec<(i64, i64)> = occupied.into_iter().collect();
    sorted.sort_unstable();
    let shapes: Vec<Shape> = sorted
        .iter()
        .map(|&(a, b)| Shape::Square {
            corner: C64::new(a as f64 * h, b as f64 * h),
            side: h,
        })
        .collect();
    let probe = sorted
        .first()
        .map(|&(a, b)| C64::new((a as f64 + 0.5) * h, (b as f64 + 0.5) * h));
    CompactSetSample::new(SetKind::LatticeSquareUnion, shapes, boundary, Vec::new(), probe, unit, 0.0)
}

impl CompactSetSample {
    fn new(
        kind: SetKind,
        shapes: Vec<Shape>,
        boundary_samples: Vec<C64>,
        interior_samples: Vec<C64>,
        interior_probe: Option<C64>,
        resolution: f64,
        pad: f64,
    ) -> Self {
        let all = boundary_samples.iter().chain(interior_samples.iter());
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for z in all {
            lo = lo.min(z.norm());
            hi = hi.max(z.norm());
        }
        CompactSetSample {
            kind,
            boundary_samples,
            interior_samples,
            interior_probe,
            resolution,
            bounding_radius: hi,
            min_radius: lo,
            shapes,
            pad,
        }
    }

    /// Boundary samples followed by interior samples.
    pub fn all_samples(&self) -> Vec<C64> {
        let mut v = self.boundary_samples.clone();
        v.extend_from_slice(&self.interior_samples);
        v
    }

    pub fn len(&self) -> usize {
        self.boundary_samples.len() + self.interior_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Exact distance from `z` to the set (zero inside).
    pub fn dist(&self, z: C64) -> f64 {
        let d = self.shapes.iter().map(|s| s.dist(z)).fold(f64::INFINITY, f64::min);
        (d - self.pad).max(0.0)
    }

    /// How far `z` lies inside the region, measured from the outer pad boundary.
    /// Zero outside and for sets without shapes.
    pub fn depth(&self, z: C64) -> f64 {
        let d = self.shapes.iter().map(|s| s.dist(z)).fold(f64::INFINITY, f64::min);
        if d.is_finite() {
            (self.pad - d).max(0.0)
        } else {
            0.0
        }
    }

    pub fn contains(&self, z: C64, tol: f64) -> bool {
        self.dist(z) <= tol
    }

    /// Arithmetic mean of the samples.
    pub fn centroid(&self) -> C64 {
        let s = self.all_samples();
        s.iter().sum::<C64>() / s.len() as f64
    }

    /// `Some((center, radius))` when the set is exactly one closed disc.
    pub fn as_disc(&self) -> Option<(C64, f64)> {
        match self.shapes.as_slice() {
            [Shape::Disc { center, radius, .. }] => Some((*center, radius + self.pad)),
            [Shape::Point(p)] if self.pad > 0.0 => Some((*p, self.pad)),
            _ => None,
        }
    }

    /// `Some((a, b))` when the set is exactly one segment.
    pub fn as_segment(&self) -> Option<(C64, C64)> {
        match self.shapes.as_slice() {
            [Shape::Segment { a, b }] if self.pad == 0.0 => Some((*a, *b)),
            _ => None,
        }
    }

    /// Union of two sample clouds.
    pub fn union(&self, other: &CompactSetSample) -> CompactSetSample {
        let mut shapes = if self.pad == 0.0 {
            self.shapes.clone()
        } else {
            vec![Shape::Cloud(self.all_samples())]
        };
        if other.pad == 0.0 {
            shapes.extend(other.shapes.iter().cloned());
        } else {
            shapes.push(Shape::Cloud(other.all_samples()));
        }
        let mut b = self.boundary_samples.clone();
        b.extend_from_slice(&other.boundary_samples);
        let mut i = self.interior_samples.clone();
        i.extend_from_slice(&other.interior_samples);
        let kind = if self.kind == other.kind {
            self.kind
        } else {
            SetKind::ExplicitSamples
        };
        CompactSetSample::new(
            kind,
            shapes,
            b,
            i,
            self.interior_probe,
            self.resolution.max(other.resolution),
            0.0,
        )
    }

    /// Rotation about the origin by `angle`.
    pub fn rotate(&self, angle: f64) -> CompactSetSample {
        let e = C64::from_polar(1.0, angle);
        let rot = |z: &C64| z * e;
        let shapes = self
            .shapes
            .iter()
            .map(|s| match s {
                Shape::Disc {
                    center,
                    radius,
                    filled,
                } => Shape::Disc {
                    center: center * e,
                    radius: *radius,
                    filled: *filled,
                },
                Shape::AnnularArc {
                    center,
                    r_in,
                    r_out,
                    t0,
                    t1,
                } => Shape::AnnularArc {
                    center: center * e,
                    r_in: *r_in,
                    r_out: *r_out,
                    t0: t0 + angle,
                    t1: t1 + angle,
                },
                Shape::Segment { a, b } => Shape::Segment { a: a * e, b: b * e },
                Shape::Point(p) => Shape::Point(p * e),
                Shape::Square { .. } => Shape::Cloud(self.all_samples().iter().map(rot).collect()),
                Shape::Cloud(v) => Shape::Cloud(v.iter().map(rot).collect()),
            })
            .collect();
        CompactSetSample::new(
            self.kind,
            shapes,
            self.boundary_samples.iter().map(rot).collect(),
            self.interior_samples.iter().map(rot).collect(),
            self.interior_probe.map(|z| z * e),
            self.resolution,
            self.pad,
        )
    }
}

/// Closed `eps`-neighbourhood of `k`, sampled at the resolution of `k`
/// (or `2 pi eps / 128` for finite sets).
pub fn dilate(k: &CompactSetSample, eps: f64) -> Result<CompactSetSample> {
    let res = if k.resolution > 0.0 {
        k.resolution
    } else {
        2.0 * PI * eps / 128.0
    };
    dilate_with(k, eps, res)
}

/// Closed `eps`-neighbourhood of `k` with an explicit output resolution.
///
/// Candidates are placed on circles of radius `eps` around every base sample;
/// a candidate survives when its exact distance to the base region is at
/// least `eps - res_K^2 / (4 eps)` less the depth of its base sample, where
/// `res_K` is the base sample spacing. Survivors lie within that slack of the
/// true boundary.
pub fn dilate_with(k: &CompactSetSample, eps: f64, res: f64) -> Result<CompactSetSample> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("dilation radius must be positive, got {eps}")));
    }
    if !(res > 0.0) {
        return Err(Error::InvalidArgument("resolution must be positive".into()));
    }
    let base: Vec<C64> = k.boundary_samples.clone();
    let n_ang = ((2.0 * PI * eps) / res).ceil().max(16.0) as usize;
    let keep_tol = eps * (1.0 - 1e-9) - k.resolution * k.resolution / (4.0 * eps);
    let kept: Vec<Vec<C64>> = par::map_slice(&base, |&s| {
        let tol = keep_tol - k.depth(s);
        (0..n_ang)
            .map(|j| s + C64::from_polar(eps, 2.0 * PI * j as f64 / n_ang as f64))
            .filter(|&q| k.dist(q) >= tol)
            .collect()
    });
    let samples: Vec<C64> = kept.into_iter().flatten().collect();
    let samples = if samples.is_empty() {
        // degenerate sweep: fall back to the outermost candidate ring of the first sample
        vec![base[0] + eps]
    } else {
        samples
    };
    let gap = 2.0 * eps * (PI / n_ang as f64).sin();
    Ok(CompactSetSample::new(
        k.kind,
        k.shapes.clone(),
        samples,
        Vec::new(),
        k.interior_probe,
        gap,
        k.pad + eps,
    ))
}

/// Hausdorff distance between two sample clouds.
pub fn hausdorff(a: &[C64], b: &[C64]) -> f64 {
    let one = |x: &[C64], y: &[C64]| {
        par::map_slice(x, |p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .into_iter()
            .fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

/// Trapezoidal quadrature on a closed curve.
#[derive(Debug, Clone)]
pub struct ContourQuadrature {
    pub nodes: Vec<C64>,
    pub weights: Vec<C64>,
    pub length: f64,
    pub min_abs: f64,
    pub dist_to: BTreeMap<String, f64>,
    /// Circle parameters when the contour is a circle.
    pub circle: Option<(C64, f64)>,
}

impl ContourQuadrature {
    /// Circle `|z - center| = radius` with `n` equispaced nodes.
    pub fn circle(center: C64, radius: f64, n: usize) -> Self {
        let nodes = circle_points(center, radius, n);
        let weights = nodes
            .iter()
            .map(|&z| (z - center) * C64::new(0.0, 2.0 * PI / n as f64))
            .collect();
        let min_abs = nodes.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        ContourQuadrature {
            nodes,
            weights,
            length: 2.0 * PI * radius,
            min_abs,
            dist_to: BTreeMap::new(),
            circle: Some((center, radius)),
        }
    }

    /// Closed polygonal path through `nodes` (trapezoidal weights).
    pub fn from_path(nodes: Vec<C64>) -> Self {
        let n = nodes.len();
        let weights = (0..n)
            .map(|k| (nodes[(k + 1) % n] - nodes[(k + n - 1) % n]) * 0.5)
            .collect();
        let length = (0..n).map(|k| (nodes[(k + 1) % n] - nodes[k]).norm()).sum();
        let min_abs = nodes.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        ContourQuadrature {
            nodes,
            weights,
            length,
            min_abs,
            dist_to: BTreeMap::new(),
            circle: None,
        }
    }

    /// Quadrature of `f` along the contour.
    pub fn integrate<F: Fn(C64) -> C64>(&self, f: F) -> C64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| f(z) * w).sum()
    }

    /// Discrete winding number around `w`.
    pub fn winding(&self, w: C64) -> f64 {
        (self.integrate(|z| 1.0 / (z - w)) / C64::new(0.0, 2.0 * PI)).re
    }

    /// Distance from the contour nodes to a sample set.
    pub fn distance_to(&self, k: &CompactSetSample) -> f64 {
        let s = k.all_samples();
        par::map_slice(&self.nodes, |z| s.iter().map(|p| (z - p).norm()).fold(f64::INFINITY, f64::min))
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    /// Records the distance to `k` under `name`.
    pub fn register(&mut self, name: &str, k: &CompactSetSample) {
        let d = self.distance_to(k);
        self.dist_to.insert(name.to_string(), d);
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

/// Circle around the centroid of `enclose` that winds once around it, not at
/// all around each excluded set, and stays at modulus `>= min_abs_floor`.
/// The radius is the midpoint of the feasible interval unless `radius` is given.
pub fn make_contour(
    enclose: &CompactSetSample,
    exclude: &[CompactSetSample],
    min_abs_floor: f64,
    n_nodes: usize,
    radius: Option<f64>,
) -> Result<ContourQuadrature> {
    let c = enclose.centroid();
    let lo = enclose
        .all_samples()
        .iter()
        .map(|z| (z - c).norm())
        .fold(0.0, f64::max)
        .max(enclose.shapes.iter().map(|s| far_dist(s, c)).fold(0.0, f64::max) + enclose.pad);
    let mut hi = c.norm() - min_abs_floor;
    for e in exclude {
        let d_region = e.dist(c);
        let d_samples = e
            .all_samples()
            .iter()
            .map(|z| (z - c).norm())
            .fold(f64::INFINITY, f64::min);
        hi = hi.min(d_region).min(d_samples);
    }
    if !(hi > lo) {
        return Err(Error::NoSeparatingCircle(format!(
            "need radius above {lo:.4} and below {hi:.4}"
        )));
    }
    let r = match radius {
        Some(r) if r > lo && r < hi => r,
        Some(r) => {
            return Err(Error::NoSeparatingCircle(format!(
                "requested radius {r} outside ({lo:.4}, {hi:.4})"
            )))
        }
        None => 0.5 * (lo + hi),
    };
    let mut q = ContourQuadrature::circle(c, r, n_nodes.max(16));
    let probe_in = enclose.interior_probe.unwrap_or(enclose.boundary_samples[0]);
    if (q.winding(probe_in) - 1.0).abs() > 1e-6 {
        return Err(Error::NoSeparatingCircle("winding number around the enclosed set is not 1".into()));
    }
    for e in exclude {
        if q.winding(e.interior_probe.unwrap_or(e.boundary_samples[0])).abs() > 1e-6 {
            return Err(Error::NoSeparatingCircle("winding number around an excluded set is not 0".into()));
        }
    }
    q.register("enclose", enclose);
    for (i, e) in exclude.iter().enumerate() {
        q.register(&format!("exclude{i}"), e);
    }
    Ok(q)
}

fn far_dist(s: &Shape, c: C64) -> f64 {
    match s {
        Shape::Disc { center, radius, .. } => (center - c).norm() + radius,
        Shape::AnnularArc { center, r_out, .. } => (center - c).norm() + r_out,
        Shape::Segment { a, b } => (a - c).norm().max((b - c).norm()),
        Shape::Point(p) => (p - c).norm(),
        Shape::Square { corner, side } => [0.0, 1.0]
            .iter()
            .flat_map(|&x| [0.0, 1.0].map(move |y| corner + C64::new(x * side, y * side)))
            .map(|v| (v - c).norm())
            .fold(0.0, f64::max),
        Shape::Cloud(v) => v.iter().map(|p| (p - c).norm()).fold(0.0, f64::max),
    }
}

/// Flood fill from the far field on a padded grid. Returns true iff every
/// grid cell outside the set is reached.
pub fn connected_complement_check(k: &CompactSetSample, grid_step: f64) -> bool {
    let s = k.all_samples();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for z in &s {
        x0 = x0.min(z.re);
        x1 = x1.max(z.re);
        y0 = y0.min(z.im);
        y1 = y1.max(z.im);
    }
    let margin = 3.0 * grid_step;
    x0 -= margin;
    y0 -= margin;
    let nx = (((x1 + margin) - x0) / grid_step).ceil() as usize + 1;
    let ny = (((y1 + margin) - y0) / grid_step).ceil() as usize + 1;
    let tol = 0.75 * grid_step;
    let blocked: Vec<bool> = par::map_range(nx * ny, |idx| {
        let (i, j) = (idx % nx, idx / nx);
        let z = C64::new(x0 + i as f64 * grid_step, y0 + j as f64 * grid_step);
        k.dist(z) <= tol
    });
    let mut seen = vec![false; nx * ny];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(idx) = stack.pop() {
        let (i, j) = (idx % nx, idx / nx);
        let mut push = |ii: usize, jj: usize| {
            let n = jj * nx + ii;
            if !blocked[n] && !seen[n] {
                seen[n] = true;
                stack.push(n);
            }
        };
        if i > 0 {
            push(i - 1, j);
        }
        if i + 1 < nx {
            push(i + 1, j);
        }
        if j > 0 {
            push(i, j - 1);
        }
        if j + 1 < ny {
            push(i, j + 1);
        }
    }
    (0..nx * ny).all(|n| blocked[n] || seen[n])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn disc_sample_count_and_radii() {
        let k = make_compact(&SetDescriptor::disc(c(2.0, 0.0), 0.5, 0.01)).unwrap();
        assert!((314..=316).contains(&k.boundary_samples.len()));
        // extremes of the sample cloud sit within one resolution of the circle's
        assert!((k.min_radius - 1.5).abs() <= k.resolution);
        assert!((k.bounding_radius - 2.5).abs() <= k.resolution);
        assert!(k.resolution <= 0.01);
    }

    #[test]
    fn finite_set_has_zero_resolution() {
        let k = make_compact(&SetDescriptor::points(&[c(1.5, 0.0), c(2.0, 1.0)])).unwrap();
        assert_eq!(k.boundary_samples.len(), 2);
        assert_eq!(k.resolution, 0.0);
    }

    #[test]
    fn segment_radii() {
        let k = make_compact(&SetDescriptor::segment(c(-2.0, 0.0), c(2.0, 0.0), 0.1)).unwrap();
        assert_eq!(k.min_radius, 0.0);
        assert_eq!(k.bounding_radius, 2.0);
    }

    #[test]
    fn degenerate_descriptors_fail() {
        assert!(make_compact(&SetDescriptor::disc(c(0.0, 0.0), -1.0, 0.1)).is_err());
        assert!(make_compact(&SetDescriptor::points(&[])).is_err());
        let bad = SetDescriptor {
            kind: "blob".into(),
            params: serde_json::json!({}),
            resolution: None,
        };
        assert!(make_compact(&bad).is_err());
    }

    #[test]
    fn dilate_point_is_circle() {
        let k = make_compact(&SetDescriptor::points(&[c(1.0, 0.0)])).unwrap();
        let d = dilate(&k, 0.5).unwrap();
        for z in &d.boundary_samples {
            assert!(((z - c(1.0, 0.0)).norm() - 0.5).abs() < 1e-12);
        }
        assert!(d.bounding_radius <= k.bounding_radius + 0.5 + 1e-12);
    }

    #[test]
    fn dilate_two_far_points_gives_two_circles() {
        let k = make_compact(&SetDescriptor::points(&[c(0.0, 0.0), c(5.0, 0.0)])).unwrap();
        let d = dilate(&k, 0.1).unwrap();
        let near0 = d.boundary_samples.iter().filter(|z| z.norm() < 1.0).count();
        assert_eq!(near0 * 2, d.boundary_samples.len());
        assert!(connected_complement_check(&d, 0.02));
    }

    #[test]
    fn contour_examples() {
        let k = make_compact(&SetDescriptor::disc(c(3.0, 0.0), 0.2, 0.01)).unwrap();
        let l = make_compact(&SetDescriptor::disc(c(0.0, 0.0), 1.0, 0.01)).unwrap();
        let g = make_contour(&k, std::slice::from_ref(&l), 1.4, 256, None).unwrap();
        let (cc, r) = g.circle.unwrap();
        assert!((cc - c(3.0, 0.0)).norm() < 1e-9);
        assert!(r > 0.2 && r < 1.8);
        assert!(g.min_abs >= 1.4 - 1e-12);
        // brute-force winding at 360 probes of each set
        for t in 0..360 {
            let e = C64::from_polar(1.0, 2.0 * PI * t as f64 / 360.0);
            assert!((g.winding(c(3.0, 0.0) + e * 0.2) - 1.0).abs() < 1e-8);
            assert!(g.winding(e).abs() < 1e-8);
        }
        let k2 = make_compact(&SetDescriptor::disc(c(2.0, 0.0), 0.5, 0.01)).unwrap();
        let g2 = make_contour(&k2, &[], 1.0, 128, None).unwrap();
        assert!(g2.min_abs >= 1.0 - 1e-12);
        let overlap = make_compact(&SetDescriptor::disc(c(2.5, 0.0), 0.5, 0.01)).unwrap();
        assert!(matches!(
            make_contour(&k2, &[overlap], 0.0, 128, None),
            Err(Error::NoSeparatingCircle(_))
        ));
    }

    #[test]
    fn closed_contour_integrals() {
        let g = ContourQuadrature::circle(c(0.5, -0.2), 1.3, 512);
        let total: C64 = g.weights.iter().sum();
        assert!(total.norm() <= 1e-12 * g.length);
        assert!((g.winding(c(0.4, 0.1)) - 1.0).abs() < 1e-8);
        assert!(g.winding(c(3.0, 0.0)).abs() < 1e-8);
    }

    #[test]
    fn complement_connectivity() {
        let disc = make_compact(&SetDescriptor::disc(c(0.0, 0.0), 1.0, 0.05)).unwrap();
        assert!(connected_complement_check(&disc, 0.05));
        let ring = make_compact(&SetDescriptor {
            kind: "annular-arc".into(),
            params: serde_json::json!({"center": [0.0, 0.0], "r_in": 0.5, "r_out": 1.0}),
            resolution: Some(0.05),
        })
        .unwrap();
        assert!(!connected_complement_check(&ring, 0.05));
        let two = make_compact(&SetDescriptor::disc(c(3.0, 0.0), 0.5, 0.05))
            .unwrap()
            .union(&disc);
        assert!(connected_complement_check(&two, 0.05));
    }
}
