//! Geometry of the open sets used as domains and target regions.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of `R^d` with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidShape("point has no coordinates".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidShape(format!("non-finite coordinate in {coords:?}")));
        }
        Ok(Self(coords))
    }

    pub fn origin(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Vec<f64> {
        p.0
    }
}

#[inline]
pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `A(center, r_inner, r_outer) = {y : r_inner <= |y - center| < r_outer}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnulusSpec {
    pub center: Point,
    pub r_inner: f64,
    pub r_outer: f64,
}

impl AnnulusSpec {
    pub fn new(center: Point, r_inner: f64, r_outer: f64) -> Result<Self> {
        let a = Self { center, r_inner, r_outer };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_inner >= 0.0 && self.r_inner < self.r_outer) {
            return Err(Error::InvalidShape(format!(
                "annulus needs 0 <= r_inner < r_outer, got {} and {}",
                self.r_inner, self.r_outer
            )));
        }
        Ok(())
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        let r = dist(p, &self.center);
        r >= self.r_inner && r < self.r_outer
    }

    /// Lebesgue measure of the annulus.
    pub fn volume(&self) -> f64 {
        let d = self.center.dim() as i32;
        crate::kernels::sphere_surface_area(self.center.dim()) / d as f64
            * (self.r_outer.powi(d) - self.r_inner.powi(d))
    }
}

/// A bounded open subset of `R^d`.
///
/// Besides the serialised variants, `{"type": "counterexample", "d": d}` is
/// accepted on input and read as [`counterexample_domain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields, try_from = "DomainSpec")]
pub enum DomainShape {
    Ball {
        center: Point,
        radius: f64,
    },
    /// Open annulus `r_inner < |y - center| < r_outer`.
    Annulus {
        center: Point,
        r_inner: f64,
        r_outer: f64,
    },
    #[serde(rename = "box")]
    AxisBox {
        low: Point,
        high: Point,
    },
    /// Convex polytope `{x : normal_i · x < offset_i}`.
    Polytope {
        normals: Vec<Point>,
        offsets: Vec<f64>,
        interior: Point,
    },
    /// An open box with a closed axis-aligned slab removed.
    BoxMinusSlab {
        low: Point,
        high: Point,
        slab_low: Point,
        slab_high: Point,
    },
    #[serde(rename = "intersect")]
    Intersection {
        shape: Box<DomainShape>,
        center: Point,
        radius: f64,
    },
    Union {
        shapes: Vec<DomainShape>,
    },
}

/// Input form of [`DomainShape`].
#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum DomainSpec {
    Ball { center: Point, radius: f64 },
    Annulus { center: Point, r_inner: f64, r_outer: f64 },
    #[serde(rename = "box")]
    AxisBox { low: Point, high: Point },
    Polytope { normals: Vec<Point>, offsets: Vec<f64>, interior: Point },
    BoxMinusSlab { low: Point, high: Point, slab_low: Point, slab_high: Point },
    #[serde(rename = "intersect")]
    Intersection { shape: Box<DomainShape>, center: Point, radius: f64 },
    Union { shapes: Vec<DomainShape> },
    Counterexample { d: usize },
}

impl TryFrom<DomainSpec> for DomainShape {
    type Error = Error;
    fn try_from(s: DomainSpec) -> Result<Self> {
        Ok(match s {
            DomainSpec::Ball { center, radius } => DomainShape::Ball { center, radius },
            DomainSpec::Annulus { center, r_inner, r_outer } => DomainShape::Annulus { center, r_inner, r_outer },
            DomainSpec::AxisBox { low, high } => DomainShape::AxisBox { low, high },
            DomainSpec::Polytope { normals, offsets, interior } => DomainShape::Polytope { normals, offsets, interior },
            DomainSpec::BoxMinusSlab { low, high, slab_low, slab_high } => {
                DomainShape::BoxMinusSlab { low, high, slab_low, slab_high }
            }
            DomainSpec::Intersection { shape, center, radius } => DomainShape::Intersection { shape, center, radius },
            DomainSpec::Union { shapes } => DomainShape::Union { shapes },
            DomainSpec::Counterexample { d } => counterexample_domain(d)?,
        })
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidShape(msg.into()))
}

impl DomainShape {
    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        let s = DomainShape::Ball { center, radius };
        s.validate()?;
        Ok(s)
    }

    pub fn axis_box(low: Point, high: Point) -> Result<Self> {
        let s = DomainShape::AxisBox { low, high };
        s.validate()?;
        Ok(s)
    }

    pub fn polytope(normals: Vec<Point>, offsets: Vec<f64>, interior: Point) -> Result<Self> {
        let s = DomainShape::Polytope { normals, offsets, interior };
        s.validate()?;
        Ok(s)
    }

    pub fn intersect(shape: DomainShape, center: Point, radius: f64) -> Result<Self> {
        let s = DomainShape::Intersection { shape: Box::new(shape), center, radius };
        s.validate()?;
        Ok(s)
    }

    pub fn union(shapes: Vec<DomainShape>) -> Result<Self> {
        let s = DomainShape::Union { shapes };
        s.validate()?;
        Ok(s)
    }

    /// The open unit square `(0, 1)^2` as a polytope.
    pub fn unit_square() -> Self {
        let p = |v: [f64; 2]| Point(v.to_vec());
        DomainShape::Polytope {
            normals: vec![p([-1.0, 0.0]), p([1.0, 0.0]), p([0.0, -1.0]), p([0.0, 1.0])],
            offsets: vec![0.0, 1.0, 0.0, 1.0],
            interior: p([0.5, 0.5]),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainShape::Ball { center, .. }
            | DomainShape::Annulus { center, .. }
            | DomainShape::Intersection { center, .. } => center.dim(),
            DomainShape::AxisBox { low, .. } | DomainShape::BoxMinusSlab { low, .. } => low.dim(),
            DomainShape::Polytope { interior, .. } => interior.dim(),
            DomainShape::Union { shapes } => shapes.first().map_or(0, |s| s.dim()),
        }
    }

    /// Checks the structural invariants of the shape.
    pub fn validate(&self) -> Result<()> {
        match self {
            DomainShape::Ball { radius, .. } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return invalid(format!("ball radius must be positive, got {radius}"));
                }
            }
            DomainShape::Annulus { r_inner, r_outer, .. } => {
                if !(*r_inner >= 0.0 && r_inner < r_outer && r_outer.is_finite()) {
                    return invalid(format!(
                        "annulus needs 0 <= r_inner < r_outer, got {r_inner} and {r_outer}"
                    ));
                }
            }
            DomainShape::AxisBox { low, high } => check_box(low, high)?,
            DomainShape::Polytope { normals, offsets, interior } => {
                let d = interior.dim();
                if normals.len() != offsets.len() {
                    return invalid("polytope needs one offset per normal");
                }
                if normals.len() <= d {
                    return invalid("a bounded polytope needs more than d halfspaces");
                }
                for n in normals {
                    if n.dim() != d {
                        return Err(Error::DimensionMismatch { expected: d, got: n.dim() });
                    }
                    if norm(n) == 0.0 {
                        return invalid("polytope normal must be nonzero");
                    }
                }
                if offsets.iter().any(|o| !o.is_finite()) {
                    return invalid("polytope offsets must be finite");
                }
                for (n, b) in normals.iter().zip(offsets) {
                    if !(dot(n, interior) < *b) {
                        return invalid("supplied interior point violates a halfspace");
                    }
                }
                if !polytope_is_bounded(normals) {
                    return invalid("polytope is unbounded");
                }
            }
            DomainShape::BoxMinusSlab { low, high, slab_low, slab_high } => {
                check_box(low, high)?;
                check_dim(low.dim(), slab_low)?;
                check_dim(low.dim(), slab_high)?;
                let d = low.dim();
                for i in 0..d {
                    if !(slab_low[i] <= slab_high[i]) {
                        return invalid("slab needs slab_low <= slab_high");
                    }
                }
                if !(slab_low[d - 1] > low[d - 1] && slab_high[d - 1] < high[d - 1]) {
                    return invalid("slab must lie strictly inside the box in the last coordinate");
                }
            }
            DomainShape::Intersection { shape, center, radius } => {
                shape.validate()?;
                check_dim(shape.dim(), center)?;
                if !(*radius > 0.0 && radius.is_finite()) {
                    return invalid(format!("ball radius must be positive, got {radius}"));
                }
            }
            DomainShape::Union { shapes } => {
                let Some(first) = shapes.first() else {
                    return invalid("union of no shapes");
                };
                for s in shapes {
                    s.validate()?;
                    if s.dim() != first.dim() {
                        return Err(Error::DimensionMismatch { expected: first.dim(), got: s.dim() });
                    }
                }
            }
        }
        if self.dim() < 1 {
            return invalid("shape has dimension 0");
        }
        Ok(())
    }

    /// Whether `p` lies in the open set.
    pub fn contains(&self, p: &[f64]) -> Result<bool> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: p.len() });
        }
        Ok(self.contains_unchecked(p))
    }

    /// [`DomainShape::contains`] without the dimension check.
    pub fn contains_unchecked(&self, p: &[f64]) -> bool {
        match self {
            DomainShape::Ball { center, radius } => dist2(p, center) < radius * radius,
            DomainShape::Annulus { center, r_inner, r_outer } => {
                let r2 = dist2(p, center);
                r2 > r_inner * r_inner && r2 < r_outer * r_outer
            }
            DomainShape::AxisBox { low, high } => in_open_box(p, low, high),
            DomainShape::Polytope { normals, offsets, .. } => {
                normals.iter().zip(offsets).all(|(n, b)| dot(n, p) < *b)
            }
            DomainShape::BoxMinusSlab { low, high, slab_low, slab_high } => {
                in_open_box(p, low, high) && !in_closed_box(p, slab_low, slab_high)
            }
            DomainShape::Intersection { shape, center, radius } => {
                dist2(p, center) < radius * radius && shape.contains_unchecked(p)
            }
            DomainShape::Union { shapes } => shapes.iter().any(|s| s.contains_unchecked(p)),
        }
    }

    /// A positive lower bound on `dist(p, ∂D)` for `p` in the domain; exact for
    /// every shape except unions and intersections.
    pub fn boundary_distance(&self, p: &[f64]) -> Result<f64> {
        if !self.contains(p)? {
            return Err(Error::PointNotInterior);
        }
        Ok(self.boundary_distance_unchecked(p))
    }

    /// [`DomainShape::boundary_distance`] for a point known to be inside.
    pub fn boundary_distance_unchecked(&self, p: &[f64]) -> f64 {
        match self {
            DomainShape::Ball { center, radius } => radius - dist(p, center),
            DomainShape::Annulus { center, r_inner, r_outer } => {
                let r = dist(p, center);
                (r - r_inner).min(r_outer - r)
            }
            DomainShape::AxisBox { low, high } => box_inner_distance(p, low, high),
            DomainShape::Polytope { normals, offsets, .. } => normals
                .iter()
                .zip(offsets)
                .map(|(n, b)| (b - dot(n, p)) / norm(n))
                .fold(f64::INFINITY, f64::min),
            DomainShape::BoxMinusSlab { low, high, slab_low, slab_high } => {
                let outside: f64 = p
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| {
                        let e = (slab_low[i] - x).max(x - slab_high[i]).max(0.0);
                        e * e
                    })
                    .sum();
                box_inner_distance(p, low, high).min(outside.sqrt())
            }
            DomainShape::Intersection { shape, center, radius } => {
                shape.boundary_distance_unchecked(p).min(radius - dist(p, center))
            }
            DomainShape::Union { shapes } => shapes
                .iter()
                .filter(|s| s.contains_unchecked(p))
                .map(|s| s.boundary_distance_unchecked(p))
                .fold(0.0, f64::max),
        }
    }

    /// A ball containing the shape: minimal for balls and annuli, circumscribed
    /// for boxes, and around the vertex centroid for polytopes.
    pub fn bounding_ball(&self) -> (Point, f64) {
        match self {
            DomainShape::Ball { center, radius } => (center.clone(), *radius),
            DomainShape::Annulus { center, r_outer, .. } => (center.clone(), *r_outer),
            DomainShape::AxisBox { low, high } | DomainShape::BoxMinusSlab { low, high, .. } => {
                let c: Vec<f64> = low.iter().zip(high.iter()).map(|(a, b)| 0.5 * (a + b)).collect();
                (Point(c), 0.5 * dist(low, high))
            }
            DomainShape::Polytope { normals, offsets, .. } => {
                let verts = polytope_vertices(normals, offsets);
                let d = normals[0].dim();
                let mut c = vec![0.0; d];
                for v in &verts {
                    for i in 0..d {
                        c[i] += v[i] / verts.len() as f64;
                    }
                }
                let r = verts.iter().map(|v| dist(v, &c)).fold(0.0, f64::max);
                (Point(c), r)
            }
            DomainShape::Intersection { shape, center, radius } => {
                let (c, r) = shape.bounding_ball();
                if r <= *radius {
                    (c, r)
                } else {
                    (center.clone(), *radius)
                }
            }
            DomainShape::Union { shapes } => {
                let balls: Vec<(Point, f64)> = shapes.iter().map(|s| s.bounding_ball()).collect();
                let d = self.dim();
                let mut c = vec![0.0; d];
                for (bc, _) in &balls {
                    for i in 0..d {
                        c[i] += bc[i] / balls.len() as f64;
                    }
                }
                let r = balls.iter().map(|(bc, br)| dist(bc, &c) + br).fold(0.0, f64::max);
                (Point(c), r)
            }
        }
    }
}

fn check_dim(d: usize, p: &Point) -> Result<()> {
    if p.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: p.dim() });
    }
    Ok(())
}

fn check_box(low: &Point, high: &Point) -> Result<()> {
    check_dim(low.dim(), high)?;
    if low.iter().zip(high.iter()).any(|(a, b)| !(a < b)) {
        return invalid("box needs low < high componentwise");
    }
    Ok(())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn in_open_box(p: &[f64], low: &[f64], high: &[f64]) -> bool {
    p.iter().zip(low).zip(high).all(|((x, a), b)| x > a && x < b)
}

#[inline]
fn in_closed_box(p: &[f64], low: &[f64], high: &[f64]) -> bool {
    p.iter().zip(low).zip(high).all(|((x, a), b)| x >= a && x <= b)
}

#[inline]
fn box_inner_distance(p: &[f64], low: &[f64], high: &[f64]) -> f64 {
    p.iter()
        .zip(low)
        .zip(high)
        .map(|((x, a), b)| (x - a).min(b - x))
        .fold(f64::INFINITY, f64::min)
}

/// Solves the square system `m x = rhs` by Gaussian elimination with partial
/// pivoting; `None` when numerically singular.
fn solve(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-12 * scale {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - s) / m[row][row];
    }
    Some(x)
}

/// All index subsets of size `k` from `0..n`.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// A polyhedron `{N x < b}` is bounded iff its recession cone `{N v <= 0}` is
/// trivial. With `N` of full rank the cone is pointed, so it is nontrivial iff
/// one of its candidate extreme rays (kernels of `d - 1` rows) lies in it.
fn polytope_is_bounded(normals: &[Point]) -> bool {
    let d = normals[0].dim();
    let rank_full = combinations(normals.len(), d).into_iter().any(|idx| {
        let m: Vec<Vec<f64>> = idx.iter().map(|&i| normals[i].to_vec()).collect();
        solve(m, vec![1.0; d]).is_some()
    });
    if !rank_full {
        return false;
    }
    if d == 1 {
        let pos = normals.iter().any(|n| n[0] > 0.0);
        let neg = normals.iter().any(|n| n[0] < 0.0);
        return pos && neg;
    }
    for idx in combinations(normals.len(), d - 1) {
        // Kernel of the d-1 rows: fix one free coordinate to 1 and solve.
        for free in 0..d {
            let cols: Vec<usize> = (0..d).filter(|&c| c != free).collect();
            let m: Vec<Vec<f64>> =
                idx.iter().map(|&i| cols.iter().map(|&c| normals[i][c]).collect()).collect();
            let rhs: Vec<f64> = idx.iter().map(|&i| -normals[i][free]).collect();
            let Some(sol) = solve(m, rhs) else { continue };
            let mut v = vec![0.0; d];
            v[free] = 1.0;
            for (k, &c) in cols.iter().enumerate() {
                v[c] = sol[k];
            }
            let scale = norm(&v);
            for sign in [1.0, -1.0] {
                if normals.iter().all(|n| sign * dot(n, &v) / (norm(n) * scale) <= 1e-12) {
                    return false;
                }
            }
            break;
        }
    }
    true
}

fn polytope_vertices(normals: &[Point], offsets: &[f64]) -> Vec<Vec<f64>> {
    let d = normals[0].dim();
    let mut verts = Vec::new();
    for idx in combinations(normals.len(), d) {
        let m: Vec<Vec<f64>> = idx.iter().map(|&i| normals[i].to_vec()).collect();
        let rhs: Vec<f64> = idx.iter().map(|&i| offsets[i]).collect();
        if let Some(v) = solve(m, rhs) {
            let feasible = normals
                .iter()
                .zip(offsets)
                .all(|(n, b)| dot(n, &v) <= b + 1e-9 * (1.0 + b.abs()) * norm(n));
            if feasible {
                verts.push(v);
            }
        }
    }
    verts
}

// ---------------------------------------------------------------------------
// Counterexample domain
// ---------------------------------------------------------------------------

/// `(-100, 100)^d` with the closed slab `(-100, 50]^{d-1} × [-1/2, 0]` removed.
pub fn counterexample_domain(d: usize) -> Result<DomainShape> {
    if d < 2 {
        return Err(Error::ParamOutOfRange(format!("counterexample domain needs d >= 2, got {d}")));
    }
    let mut slab_low = vec![-100.0; d];
    let mut slab_high = vec![50.0; d];
    slab_low[d - 1] = -0.5;
    slab_high[d - 1] = 0.0;
    Ok(DomainShape::BoxMinusSlab {
        low: Point(vec![-100.0; d]),
        high: Point(vec![100.0; d]),
        slab_low: Point(slab_low),
        slab_high: Point(slab_high),
    })
}

/// Which of the two families of sets near the counterexample's cusp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterexampleKind {
    /// `C_n = {x ∈ D : |x̃| <= r1/8, x_d <= -1 + 2^{-n} r1^2}`.
    Cn,
    /// `D_n = {y ∈ D : y_d > 0, dist(y, C_n) < 1}`.
    Dn,
}

/// Membership predicate for `C_n` or `D_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleSet {
    pub kind: CounterexampleKind,
    pub d: usize,
    pub r1: f64,
    pub n: u32,
}

pub fn cn_set(d: usize, r1: f64, n: u32) -> Result<CounterexampleSet> {
    CounterexampleSet::new(CounterexampleKind::Cn, d, r1, n)
}

pub fn dn_set(d: usize, r1: f64, n: u32) -> Result<CounterexampleSet> {
    CounterexampleSet::new(CounterexampleKind::Dn, d, r1, n)
}

impl CounterexampleSet {
    pub fn new(kind: CounterexampleKind, d: usize, r1: f64, n: u32) -> Result<Self> {
        let s = Self { kind, d, r1, n };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::ParamOutOfRange(format!("d must be >= 2, got {}", self.d)));
        }
        if !(self.r1 > 0.0 && self.r1 < 0.5) {
            return Err(Error::ParamOutOfRange(format!("r1 must lie in (0, 1/2), got {}", self.r1)));
        }
        if self.n < 1 || self.n > 60 {
            return Err(Error::ParamOutOfRange(format!("n must lie in 1..=60, got {}", self.n)));
        }
        Ok(())
    }

    /// Depth `2^{-n} r1^2` of `C_n` above the level `x_d = -1`.
    pub fn delta(&self) -> f64 {
        self.r1 * self.r1 * 0.5f64.powi(self.n as i32)
    }

    /// Top level `-1 + 2^{-n} r1^2` of the cylinder `C_n`.
    pub fn top(&self) -> f64 {
        -1.0 + self.delta()
    }

    /// Half-width `r1 / 8` of the cylinder `C_n` in the first `d - 1` coordinates.
    pub fn half_width(&self) -> f64 {
        self.r1 / 8.0
    }

    /// Euclidean distance from `y` to the closed set `C_n` (restricted to the
    /// relevant region above `x_d = -100`).
    pub fn distance_to_cn(&self, y: &[f64]) -> f64 {
        let d = self.d;
        let tilde = norm(&y[..d - 1]);
        let a = (tilde - self.half_width()).max(0.0);
        let b = (y[d - 1] - self.top()).max(0.0);
        let c = (-100.0 - y[d - 1]).max(0.0);
        (a * a + b * b + c * c).sqrt()
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        let d = self.d;
        debug_assert_eq!(y.len(), d);
        let in_domain = y.iter().all(|&c| c > -100.0 && c < 100.0)
            && !(y[d - 1] >= -0.5 && y[d - 1] <= 0.0 && y[..d - 1].iter().all(|&c| c <= 50.0));
        if !in_domain {
            return false;
        }
        match self.kind {
            CounterexampleKind::Cn => {
                norm(&y[..d - 1]) <= self.half_width() && y[d - 1] <= self.top()
            }
            CounterexampleKind::Dn => y[d - 1] > 0.0 && self.distance_to_cn(y) < 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    #[test]
    fn point_rejects_non_finite() {
        assert!(Point::new(vec![0.0, f64::NAN]).is_err());
        assert!(Point::new(vec![]).is_err());
        assert!(serde_json::from_str::<Point>("[1.0, 2.0]").is_ok());
    }

    #[test]
    fn ball_queries() {
        let b = DomainShape::ball(pt(&[0.0, 0.0]), 1.0).unwrap();
        assert!(b.contains(&[0.0, 0.0]).unwrap());
        assert!(!b.contains(&[1.0, 0.0]).unwrap());
        assert_eq!(b.boundary_distance(&[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(b.bounding_ball(), (pt(&[0.0, 0.0]), 1.0));
        assert!(matches!(b.contains(&[0.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(b.boundary_distance(&[2.0, 0.0]), Err(Error::PointNotInterior)));
        assert!(DomainShape::ball(pt(&[0.0, 0.0]), 0.0).is_err());
    }

    #[test]
    fn box_queries() {
        let b = DomainShape::axis_box(pt(&[-1.0, -1.0]), pt(&[1.0, 1.0])).unwrap();
        assert_eq!(b.boundary_distance(&[0.5, 0.0]).unwrap(), 0.5);
        let (c, r) = b.bounding_ball();
        assert_eq!(c, pt(&[0.0, 0.0]));
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
        assert!(DomainShape::axis_box(pt(&[0.0, 1.0]), pt(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn polytope_square_matches_box() {
        let sq = DomainShape::unit_square();
        sq.validate().unwrap();
        assert!(sq.contains(&[0.5, 0.1]).unwrap());
        assert!(!sq.contains(&[0.5, 0.0]).unwrap());
        assert!((sq.boundary_distance(&[0.5, 0.1]).unwrap() - 0.1).abs() < 1e-15);
        let (c, r) = sq.bounding_ball();
        assert!(dist(&c, &[0.5, 0.5]) < 1e-12);
        assert!((r - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn polytope_rejects_unbounded_and_bad_interior() {
        // A wedge is unbounded.
        let wedge = DomainShape::polytope(
            vec![pt(&[-1.0, 0.0]), pt(&[0.0, -1.0]), pt(&[-1.0, -1.0])],
            vec![0.0, 0.0, 0.0],
            pt(&[1.0, 1.0]),
        );
        assert!(wedge.is_err());
        // A strip is unbounded and rank deficient.
        let strip = DomainShape::polytope(
            vec![pt(&[0.0, 1.0]), pt(&[0.0, -1.0]), pt(&[0.0, 2.0])],
            vec![1.0, 1.0, 3.0],
            pt(&[0.0, 0.0]),
        );
        assert!(strip.is_err());
        let tri = DomainShape::polytope(
            vec![pt(&[-1.0, 0.0]), pt(&[0.0, -1.0]), pt(&[1.0, 1.0])],
            vec![0.0, 0.0, 1.0],
            pt(&[0.9, 0.9]),
        );
        assert!(tri.is_err());
        let tri = DomainShape::polytope(
            vec![pt(&[-1.0, 0.0]), pt(&[0.0, -1.0]), pt(&[1.0, 1.0])],
            vec![0.0, 0.0, 1.0],
            pt(&[0.2, 0.2]),
        );
        assert!(tri.is_ok());
    }

    #[test]
    fn polytope_cube_in_3d() {
        let mut normals = Vec::new();
        for i in 0..3 {
            for s in [-1.0, 1.0] {
                let mut n = vec![0.0; 3];
                n[i] = s;
                normals.push(pt(&n));
            }
        }
        let cube = DomainShape::polytope(normals, vec![1.0; 6], pt(&[0.0, 0.0, 0.0])).unwrap();
        let (c, r) = cube.bounding_ball();
        assert!(norm(&c) < 1e-12);
        assert!((r - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn annulus_shape() {
        let a = DomainShape::Annulus { center: pt(&[0.0, 0.0]), r_inner: 0.5, r_outer: 1.0 };
        a.validate().unwrap();
        assert!(!a.contains(&[0.2, 0.0]).unwrap());
        assert!((a.boundary_distance(&[0.6, 0.0]).unwrap() - 0.1).abs() < 1e-15);
        let spec = AnnulusSpec::new(pt(&[0.0, 0.0]), 0.5, 1.0).unwrap();
        assert!(spec.contains(&[0.5, 0.0]));
        assert!(!spec.contains(&[1.0, 0.0]));
        assert!((spec.volume() - PI_F * 0.75).abs() < 1e-14);
    }

    const PI_F: f64 = std::f64::consts::PI;

    #[test]
    fn intersection_and_union() {
        let sq = DomainShape::unit_square();
        let i = DomainShape::intersect(sq.clone(), pt(&[0.5, 0.0]), 0.3).unwrap();
        assert!(i.contains(&[0.5, 0.1]).unwrap());
        assert!(!i.contains(&[0.5, 0.35]).unwrap());
        assert_eq!(i.bounding_ball(), (pt(&[0.5, 0.0]), 0.3));
        let u = DomainShape::union(vec![
            DomainShape::ball(pt(&[0.0, 0.0]), 1.0).unwrap(),
            DomainShape::ball(pt(&[3.0, 0.0]), 1.0).unwrap(),
        ])
        .unwrap();
        assert!(u.contains(&[3.5, 0.0]).unwrap());
        assert!(!u.contains(&[1.5, 0.0]).unwrap());
        assert!((u.boundary_distance(&[3.5, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        let (c, r) = u.bounding_ball();
        assert_eq!(c, pt(&[1.5, 0.0]));
        assert!((r - 2.5).abs() < 1e-15);
        assert!(DomainShape::union(vec![]).is_err());
    }

    #[test]
    fn counterexample_membership() {
        let d = counterexample_domain(2).unwrap();
        d.validate().unwrap();
        assert!(!d.contains(&[0.0, -0.25]).unwrap());
        assert!(d.contains(&[60.0, -0.25]).unwrap());
        assert!(!d.contains(&[0.0, 0.0]).unwrap());
        assert!(d.contains(&[0.0, 1e-9]).unwrap());
        assert!(d.contains(&[0.0, -0.6]).unwrap());
        assert!(!d.contains(&[0.0, -0.5]).unwrap());
        assert!((d.boundary_distance(&[0.0, 0.1]).unwrap() - 0.1).abs() < 1e-15);
        let d3 = counterexample_domain(3).unwrap();
        assert!(!d3.contains(&[0.0, 0.0, -0.5]).unwrap());
        assert!(d3.contains(&[0.0, 0.0, -0.6]).unwrap());
        assert!(counterexample_domain(1).is_err());
    }

    #[test]
    fn cn_dn_basics() {
        for n in 1..10 {
            let c = cn_set(2, 0.2, n).unwrap();
            assert!(c.contains(&[0.0, -1.0]));
            assert!(!c.contains(&[0.0, -0.9]));
            let dn = dn_set(2, 0.2, n).unwrap();
            assert!(!dn.contains(&[0.0, -1.0]));
        }
        let dn = dn_set(2, 0.2, 3).unwrap();
        // The top of C_3 is at -1 + 0.005; D_3 reaches up to 0.005.
        assert!(dn.contains(&[0.0, 0.004]));
        assert!(!dn.contains(&[0.0, 0.006]));
        assert!(cn_set(2, 0.5, 3).is_err());
        assert!(cn_set(2, 0.2, 0).is_err());
        assert!(cn_set(1, 0.2, 3).is_err());
    }
}
