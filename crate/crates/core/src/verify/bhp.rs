//! Boundary Harnack principle and Carleson estimate on a convex polytope.

use serde::{Deserialize, Serialize};

use super::{scaled_sim, Check, Recorder, Relation, Scenario, Statement, DELTA_DISC};
use crate::domains::{norm, DomainShape, Point};
use crate::error::{Error, Result};
use crate::estimators::{exit_probabilities, ratio_with_stderr, MCEstimate, TargetSet};
use crate::kernels::r0_cached;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Knobs {
    /// Boundary point.
    q: Vec<f64>,
    /// Lipschitz constant and localisation radius supplied for the polytope.
    lambda: f64,
    big_r: f64,
    /// `r = r_factor · min(r0, big_r) / (6 (3 + 2 lambda))`.
    r_factor: f64,
    /// Multiples of `r`; the first fits the constants.
    scales: Vec<f64>,
    /// Grid in `B(Q, r/(1+lambda))`, in units of that radius, as
    /// (tangential, inward normal) coordinates.
    grid: Vec<[f64; 2]>,
    /// Points `Q + 2^{-k} r/(1+lambda) ν` approaching the boundary.
    rings: Vec<u32>,
    /// `A_r(Q) = Q + carleson_height · r · ν`.
    carleson_height: f64,
}

impl Default for Knobs {
    fn default() -> Self {
        Self {
            q: vec![0.5, 0.0],
            lambda: 1.0,
            big_r: 0.5,
            r_factor: 0.96,
            scales: vec![1.0, 0.5],
            grid: vec![
                [-0.5, 0.2],
                [0.0, 0.2],
                [0.5, 0.2],
                [-0.4, 0.5],
                [0.0, 0.5],
                [0.4, 0.5],
                [-0.3, 0.8],
                [0.0, 0.8],
                [0.3, 0.8],
            ],
            rings: vec![3, 4, 5],
            carleson_height: 0.5,
        }
    }
}

/// Inward unit normal of the face of the polytope containing `q`.
fn face_normal(dom: &DomainShape, q: &[f64]) -> Result<Vec<f64>> {
    let DomainShape::Polytope { normals, offsets, .. } = dom else {
        return Err(Error::Config("bhp_convex needs a polytope domain".into()));
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut outside = 0.0f64;
    for (nv, b) in normals.iter().zip(offsets) {
        let len = norm(nv);
        let gap = (b - nv.iter().zip(q).map(|(a, c)| a * c).sum::<f64>()) / len;
        outside = outside.max(-gap);
        if best.as_ref().is_none_or(|(g, _)| gap.abs() < *g) {
            best = Some((gap.abs(), nv.iter().map(|c| -c / len).collect()));
        }
    }
    let (gap, nu) = best.ok_or_else(|| Error::InvalidShape("polytope without faces".into()))?;
    let miss = gap.max(outside);
    if miss > 1e-9 {
        return Err(Error::NoBoundaryPoint(miss));
    }
    Ok(nu)
}

/// A unit vector orthogonal to `nu`.
fn tangent(nu: &[f64]) -> Vec<f64> {
    let k = (0..nu.len()).min_by(|&a, &b| nu[a].abs().total_cmp(&nu[b].abs())).unwrap_or(0);
    let mut t: Vec<f64> = nu.iter().map(|c| -c * nu[k]).collect();
    t[k] += 1.0;
    let l = norm(&t);
    t.iter().map(|c| c / l).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Point2 {
    u: MCEstimate,
    v: MCEstimate,
    ratio: f64,
    se: f64,
}

pub(super) fn run(sc: &Scenario, rec: &mut Recorder) -> Result<()> {
    let k: Knobs = sc.knobs()?;
    let p = &sc.params;
    let d = p.d;
    let poly = sc.domain.clone().unwrap_or_else(DomainShape::unit_square);
    if poly.dim() != d || k.q.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: k.q.len() });
    }
    if k.scales.is_empty() || k.grid.is_empty() || k.rings.len() < 2 || !(k.lambda > 0.0 && k.big_r > 0.0) {
        return Err(Error::Config("bhp_convex needs scales, a grid, two rings, lambda > 0 and big_r > 0".into()));
    }
    let q = k.q.clone();
    let nu = face_normal(&poly, &q)?;
    let t = tangent(&nu);
    let r3 = r0_cached(p)?.min(k.big_r) / (6.0 * (3.0 + 2.0 * k.lambda));
    let r = k.r_factor * r3;
    if !(r > 0.0 && r < r3) {
        return Err(Error::RadiusTooLarge { radius: r, limit: r3 });
    }
    rec.note(format!("r3 = {r3:.6}, r = {r:.6}"));
    let at = |a: f64, b: f64| -> Vec<f64> { (0..d).map(|i| q[i] + a * t[i] + b * nu[i]).collect() };

    let r_ref = r * k.scales[0];
    let mut fit: Option<((f64, f64), (f64, f64))> = None;
    for &s in &k.scales {
        let rs = r * s;
        let tag = format!("r={rs:.6}");
        let cfg = scaled_sim(&sc.sim, p.alpha, rs, r_ref);
        let big = 6.0 * (3.0 + 2.0 * k.lambda) * rs;
        let qp = Point::new(q.clone())?;
        let dom = DomainShape::intersect(poly.clone(), qp.clone(), big)?;
        let far = vec![
            TargetSet::Shape { shape: poly.clone() },
            TargetSet::Complement { set: Box::new(TargetSet::Shape { shape: DomainShape::ball(qp.clone(), big)? }) },
        ];
        let left = TargetSet::Halfspace { normal: Point::new(t.clone())?, offset: dot(&t, &q) };
        let up = TargetSet::Halfspace { normal: Point::new(nu.clone())?, offset: dot(&nu, &q) + big / 2.0 };
        let tu = TargetSet::Intersection { sets: [far.clone(), vec![TargetSet::Complement { set: Box::new(left.clone()) }]].concat() };
        let tv = TargetSet::Intersection { sets: [far, vec![left, up]].concat() };
        let targets = [tu.clone(), tv];

        let unit = rs / (1.0 + k.lambda);
        let eval = |x: &[f64]| -> Result<Point2> {
            let e = exit_probabilities(p, &dom, x, &targets, sc.estimate.n, &cfg)?;
            let (u, v) = (e[0], e[1]);
            let m = u.n as f64;
            // disjoint indicators: E[uv] = 0
            let cov = if m > 1.0 { -u.mean * v.mean / (m - 1.0) } else { 0.0 };
            let (ratio, se) = ratio_with_stderr(u.mean, u.stderr, v.mean, v.stderr, cov);
            Ok(Point2 { u, v, ratio, se })
        };
        let mut pts: Vec<(String, Point2)> = Vec::new();
        for g in &k.grid {
            if g[0].hypot(g[1]) >= 1.0 || g[1] <= 0.0 {
                return Err(Error::Config(format!("grid point {g:?} outside the upper half of the unit disk")));
            }
            let x = at(g[0] * unit, g[1] * unit);
            pts.push((format!("{tag}/x={}", super::fmt_point(&x)), eval(&x)?));
        }
        let mut ring_ratio = Vec::new();
        for &j in &k.rings {
            let x = at(0.0, unit * 0.5f64.powi(j as i32));
            let pt = eval(&x)?;
            ring_ratio.push((j, pt.ratio, pt.se));
            pts.push((format!("{tag}/ring={j}"), pt));
        }
        for (id, pt) in &pts {
            rec.estimate(format!("{id}/u"), pt.u);
            rec.estimate(format!("{id}/v"), pt.v);
        }
        let a_pt = eval(&at(0.0, k.carleson_height * rs))?;
        rec.estimate(format!("{tag}/A/u"), a_pt.u);

        // oscillation of u/v over the grid
        let (imax, imin) = extreme(&pts, |p| p.ratio);
        let (hi, lo) = (&pts[imax].1, &pts[imin].1);
        let osc = hi.ratio / lo.ratio;
        let osc_se = osc * ((hi.se / hi.ratio).powi(2) + (lo.se / lo.ratio).powi(2)).sqrt();
        // Carleson: u(A) against the grid maximum of u
        let (umax_i, _) = extreme(&pts, |p| p.u.mean);
        let umax = pts[umax_i].1.u;
        let carl = a_pt.u.mean / umax.mean;
        let carl_se = carl * ((a_pt.u.stderr / a_pt.u.mean).powi(2) + (umax.stderr / umax.mean).powi(2)).sqrt();
        rec.note(format!("{tag}: u/v in [{:.5}, {:.5}], oscillation {osc:.5} ± {osc_se:.5}; u(A)/max u = {carl:.5} ± {carl_se:.5}", lo.ratio, hi.ratio));
        rec.check(Check::new(format!("{tag}/oscillation_finite"), Statement::ConvexBhp, Relation::Lt, osc, f64::INFINITY, 0.0, 0.0));
        match fit {
            None => fit = Some(((osc, osc_se), (carl, carl_se))),
            Some(((c, c_se), (cc, cc_se))) => {
                rec.check(Check::new(
                    format!("{tag}/oscillation"),
                    Statement::ConvexBhp,
                    Relation::Le,
                    osc,
                    c,
                    3.0 * (osc_se * osc_se + c_se * c_se).sqrt(),
                    c * DELTA_DISC,
                ));
                rec.check(Check::new(
                    format!("{tag}/carleson"),
                    Statement::Carleson,
                    Relation::Ge,
                    carl,
                    cc,
                    3.0 * (carl_se * carl_se + cc_se * cc_se).sqrt(),
                    cc * DELTA_DISC,
                ));
            }
        }
        let last = &ring_ratio[ring_ratio.len().saturating_sub(3)..];
        for i in 0..last.len() {
            for j in i + 1..last.len() {
                let (a, sa) = (last[i].1, last[i].2);
                let (b, sb) = (last[j].1, last[j].2);
                let rel = a / b;
                let rel_se = rel * ((sa / a).powi(2) + (sb / b).powi(2)).sqrt();
                rec.check(Check::new(
                    format!("{tag}/ring_{}_vs_{}", last[i].0, last[j].0),
                    Statement::RatioLimit,
                    Relation::Close,
                    rel,
                    1.0,
                    3.0 * rel_se,
                    DELTA_DISC,
                ));
            }
        }
        if s == k.scales[0] {
            let x = at(0.0, 0.5 * unit);
            let e = exit_probabilities(p, &dom, &x, &[tu.clone(), tu], sc.estimate.n, &cfg)?;
            rec.check(Check::new("control/u_equals_v", Statement::Control, Relation::Close, e[0].mean / e[1].mean, 1.0, 0.0, 0.0));
        }
    }
    Ok(())
}

fn extreme<T>(pts: &[(String, T)], f: impl Fn(&T) -> f64) -> (usize, usize) {
    let mut imax = 0;
    let mut imin = 0;
    for (i, (_, p)) in pts.iter().enumerate() {
        if f(p) > f(&pts[imax].1) {
            imax = i;
        }
        if f(p) < f(&pts[imin].1) {
            imin = i;
        }
    }
    (imax, imin)
}
