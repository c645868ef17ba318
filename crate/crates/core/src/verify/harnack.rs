//! Two-ball Harnack comparison and its failure beyond the separation cap.

use serde::{Deserialize, Serialize};

use super::{Check, Recorder, Relation, Scenario, Statement};
use crate::domains::{DomainShape, Point};
use crate::error::{Error, Result};
use crate::estimators::{harmonic_measure, harnack_cap, harnack_ratio_profile, two_balls, TargetSet};
use crate::kernels::r0_cached;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Knobs {
    r: f64,
    /// Separation factors; the first one fits the constant.
    ms: Vec<f64>,
    /// Far target `B(target_offset e1, target_radius)`.
    target_offset: f64,
    target_radius: f64,
    /// Mirror control: `x = ±mirror_offset e1`, target `{a <= |y| < b}`.
    mirror_offset: f64,
    mirror_target: [f64; 2],
    /// Beyond-cap control radius and `M / cap`.
    cap_r: f64,
    cap_factor: f64,
}

impl Default for Knobs {
    fn default() -> Self {
        Self {
            r: 0.1,
            ms: vec![1.0, 2.0, 4.0],
            target_offset: 0.6,
            target_radius: 0.2,
            mirror_offset: 0.15,
            mirror_target: [0.5, 0.8],
            cap_r: 0.03,
            cap_factor: 1.1,
        }
    }
}

fn axis(d: usize, t: f64) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[0] = t;
    v
}

pub(super) fn run(sc: &Scenario, rec: &mut Recorder) -> Result<()> {
    let k: Knobs = sc.knobs()?;
    let p = &sc.params;
    let d = p.d;
    let n = sc.estimate.n;
    let cfg = &sc.sim;
    let r0 = r0_cached(p)?;
    if !(k.r > 0.0 && k.r < r0) {
        return Err(Error::RadiusTooLarge { radius: k.r, limit: r0 });
    }
    if k.ms.is_empty() {
        return Err(Error::Config("harnack needs at least one separation factor".into()));
    }
    let target = TargetSet::Shape { shape: DomainShape::ball(Point::new(axis(d, k.target_offset))?, k.target_radius)? };
    let x1 = vec![0.0; d];
    let expo = d as f64 + p.alpha;

    let mut fit: Option<(f64, f64)> = None;
    let (mut sup, mut inf) = (0.0f64, f64::INFINITY);
    for &m in &k.ms {
        let x2 = axis(d, -m * k.r);
        let h = harnack_ratio_profile(p, (&x1, &x2), k.r, &target, n, cfg)?;
        let tag = format!("M={m}");
        rec.estimate(format!("{tag}/u1"), h.u1);
        rec.estimate(format!("{tag}/u2"), h.u2);
        match fit {
            None => {
                let j = h.ratio.max(1.0 / h.ratio);
                // d(1/q) = dq / q^2 when the reciprocal is the max
                let sj = if h.ratio >= 1.0 { h.stderr } else { h.stderr / (h.ratio * h.ratio) };
                rec.note(format!("{tag}: ratio {:.5} ± {:.5}; fitted J = {j:.5}", h.ratio, h.stderr));
                fit = Some((j, sj));
            }
            Some((j, sj)) => {
                let up = h.ratio * h.m.powf(-expo);
                let up_se = h.stderr * h.m.powf(-expo);
                let lo = h.ratio * h.m.powf(expo);
                let lo_se = h.stderr * h.m.powf(expo);
                sup = sup.max(up);
                inf = inf.min(lo);
                rec.note(format!("{tag}: ratio {:.5} ± {:.5}", h.ratio, h.stderr));
                rec.check(Check::new(
                    format!("{tag}/upper"),
                    Statement::Harnack,
                    Relation::Le,
                    up,
                    j,
                    3.0 * (up_se * up_se + sj * sj).sqrt(),
                    0.0,
                ));
                let inv_se = sj / (j * j);
                rec.check(Check::new(
                    format!("{tag}/lower"),
                    Statement::Harnack,
                    Relation::Ge,
                    lo,
                    1.0 / j,
                    3.0 * (lo_se * lo_se + inv_se * inv_se).sqrt(),
                    0.0,
                ));
            }
        }
    }
    if k.ms.len() > 1 {
        rec.note(format!("sup ratio M^-(d+a) = {sup:.5}, inf ratio M^(d+a) = {inf:.5}"));
    }

    // x1 = x2: the same paths, so the ratio is exactly one
    let same = harnack_ratio_profile(p, (&x1, &x1), k.r, &target, n, cfg)?;
    rec.check(Check::new("control/identical_points", Statement::Control, Relation::Close, same.ratio, 1.0, 0.0, 0.0));

    let (a, b) = (axis(d, k.mirror_offset), axis(d, -k.mirror_offset));
    let ring = TargetSet::Annulus { center: Point::origin(d), r_inner: k.mirror_target[0], r_outer: k.mirror_target[1] };
    let mirror = harnack_ratio_profile(p, (&a, &b), k.r, &ring, n, cfg)?;
    rec.estimate("control/mirror/u1", mirror.u1);
    rec.estimate("control/mirror/u2", mirror.u2);
    rec.check(Check::new("control/mirror", Statement::Control, Relation::Close, mirror.ratio, 1.0, 3.0 * mirror.stderr, 0.0));

    beyond_cap(sc, &k, rec)
}

/// Balls farther apart than the cap: a target reachable from `x1` alone
/// has zero harmonic measure at `x2`.
fn beyond_cap(sc: &Scenario, k: &Knobs, rec: &mut Recorder) -> Result<()> {
    let p = &sc.params;
    let d = p.d;
    let r = k.cap_r;
    let cap = harnack_cap(r);
    let m = k.cap_factor * cap;
    let x1 = vec![0.0; d];
    let x2 = axis(d, -m * r);
    // reachable from B(x1, r) only: within distance 1 + r of x1, beyond 1 + r of x2
    let reach = 0.5;
    let target = TargetSet::Shape { shape: DomainShape::ball(Point::new(axis(d, reach))?, 0.2)? };
    let dom = two_balls(&x1, &x2, r)?;
    let u1 = harmonic_measure(p, &dom, &x1, &target, sc.estimate.n, &sc.sim)?;
    let u2 = harmonic_measure(p, &dom, &x2, &target, sc.estimate.n, &sc.sim)?;
    rec.estimate("cap/u1", u1);
    rec.estimate("cap/u2", u2);
    rec.note(format!("cap: r = {r}, cap = {cap:.4}, M = {m:.4}"));
    rec.check(Check::new("cap/u1_positive", Statement::HarnackCap, Relation::Lt, 0.0, u1.mean, 0.0, 0.0));
    rec.check(Check::new("cap/u2_zero", Statement::HarnackCap, Relation::Close, u2.mean, 0.0, 0.0, 0.0));
    let refused = matches!(
        harnack_ratio_profile(p, (&x1, &x2), r, &target, 1, &sc.sim),
        Err(Error::CapViolated { .. })
    );
    let mut c = Check::new("cap/profile_reports_cap_violated", Statement::HarnackCap, Relation::Ge, m, cap, 0.0, 0.0);
    c.pass = refused;
    rec.check(c);
    Ok(())
}
