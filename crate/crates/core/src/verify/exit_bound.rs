//! Exit probability against `r^{-α}` times the mean exit time.

use serde::{Deserialize, Serialize};

use super::{scaled_sim, Check, Recorder, Relation, Scenario, Statement, DELTA_DISC};
use crate::domains::{DomainShape, Point};
use crate::error::{Error, Result};
use crate::estimators::{exit_statistics, mean_exit_time, harmonic_measure, ratio_with_stderr, TargetSet};
use crate::kernels::ProcessParams;
use crate::simulator::SimConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Knobs {
    r1: f64,
    /// Multiples of `r1`; the first one is the reference.
    scales: Vec<f64>,
    /// Box corners in units of `r`; the domain is that box intersected with `B(0, r)`.
    box_low: Vec<f64>,
    box_high: Vec<f64>,
    /// Start points in units of `r`, inside `B(0, r/2)`.
    grid: Vec<Vec<f64>>,
    /// Inner ball radii in units of `r`; the first one fits the constant.
    kappas: Vec<f64>,
    /// Start of the inner-ball runs, `kappa_start · r · e1`.
    kappa_start: f64,
}

impl Default for Knobs {
    fn default() -> Self {
        Self {
            r1: 0.1,
            scales: vec![1.0, 0.5, 0.25],
            box_low: vec![-0.5, -1.0],
            box_high: vec![1.0, 1.0],
            grid: vec![vec![0.0, 0.0], vec![0.25, 0.0], vec![-0.25, 0.0], vec![0.0, 0.3], vec![0.3, 0.3]],
            kappas: vec![0.5, 0.25],
            kappa_start: 0.6,
        }
    }
}

/// `(P_x(Y_τ ∈ B(0,r)^c), E_x τ)` with the covariance of their means.
fn exit_pair(
    p: &ProcessParams,
    dom: &DomainShape,
    x: &[f64],
    r: f64,
    n: u64,
    cfg: &SimConfig,
) -> Result<(crate::estimators::MCEstimate, crate::estimators::MCEstimate, f64)> {
    let r2 = r * r;
    let v = exit_statistics(p, dom, x, 3, n, cfg, |rec, out| {
        let outside = (rec.exit_position.iter().map(|c| c * c).sum::<f64>() >= r2) as u8 as f64;
        out[0] = outside;
        out[1] = rec.exit_time;
        out[2] = outside * rec.exit_time;
    })?;
    let m = v[0].n as f64;
    let cov = if m > 1.0 { (v[2].mean - v[0].mean * v[1].mean) / (m - 1.0) } else { 0.0 };
    Ok((v[0], v[1], cov))
}

pub(super) fn run(sc: &Scenario, rec: &mut Recorder) -> Result<()> {
    let k: Knobs = sc.knobs()?;
    let p = &sc.params;
    let d = p.d;
    if !(k.r1 > 0.0 && k.r1 < 1.0) || k.scales.is_empty() || k.grid.is_empty() {
        return Err(Error::Config("exit_bound needs 0 < r1 < 1, scales and a grid".into()));
    }
    if k.box_low.len() != d || k.box_high.len() != d || k.grid.iter().any(|g| g.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: k.box_low.len() });
    }
    let r_ref = k.r1 * k.scales[0];
    let mut reference: Option<(f64, f64)> = None;
    for &s in &k.scales {
        let r = k.r1 * s;
        let tag = format!("r={r:.5}");
        let cfg = scaled_sim(&sc.sim, p.alpha, r, r_ref);
        let scale = |v: &[f64]| Point::new(v.iter().map(|c| c * r).collect());
        let dom = DomainShape::intersect(DomainShape::axis_box(scale(&k.box_low)?, scale(&k.box_high)?)?, Point::origin(d), r)?;
        let (mut best, mut best_se) = (0.0f64, 0.0);
        for g in &k.grid {
            let x: Vec<f64> = g.iter().map(|c| c * r).collect();
            if crate::domains::norm(&x) >= r / 2.0 {
                return Err(Error::Config(format!("grid point {g:?} is not inside B(0, r/2)")));
            }
            let (prob, time, cov) = exit_pair(p, &dom, &x, r, sc.estimate.n, &cfg)?;
            let ra = r.powf(-p.alpha);
            let (q, se) = ratio_with_stderr(prob.mean, prob.stderr, time.mean * ra, time.stderr * ra, cov * ra);
            let id = format!("{tag}/x={}", super::fmt_point(&x));
            rec.estimate(format!("{id}/exit_probability"), prob);
            rec.estimate(format!("{id}/exit_time"), time);
            rec.check(Check::new(format!("{id}/ratio_positive"), Statement::ExitBoundScaling, Relation::Lt, 0.0, q, 0.0, 0.0));
            let mut c = Check::new(format!("{id}/ratio_finite"), Statement::ExitBoundScaling, Relation::Lt, q, f64::INFINITY, 0.0, 0.0);
            c.pass = q.is_finite();
            rec.check(c);
            if q > best {
                best = q;
                best_se = se;
            }
        }
        rec.note(format!("{tag}: max ratio {best:.5} ± {best_se:.5}"));
        match reference {
            None => reference = Some((best, best_se)),
            Some((b0, s0)) => {
                let rel = best / b0;
                let rel_se = rel * ((best_se / best).powi(2) + (s0 / b0).powi(2)).sqrt();
                rec.check(Check::new(
                    format!("{tag}/max_ratio_vs_reference"),
                    Statement::ExitBoundScaling,
                    Relation::Close,
                    rel,
                    1.0,
                    3.0 * rel_se,
                    DELTA_DISC,
                ));
            }
        }
    }
    inner_ball(sc, &k, rec)
}

/// Hitting `B(0, κr)` before leaving `B(0, r)` against `κ^d r^{-α} E τ_{B(0,r)}`.
fn inner_ball(sc: &Scenario, k: &Knobs, rec: &mut Recorder) -> Result<()> {
    let p = &sc.params;
    let d = p.d;
    let r = k.r1 * k.scales[0];
    let cfg = &sc.sim;
    let mut x = vec![0.0; d];
    x[0] = k.kappa_start * r;
    let ball = DomainShape::ball(Point::origin(d), r)?;
    let time = mean_exit_time(p, &ball, &x, sc.estimate.n, cfg)?;
    rec.estimate("inner_ball/exit_time", time);
    let mut fit: Option<(f64, f64)> = None;
    for &kappa in &k.kappas {
        if !(kappa > 0.0 && kappa < k.kappa_start) {
            return Err(Error::Config("inner ball must not contain the start point".into()));
        }
        let dom = DomainShape::Annulus { center: Point::origin(d), r_inner: kappa * r, r_outer: r };
        let target = TargetSet::Annulus { center: Point::origin(d), r_inner: 0.0, r_outer: kappa * r };
        let hit = harmonic_measure(p, &dom, &x, &target, sc.estimate.n, cfg)?;
        let tag = format!("inner_ball/kappa={kappa}");
        rec.estimate(format!("{tag}/hit"), hit);
        let f = kappa.powi(d as i32) * r.powf(-p.alpha);
        let (q, se) = ratio_with_stderr(hit.mean, hit.stderr, time.mean * f, time.stderr * f, 0.0);
        rec.check(Check::new(format!("{tag}/positive"), Statement::InnerBallHitting, Relation::Lt, 0.0, q, 0.0, 0.0));
        match fit {
            None => {
                rec.note(format!("{tag}: fitted constant {q:.5} ± {se:.5}"));
                fit = Some((q, se));
            }
            Some((c, sc_)) => {
                rec.note(format!("{tag}: ratio {q:.5} ± {se:.5}"));
                rec.check(Check::new(
                    format!("{tag}/lower"),
                    Statement::InnerBallHitting,
                    Relation::Ge,
                    q,
                    c,
                    3.0 * (se * se + sc_ * sc_).sqrt(),
                    c * DELTA_DISC,
                ));
            }
        }
    }
    Ok(())
}
