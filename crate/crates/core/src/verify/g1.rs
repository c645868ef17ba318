//! Green function of the truncated process against the stable Green function
//! on small balls.

use serde::{Deserialize, Serialize};

use super::{scaled_sim, Check, Recorder, Relation, Scenario, Statement, DELTA_DISC};
use crate::domains::{DomainShape, Point};
use crate::error::{Error, Result};
use crate::estimators::{green_density, pooled_se, GreenDensity};
use crate::kernels::{r0_cached, GreenBall};
use crate::quadrature::GaussRule;
use crate::simulator::{OccupationGrid, SimConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Knobs {
    /// Ball radii as multiples of `r0`; ignored when the scenario names a ball.
    radius_factors: Vec<f64>,
    cells_per_axis: usize,
    /// Cells closer than this many widths to the start or the sphere are skipped.
    margin_cells: f64,
    lower: f64,
    upper: f64,
    /// Rerun with halved `epsilon` and halved `h`.
    gates: bool,
    gate_sigma: f64,
    /// Gauss nodes per axis for cell averages of the exact Green function.
    cell_nodes: usize,
}

impl Default for Knobs {
    fn default() -> Self {
        Self {
            radius_factors: vec![0.5, 0.25],
            cells_per_axis: 20,
            margin_cells: 2.0,
            lower: 1.0,
            upper: 2.0,
            gates: true,
            gate_sigma: 2.0,
            cell_nodes: 6,
        }
    }
}

pub(super) fn run(sc: &Scenario, rec: &mut Recorder) -> Result<()> {
    let k: Knobs = sc.knobs()?;
    let p = &sc.params;
    let r0 = r0_cached(p)?;
    rec.note(format!("r0 = {r0}"));
    let balls: Vec<(Vec<f64>, f64)> = match &sc.domain {
        Some(DomainShape::Ball { center, radius }) => vec![(center.to_vec(), *radius)],
        Some(_) => return Err(Error::Config("g1 needs a ball domain".into())),
        None => k.radius_factors.iter().map(|f| (vec![0.0; p.d], f * r0)).collect(),
    };
    if balls.is_empty() || k.cells_per_axis < 4 || k.cell_nodes == 0 {
        return Err(Error::Config("g1 needs at least one radius, 4 cells per axis and 1 cell node".into()));
    }
    let r_ref = balls[0].1;
    for (center, r) in &balls {
        if !(*r > 0.0 && *r < r0) {
            return Err(Error::RadiusTooLarge { radius: *r, limit: r0 });
        }
        let cfg = scaled_sim(&sc.sim, p.alpha, *r, r_ref);
        one_radius(sc, &k, rec, center, *r, &cfg)?;
    }
    Ok(())
}

fn one_radius(sc: &Scenario, k: &Knobs, rec: &mut Recorder, center: &[f64], r: f64, cfg: &SimConfig) -> Result<()> {
    let p = &sc.params;
    let d = p.d;
    let tag = format!("r={r:.5}");
    let ball = DomainShape::ball(Point::new(center.to_vec())?, r)?;
    let grid = OccupationGrid::around(center, r, k.cells_per_axis)?;
    let w = grid.cell_width(0);
    let gap = k.margin_cells * w;
    let mask: Vec<bool> = (0..grid.len())
        .map(|i| {
            let lo = grid.cell_low(i);
            let (mut near2, mut far2) = (0.0, 0.0);
            for a in 0..d {
                let (l, h) = (lo[a], lo[a] + grid.cell_width(a));
                let n = (l - center[a]).max(center[a] - h).max(0.0);
                let f = (l - center[a]).abs().max((h - center[a]).abs());
                near2 += n * n;
                far2 += f * f;
            }
            near2.sqrt() >= gap && far2.sqrt() <= r - gap
        })
        .collect();
    let qualifying = mask.iter().filter(|&&b| b).count();
    if qualifying == 0 {
        return Err(Error::Config("no qualifying cells; use more cells per axis".into()));
    }
    let base = green_density(p, &ball, center, &grid, Some(&mask), sc.estimate.n, cfg)?;
    rec.estimate(format!("{tag}/exit_time"), base.exit_time);
    rec.estimate(format!("{tag}/region_density"), base.region.expect("mask given"));

    let exact = cell_averages(sc, k, &grid, &mask, center, r);
    let (mut lo_ratio, mut hi_ratio) = (f64::INFINITY, 0.0f64);
    for i in (0..grid.len()).filter(|&i| mask[i]) {
        let g = exact[i];
        let est = base.cells[i];
        let ratio = est.mean / g;
        let se = est.stderr / g;
        lo_ratio = lo_ratio.min(ratio);
        hi_ratio = hi_ratio.max(ratio);
        let id = format!("{tag}/cell={}", super::fmt_point(&grid.cell_center(i)));
        rec.check(Check::new(format!("{id}/lower"), Statement::GreenSandwich, Relation::Ge, ratio, k.lower, 3.0 * se, DELTA_DISC));
        rec.check(Check::new(format!("{id}/upper"), Statement::GreenSandwich, Relation::Le, ratio, k.upper, 3.0 * se, DELTA_DISC));
    }
    let region_exact: f64 = (0..grid.len()).filter(|&i| mask[i]).map(|i| exact[i]).sum::<f64>() / qualifying as f64;
    let reg = base.region.expect("mask given");
    rec.note(format!(
        "{tag}: {qualifying} qualifying cells, ratio range [{lo_ratio:.4}, {hi_ratio:.4}], pooled ratio {:.4}",
        reg.mean / region_exact
    ));

    if k.gates {
        let half_eps = SimConfig { epsilon: cfg.epsilon / 2.0, ..cfg.clone() };
        let half_h = SimConfig { time_step: cfg.time_step / 2.0, ..cfg.clone() };
        for (name, c) in [("epsilon", half_eps), ("h", half_h)] {
            let g = green_density(p, &ball, center, &grid, Some(&mask), sc.estimate.n, &c)?;
            gate(rec, k, &tag, name, &base, &g);
        }
    }
    Ok(())
}

fn gate(rec: &mut Recorder, k: &Knobs, tag: &str, name: &str, base: &GreenDensity, g: &GreenDensity) {
    let pairs = [
        ("exit_time", base.exit_time, g.exit_time),
        ("region_density", base.region.expect("mask"), g.region.expect("mask")),
    ];
    for (q, a, b) in pairs {
        rec.estimate(format!("{tag}/gate_{name}/{q}"), b);
        rec.check(Check::new(
            format!("{tag}/gate_{name}/{q}"),
            Statement::Discretization,
            Relation::Close,
            b.mean,
            a.mean,
            k.gate_sigma * pooled_se(&a, &b),
            0.0,
        ));
    }
}

/// Cell averages of the stable Green function by tensor Gauss rules.
fn cell_averages(sc: &Scenario, k: &Knobs, grid: &OccupationGrid, mask: &[bool], center: &[f64], r: f64) -> Vec<f64> {
    let d = sc.params.d;
    let g = GreenBall::new(&sc.params);
    let rule = GaussRule::new(k.cell_nodes);
    let r2 = r * r;
    let m = k.cell_nodes;
    let total = m.pow(d as u32);
    let mut out = vec![0.0; grid.len()];
    let mut y = vec![0.0; d];
    for i in (0..grid.len()).filter(|&i| mask[i]) {
        let lo = grid.cell_low(i);
        let axes: Vec<Vec<(f64, f64)>> =
            (0..d).map(|a| rule.mapped(lo[a], lo[a] + grid.cell_width(a)).collect()).collect();
        let mut acc = 0.0;
        for flat in 0..total {
            let mut rem = flat;
            let mut wt = 1.0;
            for a in 0..d {
                let (node, wa) = axes[a][rem % m];
                rem /= m;
                y[a] = node;
                wt *= wa;
            }
            let y2: f64 = y.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
            // the start point is the centre
            acc += wt * g.value(r2, 0.0, y2, y2);
        }
        out[i] = acc / grid.cell_volume();
    }
    out
}
