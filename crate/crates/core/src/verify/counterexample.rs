//! Failure of the boundary Harnack principle on the slab domain.
//!
//! `u_n(x) = P_x(Y_τ ∈ C_n)` for `D ∩ B(0, M1 r1)`. The set `C_n` lies below
//! the slab, so it is reached by a jump only and
//! `u_n(x) = E_x ∫_0^τ κ_n(Y_s) ds` with `κ_n(y) = ∫_{C_n} J(y, z) dz`.
//! The occupation form sees every path that comes close to `C_n`, which makes
//! it far less noisy than counting direct hits.

use serde::{Deserialize, Serialize};

use super::{sub_seed, Check, Recorder, Relation, Scenario, Statement};
use crate::domains::{cn_set, counterexample_domain, CounterexampleSet, DomainShape, Point};
use crate::error::{Error, Result};
use crate::estimators::{occupation_functionals_with_hits, ratio_with_stderr, MCEstimate};
use crate::kernels::{constant_a, ProcessParams};
use crate::quadrature::GaussRule;
use crate::simulator::SimConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Knobs {
    r1: f64,
    m1: f64,
    ns: Vec<u32>,
    /// Extra grid points in `D ∩ B(0, r1)`; points `(0, f δ_n)` for
    /// `f ∈ dn_fractions` are always added.
    grid: Vec<Vec<f64>>,
    dn_fractions: Vec<f64>,
    /// Paths per grid point.
    n_grid: u64,
    /// Cap for the adaptive path count at `A`.
    n_max: u64,
    min_hits: u64,
    nodes: usize,
}

impl Default for Knobs {
    fn default() -> Self {
        Self {
            r1: 0.2,
            m1: 2.0,
            ns: (3..=8).collect(),
            grid: vec![vec![0.0, 0.05], vec![0.0, 0.01], vec![0.02, 0.002], vec![-0.02, 0.002], vec![0.0, 0.001]],
            dn_fractions: vec![0.25, 0.5, 0.75],
            n_grid: 20_000,
            n_max: 1_600_000,
            min_hits: 100,
            nodes: 24,
        }
    }
}

/// Jump intensity `∫_{C_n} A |y - z|^{-2-α} 1{|y-z| < 1} dz` from `y` into
/// the cylinder (planar case).
pub fn jump_intensity_into_cn(p: &ProcessParams, set: &CounterexampleSet, y: &[f64], rule: &GaussRule) -> f64 {
    debug_assert_eq!(p.d, 2);
    let t_lo = y[1] - set.top();
    if t_lo <= 0.0 {
        return f64::INFINITY;
    }
    if t_lo >= 1.0 {
        return 0.0;
    }
    let reach = (1.0 - t_lo * t_lo).sqrt();
    let w = set.half_width();
    let lo = (-w).max(y[0] - reach);
    let hi = w.min(y[0] + reach);
    if lo >= hi {
        return 0.0;
    }
    let inner = |a: f64| -> f64 {
        let a2 = a * a;
        if 1.0 - a2 - t_lo * t_lo <= 0.0 {
            return 0.0;
        }
        if p.alpha == 1.0 {
            // ∫ (a²+s²)^{-3/2} ds = s / (a² √(a²+s²)), rearranged to avoid cancellation
            let pp = (1.0 - a2).sqrt();
            let q = t_lo / (a2 + t_lo * t_lo).sqrt();
            (1.0 - a2 - t_lo * t_lo) / ((a2 + t_lo * t_lo) * (pp + q))
        } else {
            let e = -(2.0 + p.alpha) / 2.0;
            rule.integrate(|s| (a2 + s * s).powf(e), t_lo, (1.0 - a2).sqrt())
        }
    };
    // the inner length vanishes like a square root at y1 ± reach; z = e + (c - e) v²
    // with e the far end removes it
    let piece = |c: f64, e: f64| -> f64 {
        let span = c - e;
        rule.integrate(|v| inner(e + span * v * v - y[0]) * 2.0 * span.abs() * v, 0.0, 1.0)
    };
    let mut total = 0.0;
    if y[0] > lo {
        total += piece(y[0].min(hi), lo);
    }
    if y[0] < hi {
        total += piece(y[0].max(lo), hi);
    }
    constant_a(p) * total
}

pub(super) fn run(sc: &Scenario, rec: &mut Recorder) -> Result<()> {
    let k: Knobs = sc.knobs()?;
    let p = &sc.params;
    if p.d != 2 {
        return Err(Error::ParamOutOfRange(format!("counterexample runs in the plane, got d = {}", p.d)));
    }
    if !(k.m1 > 1.0 && k.r1 > 0.0 && k.r1 < 0.5 / k.m1) || k.ns.len() < 2 || k.nodes == 0 {
        return Err(Error::Config("counterexample needs m1 > 1, 0 < r1 < 1/(2 m1), two values of n".into()));
    }
    let domain = match &sc.domain {
        Some(d) => d.clone(),
        None => DomainShape::intersect(counterexample_domain(2)?, Point::origin(2), k.m1 * k.r1)?,
    };
    let sets: Vec<CounterexampleSet> = k.ns.iter().map(|&n| cn_set(2, k.r1, n)).collect::<Result<_>>()?;
    let dn: Vec<CounterexampleSet> =
        sets.iter().map(|s| CounterexampleSet { kind: crate::domains::CounterexampleKind::Dn, ..s.clone() }).collect();
    let rule = GaussRule::new(k.nodes);
    let reach_max = sets.iter().map(|s| s.delta()).fold(0.0, f64::max);
    let kappa = |y: &[f64], out: &mut [f64]| {
        if y[1] >= reach_max {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        for (o, s) in out.iter_mut().zip(&sets) {
            *o = jump_intensity_into_cn(p, s, y, &rule);
        }
    };
    let m = sets.len();
    let run_at = |x: &[f64], n: u64, seed: u64| {
        let cfg = SimConfig { seed, ..sc.sim.clone() };
        occupation_functionals_with_hits(p, &domain, x, m, n, &cfg, kappa)
    };

    // A, with the path count doubled until every functional has enough hits
    let a = vec![0.0, k.r1 / 2.0];
    let mut n_a = sc.estimate.n;
    let mut occ_a = run_at(&a, n_a, sub_seed(sc.sim.seed, 0))?;
    while occ_a.positive.iter().any(|&h| h < k.min_hits) && n_a < k.n_max {
        n_a = (2 * n_a).min(k.n_max);
        occ_a = run_at(&a, n_a, sub_seed(sc.sim.seed, 0))?;
    }
    rec.note(format!("paths from A: {n_a}"));

    let mut grid = k.grid.clone();
    for s in &sets {
        for f in &k.dn_fractions {
            grid.push(vec![0.0, f * s.delta()]);
        }
    }
    let mut grid_est: Vec<Vec<MCEstimate>> = Vec::new();
    for (i, g) in grid.iter().enumerate() {
        if g.len() != 2 || !(g[1] > 0.0) || crate::domains::norm(g) >= k.r1 || !domain.contains(g)? {
            return Err(Error::Config(format!("grid point {g:?} is not in D ∩ B(0, r1)")));
        }
        grid_est.push(run_at(g, k.n_grid, sub_seed(sc.sim.seed, i as u64 + 1))?.estimates);
    }

    let mut ratios = Vec::new();
    for (j, &n) in k.ns.iter().enumerate() {
        let tag = format!("n={n}");
        let ua = occ_a.estimates[j];
        rec.estimate(format!("{tag}/u_A"), ua);
        let hits = occ_a.positive[j];
        rec.check(Check::new(format!("{tag}/positive_paths_at_A"), Statement::Control, Relation::Ge, hits as f64, k.min_hits as f64, 0.0, 0.0));
        rec.check(Check::new(format!("{tag}/u_A_positive"), Statement::BhpFailure, Relation::Lt, 0.0, ua.mean, 0.0, 0.0));
        let (best, _) = grid_est
            .iter()
            .enumerate()
            .max_by(|x, y| x.1[j].mean.total_cmp(&y.1[j].mean))
            .expect("grid is not empty");
        let s_n = grid_est[best][j];
        rec.estimate(format!("{tag}/S"), s_n);
        let in_dn = dn[j].contains(&grid[best]);
        let mut c = Check::new(format!("{tag}/max_in_Dn"), Statement::BhpFailure, Relation::Close, in_dn as u8 as f64, 1.0, 0.0, 0.0);
        c.pass = in_dn;
        rec.check(c);
        let (ratio, se) = ratio_with_stderr(ua.mean, ua.stderr, s_n.mean, s_n.stderr, 0.0);
        rec.note(format!("{tag}: u(A) = {:.4e}, S = {:.4e} at {}, ratio {ratio:.5} ± {se:.5}", ua.mean, s_n.mean, super::fmt_point(&grid[best])));
        ratios.push((n, ratio, se));
    }
    for w in ratios.windows(2) {
        let ((n0, r0, s0), (n1, r1, s1)) = (w[0], w[1]);
        rec.check(Check::new(
            format!("ratio_{n1}_vs_{n0}"),
            Statement::BhpFailure,
            Relation::Le,
            r1,
            r0,
            2.0 * (s0 * s0 + s1 * s1).sqrt(),
            0.0,
        ));
    }
    let (first, last) = (ratios[0], ratios[ratios.len() - 1]);
    rec.check(Check::new(format!("ratio_{}_below_quarter_of_ratio_{}", last.0, first.0), Statement::BhpFailure, Relation::Lt, last.1, first.1 / 4.0, 0.0, 0.0));

    Ok(())
}
