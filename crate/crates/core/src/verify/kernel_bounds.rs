//! Exit density of the truncated process from a small ball, region by region.

use serde::{Deserialize, Serialize};

use super::{scaled_sim, Check, Recorder, Relation, Scenario, Statement, DELTA_DISC};
use crate::domains::{AnnulusSpec, DomainShape, Point};
use crate::error::{Error, Result};
use crate::estimators::{exit_probabilities, TargetSet};
use crate::kernels::{r0_cached, sphere_surface_area, stable_poisson_ball, ProcessParams};
use crate::quadrature::{integrate, QuadratureConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Knobs {
    /// Radii as multiples of `min(r0, 1/4)`; the first one fits the shell constants.
    radius_factors: Vec<f64>,
    /// Shell edges in units of `r` for the region `r < |z| < 1 - r`.
    inner_edges: Vec<f64>,
    /// Number of equal shells covering `1 - r < |z| < 1 + r/2`.
    outer_cells: usize,
    lower: f64,
    upper: f64,
}

impl Default for Knobs {
    fn default() -> Self {
        Self {
            radius_factors: vec![0.5, 0.25, 0.125],
            inner_edges: vec![1.0, 1.25, 1.5, 2.0, 3.0, 5.0],
            outer_cells: 3,
            lower: 1.0,
            upper: 2.0,
        }
    }
}

pub(super) fn run(sc: &Scenario, rec: &mut Recorder) -> Result<()> {
    let k: Knobs = sc.knobs()?;
    let p = &sc.params;
    let limit = r0_cached(p)?.min(0.25);
    let center = match &sc.domain {
        None => vec![0.0; p.d],
        Some(DomainShape::Ball { center, .. }) => center.to_vec(),
        Some(_) => return Err(Error::Config("kernel_bounds needs a ball domain".into())),
    };
    if k.radius_factors.is_empty() || k.outer_cells == 0 || k.inner_edges.len() < 2 {
        return Err(Error::Config("kernel_bounds needs radii, two inner edges and one outer cell".into()));
    }
    let radii: Vec<f64> = k.radius_factors.iter().map(|f| f * limit).collect();
    let r_ref = radii[0];
    let mut fitted: Option<(f64, f64)> = None;
    for &r in &radii {
        if !(r > 0.0 && r < limit) {
            return Err(Error::RadiusTooLarge { radius: r, limit });
        }
        let tag = format!("r={r:.5}");
        let cfg = scaled_sim(&sc.sim, p.alpha, r, r_ref);
        let ball = DomainShape::ball(Point::new(center.clone())?, r)?;

        let mut inner: Vec<f64> = k.inner_edges.iter().map(|e| e * r).filter(|&e| e >= r && e < 1.0 - r).collect();
        inner.push(1.0 - r);
        let outer: Vec<f64> =
            (0..=k.outer_cells).map(|i| 1.0 - r + 1.5 * r * i as f64 / k.outer_cells as f64).collect();
        let shells = |edges: &[f64]| -> Result<Vec<AnnulusSpec>> {
            edges.windows(2).map(|w| AnnulusSpec::new(Point::new(center.clone())?, w[0], w[1])).collect()
        };
        let inner_shells = shells(&inner)?;
        let outer_shells = shells(&outer)?;
        let mut targets: Vec<TargetSet> =
            inner_shells.iter().chain(&outer_shells).cloned().map(TargetSet::annulus).collect();
        targets.push(TargetSet::Annulus { center: Point::new(center.clone())?, r_inner: 1.0 + r, r_outer: f64::INFINITY });
        let masses = exit_probabilities(p, &ball, &center, &targets, sc.estimate.n, &cfg)?;

        for (s, m) in inner_shells.iter().zip(&masses) {
            let exact = stable_shell_mass(p, r, s.r_inner, s.r_outer)?;
            let ratio = m.mean / exact;
            let se = m.stderr / exact;
            let id = format!("{tag}/inner/[{:.4},{:.4})", s.r_inner, s.r_outer);
            rec.estimate(format!("{id}/mass"), *m);
            rec.check(Check::new(format!("{id}/lower"), Statement::PoissonSandwich, Relation::Ge, ratio, k.lower, 3.0 * se, DELTA_DISC));
            rec.check(Check::new(format!("{id}/upper"), Statement::PoissonSandwich, Relation::Le, ratio, k.upper, 3.0 * se, DELTA_DISC));
        }

        let scale = r.powf(p.alpha);
        let values: Vec<(String, f64, f64)> = outer_shells
            .iter()
            .zip(&masses[inner_shells.len()..])
            .map(|(s, m)| {
                let v = s.volume() * scale;
                let id = format!("{tag}/shell/[{:.4},{:.4})", s.r_inner, s.r_outer);
                rec.estimate(format!("{id}/mass"), *m);
                (id, m.mean / v, m.stderr / v)
            })
            .collect();
        match fitted {
            None => {
                let lo = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
                let hi = values.iter().map(|v| v.1).fold(0.0, f64::max);
                rec.note(format!("{tag}: fitted shell constants density / r^alpha in [{lo:.5}, {hi:.5}]"));
                for (id, v, _) in &values {
                    rec.check(Check::new(format!("{id}/positive"), Statement::ShellBounds, Relation::Lt, 0.0, *v, 0.0, 0.0));
                }
                fitted = Some((lo, hi));
            }
            Some((lo, hi)) => {
                for (id, v, se) in &values {
                    let lo_margin = lo - lo / (1.0 + DELTA_DISC);
                    rec.check(Check::new(format!("{id}/lower"), Statement::ShellBounds, Relation::Ge, *v, lo, 3.0 * se, lo_margin));
                    rec.check(Check::new(format!("{id}/upper"), Statement::ShellBounds, Relation::Le, *v, hi, 3.0 * se, hi * DELTA_DISC));
                }
            }
        }

        let beyond = masses[masses.len() - 1];
        rec.estimate(format!("{tag}/beyond/mass"), beyond);
        rec.check(Check::new(format!("{tag}/beyond"), Statement::JumpRange, Relation::Close, beyond.mean, 0.0, 0.0, 0.0));
    }
    Ok(())
}

/// `P(X_τ ∈ {a <= |z| < b})` for the stable process started at the centre of
/// `B(0, r)`, by radial quadrature of the Poisson kernel.
pub(crate) fn stable_shell_mass(p: &ProcessParams, r: f64, a: f64, b: f64) -> Result<f64> {
    let d = p.d;
    let w = sphere_surface_area(d);
    let origin = vec![0.0; d];
    let mut z = vec![0.0; d];
    let cfg = QuadratureConfig::new(1e-9, 1e-14, 2000)?;
    let v = integrate(
        |rho| {
            z[0] = rho;
            w * rho.powi(d as i32 - 1) * stable_poisson_ball(p, &origin, r, &origin, &z).unwrap_or(0.0)
        },
        a.max(r),
        b,
        &[],
        &cfg,
    )?;
    Ok(v.value)
}
