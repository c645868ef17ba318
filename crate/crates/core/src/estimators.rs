//! Monte Carlo estimators built on path batches.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domains::{dist, norm, AnnulusSpec, CounterexampleSet, DomainShape, Point};
use crate::error::{Error, Result};
use crate::kernels::{sphere_surface_area, ProcessParams};
use crate::simulator::{batch_reduce, wos_with, BallExitSampler, Engine, ExitRecord, OccupationGrid, SimConfig};

/// Mean with its standard error; the return type of every estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub seed: u64,
    pub censored_fraction: f64,
}

impl MCEstimate {
    /// From the sum and sum of squares of `n` samples; `total` includes
    /// censored paths that contributed no sample.
    pub fn from_sums(sum: f64, sum2: f64, n: u64, total: u64, seed: u64) -> Self {
        let nf = n.max(1) as f64;
        let mean = sum / nf;
        let var = if n > 1 { ((sum2 - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
        Self {
            mean,
            stderr: (var / nf).sqrt(),
            n,
            seed,
            censored_fraction: if total == 0 { 0.0 } else { (total - n) as f64 / total as f64 },
        }
    }

    /// Multiplies mean and stderr by a constant.
    pub fn scaled(self, c: f64) -> Self {
        Self { mean: self.mean * c, stderr: self.stderr * c.abs(), ..self }
    }
}

/// Measurable set whose membership is decided pointwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSet {
    /// `{r_inner <= |y - center| < r_outer}`.
    Annulus { center: Point, r_inner: f64, r_outer: f64 },
    Shape { shape: DomainShape },
    Counterexample { set: CounterexampleSet },
    /// `{y : normal · y >= offset}`.
    Halfspace { normal: Point, offset: f64 },
    Complement { set: Box<TargetSet> },
    Union { sets: Vec<TargetSet> },
    Intersection { sets: Vec<TargetSet> },
    Everything,
}

impl TargetSet {
    pub fn annulus(a: AnnulusSpec) -> Self {
        TargetSet::Annulus { center: a.center, r_inner: a.r_inner, r_outer: a.r_outer }
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        match self {
            TargetSet::Annulus { center, r_inner, r_outer } => {
                let r = dist(y, center);
                r >= *r_inner && r < *r_outer
            }
            TargetSet::Shape { shape } => shape.contains_unchecked(y),
            TargetSet::Counterexample { set } => set.contains(y),
            TargetSet::Halfspace { normal, offset } => {
                normal.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() >= *offset
            }
            TargetSet::Complement { set } => !set.contains(y),
            TargetSet::Union { sets } => sets.iter().any(|s| s.contains(y)),
            TargetSet::Intersection { sets } => sets.iter().all(|s| s.contains(y)),
            TargetSet::Everything => true,
        }
    }

    /// Lebesgue measure when it has a closed form.
    pub fn volume(&self) -> Option<f64> {
        match self {
            TargetSet::Annulus { center, r_inner, r_outer } => {
                let d = center.dim();
                Some(sphere_surface_area(d) / d as f64 * (r_outer.powi(d as i32) - r_inner.powi(d as i32)))
            }
            TargetSet::Shape { shape: DomainShape::Ball { center, radius } } => {
                let d = center.dim();
                Some(sphere_surface_area(d) / d as f64 * radius.powi(d as i32))
            }
            TargetSet::Shape { shape: DomainShape::AxisBox { low, high } } => {
                Some(low.iter().zip(high.iter()).map(|(a, b)| b - a).product())
            }
            _ => None,
        }
    }
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("number of paths must be at least 1".into()));
    }
    Ok(())
}

fn check_start(p: &ProcessParams, domain: &DomainShape, x: &[f64]) -> Result<()> {
    p.validate()?;
    domain.validate()?;
    if domain.dim() != p.d {
        return Err(Error::DimensionMismatch { expected: p.d, got: domain.dim() });
    }
    if !domain.contains(x)? {
        return Err(Error::PointNotInterior);
    }
    Ok(())
}

/// Running sums over paths for several indicator or real statistics.
#[derive(Debug, Clone)]
struct Sums {
    sum: Vec<f64>,
    sum2: Vec<f64>,
    used: u64,
    total: u64,
}

impl Sums {
    fn new(k: usize) -> Self {
        Self { sum: vec![0.0; k], sum2: vec![0.0; k], used: 0, total: 0 }
    }

    fn merge(&mut self, o: Sums) {
        self.sum.iter_mut().zip(&o.sum).for_each(|(a, b)| *a += b);
        self.sum2.iter_mut().zip(&o.sum2).for_each(|(a, b)| *a += b);
        self.used += o.used;
        self.total += o.total;
    }

    fn estimates(&self, seed: u64) -> Result<Vec<MCEstimate>> {
        if self.used == 0 {
            return Err(Error::AllPathsCensored);
        }
        Ok(self
            .sum
            .iter()
            .zip(&self.sum2)
            .map(|(&s, &s2)| MCEstimate::from_sums(s, s2, self.used, self.total, seed))
            .collect())
    }
}

/// Runs `n` paths from `x` and records, per uncensored path, the statistics
/// `stat(record, out)` writes into `out` (length `k`).
pub fn exit_statistics<F>(
    p: &ProcessParams,
    domain: &DomainShape,
    x: &[f64],
    k: usize,
    n: u64,
    cfg: &SimConfig,
    stat: F,
) -> Result<Vec<MCEstimate>>
where
    F: Fn(&ExitRecord, &mut [f64]) + Sync,
{
    check_n(n)?;
    check_start(p, domain, x)?;
    let eng = Engine::new(p, cfg)?;
    let sums = batch_reduce(
        cfg.seed,
        n,
        || (Sums::new(k), vec![0.0; k]),
        |(acc, buf), _, rng| {
            let rec = eng.run(domain, x, rng, |_, _| {});
            acc.total += 1;
            if rec.censored {
                return;
            }
            acc.used += 1;
            buf.iter_mut().for_each(|v| *v = 0.0);
            stat(&rec, buf);
            for i in 0..k {
                acc.sum[i] += buf[i];
                acc.sum2[i] += buf[i] * buf[i];
            }
        },
        |a, b| a.0.merge(b.0),
    );
    sums.0.estimates(cfg.seed)
}

/// `P_x(Y_{τ_D} ∈ E)` for each target `E`, all from the same paths.
pub fn exit_probabilities(
    p: &ProcessParams,
    domain: &DomainShape,
    x: &[f64],
    targets: &[TargetSet],
    n: u64,
    cfg: &SimConfig,
) -> Result<Vec<MCEstimate>> {
    exit_statistics(p, domain, x, targets.len(), n, cfg, |rec, out| {
        for (o, t) in out.iter_mut().zip(targets) {
            *o = t.contains(&rec.exit_position) as u8 as f64;
        }
    })
}

/// Harmonic measure `u(x) = P_x(Y_{τ_D} ∈ target)`.
pub fn harmonic_measure(
    p: &ProcessParams,
    domain: &DomainShape,
    x: &[f64],
    target: &TargetSet,
    n: u64,
    cfg: &SimConfig,
) -> Result<MCEstimate> {
    Ok(exit_probabilities(p, domain, x, std::slice::from_ref(target), n, cfg)?[0])
}

/// Harmonic measures of the untruncated stable process from walk-on-spheres.
pub fn stable_exit_probabilities(
    p: &ProcessParams,
    domain: &DomainShape,
    x: &[f64],
    targets: &[TargetSet],
    n: u64,
    seed: u64,
) -> Result<Vec<MCEstimate>> {
    check_n(n)?;
    check_start(p, domain, x)?;
    let sampler = BallExitSampler::new(p)?;
    let k = targets.len();
    let res = batch_reduce(
        seed,
        n,
        || (Sums::new(k), None::<Error>),
        |(acc, err), _, rng: &mut ChaCha8Rng| {
            acc.total += 1;
            match wos_with(&sampler, domain, x, rng) {
                Ok(z) => {
                    acc.used += 1;
                    for (i, t) in targets.iter().enumerate() {
                        if t.contains(&z) {
                            acc.sum[i] += 1.0;
                            acc.sum2[i] += 1.0;
                        }
                    }
                }
                Err(e) => {
                    err.get_or_insert(e);
                }
            }
        },
        |a, b| {
            a.0.merge(b.0);
            if a.1.is_none() {
                a.1 = b.1;
            }
        },
    );
    if let Some(e) = res.1 {
        return Err(e);
    }
    res.0.estimates(seed)
}

/// Cell masses and densities of the exit distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramCell {
    pub mass: MCEstimate,
    pub density: MCEstimate,
    pub volume: f64,
}

/// Empirical cell averages of the exit density `K^Y_D(x, ·)` over disjoint
/// cells with known volume.
pub fn exit_density_histogram(
    p: &ProcessParams,
    domain: &DomainShape,
    x: &[f64],
    partition: &[TargetSet],
    n: u64,
    cfg: &SimConfig,
) -> Result<Vec<HistogramCell>> {
    let vols: Vec<f64> = partition
        .iter()
        .map(|c| c.volume().ok_or_else(|| Error::Config(format!("cell {c:?} has no closed-form volume"))))
        .collect::<Result<_>>()?;
    let masses = exit_probabilities(p, domain, x, partition, n, cfg)?;
    Ok(masses
        .into_iter()
        .zip(vols)
        .map(|(m, v)| HistogramCell { mass: m, density: m.scaled(1.0 / v), volume: v })
        .collect())
}

/// `E_x τ_D` over uncensored paths.
pub fn mean_exit_time(
    p: &ProcessParams,
    domain: &DomainShape,
    x: &[f64],
    n: u64,
    cfg: &SimConfig,
) -> Result<MCEstimate> {
    Ok(exit_statistics(p, domain, x, 1, n, cfg, |rec, out| out[0] = rec.exit_time)?[0])
}

/// Exit time and exit probabilities of several targets from the same paths.
pub fn exit_time_and_probabilities(
    p: &ProcessParams,
    domain: &DomainShape,
    x: &[f64],
    targets: &[TargetSet],
    n: u64,
    cfg: &SimConfig,
) -> Result<(MCEstimate, Vec<MCEstimate>)> {
    let mut v = exit_statistics(p, domain, x, 1 + targets.len(), n, cfg, |rec, out| {
        out[0] = rec.exit_time;
        for (o, t) in out[1..].iter_mut().zip(targets) {
            *o = t.contains(&rec.exit_position) as u8 as f64;
        }
    })?;
    let t = v.remove(0);
    Ok((t, v))
}

/// `E_x ∫_0^{τ_D} f_i(Y_s) ds` for `k` functionals evaluated together;
/// `f(y, out)` overwrites `out`.
pub fn occupation_functionals<F>(
    p: &ProcessParams,
    domain: &DomainShape,
    x: &[f64],
    k: usize,
    n: u64,
    cfg: &SimConfig,
    f: F,
) -> Result<Vec<MCEstimate>>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    occupation_functionals_with_hits(p, domain, x, k, n, cfg, f).map(|o| o.estimates)
}

/// Occupation estimates plus, per functional, the number of paths on which
/// the integral was nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupation {
    pub estimates: Vec<MCEstimate>,
    pub positive: Vec<u64>,
}

pub fn occupation_functionals_with_hits<F>(
    p: &ProcessParams,
    domain: &DomainShape,
    x: &[f64],
    k: usize,
    n: u64,
    cfg: &SimConfig,
    f: F,
) -> Result<Occupation>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    check_n(n)?;
    check_start(p, domain, x)?;
    let eng = Engine::new(p, cfg)?;
    let res = batch_reduce(
        cfg.seed,
        n,
        || (Sums::new(k), vec![0.0; k], vec![0.0; k], vec![0u64; k]),
        |(acc, path, buf, pos_count), _, rng| {
            path.iter_mut().for_each(|v| *v = 0.0);
            let rec = eng.run(domain, x, rng, |pos, dt| {
                f(pos, buf);
                for i in 0..k {
                    path[i] += buf[i] * dt;
                }
            });
            acc.total += 1;
            if rec.censored {
                return;
            }
            acc.used += 1;
            for i in 0..k {
                acc.sum[i] += path[i];
                acc.sum2[i] += path[i] * path[i];
                pos_count[i] += (path[i] != 0.0) as u64;
            }
        },
        |a, b| {
            a.0.merge(b.0);
            a.3.iter_mut().zip(&b.3).for_each(|(x, y)| *x += y);
        },
    );
    Ok(Occupation { estimates: res.0.estimates(cfg.seed)?, positive: res.3 })
}

/// Cell-averaged Green density estimate on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenDensity {
    pub grid: OccupationGrid,
    /// Per cell: occupation time divided by cell volume.
    pub cells: Vec<MCEstimate>,
    pub exit_time: MCEstimate,
    /// Occupation of the masked cells divided by their total volume.
    pub region: Option<MCEstimate>,
}

/// Averages occupation grids over `n` paths; each cell estimates the cell
/// average of `G^Y_D(x, ·)`. With `region` (one flag per cell) the pooled
/// occupation of the flagged cells is estimated as well.
pub fn green_density(
    p: &ProcessParams,
    domain: &DomainShape,
    x: &[f64],
    grid: &OccupationGrid,
    region: Option<&[bool]>,
    n: u64,
    cfg: &SimConfig,
) -> Result<GreenDensity> {
    if let Some(r) = region {
        if r.len() != grid.len() {
            return Err(Error::InvalidShape("region mask length differs from the grid".into()));
        }
    }
    check_n(n)?;
    check_start(p, domain, x)?;
    if grid.low.len() != p.d {
        return Err(Error::DimensionMismatch { expected: p.d, got: grid.low.len() });
    }
    let eng = Engine::new(p, cfg)?;
    let m = grid.len();
    struct Acc {
        sum: Vec<f64>,
        sum2: Vec<f64>,
        scratch: Vec<f64>,
        touched: Vec<usize>,
        t: Sums,
        reg: [f64; 2],
    }
    let res = batch_reduce(
        cfg.seed,
        n,
        || Acc { sum: vec![0.0; m], sum2: vec![0.0; m], scratch: vec![0.0; m], touched: Vec::new(), t: Sums::new(1), reg: [0.0; 2] },
        |acc, _, rng| {
            let Acc { scratch, touched, .. } = acc;
            let rec = eng.run(domain, x, rng, |pos, dt| {
                if let Some(i) = grid.index(pos) {
                    if scratch[i] == 0.0 {
                        touched.push(i);
                    }
                    scratch[i] += dt;
                }
            });
            acc.t.total += 1;
            if !rec.censored {
                acc.t.used += 1;
                acc.t.sum[0] += rec.exit_time;
                acc.t.sum2[0] += rec.exit_time * rec.exit_time;
                let mut in_region = 0.0;
                for &i in acc.touched.iter() {
                    let v = acc.scratch[i];
                    acc.sum[i] += v;
                    acc.sum2[i] += v * v;
                    if region.is_some_and(|r| r[i]) {
                        in_region += v;
                    }
                }
                acc.reg[0] += in_region;
                acc.reg[1] += in_region * in_region;
            }
            for &i in acc.touched.iter() {
                acc.scratch[i] = 0.0;
            }
            acc.touched.clear();
        },
        |a, b| {
            a.sum.iter_mut().zip(&b.sum).for_each(|(x, y)| *x += y);
            a.sum2.iter_mut().zip(&b.sum2).for_each(|(x, y)| *x += y);
            a.t.merge(b.t);
            a.reg[0] += b.reg[0];
            a.reg[1] += b.reg[1];
        },
    );
    let exit_time = res.t.estimates(cfg.seed)?[0];
    let vol = grid.cell_volume();
    let cells = res
        .sum
        .iter()
        .zip(&res.sum2)
        .map(|(&s, &s2)| MCEstimate::from_sums(s, s2, res.t.used, res.t.total, cfg.seed).scaled(1.0 / vol))
        .collect::<Vec<_>>();
    let mut g = grid.clone();
    g.time = res.sum.iter().map(|s| s / res.t.used as f64).collect();
    let region = region.map(|r| {
        let cnt = r.iter().filter(|&&b| b).count().max(1) as f64;
        MCEstimate::from_sums(res.reg[0], res.reg[1], res.t.used, res.t.total, cfg.seed).scaled(1.0 / (cnt * vol))
    });
    Ok(GreenDensity { grid: g, cells, exit_time, region })
}

/// Paired estimate of `u(x1) / u(x2)` for a harmonic measure on the union of
/// two balls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarnackRatio {
    pub ratio: f64,
    pub stderr: f64,
    pub m: f64,
    pub u1: MCEstimate,
    pub u2: MCEstimate,
}

/// Largest separation factor for which the two-ball comparison is asserted.
pub fn harnack_cap(r: f64) -> f64 {
    1.0 / r - 0.5
}

/// Ratio of `u(x_i) = P_{x_i}(Y exits B(x1, r) ∪ B(x2, r) into far_target)`.
///
/// Both points use the same random stream per path index (common random
/// numbers), so the delta-method standard error includes their covariance.
/// The separation factor is `M = max(1, |x1 - x2| / r)`.
pub fn harnack_ratio_profile(
    p: &ProcessParams,
    centers: (&[f64], &[f64]),
    r: f64,
    far_target: &TargetSet,
    n: u64,
    cfg: &SimConfig,
) -> Result<HarnackRatio> {
    let (x1, x2) = centers;
    p.validate()?;
    check_n(n)?;
    if x1.len() != p.d || x2.len() != p.d {
        return Err(Error::DimensionMismatch { expected: p.d, got: x1.len().min(x2.len()) });
    }
    if !(r > 0.0 && r < 0.25) {
        return Err(Error::RadiusTooLarge { radius: r, limit: 0.25 });
    }
    let m = (dist(x1, x2) / r).max(1.0);
    let cap = harnack_cap(r);
    if m > cap {
        return Err(Error::CapViolated { m, cap });
    }
    let domain = two_balls(x1, x2, r)?;
    let eng = Engine::new(p, cfg)?;
    // sums: u1, u2, u1^2, u2^2, u1 u2
    let res = batch_reduce(
        cfg.seed,
        n,
        || ([0.0f64; 5], 0u64, 0u64),
        |acc, i, rng| {
            let a = eng.run(&domain, x1, rng, |_, _| {});
            let mut rng2 = crate::simulator::RngStream::new(cfg.seed, i).rng();
            let b = eng.run(&domain, x2, &mut rng2, |_, _| {});
            acc.2 += 1;
            if a.censored || b.censored {
                return;
            }
            acc.1 += 1;
            let u = far_target.contains(&a.exit_position) as u8 as f64;
            let v = far_target.contains(&b.exit_position) as u8 as f64;
            acc.0[0] += u;
            acc.0[1] += v;
            acc.0[2] += u * u;
            acc.0[3] += v * v;
            acc.0[4] += u * v;
        },
        |a, b| {
            for i in 0..5 {
                a.0[i] += b.0[i];
            }
            a.1 += b.1;
            a.2 += b.2;
        },
    );
    let (s, used, total) = res;
    if used == 0 {
        return Err(Error::AllPathsCensored);
    }
    let u1 = MCEstimate::from_sums(s[0], s[2], used, total, cfg.seed);
    let u2 = MCEstimate::from_sums(s[1], s[3], used, total, cfg.seed);
    let nf = used as f64;
    let cov = if used > 1 { (s[4] - nf * u1.mean * u2.mean) / (nf - 1.0) / nf } else { 0.0 };
    let (ratio, stderr) = ratio_with_stderr(u1.mean, u1.stderr, u2.mean, u2.stderr, cov);
    Ok(HarnackRatio { ratio, stderr, m, u1, u2 })
}

/// `B(x1, r) ∪ B(x2, r)` (a single ball when the centres coincide).
pub fn two_balls(x1: &[f64], x2: &[f64], r: f64) -> Result<DomainShape> {
    let b1 = DomainShape::ball(Point::new(x1.to_vec())?, r)?;
    if x1 == x2 {
        return Ok(b1);
    }
    DomainShape::union(vec![b1, DomainShape::ball(Point::new(x2.to_vec())?, r)?])
}

/// Delta-method ratio `a / b` with covariance `cov` of the two means.
pub fn ratio_with_stderr(a: f64, sa: f64, b: f64, sb: f64, cov: f64) -> (f64, f64) {
    if b == 0.0 {
        return (f64::INFINITY, f64::INFINITY);
    }
    let q = a / b;
    let var = (sa * sa + q * q * sb * sb - 2.0 * q * cov) / (b * b);
    (q, var.max(0.0).sqrt())
}

/// Pooled standard error of a difference of independent estimates.
pub fn pooled_se(a: &MCEstimate, b: &MCEstimate) -> f64 {
    (a.stderr * a.stderr + b.stderr * b.stderr).sqrt()
}

/// Unit vector helper used by experiment builders.
pub fn unit(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|x| x / n).collect()
}
