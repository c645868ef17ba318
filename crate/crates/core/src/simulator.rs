//! Path simulation of the truncated process to domain exit, and exact
//! exit-position sampling for the untruncated stable process from balls.
//!
//! The truncated process is approximated by a compound Poisson process with
//! jumps of size in `[ε, 1)` plus a Brownian motion carrying the variance of
//! the jumps below `ε`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::{dist, norm, DomainShape};
use crate::error::{Error, Result};
use crate::kernels::{constant_a, sphere_surface_area, ProcessParams};

/// Treatment of jumps smaller than the cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallJumpMode {
    /// Brownian motion with the variance of the removed jumps.
    #[default]
    Gaussian,
    /// Jumps below the cutoff are discarded.
    Drop,
}

/// Which Lévy measure the large jumps follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpLaw {
    /// Jumps restricted to `ε <= |y| < 1`.
    #[default]
    Truncated,
    /// All jumps `|y| >= ε` of the stable Lévy measure.
    Stable,
}

fn default_max_time() -> f64 {
    1e3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub epsilon: f64,
    #[serde(rename = "h", alias = "time_step")]
    pub time_step: f64,
    #[serde(default = "default_max_time")]
    pub max_time: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub boundary_refine: bool,
    #[serde(default)]
    pub small_jumps: SmallJumpMode,
    #[serde(default)]
    pub jump_law: JumpLaw,
}

impl SimConfig {
    pub fn new(epsilon: f64, time_step: f64, seed: u64) -> Result<Self> {
        let c = Self {
            epsilon,
            time_step,
            max_time: default_max_time(),
            seed,
            boundary_refine: false,
            small_jumps: SmallJumpMode::Gaussian,
            jump_law: JumpLaw::Truncated,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::ParamOutOfRange(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(self.time_step > 0.0 && self.time_step.is_finite()) {
            return Err(Error::ParamOutOfRange(format!("time_step must be positive, got {}", self.time_step)));
        }
        if !(self.max_time > 0.0) {
            return Err(Error::ParamOutOfRange(format!("max_time must be positive, got {}", self.max_time)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitRecord {
    pub exit_position: Vec<f64>,
    pub exit_time: f64,
    pub by_jump: bool,
    pub last_interior: Vec<f64>,
    pub censored: bool,
}

/// Independent random stream keyed by `(seed, stream_id)`.
///
/// ChaCha is counter based: the stream id selects a disjoint keystream, so a
/// path's randomness depends only on its index and never on scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

fn check_eps(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::ParamOutOfRange(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    Ok(())
}

/// Total mass of the Lévy measure on `ε <= |y| < 1`.
pub fn jump_rate(p: &ProcessParams, epsilon: f64) -> Result<f64> {
    check_eps(epsilon)?;
    let aw = constant_a(p) * sphere_surface_area(p.d);
    Ok(aw * (epsilon.powf(-p.alpha) - 1.0) / p.alpha)
}

/// Per-coordinate standard deviation per unit time of the Brownian
/// replacement for jumps below `ε`.
pub fn small_jump_std(p: &ProcessParams, epsilon: f64) -> Result<f64> {
    check_eps(epsilon)?;
    let aw = constant_a(p) * sphere_surface_area(p.d);
    Ok((aw * epsilon.powf(2.0 - p.alpha) / (p.d as f64 * (2.0 - p.alpha))).sqrt())
}

/// Uniform direction on the unit sphere of `R^d`, written into `out`.
#[inline]
fn random_direction<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    if out.len() == 2 {
        let t: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        let (s, c) = t.sin_cos();
        out[0] = c;
        out[1] = s;
        return;
    }
    loop {
        let mut s = 0.0;
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
            s += *v * *v;
        }
        if s > 1e-300 {
            let inv = s.sqrt().recip();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

/// Jump vector of the truncated process with size in `[ε, 1)`.
pub fn sample_truncated_jump<R: Rng + ?Sized>(p: &ProcessParams, epsilon: f64, rng: &mut R) -> Vec<f64> {
    let mut v = vec![0.0; p.d];
    let e = epsilon.powf(-p.alpha);
    let r = truncated_radius(e, p.alpha, rng.random());
    random_direction(rng, &mut v);
    v.iter_mut().for_each(|c| *c *= r);
    v
}

#[inline]
fn truncated_radius(eps_pow: f64, alpha: f64, u: f64) -> f64 {
    let r = (eps_pow - u * (eps_pow - 1.0)).powf(-1.0 / alpha);
    // Guard the open upper end against rounding.
    if r >= 1.0 {
        1.0 - f64::EPSILON
    } else {
        r
    }
}

/// Precomputed per-run constants of the path engine.
#[derive(Debug, Clone)]
pub struct Engine {
    d: usize,
    alpha: f64,
    rate: f64,
    sigma: f64,
    eps_pow: f64,
    epsilon: f64,
    law: JumpLaw,
    h: f64,
    max_time: f64,
    refine: bool,
}

/// Smallest refined step as a fraction of `h`.
const REFINE_FLOOR: f64 = 1e-6;

impl Engine {
    pub fn new(p: &ProcessParams, cfg: &SimConfig) -> Result<Self> {
        p.validate()?;
        cfg.validate()?;
        let aw = constant_a(p) * sphere_surface_area(p.d);
        let eps_pow = cfg.epsilon.powf(-p.alpha);
        let rate = match cfg.jump_law {
            JumpLaw::Truncated => jump_rate(p, cfg.epsilon)?,
            JumpLaw::Stable => aw * eps_pow / p.alpha,
        };
        let sigma = match cfg.small_jumps {
            SmallJumpMode::Gaussian => small_jump_std(p, cfg.epsilon)?,
            SmallJumpMode::Drop => 0.0,
        };
        Ok(Self {
            d: p.d,
            alpha: p.alpha,
            rate,
            sigma,
            eps_pow,
            epsilon: cfg.epsilon,
            law: cfg.jump_law,
            h: cfg.time_step,
            max_time: cfg.max_time,
            refine: cfg.boundary_refine,
        })
    }

    fn jump_radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match self.law {
            JumpLaw::Truncated => truncated_radius(self.eps_pow, self.alpha, u),
            JumpLaw::Stable => self.epsilon * (1.0 - u).powf(-1.0 / self.alpha),
        }
    }

    /// Runs one path from `start` until it leaves `domain`, reporting each
    /// holding interval to `observer` as `(position, duration)`.
    pub fn run<R, F>(&self, domain: &DomainShape, start: &[f64], rng: &mut R, mut observer: F) -> ExitRecord
    where
        R: Rng + ?Sized,
        F: FnMut(&[f64], f64),
    {
        let d = self.d;
        let mut pos = start.to_vec();
        let mut next = vec![0.0; d];
        let mut t = 0.0;
        let exp1 = |rng: &mut R| -> f64 { rng.sample(Exp1) };
        let mut next_jump = exp1(rng) / self.rate;
        let sd_scale = 3.0 * self.sigma * (d as f64).sqrt();
        let floor = REFINE_FLOOR * self.h;
        let censor = |pos: &[f64], t: f64| ExitRecord {
            exit_position: pos.to_vec(),
            exit_time: t,
            by_jump: false,
            last_interior: pos.to_vec(),
            censored: true,
        };
        loop {
            let seg_end = next_jump.min(self.max_time);
            if self.sigma > 0.0 {
                while t < seg_end {
                    let mut dt = self.h.min(seg_end - t);
                    if self.refine {
                        let bd = domain.boundary_distance_unchecked(&pos);
                        let cap = (bd / sd_scale).powi(2).max(floor);
                        dt = dt.min(cap);
                    }
                    let s = self.sigma * dt.sqrt();
                    for i in 0..d {
                        let z: f64 = rng.sample(StandardNormal);
                        next[i] = pos[i] + s * z;
                    }
                    observer(&pos, dt);
                    t += dt;
                    if !domain.contains_unchecked(&next) {
                        return ExitRecord {
                            exit_position: next,
                            exit_time: t,
                            by_jump: false,
                            last_interior: pos,
                            censored: false,
                        };
                    }
                    std::mem::swap(&mut pos, &mut next);
                }
            } else if seg_end > t {
                observer(&pos, seg_end - t);
            }
            if next_jump >= self.max_time {
                return censor(&pos, self.max_time);
            }
            t = next_jump;
            let r = self.jump_radius(rng);
            random_direction(rng, &mut next);
            for i in 0..d {
                next[i] = pos[i] + r * next[i];
            }
            if !domain.contains_unchecked(&next) {
                return ExitRecord {
                    exit_position: next,
                    exit_time: t,
                    by_jump: true,
                    last_interior: pos,
                    censored: false,
                };
            }
            std::mem::swap(&mut pos, &mut next);
            next_jump = t + exp1(rng) / self.rate;
        }
    }
}

fn check_start(p: &ProcessParams, domain: &DomainShape, start: &[f64]) -> Result<()> {
    if domain.dim() != p.d {
        return Err(Error::DimensionMismatch { expected: p.d, got: domain.dim() });
    }
    if !domain.contains(start)? {
        return Err(Error::PointNotInterior);
    }
    Ok(())
}

/// Simulates one path of the approximated truncated process until it exits
/// `domain`. Hitting `max_time` sets the censored flag.
pub fn simulate_exit<R: Rng + ?Sized>(
    p: &ProcessParams,
    domain: &DomainShape,
    start: &[f64],
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<ExitRecord> {
    check_start(p, domain, start)?;
    Ok(Engine::new(p, cfg)?.run(domain, start, rng, |_, _| {}))
}

/// Regular axis-aligned grid accumulating occupation time per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationGrid {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
    pub cells: Vec<usize>,
    pub time: Vec<f64>,
}

impl OccupationGrid {
    pub fn new(low: Vec<f64>, high: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        if low.len() != high.len() || low.len() != cells.len() || low.is_empty() {
            return Err(Error::Config("grid low, high and cells must share one dimension".into()));
        }
        if low.iter().zip(&high).any(|(a, b)| !(a < b)) || cells.contains(&0) {
            return Err(Error::Config("grid needs low < high and at least one cell per axis".into()));
        }
        let n = cells.iter().product();
        Ok(Self { low, high, cells, time: vec![0.0; n] })
    }

    /// A grid of `cells_per_axis^d` cells covering the bounding box of a ball.
    pub fn around(center: &[f64], radius: f64, cells_per_axis: usize) -> Result<Self> {
        Self::new(
            center.iter().map(|c| c - radius).collect(),
            center.iter().map(|c| c + radius).collect(),
            vec![cells_per_axis; center.len()],
        )
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        (self.high[axis] - self.low[axis]) / self.cells[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.cells.len()).map(|i| self.cell_width(i)).product()
    }

    /// Flat index of the cell containing `p`, if any.
    #[inline]
    pub fn index(&self, p: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for i in 0..self.cells.len() {
            let f = (p[i] - self.low[i]) / (self.high[i] - self.low[i]);
            if !(0.0..1.0).contains(&f) {
                return None;
            }
            let k = ((f * self.cells[i] as f64) as usize).min(self.cells[i] - 1);
            idx = idx * self.cells[i] + k;
        }
        Some(idx)
    }

    /// Multi-index of a flat cell index.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.cells.len()];
        for i in (0..self.cells.len()).rev() {
            out[i] = flat % self.cells[i];
            flat /= self.cells[i];
        }
        out
    }

    pub fn cell_low(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(i, &k)| self.low[i] + k as f64 * self.cell_width(i))
            .collect()
    }

    pub fn cell_center(&self, flat: usize) -> Vec<f64> {
        self.cell_low(flat)
            .iter()
            .enumerate()
            .map(|(i, &a)| a + 0.5 * self.cell_width(i))
            .collect()
    }

    #[inline]
    pub fn add(&mut self, p: &[f64], dt: f64) {
        if let Some(i) = self.index(p) {
            self.time[i] += dt;
        }
    }

    pub fn total(&self) -> f64 {
        self.time.iter().sum()
    }

    pub fn clear(&mut self) {
        self.time.iter_mut().for_each(|t| *t = 0.0);
    }

    /// Cell-wise addition of another grid with the same geometry.
    pub fn merge(&mut self, other: &OccupationGrid) -> Result<()> {
        if self.low != other.low || self.high != other.high || self.cells != other.cells {
            return Err(Error::Config("cannot merge grids of different geometry".into()));
        }
        self.time.iter_mut().zip(&other.time).for_each(|(a, b)| *a += b);
        Ok(())
    }
}

/// Runs one path like [`simulate_exit`] and adds its occupation time to `grid`.
pub fn simulate_occupation<R: Rng + ?Sized>(
    p: &ProcessParams,
    domain: &DomainShape,
    start: &[f64],
    grid: &mut OccupationGrid,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<ExitRecord> {
    check_start(p, domain, start)?;
    if grid.low.len() != p.d {
        return Err(Error::DimensionMismatch { expected: p.d, got: grid.low.len() });
    }
    Ok(Engine::new(p, cfg)?.run(domain, start, rng, |pos, dt| grid.add(pos, dt)))
}

// ---------------------------------------------------------------------------
// Exact exit sampling for the stable process
// ---------------------------------------------------------------------------

/// Largest dimension supported by [`BallExitSampler`].
pub const MAX_SAMPLER_DIM: usize = 16;

/// Sampler for the exit position of the stable process from a ball.
///
/// For a start at the centre, `1 - r^2/|z|^2` is Beta(1 - α/2, α/2). A general
/// start is reduced to this by rejection on the radial marginal (bounded by
/// `(1 - s^2)^{α/2 - 1}` where `s` is the relative offset), followed by
/// rejection for the direction against the `|x - z|^{-d}` factor.
#[derive(Debug, Clone)]
pub struct BallExitSampler {
    d: usize,
    beta: Beta<f64>,
}

impl BallExitSampler {
    pub fn new(p: &ProcessParams) -> Result<Self> {
        p.validate()?;
        if p.d > MAX_SAMPLER_DIM {
            return Err(Error::InvalidParams(format!("exit sampler supports d <= {MAX_SAMPLER_DIM}")));
        }
        let beta = Beta::new(1.0 - p.alpha / 2.0, p.alpha / 2.0)
            .map_err(|e| Error::InvalidParams(e.to_string()))?;
        Ok(Self { d: p.d, beta })
    }

    /// Exit radius relative to the ball radius for a start at the centre.
    #[inline]
    fn centred_radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let u: f64 = self.beta.sample(rng);
            if u > 0.0 && u < 1.0 {
                return (1.0 - u).sqrt().recip();
            }
        }
    }

    /// Exit position from `B(center, radius)` started at the centre.
    pub fn sample_centred<R: Rng + ?Sized>(&self, center: &[f64], radius: f64, rng: &mut R, out: &mut [f64]) {
        let rho = self.centred_radius(rng);
        let mut buf = [0.0; MAX_SAMPLER_DIM];
        let theta = &mut buf[..self.d];
        random_direction(rng, theta);
        place_outside(center, radius, rho, theta, out);
    }

    /// Exit position from `B(center, radius)` started at `x`.
    pub fn sample<R: Rng + ?Sized>(&self, center: &[f64], radius: f64, x: &[f64], rng: &mut R) -> Vec<f64> {
        let d = self.d;
        let rel: Vec<f64> = x.iter().zip(center).map(|(a, c)| (a - c) / radius).collect();
        let s = norm(&rel);
        let mut out = vec![0.0; d];
        if s == 0.0 {
            self.sample_centred(center, radius, rng, &mut out);
            return out;
        }
        let s2 = s * s;
        // Radial coordinate (unit ball).
        let rho = loop {
            let rho = self.centred_radius(rng);
            let accept = (1.0 - s2) / (1.0 - s2 / (rho * rho));
            if rng.random::<f64>() < accept {
                break rho;
            }
        };
        // Direction.
        let lo = (rho - s).powi(d as i32);
        let mut theta = vec![0.0; d];
        loop {
            random_direction(rng, &mut theta);
            let dz: f64 = rel.iter().zip(&theta).map(|(a, t)| (a - rho * t).powi(2)).sum();
            let accept = lo / dz.powf(d as f64 / 2.0);
            if rng.random::<f64>() < accept {
                break;
            }
        }
        place_outside(center, radius, rho, &theta, &mut out);
        out
    }
}

/// Writes `center + radius * rho * theta` into `out`. Exit radii within
/// rounding of the sphere (frequent for small `α/2`) are nudged outwards so
/// that the result is strictly outside the closed ball.
#[inline]
fn place_outside(center: &[f64], radius: f64, mut rho: f64, theta: &[f64], out: &mut [f64]) {
    loop {
        let r = radius * rho;
        let mut s = 0.0;
        for i in 0..out.len() {
            out[i] = center[i] + r * theta[i];
            s += (out[i] - center[i]) * (out[i] - center[i]);
        }
        if s > radius * radius {
            return;
        }
        rho *= 1.0 + 4.0 * f64::EPSILON;
    }
}

/// Exact sample of the stable process's exit position from a ball.
pub fn sample_stable_ball_exit<R: Rng + ?Sized>(
    p: &ProcessParams,
    center: &[f64],
    radius: f64,
    x: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    if center.len() != p.d || x.len() != p.d {
        return Err(Error::DimensionMismatch { expected: p.d, got: x.len() });
    }
    if !(radius > 0.0) || !(dist(x, center) < radius) {
        return Err(Error::PointNotInterior);
    }
    Ok(BallExitSampler::new(p)?.sample(center, radius, x, rng))
}

/// Iteration cap for walk-on-spheres.
pub const WOS_MAX_STEPS: usize = 100_000;

/// Exact sample of the stable process's exit position from `domain`, by
/// repeatedly exiting the largest inscribed ball around the current point.
pub fn walk_on_spheres_exit<R: Rng + ?Sized>(
    p: &ProcessParams,
    domain: &DomainShape,
    start: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_start(p, domain, start)?;
    let sampler = BallExitSampler::new(p)?;
    wos_with(&sampler, domain, start, rng)
}

pub(crate) fn wos_with<R: Rng + ?Sized>(
    sampler: &BallExitSampler,
    domain: &DomainShape,
    start: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut pos = start.to_vec();
    let mut next = vec![0.0; pos.len()];
    for _ in 0..WOS_MAX_STEPS {
        let bd = domain.boundary_distance_unchecked(&pos);
        sampler.sample_centred(&pos, bd, rng, &mut next);
        if !domain.contains_unchecked(&next) {
            return Ok(next);
        }
        std::mem::swap(&mut pos, &mut next);
    }
    Err(Error::StepLimitExceeded(WOS_MAX_STEPS))
}

// ---------------------------------------------------------------------------
// Deterministic parallel batches
// ---------------------------------------------------------------------------

/// Paths per work unit; fixed so that reductions do not depend on threads.
pub const CHUNK: u64 = 1024;

/// Runs `path(index, rng)` for `index in 0..n`, each with its own stream, and
/// folds the results chunk by chunk. Chunk accumulators are combined in index
/// order, so the result is identical for any number of worker threads.
pub fn batch_reduce<A, F, G>(seed: u64, n: u64, init: impl Fn() -> A + Sync, path: F, merge: G) -> A
where
    A: Send,
    F: Fn(&mut A, u64, &mut ChaCha8Rng) + Sync,
    G: Fn(&mut A, A),
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let mut rng = RngStream::new(seed, i).rng();
                path(&mut acc, i, &mut rng);
            }
            acc
        })
        .collect();
    let mut total = init();
    for p in parts {
        merge(&mut total, p);
    }
    total
}
