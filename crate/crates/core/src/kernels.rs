//! Closed-form constants and quadrature-based evaluation of the analytic
//! objects attached to the symmetric α-stable process and its truncation:
//! the characteristic exponent of the truncated process, the ball Green
//! function and Poisson kernel of the stable process, (conditioned) mean exit
//! times from balls, and the Khasminskii radius `r0`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta, ln_beta};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, GaussRule, KernelValue, Nested, QuadratureConfig};

/// Dimension and stability index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessParams {
    pub d: usize,
    pub alpha: f64,
}

impl ProcessParams {
    pub fn new(d: usize, alpha: f64) -> Result<Self> {
        let p = Self { d, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidParams(format!("d must be >= 2, got {}", self.d)));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::InvalidParams(format!(
                "alpha must lie in (0, 2), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Surface area of the unit sphere in `R^d`, `2 π^{d/2} / Γ(d/2)`.
pub fn sphere_surface_area(d: usize) -> f64 {
    assert!(d >= 1, "sphere_surface_area requires d >= 1");
    let h = d as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// Normalisation `A(d, -α)` of the Lévy density `A |y|^{-d-α}`.
pub fn constant_a(p: &ProcessParams) -> f64 {
    let d = p.d as f64;
    let a = p.alpha;
    a * 2f64.powf(a - 1.0) * PI.powf(-d / 2.0) * gamma((d + a) / 2.0) / gamma(1.0 - a / 2.0)
}

/// Mass of the Lévy measure outside the unit ball, `B(d, α) = A ω_{d-1} / α`.
pub fn constant_b(p: &ProcessParams) -> f64 {
    constant_a(p) * sphere_surface_area(p.d) / p.alpha
}

/// Normalising constant of the ball Poisson kernel,
/// `Γ(d/2) sin(πα/2) π^{-d/2-1}`.
pub fn poisson_constant(p: &ProcessParams) -> f64 {
    let h = p.d as f64 / 2.0;
    gamma(h) * (PI * p.alpha / 2.0).sin() * PI.powf(-h - 1.0)
}

/// Constant of the ball Green function, `Γ(d/2) / (2^α π^{d/2} Γ(α/2)^2)`.
pub fn green_constant(p: &ProcessParams) -> f64 {
    let h = p.d as f64 / 2.0;
    let g = gamma(p.alpha / 2.0);
    gamma(h) / (2f64.powf(p.alpha) * PI.powf(h) * g * g)
}

fn check_point(p: &ProcessParams, x: &[f64]) -> Result<()> {
    if x.len() != p.d {
        return Err(Error::DimensionMismatch { expected: p.d, got: x.len() });
    }
    Ok(())
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

// ---------------------------------------------------------------------------
// Characteristic exponent
// ---------------------------------------------------------------------------

/// Nodes per panel of the angular rule used for spherical averages.
const ANGLE_NODES: usize = 64;

struct SphericalAverage {
    rule: GaussRule,
    norm: f64,
    d: usize,
}

impl SphericalAverage {
    fn new(d: usize) -> Self {
        Self {
            rule: GaussRule::new(ANGLE_NODES),
            norm: sphere_surface_area(d - 1) / sphere_surface_area(d),
            d,
        }
    }

    /// Spherical average of `1 - cos(t θ_1)` over the unit sphere.
    fn one_minus_cos(&self, t: f64) -> f64 {
        let panels = 1 + (t / 16.0).floor() as usize;
        let width = PI / panels as f64;
        let mut acc = 0.0;
        for k in 0..panels {
            let a = k as f64 * width;
            acc += self.rule.integrate(
                |phi| {
                    let s = (0.5 * t * phi.cos()).sin();
                    2.0 * s * s * phi.sin().powi(self.d as i32 - 2)
                },
                a,
                a + width,
            );
        }
        self.norm * acc
    }
}

/// The characteristic exponent ψ of the truncated process at any ξ with
/// `|ξ| = xi_norm`.
///
/// The `d`-dimensional integral over `{|y| < 1}` is reduced to a radial
/// integral of the spherical average of `1 - cos`, and the substitution
/// `ρ = u^{1/(2-α)}` removes the algebraic behaviour at the origin.
pub fn char_exponent_psi(
    p: &ProcessParams,
    xi_norm: f64,
    quad: &QuadratureConfig,
) -> Result<KernelValue> {
    p.validate()?;
    if !(xi_norm >= 0.0) || !xi_norm.is_finite() {
        return Err(Error::ParamOutOfRange(format!("xi_norm must be >= 0, got {xi_norm}")));
    }
    if xi_norm == 0.0 {
        return Ok(KernelValue::exact(0.0));
    }
    let avg = SphericalAverage::new(p.d);
    let e = 2.0 - p.alpha;
    let pref = constant_a(p) * sphere_surface_area(p.d) / e;
    let integrand = |u: f64| {
        let rho = u.powf(1.0 / e);
        avg.one_minus_cos(rho * xi_norm) / (rho * rho)
    };
    let mut breaks = Vec::new();
    if xi_norm > 1.0 {
        breaks.push(xi_norm.recip().powf(e));
    }
    let kv = integrate(integrand, 0.0, 1.0, &breaks, quad)?;
    Ok(KernelValue { value: pref * kv.value, est_error: pref * kv.est_error })
}

// ---------------------------------------------------------------------------
// Poisson kernel of a ball
// ---------------------------------------------------------------------------

/// Exit-position density at `z` of the stable process started at `x` in
/// `B(center, radius)`.
pub fn stable_poisson_ball(
    p: &ProcessParams,
    center: &[f64],
    radius: f64,
    x: &[f64],
    z: &[f64],
) -> Result<f64> {
    p.validate()?;
    check_point(p, center)?;
    check_point(p, x)?;
    check_point(p, z)?;
    let r2 = radius * radius;
    let x2 = dist2(x, center);
    let z2 = dist2(z, center);
    if !(x2 < r2) {
        return Err(Error::PointNotInterior);
    }
    if !(z2 > r2) {
        return Err(Error::PointNotExterior);
    }
    Ok(poisson_ball_unchecked(p, poisson_constant(p), r2, x2, z2, dist2(x, z)))
}

pub(crate) fn poisson_ball_unchecked(
    p: &ProcessParams,
    c1: f64,
    r2: f64,
    x2: f64,
    z2: f64,
    xz2: f64,
) -> f64 {
    let h = p.alpha / 2.0;
    c1 * ((r2 - x2) / (z2 - r2)).powf(h) * xz2.powf(-(p.d as f64) / 2.0)
}

// ---------------------------------------------------------------------------
// Green function of a ball
// ---------------------------------------------------------------------------

/// Evaluator for the ball Green function with constants precomputed.
///
/// `G(x, y) = C |x-y|^{α-d} ∫_0^w s^{α/2-1} (1+s)^{-d/2} ds`; the integral is an
/// incomplete beta function `B(α/2, (d-α)/2; w/(1+w))`.
#[derive(Debug, Clone)]
pub struct GreenBall {
    d: usize,
    alpha: f64,
    beta: IncompleteBeta,
    scale: f64,
}

/// Regularised incomplete beta `I_t(a, b)` for fixed `(a, b)`, with the
/// log-beta normaliser computed once.
#[derive(Debug, Clone)]
struct IncompleteBeta {
    a: f64,
    b: f64,
    ln_beta: f64,
}

impl IncompleteBeta {
    fn new(a: f64, b: f64) -> Self {
        Self { a, b, ln_beta: ln_beta(a, b) }
    }

    /// `I_t(a, b)` at `t = w / (1 + w)`, taking `w >= 0` to keep `1 - t`
    /// accurate when `w` is large.
    fn eval_odds(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        if w == f64::INFINITY {
            return 1.0;
        }
        let (a, b) = (self.a, self.b);
        let l1w = w.ln_1p();
        let t = w / (1.0 + w);
        let front = (a * (w.ln() - l1w) - b * l1w - self.ln_beta).exp();
        if t < (a + 1.0) / (a + b + 2.0) {
            front * continued_fraction(a, b, t) / a
        } else {
            1.0 - front * continued_fraction(b, a, 1.0 / (1.0 + w)) / b
        }
    }
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..300 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Relative accuracy attributed to the incomplete-beta evaluation.
const GREEN_REL_ACCURACY: f64 = 1e-13;

impl GreenBall {
    pub fn new(p: &ProcessParams) -> Self {
        let a = p.alpha / 2.0;
        let b = (p.d as f64 - p.alpha) / 2.0;
        Self {
            d: p.d,
            alpha: p.alpha,
            beta: IncompleteBeta::new(a, b),
            scale: green_constant(p) * beta(a, b),
        }
    }

    /// `G(x, y) |x-y|^{d-α}` in terms of squared norms relative to the centre.
    #[inline]
    pub fn reduced(&self, r2: f64, x2: f64, y2: f64, xy2: f64) -> f64 {
        let num = (r2 - x2) * (r2 - y2);
        if num <= 0.0 {
            return 0.0;
        }
        let w = num / (r2 * xy2);
        self.scale * self.beta.eval_odds(w)
    }

    #[inline]
    pub fn value(&self, r2: f64, x2: f64, y2: f64, xy2: f64) -> f64 {
        self.reduced(r2, x2, y2, xy2) * xy2.powf((self.alpha - self.d as f64) / 2.0)
    }
}

/// Green function of the stable process killed on leaving `B(center, radius)`.
pub fn stable_green_ball(
    p: &ProcessParams,
    center: &[f64],
    radius: f64,
    x: &[f64],
    y: &[f64],
) -> Result<KernelValue> {
    p.validate()?;
    check_point(p, center)?;
    check_point(p, x)?;
    check_point(p, y)?;
    let r2 = radius * radius;
    let x2 = dist2(x, center);
    let y2 = dist2(y, center);
    if !(x2 < r2) || !(y2 < r2) {
        return Err(Error::PointNotInterior);
    }
    let xy2 = dist2(x, y);
    if xy2 == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let v = GreenBall::new(p).value(r2, x2, y2, xy2);
    Ok(KernelValue { value: v, est_error: GREEN_REL_ACCURACY * v })
}

// ---------------------------------------------------------------------------
// Polar integration in a reduced three-dimensional frame
// ---------------------------------------------------------------------------

// For integrands that only depend on distances to points lying in a common
// plane, `R^d` is reduced to (in-plane a, in-plane b, |perpendicular part|).
type V3 = [f64; 3];

#[inline]
fn dot3(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn axpy3(p: V3, s: f64, t: V3) -> V3 {
    [p[0] + s * t[0], p[1] + s * t[1], p[2] + s * t[2]]
}

#[inline]
fn norm2_3(a: V3) -> f64 {
    dot3(a, a)
}

#[inline]
fn sub3(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Distance from `p` (inside the unit ball) along the unit direction `t` to
/// the unit sphere.
#[inline]
fn ray_to_unit_sphere(p: V3, t: V3) -> f64 {
    let b = dot3(p, t);
    let c = norm2_3(p) - 1.0;
    -b + (b * b - c).max(0.0).sqrt()
}

/// Orthonormal in-plane frame `(u, v)` with `u` along `dir` (in-plane vector).
fn plane_frame(dir: V3) -> (V3, V3) {
    let n = norm2_3(dir).sqrt();
    let u = [dir[0] / n, dir[1] / n, 0.0];
    let v = [-u[1], u[0], 0.0];
    (u, v)
}

/// Integrates `ray(θ)` over the unit sphere of directions in `R^d`, where
/// `θ = cos φ u + sin φ (cos ψ v + sin ψ e_3)`. The integrand must be
/// symmetric under reflection through the reduced plane.
fn sphere_integral<R>(
    d: usize,
    u: V3,
    v: V3,
    phi_breaks: &[f64],
    axisymmetric: bool,
    cfg: &QuadratureConfig,
    mut ray: R,
) -> Result<KernelValue>
where
    R: FnMut(f64, V3) -> Result<KernelValue>,
{
    let dir = |phi: f64, psi: f64| -> V3 {
        let (sp, cp) = phi.sin_cos();
        let (ss, cs) = psi.sin_cos();
        [cp * u[0] + sp * cs * v[0], cp * u[1] + sp * cs * v[1], sp * ss]
    };
    let nested = Nested::default();
    let inner = cfg.inner();
    if axisymmetric {
        let w = sphere_surface_area(d - 1);
        let outer = integrate(
            |phi| {
                let s = phi.sin().powi(d as i32 - 2);
                s * nested.eval(ray(phi, dir(phi, 0.0)))
            },
            0.0,
            PI,
            phi_breaks,
            cfg,
        );
        let kv = nested.finish(outer)?;
        return Ok(KernelValue { value: w * kv.value, est_error: w * kv.est_error });
    }
    if d == 2 {
        let mut breaks: Vec<f64> = phi_breaks.iter().flat_map(|&b| [b, -b]).collect();
        breaks.push(0.0);
        let outer = integrate(|phi| nested.eval(ray(phi, dir(phi, 0.0))), -PI, PI, &breaks, cfg);
        return nested.finish(outer);
    }
    let w = sphere_surface_area(d - 2);
    let ray = std::cell::RefCell::new(ray);
    let outer = integrate(
        |phi| {
            let s = phi.sin().powi(d as i32 - 2);
            let mid_nested = Nested::default();
            let mid = integrate(
                |psi| {
                    let sp = psi.sin().powi(d as i32 - 3);
                    sp * mid_nested.eval((ray.borrow_mut())(phi, dir(phi, psi)))
                },
                0.0,
                PI,
                &[],
                &inner,
            );
            s * nested.eval(mid_nested.finish(mid))
        },
        0.0,
        PI,
        phi_breaks,
        cfg,
    );
    let kv = nested.finish(outer)?;
    Ok(KernelValue { value: w * kv.value, est_error: w * kv.est_error })
}

/// `∫_0^L ρ^{d-1} g(ρ) dρ` where `g(ρ) = ρ^{α-d} h(ρ)` with `h` bounded, via
/// `ρ = L t^{1/α}`; `h` is passed in directly.
fn singular_radial<H: FnMut(f64) -> f64>(
    alpha: f64,
    len: f64,
    mut h: H,
    cfg: &QuadratureConfig,
) -> Result<KernelValue> {
    if len <= 0.0 {
        return Ok(KernelValue::exact(0.0));
    }
    let pref = len.powf(alpha) / alpha;
    let kv = integrate(|t| h(len * t.powf(1.0 / alpha)), 0.0, 1.0, &[], cfg)?;
    Ok(KernelValue { value: pref * kv.value, est_error: pref * kv.est_error })
}

fn to_unit_frame(center: &[f64], radius: f64, x: &[f64]) -> Vec<f64> {
    x.iter().zip(center).map(|(a, c)| (a - c) / radius).collect()
}

/// Reduces `x` and `z` (already in unit-ball coordinates) to the frame where
/// `x` lies on the first axis and `z` in the first two coordinates.
fn reduce_pair(x: &[f64], z: &[f64]) -> (V3, V3) {
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nx == 0.0 {
        return ([0.0; 3], [nz, 0.0, 0.0]);
    }
    let along: f64 = x.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() / nx;
    let perp = (nz * nz - along * along).max(0.0).sqrt();
    ([nx, 0.0, 0.0], [along, perp, 0.0])
}

// ---------------------------------------------------------------------------
// Exit times
// ---------------------------------------------------------------------------

/// `E_x τ_{B(0, radius)}` for the stable process, computed as the integral of
/// the ball Green function in polar coordinates centred at `x`.
pub fn expected_exit_time_ball(
    p: &ProcessParams,
    radius: f64,
    x: &[f64],
    quad: &QuadratureConfig,
) -> Result<KernelValue> {
    p.validate()?;
    check_point(p, x)?;
    if !(radius > 0.0) {
        return Err(Error::ParamOutOfRange(format!("radius must be positive, got {radius}")));
    }
    let origin = vec![0.0; p.d];
    let xu = to_unit_frame(&origin, radius, x);
    let nx = xu.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(nx < 1.0) {
        return Err(Error::PointNotInterior);
    }
    let g = GreenBall::new(p);
    let xr: V3 = [nx, 0.0, 0.0];
    let x2 = nx * nx;
    let inner = quad.inner();
    let kv = sphere_integral(p.d, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], &[], true, quad, |_, t| {
        let len = ray_to_unit_sphere(xr, t);
        singular_radial(
            p.alpha,
            len,
            |rho| {
                let y = axpy3(xr, rho, t);
                g.reduced(1.0, x2, norm2_3(y), rho * rho)
            },
            &inner,
        )
    })?;
    let s = radius.powf(p.alpha);
    Ok(KernelValue { value: s * kv.value, est_error: s * kv.est_error })
}

/// `E^z_x τ_{B(0, radius)}`: expected lifetime of the stable process in the
/// ball conditioned (Doob `G(·, z)`-transform) to die at `z`.
///
/// The integral `∫ G(x,y) G(y,z) / G(x,z) dy` is split into a small ball
/// around `z`, integrated in polar coordinates centred at `z`, and the rest of
/// the ball, integrated in polar coordinates centred at `x`.
pub fn conditioned_exit_time_ball(
    p: &ProcessParams,
    radius: f64,
    x: &[f64],
    z: &[f64],
    quad: &QuadratureConfig,
) -> Result<KernelValue> {
    p.validate()?;
    check_point(p, x)?;
    check_point(p, z)?;
    if !(radius > 0.0) {
        return Err(Error::ParamOutOfRange(format!("radius must be positive, got {radius}")));
    }
    let origin = vec![0.0; p.d];
    let xu = to_unit_frame(&origin, radius, x);
    let zu = to_unit_frame(&origin, radius, z);
    let (xr, zr) = reduce_pair(&xu, &zu);
    if !(norm2_3(xr) < 1.0) || !(norm2_3(zr) < 1.0) {
        return Err(Error::PointNotInterior);
    }
    if dist2(x, z) == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let kv = conditioned_unit(p, &GreenBall::new(p), xr, zr, quad)?;
    let s = radius.powf(p.alpha);
    Ok(KernelValue { value: s * kv.value, est_error: s * kv.est_error })
}

fn conditioned_unit(
    p: &ProcessParams,
    g: &GreenBall,
    x: V3,
    z: V3,
    quad: &QuadratureConfig,
) -> Result<KernelValue> {
    let x2 = norm2_3(x);
    let z2 = norm2_3(z);
    let xz = sub3(z, x);
    let dxz = norm2_3(xz).sqrt();
    let gxz = g.value(1.0, x2, z2, dxz * dxz);
    let delta = (0.1f64).min(0.5 * dxz).min(0.9 * (1.0 - z2.sqrt()));
    let inner = quad.inner();
    let alpha = p.alpha;
    let ex = (alpha - p.d as f64) / 2.0;

    // Ball around z, polar coordinates centred at z.
    let (uz, vz) = plane_frame(sub3(x, z));
    let part_z = sphere_integral(p.d, uz, vz, &[], false, quad, |_, t| {
        singular_radial(
            alpha,
            delta,
            |rho| {
                let y = axpy3(z, rho, t);
                let y2 = norm2_3(y);
                let xy2 = norm2_3(sub3(y, x));
                g.reduced(1.0, z2, y2, rho * rho) * g.value(1.0, x2, y2, xy2) / gxz
            },
            &inner,
        )
    })?;

    // Remainder, polar coordinates centred at x with axis towards z.
    let (ux, vx) = plane_frame(xz);
    let phi_t = (delta / dxz).asin();
    let part_x = sphere_integral(p.d, ux, vx, &[phi_t], false, quad, |phi, t| {
        let len = ray_to_unit_sphere(x, t);
        let cos_phi = phi.cos();
        let (first_end, second) = if phi.abs() < phi_t {
            let s = dxz * phi.sin();
            let h = (delta * delta - s * s).max(0.0).sqrt();
            let c = dxz * cos_phi;
            ((c - h).min(len), Some((c + h, len)))
        } else {
            (len, None)
        };
        let f_near = |rho: f64| {
            let y = axpy3(x, rho, t);
            let y2 = norm2_3(y);
            let yz2 = norm2_3(sub3(y, z));
            g.reduced(1.0, x2, y2, rho * rho) * g.value(1.0, y2, z2, yz2) / gxz
        };
        let mut kv = singular_radial(alpha, first_end, f_near, &inner)?;
        if let Some((a, b)) = second {
            if a < b {
                let far = integrate(
                    |rho| {
                        let y = axpy3(x, rho, t);
                        let y2 = norm2_3(y);
                        let yz2 = norm2_3(sub3(y, z));
                        rho.powi(p.d as i32 - 1)
                            * g.value(1.0, x2, y2, rho * rho)
                            * g.reduced(1.0, y2, z2, yz2)
                            * yz2.powf(ex)
                            / gxz
                    },
                    a,
                    b,
                    &[],
                    &inner,
                )?;
                kv.value += far.value;
                kv.est_error += far.est_error;
            }
        }
        Ok(kv)
    })?;
    Ok(KernelValue {
        value: part_z.value + part_x.value,
        est_error: part_z.est_error + part_x.est_error,
    })
}

// ---------------------------------------------------------------------------
// Khasminskii radius
// ---------------------------------------------------------------------------

/// Number of radial grid nodes per point in the `r0` search.
pub const R0_RADIAL_NODES: usize = 21;
/// Number of angular grid nodes per point in the `r0` search.
pub const R0_ANGULAR_NODES: usize = 16;

/// Largest `r <= 1/4` with `b r^α sup < 1/2`, i.e. `min(1/4, (2 b sup)^{-1/α})`.
pub fn khasminskii_radius(b: f64, sup_conditioned: f64, alpha: f64) -> f64 {
    (2.0 * b * sup_conditioned).powf(-1.0 / alpha).min(0.25)
}

/// Grid supremum over `(x, z)` in the unit ball of the conditioned exit time.
///
/// By rotation invariance `x` is placed on the first axis, so the grid is the
/// `R0_RADIAL_NODES` radii for `x` against `R0_RADIAL_NODES × R0_ANGULAR_NODES`
/// polar nodes for `z` (angles folded by reflection symmetry).
pub fn conditioned_exit_sup(p: &ProcessParams, quad: &QuadratureConfig) -> Result<f64> {
    conditioned_exit_sup_with_grid(p, quad, R0_RADIAL_NODES, R0_ANGULAR_NODES)
}

/// [`conditioned_exit_sup`] on a grid with `radial` radii and `angular` angles.
pub fn conditioned_exit_sup_with_grid(
    p: &ProcessParams,
    quad: &QuadratureConfig,
    radial: usize,
    angular: usize,
) -> Result<f64> {
    p.validate()?;
    if radial == 0 || angular < 2 {
        return Err(Error::InvalidParams("r0 grid needs radial >= 1 and angular >= 2".into()));
    }
    let g = GreenBall::new(p);
    let radii: Vec<f64> = (0..radial).map(|i| (i as f64 + 0.5) / radial as f64).collect();
    let mut configs = Vec::new();
    for &rx in &radii {
        for &rz in &radii {
            for k in 0..=angular / 2 {
                let ang = 2.0 * PI * k as f64 / angular as f64;
                if k == 0 && rx == rz {
                    continue;
                }
                configs.push(([rx, 0.0, 0.0], [rz * ang.cos(), rz * ang.sin(), 0.0]));
            }
        }
    }
    use rayon::prelude::*;
    let values: Vec<Result<KernelValue>> = configs
        .par_iter()
        .map(|&(x, z)| conditioned_unit(p, &g, x, z, quad))
        .collect();
    let mut sup = 0.0f64;
    for v in values {
        sup = sup.max(v?.value);
    }
    Ok(sup)
}

/// Quadrature settings used for the `r0` grid.
pub fn r0_quadrature() -> QuadratureConfig {
    QuadratureConfig { rel_tol: 1e-3, abs_tol: 1e-10, max_subdivisions: 200 }
}

/// Radius below which the Khasminskii bound certifies `G ≤ G^Y ≤ 2G` on balls.
pub fn compute_r0(p: &ProcessParams, quad: &QuadratureConfig) -> Result<f64> {
    let sup = conditioned_exit_sup(p, quad)?;
    Ok(khasminskii_radius(constant_b(p), sup, p.alpha))
}

/// [`compute_r0`] on a coarser or finer search grid.
pub fn compute_r0_with_grid(p: &ProcessParams, quad: &QuadratureConfig, radial: usize, angular: usize) -> Result<f64> {
    let sup = conditioned_exit_sup_with_grid(p, quad, radial, angular)?;
    Ok(khasminskii_radius(constant_b(p), sup, p.alpha))
}

/// [`compute_r0`] with [`r0_quadrature`], memoised per parameter pair.
pub fn r0_cached(p: &ProcessParams) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), f64>>> = OnceLock::new();
    let key = (p.d, p.alpha.to_bits());
    let cache = CACHE.get_or_init(Default::default);
    if let Some(v) = cache.lock().unwrap().get(&key) {
        return Ok(*v);
    }
    let v = compute_r0(p, &r0_quadrature())?;
    cache.lock().unwrap().insert(key, v);
    Ok(v)
}

/// Certified bounds `(lower, upper)` for the truncated-process Poisson kernel
/// `K^Y_B(x, z)` of `B(center, radius)` in terms of the stable kernel.
pub fn truncated_poisson_ball_bounds(
    p: &ProcessParams,
    center: &[f64],
    radius: f64,
    x: &[f64],
    z: &[f64],
    r0: f64,
) -> Result<(f64, f64)> {
    let limit = r0.min(0.25);
    if !(radius < limit) {
        return Err(Error::RadiusTooLarge { radius, limit });
    }
    let k = stable_poisson_ball(p, center, radius, x, z)?;
    let dz = dist2(z, center).sqrt();
    if dz < 1.0 - radius {
        Ok((k, 2.0 * k))
    } else {
        Ok((0.0, 2.0 * k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(d: usize, a: f64) -> ProcessParams {
        ProcessParams::new(d, a).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(ProcessParams::new(1, 1.0).is_err());
        assert!(ProcessParams::new(2, 0.0).is_err());
        assert!(ProcessParams::new(2, 2.0).is_err());
        assert!(ProcessParams::new(3, f64::NAN).is_err());
        assert!(ProcessParams::new(2, 1.999).is_ok());
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_surface_area(2) - 2.0 * PI).abs() < 1e-13);
        assert!((sphere_surface_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_surface_area(4) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((sphere_surface_area(1) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn constant_a_closed_forms() {
        assert!((constant_a(&pp(2, 1.0)) - 1.0 / (2.0 * PI)).abs() < 1e-14);
        assert!((constant_a(&pp(3, 1.0)) - 1.0 / (PI * PI)).abs() < 1e-14);
    }

    #[test]
    fn constant_b_closed_forms() {
        assert!((constant_b(&pp(2, 1.0)) - 1.0).abs() < 1e-13);
        assert!((constant_b(&pp(3, 1.0)) - 4.0 / PI).abs() < 1e-13);
    }

    #[test]
    fn psi_at_zero() {
        let v = char_exponent_psi(&pp(2, 1.0), 0.0, &QuadratureConfig::default()).unwrap();
        assert_eq!(v.value, 0.0);
        assert!(char_exponent_psi(&pp(2, 1.0), -1.0, &QuadratureConfig::default()).is_err());
    }

    #[test]
    fn poisson_errors() {
        let p = pp(2, 1.0);
        let c = [0.0, 0.0];
        assert!(matches!(
            stable_poisson_ball(&p, &c, 1.0, &[1.0, 0.0], &[2.0, 0.0]),
            Err(Error::PointNotInterior)
        ));
        assert!(matches!(
            stable_poisson_ball(&p, &c, 1.0, &[0.0, 0.0], &[0.5, 0.0]),
            Err(Error::PointNotExterior)
        ));
        assert!(matches!(
            stable_poisson_ball(&p, &c, 1.0, &[0.0, 0.0, 0.0], &[2.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn green_errors() {
        let p = pp(2, 1.0);
        let c = [0.0, 0.0];
        assert!(matches!(
            stable_green_ball(&p, &c, 1.0, &[0.1, 0.0], &[0.1, 0.0]),
            Err(Error::CoincidentPoints)
        ));
        assert!(matches!(
            stable_green_ball(&p, &c, 1.0, &[0.1, 0.0], &[1.1, 0.0]),
            Err(Error::PointNotInterior)
        ));
    }

    #[test]
    fn green_d2_alpha1_matches_arctan_form() {
        // For d = 2, α = 1 the s-integral is 2 atan(√w).
        let p = pp(2, 1.0);
        let x = [0.3, -0.2];
        let y = [-0.1, 0.5];
        let r = 1.0;
        let x2: f64 = 0.13;
        let y2: f64 = 0.26;
        let xy2 = dist2(&x, &y);
        let w = (r - x2) * (r - y2) / xy2;
        let expected = green_constant(&p) * xy2.powf(-0.5) * 2.0 * w.sqrt().atan();
        let got = stable_green_ball(&p, &[0.0, 0.0], r, &x, &y).unwrap().value;
        assert!((got / expected - 1.0).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn incomplete_beta_matches_statrs() {
        use statrs::function::beta::beta_reg;
        for &(a, b) in &[(0.25, 0.75), (0.5, 0.5), (0.75, 0.25), (0.5, 1.0), (0.25, 1.25), (0.75, 0.75)] {
            let ib = IncompleteBeta::new(a, b);
            for k in 0..200 {
                let w = 10f64.powf(-6.0 + 12.0 * k as f64 / 199.0);
                let t = w / (1.0 + w);
                let got = ib.eval_odds(w);
                let want = beta_reg(a, b, t);
                // statrs forms 1 - t in floating point, which costs a few ulps near t = 1.
                assert!((got - want).abs() < 1e-12, "a={a} b={b} w={w}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn khasminskii_radius_is_capped_and_monotone() {
        assert_eq!(khasminskii_radius(1.0, 0.1, 1.0), 0.25);
        let a = khasminskii_radius(1.0, 4.0, 1.0);
        let b = khasminskii_radius(2.0, 4.0, 1.0);
        assert!(b < a);
        assert!((a - 0.125).abs() < 1e-15);
    }

    #[test]
    fn truncated_bounds_regions() {
        let p = pp(2, 1.0);
        let c = [0.0, 0.0];
        let x = [0.01, 0.0];
        let (lo, hi) = truncated_poisson_ball_bounds(&p, &c, 0.1, &x, &[0.5, 0.0], 0.2).unwrap();
        let k = stable_poisson_ball(&p, &c, 0.1, &x, &[0.5, 0.0]).unwrap();
        assert_eq!(lo, k);
        assert_eq!(hi, 2.0 * k);
        let (lo, hi) = truncated_poisson_ball_bounds(&p, &c, 0.1, &x, &[1.2, 0.0], 0.2).unwrap();
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0);
        assert!(matches!(
            truncated_poisson_ball_bounds(&p, &c, 0.2, &x, &[0.5, 0.0], 0.2),
            Err(Error::RadiusTooLarge { .. })
        ));
        assert!(matches!(
            truncated_poisson_ball_bounds(&p, &c, 0.3, &x, &[0.5, 0.0], 0.9),
            Err(Error::RadiusTooLarge { .. })
        ));
    }
}
