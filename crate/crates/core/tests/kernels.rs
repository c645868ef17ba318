//! Kernel values against independent closed forms and quadratures.

use std::f64::consts::PI;

use statrs::function::beta::beta_reg;
use statrs::function::gamma::gamma;
use tsp::kernels::*;
use tsp::quadrature::{integrate, GaussRule, QuadratureConfig};

const CASES: [(usize, f64); 6] = [(2, 0.5), (2, 1.0), (2, 1.5), (3, 0.5), (3, 1.0), (3, 1.5)];

fn pp(d: usize, a: f64) -> ProcessParams {
    ProcessParams::new(d, a).unwrap()
}

fn tight() -> QuadratureConfig {
    QuadratureConfig::new(1e-12, 1e-15, 2000).unwrap()
}

// oracle constants straight from the gamma function
fn oracle_a(d: usize, a: f64) -> f64 {
    let d = d as f64;
    a * 2f64.powf(a - 1.0) * PI.powf(-d / 2.0) * gamma((d + a) / 2.0) / gamma(1.0 - a / 2.0)
}

fn oracle_omega(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0)
}

fn oracle_c1(d: usize, a: f64) -> f64 {
    let d = d as f64;
    gamma(d / 2.0) * (PI * a / 2.0).sin() * PI.powf(-d / 2.0 - 1.0)
}

fn oracle_poisson(d: usize, a: f64, r: f64, x: &[f64], z: &[f64]) -> f64 {
    let x2: f64 = x.iter().map(|v| v * v).sum();
    let z2: f64 = z.iter().map(|v| v * v).sum();
    let xz2: f64 = x.iter().zip(z).map(|(p, q)| (p - q) * (p - q)).sum();
    oracle_c1(d, a) * ((r * r - x2) / (z2 - r * r)).powf(a / 2.0) * xz2.powf(-(d as f64) / 2.0)
}

#[test]
fn constants_match_gamma_formulas() {
    for (d, a) in CASES {
        let p = pp(d, a);
        assert!((constant_a(&p) / oracle_a(d, a) - 1.0).abs() < 1e-12);
        assert!((sphere_surface_area(d) / oracle_omega(d) - 1.0).abs() < 1e-12);
        assert!((poisson_constant(&p) / oracle_c1(d, a) - 1.0).abs() < 1e-12);
    }
    assert!((constant_a(&pp(2, 1.0)) - 1.0 / (2.0 * PI)).abs() < 1e-15);
    assert!((constant_b(&pp(2, 1.0)) - 1.0).abs() < 1e-13);
    assert!((constant_b(&pp(3, 1.0)) - 4.0 / PI).abs() < 1e-13);
}

#[test]
fn constant_b_is_the_levy_mass_outside_the_unit_ball() {
    for (d, a) in CASES {
        // ∫_{|y|>1} A |y|^{-d-α} dy = A ω ∫_0^∞ e^{-α s} ds with ρ = e^s
        let radial = integrate(|s| (-a * s).exp(), 0.0, 80.0 / a, &[1.0, 5.0, 20.0], &tight()).unwrap().value;
        let mass = oracle_a(d, a) * oracle_omega(d) * radial;
        let b = constant_b(&pp(d, a));
        assert!((b / mass - 1.0).abs() < 1e-8, "d={d} a={a}: {b} vs {mass}");
    }
}

/// Total mass of the Poisson kernel of `B(0, r)` seen from `x = (frac r, 0, ..)`.
fn poisson_mass(d: usize, alpha: f64, r: f64, frac: f64) -> f64 {
    let xa = frac * r;
    let rule = GaussRule::new(96);
    let c1 = oracle_c1(d, alpha);
    // angular integral over the sphere of radius r + gap; the gap is kept
    // separate so that ρ² - r² has no cancellation
    let shell = |gap: f64| -> f64 {
        let rho = r + gap;
        let radial = c1 * ((r * r - xa * xa) / (gap * (2.0 * r + gap))).powf(alpha / 2.0);
        let dist2 = |c: f64| xa * xa + rho * rho - 2.0 * xa * rho * c;
        if d == 2 {
            let m = 256;
            let s: f64 = (0..m).map(|i| dist2((2.0 * PI * i as f64 / m as f64).cos()).powf(-1.0)).sum();
            radial * s * 2.0 * PI / m as f64 * rho
        } else {
            radial * 2.0 * PI * rho * rho * rule.integrate(|phi| phi.sin() * dist2(phi.cos()).powf(-1.5), 0.0, PI)
        }
    };
    let cfg = QuadratureConfig::new(1e-11, 1e-14, 2000).unwrap();
    // (r, 2r): gap = r s^k removes gap^{-α/2}
    let k = 2.0 / (2.0 - alpha);
    let near = integrate(
        |s| {
            let gap = r * s.powf(k);
            if gap > 0.0 {
                shell(gap) * r * k * s.powf(k - 1.0)
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        &[],
        &cfg,
    )
    .unwrap();
    // (2r, ∞): ρ = 2r t^{-2/α}
    let e = 2.0 / alpha;
    let far = integrate(
        |t| {
            let rho = 2.0 * r * t.powf(-e);
            if rho < 1e100 {
                shell(rho - r) * 2.0 * r * e * t.powf(-e - 1.0)
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        &[],
        &cfg,
    )
    .unwrap();
    near.value + far.value
}

#[test]
fn poisson_kernel_integrates_to_one() {
    for (d, a) in CASES {
        for (r, frac) in [(1.0, 0.0), (1.0, 0.5), (0.3, 0.7)] {
            let m = poisson_mass(d, a, r, frac);
            assert!((m - 1.0).abs() < 1e-6, "d={d} a={a} r={r} frac={frac}: {m}");
        }
    }
}

#[test]
fn poisson_kernel_matches_formula_and_centred_beta_law() {
    for (d, a) in CASES {
        let p = pp(d, a);
        let c = vec![0.0; d];
        let mut x = vec![0.0; d];
        x[0] = 0.2;
        let mut z = vec![0.0; d];
        z[0] = -0.3;
        z[d - 1] += 0.6;
        let v = stable_poisson_ball(&p, &c, 0.5, &x, &z).unwrap();
        assert!((v / oracle_poisson(d, a, 0.5, &x, &z) - 1.0).abs() < 1e-12);
        // from the centre, P(|Z| < ρ) = I_{1 - r²/ρ²}(1 - α/2, α/2)
        let (r1, r2): (f64, f64) = (1.2, 1.7);
        let mass = integrate(
            |s: f64| {
                let mut zz = vec![0.0; d];
                zz[0] = s;
                sphere_surface_area(d) * s.powi(d as i32 - 1) * stable_poisson_ball(&p, &c, 1.0, &c, &zz).unwrap()
            },
            r1,
            r2,
            &[],
            &tight(),
        )
        .unwrap()
        .value;
        let ib = |rho: f64| beta_reg(1.0 - a / 2.0, a / 2.0, 1.0 - 1.0 / (rho * rho));
        let beta = ib(r2) - ib(r1);
        assert!((mass - beta).abs() < 1e-8, "d={d} a={a}: {mass} vs {beta}");
    }
}

fn oracle_green(d: usize, a: f64, r: f64, x: &[f64], y: &[f64]) -> f64 {
    let n2 = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>();
    let xy2: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
    let w = (r * r - n2(x)) * (r * r - n2(y)) / (r * r * xy2);
    let df = d as f64;
    let c = gamma(df / 2.0) / (2f64.powf(a) * PI.powf(df / 2.0) * gamma(a / 2.0).powi(2));
    // ∫_0^w s^{α/2-1} (1+s)^{-d/2} ds with s = u^{2/α}
    let e = 2.0 / a;
    let inner = integrate(|u| e * (1.0 + u.powf(e)).powf(-df / 2.0), 0.0, w.powf(a / 2.0), &[], &tight()).unwrap();
    c * xy2.powf((a - df) / 2.0) * inner.value
}

#[test]
fn green_function_matches_integral_form() {
    for (d, a) in CASES {
        let p = pp(d, a);
        let c = vec![0.0; d];
        for (xs, ys) in [([0.1, 0.2, -0.1], [-0.3, 0.05, 0.2]), ([0.0, 0.0, 0.0], [0.7, 0.0, 0.0]), ([0.9, 0.0, 0.0], [0.88, 0.01, 0.0])] {
            let (x, y) = (&xs[..d], &ys[..d]);
            let g = stable_green_ball(&p, &c, 1.0, x, y).unwrap().value;
            let o = oracle_green(d, a, 1.0, x, y);
            assert!((g / o - 1.0).abs() < 1e-9, "d={d} a={a} x={x:?} y={y:?}: {g} vs {o}");
        }
    }
}

#[test]
fn green_function_symmetry_and_scaling() {
    for (d, a) in CASES {
        let p = pp(d, a);
        let c = vec![0.0; d];
        let x = [0.31, -0.2, 0.11];
        let y = [-0.05, 0.44, -0.3];
        let (x, y) = (&x[..d], &y[..d]);
        let gxy = stable_green_ball(&p, &c, 1.0, x, y).unwrap().value;
        let gyx = stable_green_ball(&p, &c, 1.0, y, x).unwrap().value;
        assert!((gxy - gyx).abs() <= 1e-12 * gxy);
        for r in [0.05, 0.3, 2.5] {
            let xr: Vec<f64> = x.iter().map(|v| v * r).collect();
            let yr: Vec<f64> = y.iter().map(|v| v * r).collect();
            let g = stable_green_ball(&p, &c, r, &xr, &yr).unwrap().value;
            let want = r.powf(a - d as f64) * gxy;
            assert!((g - want).abs() <= 1e-10 * want, "r={r}");
        }
    }
}

#[test]
fn mean_exit_time_matches_closed_form() {
    for (d, a) in CASES {
        let p = pp(d, a);
        let df = d as f64;
        let cst = gamma(df / 2.0) / (2f64.powf(a) * gamma(1.0 + a / 2.0) * gamma((df + a) / 2.0));
        for (r, frac) in [(1.0, 0.0), (1.0, 0.6), (0.2, 0.3)] {
            let mut x = vec![0.0; d];
            x[d - 1] = frac * r;
            let t = expected_exit_time_ball(&p, r, &x, &QuadratureConfig::default()).unwrap();
            let want = cst * (r * r - (frac * r).powi(2)).powf(a / 2.0);
            assert!((t.value / want - 1.0).abs() < 1e-7, "d={d} a={a} r={r}: {} vs {want}", t.value);
        }
    }
    assert!((expected_exit_time_ball(&pp(2, 1.0), 1.0, &[0.0, 0.0], &QuadratureConfig::default()).unwrap().value - 2.0 / PI).abs() < 1e-8);
}

#[test]
fn psi_small_and_large_frequency() {
    let q = QuadratureConfig::default();
    for (d, a) in CASES {
        let p = pp(d, a);
        let small = char_exponent_psi(&p, 0.01, &q).unwrap().value;
        let taylor = 1e-4 * oracle_a(d, a) * oracle_omega(d) / (2.0 * d as f64 * (2.0 - a));
        assert!((small / taylor - 1.0).abs() < 0.01, "d={d} a={a}");
        let big = char_exponent_psi(&p, 200.0, &q).unwrap().value;
        let b = oracle_a(d, a) * oracle_omega(d) / a;
        assert!((big - 200f64.powf(a) + b).abs() < 1e-2 * 200f64.powf(a), "d={d} a={a}");
    }
    assert_eq!(char_exponent_psi(&pp(2, 1.0), 0.0, &q).unwrap().value, 0.0);
}

#[test]
fn r0_frozen_value_and_coarse_grid_range() {
    let p = pp(2, 1.0);
    let s = conditioned_exit_sup(&p, &r0_quadrature()).unwrap();
    assert!((s - 1.0303).abs() < 5e-4, "{s}");
    assert_eq!(khasminskii_radius(constant_b(&p), s, 1.0), 0.25);
    for (d, a) in CASES {
        let r = compute_r0_with_grid(&pp(d, a), &r0_quadrature(), 4, 4).unwrap();
        assert!(r > 0.0 && r <= 0.25, "d={d} a={a}: {r}");
    }
}

#[test]
fn truncated_bounds_follow_the_distance_rule() {
    let p = pp(2, 1.0);
    let c = [0.0, 0.0];
    let x = [0.01, 0.0];
    let (lo, hi) = truncated_poisson_ball_bounds(&p, &c, 0.1, &x, &[0.5, 0.0], 0.25).unwrap();
    let k = oracle_poisson(2, 1.0, 0.1, &x, &[0.5, 0.0]);
    assert!((lo / k - 1.0).abs() < 1e-12 && (hi / k - 2.0).abs() < 1e-12);
    let (lo, _) = truncated_poisson_ball_bounds(&p, &c, 0.1, &x, &[0.95, 0.0], 0.25).unwrap();
    assert_eq!(lo, 0.0);
    assert!(truncated_poisson_ball_bounds(&p, &c, 0.3, &x, &[0.5, 0.0], 0.25).is_err());
}
