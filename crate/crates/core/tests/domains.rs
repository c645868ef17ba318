//! Property tests for domain membership and boundary distances.

use proptest::prelude::*;
use tsp::domains::{counterexample_domain, DomainShape, Point};

fn shapes() -> Vec<DomainShape> {
    let o = Point::origin(2);
    vec![
        DomainShape::ball(Point::new(vec![0.1, -0.2]).unwrap(), 0.7).unwrap(),
        DomainShape::Annulus { center: o.clone(), r_inner: 0.2, r_outer: 0.9 },
        DomainShape::axis_box(Point::new(vec![-0.5, -1.0]).unwrap(), Point::new(vec![1.0, 1.0]).unwrap()).unwrap(),
        DomainShape::unit_square(),
        DomainShape::polytope(
            vec![Point::new(vec![1.0, 1.0]).unwrap(), Point::new(vec![-1.0, 0.0]).unwrap(), Point::new(vec![0.0, -1.0]).unwrap()],
            vec![1.0, 0.0, 0.0],
            Point::new(vec![0.2, 0.2]).unwrap(),
        )
        .unwrap(),
        DomainShape::intersect(counterexample_domain(2).unwrap(), o.clone(), 0.8).unwrap(),
        DomainShape::intersect(DomainShape::unit_square(), Point::new(vec![0.5, 0.0]).unwrap(), 0.3).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    // The ball of radius boundary_distance around an interior point stays inside.
    #[test]
    fn distance_ball_is_inside(k in 0usize..7, x in -1.2f64..1.2, y in -1.2f64..1.2, phi in 0.0f64..std::f64::consts::TAU, f in 0.0f64..0.999) {
        let s = &shapes()[k];
        let p = [x, y];
        if !s.contains(&p).unwrap() {
            return Ok(());
        }
        let bd = s.boundary_distance(&p).unwrap();
        prop_assert!(bd > 0.0);
        let q = [x + f * bd * phi.cos(), y + f * bd * phi.sin()];
        prop_assert!(s.contains(&q).unwrap(), "{q:?} left shape {k}");
    }

    // Distances of exact shapes are 1-Lipschitz.
    #[test]
    fn distance_is_lipschitz(k in 0usize..5, x in -1.2f64..1.2, y in -1.2f64..1.2, dx in -0.05f64..0.05, dy in -0.05f64..0.05) {
        let s = &shapes()[k];
        let (p, q) = ([x, y], [x + dx, y + dy]);
        if !(s.contains(&p).unwrap() && s.contains(&q).unwrap()) {
            return Ok(());
        }
        let diff = s.boundary_distance(&p).unwrap() - s.boundary_distance(&q).unwrap();
        prop_assert!(diff.abs() <= dx.hypot(dy) + 1e-12);
    }

    // For exact shapes a point just beyond the distance in some direction is outside.
    #[test]
    fn distance_is_attained(k in 0usize..5, x in -1.2f64..1.2, y in -1.2f64..1.2) {
        let s = &shapes()[k];
        let p = [x, y];
        if !s.contains(&p).unwrap() {
            return Ok(());
        }
        let bd = s.boundary_distance(&p).unwrap();
        let hit = (0..3600).any(|i| {
            let t = i as f64 * std::f64::consts::TAU / 3600.0;
            !s.contains(&[x + 1.01 * bd * t.cos(), y + 1.01 * bd * t.sin()]).unwrap()
        });
        prop_assert!(hit);
    }

    #[test]
    fn interior_rejects_boundary_points(k in 0usize..7, x in -1.2f64..1.2, y in -1.2f64..1.2) {
        let s = &shapes()[k];
        if !s.contains(&[x, y]).unwrap() {
            prop_assert!(s.boundary_distance(&[x, y]).is_err());
        }
    }
}

#[test]
fn shapes_round_trip_through_json() {
    for s in shapes() {
        let j = serde_json::to_string(&s).unwrap();
        let back: DomainShape = serde_json::from_str(&j).unwrap();
        assert_eq!(s, back);
    }
}

#[test]
fn dimension_mismatch_is_an_error() {
    for s in shapes() {
        assert!(s.contains(&[0.0, 0.0, 0.0]).is_err());
    }
}

#[test]
fn bounding_ball_covers_samples() {
    for s in shapes() {
        let (c, r) = s.bounding_ball();
        for i in 0..200 {
            for j in 0..200 {
                let p = [-1.2 + 2.4 * i as f64 / 199.0, -1.2 + 2.4 * j as f64 / 199.0];
                if s.contains(&p).unwrap() {
                    let d = (p[0] - c[0]).hypot(p[1] - c[1]);
                    assert!(d <= r + 1e-12);
                }
            }
        }
    }
}

#[test]
fn counterexample_tag_reads_as_the_slab_domain() {
    let s: DomainShape = serde_json::from_str(r#"{"type": "counterexample", "d": 2}"#).unwrap();
    assert_eq!(s, counterexample_domain(2).unwrap());
    let s: DomainShape =
        serde_json::from_str(r#"{"type": "intersect", "shape": {"type": "counterexample", "d": 2}, "center": [0, 0], "radius": 0.4}"#)
            .unwrap();
    assert!(s.contains(&[0.0, 0.1]).unwrap());
    assert!(!s.contains(&[0.0, -0.1]).unwrap());
    assert!(serde_json::from_str::<DomainShape>(r#"{"type": "counterexample", "d": 1}"#).is_err());
    assert!(serde_json::from_str::<DomainShape>(r#"{"type": "counterexample", "d": 2, "x": 1}"#).is_err());
}
