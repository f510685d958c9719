use std::f64::consts::TAU;

use approx::assert_relative_eq;
use orbitlearn::gravity::{influence_radius, InfluenceQuery, ZonalGravityField, BENNU_ZONALS};
use orbitlearn::Vec3;
use proptest::prelude::*;

// Hand-expanded Legendre polynomials, independent of the recurrence in the crate.
fn p_hand(n: u32, x: f64) -> f64 {
    match n {
        2 => (3.0 * x * x - 1.0) / 2.0,
        3 => (5.0 * x.powi(3) - 3.0 * x) / 2.0,
        4 => (35.0 * x.powi(4) - 30.0 * x * x + 3.0) / 8.0,
        5 => (63.0 * x.powi(5) - 70.0 * x.powi(3) + 15.0 * x) / 8.0,
        _ => unreachable!(),
    }
}

fn potential_hand(p: &Vec3) -> f64 {
    let r = p.norm();
    let s = p.z / r;
    let mut u = 1.0 / r;
    for (n, c) in BENNU_ZONALS {
        let j = (2.0 * n as f64 + 1.0).sqrt() * c;
        u -= j / r.powi(n as i32 + 1) * p_hand(n, s);
    }
    u
}

fn fd_gradient(field: &ZonalGravityField, p: &Vec3, h: f64) -> Vec3 {
    let mut g = Vec3::zeros();
    for k in 0..3 {
        let mut e = Vec3::zeros();
        e[k] = h;
        g[k] = (field.potential(&(p + e)).unwrap() - field.potential(&(p - e)).unwrap()) / (2.0 * h);
    }
    g
}

#[test]
fn bennu_potential_matches_hand_expansion() {
    let f = ZonalGravityField::bennu_normalized();
    let p = Vec3::new(1.5, 0.0, 0.0);
    let expected = potential_hand(&p);
    assert_relative_eq!(f.potential(&p).unwrap(), expected, max_relative = 1e-14);
    // on the equator only even degrees survive
    let even = 1.0 / 1.5
        - (5.0f64.sqrt() * 1.93e-2) / 1.5f64.powi(3) * (-0.5)
        - (9.0f64.sqrt() * -6.50e-3) / 1.5f64.powi(5) * (3.0 / 8.0);
    assert_relative_eq!(expected, even, max_relative = 1e-14);

    for p in [Vec3::new(0.3, -1.1, 0.9), Vec3::new(0.0, 0.0, 1.5), Vec3::new(-2.0, 0.4, -1.3)] {
        assert_relative_eq!(f.potential(&p).unwrap(), potential_hand(&p), max_relative = 1e-13);
    }
}

#[test]
fn degree_two_term_at_two_radii() {
    let f = ZonalGravityField::bennu_normalized();
    let u2 = f.zonal_term_potential(2, &Vec3::new(2.0, 0.0, 0.0)).unwrap();
    let expected = -0.5 * (5.0f64.sqrt() * 0.0193) * 0.25 * -0.5;
    assert_relative_eq!(u2, expected, max_relative = 1e-14);
    assert!((u2 - 2.697e-3).abs() < 1e-6);
}

#[test]
fn decomposition_sums_to_potential() {
    let f = ZonalGravityField::bennu_normalized();
    let p = Vec3::new(1.5, 0.0, 0.0);
    let parts: f64 = (2..=5).map(|n| f.zonal_term_potential(n, &p).unwrap()).sum::<f64>() + 1.0 / 1.5;
    assert_relative_eq!(parts, f.potential(&p).unwrap(), max_relative = 1e-15);
}

#[test]
fn polar_acceleration_matches_finite_difference() {
    let f = ZonalGravityField::bennu_normalized();
    let p = Vec3::new(0.0, 0.0, 1.5);
    let a = f.acceleration(&p).unwrap();
    let g = fd_gradient(&f, &p, 1e-6);
    assert!((a - g).norm() <= 1e-5 * a.norm(), "analytic {a:?} vs fd {g:?}");
    assert!(a.x.abs() < 1e-15 && a.y.abs() < 1e-15);
}

#[test]
fn point_mass_examples() {
    let f = ZonalGravityField::point_mass(1.0).unwrap();
    assert_relative_eq!(f.acceleration(&Vec3::new(1.0, 0.0, 0.0)).unwrap(), Vec3::new(-1.0, 0.0, 0.0));
    assert_relative_eq!(f.acceleration(&Vec3::new(0.0, 0.0, 2.0)).unwrap(), Vec3::new(0.0, 0.0, -0.25));
    assert!(f.potential(&Vec3::new(0.0, 0.0, 0.0)).is_err());
}

#[test]
fn physical_influence_radius() {
    let f = ZonalGravityField::bennu_physical();
    let q = InfluenceQuery { degree: 2, colatitude: 0.0, fraction: 0.1, hill_radius: 31_000.0 };
    let r = influence_radius(&f, &q).unwrap().unwrap();
    let closed = (5.0f64.sqrt() * 0.0193 * 290.0f64.powi(2) * 31_000.0 / 0.1).cbrt();
    assert_relative_eq!(r, closed, max_relative = 1e-12);
    assert!((r - 1.04e3).abs() < 10.0, "{r}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn acceleration_is_gradient(r in 1.05f64..6.0, th in 0.05f64..3.09, ph in 0.0f64..TAU) {
        let f = ZonalGravityField::bennu_normalized();
        let p = Vec3::new(r * th.sin() * ph.cos(), r * th.sin() * ph.sin(), r * th.cos());
        let a = f.acceleration(&p).unwrap();
        let g = fd_gradient(&f, &p, 1e-5 * r);
        prop_assert!((a - g).norm() <= 1e-7 * a.norm());
    }

    #[test]
    fn field_is_axisymmetric(r in 1.05f64..6.0, z in -0.9f64..0.9, ph in 0.0f64..TAU, dphi in 0.0f64..TAU) {
        let f = ZonalGravityField::bennu_normalized();
        let rho = r * (1.0 - z * z).sqrt();
        let p = Vec3::new(rho * ph.cos(), rho * ph.sin(), r * z);
        let q = Vec3::new(rho * (ph + dphi).cos(), rho * (ph + dphi).sin(), r * z);
        prop_assert!((f.potential(&p).unwrap() - f.potential(&q).unwrap()).abs() < 1e-14);
        let (ap, aq) = (f.acceleration(&p).unwrap(), f.acceleration(&q).unwrap());
        prop_assert!((ap.norm() - aq.norm()).abs() < 1e-13);
        prop_assert!((ap.z - aq.z).abs() < 1e-13);
    }

    #[test]
    fn empty_zonals_reduce_to_point_mass(mu in 0.1f64..10.0, x in -4.0f64..4.0, y in -4.0f64..4.0, z in 1.0f64..4.0) {
        let f = ZonalGravityField::new(mu, 1.0, vec![]).unwrap();
        let p = Vec3::new(x, y, z);
        let r = p.norm();
        prop_assert!((f.potential(&p).unwrap() - mu / r).abs() < 1e-14 * mu / r);
        let a = f.acceleration(&p).unwrap();
        prop_assert!((a + p * (mu / r.powi(3))).norm() < 1e-14 * mu / (r * r));
    }
}
