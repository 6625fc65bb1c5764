use std::sync::Arc;

use mcf_core::geometry::{
    convexity_check, curvature_data, radial_velocity, second_form_gradient_norm, surface_laplacian, RadialGraph,
};
use mcf_core::spectral::{build_grid, ZonalGrid, ZonalSpectrum};
use mcf_core::Error;
use proptest::prelude::*;

fn grid(n: usize, size: usize) -> Arc<ZonalGrid> {
    Arc::new(build_grid(n, size).unwrap())
}

/// Ellipse (or spheroid) with semi-axis `a` along the polar axis and `b`
/// across it, as a radial graph about its center.
fn ellipse_radius(a: f64, b: f64, phi: f64) -> f64 {
    a * b / ((b * phi.cos()).powi(2) + (a * phi.sin()).powi(2)).sqrt()
}

/// Parameter t with (a cos t, b sin t) on the ray at angle φ.
fn ellipse_param(a: f64, b: f64, phi: f64) -> f64 {
    (a * phi.sin()).atan2(b * phi.cos())
}

#[test]
fn sphere_curvatures() {
    for n in 1..=4 {
        let g = RadialGraph::sphere(grid(n, 16), 2.5).unwrap();
        let cd = curvature_data(&g).unwrap();
        for j in 0..16 {
            assert!((cd.h[j] - n as f64 / 2.5).abs() < 1e-12);
            assert!(cd.pinching[j].abs() < 1e-12);
            assert!((cd.v[j] - 1.0).abs() < 1e-15);
        }
        assert!(second_form_gradient_norm(g.grid(), &cd).iter().all(|v| v.abs() < 1e-12));
    }
}

#[test]
fn ellipse_curvature_oracle() {
    let (a, b) = (1.3, 0.8);
    let g = grid(1, 128);
    let r: Vec<f64> = g.angles().iter().map(|p| ellipse_radius(a, b, *p)).collect();
    let graph = RadialGraph::centered(g.clone(), r).unwrap();
    let cd = curvature_data(&graph).unwrap();
    for (j, phi) in g.angles().iter().enumerate() {
        let t = ellipse_param(a, b, *phi);
        let k = a * b / ((a * t.sin()).powi(2) + (b * t.cos()).powi(2)).powf(1.5);
        assert!((cd.h[j] - k).abs() < 1e-9 * k, "node {j}: {} vs {k}", cd.h[j]);
    }
}

#[test]
fn spheroid_curvature_oracle() {
    // prolate spheroid with semi-axes 2, 1, 1: H = 4 at the poles, 1.25 on the equator
    let (a, b) = (2.0, 1.0);
    let g = grid(2, 128);
    let r: Vec<f64> = g.angles().iter().map(|p| ellipse_radius(a, b, *p)).collect();
    let graph = RadialGraph::centered(g.clone(), r).unwrap();
    let cd = curvature_data(&graph).unwrap();
    let oracle = |t: f64| {
        let q = (a * t.sin()).powi(2) + (b * t.cos()).powi(2);
        let km = a * b / q.powf(1.5);
        let kr = a / (b * q.sqrt());
        (km, kr)
    };
    assert_eq!(oracle(0.0), (2.0, 2.0));
    let (km, kr) = oracle(std::f64::consts::FRAC_PI_2);
    assert!((km + kr - 1.25).abs() < 1e-15);
    for (j, phi) in g.angles().iter().enumerate() {
        let (km, kr) = oracle(ellipse_param(a, b, *phi));
        assert!((cd.kappa_meridian[j] - km).abs() < 1e-8, "node {j}");
        assert!((cd.kappa_rotational[j] - kr).abs() < 1e-8, "node {j}");
        assert!((cd.h[j] - km - kr).abs() < 1e-8);
    }
}

/// H as g^{ij} h_ij from the embedding X(φ, θ) = r(φ)(cos φ, sin φ cos θ,
/// sin φ sin θ), evaluated at θ = 0 with an explicit normal.
fn h_from_embedding(r: f64, dr: f64, ddr: f64, phi: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    let x_p = [dr * c - r * s, dr * s + r * c, 0.0];
    let x_pp = [ddr * c - 2.0 * dr * s - r * c, ddr * s + 2.0 * dr * c - r * s, 0.0];
    let x_t = [0.0, 0.0, r * s];
    let x_tt = [0.0, -r * s, 0.0];
    let cross =
        [x_p[1] * x_t[2] - x_p[2] * x_t[1], x_p[2] * x_t[0] - x_p[0] * x_t[2], x_p[0] * x_t[1] - x_p[1] * x_t[0]];
    let norm = cross.iter().map(|v| v * v).sum::<f64>().sqrt();
    // inward normal
    let nu: Vec<f64> = cross.iter().map(|v| -v / norm).collect();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let (g_pp, g_tt) = (dot(&x_p, &x_p), dot(&x_t, &x_t));
    assert!(dot(&x_p, &x_t).abs() < 1e-14);
    dot(&x_pp, &nu) / g_pp + dot(&x_tt, &nu) / g_tt
}

#[test]
fn mean_curvature_matches_embedding_route() {
    let g = grid(2, 48);
    let spec = {
        let mut s = ZonalSpectrum::unit(2, 4, 0.02);
        s.coeffs[2] = 0.1;
        s.coeffs[3] = -0.04;
        s
    };
    let graph = RadialGraph::from_spectrum(g.clone(), 1.4, &spec).unwrap();
    let cd = curvature_data(&graph).unwrap();
    for (j, phi) in g.angles().iter().enumerate() {
        let h = h_from_embedding(cd.r[j], cd.dr[j], cd.ddr[j], *phi);
        assert!((cd.h[j] - h).abs() < 1e-12 * h.abs(), "node {j}");
    }
}

#[test]
fn laplacian_of_height_on_sphere() {
    // the coordinate function x₀ = R cos φ satisfies Δx₀ = −(n/R²) x₀
    let (n, radius) = (3, 1.7);
    let g = grid(n, 32);
    let graph = RadialGraph::sphere(g.clone(), radius).unwrap();
    let cd = curvature_data(&graph).unwrap();
    let f: Vec<f64> = g.cos().iter().map(|c| radius * c).collect();
    let lap = surface_laplacian(&g, &cd, &f);
    for (l, v) in lap.iter().zip(&f) {
        assert!((l + n as f64 / (radius * radius) * v).abs() < 1e-11);
    }
}

#[test]
fn offset_sphere_resample_and_rays() {
    let (n, radius, shift) = (2usize, 1.5, 0.2);
    let g = grid(n, 48);
    let graph = RadialGraph::sphere(g.clone(), radius).unwrap();
    let moved = graph.resample(&[shift, 0.0, 0.0]).unwrap();
    // distance from p = (δ, 0, 0) to the sphere of radius R along ω
    let exact = |phi: f64| -shift * phi.cos() + (radius * radius - (shift * phi.sin()).powi(2)).sqrt();
    for (j, phi) in g.angles().iter().enumerate() {
        assert!((moved.r()[j] - exact(*phi)).abs() < 1e-12);
    }
    let (area, centroid) = moved.area_centroid().unwrap();
    assert!((area - 4.0 * std::f64::consts::PI * radius * radius).abs() < 1e-10);
    assert!((centroid[0] - 0.0).abs() < 1e-12);
    let angles = [0.3, 1.2, 2.8];
    let d = graph.ray_distances(&[shift, 0.0, 0.0], &angles).unwrap();
    for (a, v) in angles.iter().zip(d) {
        assert!((v - exact(*a)).abs() < 1e-12);
    }
    assert!(matches!(graph.resample(&[1.0, 0.0, 0.0]), Err(Error::ShiftTooLarge(_))));
}

/// Distance from the center to the outward offset of the ellipse at
/// distance d, along the ray at angle φ (bisection in the parameter t).
fn offset_ellipse_radius(a: f64, b: f64, d: f64, phi: f64) -> f64 {
    let point = |t: f64| {
        let (s, c) = t.sin_cos();
        let (nx, ny) = (b * c, a * s);
        let len = (nx * nx + ny * ny).sqrt();
        (a * c + d * nx / len, b * s + d * ny / len)
    };
    let angle = |t: f64| {
        let (x, y) = point(t);
        y.atan2(x).rem_euclid(std::f64::consts::TAU)
    };
    let t0 = ellipse_param(a, b, phi).rem_euclid(std::f64::consts::TAU);
    let (mut lo, mut hi) = (t0 - 0.1, t0 + 0.1);
    let wrap = |x: f64| (x + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if wrap(angle(mid) - phi) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (x, y) = point(0.5 * (lo + hi));
    (x * x + y * y).sqrt()
}

#[test]
fn radial_velocity_moves_along_the_normal() {
    // r + dt·radial_velocity(1) must trace the parallel curve at distance
    // dt up to O(dt²)
    let (a, b) = (1.3, 0.8);
    let g = grid(1, 128);
    let r: Vec<f64> = g.angles().iter().map(|p| ellipse_radius(a, b, *p)).collect();
    let graph = RadialGraph::centered(g.clone(), r.clone()).unwrap();
    let vel = radial_velocity(&graph, &vec![1.0; g.size()]).unwrap();
    let err = |dt: f64| {
        (0..g.size())
            .map(|j| (r[j] + dt * vel[j] - offset_ellipse_radius(a, b, dt, g.angles()[j])).abs())
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(1e-3), err(5e-4));
    assert!(e1 < 1e-5, "{e1}");
    assert!(((e1 / e2).log2() - 2.0).abs() < 0.1, "{e1} {e2}");
    assert!(matches!(radial_velocity(&graph, &[1.0]), Err(Error::LengthMismatch { .. })));
}

#[test]
fn convexity_detection() {
    let g = grid(2, 48);
    let round = RadialGraph::sphere(g.clone(), 1.0).unwrap();
    assert!(convexity_check(&round).0);
    let dented = RadialGraph::from_spectrum(g, 1.0, &ZonalSpectrum::unit(2, 6, 0.15)).unwrap();
    let (ok, margin) = convexity_check(&dented);
    assert!(!ok && margin < 0.0);
}

#[test]
fn rejects_invalid_graphs() {
    let g = grid(2, 8);
    assert!(matches!(RadialGraph::centered(g.clone(), vec![1.0; 7]), Err(Error::LengthMismatch { .. })));
    let mut r = vec![1.0; 8];
    r[2] = -0.5;
    assert!(RadialGraph::centered(g.clone(), r).is_err());
    assert!(RadialGraph::new(g, vec![1.0; 8], vec![0.0, 0.3, 0.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scaling_covariance(lambda in 0.2f64..5.0, c2 in -0.05f64..0.05, c3 in -0.05f64..0.05) {
        let g = grid(2, 32);
        let mut spec = ZonalSpectrum::unit(2, 3, c3);
        spec.coeffs[2] = c2;
        let graph = RadialGraph::from_spectrum(g, 1.0, &spec).unwrap();
        let big = graph.scaled(lambda).unwrap();
        let (c0, c1) = (curvature_data(&graph).unwrap(), curvature_data(&big).unwrap());
        for j in 0..32 {
            prop_assert!((c1.h[j] * lambda - c0.h[j]).abs() < 1e-11 * c0.h[j].abs());
            prop_assert!((c1.pinching[j] * lambda * lambda - c0.pinching[j]).abs() < 1e-11);
            prop_assert!((c1.v[j] - c0.v[j]).abs() < 1e-13);
        }
    }

    #[test]
    fn mean_radius_and_centroid_of_spheres(radius in 0.1f64..10.0, n in 1usize..5) {
        let graph = RadialGraph::sphere(grid(n, 16), radius).unwrap();
        prop_assert!((graph.r_mean() - radius).abs() < 1e-12 * radius);
        let (_, c) = graph.area_centroid().unwrap();
        prop_assert!(c.iter().all(|v| v.abs() < 1e-12 * radius));
    }
}
