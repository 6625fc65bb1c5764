use std::sync::Arc;

use mcf_core::arrival::{
    c3_probe, corollary_check, default_angles, hessian_at_center, reconstruct_arrival, residuals, NoiseModel,
    RadiiSchedule, Verdict,
};
use mcf_core::flow::{run_rescaled, run_to_singularity, FlowTrace, IntegratorConfig, SingularityEstimate};
use mcf_core::geometry::{curvature_data, RadialGraph};
use mcf_core::spectral::{build_grid, ZonalGrid, ZonalSpectrum};
use mcf_core::Error;

fn cfg() -> IntegratorConfig {
    IntegratorConfig { tol: 1e-10, ..Default::default() }
}

fn grid(n: usize) -> Arc<ZonalGrid> {
    Arc::new(build_grid(n, 24).unwrap())
}

fn run(graph: &RadialGraph) -> (FlowTrace, SingularityEstimate) {
    run_to_singularity(graph, &cfg()).unwrap()
}

#[test]
fn radii_schedule() {
    let r = RadiiSchedule { rho_max: 1.0, rho_min: 0.25, per_octave: 8 }.radii();
    assert_eq!(r.len(), 17);
    assert_eq!(r[8], 0.5);
    assert!(r.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn offset_sphere_arrival_is_exact() {
    // a sphere centered off the origin: x* must be found and u(x* + ρω)
    // = T − ρ²/(2n) in every direction
    for n in [1usize, 2, 3] {
        let mut center = vec![0.0; n + 1];
        center[0] = 0.15;
        let graph = RadialGraph::new(grid(n), vec![1.1; 24], center).unwrap();
        let (trace, est) = run(&graph);
        assert!((est.x_star[0] - 0.15).abs() < 1e-10, "{:?}", est.x_star);
        let field = reconstruct_arrival(&trace, est.t_ext, &est.x_star, &default_angles(n, 7), None).unwrap();
        let nf = n as f64;
        for row in &field.u {
            for (u, rho) in row.iter().zip(&field.radii) {
                assert!((u - (est.t_ext - rho * rho / (2.0 * nf))).abs() < 1e-9);
            }
        }
        let h = hessian_at_center(&field, None).unwrap();
        assert!(h.max_relative_error() < 1e-6);
        let noise = NoiseModel::from_run(&est, &cfg());
        for j in 0..field.angles.len() {
            assert!(matches!(c3_probe(&field, j, &noise, 1.0), Err(Error::NoiseFloor { .. })));
        }
    }
}

#[test]
fn gradient_is_reciprocal_normal_speed() {
    // along a ray through a node, du/dρ = −1/(H v) where the surface
    // crosses the ray
    let n = 2;
    let g = grid(n);
    let graph = RadialGraph::from_spectrum(g.clone(), 2f64.sqrt(), &ZonalSpectrum::unit(n, 2, 0.03)).unwrap();
    let (trace, est) = run(&graph);
    let angles: Vec<f64> = g.angles()[..6].to_vec();
    let origin = vec![0.0; n + 1];
    let field = reconstruct_arrival(&trace, est.t_ext, &origin, &angles, None).unwrap();
    let snap = &trace.snapshots[trace.snapshots.len() / 3];
    let cd = curvature_data(&snap.graph).unwrap();
    for j in 0..angles.len() {
        let rho = snap.graph.r()[j];
        let h = 1e-4 * rho;
        let du = (field.u_at(j, rho + h).unwrap() - field.u_at(j, rho - h).unwrap()) / (2.0 * h);
        let expect = -1.0 / (cd.h[j] * cd.v[j]);
        assert!((du / expect - 1.0).abs() < 1e-5, "dir {j}: {du} vs {expect}");
    }
}

#[test]
fn comparison_with_enclosed_and_enclosing_spheres() {
    let n = 3;
    let g = grid(n);
    let graph = RadialGraph::from_spectrum(g, 3f64.sqrt(), &ZonalSpectrum::unit(n, 2, 0.05)).unwrap();
    let (trace, est) = run(&graph);
    let field = reconstruct_arrival(&trace, est.t_ext, &est.x_star, &default_angles(n, 9), None).unwrap();
    let nf = n as f64;
    let (r_in, r_out) = (graph.r_min(), graph.r_max());
    for (j, angle) in field.angles.iter().enumerate() {
        for (u, rho) in field.u[j].iter().zip(&field.radii) {
            let x = [est.x_star[0] + rho * angle.cos(), rho * angle.sin()];
            let d2 = x[0] * x[0] + x[1] * x[1];
            assert!(*u >= (r_in * r_in - d2) / (2.0 * nf));
            assert!(*u <= (r_out * r_out - d2) / (2.0 * nf));
        }
    }
}

#[test]
fn corollary_verdicts_on_a_sphere() {
    for (n, l, verdict) in
        [(2usize, 3usize, Verdict::C3Compatible), (3, 3, Verdict::Boundary), (2, 2, Verdict::C3Compatible)]
    {
        let graph = RadialGraph::sphere(grid(n), 1.0).unwrap();
        let (trace, est) = run(&graph);
        let field = reconstruct_arrival(&trace, est.t_ext, &est.x_star, &default_angles(n, 5), None).unwrap();
        let rep = corollary_check(&field, l, &NoiseModel::from_run(&est, &cfg()), 0.05);
        assert_eq!(rep.verdict, verdict);
        assert!(rep.noise_floor);
        assert_eq!(rep.expected_p, 2.0 + rep.beta_l);
    }
}

#[test]
fn residual_signs_follow_the_perturbation() {
    // where w > 0 the surface reaches the point later than the round
    // sphere, so T − u falls short of ρ²/(2n)
    let n = 2;
    let g = grid(n);
    let graph = RadialGraph::from_spectrum(g, 2f64.sqrt(), &ZonalSpectrum::unit(n, 2, 0.03)).unwrap();
    let (trace, est) = run(&graph);
    let angles = [0.2, std::f64::consts::FRAC_PI_2];
    let field = reconstruct_arrival(&trace, est.t_ext, &est.x_star, &angles, None).unwrap();
    let mid = field.radii.len() / 2;
    assert!(residuals(&field, 0)[mid].1 < 0.0);
    assert!(residuals(&field, 1)[mid].1 > 0.0);
}

#[test]
fn error_paths() {
    let n = 2;
    let graph = RadialGraph::sphere(grid(n), 1.0).unwrap();
    let (trace, est) = run(&graph);
    let angles = default_angles(n, 3);
    let early = trace.snapshots.last().unwrap().time * 0.5;
    assert!(matches!(reconstruct_arrival(&trace, early, &est.x_star, &angles, None), Err(Error::InconsistentT { .. })));
    let field = reconstruct_arrival(&trace, est.t_ext, &est.x_star, &angles, None).unwrap();
    assert!(matches!(field.u_at(0, 5.0), Err(Error::DirectionOutOfGraph { direction: 0, .. })));
    assert!(matches!(hessian_at_center(&field, Some(0.5)), Err(Error::InsufficientResolution { .. })));
    let rescaled = run_rescaled(&RadialGraph::sphere(grid(n), 2f64.sqrt()).unwrap(), 0.2, &cfg()).unwrap();
    assert!(matches!(
        reconstruct_arrival(&rescaled, 1.0, &est.x_star, &angles, None),
        Err(Error::FrameMismatch { .. })
    ));
}
