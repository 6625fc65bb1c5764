//! Time integration of mean curvature flow on radial graphs.
//!
//! Unrescaled flow: dr/dt = −H v. Rescaled flow about the origin,
//! x̃ = (2(T−t))^{−1/2} x with s = −½ ln(T−t): dr/ds = −H v + r.

mod engine;
mod rk;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    convexity_check, curvature_data, second_form_gradient_norm, surface_gradient_norm, CurvatureData, RadialGraph,
};
use crate::spectral::{mode_index, zonal_harmonic};

pub use engine::{Integrator, IntegratorSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Mcf,
    Rescaled,
}

impl Frame {
    pub fn name(self) -> &'static str {
        match self {
            Frame::Mcf => "mcf",
            Frame::Rescaled => "rescaled",
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowState {
    /// t in the unrescaled frame, s in the rescaled one.
    pub time: f64,
    pub graph: RadialGraph,
    pub frame: Frame,
}

/// Scalar diagnostics of one stored snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub time: f64,
    pub dt: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub r_mean: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub pinching_max: f64,
    pub grad_h_max: f64,
    pub grad_a_max: f64,
    pub convexity_margin: f64,
}

/// Gauge adjustment applied during a rescaled run: the surface was
/// translated by `shift` and then scaled by `scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeEvent {
    pub time: f64,
    pub shift: Vec<f64>,
    pub scale: f64,
}

#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub frame: Frame,
    pub snapshots: Vec<FlowState>,
    pub diagnostics: Vec<DiagnosticRow>,
    pub gauge_events: Vec<GaugeEvent>,
}

impl FlowTrace {
    pub fn new(frame: Frame) -> Self {
        Self { frame, snapshots: Vec::new(), diagnostics: Vec::new(), gauge_events: Vec::new() }
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn last(&self) -> Option<&FlowState> {
        self.snapshots.last()
    }

    pub(crate) fn push(&mut self, state: FlowState, dt: f64) -> Result<CurvatureData> {
        let (row, cd) = diagnostic_row(&state, dt)?;
        self.snapshots.push(state);
        self.diagnostics.push(row);
        Ok(cd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    /// Local error tolerance relative to the mean radius.
    pub tol: f64,
    /// Fraction of the explicit stability limit allowed per step.
    pub dt_safety: f64,
    pub max_steps: usize,
    pub dealias: bool,
    /// Spacing in s of recentering and scale normalization (rescaled frame).
    pub gauge_interval: f64,
    /// Relative spatial resolution; the blow-up floor is 10 × this × r_mean(0).
    pub resolution: f64,
    /// Spacing in s of stored snapshots (rescaled frame).
    pub output_interval: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            dt_safety: 0.9,
            max_steps: 2_000_000,
            dealias: true,
            gauge_interval: 0.5,
            resolution: 1e-5,
            output_interval: 0.05,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return bad("dt_safety must lie in (0, 1]");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        if !(self.gauge_interval > 0.0) {
            return bad("gauge_interval must be positive");
        }
        if !(self.resolution > 0.0 && self.resolution < 0.1) {
            return bad("resolution must lie in (0, 0.1)");
        }
        if !(self.output_interval > 0.0) {
            return bad("output_interval must be positive");
        }
        Ok(())
    }
}

pub(crate) fn diagnostic_row(state: &FlowState, dt: f64) -> Result<(DiagnosticRow, CurvatureData)> {
    let g = &state.graph;
    let cd = curvature_data(g)?;
    let grad_h = surface_gradient_norm(g.grid(), &cd, &cd.h);
    let grad_a = second_form_gradient_norm(g.grid(), &cd);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let row = DiagnosticRow {
        time: state.time,
        dt,
        r_min: g.r_min(),
        r_max: g.r_max(),
        r_mean: g.r_mean(),
        h_min: min(&cd.h),
        h_max: max(&cd.h),
        pinching_max: max(&cd.pinching),
        grad_h_max: max(&grad_h),
        grad_a_max: max(&grad_a),
        convexity_margin: cd.min_curvature(),
    };
    Ok((row, cd))
}

/// Right-hand side dr/dt of the chosen frame; the rescaled frame assumes
/// the graph is centered at the origin.
pub(crate) fn velocity(graph: &RadialGraph, frame: Frame, dealias: bool) -> Result<Vec<f64>> {
    let cd = curvature_data(graph)?;
    let mut out: Vec<f64> = cd.h.iter().zip(&cd.v).map(|(h, v)| -h * v).collect();
    if frame == Frame::Rescaled {
        for (o, r) in out.iter_mut().zip(graph.r()) {
            *o += r;
        }
    }
    if dealias {
        out = graph.grid().dealias(&out);
    }
    Ok(out)
}

fn single_step(state: &FlowState, dt: f64, cfg: &IntegratorConfig, frame: Frame) -> Result<FlowState> {
    if state.frame != frame {
        return Err(Error::FrameMismatch { expected: frame.name() });
    }
    cfg.validate()?;
    let graph = &state.graph;
    let f = |r: &[f64]| -> Result<Vec<f64>> { velocity(&graph.with_r(r.to_vec())?, frame, cfg.dealias) };
    let f0 = f(graph.r())?;
    let out = rk::dopri_step(&f, graph.r(), &f0, dt)?;
    let scale = cfg.tol * graph.r_mean();
    let err = out.err.iter().fold(0.0f64, |m, e| m.max(e.abs())) / scale;
    if !(err <= 1.0) {
        return Err(Error::StepRejected { dt, err });
    }
    let floor = 10.0 * cfg.resolution * graph.r_mean();
    let next = graph.with_r(out.y).map_err(|_| Error::Blowup { time: state.time + dt, r_min: 0.0, floor })?;
    if next.r_min() < floor {
        return Err(Error::Blowup { time: state.time + dt, r_min: next.r_min(), floor });
    }
    let (ok, margin) = convexity_check(&next);
    if !ok {
        return Err(Error::ConvexityLost { time: state.time + dt, margin });
    }
    Ok(FlowState { time: state.time + dt, graph: next, frame })
}

/// One Dormand–Prince step of the unrescaled flow; rejected when the
/// embedded error estimate exceeds the tolerance.
pub fn step_mcf(state: &FlowState, dt: f64, cfg: &IntegratorConfig) -> Result<FlowState> {
    single_step(state, dt, cfg, Frame::Mcf)
}

/// One Dormand–Prince step of the rescaled flow.
pub fn step_rescaled(state: &FlowState, ds: f64, cfg: &IntegratorConfig) -> Result<FlowState> {
    single_step(state, ds, cfg, Frame::Rescaled)
}

/// Translation that removes the degree-1 part of r to first order: a
/// sphere centered at b has r(ω) ≈ R + ⟨b, ω⟩.
pub fn degree_one_shift(graph: &RadialGraph) -> Vec<f64> {
    let n = graph.n();
    let spec = graph.grid().analyze(graph.r()).expect("validated radii");
    let mut b = vec![0.0; n + 1];
    if n == 1 {
        let c = 1.0 / std::f64::consts::PI.sqrt();
        b[0] = spec.coeffs.get(1).copied().unwrap_or(0.0) * c;
        b[1] = spec.coeffs.get(2).copied().unwrap_or(0.0) * c;
    } else {
        b[0] = spec.coeffs.get(mode_index(n, 1)).copied().unwrap_or(0.0) * zonal_harmonic(n, 1, 0.0);
    }
    b
}

/// Re-centers a rescaled state so that the degree-1 coefficient of r
/// vanishes; the surface is translated so the graph stays centered at the
/// origin. Returns the total translation that was removed.
pub fn recenter(state: &FlowState) -> Result<(FlowState, Vec<f64>)> {
    if state.frame != Frame::Rescaled {
        return Err(Error::FrameMismatch { expected: "rescaled" });
    }
    let n = state.graph.n();
    let origin = vec![0.0; n + 1];
    let mut graph = state.graph.resample(&origin)?;
    let mut total = vec![0.0; n + 1];
    let scale = graph.r_mean();
    for _ in 0..20 {
        let b = degree_one_shift(&graph);
        let size = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if size <= 1e-14 * scale {
            break;
        }
        graph = graph.resample(&b)?.with_center(origin.clone())?;
        for (t, bi) in total.iter_mut().zip(&b) {
            *t += bi;
        }
    }
    Ok((FlowState { time: state.time, graph, frame: Frame::Rescaled }, total))
}

/// Extinction time and shrink point inferred from an unrescaled trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityEstimate {
    /// Fixed-slope fit of r̄² = 2n(T − t) over the final decade of r̄.
    pub t_ext: f64,
    pub t_ext_std_err: f64,
    /// Free-slope fit of r̄² against t, reported as a cross-check.
    pub t_ext_free: f64,
    pub free_slope: f64,
    pub x_star: Vec<f64>,
    pub window: (f64, f64),
    pub n_points: usize,
}

/// Estimates T and x* from the final decade of the mean radius.
pub fn estimate_singularity(trace: &FlowTrace) -> Result<SingularityEstimate> {
    if trace.frame != Frame::Mcf {
        return Err(Error::FrameMismatch { expected: "mcf" });
    }
    let last = trace.diagnostics.last().ok_or(Error::WindowTooShort(0))?;
    let n = trace.snapshots[0].graph.n() as f64;
    let cutoff = 10.0 * last.r_mean;
    let idx: Vec<usize> = (0..trace.diagnostics.len()).filter(|&i| trace.diagnostics[i].r_mean <= cutoff).collect();
    if idx.len() < 10 {
        return Err(Error::WindowTooShort(idx.len()));
    }
    let t: Vec<f64> = idx.iter().map(|&i| trace.diagnostics[i].time).collect();
    let r2: Vec<f64> = idx.iter().map(|&i| trace.diagnostics[i].r_mean.powi(2)).collect();
    let ti: Vec<f64> = t.iter().zip(&r2).map(|(t, r)| t + r / (2.0 * n)).collect();
    let m = ti.len() as f64;
    let t_ext = ti.iter().sum::<f64>() / m;
    let var = ti.iter().map(|v| (v - t_ext).powi(2)).sum::<f64>() / (m - 1.0);
    let (a, b) = crate::stats::linear_fit(&t, &r2);
    let t_ext_free = -a / b;

    // centroid extrapolated linearly in τ = T − t
    let tau: Vec<f64> = t.iter().map(|v| t_ext - v).collect();
    let dim = trace.snapshots[0].graph.n() + 1;
    let mut x_star = vec![0.0; dim];
    let centroids: Vec<Vec<f64>> =
        idx.iter().map(|&i| trace.snapshots[i].graph.area_centroid().map(|(_, c)| c)).collect::<Result<_>>()?;
    for (k, xk) in x_star.iter_mut().enumerate() {
        let ck: Vec<f64> = centroids.iter().map(|c| c[k]).collect();
        *xk = crate::stats::linear_fit(&tau, &ck).0;
    }
    Ok(SingularityEstimate {
        t_ext,
        t_ext_std_err: (var / m).sqrt(),
        t_ext_free,
        free_slope: b,
        x_star,
        window: (t[0], *t.last().expect("nonempty")),
        n_points: idx.len(),
    })
}

/// Integrates the unrescaled flow until the minimum radius reaches the
/// resolution floor, then estimates T and x*.
pub fn run_to_singularity(initial: &RadialGraph, cfg: &IntegratorConfig) -> Result<(FlowTrace, SingularityEstimate)> {
    let mut integ = Integrator::mcf(initial.clone(), cfg.clone())?;
    integ.advance(None)?;
    let trace = integ.into_trace();
    let est = estimate_singularity(&trace)?;
    Ok((trace, est))
}

/// Integrates the rescaled flow from s = 0 to `s_max`.
pub fn run_rescaled(initial: &RadialGraph, s_max: f64, cfg: &IntegratorConfig) -> Result<FlowTrace> {
    let mut integ = Integrator::rescaled(initial.clone(), 0.0, s_max, cfg.clone())?;
    integ.advance(None)?;
    Ok(integ.into_trace())
}

/// Re-expresses an unrescaled trace in rescaled coordinates about x*.
pub fn rescale_trace(trace: &FlowTrace, t_ext: f64, x_star: &[f64]) -> Result<FlowTrace> {
    if trace.frame != Frame::Mcf {
        return Err(Error::FrameMismatch { expected: "mcf" });
    }
    let mut out = FlowTrace::new(Frame::Rescaled);
    for (snap, row) in trace.snapshots.iter().zip(&trace.diagnostics) {
        let tau = t_ext - snap.time;
        if !(tau > 0.0) {
            return Err(Error::InconsistentT { t_ext, t: snap.time });
        }
        let about = snap.graph.resample(x_star)?;
        let n = about.n();
        let graph = about.scaled(1.0 / (2.0 * tau).sqrt())?.with_center(vec![0.0; n + 1])?;
        let state = FlowState { time: -0.5 * tau.ln(), graph, frame: Frame::Rescaled };
        out.push(state, row.dt)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::build_grid;
    use std::sync::Arc;

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::default().validate().is_ok());
        let cfg = IntegratorConfig { tol: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn frame_mismatch() {
        let g = Arc::new(build_grid(2, 16).unwrap());
        let state = FlowState { time: 0.0, graph: RadialGraph::sphere(g, 1.0).unwrap(), frame: Frame::Mcf };
        let cfg = IntegratorConfig::default();
        assert!(matches!(step_rescaled(&state, 1e-3, &cfg), Err(Error::FrameMismatch { .. })));
        assert!(matches!(recenter(&state), Err(Error::FrameMismatch { .. })));
    }

    #[test]
    fn sphere_velocity() {
        let g = Arc::new(build_grid(3, 16).unwrap());
        let graph = RadialGraph::sphere(g, 2.0).unwrap();
        for v in velocity(&graph, Frame::Mcf, true).unwrap() {
            assert!((v + 1.5).abs() < 1e-13);
        }
        let fixed = RadialGraph::sphere(graph.grid_arc().clone(), 3f64.sqrt()).unwrap();
        for v in velocity(&fixed, Frame::Rescaled, true).unwrap() {
            assert!(v.abs() < 1e-13);
        }
    }
}
