use serde::{Deserialize, Serialize};

use super::rk::dopri_step;
use super::{degree_one_shift, recenter, velocity, FlowState, FlowTrace, Frame, GaugeEvent, IntegratorConfig};
use crate::error::{Error, Result};
use crate::geometry::{convexity_check, RadialGraph};

/// Real-axis stability limit of the Dormand–Prince pair.
const STABILITY_RADIUS: f64 = 3.3;

/// Events closer than this (relative) are treated as simultaneous.
const EVENT_EPS: f64 = 1e-12;

/// Adaptive integrator that owns the evolving state and the trace.
#[derive(Debug, Clone)]
pub struct Integrator {
    cfg: IntegratorConfig,
    frame: Frame,
    time: f64,
    graph: RadialGraph,
    dt: f64,
    steps: usize,
    rejected: usize,
    fsal: Option<Vec<f64>>,
    start: f64,
    horizon: Option<f64>,
    next_output: u64,
    next_gauge: u64,
    floor: f64,
    finished: bool,
    trace: FlowTrace,
}

/// Plain-data state from which an interrupted run can be continued.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSnapshot {
    pub frame: Frame,
    pub time: f64,
    pub r: Vec<f64>,
    pub center: Vec<f64>,
    pub dt: f64,
    pub steps: usize,
    pub rejected: usize,
    pub start: f64,
    pub horizon: Option<f64>,
    pub next_output: u64,
    pub next_gauge: u64,
    pub floor: f64,
    pub finished: bool,
}

impl Integrator {
    /// Unrescaled run that stops when r_min reaches the resolution floor.
    pub fn mcf(initial: RadialGraph, cfg: IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        let floor = 10.0 * cfg.resolution * initial.r_mean();
        Self::start(initial, Frame::Mcf, 0.0, None, floor, cfg)
    }

    /// Rescaled run about the origin from s = `start` to s = `horizon`.
    pub fn rescaled(initial: RadialGraph, start: f64, horizon: f64, cfg: IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        if !(horizon > start) {
            return Err(Error::InvalidArgument("horizon must exceed the start time".into()));
        }
        let origin = vec![0.0; initial.n() + 1];
        let initial = initial.resample(&origin)?;
        Self::start(initial, Frame::Rescaled, start, Some(horizon), 0.0, cfg)
    }

    fn start(
        graph: RadialGraph,
        frame: Frame,
        start: f64,
        horizon: Option<f64>,
        floor: f64,
        cfg: IntegratorConfig,
    ) -> Result<Self> {
        let (ok, margin) = convexity_check(&graph);
        if !ok {
            return Err(Error::NonConvexInput(margin));
        }
        let mut integ = Self {
            cfg,
            frame,
            time: start,
            graph,
            dt: 0.0,
            steps: 0,
            rejected: 0,
            fsal: None,
            start,
            horizon,
            next_output: 1,
            next_gauge: 1,
            floor,
            finished: false,
            trace: FlowTrace::new(frame),
        };
        integ.dt = 0.1 * integ.stability_cap();
        integ.trace.push(integ.state(), 0.0)?;
        Ok(integ)
    }

    /// Rebuilds an integrator from a snapshot and the trace recorded so far.
    pub fn restore(
        grid: std::sync::Arc<crate::spectral::ZonalGrid>,
        cfg: IntegratorConfig,
        snap: IntegratorSnapshot,
        trace: FlowTrace,
    ) -> Result<Self> {
        cfg.validate()?;
        if trace.frame != snap.frame {
            return Err(Error::FrameMismatch { expected: snap.frame.name() });
        }
        let graph = RadialGraph::new(grid, snap.r, snap.center)?;
        Ok(Self {
            cfg,
            frame: snap.frame,
            time: snap.time,
            graph,
            dt: snap.dt,
            steps: snap.steps,
            rejected: snap.rejected,
            fsal: None,
            start: snap.start,
            horizon: snap.horizon,
            next_output: snap.next_output,
            next_gauge: snap.next_gauge,
            floor: snap.floor,
            finished: snap.finished,
            trace,
        })
    }

    pub fn snapshot(&self) -> IntegratorSnapshot {
        IntegratorSnapshot {
            frame: self.frame,
            time: self.time,
            r: self.graph.r().to_vec(),
            center: self.graph.center().to_vec(),
            dt: self.dt,
            steps: self.steps,
            rejected: self.rejected,
            start: self.start,
            horizon: self.horizon,
            next_output: self.next_output,
            next_gauge: self.next_gauge,
            floor: self.floor,
            finished: self.finished,
        }
    }

    pub fn state(&self) -> FlowState {
        FlowState { time: self.time, graph: self.graph.clone(), frame: self.frame }
    }

    pub fn trace(&self) -> &FlowTrace {
        &self.trace
    }

    pub fn into_trace(self) -> FlowTrace {
        self.trace
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn rejected(&self) -> usize {
        self.rejected
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    fn stability_cap(&self) -> f64 {
        let grid = self.graph.grid();
        let k = if self.cfg.dealias { grid.dealias_cutoff() } else { grid.k_max() } as f64;
        let n = grid.n() as f64;
        let r = self.graph.r_min();
        let lam = (k * (k + n - 1.0) / (r * r)).max(1.0);
        self.cfg.dt_safety * STABILITY_RADIUS / lam
    }

    fn output_time(&self) -> f64 {
        self.start + self.next_output as f64 * self.cfg.output_interval
    }

    fn gauge_time(&self) -> f64 {
        self.start + self.next_gauge as f64 * self.cfg.gauge_interval
    }

    fn next_event(&self) -> Option<f64> {
        let h = self.horizon?;
        Some(self.output_time().min(self.gauge_time()).min(h))
    }

    /// Advances until the run finishes (returns true) or, when `stop` is
    /// given, until the first stored snapshot at or beyond `stop` (false).
    pub fn advance(&mut self, stop: Option<f64>) -> Result<bool> {
        while !self.finished {
            if self.steps >= self.cfg.max_steps {
                return Err(Error::MaxSteps(self.cfg.max_steps));
            }
            let recorded = self.attempt_step()?;
            if recorded && !self.finished && stop.is_some_and(|s| self.time >= s) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Tries one step; returns whether a snapshot was stored.
    fn attempt_step(&mut self) -> Result<bool> {
        let frame = self.frame;
        let dealias = self.cfg.dealias;
        let mut h = self.dt.min(self.stability_cap());
        let mut event_hit = None;
        if let Some(ev) = self.next_event() {
            if self.time + h >= ev - EVENT_EPS * ev.abs().max(1.0) {
                h = ev - self.time;
                event_hit = Some(ev);
            }
        }
        let f0 = match self.fsal.take() {
            Some(f) => f,
            None => velocity(&self.graph, frame, dealias)?,
        };
        let base = self.graph.clone();
        let f = |r: &[f64]| -> Result<Vec<f64>> { velocity(&base.with_r(r.to_vec())?, frame, dealias) };
        let outcome = dopri_step(&f, base.r(), &f0, h);
        let scale = self.cfg.tol * base.r_mean();
        let (err, next) = match outcome {
            Ok(o) => {
                let e = o.err.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale;
                match base.with_r(o.y) {
                    Ok(g) if e.is_finite() => (e, Some((g, o.f_new))),
                    _ => (f64::INFINITY, None),
                }
            }
            Err(_) => (f64::INFINITY, None),
        };
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        let accepted = err <= 1.0 && next.is_some();
        if !accepted {
            self.fsal = Some(f0);
            self.rejected += 1;
            self.dt = h * factor.min(0.9);
            if self.dt < 1e-15 * self.time.abs().max(1.0) {
                return Err(Error::StepUnderflow(self.time));
            }
            return Ok(false);
        }
        let (graph, f_new) = next.expect("accepted step has a state");
        self.steps += 1;
        self.graph = graph;
        self.fsal = Some(f_new);
        if event_hit.is_none() {
            self.dt = h * factor;
        } else {
            self.dt = self.dt.max(h * factor);
        }
        self.time = event_hit.unwrap_or(self.time + h);

        let (ok, margin) = convexity_check(&self.graph);
        if !ok {
            return Err(Error::ConvexityLost { time: self.time, margin });
        }
        match self.frame {
            Frame::Mcf => self.after_mcf_step(h),
            Frame::Rescaled => self.after_rescaled_step(h),
        }
    }

    fn after_mcf_step(&mut self, h: f64) -> Result<bool> {
        self.trace.push(self.state(), h)?;
        if self.graph.r_min() < self.floor {
            self.finished = true;
            return Ok(true);
        }
        let b = degree_one_shift(&self.graph);
        let size = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if size > 1e-4 * self.graph.r_mean() {
            let center: Vec<f64> = self.graph.center().iter().zip(&b).map(|(c, bi)| c + bi).collect();
            self.graph = self.graph.resample(&center)?;
            self.fsal = None;
        }
        Ok(true)
    }

    fn after_rescaled_step(&mut self, h: f64) -> Result<bool> {
        let root = (self.graph.n() as f64).sqrt();
        let mean = self.graph.r_mean();
        if !(mean > 0.1 * root && mean < 10.0 * root) {
            return Err(Error::Diverged { time: self.time, mean });
        }
        let horizon = self.horizon.expect("rescaled runs have a horizon");
        let tol = |t: f64| EVENT_EPS * t.abs().max(1.0);
        let mut recorded = false;
        if self.time >= self.output_time() - tol(self.output_time()) || self.time >= horizon - tol(horizon) {
            self.trace.push(self.state(), h)?;
            recorded = true;
            while self.output_time() <= self.time + tol(self.time) {
                self.next_output += 1;
            }
        }
        if self.time >= horizon - tol(horizon) {
            self.finished = true;
            return Ok(recorded);
        }
        if self.time >= self.gauge_time() - tol(self.gauge_time()) {
            self.apply_gauge()?;
            while self.gauge_time() <= self.time + tol(self.time) {
                self.next_gauge += 1;
            }
        }
        Ok(recorded)
    }

    /// Removes the translation mode and normalizes the mean radius to √n.
    fn apply_gauge(&mut self) -> Result<()> {
        let (state, shift) = recenter(&self.state())?;
        let root = (self.graph.n() as f64).sqrt();
        let scale = root / state.graph.r_mean();
        self.graph = state.graph.scaled(scale)?;
        self.fsal = None;
        self.trace.gauge_events.push(GaugeEvent { time: self.time, shift, scale });
        Ok(())
    }
}
