//! Orchestration of one experiment: integration phases, checkpoints and
//! report emission.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use mcf_core::arrival::tune_degree_two;
use mcf_core::flow::{Frame, Integrator};
use mcf_core::geometry::RadialGraph;
use mcf_core::spectral::{build_grid, mode_index, ZonalGrid, ZonalSpectrum};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{self, CheckpointBody, PhaseState};
use crate::config::{ExperimentConfig, InitialKind};
use crate::error::{EngineContext, LabError, Result};
use crate::report::{self, RunReport};

/// Environment variable naming the directory below which runs write.
pub const OUTPUT_ROOT_VAR: &str = "MCFLAB_OUTPUT_ROOT";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from("mcflab-out"), PathBuf::from)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub frame: Frame,
    pub steps: usize,
    pub rejected: usize,
    pub snapshots: usize,
    pub gauge_events: usize,
    pub finished: bool,
}

impl RunStats {
    fn of(integ: &Integrator) -> Self {
        let trace = integ.trace();
        Self {
            frame: trace.frame,
            steps: integ.steps(),
            rejected: integ.rejected(),
            snapshots: trace.snapshots.len(),
            gauge_events: trace.gauge_events.len(),
            finished: integ.is_finished(),
        }
    }
}

#[derive(Debug)]
pub enum Outcome {
    Paused {
        checkpoint: PathBuf,
        frame: Frame,
        time: f64,
    },
    Complete {
        dir: PathBuf,
        report: Box<RunReport>,
    },
    /// Resume of a run whose report was already written.
    AlreadyComplete {
        dir: PathBuf,
        passed: bool,
    },
}

impl Outcome {
    /// 0 when every assertion passed (or the run is paused), 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Paused { .. } => 0,
            Self::Complete { report, .. } => u8::from(!report.passed),
            Self::AlreadyComplete { passed, .. } => u8::from(!passed),
        }
    }
}

/// Validates and runs `cfg` below `root`, honoring `horizon.pause_at`.
pub fn run_experiment(cfg: &ExperimentConfig, root: &Path) -> Result<Outcome> {
    cfg.validate()?;
    let dir = root.join(cfg.output_dir());
    let body = CheckpointBody { config: cfg.clone(), tuning: None, rescaled: None, mcf: None, passed: None };
    drive(body, &dir, cfg.horizon.pause_at)
}

/// Continues the run stored at `path` to completion, writing next to it.
pub fn resume(path: &Path) -> Result<Outcome> {
    let body = checkpoint::load(path)?;
    body.config.validate()?;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf();
    if let Some(passed) = body.passed {
        return Ok(Outcome::AlreadyComplete { dir, passed });
    }
    drive(body, &dir, None)
}

fn initial_graph(cfg: &ExperimentConfig, grid: &Arc<ZonalGrid>, b: Option<f64>) -> Result<RadialGraph> {
    let base = cfg.base_radius();
    let graph = match cfg.initial.kind {
        InitialKind::Sphere => RadialGraph::sphere(grid.clone(), base),
        InitialKind::Perturbed => {
            let n = cfg.n;
            let eps = cfg.initial.amplitude * (n as f64).sqrt();
            let mut spec = ZonalSpectrum::unit(n, cfg.initial.degree, eps);
            if let Some(b) = b {
                let i2 = mode_index(n, 2);
                if spec.coeffs.len() <= i2 {
                    spec.coeffs.resize(i2 + 1, 0.0);
                }
                spec.coeffs[i2] += b;
            }
            RadialGraph::from_spectrum(grid.clone(), base, &spec)
        }
    };
    graph.context(|| "building the initial surface".into())
}

fn drive(mut body: CheckpointBody, dir: &Path, pause: Option<f64>) -> Result<Outcome> {
    let clock = Instant::now();
    let cfg = body.config.clone();
    let ckpt_path = dir.join(checkpoint::FILE_NAME);
    let mut stats = Vec::new();
    let mut rescaled = None;
    let mut mcf = None;
    if cfg.frame.has_rescaled() || cfg.frame.has_mcf() {
        let grid = Arc::new(build_grid(cfg.n, cfg.nodes).context(|| "building the grid".into())?);
        if cfg.initial.tune_degree_two && body.tuning.is_none() {
            let eps = cfg.initial.amplitude * (cfg.n as f64).sqrt();
            let t = tune_degree_two(grid.clone(), cfg.initial.degree, eps, cfg.initial.tune_s_ref, &cfg.integrator)
                .context(|| "tuning the degree-2 coefficient".into())?;
            body.tuning = Some(t);
        }
        let initial = initial_graph(&cfg, &grid, body.tuning.map(|t| t.b))?;
        let mut pause = pause;
        for frame in [Frame::Rescaled, Frame::Mcf] {
            let wanted = match frame {
                Frame::Rescaled => cfg.frame.has_rescaled(),
                Frame::Mcf => cfg.frame.has_mcf(),
            };
            if !wanted {
                continue;
            }
            let slot = match frame {
                Frame::Rescaled => &mut body.rescaled,
                Frame::Mcf => &mut body.mcf,
            };
            let mut integ = match slot {
                Some(state) => state.restore(&grid, &cfg)?,
                None => match frame {
                    Frame::Rescaled => Integrator::rescaled(initial.clone(), 0.0, cfg.s_max(), cfg.integrator.clone()),
                    Frame::Mcf => Integrator::mcf(initial.clone(), cfg.integrator.clone()),
                }
                .context(|| format!("starting the {} run of `{}`", frame.name(), cfg.name))?,
            };
            let done = integ
                .advance(pause.take())
                .context(|| format!("{} run of `{}` at time {}", frame.name(), cfg.name, integ.state().time))?;
            *slot = Some(PhaseState::capture(&integ));
            if !done {
                checkpoint::save(&ckpt_path, &body)?;
                return Ok(Outcome::Paused { checkpoint: ckpt_path, frame, time: integ.state().time });
            }
            stats.push(RunStats::of(&integ));
            match frame {
                Frame::Rescaled => rescaled = Some(integ.into_trace()),
                Frame::Mcf => mcf = Some(integ.into_trace()),
            }
        }
    }
    let report = report::analyze(&cfg, rescaled.as_ref(), mcf.as_ref(), body.tuning, stats, dir, clock)?;
    body.passed = Some(report.passed);
    checkpoint::save(&ckpt_path, &body)?;
    Ok(Outcome::Complete { dir: dir.to_path_buf(), report: Box::new(report) })
}

/// Resolves a preset or config file into a validated configuration.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    let cfg = crate::config::parse_config(&text, overrides)?;
    cfg.validate()?;
    Ok(cfg)
}
