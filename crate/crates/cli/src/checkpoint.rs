//! Versioned, checksummed JSON container for interrupted runs.
//!
//! The file is `{"version", "config_hash", "checksum", "body"}` where the
//! checksum is SHA-256 over the exact bytes of `body`.

use std::path::Path;
use std::sync::Arc;

use mcf_core::arrival::NullTuning;
use mcf_core::flow::{DiagnosticRow, FlowState, FlowTrace, Frame, GaugeEvent, Integrator, IntegratorSnapshot};
use mcf_core::geometry::RadialGraph;
use mcf_core::spectral::ZonalGrid;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{EngineContext, LabError, Result};
use crate::output::write_atomic;

pub const VERSION: u32 = 1;
pub const FILE_NAME: &str = "checkpoint.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredSnapshot {
    pub time: f64,
    pub r: Vec<f64>,
    pub center: Vec<f64>,
}

/// A flow trace with the grid stripped out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredTrace {
    pub frame: Frame,
    pub snapshots: Vec<StoredSnapshot>,
    pub diagnostics: Vec<DiagnosticRow>,
    pub gauge_events: Vec<GaugeEvent>,
}

impl StoredTrace {
    pub fn from_trace(trace: &FlowTrace) -> Self {
        Self {
            frame: trace.frame,
            snapshots: trace
                .snapshots
                .iter()
                .map(|s| StoredSnapshot { time: s.time, r: s.graph.r().to_vec(), center: s.graph.center().to_vec() })
                .collect(),
            diagnostics: trace.diagnostics.clone(),
            gauge_events: trace.gauge_events.clone(),
        }
    }

    pub fn restore(&self, grid: &Arc<ZonalGrid>) -> Result<FlowTrace> {
        let snapshots = self
            .snapshots
            .iter()
            .map(|s| {
                let graph = RadialGraph::new(grid.clone(), s.r.clone(), s.center.clone())
                    .context(|| format!("restoring snapshot at time {}", s.time))?;
                Ok(FlowState { time: s.time, graph, frame: self.frame })
            })
            .collect::<Result<Vec<_>>>()?;
        if snapshots.len() != self.diagnostics.len() {
            return Err(LabError::CorruptSnapshot(format!(
                "{} snapshots but {} diagnostic rows",
                snapshots.len(),
                self.diagnostics.len()
            )));
        }
        Ok(FlowTrace {
            frame: self.frame,
            snapshots,
            diagnostics: self.diagnostics.clone(),
            gauge_events: self.gauge_events.clone(),
        })
    }
}

/// Integrator state plus the trace recorded so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub integrator: IntegratorSnapshot,
    pub trace: StoredTrace,
}

impl PhaseState {
    pub fn capture(integ: &Integrator) -> Self {
        Self { integrator: integ.snapshot(), trace: StoredTrace::from_trace(integ.trace()) }
    }

    pub fn is_finished(&self) -> bool {
        self.integrator.finished
    }

    pub fn restore(&self, grid: &Arc<ZonalGrid>, cfg: &ExperimentConfig) -> Result<Integrator> {
        let trace = self.trace.restore(grid)?;
        Integrator::restore(grid.clone(), cfg.integrator.clone(), self.integrator.clone(), trace)
            .context(|| format!("restoring the {} integrator", self.integrator.frame.name()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointBody {
    pub config: ExperimentConfig,
    pub tuning: Option<NullTuning>,
    pub rescaled: Option<PhaseState>,
    pub mcf: Option<PhaseState>,
    /// Set once the report has been written.
    pub passed: Option<bool>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    version: u32,
    config_hash: &'a str,
    checksum: &'a str,
    body: &'a RawValue,
}

#[derive(Deserialize)]
struct OwnedEnvelope {
    version: u32,
    config_hash: String,
    checksum: String,
    body: Box<RawValue>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn encode(body: &CheckpointBody) -> Result<String> {
    let raw = serde_json::to_string(body).map_err(|e| LabError::Serialize(e.to_string()))?;
    let checksum = sha256_hex(raw.as_bytes());
    let hash = body.config.hash()?;
    let raw = RawValue::from_string(raw).map_err(|e| LabError::Serialize(e.to_string()))?;
    let env = Envelope { version: VERSION, config_hash: &hash, checksum: &checksum, body: &raw };
    serde_json::to_string(&env).map_err(|e| LabError::Serialize(e.to_string()))
}

pub fn decode(text: &str) -> Result<CheckpointBody> {
    let env: OwnedEnvelope =
        serde_json::from_str(text).map_err(|e| LabError::CorruptSnapshot(format!("unreadable container: {e}")))?;
    if env.version != VERSION {
        return Err(LabError::VersionMismatch { found: env.version, expected: VERSION });
    }
    let computed = sha256_hex(env.body.get().as_bytes());
    if computed != env.checksum {
        return Err(LabError::CorruptSnapshot(format!(
            "checksum mismatch: stored {}, computed {computed}",
            env.checksum
        )));
    }
    let body: CheckpointBody =
        serde_json::from_str(env.body.get()).map_err(|e| LabError::CorruptSnapshot(format!("unreadable body: {e}")))?;
    let hash = body.config.hash()?;
    if hash != env.config_hash {
        return Err(LabError::CorruptSnapshot(format!(
            "config hash mismatch: stored {}, computed {hash}",
            env.config_hash
        )));
    }
    Ok(body)
}

pub fn save(path: &Path, body: &CheckpointBody) -> Result<()> {
    write_atomic(path, encode(body)?.as_bytes())
}

pub fn load(path: &Path) -> Result<CheckpointBody> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    decode(&text)
}
