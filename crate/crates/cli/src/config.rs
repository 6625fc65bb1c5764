//! Experiment configuration: a TOML tree, validated with field paths.

use mcf_core::flow::IntegratorConfig;
use mcf_core::spectral::build_grid;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};

/// Largest admissible perturbation, as a fraction of √n.
pub const MAX_AMPLITUDE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Surface dimension.
    pub n: usize,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    pub frame: FrameChoice,
    #[serde(default)]
    pub seed: u64,
    /// Output directory below the output root; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default)]
    pub horizon: Horizon,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub probes: Probes,
}

fn default_nodes() -> usize {
    32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameChoice {
    Mcf,
    Rescaled,
    Both,
    /// No flow integration (linear-model sweeps only).
    None,
}

impl FrameChoice {
    pub fn name(self) -> &'static str {
        match self {
            Self::Mcf => "mcf",
            Self::Rescaled => "rescaled",
            Self::Both => "both",
            Self::None => "none",
        }
    }

    pub fn has_rescaled(self) -> bool {
        matches!(self, Self::Rescaled | Self::Both)
    }

    pub fn has_mcf(self) -> bool {
        matches!(self, Self::Mcf | Self::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Sphere,
    Perturbed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialData {
    pub kind: InitialKind,
    /// Degree l of the zonal perturbation.
    pub degree: usize,
    /// ε as a fraction of √n: r(0) = √n (1 + ε Y_l).
    pub amplitude: f64,
    /// Base radius; √n when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Cancel the slow degree-2 tail generated by a degree-l perturbation.
    pub tune_degree_two: bool,
    pub tune_s_ref: f64,
}

impl Default for InitialData {
    fn default() -> Self {
        Self {
            kind: InitialKind::Perturbed,
            degree: 2,
            amplitude: 0.01,
            radius: None,
            tune_degree_two: false,
            tune_s_ref: 3.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Horizon {
    /// End of the rescaled run; 8n when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
    /// Interrupt the first integration phase here and write a checkpoint.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pause_at: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Probes {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_fit: Option<RateFitProbe>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub huisken: Option<HuiskenProbe>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<ZProbe>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<AlphaProbe>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sphere_law: Option<SphereLawProbe>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arrival: Option<ArrivalProbe>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c3: Option<C3Probe>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corollary: Option<CorollaryProbe>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma_sweep: Option<LemmaSweepProbe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateFitProbe {
    /// Modes whose slope must match their linear eigenvalue.
    pub degrees: Vec<usize>,
    /// Fit ||w|| and compare with −2/n.
    pub norm: bool,
    /// Require only that ||w|| decays no faster than 2/n.
    pub optimality: bool,
    /// Fit window in s for the modes; the default modal window when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    /// Fit window for ||w||; falls back to `window`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm_window: Option<[f64; 2]>,
    pub tol: f64,
}

impl Default for RateFitProbe {
    fn default() -> Self {
        Self { degrees: vec![2], norm: true, optimality: false, window: None, norm_window: None, tol: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HuiskenProbe {
    pub tol: f64,
    pub min_r_squared: f64,
}

impl Default for HuiskenProbe {
    fn default() -> Self {
        Self { tol: 0.05, min_r_squared: 0.99 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZProbe {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlphaProbe {
    /// Allowed relative distance of α from the initial amplitude.
    pub tol: f64,
}

impl Default for AlphaProbe {
    fn default() -> Self {
        Self { tol: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SphereLawProbe {
    /// Relative tolerance on T and r(t).
    pub tol: f64,
    /// Bound on the scale-free curvature monitors.
    pub monitor_tol: f64,
}

impl Default for SphereLawProbe {
    fn default() -> Self {
        Self { tol: 1e-6, monitor_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArrivalProbe {
    pub rays: usize,
    pub per_octave: usize,
    /// Relative tolerance of the Hessian against −1/n.
    pub hessian_tol: f64,
}

impl Default for ArrivalProbe {
    fn default() -> Self {
        Self { rays: 12, per_octave: 8, hessian_tol: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct C3Probe {
    /// Largest radius entering the residual fit.
    pub fit_max: f64,
    /// Relative tolerance of the pooled exponent against 2 + β_l.
    pub tol: f64,
    pub min_correlation: f64,
}

impl Default for C3Probe {
    fn default() -> Self {
        Self { fit_max: 0.05, tol: 0.05, min_correlation: 0.99 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorollaryProbe {
    /// Degree of the slowest surviving mode; the initial degree when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    pub fit_max: f64,
}

impl Default for CorollaryProbe {
    fn default() -> Self {
        Self { degree: None, fit_max: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LemmaSweepProbe {
    pub cases: usize,
}

impl Default for LemmaSweepProbe {
    fn default() -> Self {
        Self { cases: 1000 }
    }
}

impl ExperimentConfig {
    pub fn s_max(&self) -> f64 {
        self.horizon.s_max.unwrap_or(8.0 * self.n as f64)
    }

    pub fn base_radius(&self) -> f64 {
        self.initial.radius.unwrap_or((self.n as f64).sqrt())
    }

    pub fn output_dir(&self) -> &str {
        self.output_dir.as_deref().unwrap_or(&self.name)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LabError::Serialize(e.to_string()))
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }

    /// Checks every constraint that serde cannot express; errors name the
    /// offending field.
    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, msg: String| Err(LabError::config(path, msg));
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return bad("name", format!("`{}` must be non-empty and use only [A-Za-z0-9._-]", self.name));
        }
        if let Some(dir) = &self.output_dir {
            if dir.is_empty() || dir.split(['/', '\\']).any(|p| p == "..") {
                return bad("output_dir", format!("`{dir}` must be a non-empty relative path without `..`"));
            }
        }
        if self.n == 0 {
            return bad("n", "dimension must be at least 1".into());
        }
        let grid = match build_grid(self.n, self.nodes) {
            Ok(g) => g,
            Err(e) => return bad("nodes", e.to_string()),
        };
        if let Err(e) = self.integrator.validate() {
            return bad("integrator", e.to_string());
        }
        let init = &self.initial;
        if init.radius.is_some_and(|r| !(r > 0.0 && r.is_finite())) {
            return bad("initial.radius", "must be positive and finite".into());
        }
        if init.kind == InitialKind::Perturbed {
            if !(init.amplitude > 0.0 && init.amplitude <= MAX_AMPLITUDE) {
                return bad(
                    "initial.amplitude",
                    format!("{} is outside (0, {MAX_AMPLITUDE}] (convexity margin guard)", init.amplitude),
                );
            }
            if init.degree == 0 || init.degree > grid.dealias_cutoff() {
                return bad(
                    "initial.degree",
                    format!("{} is outside 1..={} for {} nodes", init.degree, grid.dealias_cutoff(), self.nodes),
                );
            }
        }
        if init.tune_degree_two {
            if init.kind != InitialKind::Perturbed || init.degree <= 2 {
                return bad("initial.tune_degree_two", "needs perturbed data of degree above 2".into());
            }
            if !(init.tune_s_ref > 0.0) {
                return bad("initial.tune_s_ref", "must be positive".into());
            }
        }
        if let Some(s) = self.horizon.s_max {
            if !(s > 0.0 && s.is_finite()) {
                return bad("horizon.s_max", "must be positive and finite".into());
            }
        }
        if let Some(p) = self.horizon.pause_at {
            if !(p > 0.0) || self.frame == FrameChoice::None {
                return bad("horizon.pause_at", "must be positive and needs a flow frame".into());
            }
        }
        self.validate_probes(&grid)
    }

    fn validate_probes(&self, grid: &mcf_core::spectral::ZonalGrid) -> Result<()> {
        let p = &self.probes;
        let frame = self.frame;
        let need = |path: &str, ok: bool, what: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(LabError::config(path, format!("requires {what}, but frame is {}", frame.name())))
            }
        };
        let positive = |path: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(LabError::config(path, format!("must be positive, got {v}")))
            }
        };
        let rescaled = "frame rescaled or both";
        let mcf = "frame mcf or both";
        if let Some(r) = &p.rate_fit {
            need("probes.rate_fit", frame.has_rescaled(), rescaled)?;
            positive("probes.rate_fit.tol", r.tol)?;
            if let Some(k) = r.degrees.iter().find(|k| **k > grid.dealias_cutoff()) {
                return Err(LabError::config("probes.rate_fit.degrees", format!("degree {k} is not resolved")));
            }
            for (path, w) in [("probes.rate_fit.window", r.window), ("probes.rate_fit.norm_window", r.norm_window)] {
                if let Some([a, b]) = w {
                    if !(a >= 0.0 && b > a) {
                        return Err(LabError::config(path, format!("[{a}, {b}] is not an interval")));
                    }
                }
            }
            if r.optimality && !r.norm {
                return Err(LabError::config("probes.rate_fit.optimality", "needs norm = true"));
            }
        }
        if let Some(h) = &p.huisken {
            need("probes.huisken", frame.has_rescaled(), rescaled)?;
            positive("probes.huisken.tol", h.tol)?;
        }
        if p.z.is_some() {
            need("probes.z", frame.has_rescaled(), rescaled)?;
        }
        if let Some(a) = &p.alpha {
            need("probes.alpha", frame.has_rescaled(), rescaled)?;
            positive("probes.alpha.tol", a.tol)?;
        }
        if let Some(s) = &p.sphere_law {
            need("probes.sphere_law", frame.has_mcf(), mcf)?;
            if self.initial.kind != InitialKind::Sphere {
                return Err(LabError::config("probes.sphere_law", "requires initial.kind = \"sphere\""));
            }
            positive("probes.sphere_law.tol", s.tol)?;
            positive("probes.sphere_law.monitor_tol", s.monitor_tol)?;
        }
        if let Some(a) = &p.arrival {
            need("probes.arrival", frame.has_mcf(), mcf)?;
            if a.rays == 0 {
                return Err(LabError::config("probes.arrival.rays", "must be at least 1"));
            }
            if a.per_octave == 0 {
                return Err(LabError::config("probes.arrival.per_octave", "must be at least 1"));
            }
            positive("probes.arrival.hessian_tol", a.hessian_tol)?;
        }
        if let Some(c) = &p.c3 {
            if p.arrival.is_none() {
                return Err(LabError::config("probes.c3", "requires probes.arrival"));
            }
            if self.initial.kind != InitialKind::Perturbed {
                return Err(LabError::config("probes.c3", "requires perturbed initial data"));
            }
            positive("probes.c3.fit_max", c.fit_max)?;
            positive("probes.c3.tol", c.tol)?;
        }
        if let Some(c) = &p.corollary {
            if p.arrival.is_none() {
                return Err(LabError::config("probes.corollary", "requires probes.arrival"));
            }
            if c.degree.unwrap_or(self.initial.degree) < 2 {
                return Err(LabError::config("probes.corollary.degree", "must be at least 2"));
            }
            positive("probes.corollary.fit_max", c.fit_max)?;
        }
        if let Some(s) = &p.lemma_sweep {
            if s.cases == 0 {
                return Err(LabError::config("probes.lemma_sweep.cases", "must be at least 1"));
            }
        }
        if frame == FrameChoice::None && p.lemma_sweep.is_none() {
            return Err(LabError::config("frame", "frame none runs nothing without probes.lemma_sweep"));
        }
        Ok(())
    }
}

/// Parses TOML text, applies `key=value` overrides and deserializes with
/// field paths in error messages. The result is not yet validated.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut table: toml::Table =
        text.parse().map_err(|e: toml::de::Error| LabError::config("<toml>", e.to_string()))?;
    for ov in overrides {
        apply_override(&mut table, ov)?;
    }
    from_table(table)
}

pub fn from_table(table: toml::Table) -> Result<ExperimentConfig> {
    serde_path_to_error::deserialize(table).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "<root>".to_string() } else { path };
        LabError::config(path, e.into_inner().message().trim().to_string())
    })
}

/// Sets a dotted key to a TOML value; bare words that do not parse as a
/// value are taken as strings.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| LabError::BadOverride(spec.into()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(LabError::BadOverride(spec.into()));
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("single key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("nonempty key");
    let mut node = table;
    for (i, part) in parts.iter().enumerate() {
        let entry = node.entry(part.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
        node = match entry {
            toml::Value::Table(t) => t,
            _ => {
                return Err(LabError::config(parts[..=i].join("."), "is not a table, cannot override below it"));
            }
        };
    }
    node.insert(last.to_string(), value);
    Ok(())
}

pub fn to_table(cfg: &ExperimentConfig) -> Result<toml::Table> {
    cfg.to_toml()?.parse().map_err(|e: toml::de::Error| LabError::Serialize(e.to_string()))
}
