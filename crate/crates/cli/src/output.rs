//! Atomic file emission and the CSV layouts.

use std::io::Write;
use std::path::Path;

use mcf_core::arrival::{residuals, ArrivalField};
use mcf_core::diagnostics::ModalTrace;
use mcf_core::flow::FlowTrace;
use mcf_core::spectral::degree_of;
use serde::Serialize;

use crate::error::{LabError, Result};

/// Writes to a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    let mut builder = tempfile::Builder::new();
    // tempfiles default to owner-only; outputs are ordinary files
    #[cfg(unix)]
    builder.permissions(std::os::unix::fs::PermissionsExt::from_mode(0o644));
    let mut tmp = builder.tempfile_in(dir).map_err(|e| LabError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| LabError::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| LabError::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| LabError::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| LabError::Serialize(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Shortest round-trip form; identical runs give identical bytes.
fn num(v: f64) -> String {
    format!("{v:e}")
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| LabError::Serialize(e.to_string());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.into_inner().map_err(|e| LabError::Serialize(e.to_string()))
}

/// Column name of spectral slot `i`: a{k} for n ≥ 2, and a0, c{k}, s{k}
/// for the circle.
fn mode_column(n: usize, i: usize) -> String {
    let k = degree_of(n, i);
    match (n, i) {
        (1, 0) => "a0".into(),
        (1, i) if i % 2 == 1 => format!("c{k}"),
        (1, _) => format!("s{k}"),
        _ => format!("a{k}"),
    }
}

/// Rescaled series: s, mean radius, ||w||, max|w|, every mode, the
/// curvature monitors and max|Z + 1/n|.
pub fn rescaled_csv(trace: &FlowTrace, mt: &ModalTrace, z_dev: &[f64]) -> Result<Vec<u8>> {
    let modes = mt.spectra.first().map_or(0, |s| s.coeffs.len());
    let mut header: Vec<String> = ["s", "r_mean", "w_norm", "w_max"].iter().map(|s| s.to_string()).collect();
    header.extend((0..modes).map(|i| mode_column(mt.n, i)));
    header.extend(["osc_h", "pinching_max", "grad_h_max", "grad_a_max", "z_dev"].iter().map(|s| s.to_string()));
    let rows = (0..mt.s.len()).map(|j| {
        let d = &trace.diagnostics[j];
        let mut row = vec![num(mt.s[j]), num(d.r_mean), num(mt.w_norm[j]), num(mt.w_max[j])];
        row.extend(mt.spectra[j].coeffs.iter().map(|c| num(*c)));
        row.extend([d.h_max - d.h_min, d.pinching_max, d.grad_h_max, d.grad_a_max, z_dev[j]].map(num));
        row
    });
    csv_bytes(&header, rows)
}

/// Unrescaled series: one row per stored snapshot.
pub fn mcf_csv(trace: &FlowTrace) -> Result<Vec<u8>> {
    let header: Vec<String> = [
        "t",
        "dt",
        "r_min",
        "r_max",
        "r_mean",
        "h_min",
        "h_max",
        "pinching_max",
        "grad_h_max",
        "grad_a_max",
        "convexity_margin",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows = trace.diagnostics.iter().map(|d| {
        [
            d.time,
            d.dt,
            d.r_min,
            d.r_max,
            d.r_mean,
            d.h_min,
            d.h_max,
            d.pinching_max,
            d.grad_h_max,
            d.grad_a_max,
            d.convexity_margin,
        ]
        .map(num)
        .to_vec()
    });
    csv_bytes(&header, rows)
}

/// Arrival field: ρ, then u and the residual T − u − ρ²/(2n) per ray.
pub fn arrival_csv(field: &ArrivalField) -> Result<Vec<u8>> {
    let rays = field.angles.len();
    let mut header = vec!["rho".to_string()];
    header.extend((0..rays).map(|j| format!("u_{j}")));
    header.extend((0..rays).map(|j| format!("res_{j}")));
    let res: Vec<Vec<(f64, f64)>> = (0..rays).map(|j| residuals(field, j)).collect();
    let rows = field.radii.iter().enumerate().map(|(i, rho)| {
        let mut row = vec![num(*rho)];
        row.extend(field.u.iter().map(|u| num(u[i])));
        row.extend(res.iter().map(|r| num(r[i].1)));
        row
    });
    csv_bytes(&header, rows)
}
