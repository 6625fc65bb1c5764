//! Modal traces, decay-rate fits, curvature monitors and the Z field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowTrace, Frame};
use crate::geometry::{surface_laplacian, CurvatureData};
use crate::spectral::{operator_eigenvalue, ZonalGrid, ZonalSpectrum};
use crate::stats::fit_line;

/// Per-snapshot spectra of w = r − √n along a rescaled trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalTrace {
    pub n: usize,
    pub s: Vec<f64>,
    pub spectra: Vec<ZonalSpectrum>,
    /// L² norm of w on S^n(√n).
    pub w_norm: Vec<f64>,
    /// Maximum of |w| over the nodes.
    pub w_max: Vec<f64>,
}

impl ModalTrace {
    /// Builds a trace from spectra directly (values of w are synthesized
    /// on `grid` for the sup norm).
    pub fn from_spectra(grid: &ZonalGrid, s: Vec<f64>, spectra: Vec<ZonalSpectrum>) -> Result<Self> {
        let mut w_norm = Vec::with_capacity(s.len());
        let mut w_max = Vec::with_capacity(s.len());
        for spec in &spectra {
            let w = grid.synthesize(spec)?;
            w_norm.push(spec.norm());
            w_max.push(w.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
        Ok(Self { n: grid.n(), s, spectra, w_norm, w_max })
    }

    /// Coefficient of the zonal (cosine) member of degree k.
    pub fn series(&self, k: usize) -> Vec<f64> {
        self.spectra.iter().map(|sp| sp.mode(k)).collect()
    }

    /// Norm of all degree-k coefficients.
    pub fn degree_series(&self, k: usize) -> Vec<f64> {
        self.spectra.iter().map(|sp| sp.degree_norm(k)).collect()
    }

    /// From the first s where max|w| drops below 10% of its initial value
    /// to one unit before the end of the run.
    pub fn default_window(&self) -> Option<(f64, f64)> {
        let first = *self.w_max.first()?;
        let end = *self.s.last()? - 1.0;
        let i = self.w_max.iter().position(|m| *m < 0.1 * first)?;
        (self.s[i] < end).then_some((self.s[i], end))
    }
}

pub fn modal_trace(trace: &FlowTrace) -> Result<ModalTrace> {
    if trace.frame != Frame::Rescaled {
        return Err(Error::FrameMismatch { expected: "rescaled" });
    }
    let first = trace.snapshots.first().ok_or(Error::WindowTooShort(0))?;
    let spectra = trace.snapshots.iter().map(|s| s.graph.perturbation_w()).collect();
    ModalTrace::from_spectra(first.graph.grid(), trace.times(), spectra)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub window: (f64, f64),
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    /// Sign of the series on the window.
    pub sign: f64,
}

/// Least-squares line through (s, ln|value|) on the window.
pub fn fit_decay_rate(s: &[f64], values: &[f64], window: (f64, f64)) -> Result<RateFit> {
    let (xs, ys, sign) = window_log(s, values, window)?;
    let f = fit_line(&xs, &ys);
    Ok(RateFit { window, slope: f.slope, intercept: f.intercept, r_squared: f.r_squared, n_points: xs.len(), sign })
}

fn window_log(s: &[f64], values: &[f64], window: (f64, f64)) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut sign = 0.0;
    for (t, v) in s.iter().zip(values) {
        if *t < window.0 || *t > window.1 {
            continue;
        }
        if *v == 0.0 {
            return Err(Error::NonPositive);
        }
        if sign == 0.0 {
            sign = v.signum();
        } else if v.signum() != sign {
            return Err(Error::SignChange);
        }
        xs.push(*t);
        ys.push(v.abs().ln());
    }
    if xs.len() < 10 {
        return Err(Error::WindowTooShort(xs.len()));
    }
    Ok((xs, ys, sign))
}

/// Amplitude of a mode referenced to s = 0 under a prescribed slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeFit {
    /// Signed amplitude exp(intercept) at s = 0 of the trace's time axis.
    pub amplitude: f64,
    pub expected_slope: f64,
    /// Unconstrained fit on the same window.
    pub free: RateFit,
    /// Root-mean-square residual of the fixed-slope fit in ln|a|.
    pub residual_rms: f64,
}

/// Fits a_k(s) ≈ A e^{λ_k s}: the free slope must lie within 10% of λ_k,
/// then A is obtained with the slope pinned at λ_k.
pub fn extract_mode_amplitude(mt: &ModalTrace, k: usize, window: (f64, f64)) -> Result<AmplitudeFit> {
    let expected = operator_eigenvalue(mt.n, k);
    let series = mt.series(k);
    let free = fit_decay_rate(&mt.s, &series, window)?;
    if (free.slope - expected).abs() > 0.1 * expected.abs() {
        return Err(Error::SlopeMismatch { fitted: free.slope, expected });
    }
    let (xs, ys, sign) = window_log(&mt.s, &series, window)?;
    let shifted: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - expected * x).collect();
    let m = shifted.len() as f64;
    let c = shifted.iter().sum::<f64>() / m;
    let rms = (shifted.iter().map(|v| (v - c).powi(2)).sum::<f64>() / m).sqrt();
    Ok(AmplitudeFit { amplitude: sign * c.exp(), expected_slope: expected, free, residual_rms: rms })
}

/// The coefficient α of the slowest mode, a_2(s) ≈ α e^{−2s/n}, on the
/// default window.
pub fn extract_alpha(mt: &ModalTrace) -> Result<AmplitudeFit> {
    let window = mt.default_window().ok_or(Error::WindowTooShort(0))?;
    extract_mode_amplitude(mt, 2, window)
}

/// Scalar monitors of convergence to the round sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monitors {
    pub s: Vec<f64>,
    pub h_oscillation: Vec<f64>,
    pub pinching_max: Vec<f64>,
    pub grad_h_max: Vec<f64>,
    pub grad_a_max: Vec<f64>,
}

pub fn huisken_monitors(trace: &FlowTrace) -> Result<Monitors> {
    if trace.frame != Frame::Rescaled {
        return Err(Error::FrameMismatch { expected: "rescaled" });
    }
    let d = &trace.diagnostics;
    Ok(Monitors {
        s: d.iter().map(|r| r.time).collect(),
        h_oscillation: d.iter().map(|r| r.h_max - r.h_min).collect(),
        pinching_max: d.iter().map(|r| r.pinching_max).collect(),
        grad_h_max: d.iter().map(|r| r.grad_h_max).collect(),
        grad_a_max: d.iter().map(|r| r.grad_a_max).collect(),
    })
}

/// Z = −1/n − (ΔH/H³ + (|A|² − H²/n)/H²) with Δ the Laplace–Beltrami
/// operator of the surface itself.
pub fn compute_z(grid: &ZonalGrid, cd: &CurvatureData) -> Result<Vec<f64>> {
    if let Some(j) = cd.h.iter().position(|h| !(*h > 0.0)) {
        return Err(Error::NonPositiveH(j));
    }
    let lap_h = surface_laplacian(grid, cd, &cd.h);
    let n = cd.n as f64;
    Ok(cd
        .h
        .iter()
        .zip(&lap_h)
        .zip(&cd.pinching)
        .map(|((h, l), p)| -1.0 / n - (l / (h * h * h) + p / (h * h)))
        .collect())
}

/// max |Z + 1/n| per snapshot of a trace.
pub fn z_deviation_series(trace: &FlowTrace) -> Result<Vec<f64>> {
    trace
        .snapshots
        .iter()
        .map(|s| {
            let cd = crate::geometry::curvature_data(&s.graph)?;
            let z = compute_z(s.graph.grid(), &cd)?;
            let n = cd.n as f64;
            Ok(z.iter().fold(0.0f64, |m, v| m.max((v + 1.0 / n).abs())))
        })
        .collect()
}

/// Growth check of a mode that should stay at rounding or forcing level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    pub degree: usize,
    /// Slope of ln(block maximum of |a_k|), or None when every block is
    /// below the floor.
    pub slope: Option<f64>,
    pub max_abs: f64,
    pub growing: bool,
}

/// Fits the envelope of |a_k| over `blocks` equal sub-windows. The mode
/// counts as growing when the envelope rises by more than a factor e over
/// the window, i.e. slope × length > 1, and it is above `floor`.
pub fn envelope_check(mt: &ModalTrace, k: usize, window: (f64, f64), blocks: usize, floor: f64) -> EnvelopeCheck {
    let series = mt.degree_series(k);
    let len = (window.1 - window.0) / blocks as f64;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut max_abs = 0.0f64;
    for b in 0..blocks {
        let (lo, hi) = (window.0 + b as f64 * len, window.0 + (b + 1) as f64 * len);
        let m =
            mt.s.iter().zip(&series).filter(|(t, _)| **t >= lo && **t <= hi).fold(0.0f64, |m, (_, v)| m.max(v.abs()));
        max_abs = max_abs.max(m);
        xs.push(0.5 * (lo + hi));
        ys.push(m.max(floor).ln());
    }
    if max_abs <= floor {
        return EnvelopeCheck { degree: k, slope: None, max_abs, growing: false };
    }
    let slope = fit_line(&xs, &ys).slope;
    EnvelopeCheck { degree: k, slope: Some(slope), max_abs, growing: slope * (window.1 - window.0) > 1.0 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential() {
        let s: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = s.iter().map(|t| (-2.0 * t).exp()).collect();
        let f = fit_decay_rate(&s, &v, (0.0, 5.0)).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_errors() {
        let s: Vec<f64> = (0..20).map(f64::from).collect();
        let mut v: Vec<f64> = s.iter().map(|t| (-t).exp()).collect();
        assert_eq!(fit_decay_rate(&s, &v, (0.0, 5.0)).unwrap_err(), Error::WindowTooShort(6));
        v[10] = -v[10];
        assert_eq!(fit_decay_rate(&s, &v, (0.0, 19.0)).unwrap_err(), Error::SignChange);
        v[10] = 0.0;
        assert_eq!(fit_decay_rate(&s, &v, (0.0, 19.0)).unwrap_err(), Error::NonPositive);
    }
}
