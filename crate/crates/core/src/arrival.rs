//! Arrival time u(x) = t for x ∈ M_t, reconstructed along rays from the
//! shrink point, and regularity probes at the shrink point.
//!
//! Along a ray with direction ω, the crossing radius at time t is
//! ρ(t) = √(2τ) m(s) with τ = T − t, s = −½ ln τ, and m the rescaled
//! radius √n + w. Since m varies slowly in s, it is interpolated
//! monotonically in s and the crossing equation ln ρ = ln(√2 m(s)) − s is
//! solved for s; then u = T − e^{−2s}. At snapshot times this returns the
//! snapshot time exactly, whatever the value of T.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowTrace, Frame, IntegratorConfig, SingularityEstimate};
use crate::interp::Pchip;
use crate::spectral::zonal_harmonic;
use crate::stats::{correlation, fit_line, median};

/// Geometric sequence of radii, `per_octave` samples per halving.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiiSchedule {
    pub rho_max: f64,
    pub rho_min: f64,
    pub per_octave: usize,
}

impl RadiiSchedule {
    /// Descending radii rho_max · 2^{−k/per_octave} ≥ rho_min.
    pub fn radii(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0;
        loop {
            let r = self.rho_max * (-(k as f64) / self.per_octave as f64).exp2();
            if r < self.rho_min {
                break;
            }
            out.push(r);
            k += 1;
        }
        out
    }
}

#[derive(Debug, Clone)]
struct Ray {
    t: Vec<f64>,
    ln_rho: Vec<f64>,
    s: Vec<f64>,
    m: Pchip,
}

impl Ray {
    fn ln_rho_at(&self, s: f64) -> f64 {
        (std::f64::consts::SQRT_2 * self.m.eval(s)).ln() - s
    }
}

#[derive(Debug, Clone)]
pub struct ArrivalField {
    pub n: usize,
    pub x_star: Vec<f64>,
    pub t_ext: f64,
    /// Mean radius of the first snapshot.
    pub r0: f64,
    pub angles: Vec<f64>,
    /// Common radius schedule, descending.
    pub radii: Vec<f64>,
    /// u[direction][radius]
    pub u: Vec<Vec<f64>>,
    rays: Vec<Ray>,
}

impl ArrivalField {
    /// Sampled radius range (smallest, largest) along a direction.
    pub fn ray_range(&self, dir: usize) -> (f64, f64) {
        let r = &self.rays[dir];
        (r.ln_rho.last().expect("nonempty").exp(), r.ln_rho[0].exp())
    }

    /// Smallest radius resolved along every direction.
    pub fn common_floor(&self) -> f64 {
        (0..self.rays.len()).map(|j| self.ray_range(j).0).fold(0.0, f64::max)
    }

    /// u(x* + ρω) along direction `dir`.
    pub fn u_at(&self, dir: usize, rho: f64) -> Result<f64> {
        let ray = &self.rays[dir];
        let target = rho.ln();
        let last = ray.ln_rho.len() - 1;
        if !(target <= ray.ln_rho[0] && target >= ray.ln_rho[last]) {
            return Err(Error::DirectionOutOfGraph { direction: dir, rho });
        }
        // ln ρ decreases along the samples
        let i = ray.ln_rho.partition_point(|v| *v > target);
        if i < ray.ln_rho.len() && ray.ln_rho[i] == target {
            return Ok(ray.t[i]);
        }
        let (mut lo, mut hi) = (ray.s[i - 1], ray.s[i]);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ray.ln_rho_at(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * mid.abs().max(1.0) {
                break;
            }
        }
        let s = 0.5 * (lo + hi);
        Ok(self.t_ext - (-2.0 * s).exp())
    }
}

/// Builds u along rays at polar angles `angles` from the shrink point.
pub fn reconstruct_arrival(
    trace: &FlowTrace,
    t_ext: f64,
    x_star: &[f64],
    angles: &[f64],
    schedule: Option<RadiiSchedule>,
) -> Result<ArrivalField> {
    if trace.frame != Frame::Mcf {
        return Err(Error::FrameMismatch { expected: "mcf" });
    }
    let first = trace.snapshots.first().ok_or(Error::WindowTooShort(0))?;
    let n = first.graph.n();
    let root = (n as f64).sqrt();
    let mut rho: Vec<Vec<f64>> = vec![Vec::with_capacity(trace.snapshots.len()); angles.len()];
    let mut t = Vec::with_capacity(trace.snapshots.len());
    for snap in &trace.snapshots {
        if !(snap.time < t_ext) {
            return Err(Error::InconsistentT { t_ext, t: snap.time });
        }
        let d = snap.graph.ray_distances(x_star, angles)?;
        for (col, v) in rho.iter_mut().zip(d) {
            col.push(v);
        }
        t.push(snap.time);
    }
    let s: Vec<f64> = t.iter().map(|ti| -0.5 * (t_ext - ti).ln()).collect();
    let mut rays = Vec::with_capacity(angles.len());
    for (j, col) in rho.into_iter().enumerate() {
        if col.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::NonMonotoneRadius(j));
        }
        let m: Vec<f64> = col.iter().zip(&t).map(|(r, ti)| r / (2.0 * (t_ext - ti)).sqrt()).collect();
        debug_assert!(m.iter().all(|v| (v / root - 1.0).abs() < 1.0));
        rays.push(Ray {
            t: t.clone(),
            ln_rho: col.iter().map(|v| v.ln()).collect(),
            s: s.clone(),
            m: Pchip::new(s.clone(), m),
        });
    }
    let mut field = ArrivalField {
        n,
        x_star: x_star.to_vec(),
        t_ext,
        r0: first.graph.r_mean(),
        angles: angles.to_vec(),
        radii: Vec::new(),
        u: Vec::new(),
        rays,
    };
    let schedule = schedule.unwrap_or_else(|| {
        let top = (0..angles.len()).map(|j| field.ray_range(j).1).fold(f64::INFINITY, f64::min);
        RadiiSchedule { rho_max: 0.5 * top, rho_min: 1.05 * field.common_floor(), per_octave: 8 }
    });
    field.radii = schedule.radii();
    for j in 0..angles.len() {
        let row = field.radii.iter().map(|r| field.u_at(j, *r)).collect::<Result<Vec<_>>>()?;
        if row.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::NonMonotoneRadius(j));
        }
        field.u.push(row);
    }
    Ok(field)
}

/// Evenly spaced polar angles strictly inside (0, π), or around the full
/// circle for n = 1.
pub fn default_angles(n: usize, count: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    if n == 1 {
        (0..count).map(|j| 2.0 * PI * j as f64 / count as f64).collect()
    } else {
        (0..count).map(|j| PI * (j as f64 + 0.5) / count as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianEntry {
    pub angle: f64,
    /// 2(u(h) − T)/h² at the finest scale h/4.
    pub finest: f64,
    /// Richardson extrapolation over the scales h, h/2, h/4.
    pub extrapolated: f64,
    /// Observed convergence order of the three-scale sequence.
    pub order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianReport {
    pub h: f64,
    pub entries: Vec<HessianEntry>,
    pub spread_finest: f64,
    pub spread_extrapolated: f64,
    pub expected: f64,
}

impl HessianReport {
    pub fn max_relative_error(&self) -> f64 {
        self.entries.iter().map(|e| (e.extrapolated / self.expected - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Second radial derivative of u at x* per direction, from the three
/// scales h, h/2, h/4. The largest scale defaults to four times the
/// smallest resolved radius.
pub fn hessian_at_center(field: &ArrivalField, h: Option<f64>) -> Result<HessianReport> {
    let floor = field.common_floor();
    let h = h.unwrap_or(4.0 * floor * 1.05);
    let needed = 0.01 * field.r0;
    if h / 4.0 > needed || h / 4.0 < floor {
        return Err(Error::InsufficientResolution { rho_min: floor.max(h / 4.0), needed });
    }
    let mut entries = Vec::with_capacity(field.angles.len());
    for j in 0..field.angles.len() {
        let d = |rho: f64| -> Result<f64> { Ok(2.0 * (field.u_at(j, rho)? - field.t_ext) / (rho * rho)) };
        let (d1, d2, d3) = (d(h)?, d(h / 2.0)?, d(h / 4.0)?);
        let order = ((d1 - d2) / (d2 - d3)).log2();
        let extrapolated =
            if order.is_finite() && order > 0.1 && order < 4.0 { d3 + (d3 - d2) / (order.exp2() - 1.0) } else { d3 };
        entries.push(HessianEntry { angle: field.angles[j], finest: d3, extrapolated, order });
    }
    let spread = |f: fn(&HessianEntry) -> f64| {
        let v: Vec<f64> = entries.iter().map(f).collect();
        v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min)
    };
    Ok(HessianReport {
        h,
        spread_finest: spread(|e| e.finest),
        spread_extrapolated: spread(|e| e.extrapolated),
        entries,
        expected: -1.0 / field.n as f64,
    })
}

/// Pointwise noise level of the residual T − u − ρ²/(2n).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Absolute part, dominated by the uncertainty of T.
    pub abs: f64,
    /// Part proportional to ρ²/(2n), from time integration.
    pub rel: f64,
}

impl NoiseModel {
    pub fn at(&self, rho: f64, n: usize) -> f64 {
        self.abs + self.rel * rho * rho / (2.0 * n as f64)
    }

    /// Noise levels implied by a run: the scatter of the extinction-time
    /// fit plus rounding of T, and the integrator tolerance.
    pub fn from_run(est: &SingularityEstimate, cfg: &IntegratorConfig) -> Self {
        Self { abs: est.t_ext_std_err + 64.0 * f64::EPSILON * est.t_ext.abs(), rel: 100.0 * cfg.tol }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualFit {
    pub angle: f64,
    /// Exponent p in T − u − ρ²/(2n) ≈ c ρ^p.
    pub p: f64,
    pub c: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub rho_range: (f64, f64),
}

/// T − u − ρ²/(2n) at every scheduled radius along a direction.
pub fn residuals(field: &ArrivalField, dir: usize) -> Vec<(f64, f64)> {
    let n = field.n as f64;
    field.radii.iter().zip(&field.u[dir]).map(|(r, u)| (*r, (field.t_ext - u) - r * r / (2.0 * n))).collect()
}

/// Log-log fit of the residual over scheduled radii ≤ `fit_max` where it
/// exceeds ten times the noise.
pub fn c3_probe(field: &ArrivalField, dir: usize, noise: &NoiseModel, fit_max: f64) -> Result<ResidualFit> {
    let pts: Vec<(f64, f64)> = residuals(field, dir)
        .into_iter()
        .filter(|(r, res)| *r <= fit_max && res.abs() > 10.0 * noise.at(*r, field.n))
        .collect();
    if pts.len() < 10 {
        return Err(Error::NoiseFloor { points: pts.len() });
    }
    let sign = pts.last().expect("nonempty").1.signum();
    let pts: Vec<(f64, f64)> = pts.into_iter().filter(|(_, res)| res.signum() == sign).collect();
    if pts.len() < 10 {
        return Err(Error::NoiseFloor { points: pts.len() });
    }
    let x: Vec<f64> = pts.iter().map(|(r, _)| r.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|(_, res)| res.abs().ln()).collect();
    let f = fit_line(&x, &y);
    Ok(ResidualFit {
        angle: field.angles[dir],
        p: f.slope,
        c: sign * f.intercept.exp(),
        r_squared: f.r_squared,
        n_points: pts.len(),
        rho_range: (pts.last().expect("nonempty").0, pts[0].0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionResult {
    pub angle: f64,
    pub fit: Option<ResidualFit>,
    /// Coefficient at the pooled exponent, fitted on the common radii.
    pub c_at_pooled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub degree: usize,
    pub directions: Vec<DirectionResult>,
    /// Median exponent over directions above the noise floor.
    pub p_pooled: Option<f64>,
    pub noise_floor_directions: usize,
    /// Correlation of c(ω) with the degree-l zonal harmonic.
    pub profile_correlation: Option<f64>,
    /// Least-squares ratio c(ω) / (α Y_l(ω)), when α is supplied.
    pub c_over_alpha: Option<f64>,
    /// Leading coefficient of T − u, fixed by the Hessian −1/n.
    pub quadratic_coefficient: f64,
    pub note: String,
}

/// Runs `c3_probe` in every direction and summarizes the residual term.
pub fn regularity_report(
    field: &ArrivalField,
    degree: usize,
    noise: &NoiseModel,
    fit_max: f64,
    alpha: Option<f64>,
) -> RegularityReport {
    let n = field.n;
    let fits: Vec<Option<ResidualFit>> =
        (0..field.angles.len()).map(|j| c3_probe(field, j, noise, fit_max).ok()).collect();
    let ps: Vec<f64> = fits.iter().flatten().map(|f| f.p).collect();
    let p_pooled = (!ps.is_empty()).then(|| median(&ps));
    let profile: Vec<f64> = field.angles.iter().map(|a| zonal_harmonic(n, degree, *a)).collect();
    let mut directions = Vec::with_capacity(fits.len());
    let mut c_values = Vec::with_capacity(fits.len());
    if let Some(p) = p_pooled {
        // radii at which the strongest direction is measurable
        let usable: Vec<usize> = (0..field.radii.len())
            .filter(|&i| {
                let r = field.radii[i];
                r <= fit_max && (0..field.angles.len()).any(|j| residuals(field, j)[i].1.abs() > 10.0 * noise.at(r, n))
            })
            .collect();
        for (j, fit) in fits.iter().enumerate() {
            let res = residuals(field, j);
            let (mut num, mut den) = (0.0, 0.0);
            for &i in &usable {
                let (r, v) = res[i];
                let b = r.powf(p);
                num += v * b;
                den += b * b;
            }
            let c = if den > 0.0 { num / den } else { 0.0 };
            c_values.push(c);
            directions.push(DirectionResult { angle: field.angles[j], fit: *fit, c_at_pooled: c });
        }
    } else {
        for (j, fit) in fits.iter().enumerate() {
            directions.push(DirectionResult { angle: field.angles[j], fit: *fit, c_at_pooled: 0.0 });
        }
    }
    let profile_correlation = p_pooled.map(|_| correlation(&c_values, &profile));
    let c_over_alpha = match (alpha, p_pooled) {
        (Some(a), Some(_)) if a != 0.0 => {
            let num: f64 = c_values.iter().zip(&profile).map(|(c, y)| c * a * y).sum();
            let den: f64 = profile.iter().map(|y| (a * y).powi(2)).sum();
            Some(num / den)
        }
        _ => None,
    };
    RegularityReport {
        degree,
        noise_floor_directions: fits.iter().filter(|f| f.is_none()).count(),
        directions,
        p_pooled,
        profile_correlation,
        c_over_alpha,
        quadratic_coefficient: 1.0 / (2.0 * n as f64),
        note: format!(
            "T - u = rho^2/(2n) + ... with n = {n}; a leading coefficient of 1/n would contradict the measured Hessian -1/n"
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// No residual term of order ≤ 3 above the noise floor.
    C3Compatible,
    NotC3,
    /// β_l = 3 exactly: reported without a verdict.
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorollaryReport {
    pub degree: usize,
    pub n: usize,
    /// Decay rate l(l+n−1)/n − 2 of the degree-l mode.
    pub beta_l: f64,
    pub expected_p: f64,
    pub verdict: Verdict,
    /// True when no direction rose above the noise floor.
    pub noise_floor: bool,
    pub min_p: Option<f64>,
    pub fits: Vec<ResidualFit>,
}

/// Regularity verdict for data whose slowest surviving mode has degree l.
pub fn corollary_check(field: &ArrivalField, l: usize, noise: &NoiseModel, fit_max: f64) -> CorollaryReport {
    let n = field.n;
    let nf = n as f64;
    let lf = l as f64;
    let beta_l = lf * (lf + nf - 1.0) / nf - 2.0;
    let fits: Vec<ResidualFit> =
        (0..field.angles.len()).filter_map(|j| c3_probe(field, j, noise, fit_max).ok()).collect();
    let min_p = fits.iter().map(|f| f.p).reduce(f64::min);
    let verdict = if (beta_l - 3.0).abs() < 1e-12 {
        Verdict::Boundary
    } else if min_p.is_none_or(|p| p > 3.0) {
        Verdict::C3Compatible
    } else {
        Verdict::NotC3
    };
    CorollaryReport {
        degree: l,
        n,
        beta_l,
        expected_p: 2.0 + beta_l,
        verdict,
        noise_floor: fits.is_empty(),
        min_p,
        fits,
    }
}

/// Outcome of tuning the degree-2 coefficient of the initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullTuning {
    /// Coefficient b of Y_2 in r(0) = √n + ε Y_l + b Y_2.
    pub b: f64,
    /// Remaining e^{(2/n) s_ref} a_2(s_ref) at the tuned b.
    pub residual: f64,
    pub untuned: f64,
    pub iterations: usize,
}

/// Chooses b so that the rescaled flow from √n + ε Y_l + b Y_2 carries no
/// e^{−2s/n} tail in its degree-2 mode. Quadratic interactions of Y_l
/// generally feed the degree-2 mode, so without this the slowest decay
/// rate 2/n reappears at order ε². The tail amplitude is measured as
/// e^{(2/n) s_ref} a_2(s_ref) and driven to zero by the secant method.
pub fn tune_degree_two(
    grid: std::sync::Arc<crate::spectral::ZonalGrid>,
    l: usize,
    eps: f64,
    s_ref: f64,
    cfg: &IntegratorConfig,
) -> Result<NullTuning> {
    use crate::geometry::RadialGraph;
    use crate::spectral::{mode_index, ZonalSpectrum};
    let n = grid.n();
    let root = (n as f64).sqrt();
    let tail = |b: f64| -> Result<f64> {
        let mut spec = ZonalSpectrum::unit(n, l, eps);
        let i2 = mode_index(n, 2);
        if spec.coeffs.len() <= i2 {
            spec.coeffs.resize(i2 + 1, 0.0);
        }
        spec.coeffs[i2] += b;
        let graph = RadialGraph::from_spectrum(grid.clone(), root, &spec)?;
        let trace = crate::flow::run_rescaled(&graph, s_ref, cfg)?;
        let last = trace.last().expect("nonempty trace");
        Ok((2.0 / n as f64 * last.time).exp() * last.graph.perturbation_w().mode(2))
    };
    let (mut b0, mut a0) = (0.0, tail(0.0)?);
    let untuned = a0;
    if a0 == 0.0 {
        return Ok(NullTuning { b: 0.0, residual: 0.0, untuned, iterations: 0 });
    }
    let mut b1 = -a0;
    let mut a1 = tail(b1)?;
    let mut iterations = 1;
    while a1.abs() > 1e-6 * untuned.abs() && iterations < 8 && a1 != a0 {
        let b2 = b1 - a1 * (b1 - b0) / (a1 - a0);
        (b0, a0) = (b1, a1);
        b1 = b2;
        a1 = tail(b1)?;
        iterations += 1;
    }
    Ok(NullTuning { b: b1, residual: a1, untuned, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_octaves() {
        let r = RadiiSchedule { rho_max: 1.0, rho_min: 0.25, per_octave: 4 }.radii();
        assert_eq!(r.len(), 9);
        assert!((r[4] - 0.5).abs() < 1e-15 && (r[8] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn angles_avoid_poles() {
        let a = default_angles(2, 4);
        assert!(a[0] > 0.0 && a[3] < std::f64::consts::PI);
        assert_eq!(default_angles(1, 4)[0], 0.0);
    }
}
