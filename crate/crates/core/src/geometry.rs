//! Differential geometry of radial graphs F(ω) = c + r(ω)ω over S^n.
//!
//! For n ≥ 2 the graph is a hypersurface of revolution about the first
//! coordinate axis. Writing r' = dr/dφ and E = √(r² + r'²) (so that the
//! meridian arclength is dσ = E dφ), the outward normal in the (z, ρ)
//! half-plane is
//!
//!   ν = (r cos φ + r' sin φ, r sin φ − r' cos φ) / E,
//!
//! the meridian curvature is κ_m = (r² + 2r'² − r r'') / E³ and the
//! (n−1)-fold rotational curvature is κ_r = ν_ρ / ρ = (1 − cot φ · r'/r) / E.
//! Then H = κ_m + (n−1)κ_r and |A|² = κ_m² + (n−1)κ_r². For n = 1 only κ_m
//! is present. The sign convention gives the sphere of radius R the
//! curvatures 1/R and H = n/R.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{ZonalGrid, ZonalSpectrum};

#[derive(Debug, Clone)]
pub struct RadialGraph {
    grid: Arc<ZonalGrid>,
    r: Vec<f64>,
    center: Vec<f64>,
}

/// Pointwise curvature quantities at the grid nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvatureData {
    pub n: usize,
    pub h: Vec<f64>,
    pub a2: Vec<f64>,
    pub pinching: Vec<f64>,
    pub v: Vec<f64>,
    pub kappa_meridian: Vec<f64>,
    /// Rotational curvature of multiplicity n − 1; empty for n = 1.
    pub kappa_rotational: Vec<f64>,
    pub normal_align: Vec<f64>,
    pub r: Vec<f64>,
    pub dr: Vec<f64>,
    pub ddr: Vec<f64>,
    /// Arclength density E = √(r² + r'²) of the parametrizing angle.
    pub arc: Vec<f64>,
}

impl RadialGraph {
    pub fn new(grid: Arc<ZonalGrid>, r: Vec<f64>, center: Vec<f64>) -> Result<Self> {
        let n = grid.n();
        if r.len() != grid.size() {
            return Err(Error::LengthMismatch { expected: grid.size(), got: r.len() });
        }
        if center.len() != n + 1 {
            return Err(Error::InvalidArgument(format!("center needs {} components, got {}", n + 1, center.len())));
        }
        if n >= 2 && center[1..].iter().any(|c| *c != 0.0) {
            return Err(Error::InvalidArgument("zonal graphs need a center on the symmetry axis".into()));
        }
        for (i, v) in r.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(i));
            }
            if *v <= 0.0 {
                return Err(Error::NotStarShaped(i));
            }
        }
        Ok(Self { grid, r, center })
    }

    /// Graph centered at the origin.
    pub fn centered(grid: Arc<ZonalGrid>, r: Vec<f64>) -> Result<Self> {
        let n = grid.n();
        Self::new(grid, r, vec![0.0; n + 1])
    }

    /// Round sphere of the given radius about the origin.
    pub fn sphere(grid: Arc<ZonalGrid>, radius: f64) -> Result<Self> {
        let size = grid.size();
        Self::centered(grid, vec![radius; size])
    }

    /// r = base + spectrum synthesized on the grid, centered at the origin.
    pub fn from_spectrum(grid: Arc<ZonalGrid>, base: f64, spec: &ZonalSpectrum) -> Result<Self> {
        let r = grid.synthesize(spec)?.into_iter().map(|v| v + base).collect();
        Self::centered(grid, r)
    }

    pub fn grid(&self) -> &ZonalGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<ZonalGrid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn with_r(&self, r: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), r, self.center.clone())
    }

    pub fn with_center(&self, center: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), self.r.clone(), center)
    }

    /// Scales all radii (and the center) by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.grid.clone(),
            self.r.iter().map(|v| v * factor).collect(),
            self.center.iter().map(|v| v * factor).collect(),
        )
    }

    pub fn r_min(&self) -> f64 {
        self.r.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn r_max(&self) -> f64 {
        self.r.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Mean of r over the unit sphere.
    pub fn r_mean(&self) -> f64 {
        let w = self.grid.unit_sphere_weights();
        let total: f64 = w.iter().sum();
        w.iter().zip(&self.r).map(|(w, r)| w * r).sum::<f64>() / total
    }

    /// Unit direction of node j as a vector in R^{n+1}.
    pub fn direction(&self, j: usize) -> Vec<f64> {
        let mut d = vec![0.0; self.n() + 1];
        d[0] = self.grid.cos()[j];
        d[1] = self.grid.sin()[j];
        d
    }

    /// Position of node j in space.
    pub fn point(&self, j: usize) -> Vec<f64> {
        let mut p = self.direction(j);
        for (pi, ci) in p.iter_mut().zip(&self.center) {
            *pi = *pi * self.r[j] + ci;
        }
        p
    }

    /// Spectrum of r − √n, the normal-graph perturbation of S^n(√n).
    pub fn perturbation_w(&self) -> ZonalSpectrum {
        let root = (self.n() as f64).sqrt();
        let w: Vec<f64> = self.r.iter().map(|v| v - root).collect();
        self.grid.analyze(&w).expect("radii are validated finite")
    }

    /// Surface area and area-weighted centroid.
    pub fn area_centroid(&self) -> Result<(f64, Vec<f64>)> {
        let n = self.n();
        let (dr, _) = self.grid.angular_derivatives(&self.r);
        let w = self.grid.unit_sphere_weights();
        let mut area = 0.0;
        let mut moment = vec![0.0; n + 1];
        for j in 0..self.r.len() {
            let e = (self.r[j] * self.r[j] + dr[j] * dr[j]).sqrt();
            let da = w[j] * e * self.r[j].powi(n as i32 - 1);
            area += da;
            let d = self.direction(j);
            if n == 1 {
                moment[0] += da * self.r[j] * d[0];
                moment[1] += da * self.r[j] * d[1];
            } else {
                moment[0] += da * self.r[j] * d[0];
            }
        }
        if !area.is_finite() {
            return Err(Error::NonFinite(0));
        }
        let centroid = moment.iter().zip(&self.center).map(|(m, c)| m / area + c).collect();
        Ok((area, centroid))
    }

    /// Re-expresses the same surface as a radial graph about `new_center`.
    pub fn resample(&self, new_center: &[f64]) -> Result<Self> {
        let n = self.n();
        if new_center.len() != n + 1 {
            return Err(Error::InvalidArgument("center dimension mismatch".into()));
        }
        let d: Vec<f64> = new_center.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let shift = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if shift == 0.0 {
            return Ok(self.clone());
        }
        if n >= 2 && d[1..].iter().any(|v| *v != 0.0) {
            return Err(Error::InvalidArgument("zonal graphs need a center on the symmetry axis".into()));
        }
        if shift >= 0.5 * self.r_min() {
            return Err(Error::ShiftTooLarge(shift));
        }
        let spec = self.grid.analyze(&self.r)?;
        let mut out = Vec::with_capacity(self.r.len());
        for j in 0..self.r.len() {
            let (c, s) = (self.grid.cos()[j], self.grid.sin()[j]);
            let rho =
                self.ray_hit(&spec, &d, c, s, self.r[j] - (d[0] * c + d[1] * s)).ok_or(Error::ShiftTooLarge(shift))?;
            out.push(rho);
        }
        Self::new(self.grid.clone(), out, new_center.to_vec())
    }

    /// Distances from `origin` to the surface along the rays with the given
    /// angles (polar angle for n ≥ 2, plane angle for n = 1). The origin
    /// must lie inside the surface, on the symmetry axis when n ≥ 2.
    pub fn ray_distances(&self, origin: &[f64], angles: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if origin.len() != n + 1 || (n >= 2 && origin[1..].iter().any(|v| *v != 0.0)) {
            return Err(Error::InvalidArgument("ray origin must lie on the symmetry axis".into()));
        }
        let d: Vec<f64> = origin.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let shift = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if shift >= self.r_min() {
            return Err(Error::ShiftTooLarge(shift));
        }
        let spec = self.grid.analyze(&self.r)?;
        angles
            .iter()
            .map(|a| {
                let (s, c) = a.sin_cos();
                let (r0, _) = self.grid.evaluate(&spec, *a);
                self.ray_hit(&spec, &d, c, s, r0 - (d[0] * c + d[1] * s)).ok_or(Error::ShiftTooLarge(shift))
            })
            .collect()
    }

    /// Newton solve for ρ with |d + ρω| = r(angle of d + ρω), ω = (c, s).
    fn ray_hit(&self, spec: &ZonalSpectrum, d: &[f64], c: f64, s: f64, guess: f64) -> Option<f64> {
        let n = self.n();
        let dy = if d.len() > 1 { d[1] } else { 0.0 };
        let mut rho = guess;
        for _ in 0..50 {
            let x = d[0] + rho * c;
            let y = dy + rho * s;
            let q2 = x * x + y * y;
            let q = q2.sqrt();
            let mut psi = y.atan2(x);
            if n == 1 && psi < 0.0 {
                psi += 2.0 * std::f64::consts::PI;
            }
            let (rv, drv) = self.grid.evaluate(spec, psi);
            let g = q - rv;
            let dpsi = (x * s - y * c) / q2;
            let dg = (x * c + y * s) / q - drv * dpsi;
            let step = g / dg;
            rho -= step;
            if !rho.is_finite() {
                return None;
            }
            if step.abs() <= 1e-13 * rho.abs() {
                return (rho > 0.0).then_some(rho);
            }
        }
        None
    }
}

pub fn curvature_data(graph: &RadialGraph) -> Result<CurvatureData> {
    let grid = graph.grid();
    let n = grid.n();
    let r = graph.r().to_vec();
    let (dr, ddr) = grid.angular_derivatives(&r);
    let size = r.len();
    let mut out = CurvatureData {
        n,
        h: Vec::with_capacity(size),
        a2: Vec::with_capacity(size),
        pinching: Vec::with_capacity(size),
        v: Vec::with_capacity(size),
        kappa_meridian: Vec::with_capacity(size),
        kappa_rotational: Vec::with_capacity(if n == 1 { 0 } else { size }),
        normal_align: Vec::with_capacity(size),
        r: r.clone(),
        dr: dr.clone(),
        ddr: ddr.clone(),
        arc: Vec::with_capacity(size),
    };
    let nf = n as f64;
    for j in 0..size {
        let (rj, p, pp) = (r[j], dr[j], ddr[j]);
        let e = (rj * rj + p * p).sqrt();
        let v = e / rj;
        if !v.is_finite() {
            return Err(Error::NotStarShaped(j));
        }
        let km = (rj * rj + 2.0 * p * p - rj * pp) / (e * e * e);
        let (h, a2) = if n == 1 {
            (km, km * km)
        } else {
            let cot = grid.cos()[j] / grid.sin()[j];
            let kr = (1.0 - cot * p / rj) / e;
            out.kappa_rotational.push(kr);
            (km + (nf - 1.0) * kr, km * km + (nf - 1.0) * kr * kr)
        };
        if !h.is_finite() || !a2.is_finite() {
            return Err(Error::NonFinite(j));
        }
        out.h.push(h);
        out.a2.push(a2);
        out.pinching.push(a2 - h * h / nf);
        out.v.push(v);
        out.kappa_meridian.push(km);
        out.normal_align.push(1.0 / v);
        out.arc.push(e);
    }
    Ok(out)
}

impl CurvatureData {
    /// Smallest principal curvature over all nodes.
    pub fn min_curvature(&self) -> f64 {
        self.kappa_meridian.iter().chain(&self.kappa_rotational).copied().fold(f64::INFINITY, f64::min)
    }
}

/// dr/dt for a prescribed signed speed along the outward normal.
pub fn radial_velocity(graph: &RadialGraph, normal_speed: &[f64]) -> Result<Vec<f64>> {
    let cd = curvature_data(graph)?;
    if normal_speed.len() != cd.v.len() {
        return Err(Error::LengthMismatch { expected: cd.v.len(), got: normal_speed.len() });
    }
    Ok(normal_speed.iter().zip(&cd.v).map(|(s, v)| s * v).collect())
}

/// Strict convexity and its margin, the smallest principal curvature.
pub fn convexity_check(graph: &RadialGraph) -> (bool, f64) {
    match curvature_data(graph) {
        Ok(cd) => {
            let m = cd.min_curvature();
            (m > 0.0, m)
        }
        Err(_) => (false, f64::NEG_INFINITY),
    }
}

/// Laplace–Beltrami operator of the surface applied to a zonal function.
///
/// On the meridian arclength σ with ρ = r sin φ,
/// Δf = f_σσ + (n−1)(ρ_σ/ρ) f_σ, and ρ_σ/ρ = (r'/r + cot φ)/E.
pub fn surface_laplacian(grid: &ZonalGrid, cd: &CurvatureData, f: &[f64]) -> Vec<f64> {
    let (df, ddf) = grid.angular_derivatives(f);
    let nf = cd.n as f64;
    (0..f.len())
        .map(|j| {
            let e = cd.arc[j];
            let de = (cd.r[j] * cd.dr[j] + cd.dr[j] * cd.ddr[j]) / e;
            let mut lap = ddf[j] / (e * e) - df[j] * de / (e * e * e);
            if cd.n >= 2 {
                let cot = grid.cos()[j] / grid.sin()[j];
                lap += (nf - 1.0) * (cd.dr[j] / cd.r[j] + cot) * df[j] / (e * e);
            }
            lap
        })
        .collect()
}

/// Norm of the surface gradient of a zonal function.
pub fn surface_gradient_norm(grid: &ZonalGrid, cd: &CurvatureData, f: &[f64]) -> Vec<f64> {
    let (df, _) = grid.angular_derivatives(f);
    df.iter().zip(&cd.arc).map(|(d, e)| d.abs() / e).collect()
}

/// |∇A| from arclength derivatives of the principal curvatures. By Codazzi
/// the rotational curvature contributes with multiplicity 3(n−1).
pub fn second_form_gradient_norm(grid: &ZonalGrid, cd: &CurvatureData) -> Vec<f64> {
    let (dkm, _) = grid.angular_derivatives(&cd.kappa_meridian);
    let dkr = if cd.n >= 2 { grid.angular_derivatives(&cd.kappa_rotational).0 } else { vec![0.0; dkm.len()] };
    let m = 3.0 * (cd.n as f64 - 1.0);
    (0..dkm.len())
        .map(|j| {
            let e = cd.arc[j];
            ((dkm[j] / e).powi(2) + m * (dkr[j] / e).powi(2)).sqrt()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::build_grid;

    #[test]
    fn round_sphere() {
        for n in [1, 2, 3] {
            let g = Arc::new(build_grid(n, 16).unwrap());
            let cd = curvature_data(&RadialGraph::sphere(g, 3.0).unwrap()).unwrap();
            for j in 0..16 {
                assert!((cd.h[j] - n as f64 / 3.0).abs() < 1e-13);
                assert!((cd.a2[j] - n as f64 / 9.0).abs() < 1e-13);
                assert!(cd.pinching[j].abs() < 1e-13);
                assert!((cd.v[j] - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rejects_nonpositive_radius() {
        let g = Arc::new(build_grid(2, 8).unwrap());
        let mut r = vec![1.0; 8];
        r[2] = 0.0;
        assert_eq!(RadialGraph::centered(g, r).unwrap_err(), Error::NotStarShaped(2));
    }

    #[test]
    fn convexity_examples() {
        let g = Arc::new(build_grid(1, 64).unwrap());
        let mk = |eps: f64| {
            let r = g.angles().iter().map(|t| 1.0 + eps * (2.0 * t).cos()).collect();
            RadialGraph::centered(g.clone(), r).unwrap()
        };
        assert!(!convexity_check(&mk(0.5)).0);
        let (ok, margin) = convexity_check(&mk(0.01));
        assert!(ok && margin > 0.9);
    }

    #[test]
    fn resample_round_trip() {
        let g = Arc::new(build_grid(2, 24).unwrap());
        let r: Vec<f64> = g.cos().iter().map(|x| 1.5 + 0.02 * (3.0 * x * x - 1.0)).collect();
        let graph = RadialGraph::centered(g, r.clone()).unwrap();
        let moved = graph.resample(&[0.05, 0.0, 0.0]).unwrap();
        let back = moved.resample(&[0.0, 0.0, 0.0]).unwrap();
        for (a, b) in back.r().iter().zip(&r) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
