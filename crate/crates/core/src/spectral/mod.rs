//! Quadrature grids and the zonal harmonic basis on S^n(√n).
//!
//! For n ≥ 2 functions depend on the polar angle φ only and are expanded in
//! normalized Gegenbauer polynomials of x = cos φ, sampled at Gauss nodes.
//! For n = 1 the full Fourier basis on equispaced angles is used, with
//! coefficients laid out as `[a_0, c_1, s_1, c_2, s_2, …]`.

mod gauss;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub(crate) use gauss::unit_sphere_area;
use gauss::Recurrence;

/// Quadrature grid with precomputed transform and derivative matrices.
#[derive(Debug, Clone)]
pub struct ZonalGrid {
    n: usize,
    size: usize,
    angles: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
    weights: Vec<f64>,
    k_max: usize,
    degrees: Vec<usize>,
    measure: f64,
    rec: Option<Recurrence>,
    synth: DMatrix<f64>,
    analysis: DMatrix<f64>,
    d1: DMatrix<f64>,
    d2: DMatrix<f64>,
    lap: DMatrix<f64>,
    filter: DMatrix<f64>,
}

/// Coefficients in the orthonormal basis of L²(S^n(√n)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonalSpectrum {
    pub n: usize,
    pub coeffs: Vec<f64>,
}

/// Degree of the basis function stored at `index`.
pub fn degree_of(n: usize, index: usize) -> usize {
    if n == 1 {
        index.div_ceil(2)
    } else {
        index
    }
}

/// Index of the zonal (n ≥ 2) or cosine (n = 1) member of degree k.
pub fn mode_index(n: usize, k: usize) -> usize {
    if n == 1 && k > 0 {
        2 * k - 1
    } else {
        k
    }
}

impl ZonalSpectrum {
    pub fn zeros(n: usize, len: usize) -> Self {
        Self { n, coeffs: vec![0.0; len] }
    }

    /// Single unit coefficient on the zonal / cosine member of degree k.
    pub fn unit(n: usize, k: usize, amplitude: f64) -> Self {
        let idx = mode_index(n, k);
        let mut coeffs = vec![0.0; idx + 1];
        coeffs[idx] = amplitude;
        Self { n, coeffs }
    }

    /// Coefficient of the zonal / cosine member of degree k, zero if absent.
    pub fn mode(&self, k: usize) -> f64 {
        self.coeffs.get(mode_index(self.n, k)).copied().unwrap_or(0.0)
    }

    /// Euclidean norm of all coefficients of degree k.
    pub fn degree_norm(&self, k: usize) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(i, _)| degree_of(self.n, *i) == k)
            .map(|(_, c)| c * c)
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn max_degree(&self) -> usize {
        self.coeffs.iter().rposition(|c| *c != 0.0).map(|i| degree_of(self.n, i)).unwrap_or(0)
    }
}

/// Volume of the round sphere S^n of radius √n.
pub fn sphere_volume(n: usize) -> f64 {
    (n as f64).powf(n as f64 / 2.0) * unit_sphere_area(n)
}

/// Eigenvalue 2 − k(k+n−1)/n of Δ + 2 on S^n(√n). The numerator is formed
/// in integers so that 2, 1 and −2/n come out exactly.
pub fn operator_eigenvalue(n: usize, k: usize) -> f64 {
    let num = 2 * n as i64 - (k * (k + n - 1)) as i64;
    num as f64 / n as f64
}

/// Eigenvalue of the Laplace–Beltrami operator on S^n(radius) for degree k.
pub fn laplacian_eigenvalue(n: usize, k: usize, radius: f64) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    -kf * (kf + nf - 1.0) / (radius * radius)
}

/// Orthonormal zonal harmonic of degree k on S^n(√n) at polar angle φ.
/// For n = 1 this is the cosine member, cos(kφ)/√π (or 1/√(2π) for k = 0).
pub fn zonal_harmonic(n: usize, k: usize, phi: f64) -> f64 {
    assert!(n >= 1, "dimension must be positive");
    if n == 1 {
        return if k == 0 { 1.0 / (2.0 * PI).sqrt() } else { (k as f64 * phi).cos() / PI.sqrt() };
    }
    let rec = Recurrence::new(n, k + 1);
    let mut q = vec![0.0; k + 1];
    let mut dq = vec![0.0; k + 1];
    let mut ddq = vec![0.0; k + 1];
    rec.eval(phi.cos(), k + 1, &mut q, &mut dq, &mut ddq);
    q[k] / zonal_measure(n).sqrt()
}

fn zonal_measure(n: usize) -> f64 {
    if n == 1 {
        1.0
    } else {
        (n as f64).powf(n as f64 / 2.0) * unit_sphere_area(n - 1)
    }
}

/// Builds the quadrature grid for S^n with `size` nodes.
pub fn build_grid(n: usize, size: usize) -> Result<ZonalGrid> {
    if n < 1 {
        return Err(Error::InvalidDimension(n));
    }
    if size < 8 {
        return Err(Error::TooFewNodes(size));
    }
    if n == 1 {
        Ok(fourier_grid(size))
    } else {
        Ok(gegenbauer_grid(n, size))
    }
}

fn fourier_grid(size: usize) -> ZonalGrid {
    let k_max = (size - 1) / 2;
    let modes = 2 * k_max + 1;
    let h = 2.0 * PI / size as f64;
    let angles: Vec<f64> = (0..size).map(|j| j as f64 * h).collect();
    let weights = vec![h; size];
    let degrees: Vec<usize> = (0..modes).map(|i| degree_of(1, i)).collect();

    // basis value, first and second derivative in θ
    let basis = |i: usize, t: f64| -> (f64, f64, f64) {
        if i == 0 {
            return (1.0 / (2.0 * PI).sqrt(), 0.0, 0.0);
        }
        let k = degrees[i] as f64;
        let c = 1.0 / PI.sqrt();
        let (s, co) = (k * t).sin_cos();
        if i % 2 == 1 {
            (c * co, -c * k * s, -c * k * k * co)
        } else {
            (c * s, c * k * co, -c * k * k * s)
        }
    };
    let synth = DMatrix::from_fn(size, modes, |j, i| basis(i, angles[j]).0);
    let ds1 = DMatrix::from_fn(size, modes, |j, i| basis(i, angles[j]).1);
    let ds2 = DMatrix::from_fn(size, modes, |j, i| basis(i, angles[j]).2);
    let analysis = DMatrix::from_fn(modes, size, |i, j| weights[j] * synth[(j, i)]);
    finish(FinishArgs {
        n: 1,
        size,
        cos: angles.iter().map(|t| t.cos()).collect(),
        sin: angles.iter().map(|t| t.sin()).collect(),
        angles,
        weights,
        k_max,
        degrees,
        measure: 1.0,
        rec: None,
        synth,
        analysis,
        ds1,
        ds2,
    })
}

fn gegenbauer_grid(n: usize, size: usize) -> ZonalGrid {
    let (xs, weights) = gauss::gauss_rule(n, size);
    let rec = Recurrence::new(n, size + 1);
    let measure = zonal_measure(n);
    let scale = 1.0 / measure.sqrt();
    let sin: Vec<f64> = xs.iter().map(|x| (1.0 - x * x).max(0.0).sqrt()).collect();
    let angles: Vec<f64> = xs.iter().map(|x| x.acos()).collect();

    let mut synth = DMatrix::zeros(size, size);
    let mut ds1 = DMatrix::zeros(size, size);
    let mut ds2 = DMatrix::zeros(size, size);
    let mut q = vec![0.0; size];
    let mut dq = vec![0.0; size];
    let mut ddq = vec![0.0; size];
    for j in 0..size {
        rec.eval(xs[j], size, &mut q, &mut dq, &mut ddq);
        let (x, s) = (xs[j], sin[j]);
        for k in 0..size {
            synth[(j, k)] = q[k] * scale;
            // d/dφ = −sin φ d/dx; d²/dφ² = −x d/dx + sin²φ d²/dx²
            ds1[(j, k)] = -s * dq[k] * scale;
            ds2[(j, k)] = (-x * dq[k] + s * s * ddq[k]) * scale;
        }
    }
    let analysis = DMatrix::from_fn(size, size, |k, j| measure * weights[j] * synth[(j, k)]);
    finish(FinishArgs {
        n,
        size,
        angles,
        cos: xs,
        sin,
        weights,
        k_max: size - 1,
        degrees: (0..size).collect(),
        measure,
        rec: Some(rec),
        synth,
        analysis,
        ds1,
        ds2,
    })
}

struct FinishArgs {
    n: usize,
    size: usize,
    angles: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
    weights: Vec<f64>,
    k_max: usize,
    degrees: Vec<usize>,
    measure: f64,
    rec: Option<Recurrence>,
    synth: DMatrix<f64>,
    analysis: DMatrix<f64>,
    ds1: DMatrix<f64>,
    ds2: DMatrix<f64>,
}

fn finish(a: FinishArgs) -> ZonalGrid {
    let cutoff = 2 * a.k_max / 3;
    let modes = a.degrees.len();
    let nf = a.n as f64;
    let lap_diag = DMatrix::from_fn(modes, modes, |i, j| {
        if i == j {
            let k = a.degrees[i] as f64;
            -k * (k + nf - 1.0)
        } else {
            0.0
        }
    });
    let keep = DMatrix::from_fn(modes, modes, |i, j| if i == j && a.degrees[i] <= cutoff { 1.0 } else { 0.0 });
    let lap = &a.synth * lap_diag * &a.analysis;
    let filter = &a.synth * keep * &a.analysis;
    let d1 = &a.ds1 * &a.analysis;
    let d2 = &a.ds2 * &a.analysis;
    ZonalGrid {
        n: a.n,
        size: a.size,
        angles: a.angles,
        cos: a.cos,
        sin: a.sin,
        weights: a.weights,
        k_max: a.k_max,
        degrees: a.degrees,
        measure: a.measure,
        rec: a.rec,
        synth: a.synth,
        analysis: a.analysis,
        d1,
        d2,
        lap,
        filter,
    }
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(v)).as_slice().to_vec()
}

impl ZonalGrid {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of nodes N.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Polar angles φ_j (n ≥ 2, ascending) or θ_j (n = 1).
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn cos(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin(&self) -> &[f64] {
        &self.sin
    }

    /// Weights of the one-dimensional rule: Gauss weights in x = cos φ for
    /// n ≥ 2, trapezoid weights in θ for n = 1.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Number of spectral coefficients the grid resolves.
    pub fn modes(&self) -> usize {
        self.degrees.len()
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// Degree cutoff used by the 2/3 dealiasing filter.
    pub fn dealias_cutoff(&self) -> usize {
        2 * self.k_max / 3
    }

    /// Weights for integrating over the unit sphere S^n; they sum to |S^n|.
    pub fn unit_sphere_weights(&self) -> Vec<f64> {
        let f = if self.n == 1 { 1.0 } else { unit_sphere_area(self.n - 1) };
        self.weights.iter().map(|w| w * f).collect()
    }

    /// ∫ f over S^n(√n) for zonal node values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.measure * self.weights.iter().zip(values).map(|(w, f)| w * f).sum::<f64>()
    }

    pub fn l2_norm(&self, values: &[f64]) -> f64 {
        self.integrate(&values.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt()
    }

    fn check_values(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.size {
            return Err(Error::LengthMismatch { expected: self.size, got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(())
    }

    pub fn analyze(&self, values: &[f64]) -> Result<ZonalSpectrum> {
        self.check_values(values)?;
        Ok(ZonalSpectrum { n: self.n, coeffs: mat_vec(&self.analysis, values) })
    }

    pub fn synthesize(&self, spec: &ZonalSpectrum) -> Result<Vec<f64>> {
        let modes = self.modes();
        if spec.coeffs.len() > modes && spec.coeffs[modes..].iter().any(|c| *c != 0.0) {
            return Err(Error::DegreeOverflow { got: spec.coeffs.len(), max: modes });
        }
        if let Some(i) = spec.coeffs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let mut c = spec.coeffs.clone();
        c.resize(modes, 0.0);
        Ok(mat_vec(&self.synth, &c))
    }

    /// Spectral Laplace–Beltrami operator on S^n(radius).
    pub fn laplace_beltrami(&self, values: &[f64], radius: f64) -> Result<Vec<f64>> {
        if !(radius > 0.0) {
            return Err(Error::NonPositiveRadius(radius));
        }
        self.check_values(values)?;
        let s = 1.0 / (radius * radius);
        Ok(mat_vec(&self.lap, values).into_iter().map(|v| v * s).collect())
    }

    /// First and second derivatives with respect to the angle (φ or θ).
    pub fn angular_derivatives(&self, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (mat_vec(&self.d1, values), mat_vec(&self.d2, values))
    }

    /// Projection onto degrees ≤ 2K_max/3.
    pub fn dealias(&self, values: &[f64]) -> Vec<f64> {
        mat_vec(&self.filter, values)
    }

    /// Evaluates the expansion and its angular derivative at an arbitrary angle.
    pub fn evaluate(&self, spec: &ZonalSpectrum, angle: f64) -> (f64, f64) {
        let len = spec.coeffs.len().min(self.modes());
        match &self.rec {
            None => {
                let mut f = 0.0;
                let mut df = 0.0;
                for (i, c) in spec.coeffs[..len].iter().enumerate() {
                    if i == 0 {
                        f += c / (2.0 * PI).sqrt();
                        continue;
                    }
                    let k = self.degrees[i] as f64;
                    let (s, co) = (k * angle).sin_cos();
                    let (b, db) = if i % 2 == 1 { (co, -k * s) } else { (s, k * co) };
                    f += c * b / PI.sqrt();
                    df += c * db / PI.sqrt();
                }
                (f, df)
            }
            Some(rec) => {
                let mut q = vec![0.0; len.max(1)];
                let mut dq = vec![0.0; len.max(1)];
                let mut ddq = vec![0.0; len.max(1)];
                let (s, x) = angle.sin_cos();
                rec.eval(x, len.max(1), &mut q, &mut dq, &mut ddq);
                let scale = 1.0 / self.measure.sqrt();
                let mut f = 0.0;
                let mut dfx = 0.0;
                for (k, c) in spec.coeffs[..len].iter().enumerate() {
                    f += c * q[k];
                    dfx += c * dq[k];
                }
                (f * scale, -s * dfx * scale)
            }
        }
    }

    /// Node values of the zonal / cosine harmonic of degree k.
    pub fn harmonic_values(&self, k: usize) -> Vec<f64> {
        self.angles.iter().map(|&a| zonal_harmonic(self.n, k, a)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_arguments() {
        assert_eq!(build_grid(0, 16).unwrap_err(), Error::InvalidDimension(0));
        assert_eq!(build_grid(2, 7).unwrap_err(), Error::TooFewNodes(7));
    }

    #[test]
    fn weight_sums() {
        let g1 = build_grid(1, 16).unwrap();
        assert!(g1.weights().iter().all(|w| (w - 2.0 * PI / 16.0).abs() < 1e-15));
        let g2 = build_grid(2, 32).unwrap();
        assert!((g2.weights().iter().sum::<f64>() - 2.0).abs() < 1e-13);
        let g3 = build_grid(3, 24).unwrap();
        assert!((g3.weights().iter().sum::<f64>() - PI / 2.0).abs() / (PI / 2.0) < 1e-12);
    }

    #[test]
    fn constant_harmonic_matches_volume() {
        for n in 1..=5 {
            let v = sphere_volume(n);
            assert!((zonal_harmonic(n, 0, 0.7) - 1.0 / v.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn degree_two_shape_for_n2() {
        // proportional to 3cos²φ − 1
        let r = zonal_harmonic(2, 2, 0.3) / (3.0 * 0.3f64.cos().powi(2) - 1.0);
        let r2 = zonal_harmonic(2, 2, 1.1) / (3.0 * 1.1f64.cos().powi(2) - 1.0);
        assert!((r - r2).abs() < 1e-14);
    }

    #[test]
    fn fourier_second_derivative() {
        let g = build_grid(1, 16).unwrap();
        let f: Vec<f64> = g.angles().iter().map(|t| (2.0 * t).cos()).collect();
        let lap = g.laplace_beltrami(&f, 1.0).unwrap();
        for (a, b) in lap.iter().zip(&f) {
            assert!((a + 4.0 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn overflow_is_rejected() {
        let g = build_grid(2, 8).unwrap();
        let spec = ZonalSpectrum::unit(2, 9, 1.0);
        assert!(matches!(g.synthesize(&spec), Err(Error::DegreeOverflow { .. })));
        assert!(matches!(g.laplace_beltrami(&[0.0; 8], 0.0), Err(Error::NonPositiveRadius(_))));
        let mut bad = vec![0.0; 8];
        bad[3] = f64::NAN;
        assert_eq!(g.analyze(&bad).unwrap_err(), Error::NonFinite(3));
    }

    #[test]
    fn evaluate_matches_nodes() {
        for n in [1, 2, 3] {
            let g = build_grid(n, 20).unwrap();
            let mut spec = ZonalSpectrum::zeros(n, g.modes());
            for (i, c) in spec.coeffs.iter_mut().enumerate().take(8) {
                *c = 1.0 / (1.0 + i as f64);
            }
            let vals = g.synthesize(&spec).unwrap();
            let (d1, _) = g.angular_derivatives(&vals);
            for j in 0..g.size() {
                let (f, df) = g.evaluate(&spec, g.angles()[j]);
                assert!((f - vals[j]).abs() < 1e-12);
                assert!((df - d1[j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn eigenvalue_table() {
        for n in [1, 2, 3, 5, 10] {
            assert_eq!(operator_eigenvalue(n, 0), 2.0);
            assert_eq!(operator_eigenvalue(n, 1), 1.0);
            assert!((operator_eigenvalue(n, 2) + 2.0 / n as f64).abs() < 1e-15);
        }
        assert_eq!(operator_eigenvalue(2, 3), -4.0);
    }
}
