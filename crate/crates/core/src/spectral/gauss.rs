//! Orthonormal Gegenbauer polynomials in x = cos φ for the weight
//! (1 − x²)^{(n−2)/2}, and the matching Gauss quadrature.

use nalgebra::DMatrix;

/// Three-term recurrence x q_k = a_{k+1} q_{k+1} + a_k q_{k−1} for the
/// orthonormal family, together with q_0.
#[derive(Debug, Clone)]
pub(crate) struct Recurrence {
    /// `a[k]` for k ≥ 1; `a[0]` is unused and set to zero.
    a: Vec<f64>,
    q0: f64,
}

/// ∫_0^π sin^m φ dφ.
pub(crate) fn sine_power_integral(m: usize) -> f64 {
    let mut even = std::f64::consts::PI;
    let mut odd = 2.0;
    if m == 0 {
        return even;
    }
    if m == 1 {
        return odd;
    }
    for j in 2..=m {
        let jf = j as f64;
        if j % 2 == 0 {
            even *= (jf - 1.0) / jf;
        } else {
            odd *= (jf - 1.0) / jf;
        }
    }
    if m.is_multiple_of(2) {
        even
    } else {
        odd
    }
}

/// Surface area of the unit sphere S^m.
pub(crate) fn unit_sphere_area(m: usize) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let (mut area, start) = if m.is_multiple_of(2) { (2.0, 0) } else { (two_pi, 1) };
    let mut k = start;
    while k < m {
        k += 2;
        area *= two_pi / (k as f64 - 1.0);
    }
    area
}

impl Recurrence {
    pub(crate) fn new(n: usize, len: usize) -> Self {
        let nf = n as f64;
        let mut a = vec![0.0; len.max(1) + 1];
        for (k, slot) in a.iter_mut().enumerate().skip(1) {
            let kf = k as f64;
            let b = kf * (kf + nf - 2.0) / ((2.0 * kf + nf - 1.0) * (2.0 * kf + nf - 3.0));
            *slot = b.sqrt();
        }
        let q0 = 1.0 / sine_power_integral(n - 1).sqrt();
        Self { a, q0 }
    }

    /// Values and first two x-derivatives of q_0..q_{len-1} at x.
    pub(crate) fn eval(&self, x: f64, len: usize, q: &mut [f64], dq: &mut [f64], ddq: &mut [f64]) {
        debug_assert!(len < self.a.len());
        q[0] = self.q0;
        dq[0] = 0.0;
        ddq[0] = 0.0;
        if len == 1 {
            return;
        }
        // q_{k+1} = (x q_k − a_k q_{k−1}) / a_{k+1}, differentiated twice.
        let (mut pm, mut dpm, mut ddpm) = (0.0, 0.0, 0.0);
        for k in 0..len - 1 {
            let ak = self.a[k];
            let inv = 1.0 / self.a[k + 1];
            let next = (x * q[k] - ak * pm) * inv;
            let dnext = (q[k] + x * dq[k] - ak * dpm) * inv;
            let ddnext = (2.0 * dq[k] + x * ddq[k] - ak * ddpm) * inv;
            pm = q[k];
            dpm = dq[k];
            ddpm = ddq[k];
            q[k + 1] = next;
            dq[k + 1] = dnext;
            ddq[k + 1] = ddnext;
        }
    }

    /// q_len and its derivative at x, used for Newton polishing of nodes.
    fn top(&self, x: f64, len: usize) -> (f64, f64) {
        let (mut p, mut dp) = (self.q0, 0.0);
        let (mut pm, mut dpm) = (0.0, 0.0);
        for k in 0..len {
            let ak = self.a[k];
            let inv = 1.0 / self.a[k + 1];
            let next = (x * p - ak * pm) * inv;
            let dnext = (p + x * dp - ak * dpm) * inv;
            pm = p;
            dpm = dp;
            p = next;
            dp = dnext;
        }
        (p, dp)
    }
}

/// Gauss nodes (descending in x, i.e. ascending in φ) and Christoffel weights.
pub(crate) fn gauss_rule(n: usize, size: usize) -> (Vec<f64>, Vec<f64>) {
    let rec = Recurrence::new(n, size + 1);
    let jacobi = DMatrix::from_fn(size, size, |i, j| {
        if i + 1 == j {
            rec.a[j]
        } else if j + 1 == i {
            rec.a[i]
        } else {
            0.0
        }
    });
    let mut xs: Vec<f64> = jacobi.symmetric_eigen().eigenvalues.iter().copied().collect();
    xs.sort_by(|a, b| b.total_cmp(a));

    for x in xs.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = rec.top(*x, size);
            let dx = p / dp;
            *x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
    }
    // enforce exact reflection symmetry x ↦ −x
    for i in 0..size / 2 {
        let j = size - 1 - i;
        let m = 0.5 * (xs[i] - xs[j]);
        xs[i] = m;
        xs[j] = -m;
    }
    if size % 2 == 1 {
        xs[size / 2] = 0.0;
    }

    let mut q = vec![0.0; size];
    let mut dq = vec![0.0; size];
    let mut ddq = vec![0.0; size];
    let ws = xs
        .iter()
        .map(|&x| {
            rec.eval(x, size, &mut q, &mut dq, &mut ddq);
            1.0 / q.iter().map(|v| v * v).sum::<f64>()
        })
        .collect();
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_integrals() {
        assert!((sine_power_integral(0) - std::f64::consts::PI).abs() < 1e-15);
        assert!((sine_power_integral(1) - 2.0).abs() < 1e-15);
        assert!((sine_power_integral(2) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((sine_power_integral(3) - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sphere_areas() {
        let pi = std::f64::consts::PI;
        assert_eq!(unit_sphere_area(0), 2.0);
        assert!((unit_sphere_area(1) - 2.0 * pi).abs() < 1e-14);
        assert!((unit_sphere_area(2) - 4.0 * pi).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 2.0 * pi * pi).abs() < 1e-13);
        assert!((unit_sphere_area(4) - 8.0 * pi * pi / 3.0).abs() < 1e-13);
    }

    #[test]
    fn legendre_three_point_rule() {
        let (x, w) = gauss_rule(2, 3);
        let r = (0.6f64).sqrt();
        assert!((x[0] - r).abs() < 1e-15 && x[1] == 0.0 && (x[2] + r).abs() < 1e-15);
        assert!((w[0] - 5.0 / 9.0).abs() < 1e-14);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-14);
    }
}
