//! Dormand–Prince 5(4) embedded pair.

use crate::error::Result;

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

/// Difference between the fifth- and fourth-order weights.
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

pub(crate) struct StepOutcome {
    pub y: Vec<f64>,
    /// Derivative at the new point (first stage of the next step).
    pub f_new: Vec<f64>,
    pub err: Vec<f64>,
}

/// One step of size `h` from `y` with known derivative `f0 = f(y)` for an
/// autonomous system.
pub(crate) fn dopri_step<F>(f: &F, y: &[f64], f0: &[f64], h: f64) -> Result<StepOutcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let len = y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(f0.to_vec());
    let mut stage = vec![0.0; len];
    for row in A.iter().skip(1) {
        for (i, s) in stage.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (kj, a) in k.iter().zip(row) {
                acc += a * kj[i];
            }
            *s = y[i] + h * acc;
        }
        k.push(f(&stage)?);
    }
    // the seventh stage is evaluated at the fifth-order solution
    let y_new = stage;
    let err = (0..len).map(|i| h * k.iter().zip(&E).map(|(kj, e)| e * kj[i]).sum::<f64>()).collect();
    let f_new = k.pop().expect("seven stages");
    Ok(StepOutcome { y: y_new, f_new, err })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_fifth_order() {
        let f = |y: &[f64]| -> Result<Vec<f64>> { Ok(vec![-y[0]]) };
        let err_at = |h: f64| {
            let steps = (1.0 / h).round() as usize;
            let mut y = vec![1.0];
            for _ in 0..steps {
                let f0 = f(&y).unwrap();
                y = dopri_step(&f, &y, &f0, h).unwrap().y;
            }
            (y[0] - (-1.0f64).exp()).abs()
        };
        let order = (err_at(0.1) / err_at(0.05)).log2();
        assert!((order - 5.0).abs() < 0.3, "order {order}");
    }

    #[test]
    fn embedded_error_tracks_true_error() {
        let f = |y: &[f64]| -> Result<Vec<f64>> { Ok(vec![y[0] * y[0]]) };
        let y = vec![1.0];
        let out = dopri_step(&f, &y, &f(&y).unwrap(), 0.1).unwrap();
        let exact = 1.0 / (1.0 - 0.1);
        let true_err = (out.y[0] - exact).abs();
        assert!(out.err[0].abs() > true_err);
        assert!(out.err[0].abs() < 1e-4);
    }
}
