//! Composite Simpson quadrature on uniform grids.

/// Weights of the composite rule on `n` unit intervals (`n + 1` nodes).
///
/// Even `n` is plain Simpson; odd `n ≥ 3` closes the last three intervals
/// with the 3/8 rule; `n = 1` falls back to the trapezoid.
pub fn simpson_weights(n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    match n {
        0 => {}
        1 => {
            w[0] = 0.5;
            w[1] = 0.5;
        }
        _ => {
            let even = if n % 2 == 0 { n } else { n - 3 };
            for k in (0..even).step_by(2) {
                w[k] += 1.0 / 3.0;
                w[k + 1] += 4.0 / 3.0;
                w[k + 2] += 1.0 / 3.0;
            }
            if even < n {
                for (k, c) in [3.0, 9.0, 9.0, 3.0].into_iter().enumerate() {
                    w[even + k] += c / 8.0;
                }
            }
        }
    }
    w
}

/// `∫ f` from samples on a uniform grid of spacing `h`.
pub fn integrate_samples(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let w = simpson_weights(values.len() - 1);
    h * w.iter().zip(values).map(|(a, b)| a * b).sum::<f64>()
}

/// A quadrature value with an estimate of its absolute error.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Estimate {
    pub value: f64,
    pub error_estimate: f64,
}

impl Estimate {
    /// Richardson estimate for a fourth-order rule from results on step `h`
    /// (`fine`) and `2h` (`coarse`).
    pub fn richardson(fine: f64, coarse: f64) -> Self {
        Estimate {
            value: fine,
            error_estimate: (fine - coarse).abs() / 15.0,
        }
    }
}
