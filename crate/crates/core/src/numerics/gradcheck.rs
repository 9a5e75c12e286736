use super::params::{GradientRecord, Parameters};
use crate::error::{Error, Result};

/// Worst disagreement found by [`finite_diff_report`].
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_parameter: String,
    pub analytic: f64,
    pub numeric: f64,
}

fn perturb<N: Parameters>(net: &mut N, index: usize, delta: f64) {
    let mut offset = 0;
    net.visit_mut(&mut |_, p| {
        if index >= offset && index < offset + p.len() {
            p[index - offset] += delta;
        }
        offset += p.len();
    });
}

/// Central-difference check of every parameter. Returns
/// `max |analytic − numeric| / max(1, |numeric|)`.
pub fn finite_diff_check<N, F>(network: &N, loss_fn: F, epsilon: f64) -> Result<f64>
where
    N: Parameters + Clone,
    F: Fn(&N) -> Result<(f64, GradientRecord)>,
{
    finite_diff_report(network, loss_fn, epsilon).map(|r| r.max_relative_error)
}

pub fn finite_diff_report<N, F>(network: &N, loss_fn: F, epsilon: f64) -> Result<GradCheckReport>
where
    N: Parameters + Clone,
    F: Fn(&N) -> Result<(f64, GradientRecord)>,
{
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(Error::Contract(format!("epsilon {epsilon} outside (0, 1e-2]")));
    }
    let (_, analytic) = loss_fn(network)?;
    if !analytic.is_congruent(network) {
        return Err(Error::Shape("analytic gradient is not congruent with the network".into()));
    }
    let mut names = Vec::new();
    network.visit(&mut |name, p| names.extend((0..p.len()).map(|i| format!("{name}[{i}]"))));

    let flat_grad = analytic.flat();
    let mut probe = network.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_parameter: String::new(),
        analytic: 0.0,
        numeric: 0.0,
    };
    for (k, &a) in flat_grad.iter().enumerate() {
        perturb(&mut probe, k, epsilon);
        let (plus, _) = loss_fn(&probe)?;
        perturb(&mut probe, k, -2.0 * epsilon);
        let (minus, _) = loss_fn(&probe)?;
        perturb(&mut probe, k, epsilon);
        let numeric = (plus - minus) / (2.0 * epsilon);
        let err = (a - numeric).abs() / numeric.abs().max(1.0);
        if err > report.max_relative_error || !err.is_finite() {
            report = GradCheckReport {
                max_relative_error: err,
                worst_parameter: names[k].clone(),
                analytic: a,
                numeric,
            };
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(w: &Vec<f64>) -> Result<(f64, GradientRecord)> {
        let mut g = GradientRecord::zeros_like(w);
        g.entries[0].values[0] = 2.0 * w[0];
        Ok((w[0] * w[0], g))
    }

    #[test]
    fn constant_loss_has_zero_error() {
        let w = vec![1.0, -3.0];
        let err = finite_diff_check(&w, |w| Ok((4.2, GradientRecord::zeros_like(w))), 1e-5).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn square_numeric_derivative_is_tight() {
        // central difference of w² is exact up to rounding: ((1+ε)² − (1−ε)²)/2ε = 2
        let w = vec![1.0];
        let eps = 1e-5;
        let numeric = ((1.0_f64 + eps).powi(2) - (1.0_f64 - eps).powi(2)) / (2.0 * eps);
        assert!((numeric - 2.0).abs() < 1e-8);
        assert!(finite_diff_check(&w, square, eps).unwrap() < 1e-8);
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let w = vec![1.0];
        let bad = |w: &Vec<f64>| {
            let mut g = GradientRecord::zeros_like(w);
            g.entries[0].values[0] = 3.0 * w[0];
            Ok((w[0] * w[0], g))
        };
        let report = finite_diff_report(&w, bad, 1e-5).unwrap();
        assert!(report.max_relative_error > 0.4);
        assert_eq!(report.worst_parameter, "w[0]");
    }

    #[test]
    fn epsilon_out_of_range_is_rejected() {
        assert!(finite_diff_check(&vec![1.0], square, 0.5).is_err());
        assert!(finite_diff_check(&vec![1.0], square, 0.0).is_err());
    }
}
