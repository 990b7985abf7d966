use std::collections::BTreeMap;

use super::{NumericsError, Tensor};

/// Central-difference step used in 64-bit checks.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Outcome of comparing analytic gradients against central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Worst relative error per named parameter.
    pub per_parameter: BTreeMap<String, f64>,
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Checks `analytic` against `(f(θ+h) − f(θ−h)) / 2h` for every coordinate
/// of every named parameter tensor.
///
/// `loss` receives the full parameter list, with exactly one coordinate
/// perturbed, and must be a deterministic function of it.
pub fn grad_check<L>(
    mut loss: L,
    params: &[(String, Tensor<f64>)],
    analytic: &[Tensor<f64>],
    step: f64,
) -> Result<GradCheckReport, NumericsError>
where
    L: FnMut(&[Tensor<f64>]) -> f64,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(NumericsError::InvalidStep(step));
    }
    if params.len() != analytic.len() {
        return Err(NumericsError::ShapeMismatch(format!(
            "{} parameters but {} analytic gradients",
            params.len(),
            analytic.len()
        )));
    }
    for ((name, p), g) in params.iter().zip(analytic) {
        if p.shape() != g.shape() {
            return Err(NumericsError::ShapeMismatch(format!(
                "gradient for {name} has shape {:?}, parameter has {:?}",
                g.shape(),
                p.shape()
            )));
        }
    }

    let mut values: Vec<Tensor<f64>> = params.iter().map(|(_, t)| t.clone()).collect();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        per_parameter: BTreeMap::new(),
    };
    for (pi, (name, _)) in params.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for idx in 0..values[pi].len() {
            let original = values[pi].data()[idx];

            values[pi].data_mut()[idx] = original + step;
            let plus = loss(&values);
            values[pi].data_mut()[idx] = original - step;
            let minus = loss(&values);
            values[pi].data_mut()[idx] = original;

            for value in [plus, minus] {
                if !value.is_finite() {
                    return Err(NumericsError::NonFiniteLoss {
                        param: name.clone(),
                        index: idx,
                        value,
                    });
                }
            }
            let numeric = (plus - minus) / (2.0 * step);
            worst = worst.max(relative_error(analytic[pi].data()[idx], numeric));
        }
        report.max_relative_error = report.max_relative_error.max(worst);
        report.per_parameter.insert(name.clone(), worst);
    }
    Ok(report)
}
