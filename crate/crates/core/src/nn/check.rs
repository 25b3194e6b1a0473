use serde::{Deserialize, Serialize};

use super::model::Network;
use super::NnError;

/// Finite-difference step.
const STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
const FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    pub name: String,
    pub max_rel_error: f64,
    /// Flat index (within the tensor) of the worst entry.
    pub worst_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    /// First tensor whose error exceeds the tolerance.
    pub failing: Option<String>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failing.is_none()
    }
}

fn surrogate(net: &Network, inputs: &[f64], target: &[f64], noise: &[f64]) -> f64 {
    let out = net.forward_cached(inputs, noise, None).out;
    0.5 * out.iter().zip(target).map(|(o, t)| (o - t).powi(2)).sum::<f64>()
}

fn check_shapes(net: &Network, inputs: &[f64], target: &[f64], noise: &[f64]) -> Result<(), NnError> {
    net.check_input(inputs)?;
    let c = &net.config;
    if target.len() != c.output_len {
        return Err(NnError::Shape {
            expected: c.output_len,
            actual: target.len(),
        });
    }
    if noise.len() != c.seq_len * c.noise_width {
        return Err(NnError::Shape {
            expected: c.seq_len * c.noise_width,
            actual: noise.len(),
        });
    }
    Ok(())
}

/// Backprop gradient of `0.5 * |out - target|^2` with a fixed noise draw and
/// no dropout.
pub fn squared_error_gradient(net: &Network, inputs: &[f64], target: &[f64], noise: &[f64]) -> Vec<f64> {
    let cache = net.forward_cached(inputs, noise, None);
    let dout: Vec<f64> = cache.out.iter().zip(target).map(|(o, t)| o - t).collect();
    let mut grad = vec![0.0; net.num_params()];
    net.backward(&cache, &dout, &mut grad);
    grad
}

/// Compares the backprop gradient of a squared-error surrogate against
/// central differences, tensor by tensor.
pub fn grad_check(
    net: &Network,
    inputs: &[f64],
    target: &[f64],
    noise: &[f64],
    tolerance: f64,
) -> Result<GradCheckReport, NnError> {
    check_shapes(net, inputs, target, noise)?;
    let analytic = squared_error_gradient(net, inputs, target, noise);
    compare_gradients(net, inputs, target, noise, &analytic, tolerance)
}

/// Checks a supplied gradient vector against central differences.
pub fn compare_gradients(
    net: &Network,
    inputs: &[f64],
    target: &[f64],
    noise: &[f64],
    analytic: &[f64],
    tolerance: f64,
) -> Result<GradCheckReport, NnError> {
    check_shapes(net, inputs, target, noise)?;
    if analytic.len() != net.num_params() {
        return Err(NnError::Shape {
            expected: net.num_params(),
            actual: analytic.len(),
        });
    }
    let mut probe = net.clone();
    let mut tensors = Vec::new();
    for t in &net.layout.tensors {
        let mut worst = (0.0f64, 0usize);
        for (j, i) in t.range().enumerate() {
            let orig = probe.params[i];
            probe.params[i] = orig + STEP;
            let up = surrogate(&probe, inputs, target, noise);
            probe.params[i] = orig - STEP;
            let down = surrogate(&probe, inputs, target, noise);
            probe.params[i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
            if rel > worst.0 || rel.is_nan() {
                worst = (rel, j);
            }
        }
        tensors.push(TensorCheck {
            name: t.name.clone(),
            max_rel_error: worst.0,
            worst_index: worst.1,
        });
    }
    let max_rel_error = tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max);
    let failing = tensors
        .iter()
        .find(|t| !(t.max_rel_error < tolerance))
        .map(|t| t.name.clone());
    Ok(GradCheckReport {
        tensors,
        max_rel_error,
        tolerance,
        failing,
    })
}
