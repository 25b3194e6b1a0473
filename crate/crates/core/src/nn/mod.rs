//! Dropout, 1-D convolution, LSTM and two dense layers, with an optional
//! Gaussian noise input mixed in alongside the features.
//!
//! Parameters live in one flat vector; [`Layout`] names the tensors inside
//! it. Gradients use the same layout.

mod check;
mod checkpoint;
mod model;
mod train;

pub use check::{compare_gradients, grad_check, squared_error_gradient, GradCheckReport, TensorCheck};
pub use checkpoint::{load, save, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub(crate) use checkpoint::{from_json as checkpoint_from_json, to_json as checkpoint_json};
pub use model::{dropout_mask, Network, NoiseChannel};
pub use train::{fit, mae_loss, train_step, Adam, EpochLog, FitReport, Sample, TrainConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("input has {actual} values, expected {expected}")]
    Shape { expected: usize, actual: usize },
    #[error("input contains a non-finite value at position {0}")]
    NonFiniteInput(usize),
    #[error("non-finite gradient in {tensor} at step {step}; update skipped")]
    NonFiniteGradient { tensor: String, step: u64 },
    #[error("parameters became non-finite in {tensor} at step {step}")]
    Diverged { tensor: String, step: u64 },
    #[error("empty batch")]
    EmptyBatch,
    #[error("checkpoint version {found} is not supported (this build reads {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint was written for a different configuration: {0}")]
    ConfigMismatch(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// What the noise input carries outside training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    #[default]
    Zeroed,
    Sampled,
}

/// Whether each time step gets its own noise vector or one vector is shared
/// by the whole window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSampling {
    #[default]
    PerStep,
    PerWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub input_features: usize,
    pub seq_len: usize,
    pub noise_width: usize,
    pub dropout: f64,
    pub conv_filters: usize,
    pub conv_kernel: usize,
    pub lstm_hidden: usize,
    pub dense_hidden: usize,
    pub output_len: usize,
    pub seed: u64,
    pub inference_noise: NoiseMode,
    pub noise_sampling: NoiseSampling,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            input_features: 0,
            seq_len: 1,
            noise_width: 16,
            dropout: 0.2,
            conv_filters: 64,
            conv_kernel: 3,
            lstm_hidden: 64,
            dense_hidden: 128,
            output_len: 12,
            seed: 0,
            inference_noise: NoiseMode::Zeroed,
            noise_sampling: NoiseSampling::PerStep,
        }
    }
}

impl NetworkConfig {
    /// Kernel width actually used: the configured width capped at `T`.
    pub fn effective_kernel(&self) -> usize {
        self.conv_kernel.min(self.seq_len)
    }

    /// Length of the convolution output, which is the LSTM sequence length.
    pub fn conv_len(&self) -> usize {
        self.seq_len - self.effective_kernel() + 1
    }

    pub fn input_len(&self) -> usize {
        self.seq_len * self.input_features
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: &str| Err(NnError::Config(m.to_string()));
        if self.input_features == 0 {
            return bad("input_features must be at least 1");
        }
        if self.seq_len == 0 {
            return bad("seq_len must be at least 1");
        }
        if self.conv_kernel == 0 || self.conv_kernel % 2 == 0 {
            return bad("conv_kernel must be a positive odd integer");
        }
        if self.conv_filters == 0 || self.lstm_hidden == 0 || self.dense_hidden == 0 || self.output_len == 0 {
            return bad("layer widths must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl Tensor {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

pub(crate) const CONV_W: usize = 0;
pub(crate) const NOISE_W: usize = 1;
pub(crate) const CONV_B: usize = 2;
pub(crate) const LSTM_IH: usize = 3;
pub(crate) const LSTM_HH: usize = 4;
pub(crate) const LSTM_B: usize = 5;
pub(crate) const D1_W: usize = 6;
pub(crate) const D1_B: usize = 7;
pub(crate) const D2_W: usize = 8;
pub(crate) const D2_B: usize = 9;

/// Named tensors inside the flat parameter vector. LSTM gate rows are
/// ordered input, forget, cell, output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub tensors: Vec<Tensor>,
    pub len: usize,
}

impl Layout {
    fn new(c: &NetworkConfig) -> Self {
        let k = c.effective_kernel();
        let (f, n, ch, h, d, o) = (
            c.input_features,
            c.noise_width,
            c.conv_filters,
            c.lstm_hidden,
            c.dense_hidden,
            c.output_len,
        );
        let shapes: [(&str, Vec<usize>); 10] = [
            ("conv.weight", vec![ch, k, f]),
            ("noise.weight", vec![ch, k, n]),
            ("conv.bias", vec![ch]),
            ("lstm.w_ih", vec![4 * h, ch]),
            ("lstm.w_hh", vec![4 * h, h]),
            ("lstm.bias", vec![4 * h]),
            ("dense1.weight", vec![d, h]),
            ("dense1.bias", vec![d]),
            ("dense2.weight", vec![o, d]),
            ("dense2.bias", vec![o]),
        ];
        let mut offset = 0;
        let tensors = shapes
            .into_iter()
            .map(|(name, shape)| {
                let t = Tensor {
                    name: name.to_string(),
                    shape,
                    offset,
                };
                offset += t.len();
                t
            })
            .collect();
        Layout { tensors, len: offset }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Name of the tensor containing flat index `i`.
    pub fn tensor_of(&self, i: usize) -> &str {
        &self.tensors.iter().find(|t| t.range().contains(&i)).expect("index in layout").name
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_matches_shape_arithmetic() {
        let c = NetworkConfig {
            input_features: 10,
            seq_len: 1,
            noise_width: 4,
            conv_filters: 8,
            conv_kernel: 1,
            lstm_hidden: 16,
            dense_hidden: 32,
            output_len: 12,
            ..Default::default()
        };
        // conv 8*1*10 + noise 8*1*4 + bias 8, lstm 64*8 + 64*16 + 64,
        // dense 32*16 + 32, output 12*32 + 12
        let expected = 80 + 32 + 8 + 512 + 1024 + 64 + 512 + 32 + 384 + 12;
        assert_eq!(expected, 2660);
        assert_eq!(c.layout().len, expected);
    }

    #[test]
    fn kernel_degenerates_at_short_sequences() {
        let c = NetworkConfig {
            input_features: 3,
            seq_len: 1,
            conv_kernel: 3,
            ..Default::default()
        };
        assert_eq!(c.effective_kernel(), 1);
        assert_eq!(c.conv_len(), 1);
        assert_eq!(c.layout().get("conv.weight").unwrap().shape, vec![64, 1, 3]);
    }

    #[test]
    fn invalid_configs_rejected() {
        let ok = NetworkConfig {
            input_features: 2,
            ..Default::default()
        };
        assert!(ok.validate().is_ok());
        assert!(NetworkConfig { conv_kernel: 2, ..ok.clone() }.validate().is_err());
        assert!(NetworkConfig { dropout: 1.0, ..ok.clone() }.validate().is_err());
        assert!(NetworkConfig { input_features: 0, ..ok }.validate().is_err());
    }
}
