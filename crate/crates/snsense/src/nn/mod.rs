//! From-scratch 1-D CNN occupancy classifier.
//!
//! Three valid (no padding) convolution layers slide along the time axis of
//! each band row independently, followed by ReLU; the final feature map is
//! flattened band-major into a single fully connected layer with sigmoid
//! outputs, one occupancy probability per band. Training minimizes mean
//! binary cross-entropy with exact analytic gradients.

mod io;
mod ops;
mod train;

pub use io::{load_weights, load_weights_expecting, save_weights};
pub use ops::{
    bce_loss, conv1d_forward, forward, forward_trace, predict_occupancy, relu, sigmoid,
    ForwardTrace,
};
pub use train::{backward, batch_gradients, train, Optimizer, TrainConfig, TrainSample};

use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::signal::stream_rng;

/// One convolution layer: `filters` kernels of length `kernel_len` applied
/// per band row over `in_channels` input channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    pub filters: usize,
    pub kernel_len: usize,
    pub in_channels: usize,
}

/// Network topology. Constructed through [`NetworkSpec::new`], which checks
/// the whole shape chain once so later code can rely on it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Band rows `N` (also the output width).
    pub bands: usize,
    /// Time length `Q` of the input tensor.
    pub input_len: usize,
    /// Channels of the input tensor (2: real and imaginary parts).
    pub input_channels: usize,
    pub conv: Vec<ConvLayerSpec>,
    /// Flattened feature count feeding the fully connected layer.
    pub fc_in: usize,
    /// Fully connected outputs (= `bands`).
    pub fc_out: usize,
}

impl NetworkSpec {
    /// Build and validate a spec from `(filters, kernel_len)` pairs.
    pub fn new(
        bands: usize,
        input_len: usize,
        input_channels: usize,
        conv: &[(usize, usize)],
    ) -> Result<Self> {
        if bands == 0 || input_len == 0 || input_channels == 0 {
            return Err(validation("network dimensions must be nonzero"));
        }
        if conv.is_empty() {
            return Err(validation("at least one convolution layer required"));
        }
        let mut layers = Vec::with_capacity(conv.len());
        let mut length = input_len;
        let mut channels = input_channels;
        for (i, &(filters, kernel_len)) in conv.iter().enumerate() {
            if filters == 0 || kernel_len == 0 {
                return Err(validation(format!("conv layer {} has zero size", i)));
            }
            if kernel_len > length {
                return Err(validation(format!(
                    "conv layer {} kernel {} exceeds incoming length {}",
                    i, kernel_len, length
                )));
            }
            layers.push(ConvLayerSpec { filters, kernel_len, in_channels: channels });
            length = length - kernel_len + 1;
            channels = filters;
        }
        let fc_in = bands * length * channels;
        Ok(Self {
            bands,
            input_len,
            input_channels,
            conv: layers,
            fc_in,
            fc_out: bands,
        })
    }

    /// The full-size topology: 256/128/64 filters with kernels 150/100/51
    /// over a 14 x 299 x 2 input, flattening to 896 features.
    pub fn table2() -> Self {
        let spec = Self::new(14, 299, 2, &[(256, 150), (128, 100), (64, 51)])
            .expect("reference topology is valid");
        debug_assert_eq!(spec.fc_in, 896);
        spec
    }

    /// Reduced desk-scale topology (32/16/8 filters, same kernels) used for
    /// training-based tests and CPU benchmarks.
    pub fn desk() -> Self {
        Self::new(14, 299, 2, &[(32, 150), (16, 100), (8, 51)])
            .expect("desk topology is valid")
    }

    /// `(length, channels)` after each convolution layer.
    pub fn conv_output_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.conv.len());
        let mut length = self.input_len;
        for layer in &self.conv {
            length = length - layer.kernel_len + 1;
            dims.push((length, layer.filters));
        }
        dims
    }

    /// Input shape `(bands, length, channels)` of conv layer `index`.
    pub fn conv_input_shape(&self, index: usize) -> (usize, usize, usize) {
        let mut length = self.input_len;
        for layer in &self.conv[..index] {
            length = length - layer.kernel_len + 1;
        }
        (self.bands, length, self.conv[index].in_channels)
    }

    /// Total learnable parameters (kernels, conv biases, fc weights, fc bias).
    pub fn parameter_count(&self) -> usize {
        let conv: usize = self
            .conv
            .iter()
            .map(|l| l.filters * l.in_channels * l.kernel_len + l.filters)
            .sum();
        conv + self.fc_in * self.fc_out + self.fc_out
    }
}

/// Kernels and bias of one convolution layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    /// `(filters, in_channels, kernel_len)`.
    pub kernels: Array3<f64>,
    pub bias: Array1<f64>,
}

/// All learnable parameters of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub conv: Vec<ConvWeights>,
    /// `(fc_out, fc_in)`.
    pub fc_weight: Array2<f64>,
    pub fc_bias: Array1<f64>,
}

impl WeightSet {
    /// Zero-valued parameters with the spec's shapes (also the gradient
    /// container).
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let conv = spec
            .conv
            .iter()
            .map(|l| ConvWeights {
                kernels: Array3::zeros((l.filters, l.in_channels, l.kernel_len)),
                bias: Array1::zeros(l.filters),
            })
            .collect();
        Self {
            conv,
            fc_weight: Array2::zeros((spec.fc_out, spec.fc_in)),
            fc_bias: Array1::zeros(spec.fc_out),
        }
    }

    /// Uniform Glorot initialization, biases zero, deterministic per seed.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Self {
        let mut rng = stream_rng(seed, INIT_STREAM);
        let mut w = Self::zeros(spec);
        for (layer, spec_layer) in w.conv.iter_mut().zip(spec.conv.iter()) {
            let fan_in = spec_layer.in_channels * spec_layer.kernel_len;
            let fan_out = spec_layer.filters * spec_layer.kernel_len;
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in layer.kernels.iter_mut() {
                *v = rng.gen_range(-bound..bound);
            }
        }
        let bound = (6.0 / (spec.fc_in + spec.fc_out) as f64).sqrt();
        for v in w.fc_weight.iter_mut() {
            *v = rng.gen_range(-bound..bound);
        }
        w
    }

    /// Check every tensor against the spec's shapes.
    pub fn matches(&self, spec: &NetworkSpec) -> bool {
        self.conv.len() == spec.conv.len()
            && self
                .conv
                .iter()
                .zip(spec.conv.iter())
                .all(|(w, l)| {
                    w.kernels.dim() == (l.filters, l.in_channels, l.kernel_len)
                        && w.bias.len() == l.filters
                })
            && self.fc_weight.dim() == (spec.fc_out, spec.fc_in)
            && self.fc_bias.len() == spec.fc_out
    }

    /// In-place `self += other * scale` over every parameter tensor.
    pub fn axpy(&mut self, other: &WeightSet, scale: f64) {
        for (a, b) in self.conv.iter_mut().zip(other.conv.iter()) {
            a.kernels.zip_mut_with(&b.kernels, |x, y| *x += scale * y);
            a.bias.zip_mut_with(&b.bias, |x, y| *x += scale * y);
        }
        self.fc_weight.zip_mut_with(&other.fc_weight, |x, y| *x += scale * y);
        self.fc_bias.zip_mut_with(&other.fc_bias, |x, y| *x += scale * y);
    }

    /// Visit every parameter tensor as a flat mutable slice, in file order.
    pub(crate) fn for_each_tensor_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        for layer in &mut self.conv {
            f(layer.kernels.as_slice_mut().expect("standard layout"));
            f(layer.bias.as_slice_mut().expect("standard layout"));
        }
        f(self.fc_weight.as_slice_mut().expect("standard layout"));
        f(self.fc_bias.as_slice_mut().expect("standard layout"));
    }

    /// Visit every parameter tensor as a flat slice, in file order.
    pub(crate) fn for_each_tensor(&self, mut f: impl FnMut(&[f64])) {
        for layer in &self.conv {
            f(layer.kernels.as_slice().expect("standard layout"));
            f(layer.bias.as_slice().expect("standard layout"));
        }
        f(self.fc_weight.as_slice().expect("standard layout"));
        f(self.fc_bias.as_slice().expect("standard layout"));
    }
}

const INIT_STREAM: u64 = 0xC0FFEE;
