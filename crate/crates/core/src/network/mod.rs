//! Network construction, initialization and inference.
//!
//! Hidden layers compute `max(0, W ∗ x + B)`; the last layer is linear.

mod checkpoint;
mod spec;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use spec::{format_spec, parse_spec, LayerSpec, NetworkSpec, PATCH_SIZE, TARGET_SIZE};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::conv::conv2d_valid;
use crate::error::{Error, Result};
use crate::tensor::{relu_in_place, zero_pad, FilterBank, Tensor};

/// Standard deviation of the Gaussian used for the initial filter weights.
pub const DEFAULT_WEIGHT_STD: f64 = 0.001;

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    banks: Vec<FilterBank>,
}

/// Per-layer activations recorded by [`Network::forward_trace`].
///
/// `activations[0]` is the input; `activations[i]` is the output of layer
/// `i` (after ReLU for hidden layers, raw for the last).
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub activations: Vec<Tensor>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("trace holds at least the input")
    }
}

impl Network {
    /// Assembles a network from explicit filter banks, checking that shapes chain.
    pub fn from_banks(spec: NetworkSpec, banks: Vec<FilterBank>) -> Result<Self> {
        if banks.len() != spec.depth() {
            return Err(Error::shape(format!(
                "spec {spec} has {} layers but {} filter banks were given",
                spec.depth(),
                banks.len()
            )));
        }
        for (i, (bank, layer)) in banks.iter().zip(spec.layers()).enumerate() {
            let expected = (layer.num_filters, spec.in_channels_of(i), layer.filter_size);
            let got = (bank.num_filters(), bank.in_channels(), bank.filter_size());
            if expected != got {
                return Err(Error::shape(format!(
                    "layer {}: bank is {got:?}, spec {spec} needs {expected:?}",
                    i + 1
                )));
            }
        }
        Ok(Network { spec, banks })
    }

    /// All-zero weights and biases.
    pub fn zeros(spec: NetworkSpec) -> Self {
        let banks = spec
            .layers()
            .iter()
            .enumerate()
            .map(|(i, l)| FilterBank::zeros(l.num_filters, spec.in_channels_of(i), l.filter_size))
            .collect();
        Network { spec, banks }
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn banks(&self) -> &[FilterBank] {
        &self.banks
    }

    pub fn banks_mut(&mut self) -> &mut [FilterBank] {
        &mut self.banks
    }

    pub fn param_count(&self) -> usize {
        self.banks.iter().map(FilterBank::param_count).sum()
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.channels() != NetworkSpec::IN_CHANNELS {
            return Err(Error::shape(format!(
                "network expects {} input channel(s), got {}",
                NetworkSpec::IN_CHANNELS,
                input.channels()
            )));
        }
        let shrink = self.spec.shrink();
        if input.height() <= shrink || input.width() <= shrink {
            return Err(Error::shape(format!(
                "input {}x{} too small for spec {} (total shrink {shrink})",
                input.height(),
                input.width(),
                self.spec
            )));
        }
        Ok(())
    }

    /// Runs the layer stack; output is `(H − shrink) × (W − shrink)`.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let mut x = conv2d_valid(input, &self.banks[0])?;
        for bank in &self.banks[1..] {
            relu_in_place(&mut x);
            x = conv2d_valid(&x, bank)?;
        }
        Ok(x)
    }

    /// Like [`forward`](Self::forward) but keeps every layer's activation for backprop.
    pub fn forward_trace(&self, input: &Tensor) -> Result<ForwardTrace> {
        self.check_input(input)?;
        let last = self.banks.len() - 1;
        let mut activations = Vec::with_capacity(self.banks.len() + 1);
        activations.push(input.clone());
        for (i, bank) in self.banks.iter().enumerate() {
            let mut y = conv2d_valid(activations.last().unwrap(), bank)?;
            if i < last {
                relu_in_place(&mut y);
            }
            activations.push(y);
        }
        Ok(ForwardTrace { activations })
    }

    /// Super-resolves an already-interpolated image, returning an image of the same size.
    ///
    /// The input is zero-padded by `shrink / 2` on every side and the result
    /// is clamped to `[0, 1]`.
    pub fn predict_image(&self, lr_upscaled: &Tensor) -> Result<Tensor> {
        if lr_upscaled.channels() != 1 {
            return Err(Error::shape("predict_image expects a single-channel image"));
        }
        let half = self.spec.shrink() / 2;
        let padded = zero_pad(lr_upscaled, half, half, half, half);
        let out = self.forward(&padded)?;
        Ok(out.map(|v| v.clamp(0.0, 1.0)))
    }
}

/// Gaussian weights `N(0, weight_std²)`, zero biases, from a seeded generator.
pub fn init_network(spec: &NetworkSpec, weight_std: f64, seed: u64) -> Result<Network> {
    if !(weight_std > 0.0 && weight_std.is_finite()) {
        return Err(Error::invalid(format!(
            "weight_std must be positive, got {weight_std}"
        )));
    }
    let normal = Normal::new(0.0, weight_std).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::zeros(spec.clone());
    for bank in net.banks_mut() {
        for w in bank.weights_mut() {
            *w = normal.sample(&mut rng);
        }
    }
    Ok(net)
}
