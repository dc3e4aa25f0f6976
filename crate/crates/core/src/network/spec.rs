//! The `n1(f1)-n2(f2)-...-nL(fL)` architecture notation.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Side length of the training sub-images.
pub const PATCH_SIZE: usize = 18;
/// Side length of the network output / loss window during training.
pub const TARGET_SIZE: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LayerSpec {
    pub num_filters: usize,
    pub filter_size: usize,
}

/// A single-channel-in, single-channel-out stack of convolutional layers.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NetworkSpec {
    layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// Grayscale input.
    pub const IN_CHANNELS: usize = 1;

    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::Spec {
                token: format_layers(&layers),
                reason: "a network needs at least two layers".into(),
            });
        }
        for l in &layers {
            validate_layer(l, &format!("{}({})", l.num_filters, l.filter_size))?;
        }
        let last = layers.last().unwrap();
        if last.num_filters != 1 {
            return Err(Error::Spec {
                token: format!("{}({})", last.num_filters, last.filter_size),
                reason: "the last layer must have exactly one filter".into(),
            });
        }
        Ok(NetworkSpec { layers })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Input channel count of layer `i`.
    pub fn in_channels_of(&self, i: usize) -> usize {
        if i == 0 {
            Self::IN_CHANNELS
        } else {
            self.layers[i - 1].num_filters
        }
    }

    /// Number of weights, optionally counting biases too.
    pub fn param_count(&self, include_biases: bool) -> usize {
        self.layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let w = l.num_filters * self.in_channels_of(i) * l.filter_size * l.filter_size;
                if include_biases {
                    w + l.num_filters
                } else {
                    w
                }
            })
            .sum()
    }

    /// Total spatial reduction of a valid forward pass: Σ (fᵢ − 1).
    pub fn shrink(&self) -> usize {
        self.layers.iter().map(|l| l.filter_size - 1).sum()
    }

    /// Zero padding (both sides combined) that turns an 18×18 patch into a 14×14 output.
    pub fn training_pad(&self) -> Result<usize> {
        let shrink = self.shrink();
        let margin = PATCH_SIZE - TARGET_SIZE;
        if shrink < margin {
            return Err(Error::Spec {
                token: self.to_string(),
                reason: format!(
                    "total shrink {shrink} is below {margin}; cannot map {PATCH_SIZE}x{PATCH_SIZE} patches to {TARGET_SIZE}x{TARGET_SIZE}"
                ),
            });
        }
        Ok(shrink - margin)
    }
}

fn validate_layer(l: &LayerSpec, token: &str) -> Result<()> {
    if l.num_filters == 0 {
        return Err(Error::Spec {
            token: token.into(),
            reason: "filter count must be positive".into(),
        });
    }
    if l.filter_size == 0 || l.filter_size.is_multiple_of(2) {
        return Err(Error::Spec {
            token: token.into(),
            reason: "filter size must be odd".into(),
        });
    }
    Ok(())
}

fn format_layers(layers: &[LayerSpec]) -> String {
    layers
        .iter()
        .map(|l| format!("{}({})", l.num_filters, l.filter_size))
        .collect::<Vec<_>>()
        .join("-")
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_layers(&self.layers))
    }
}

fn parse_count(s: &str, token: &str) -> Result<usize> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::Spec {
            token: token.into(),
            reason: format!("`{s}` is not a positive integer"),
        });
    }
    s.parse::<usize>().map_err(|_| Error::Spec {
        token: token.into(),
        reason: format!("`{s}` is out of range"),
    })
}

/// Parses `n1(f1)-n2(f2)-...`; whitespace anywhere is ignored.
pub fn parse_spec(text: &str) -> Result<NetworkSpec> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(Error::Spec {
            token: String::new(),
            reason: "empty spec".into(),
        });
    }
    let mut layers = Vec::new();
    for token in compact.split('-') {
        let malformed = || Error::Spec {
            token: token.into(),
            reason: "expected `count(size)`".into(),
        };
        let open = token.find('(').ok_or_else(malformed)?;
        let inner = token[open + 1..].strip_suffix(')').ok_or_else(malformed)?;
        let layer = LayerSpec {
            num_filters: parse_count(&token[..open], token)?,
            filter_size: parse_count(inner, token)?,
        };
        validate_layer(&layer, token)?;
        layers.push(layer);
    }
    NetworkSpec::new(layers)
}

pub fn format_spec(spec: &NetworkSpec) -> String {
    spec.to_string()
}

impl FromStr for NetworkSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_spec(s)
    }
}
