//! The three plain convolutional stacks in both resolution regimes.
//!
//! Every builder takes an explicit feature width; [`DEFAULT_WIDTH`] is the
//! full-size configuration. Narrow widths exist for fast experiments and
//! gradient checks and change nothing but channel counts.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::nn::{Activation, LayerKind, LayerSpec, NetworkSpec};
use crate::{Error, Result};

/// Feature maps per hidden layer in the full-size networks.
pub const DEFAULT_WIDTH: usize = 128;

/// Whether the representation `Y` is coded at half or full resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ResolutionMode {
    Low,
    High,
}

impl ResolutionMode {
    pub fn as_byte(self) -> u8 {
        match self {
            ResolutionMode::Low => 0,
            ResolutionMode::High => 1,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(ResolutionMode::Low),
            1 => Ok(ResolutionMode::High),
            other => Err(Error::format(alloc::format!("unknown resolution mode byte {other}"))),
        }
    }

    /// Spatial scale between `X` and `Y` (2 in LOW, 1 in HIGH).
    pub fn factor(self) -> usize {
        match self {
            ResolutionMode::Low => 2,
            ResolutionMode::High => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ResolutionMode::Low => "low",
            ResolutionMode::High => "high",
        }
    }
}

impl fmt::Display for ResolutionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ResolutionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(ResolutionMode::Low),
            "high" => Ok(ResolutionMode::High),
            _ => Err(Error::validation(alloc::format!(
                "resolution mode must be `low` or `high`, got `{s}`"
            ))),
        }
    }
}

fn layer(kind: LayerKind, kernel: usize, stride: usize, cin: usize, cout: usize, act: Activation) -> LayerSpec {
    LayerSpec {
        kind,
        kernel,
        stride,
        in_channels: cin,
        out_channels: cout,
        activation: act,
    }
}

/// FDNN `f(X, α)`: 9×9 conv, six 3×3 convs, 9×9 linear conv to one channel.
/// The second layer has stride 2 in LOW mode.
pub fn build_fdnn_width(mode: ResolutionMode, width: usize) -> NetworkSpec {
    use Activation::*;
    use LayerKind::Conv;
    let mut layers = Vec::with_capacity(8);
    layers.push(layer(Conv, 9, 1, 1, width, Relu));
    layers.push(layer(Conv, 3, mode.factor(), width, width, Relu));
    for _ in 0..5 {
        layers.push(layer(Conv, 3, 1, width, width, Relu));
    }
    layers.push(layer(Conv, 9, 1, width, 1, Identity));
    NetworkSpec::new(layers).expect("static architecture is consistent")
}

/// PPNN `h(Z, γ)`: 9×9 conv, six 3×3 convs, then a 9×9 head that is a
/// stride-2 transposed conv in LOW mode and a stride-1 conv in HIGH mode.
pub fn build_ppnn_width(mode: ResolutionMode, width: usize) -> NetworkSpec {
    use Activation::*;
    use LayerKind::*;
    let mut layers = Vec::with_capacity(8);
    layers.push(layer(Conv, 9, 1, 1, width, Relu));
    for _ in 0..6 {
        layers.push(layer(Conv, 3, 1, width, width, Relu));
    }
    layers.push(match mode {
        ResolutionMode::Low => layer(TransposedConv, 9, 2, width, 1, Identity),
        ResolutionMode::High => layer(Conv, 9, 1, width, 1, Identity),
    });
    NetworkSpec::new(layers).expect("static architecture is consistent")
}

/// VCNN `v(Y, θ)` shares the PPNN architecture.
pub fn build_vcnn_width(mode: ResolutionMode, width: usize) -> NetworkSpec {
    build_ppnn_width(mode, width)
}

pub fn build_fdnn(mode: ResolutionMode) -> NetworkSpec {
    build_fdnn_width(mode, DEFAULT_WIDTH)
}

pub fn build_ppnn(mode: ResolutionMode) -> NetworkSpec {
    build_ppnn_width(mode, DEFAULT_WIDTH)
}

pub fn build_vcnn(mode: ResolutionMode) -> NetworkSpec {
    build_vcnn_width(mode, DEFAULT_WIDTH)
}
