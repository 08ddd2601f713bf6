//! Network topology: an ordered chain of square-feature-map layers.
//!
//! The on-disk format is TOML with a `name`, an `input` block and a `layers`
//! array. Fully connected layers are canonicalized to `k = n` convolutions at
//! parse time so every downstream formula works on one shape. Per-layer input
//! size and channel count are derived by chaining, never stated in the file.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Fc,
    MaxPool,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::Fc => "fc",
            LayerKind::MaxPool => "maxpool",
        }
    }

    /// True for layers that carry a weight matrix (conv and fc).
    pub fn is_weighted(self) -> bool {
        !matches!(self, LayerKind::MaxPool)
    }
}

impl std::fmt::Display for LayerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One layer with its input geometry resolved.
///
/// `n` is the input feature map edge (maps are square), `c` the input channel
/// count, `a_bits` the precision of the codes streaming in. For `MaxPool`
/// layers `c_out == c` and `w_bits` is unused.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub n: u32,
    pub c: u32,
    pub k: u32,
    pub s: u32,
    pub pad: u32,
    pub c_out: u32,
    pub a_bits: u8,
    pub w_bits: u8,
}

impl LayerSpec {
    /// Input edge including padding on both sides.
    pub fn n_padded(&self) -> u32 {
        self.n + 2 * self.pad
    }

    /// Output feature map edge: (n + 2*pad - k) / s + 1.
    /// Fails unless the stride tiles the padded input exactly.
    pub fn output_dim(&self) -> Result<u32> {
        let span = self
            .n_padded()
            .checked_sub(self.k)
            .ok_or_else(|| self.invalid("kernel larger than padded input"))?;
        if span % self.s != 0 {
            return Err(self.invalid(format!(
                "non-integral output size: ({} + 2*{} - {}) is not divisible by stride {}",
                self.n, self.pad, self.k, self.s
            )));
        }
        Ok(span / self.s + 1)
    }

    /// Output shape as (edge, channels).
    pub fn output_shape(&self) -> Result<(u32, u32)> {
        Ok((self.output_dim()?, self.c_out))
    }

    /// Total multiply-accumulates for one image: n_out^2 * k^2 * c * c_out.
    pub fn mac_count(&self) -> Result<u64> {
        if !self.kind.is_weighted() {
            return Err(Error::NoMacs {
                layer: 0,
                kind: self.kind.to_string(),
            });
        }
        let n_out = self.output_dim()? as u64;
        Ok(n_out * n_out * (self.k as u64).pow(2) * self.c as u64 * self.c_out as u64)
    }

    /// Number of weights: k^2 * c * c_out.
    pub fn weight_count(&self) -> u64 {
        (self.k as u64).pow(2) * self.c as u64 * self.c_out as u64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.c == 0 || self.k == 0 || self.s == 0 || self.c_out == 0 {
            return Err(self.invalid("n, c, k, s and c_out must all be at least 1"));
        }
        if self.a_bits < 1 || self.a_bits > 8 {
            return Err(self.invalid(format!("a_bits {} outside 1..=8", self.a_bits)));
        }
        if self.kind.is_weighted() && (self.w_bits < 1 || self.w_bits > 8) {
            return Err(self.invalid(format!("w_bits {} outside 1..=8", self.w_bits)));
        }
        if self.k > self.n_padded() {
            return Err(self.invalid(format!(
                "kernel {} exceeds padded input {}",
                self.k,
                self.n_padded()
            )));
        }
        if self.pad >= self.k {
            return Err(self.invalid(format!(
                "pad {} must be smaller than kernel {}",
                self.pad, self.k
            )));
        }
        if self.kind == LayerKind::Fc && (self.k != self.n || self.s != 1 || self.pad != 0) {
            return Err(self.invalid("fc layers must have k = n, s = 1, pad = 0"));
        }
        if self.kind == LayerKind::MaxPool && self.c_out != self.c {
            return Err(self.invalid("maxpool layers keep their channel count"));
        }
        self.output_dim()?;
        Ok(())
    }

    fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidLayer {
            layer: 0,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub height: u32,
    pub width: u32,
    pub channels: u32,
    pub bits: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkTopology {
    pub name: String,
    pub input: InputSpec,
    pub layers: Vec<LayerSpec>,
}

impl NetworkTopology {
    /// Checks every per-layer rule plus shape chaining across the network.
    pub fn validate(&self) -> Result<()> {
        if self.input.height != self.input.width {
            return Err(Error::InvalidArgument(format!(
                "input must be square, got {}x{}",
                self.input.height, self.input.width
            )));
        }
        if self.input.channels == 0 || self.input.height == 0 {
            return Err(Error::InvalidArgument("input dimensions must be positive".into()));
        }
        if self.input.bits < 1 || self.input.bits > 8 {
            return Err(Error::InvalidArgument(format!(
                "input bits {} outside 1..=8",
                self.input.bits
            )));
        }
        if self.layers.is_empty() {
            return Err(Error::InvalidArgument("topology has no layers".into()));
        }
        let mut n = self.input.height;
        let mut c = self.input.channels;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.validate().map_err(|e| at_layer(e, i))?;
            if layer.n != n || layer.c != c {
                return Err(Error::ShapeMismatch {
                    layer: i,
                    expected_n: n,
                    expected_c: c,
                    got_n: layer.n,
                    got_c: layer.c,
                });
            }
            let (n_out, c_out) = layer.output_shape().map_err(|e| at_layer(e, i))?;
            n = n_out;
            c = c_out;
        }
        Ok(())
    }

    /// Output shape (edge, channels) of the final layer.
    pub fn output_shape(&self) -> Result<(u32, u32)> {
        let mut shape = (self.input.height, self.input.channels);
        for layer in &self.layers {
            shape = layer.output_shape()?;
        }
        Ok(shape)
    }

    /// Weighted (conv/fc) layers with their topology indices, in order.
    pub fn weighted_layers(&self) -> impl Iterator<Item = (usize, &LayerSpec)> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.kind.is_weighted())
    }

    pub fn num_weighted(&self) -> usize {
        self.weighted_layers().count()
    }

    /// Total MACs per image across all weighted layers.
    pub fn total_macs(&self) -> Result<u64> {
        let mut total = 0u64;
        for (i, layer) in self.weighted_layers() {
            total += layer.mac_count().map_err(|e| at_layer(e, i))?;
        }
        Ok(total)
    }

    /// Parses the TOML topology format, resolving each layer's input shape by
    /// chaining and canonicalizing fc layers to k = n convolutions.
    pub fn parse(text: &str) -> Result<Self> {
        let file: TopoFile =
            toml::from_str(text).map_err(|e| Error::parse("topology", e))?;
        let mut layers = Vec::with_capacity(file.layers.len());
        let mut n = file.input.height;
        let mut c = file.input.channels;
        for (i, raw) in file.layers.iter().enumerate() {
            let layer = raw.resolve(i, n, c)?;
            layers.push(layer);
            let (n_out, c_out) = layer.output_shape().map_err(|e| at_layer(e, i))?;
            n = n_out;
            c = c_out;
        }
        // Pool precision defaults to the next weighted layer's input precision
        // (the codes flowing through are exactly that layer's input), falling
        // back to the nearest earlier declaration for a trailing pool.
        let mut next_a = None;
        for (raw, layer) in file.layers.iter().zip(layers.iter_mut()).rev() {
            if layer.kind == LayerKind::MaxPool {
                if raw.a_bits.is_none() {
                    if let Some(a) = next_a {
                        layer.a_bits = a;
                    }
                }
            }
            next_a = Some(layer.a_bits);
        }
        let mut prev_a = file.input.bits;
        for layer in layers.iter_mut() {
            if layer.kind == LayerKind::MaxPool && layer.a_bits == 0 {
                layer.a_bits = prev_a;
            }
            prev_a = layer.a_bits;
        }
        let topo = NetworkTopology {
            name: file.name,
            input: file.input,
            layers,
        };
        topo.validate()?;
        Ok(topo)
    }

    /// Serializes back to the TOML format; `parse` of the result reproduces
    /// `self` exactly.
    pub fn to_toml(&self) -> String {
        let file = TopoFile {
            name: self.name.clone(),
            input: self.input,
            layers: self.layers.iter().map(LayerFile::from_spec).collect(),
        };
        toml::to_string_pretty(&file).expect("topology serialization cannot fail")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }
}

pub(crate) fn at_layer(e: Error, i: usize) -> Error {
    match e {
        Error::InvalidLayer { reason, .. } => Error::InvalidLayer { layer: i, reason },
        Error::NoMacs { kind, .. } => Error::NoMacs { layer: i, kind },
        other => other,
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopoFile {
    name: String,
    input: InputSpec,
    layers: Vec<LayerFile>,
}

/// One `[[layers]]` entry. A single struct with optional fields (rather than a
/// tagged enum) so that unknown keys are rejected and per-type requirements
/// can produce precise messages.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    #[serde(rename = "type")]
    kind: LayerKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stride: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pad: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out_channels: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    a_bits: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    w_bits: Option<u8>,
}

impl LayerFile {
    fn resolve(&self, index: usize, n: u32, c: u32) -> Result<LayerSpec> {
        let need = |field: Option<u32>, name: &str| -> Result<u32> {
            field.ok_or_else(|| Error::InvalidLayer {
                layer: index,
                reason: format!("{} layers require `{}`", self.kind, name),
            })
        };
        let need_bits = |field: Option<u8>, name: &str| -> Result<u8> {
            field.ok_or_else(|| Error::InvalidLayer {
                layer: index,
                reason: format!("{} layers require `{}`", self.kind, name),
            })
        };
        let forbid = |present: bool, name: &str| -> Result<()> {
            if present {
                Err(Error::InvalidLayer {
                    layer: index,
                    reason: format!("{} layers do not take `{}`", self.kind, name),
                })
            } else {
                Ok(())
            }
        };
        let spec = match self.kind {
            LayerKind::Conv => LayerSpec {
                kind: LayerKind::Conv,
                n,
                c,
                k: need(self.k, "k")?,
                s: need(self.stride, "stride")?,
                pad: self.pad.unwrap_or(0),
                c_out: need(self.out_channels, "out_channels")?,
                a_bits: need_bits(self.a_bits, "a_bits")?,
                w_bits: need_bits(self.w_bits, "w_bits")?,
            },
            LayerKind::Fc => {
                forbid(self.k.is_some(), "k")?;
                forbid(self.stride.is_some(), "stride")?;
                forbid(self.pad.is_some(), "pad")?;
                LayerSpec {
                    kind: LayerKind::Fc,
                    n,
                    c,
                    k: n,
                    s: 1,
                    pad: 0,
                    c_out: need(self.out_channels, "out_channels")?,
                    a_bits: need_bits(self.a_bits, "a_bits")?,
                    w_bits: need_bits(self.w_bits, "w_bits")?,
                }
            }
            LayerKind::MaxPool => {
                forbid(self.out_channels.is_some(), "out_channels")?;
                forbid(self.w_bits.is_some(), "w_bits")?;
                LayerSpec {
                    kind: LayerKind::MaxPool,
                    n,
                    c,
                    k: need(self.k, "k")?,
                    s: need(self.stride, "stride")?,
                    pad: self.pad.unwrap_or(0),
                    c_out: c,
                    // 0 is a placeholder resolved by the precision back-fill pass.
                    a_bits: self.a_bits.unwrap_or(0),
                    w_bits: 1,
                }
            }
        };
        Ok(spec)
    }

    fn from_spec(spec: &LayerSpec) -> Self {
        match spec.kind {
            LayerKind::Conv => LayerFile {
                kind: LayerKind::Conv,
                k: Some(spec.k),
                stride: Some(spec.s),
                pad: Some(spec.pad),
                out_channels: Some(spec.c_out),
                a_bits: Some(spec.a_bits),
                w_bits: Some(spec.w_bits),
            },
            LayerKind::Fc => LayerFile {
                kind: LayerKind::Fc,
                k: None,
                stride: None,
                pad: None,
                out_channels: Some(spec.c_out),
                a_bits: Some(spec.a_bits),
                w_bits: Some(spec.w_bits),
            },
            LayerKind::MaxPool => LayerFile {
                kind: LayerKind::MaxPool,
                k: Some(spec.k),
                stride: Some(spec.s),
                pad: Some(spec.pad),
                out_channels: None,
                a_bits: Some(spec.a_bits),
                w_bits: None,
            },
        }
    }
}
