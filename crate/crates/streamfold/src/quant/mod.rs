//! Activation quantization, weight encodings, integer MAC arithmetic, and
//! threshold construction.
//!
//! Activations are uniform level codes on [0, 1]: `a` bits give `2^a` equally
//! spaced levels `i / (2^a - 1)`. Weights are either bipolar single bits
//! (1 -> +1, 0 -> -1) or two's complement fixed point with `w - 2` fraction
//! bits, covering [-2, 2 - 2^(2-w)]. All dot products run on integer codes;
//! the implicit scales are applied outside the accumulator. A quantized
//! activation function after a dot product is equivalent to comparing the raw
//! accumulator against precomputed integer thresholds, which is what the
//! streaming hardware model does.

mod tensor;

use serde::Deserialize;

pub use tensor::{Encoding, QTensor};

use crate::error::{Error, Result};

/// Activation precision: `a_bits` in 1..=8.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantSpec {
    a_bits: u8,
}

impl QuantSpec {
    pub fn new(a_bits: u8) -> Result<Self> {
        if a_bits < 1 || a_bits > 8 {
            return Err(Error::InvalidArgument(format!(
                "a_bits {a_bits} outside 1..=8"
            )));
        }
        Ok(QuantSpec { a_bits })
    }

    pub fn a_bits(&self) -> u8 {
        self.a_bits
    }

    /// Number of representable levels, `2^a`.
    pub fn levels(&self) -> u32 {
        1 << self.a_bits
    }

    /// Real value of a level code: `code / (levels - 1)`.
    pub fn value(&self, code: u8) -> f64 {
        code as f64 / (self.levels() - 1) as f64
    }

    /// Decision boundary below level `j` (for `j` in `1..levels`): the
    /// midpoint `(j - 1/2) / (levels - 1)`. An input lands at level `j` or
    /// above exactly when it is `>=` this boundary, which makes ties round up.
    pub fn boundary(&self, j: u32) -> f64 {
        (j as f64 - 0.5) / (self.levels() - 1) as f64
    }
}

/// How inputs outside [0, 1] are treated before quantization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ActivationClip {
    /// Clamp to [0, 1] (saturating clipped ReLU).
    #[default]
    Saturate,
    /// Map anything below 0 or above 1 to 0.
    ZeroOutside,
}

/// Quantizes a real activation to its level code: nearest level, ties up.
pub fn quantize_activation(x: f64, spec: &QuantSpec, clip: ActivationClip) -> Result<u8> {
    if x.is_nan() {
        return Err(Error::NanInput);
    }
    let x = match clip {
        ActivationClip::Saturate => x.clamp(0.0, 1.0),
        ActivationClip::ZeroOutside => {
            if !(0.0..=1.0).contains(&x) {
                return Ok(0);
            }
            x
        }
    };
    let mut code = 0u8;
    for j in 1..spec.levels() {
        if x >= spec.boundary(j) {
            code = j as u8;
        } else {
            break;
        }
    }
    Ok(code)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    Bipolar,
    TwosComplement,
}

/// Weight precision and its integer code semantics. One bit selects bipolar
/// +-1; wider weights are two's complement with `w - 2` fraction bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightEncoding {
    w_bits: u8,
    mode: WeightMode,
}

impl WeightEncoding {
    pub fn new(w_bits: u8) -> Result<Self> {
        if w_bits < 1 || w_bits > 8 {
            return Err(Error::InvalidArgument(format!(
                "w_bits {w_bits} outside 1..=8"
            )));
        }
        let mode = if w_bits == 1 {
            WeightMode::Bipolar
        } else {
            WeightMode::TwosComplement
        };
        Ok(WeightEncoding { w_bits, mode })
    }

    pub fn w_bits(&self) -> u8 {
        self.w_bits
    }

    pub fn mode(&self) -> WeightMode {
        self.mode
    }

    pub fn tensor_encoding(&self) -> Encoding {
        match self.mode {
            WeightMode::Bipolar => Encoding::Bipolar,
            WeightMode::TwosComplement => Encoding::TwosComplement,
        }
    }

    /// Value of one integer code step: `2^(2-w)` for two's complement.
    /// Bipolar codes are already the values +-1, so the step is 1.
    pub fn step(&self) -> f64 {
        match self.mode {
            WeightMode::Bipolar => 1.0,
            WeightMode::TwosComplement => (2.0f64).powi(2 - self.w_bits as i32),
        }
    }

    pub fn min_value(&self) -> f64 {
        match self.mode {
            WeightMode::Bipolar => -1.0,
            WeightMode::TwosComplement => -2.0,
        }
    }

    pub fn max_value(&self) -> f64 {
        match self.mode {
            WeightMode::Bipolar => 1.0,
            WeightMode::TwosComplement => 2.0 - self.step(),
        }
    }

    /// Encodes a real weight. Two's complement rounds to nearest (ties to
    /// even) and saturates out-of-range values; the flag reports saturation so
    /// callers can keep a warning count. Bipolar maps by sign: `v >= 0` to +1.
    pub fn encode(&self, v: f64) -> Result<(u64, bool)> {
        if v.is_nan() {
            return Err(Error::NanInput);
        }
        match self.mode {
            WeightMode::Bipolar => Ok((u64::from(v >= 0.0), false)),
            WeightMode::TwosComplement => {
                let half = 1i64 << (self.w_bits - 1);
                let q = (v / self.step()).round_ties_even();
                let (q, saturated) = if q < -(half as f64) {
                    (-half, true)
                } else if q > (half - 1) as f64 {
                    (half - 1, true)
                } else {
                    (q as i64, false)
                };
                let mask = (1u64 << self.w_bits) - 1;
                Ok(((q as u64) & mask, saturated))
            }
        }
    }

    /// Signed integer value of a code: +-1 for bipolar, sign-extended for
    /// two's complement.
    pub fn decode_int(&self, code: u64) -> i64 {
        match self.mode {
            WeightMode::Bipolar => {
                if code & 1 == 1 {
                    1
                } else {
                    -1
                }
            }
            WeightMode::TwosComplement => tensor::sign_extend(code, self.w_bits),
        }
    }

    /// Real value of a code.
    pub fn decode(&self, code: u64) -> f64 {
        self.decode_int(code) as f64 * self.step()
    }

    /// Largest magnitude any code can take.
    pub fn max_abs_int(&self) -> i64 {
        match self.mode {
            WeightMode::Bipolar => 1,
            WeightMode::TwosComplement => 1 << (self.w_bits - 1),
        }
    }
}

/// Integer dot product of activation level codes against weight codes.
/// The result relates to the real-valued dot product by the product of the
/// two implicit scales.
pub fn mac_dot(
    a_codes: &[u8],
    w_codes: &[u8],
    spec: &QuantSpec,
    enc: &WeightEncoding,
) -> Result<i64> {
    if a_codes.len() != w_codes.len() {
        return Err(Error::LengthMismatch {
            left: a_codes.len(),
            right: w_codes.len(),
        });
    }
    let mut acc = 0i64;
    for (&a, &w) in a_codes.iter().zip(w_codes) {
        debug_assert!(u32::from(a) < spec.levels());
        acc += a as i64 * enc.decode_int(w as u64);
    }
    Ok(acc)
}

/// Packs 1-bit codes into 64-lane words, lowest lane in the LSB.
pub fn pack_bits(codes: &[u8]) -> Vec<u64> {
    let mut words = vec![0u64; codes.len().div_ceil(64)];
    for (i, &c) in codes.iter().enumerate() {
        if c & 1 == 1 {
            words[i / 64] |= 1 << (i % 64);
        }
    }
    words
}

/// Binary fast path for `mac_dot` with 1-bit activations and bipolar weights:
/// lanes where the activation bit is 0 contribute nothing, active lanes add
/// +1 where the weight bit is set and -1 where it is clear, which reduces to
/// two popcounts per word.
pub fn mac_dot_binary(a_words: &[u64], w_words: &[u64], lanes: usize) -> Result<i64> {
    if a_words.len() != w_words.len() || a_words.len() != lanes.div_ceil(64) {
        return Err(Error::LengthMismatch {
            left: a_words.len(),
            right: w_words.len(),
        });
    }
    let mut acc = 0i64;
    for (i, (&a, &w)) in a_words.iter().zip(w_words).enumerate() {
        let valid = lanes - i * 64;
        let mask = if valid >= 64 { u64::MAX } else { (1u64 << valid) - 1 };
        let a = a & mask;
        acc += 2 * (a & w).count_ones() as i64 - a.count_ones() as i64;
    }
    Ok(acc)
}

/// Per-channel integer thresholds implementing a quantized activation
/// directly on raw accumulator values: the output code is the number of
/// thresholds less than or equal to the accumulator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdSet {
    a_bits: u8,
    channels: Vec<Vec<i64>>,
}

impl ThresholdSet {
    /// `channels[ch]` must hold `2^a_bits - 1` non-decreasing thresholds.
    pub fn from_channels(a_bits: u8, channels: Vec<Vec<i64>>) -> Result<Self> {
        let spec = QuantSpec::new(a_bits)?;
        let want = spec.levels() as usize - 1;
        for (ch, t) in channels.iter().enumerate() {
            if t.len() != want {
                return Err(Error::InvalidArgument(format!(
                    "channel {ch} has {} thresholds, expected {want}",
                    t.len()
                )));
            }
            if t.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "channel {ch} thresholds are not sorted"
                )));
            }
        }
        if channels.is_empty() {
            return Err(Error::InvalidArgument("threshold set has no channels".into()));
        }
        Ok(ThresholdSet { a_bits, channels })
    }

    pub fn a_bits(&self) -> u8 {
        self.a_bits
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn thresholds(&self, channel: usize) -> &[i64] {
        &self.channels[channel]
    }

    /// Output level code for an accumulator value.
    pub fn apply(&self, channel: usize, acc: i64) -> u8 {
        self.channels[channel].partition_point(|&t| t <= acc) as u8
    }
}

/// Worst-case accumulator magnitude for a dot product of `simd_total` lanes.
pub fn accumulator_bound(simd_total: u64, spec: &QuantSpec, enc: &WeightEncoding) -> i64 {
    simd_total as i64 * (spec.levels() as i64 - 1) * enc.max_abs_int()
}

/// Builds the thresholds for one output channel whose pre-activation is
/// `scale * acc + bias` with `scale > 0`: threshold `j` is the smallest
/// integer accumulator whose pre-activation reaches the level-`j` boundary.
/// Applying the set then reproduces the saturating quantizer exactly.
///
/// `simd_total` is the dot product width; thresholds are saturated into the
/// range of accumulators that width can produce (conservatively over all
/// weight encodings), which keeps them finite for degenerate scales.
pub fn build_thresholds(
    spec: &QuantSpec,
    scale: f64,
    bias: f64,
    simd_total: u64,
) -> Result<ThresholdSet> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::BadScale(scale));
    }
    if !bias.is_finite() {
        return Err(Error::InvalidArgument(format!("bias {bias} is not finite")));
    }
    if simd_total == 0 || simd_total > 1 << 40 {
        return Err(Error::InvalidArgument(format!(
            "simd_total {simd_total} outside 1..=2^40"
        )));
    }
    let bound = simd_total as i64 * (spec.levels() as i64 - 1) * 128;
    let pre = |v: i64| scale * v as f64 + bias;
    let mut thresholds = Vec::with_capacity(spec.levels() as usize - 1);
    for j in 1..spec.levels() {
        let target = spec.boundary(j);
        // The pre-activation is non-decreasing in v, so the smallest integer
        // reaching the boundary is found by bisection over the reachable
        // range. Outside that range the saturated endpoints are equivalent.
        let t = if pre(-bound) >= target {
            -bound
        } else if pre(bound + 1) < target {
            bound + 1
        } else {
            let (mut lo, mut hi) = (-bound, bound + 1); // pre(lo) < target <= pre(hi)
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if pre(mid) >= target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        };
        thresholds.push(t);
    }
    ThresholdSet::from_channels(spec.a_bits, vec![thresholds])
}

/// Builds a multi-channel set from per-channel (scale, bias) pairs.
pub fn affine_thresholds(
    spec: &QuantSpec,
    params: &[(f64, f64)],
    simd_total: u64,
) -> Result<ThresholdSet> {
    let mut channels = Vec::with_capacity(params.len());
    for &(scale, bias) in params {
        let single = build_thresholds(spec, scale, bias, simd_total)?;
        channels.push(single.channels.into_iter().next().unwrap());
    }
    ThresholdSet::from_channels(spec.a_bits, channels)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThresholdFile {
    thresholds: Vec<ThresholdEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThresholdEntry {
    layer: usize,
    channel: u32,
    values: Vec<i64>,
}

/// Parses the threshold file format: a `[[thresholds]]` entry per (layer,
/// channel) with the raw integer values. `channels_per_layer` gives the
/// output channel count of each weighted layer; every channel must be covered
/// exactly once and each layer's entries must agree on their level count.
pub fn parse_threshold_sets(text: &str, channels_per_layer: &[u32]) -> Result<Vec<ThresholdSet>> {
    parse_threshold_sets_opt(text, channels_per_layer)?
        .into_iter()
        .enumerate()
        .map(|(li, set)| {
            set.ok_or_else(|| {
                Error::parse("thresholds", format!("no entries for layer {li}"))
            })
        })
        .collect()
}

/// Like [`parse_threshold_sets`], but a layer mentioned by no entry at all
/// resolves to `None` (its accumulators pass through raw). A layer that is
/// only partially covered is still an error.
pub fn parse_threshold_sets_opt(
    text: &str,
    channels_per_layer: &[u32],
) -> Result<Vec<Option<ThresholdSet>>> {
    let file: ThresholdFile = toml::from_str(text).map_err(|e| Error::parse("thresholds", e))?;
    let mut per_layer: Vec<Vec<Option<Vec<i64>>>> = channels_per_layer
        .iter()
        .map(|&c| vec![None; c as usize])
        .collect();
    for entry in file.thresholds {
        let slot = per_layer
            .get_mut(entry.layer)
            .ok_or_else(|| {
                Error::parse(
                    "thresholds",
                    format!("layer {} out of range", entry.layer),
                )
            })?
            .get_mut(entry.channel as usize)
            .ok_or_else(|| {
                Error::parse(
                    "thresholds",
                    format!("channel {} out of range in layer {}", entry.channel, entry.layer),
                )
            })?;
        if slot.is_some() {
            return Err(Error::parse(
                "thresholds",
                format!("duplicate entry for layer {} channel {}", entry.layer, entry.channel),
            ));
        }
        *slot = Some(entry.values);
    }
    let mut sets = Vec::with_capacity(per_layer.len());
    for (li, channels) in per_layer.into_iter().enumerate() {
        let present = channels.iter().filter(|s| s.is_some()).count();
        if present == 0 {
            sets.push(None);
            continue;
        }
        if present != channels.len() {
            return Err(Error::parse(
                "thresholds",
                format!(
                    "layer {li} covers {present} of {} channels",
                    channels.len()
                ),
            ));
        }
        let resolved: Vec<Vec<i64>> = channels.into_iter().map(Option::unwrap).collect();
        let count = resolved[0].len();
        let levels = count + 1;
        if !levels.is_power_of_two() || levels < 2 || levels > 256 {
            return Err(Error::parse(
                "thresholds",
                format!("layer {li}: {count} thresholds per channel is not 2^a - 1"),
            ));
        }
        let a_bits = levels.trailing_zeros() as u8;
        sets.push(Some(ThresholdSet::from_channels(a_bits, resolved)?));
    }
    Ok(sets)
}

/// Serializes threshold sets to the file format.
pub fn render_threshold_sets(sets: &[ThresholdSet]) -> String {
    let mut out = String::new();
    for (li, set) in sets.iter().enumerate() {
        for ch in 0..set.num_channels() {
            out.push_str("[[thresholds]]\n");
            out.push_str(&format!("layer = {li}\n"));
            out.push_str(&format!("channel = {ch}\n"));
            let vals: Vec<String> = set.thresholds(ch).iter().map(|t| t.to_string()).collect();
            out.push_str(&format!("values = [{}]\n\n", vals.join(", ")));
        }
    }
    out
}
