//! Analytic resource cost model for folded streaming layers.
//!
//! Each weighted layer is served by a sliding window unit (line buffers in
//! block RAM), a matrix unit with `pe * simd` multipliers fed from per-PE
//! weight memories, and `m` parallel image lanes sharing the weight stream.
//! Costs are counted in block-RAM primitives of a configurable geometry
//! (`bram_depth` words by `bram_width` bits, 512x36 for the bundled device
//! files) and in LUTs via a per-MAC cost table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{at_layer, LayerSpec, NetworkTopology};

/// Per-layer folding factors: `pe` output-channel lanes, `simd`
/// input-channel lanes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerFolding {
    pub pe: u32,
    pub simd: u32,
}

/// Folding of a whole network: one entry per weighted layer (pool layers are
/// not folded) plus the image batch parallelism `m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldingConfig {
    pub m: u32,
    #[serde(rename = "layers")]
    pub per_layer: Vec<LayerFolding>,
}

impl FoldingConfig {
    /// The fully folded starting point: `pe = simd = 1` everywhere, `m = 1`.
    pub fn minimal(topo: &NetworkTopology) -> Self {
        FoldingConfig {
            m: 1,
            per_layer: vec![LayerFolding { pe: 1, simd: 1 }; topo.num_weighted()],
        }
    }

    /// Checks entry count and that every entry tiles its layer's weight
    /// matrix: `simd` divides the input channels and `pe` the output channels.
    pub fn validate(&self, topo: &NetworkTopology) -> Result<()> {
        if self.m < 1 {
            return Err(Error::InvalidArgument("m must be at least 1".into()));
        }
        if self.per_layer.len() != topo.num_weighted() {
            return Err(Error::FoldingMismatch {
                expected: topo.num_weighted(),
                got: self.per_layer.len(),
            });
        }
        for ((idx, layer), fold) in topo.weighted_layers().zip(&self.per_layer) {
            if fold.pe < 1 || fold.simd < 1 {
                return Err(Error::InvalidArgument(format!(
                    "layer {idx}: pe and simd must be at least 1"
                )));
            }
            if layer.c % fold.simd != 0 || layer.c_out % fold.pe != 0 {
                return Err(Error::UntiledWeights {
                    layer: idx,
                    pe: fold.pe,
                    simd: fold.simd,
                    c: layer.c,
                    c_out: layer.c_out,
                });
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse("folding", e))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("folding serialization cannot fail")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Target device budgets. Bandwidth is stored in bytes per second; the file
/// format takes `mem_bandwidth_gbps` (GB/s).
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceModel {
    pub name: String,
    pub lut_budget: u64,
    pub bram_budget: u64,
    pub bram_depth: u32,
    pub bram_width: u32,
    pub dsp_budget: u64,
    pub mem_bandwidth: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceFile {
    name: String,
    lut_budget: u64,
    bram_budget: u64,
    bram_depth: u32,
    bram_width: u32,
    dsp_budget: u64,
    mem_bandwidth_gbps: f64,
}

impl DeviceModel {
    pub fn validate(&self) -> Result<()> {
        if self.lut_budget == 0 || self.bram_budget == 0 || self.dsp_budget == 0 {
            return Err(Error::InvalidArgument(
                "device budgets must be positive".into(),
            ));
        }
        if self.bram_depth == 0 || self.bram_width == 0 {
            return Err(Error::InvalidArgument(
                "block RAM geometry must be positive".into(),
            ));
        }
        if !(self.mem_bandwidth.is_finite() && self.mem_bandwidth > 0.0) {
            return Err(Error::InvalidArgument(
                "memory bandwidth must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let f: DeviceFile = toml::from_str(text).map_err(|e| Error::parse("device", e))?;
        let dev = DeviceModel {
            name: f.name,
            lut_budget: f.lut_budget,
            bram_budget: f.bram_budget,
            bram_depth: f.bram_depth,
            bram_width: f.bram_width,
            dsp_budget: f.dsp_budget,
            mem_bandwidth: f.mem_bandwidth_gbps * 1e9,
        };
        dev.validate()?;
        Ok(dev)
    }

    pub fn to_toml(&self) -> String {
        let f = DeviceFile {
            name: self.name.clone(),
            lut_budget: self.lut_budget,
            bram_budget: self.bram_budget,
            bram_depth: self.bram_depth,
            bram_width: self.bram_width,
            dsp_budget: self.dsp_budget,
            mem_bandwidth_gbps: self.mem_bandwidth / 1e9,
        };
        toml::to_string_pretty(&f).expect("device serialization cannot fail")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// LUTs per multiply-accumulate as a function of the two precisions.
/// Explicit entries win; otherwise the default rule `a * max(w, 2)` applies
/// when enabled.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    entries: BTreeMap<(u8, u8), f64>,
    use_default_rule: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostTableFile {
    use_default_rule: bool,
    #[serde(default)]
    entries: Vec<CostEntryFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostEntryFile {
    a: u8,
    w: u8,
    luts_per_mac: f64,
}

impl CostTable {
    /// Table with no explicit entries, default rule enabled.
    pub fn default_rule_only() -> Self {
        CostTable {
            entries: BTreeMap::new(),
            use_default_rule: true,
        }
    }

    pub fn with_entry(mut self, a: u8, w: u8, luts_per_mac: f64) -> Self {
        self.entries.insert((a, w), luts_per_mac);
        self
    }

    /// The fallback rule: activations contribute linearly, weights below two
    /// bits cost the same as two (the adder tree dominates).
    pub fn default_rule(a: u8, w: u8) -> f64 {
        a as f64 * w.max(2) as f64
    }

    pub fn lookup(&self, a: u8, w: u8) -> Result<f64> {
        if let Some(&f) = self.entries.get(&(a, w)) {
            return Ok(f);
        }
        if self.use_default_rule {
            return Ok(Self::default_rule(a, w));
        }
        Err(Error::MissingCostEntry { a, w })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let f: CostTableFile = toml::from_str(text).map_err(|e| Error::parse("cost table", e))?;
        let mut entries = BTreeMap::new();
        for e in f.entries {
            if e.a < 1 || e.a > 8 || e.w < 1 || e.w > 8 {
                return Err(Error::parse(
                    "cost table",
                    format!("precision {}/{} outside 1..=8", e.a, e.w),
                ));
            }
            if !(e.luts_per_mac.is_finite() && e.luts_per_mac > 0.0) {
                return Err(Error::parse(
                    "cost table",
                    format!("luts_per_mac {} must be positive", e.luts_per_mac),
                ));
            }
            if entries.insert((e.a, e.w), e.luts_per_mac).is_some() {
                return Err(Error::parse(
                    "cost table",
                    format!("duplicate entry for a={} w={}", e.a, e.w),
                ));
            }
        }
        Ok(CostTable {
            entries,
            use_default_rule: f.use_default_rule,
        })
    }

    pub fn to_toml(&self) -> String {
        let f = CostTableFile {
            use_default_rule: self.use_default_rule,
            entries: self
                .entries
                .iter()
                .map(|(&(a, w), &luts_per_mac)| CostEntryFile { a, w, luts_per_mac })
                .collect(),
        };
        toml::to_string_pretty(&f).expect("cost table serialization cannot fail")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Depth accounting for the per-PE weight memories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DepthRule {
    /// Scale the per-PE word count by the block width before dividing by the
    /// block depth (the published form of the model; over-counts depth for
    /// narrow memories). This is the default.
    #[default]
    ScaledByWidth,
    /// Divide the per-PE word count by the block depth directly.
    PlainWords,
}

fn ceil_div(a: u64, b: u64) -> u64 {
    (a + b - 1) / b
}

/// Block RAMs for a layer's sliding window buffers:
/// `m * (ceil(k/s) + 1) * ceil(s * n_padded / depth) * ceil(c * a / width)`.
/// The ring holds `ceil(k/s) + 1` stripes of `s` rows each, every row one
/// padded line of `c`-channel `a`-bit codes. Pool layers cost nothing.
pub fn bram_swu(layer: &LayerSpec, m: u32, dev: &DeviceModel) -> u64 {
    if !layer.kind.is_weighted() {
        return 0;
    }
    let stripes = ceil_div(layer.k as u64, layer.s as u64) + 1;
    let depth_frac = ceil_div(
        layer.s as u64 * layer.n_padded() as u64,
        dev.bram_depth as u64,
    );
    let width_frac = ceil_div(
        layer.c as u64 * layer.a_bits as u64,
        dev.bram_width as u64,
    );
    m as u64 * stripes * depth_frac * width_frac
}

/// Block RAMs for a layer's weight memories plus the per-PE word depth
/// `wm = k^2 * c * c_out / (simd * pe)`. Each of the `pe` memories is
/// `simd * w` bits wide; the depth fragment follows `rule`. Pool layers cost
/// nothing. Fails if the folding does not tile the weight matrix.
pub fn bram_weights(
    layer: &LayerSpec,
    fold: LayerFolding,
    dev: &DeviceModel,
    rule: DepthRule,
) -> Result<(u64, u64)> {
    if !layer.kind.is_weighted() {
        return Ok((0, 0));
    }
    if fold.simd < 1 || fold.pe < 1 || layer.c % fold.simd != 0 || layer.c_out % fold.pe != 0 {
        return Err(Error::UntiledWeights {
            layer: 0,
            pe: fold.pe,
            simd: fold.simd,
            c: layer.c,
            c_out: layer.c_out,
        });
    }
    let wm = (layer.k as u64).pow(2) * (layer.c as u64 / fold.simd as u64)
        * (layer.c_out as u64 / fold.pe as u64);
    let depth_frac = match rule {
        DepthRule::ScaledByWidth => ceil_div(wm * dev.bram_width as u64, dev.bram_depth as u64),
        DepthRule::PlainWords => ceil_div(wm, dev.bram_depth as u64),
    };
    let width_frac = ceil_div(
        fold.simd as u64 * layer.w_bits as u64,
        dev.bram_width as u64,
    );
    Ok((fold.pe as u64 * depth_frac * width_frac, wm))
}

/// LUTs for a layer's compute array: `m` copies of `ceil(pe * simd * f(a, w))`
/// with `f` from the cost table. Rounding per copy keeps the count exactly
/// linear in `m`. Pool layers cost nothing.
pub fn lut_cost(layer: &LayerSpec, fold: LayerFolding, m: u32, table: &CostTable) -> Result<u64> {
    if !layer.kind.is_weighted() {
        return Ok(0);
    }
    let f = table.lookup(layer.a_bits, layer.w_bits)?;
    let per_copy = (fold.pe as f64 * fold.simd as f64 * f).ceil() as u64;
    Ok(m as u64 * per_copy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerResources {
    /// Index into the topology's layer list.
    pub layer: usize,
    pub bram_swu: u64,
    pub bram_weights: u64,
    /// Words in each PE's weight memory.
    pub wm_depth: u64,
    pub luts: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceEstimate {
    pub per_layer: Vec<LayerResources>,
    pub bram_total: u64,
    pub lut_total: u64,
    /// Totals over the raw device budgets.
    pub bram_fraction: f64,
    pub lut_fraction: f64,
}

impl ResourceEstimate {
    /// True when both totals stay within `cap` of their budgets.
    pub fn fits(&self, dev: &DeviceModel, cap: f64) -> bool {
        within_cap(self.bram_total, dev.bram_budget, cap)
            && within_cap(self.lut_total, dev.lut_budget, cap)
    }

    /// The first budget violation under `cap`, as an error naming the
    /// resource, or `Ok` if everything fits.
    pub fn check_budget(&self, dev: &DeviceModel, cap: f64) -> Result<()> {
        for (name, used, budget) in [
            ("block RAM", self.bram_total, dev.bram_budget),
            ("LUTs", self.lut_total, dev.lut_budget),
        ] {
            if !within_cap(used, budget, cap) {
                return Err(Error::DeviceUnsuitable {
                    resource: name.to_string(),
                    required: used,
                    available: (cap * budget as f64) as u64,
                });
            }
        }
        Ok(())
    }
}

/// Shared feasibility comparison: `used <= cap * budget` with a small epsilon
/// so boundary configurations are accepted deterministically.
pub fn within_cap(used: u64, budget: u64, cap: f64) -> bool {
    used as f64 <= cap * budget as f64 + 1e-9
}

/// Evaluates the full cost model for a folded network.
pub fn estimate_network(
    topo: &NetworkTopology,
    fold: &FoldingConfig,
    dev: &DeviceModel,
    table: &CostTable,
    rule: DepthRule,
) -> Result<ResourceEstimate> {
    topo.validate()?;
    dev.validate()?;
    fold.validate(topo)?;
    let mut per_layer = Vec::with_capacity(fold.per_layer.len());
    let mut bram_total = 0u64;
    let mut lut_total = 0u64;
    for ((idx, layer), &lf) in topo.weighted_layers().zip(&fold.per_layer) {
        let swu = bram_swu(layer, fold.m, dev);
        let (weights, wm) = bram_weights(layer, lf, dev, rule).map_err(|e| at_layer(e, idx))?;
        let luts = lut_cost(layer, lf, fold.m, table).map_err(|e| at_layer(e, idx))?;
        bram_total += swu + weights;
        lut_total += luts;
        per_layer.push(LayerResources {
            layer: idx,
            bram_swu: swu,
            bram_weights: weights,
            wm_depth: wm,
            luts,
        });
    }
    Ok(ResourceEstimate {
        per_layer,
        bram_total,
        lut_total,
        bram_fraction: bram_total as f64 / dev.bram_budget as f64,
        lut_fraction: lut_total as f64 / dev.lut_budget as f64,
    })
}
