//! Throughput prediction for folded networks.
//!
//! Every weighted layer runs one fold step per cycle, so its initiation
//! interval for a batch is `n_out^2 * (k^2 * c / simd) * (c_out / pe)`
//! cycles. The slowest layer paces the pipeline: `fps = m * clock / max_ii`.
//! Latency is bounded by the serial sum of intervals. A roofline built from
//! the LUT budget and the per-MAC cost caps what any folding can reach.

use serde::{Deserialize, Serialize};

use crate::costmodel::{CostTable, DeviceModel, FoldingConfig, LayerFolding};
use crate::error::{Error, Result};
use crate::topology::{at_layer, LayerSpec, NetworkTopology};

/// Cycles between batches for one layer under a folding: the number of fold
/// steps needed to cover every output pixel. Independent of `m`, which only
/// widens the batch.
pub fn layer_ii(layer: &LayerSpec, fold: LayerFolding) -> Result<u64> {
    if !layer.kind.is_weighted() {
        return Err(Error::NoMacs {
            layer: 0,
            kind: layer.kind.to_string(),
        });
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
    let n_out = layer.output_dim()? as u64;
    let input_folds = (layer.k as u64).pow(2) * (layer.c as u64 / fold.simd as u64);
    let neuron_folds = layer.c_out as u64 / fold.pe as u64;
    Ok(n_out * n_out * input_folds * neuron_folds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerIi {
    /// Index into the topology's layer list.
    pub layer: usize,
    pub ii: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfEstimate {
    pub clock_hz: f64,
    pub m: u32,
    pub per_layer_ii: Vec<LayerIi>,
    /// Topology index of the layer with the largest interval (first on ties).
    pub bottleneck: usize,
    pub max_ii: u64,
    /// Frames per second: `m` images finish every `max_ii` cycles.
    pub fps: f64,
    /// Serial upper bound: the sum of intervals over the clock, in seconds.
    pub latency_s: f64,
}

pub fn estimate_perf(
    topo: &NetworkTopology,
    fold: &FoldingConfig,
    clock_hz: f64,
) -> Result<PerfEstimate> {
    if !(clock_hz.is_finite() && clock_hz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "clock {clock_hz} must be positive"
        )));
    }
    topo.validate()?;
    fold.validate(topo)?;
    let mut per_layer_ii = Vec::with_capacity(fold.per_layer.len());
    let mut sum = 0u64;
    for ((idx, layer), &lf) in topo.weighted_layers().zip(&fold.per_layer) {
        let ii = layer_ii(layer, lf).map_err(|e| at_layer(e, idx))?;
        sum += ii;
        per_layer_ii.push(LayerIi { layer: idx, ii });
    }
    let max_ii = per_layer_ii
        .iter()
        .map(|l| l.ii)
        .max()
        .expect("validated topologies have at least one weighted layer");
    // Ties resolve to the first (shallowest) layer with the largest interval.
    let bottleneck = per_layer_ii.iter().find(|l| l.ii == max_ii).unwrap().layer;
    Ok(PerfEstimate {
        clock_hz,
        m: fold.m,
        bottleneck,
        max_ii,
        fps: fold.m as f64 * clock_hz / max_ii as f64,
        latency_s: sum as f64 / clock_hz,
        per_layer_ii,
    })
}

/// Peak compute in ops/s a device can sustain at one precision: the LUT
/// budget under the utilization cap buys `budget * cap / f(a, w)` MAC units,
/// each worth two ops per cycle.
pub fn compute_peak(
    dev: &DeviceModel,
    table: &CostTable,
    a: u8,
    w: u8,
    clock_hz: f64,
    utilization_cap: f64,
) -> Result<f64> {
    let f = table.lookup(a, w)?;
    Ok(2.0 * (dev.lut_budget as f64 * utilization_cap / f) * clock_hz)
}

/// Frames per second the compute roofline alone allows for a workload of
/// `total_macs` MACs per image.
pub fn compute_bound_fps(
    total_macs: u64,
    dev: &DeviceModel,
    table: &CostTable,
    a: u8,
    w: u8,
    clock_hz: f64,
    utilization_cap: f64,
) -> Result<f64> {
    Ok(compute_peak(dev, table, a, w, clock_hz, utilization_cap)? / (2.0 * total_macs as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RooflinePoint {
    /// Arithmetic intensity in ops per byte.
    pub ai: f64,
    /// Attainable ops/s at that intensity.
    pub ops: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RooflineCurve {
    pub a_bits: u8,
    pub w_bits: u8,
    pub compute_peak: f64,
    /// Intensity where the bandwidth and compute ceilings meet.
    pub ridge: f64,
    pub points: Vec<RooflinePoint>,
}

impl RooflineCurve {
    pub fn label(&self) -> String {
        format!("{}/{}", self.w_bits, self.a_bits)
    }
}

/// Roofline curves for a set of (a, w) precisions: attainable throughput is
/// `min(compute_peak, ai * bandwidth)`, sampled log-spaced around each
/// curve's ridge point (the center sample lands exactly on it).
pub fn roofline(
    dev: &DeviceModel,
    table: &CostTable,
    precisions: &[(u8, u8)],
    clock_hz: f64,
    utilization_cap: f64,
) -> Result<Vec<RooflineCurve>> {
    if !(clock_hz.is_finite() && clock_hz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "clock {clock_hz} must be positive"
        )));
    }
    if !(utilization_cap.is_finite() && utilization_cap > 0.0 && utilization_cap <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "utilization cap {utilization_cap} outside (0, 1]"
        )));
    }
    dev.validate()?;
    let mut curves = Vec::with_capacity(precisions.len());
    for &(a, w) in precisions {
        let peak = compute_peak(dev, table, a, w, clock_hz, utilization_cap)?;
        let ridge = peak / dev.mem_bandwidth;
        let points = (-24..=24)
            .map(|k| {
                let ai = ridge * (2f64).powf(k as f64 / 4.0);
                RooflinePoint {
                    ai,
                    ops: peak.min(ai * dev.mem_bandwidth),
                }
            })
            .collect();
        curves.push(RooflineCurve {
            a_bits: a,
            w_bits: w,
            compute_peak: peak,
            ridge,
            points,
        });
    }
    Ok(curves)
}
