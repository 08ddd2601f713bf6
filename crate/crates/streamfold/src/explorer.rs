//! Greedy folding search under device resource caps, plus Pareto utilities
//! for comparing precision variants.
//!
//! The search starts from the minimal folding (every layer at PE = SIMD = 1,
//! one image lane) and repeatedly refines the bottleneck layer: it bumps that
//! layer's SIMD to the next divisor of its channel count, or its PE to the
//! next divisor of the output channel count, keeping whichever feasible move
//! buys the most cycles per added LUT. When the bottleneck cannot be refined
//! within the budget it falls back to widening the batch (one more image
//! lane) if allowed, and otherwise stops. Because SIMD and PE only ever move
//! along divisors, weight tiles always stay integral.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::costmodel::{
    estimate_network, CostTable, DepthRule, DeviceModel, FoldingConfig, ResourceEstimate,
};
use crate::error::{Error, Result};
use crate::perfmodel::{estimate_perf, layer_ii, PerfEstimate};
use crate::topology::NetworkTopology;

/// Smallest divisor of `n` strictly greater than `cur`.
fn next_divisor(n: u32, cur: u32) -> Option<u32> {
    (cur + 1..=n).find(|d| n % d == 0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExploreGoal {
    pub clock_hz: f64,
    /// Fraction of each resource budget the design may occupy.
    pub utilization_cap: f64,
    /// Stop as soon as the predicted rate reaches this, if set.
    pub target_fps: Option<f64>,
    /// Upper limit for the batch-widening fallback.
    pub max_m: u32,
}

impl ExploreGoal {
    pub fn new(clock_hz: f64) -> Self {
        ExploreGoal {
            clock_hz,
            utilization_cap: 0.8,
            target_fps: None,
            max_m: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clock_hz.is_finite() && self.clock_hz > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "clock {} must be positive",
                self.clock_hz
            )));
        }
        if !(self.utilization_cap.is_finite()
            && self.utilization_cap > 0.0
            && self.utilization_cap <= 1.0)
        {
            return Err(Error::InvalidArgument(format!(
                "utilization cap {} outside (0, 1]",
                self.utilization_cap
            )));
        }
        if let Some(t) = self.target_fps {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "target fps {t} must be positive"
                )));
            }
        }
        if self.max_m < 1 {
            return Err(Error::InvalidArgument("max batch width must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    Simd,
    Pe,
    WidenBatch,
}

/// One accepted refinement, with the state reached after applying it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreStep {
    pub kind: MoveKind,
    /// Topology index of the adjusted layer; batch widening has none.
    pub layer: Option<usize>,
    pub m: u32,
    pub pe: Option<u32>,
    pub simd: Option<u32>,
    pub max_ii: u64,
    pub fps: f64,
    pub lut_total: u64,
    pub bram_total: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The requested frame rate was reached.
    TargetReached,
    /// No remaining move fits under the utilization cap.
    NoFeasibleMove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreResult {
    pub folding: FoldingConfig,
    pub perf: PerfEstimate,
    pub resources: ResourceEstimate,
    pub steps: Vec<ExploreStep>,
    pub stop: StopReason,
    pub target_fps: Option<f64>,
}

impl ExploreResult {
    /// Whether the requested rate was met; `None` when none was requested.
    pub fn target_met(&self) -> Option<bool> {
        self.target_fps.map(|t| self.perf.fps >= t)
    }
}

/// Every single-step refinement the search would consider from this state:
/// SIMD and PE bumps on the weighted layer at `pos`, plus batch widening
/// while below `max_m`. Feasibility is not checked here.
pub fn candidate_moves(
    topo: &NetworkTopology,
    fold: &FoldingConfig,
    pos: usize,
    max_m: u32,
) -> Vec<(MoveKind, FoldingConfig)> {
    let (_, layer) = topo
        .weighted_layers()
        .nth(pos)
        .expect("position addresses a weighted layer");
    let cur = fold.per_layer[pos];
    let mut moves = Vec::new();
    if let Some(simd) = next_divisor(layer.c, cur.simd) {
        let mut f = fold.clone();
        f.per_layer[pos].simd = simd;
        moves.push((MoveKind::Simd, f));
    }
    if let Some(pe) = next_divisor(layer.c_out, cur.pe) {
        let mut f = fold.clone();
        f.per_layer[pos].pe = pe;
        moves.push((MoveKind::Pe, f));
    }
    if fold.m < max_m {
        let mut f = fold.clone();
        f.m += 1;
        moves.push((MoveKind::WidenBatch, f));
    }
    moves
}

pub fn explore(
    topo: &NetworkTopology,
    dev: &DeviceModel,
    table: &CostTable,
    goal: &ExploreGoal,
    rule: DepthRule,
) -> Result<ExploreResult> {
    goal.validate()?;
    topo.validate()?;
    dev.validate()?;
    let mut fold = FoldingConfig::minimal(topo);
    let mut res = estimate_network(topo, &fold, dev, table, rule)?;
    res.check_budget(dev, goal.utilization_cap)?;
    let mut perf = estimate_perf(topo, &fold, goal.clock_hz)?;
    let mut steps = Vec::new();

    let stop = loop {
        if let Some(t) = goal.target_fps {
            if perf.fps >= t {
                break StopReason::TargetReached;
            }
        }
        let pos = topo
            .weighted_layers()
            .position(|(idx, _)| idx == perf.bottleneck)
            .expect("bottleneck index comes from the weighted list");
        let (_, layer) = topo.weighted_layers().nth(pos).unwrap();
        let cur_ii = layer_ii(layer, fold.per_layer[pos])?;

        // Score the two layer refinements by cycles saved per LUT added.
        // SIMD is enumerated first and wins exact ties.
        let mut best: Option<(f64, u64, MoveKind, FoldingConfig, ResourceEstimate)> = None;
        for (kind, cand) in candidate_moves(topo, &fold, pos, 1) {
            let cand_res = estimate_network(topo, &cand, dev, table, rule)?;
            if !cand_res.fits(dev, goal.utilization_cap) {
                continue;
            }
            let new_ii = layer_ii(layer, cand.per_layer[pos])?;
            let d_lut = cand_res.lut_total - res.lut_total;
            let ratio = if d_lut == 0 {
                f64::INFINITY
            } else {
                (cur_ii - new_ii) as f64 / d_lut as f64
            };
            let better = match &best {
                None => true,
                Some((r, dl, ..)) => ratio > *r || (ratio == *r && d_lut < *dl),
            };
            if better {
                best = Some((ratio, d_lut, kind, cand, cand_res));
            }
        }

        let (kind, cand, cand_res) = match best {
            Some((_, _, kind, cand, cand_res)) => (kind, cand, cand_res),
            None => {
                // Bottleneck saturated: widen the batch if we still may.
                if fold.m >= goal.max_m {
                    break StopReason::NoFeasibleMove;
                }
                let mut cand = fold.clone();
                cand.m += 1;
                let cand_res = estimate_network(topo, &cand, dev, table, rule)?;
                if !cand_res.fits(dev, goal.utilization_cap) {
                    break StopReason::NoFeasibleMove;
                }
                (MoveKind::WidenBatch, cand, cand_res)
            }
        };

        fold = cand;
        res = cand_res;
        perf = estimate_perf(topo, &fold, goal.clock_hz)?;
        let (layer_field, pe, simd) = match kind {
            MoveKind::WidenBatch => (None, None, None),
            _ => {
                let lf = fold.per_layer[pos];
                (Some(perf.per_layer_ii[pos].layer), Some(lf.pe), Some(lf.simd))
            }
        };
        steps.push(ExploreStep {
            kind,
            layer: layer_field,
            m: fold.m,
            pe,
            simd,
            max_ii: perf.max_ii,
            fps: perf.fps,
            lut_total: res.lut_total,
            bram_total: res.bram_total,
        });
    };

    Ok(ExploreResult {
        folding: fold,
        perf,
        resources: res,
        steps,
        stop,
        target_fps: goal.target_fps,
    })
}

/// Which hardware figure a Pareto comparison uses as its cost axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostAxis {
    /// Throughput in kilo-frames per second; higher is better.
    Kfps,
    /// LUT usage; lower is better.
    Luts,
}

impl CostAxis {
    pub fn orientation(self) -> CostOrientation {
        match self {
            CostAxis::Kfps => CostOrientation::HigherIsBetter,
            CostAxis::Luts => CostOrientation::LowerIsBetter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostOrientation {
    HigherIsBetter,
    LowerIsBetter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoRecord {
    pub label: String,
    /// Classification error as a fraction in [0, 1]; lower is better.
    pub error_rate: f64,
    pub hw_cost: f64,
}

/// Indices (ascending) of the records no other record dominates. A record
/// dominates another when it is at least as good on both axes and strictly
/// better on one; exact duplicates therefore survive together.
pub fn pareto_front(records: &[ParetoRecord], orientation: CostOrientation) -> Result<Vec<usize>> {
    for r in records {
        if !r.error_rate.is_finite() || !r.hw_cost.is_finite() {
            return Err(Error::NanInput);
        }
    }
    // Map cost onto "lower is better" so one sweep covers both orientations.
    let key = |i: usize| match orientation {
        CostOrientation::LowerIsBetter => records[i].hw_cost,
        CostOrientation::HigherIsBetter => -records[i].hw_cost,
    };
    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.sort_by(|&a, &b| {
        records[a]
            .error_rate
            .total_cmp(&records[b].error_rate)
            .then(key(a).total_cmp(&key(b)))
    });
    let mut front = Vec::new();
    let mut best_prev = f64::INFINITY;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j < idx.len() && records[idx[j]].error_rate == records[idx[i]].error_rate {
            j += 1;
        }
        // Within one error level only the cheapest records can survive, and
        // only if no lower-error record was at least as cheap.
        let group_min = key(idx[i]);
        if group_min < best_prev {
            front.extend(idx[i..j].iter().copied().filter(|&k| key(k) == group_min));
        }
        best_prev = best_prev.min(group_min);
        i = j;
    }
    front.sort_unstable();
    Ok(front)
}

/// A published accuracy measurement for one precision variant, optionally
/// paired with hardware estimates so it can sit on a cost axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccuracyRecord {
    pub label: String,
    /// Top-1 error in percent.
    pub top1: f64,
    /// Top-5 error in percent.
    pub top5: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kfps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub luts: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AccuracyFile {
    records: Vec<AccuracyRecord>,
}

pub fn parse_accuracy(text: &str) -> Result<Vec<AccuracyRecord>> {
    let file: AccuracyFile =
        toml::from_str(text).map_err(|e| Error::parse("accuracy records", e.to_string()))?;
    if file.records.is_empty() {
        return Err(Error::parse("accuracy records", "no records".to_string()));
    }
    for r in &file.records {
        for (name, v) in [("top1", r.top1), ("top5", r.top5)] {
            if !(v.is_finite() && (0.0..=100.0).contains(&v)) {
                return Err(Error::parse(
                    "accuracy records",
                    format!("record '{}': {name} {v} outside 0..100", r.label),
                ));
            }
        }
    }
    Ok(file.records)
}

pub fn load_accuracy(path: &Path) -> Result<Vec<AccuracyRecord>> {
    parse_accuracy(&std::fs::read_to_string(path)?)
}

/// Project accuracy records onto (top-1 error fraction, chosen cost axis).
/// Records missing the requested estimate are an error, not silently dropped.
pub fn records_to_pareto(records: &[AccuracyRecord], axis: CostAxis) -> Result<Vec<ParetoRecord>> {
    records
        .iter()
        .map(|r| {
            let cost = match axis {
                CostAxis::Kfps => r.kfps,
                CostAxis::Luts => r.luts,
            };
            let hw_cost = cost.ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "record '{}' has no {} estimate",
                    r.label,
                    match axis {
                        CostAxis::Kfps => "kfps",
                        CostAxis::Luts => "lut",
                    }
                ))
            })?;
            Ok(ParetoRecord {
                label: r.label.clone(),
                error_rate: r.top1 / 100.0,
                hw_cost,
            })
        })
        .collect()
}
