//! Result containers that serialize to JSON for scripting and render to
//! aligned plain text for terminals. Every report is a plain data struct;
//! building one does no computation.

use serde::{Deserialize, Serialize};

use crate::costmodel::{FoldingConfig, ResourceEstimate};
use crate::explorer::{ExploreResult, MoveKind, ParetoRecord, StopReason};
use crate::perfmodel::{PerfEstimate, RooflineCurve};
use crate::simulator::SimReport;

fn pct(frac: f64) -> String {
    format!("{:.1}%", 100.0 * frac)
}

fn fps_str(fps: f64) -> String {
    if fps >= 1000.0 {
        format!("{:.2} kfps", fps / 1000.0)
    } else {
        format!("{fps:.1} fps")
    }
}

fn latency_str(s: f64) -> String {
    if s < 1e-3 {
        format!("{:.1} us", s * 1e6)
    } else if s < 1.0 {
        format!("{:.2} ms", s * 1e3)
    } else {
        format!("{s:.3} s")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub topology: String,
    pub device: String,
    pub folding: FoldingConfig,
    pub resources: ResourceEstimate,
    pub perf: PerfEstimate,
}

impl EstimateReport {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "network {} on {} (m = {})\n",
            self.topology, self.device, self.folding.m
        );
        out.push_str("layer    pe  simd   bram_swu  bram_w     luts           ii\n");
        for (i, res) in self.resources.per_layer.iter().enumerate() {
            let lf = self.folding.per_layer[i];
            let ii = self.perf.per_layer_ii[i].ii;
            let mark = if res.layer == self.perf.bottleneck {
                "*"
            } else {
                " "
            };
            out.push_str(&format!(
                "{mark}{:>4} {:>5} {:>5} {:>10} {:>7} {:>8} {:>12}\n",
                res.layer, lf.pe, lf.simd, res.bram_swu, res.bram_weights, res.luts, ii
            ));
        }
        out.push_str(&format!(
            "totals: bram {} ({}), luts {} ({})\n",
            self.resources.bram_total,
            pct(self.resources.bram_fraction),
            self.resources.lut_total,
            pct(self.resources.lut_fraction),
        ));
        out.push_str(&format!(
            "bottleneck layer {}: ii {}, {} at {:.1} MHz, latency {}\n",
            self.perf.bottleneck,
            self.perf.max_ii,
            fps_str(self.perf.fps),
            self.perf.clock_hz / 1e6,
            latency_str(self.perf.latency_s),
        ));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreReport {
    pub topology: String,
    pub device: String,
    pub result: ExploreResult,
}

impl ExploreReport {
    pub fn to_text(&self) -> String {
        let r = &self.result;
        let mut out = format!(
            "explored {} on {}: {} steps\n",
            self.topology,
            self.device,
            r.steps.len()
        );
        for (i, s) in r.steps.iter().enumerate() {
            let what = match s.kind {
                MoveKind::Simd => format!(
                    "layer {} simd -> {}",
                    s.layer.unwrap_or_default(),
                    s.simd.unwrap_or_default()
                ),
                MoveKind::Pe => format!(
                    "layer {} pe -> {}",
                    s.layer.unwrap_or_default(),
                    s.pe.unwrap_or_default()
                ),
                MoveKind::WidenBatch => format!("m -> {}", s.m),
            };
            out.push_str(&format!(
                "{:>4}: {what:<24} ii {:>10}  {:>14}  luts {:>9}  bram {}\n",
                i + 1,
                s.max_ii,
                fps_str(s.fps),
                s.lut_total,
                s.bram_total,
            ));
        }
        let stop = match r.stop {
            StopReason::TargetReached => "target reached",
            StopReason::NoFeasibleMove => "no feasible move left",
        };
        out.push_str(&format!("stopped: {stop}\n"));
        if let (Some(t), Some(met)) = (r.target_fps, r.target_met()) {
            out.push_str(&format!(
                "target {}: {}\n",
                fps_str(t),
                if met { "met" } else { "not met" }
            ));
        }
        out.push_str(&format!(
            "final: m = {}, {}, luts {} ({}), bram {} ({})\n",
            r.folding.m,
            fps_str(r.perf.fps),
            r.resources.lut_total,
            pct(r.resources.lut_fraction),
            r.resources.bram_total,
            pct(r.resources.bram_fraction),
        ));
        for (pos, lf) in r.folding.per_layer.iter().enumerate() {
            out.push_str(&format!(
                "  layer {}: pe {} simd {} (ii {})\n",
                r.perf.per_layer_ii[pos].layer, lf.pe, lf.simd, r.perf.per_layer_ii[pos].ii
            ));
        }
        out
    }
}

pub fn render_simulation(r: &SimReport) -> String {
    let mut out = format!(
        "simulated {} lane(s): {} cycles total, first output at {}\n",
        r.m,
        r.total_cycles,
        r.first_output_cycle
            .map_or_else(|| "never".to_string(), |c| format!("cycle {c}")),
    );
    out.push_str(&format!("cycles per batch: {}\n", r.cycles_per_batch));
    out.push_str("layer     swu busy/stall      mvtu busy/stall   pooled   peak row bits   weight rows\n");
    for l in &r.layers {
        out.push_str(&format!(
            "{:>5} {:>10}/{:<8} {:>10}/{:<8} {:>7} {:>13} {:>13}\n",
            l.layer,
            l.swu.busy,
            l.swu.stall,
            l.mvtu.busy,
            l.mvtu.stall,
            l.pool.map_or_else(|| "-".into(), |p| p.busy.to_string()),
            l.swu_peak_bits,
            l.weight_rows_fetched,
        ));
    }
    let out_dims = r.outputs.first().map(|o| o.dims).unwrap_or([0; 3]);
    out.push_str(&format!(
        "outputs: {} lane(s) of {}x{}x{}\n",
        r.outputs.len(),
        out_dims[0],
        out_dims[1],
        out_dims[2]
    ));
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCheck {
    pub layer: usize,
    pub predicted_ii: u64,
    pub busy: u64,
    pub stall: u64,
    /// The matrix unit must be busy for exactly the predicted interval.
    pub busy_matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateReport {
    pub max_ii: u64,
    pub cycles_per_batch: u64,
    /// How far the measured batch interval sits above the predicted
    /// bottleneck, in percent.
    pub interval_excess_pct: f64,
    pub tolerance_pct: f64,
    pub outputs_match: bool,
    pub layers: Vec<LayerCheck>,
    pub passed: bool,
}

impl ValidateReport {
    pub fn to_text(&self) -> String {
        let mut out = String::from("layer   predicted ii         busy        stall  exact\n");
        for l in &self.layers {
            out.push_str(&format!(
                "{:>5} {:>14} {:>12} {:>12}  {}\n",
                l.layer,
                l.predicted_ii,
                l.busy,
                l.stall,
                if l.busy_matches { "yes" } else { "NO" }
            ));
        }
        out.push_str(&format!(
            "batch interval {} vs predicted {} (+{:.2}%, tolerance {:.0}%)\n",
            self.cycles_per_batch, self.max_ii, self.interval_excess_pct, self.tolerance_pct
        ));
        out.push_str(&format!(
            "outputs bit-exact against reference: {}\n",
            if self.outputs_match { "yes" } else { "NO" }
        ));
        out.push_str(if self.passed {
            "validation passed\n"
        } else {
            "validation FAILED\n"
        });
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RooflineReport {
    pub device: String,
    pub clock_hz: f64,
    pub utilization_cap: f64,
    pub curves: Vec<RooflineCurve>,
}

impl RooflineReport {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "roofline for {} at {:.1} MHz (cap {})\n",
            self.device,
            self.clock_hz / 1e6,
            pct(self.utilization_cap)
        );
        out.push_str("w/a     compute peak        ridge point\n");
        for c in &self.curves {
            out.push_str(&format!(
                "{:<6} {:>10.3} Gop/s {:>12.2} op/byte\n",
                c.label(),
                c.compute_peak / 1e9,
                c.ridge
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoReport {
    /// Which hardware estimate sits on the cost axis: "kfps" or "luts".
    pub axis: String,
    pub records: Vec<ParetoRecord>,
    /// Indices into `records` on the front, ascending.
    pub front: Vec<usize>,
}

impl ParetoReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("pareto front over (top-1 error, {})\n", self.axis);
        out.push_str("      label        error         cost  on front\n");
        for (i, r) in self.records.iter().enumerate() {
            out.push_str(&format!(
                "{:>11} {:>12.4} {:>12.4}  {}\n",
                r.label,
                r.error_rate,
                r.hw_cost,
                if self.front.contains(&i) { "*" } else { "" }
            ));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,error_rate,cost,on_front\n");
        for (i, r) in self.records.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.label,
                r.error_rate,
                r.hw_cost,
                self.front.contains(&i)
            ));
        }
        out
    }
}
