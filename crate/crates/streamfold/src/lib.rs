//! Design-space exploration for streaming dataflow accelerators running
//! quantized neural networks on FPGAs.
//!
//! The crate models a pipeline of per-layer compute stages, one per network
//! layer, where a sliding window unit feeds a matrix of MAC lanes and
//! everything communicates through on-chip streams. On top of that
//! architecture it provides:
//!
//! * analytic BRAM and LUT cost models ([`costmodel`]),
//! * throughput and latency prediction plus rooflines ([`perfmodel`]),
//! * a greedy folding search under device budgets and Pareto utilities
//!   ([`explorer`]),
//! * quantized arithmetic: level-coded activations, bipolar and fixed-point
//!   weights, and threshold-based activation functions ([`quant`]),
//! * a bit-accurate cycle-level simulator with independent reference
//!   implementations to check it against ([`simulator`]),
//! * serializable result containers with plain-text rendering ([`report`]).
//!
//! File formats are TOML throughout, except weight and image tensors, which
//! use a small packed binary format (see [`quant::QTensor`]).

pub mod costmodel;
pub mod error;
pub mod explorer;
pub mod perfmodel;
pub mod quant;
pub mod report;
pub mod simulator;
pub mod topology;

pub use costmodel::{
    bram_swu, bram_weights, estimate_network, lut_cost, within_cap, CostTable, DepthRule,
    DeviceModel, FoldingConfig, LayerFolding, LayerResources, ResourceEstimate,
};
pub use error::{Error, Result};
pub use explorer::{
    candidate_moves, explore, load_accuracy, parse_accuracy, pareto_front, records_to_pareto,
    AccuracyRecord, CostAxis, CostOrientation, ExploreGoal, ExploreResult, ExploreStep, MoveKind,
    ParetoRecord, StopReason,
};
pub use perfmodel::{
    compute_bound_fps, compute_peak, estimate_perf, layer_ii, roofline, LayerIi, PerfEstimate,
    RooflineCurve, RooflinePoint,
};
pub use quant::{
    accumulator_bound, affine_thresholds, build_thresholds, mac_dot, mac_dot_binary, pack_bits,
    parse_threshold_sets, parse_threshold_sets_opt, quantize_activation, render_threshold_sets,
    ActivationClip, Encoding,
    QTensor, QuantSpec, ThresholdSet, WeightEncoding, WeightMode,
};
pub use report::{
    render_simulation, EstimateReport, ExploreReport, LayerCheck, ParetoReport, RooflineReport,
    ValidateReport,
};
pub use simulator::oracle::{reference_conv, reference_network, reference_pool};
pub use simulator::{
    simulate_layer, simulate_network, tensor_codes, LaneOutput, LayerCycleReport, SimOptions,
    SimReport, StageCounters,
};
pub use topology::{InputSpec, LayerKind, LayerSpec, NetworkTopology};
