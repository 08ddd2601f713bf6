//! Command-line front end for the streamfold library.
//!
//! One subcommand per analysis: `estimate` prices a folding on a device,
//! `explore` searches for one, `simulate` runs the cycle-level pipeline on
//! real tensors, `validate` holds the simulator against the analytic model,
//! `roofline` tabulates attainable performance curves, and `pareto` filters
//! accuracy/cost records down to the non-dominated set.
//!
//! Exit codes are stable for scripting: 0 success, 1 input error,
//! 2 infeasible design or validation over tolerance.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use streamfold::{
    accumulator_bound, affine_thresholds, estimate_network, estimate_perf, explore,
    load_accuracy, pareto_front, parse_threshold_sets_opt, quantize_activation,
    records_to_pareto, reference_network, render_simulation, roofline, simulate_network,
    tensor_codes, ActivationClip, CostAxis, CostTable, DepthRule, DeviceModel, Encoding,
    EstimateReport, ExploreGoal, ExploreReport, FoldingConfig, LayerCheck, NetworkTopology,
    ParetoReport, QTensor, QuantSpec, RooflineReport, SimOptions, ThresholdSet, ValidateReport,
    WeightEncoding,
};

#[derive(Parser)]
#[command(
    name = "streamfold",
    version,
    about = "Design-space exploration for streaming QNN accelerators on FPGAs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Price a folding: per-layer BRAM/LUT usage, intervals, throughput
    Estimate(EstimateArgs),
    /// Search folding space for the fastest design that fits the device
    Explore(ExploreArgs),
    /// Run the cycle-level pipeline on weight and image tensors
    Simulate(SimulateArgs),
    /// Hold simulated cycle counts and outputs against the analytic model
    Validate(ValidateArgs),
    /// Tabulate attainable ops/s versus arithmetic intensity per precision
    Roofline(RooflineArgs),
    /// Filter accuracy/cost records down to the non-dominated front
    Pareto(ParetoArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Aligned plain text
    Text,
    /// JSON, re-parseable into the same report
    Machine,
}

/// Weight-memory depth accounting mode.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Eq2Mode {
    /// Scale the per-PE word count by the block width before dividing by the
    /// block depth (over-counts narrow memories)
    Faithful,
    /// Divide the per-PE word count by the block depth directly
    Corrected,
}

impl Eq2Mode {
    fn rule(self) -> DepthRule {
        match self {
            Eq2Mode::Faithful => DepthRule::ScaledByWidth,
            Eq2Mode::Corrected => DepthRule::PlainWords,
        }
    }
}

/// How the activation quantizer treats out-of-range pre-activations.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReluMode {
    /// Clamp into [0, 1], then pick the nearest level
    Standard,
    /// Emit level 0 for anything outside [0, 1]
    PaperLiteral,
}

impl ReluMode {
    fn clip(self) -> ActivationClip {
        match self {
            ReluMode::Standard => ActivationClip::Saturate,
            ReluMode::PaperLiteral => ActivationClip::ZeroOutside,
        }
    }
}

#[derive(Args)]
struct OutputOpts {
    /// Report format
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report to this file instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Network description (TOML)
    #[arg(long)]
    topology: PathBuf,
    /// Device budgets (TOML)
    #[arg(long)]
    device: PathBuf,
    /// LUTs-per-MAC table; defaults to the built-in a * max(w, 2) rule
    #[arg(long)]
    cost_table: Option<PathBuf>,
    /// Folding to price; defaults to pe = simd = 1 everywhere, m = 1
    #[arg(long)]
    folding: Option<PathBuf>,
    /// Override the folding's image-lane count
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    m: Option<u32>,
    /// Clock frequency in MHz
    #[arg(long)]
    clock_mhz: f64,
    /// Fraction of each budget a design may use
    #[arg(long, default_value_t = 0.8)]
    utilization_cap: f64,
    #[arg(long, value_enum, default_value_t = Eq2Mode::Faithful)]
    eq2_mode: Eq2Mode,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args)]
struct ExploreArgs {
    /// Network description (TOML)
    #[arg(long)]
    topology: PathBuf,
    /// Device budgets (TOML)
    #[arg(long)]
    device: PathBuf,
    /// LUTs-per-MAC table; defaults to the built-in a * max(w, 2) rule
    #[arg(long)]
    cost_table: Option<PathBuf>,
    /// Clock frequency in MHz
    #[arg(long)]
    clock_mhz: f64,
    /// Fraction of each budget a design may use
    #[arg(long, default_value_t = 0.8)]
    utilization_cap: f64,
    #[arg(long, value_enum, default_value_t = Eq2Mode::Faithful)]
    eq2_mode: Eq2Mode,
    /// Stop as soon as the design reaches this frame rate
    #[arg(long)]
    target_fps: Option<f64>,
    /// Largest image-lane count the search may widen to
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    max_m: u32,
    /// Also write the discovered folding as TOML, ready for `simulate`
    #[arg(long)]
    emit_folding: Option<PathBuf>,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args)]
struct SimulateArgs {
    /// Network description (TOML)
    #[arg(long)]
    topology: PathBuf,
    /// Folding to run; defaults to pe = simd = 1 everywhere, m = 1
    #[arg(long)]
    folding: Option<PathBuf>,
    /// Directory holding layer0.qtns, layer1.qtns, ... (one tensor per
    /// weighted layer, in network order)
    #[arg(long)]
    weights: PathBuf,
    /// Threshold file; layers it does not mention emit raw accumulators,
    /// which only the final layer may do
    #[arg(long)]
    thresholds: Option<PathBuf>,
    /// Input image tensor, shared by every lane
    #[arg(long)]
    input: PathBuf,
    /// Window-group queue capacity (default: one full window)
    #[arg(long)]
    group_queue: Option<usize>,
    /// Inter-layer pixel queue capacity (default: one output row)
    #[arg(long)]
    pixel_queue: Option<usize>,
    /// Abort if the pipeline has not drained after this many cycles
    #[arg(long)]
    cycle_limit: Option<u64>,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args)]
struct ValidateArgs {
    /// Network description (TOML)
    #[arg(long)]
    topology: PathBuf,
    /// Folding to check; defaults to pe = simd = 1 everywhere, m = 1
    #[arg(long)]
    folding: Option<PathBuf>,
    /// Clock frequency in MHz, used for the throughput comparison line
    #[arg(long, default_value_t = 250.0)]
    clock_mhz: f64,
    /// Largest tolerated batch-interval excess over the analytic bottleneck,
    /// in percent
    #[arg(long, default_value_t = 15.0)]
    tolerance: f64,
    #[arg(long, value_enum, default_value_t = ReluMode::Standard)]
    relu_mode: ReluMode,
    /// Seed for the synthesized weights and thresholds
    #[arg(long, default_value_t = 0x51c2)]
    seed: u64,
    /// Window-group queue capacity (default: one full window)
    #[arg(long)]
    group_queue: Option<usize>,
    /// Inter-layer pixel queue capacity (default: one output row)
    #[arg(long)]
    pixel_queue: Option<usize>,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args)]
struct RooflineArgs {
    /// Device budgets (TOML)
    #[arg(long)]
    device: PathBuf,
    /// LUTs-per-MAC table; defaults to the built-in a * max(w, 2) rule
    #[arg(long)]
    cost_table: Option<PathBuf>,
    /// Clock frequency in MHz
    #[arg(long)]
    clock_mhz: f64,
    /// Fraction of the LUT budget the compute peak may use
    #[arg(long, default_value_t = 0.8)]
    utilization_cap: f64,
    /// Comma-separated weight/activation bit pairs, e.g. 1/2 for 1-bit
    /// weights with 2-bit activations
    #[arg(long, default_value = "1/1,1/2,2/2,4/4,8/8")]
    precisions: String,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args)]
struct ParetoArgs {
    /// Accuracy/cost records (TOML)
    #[arg(long)]
    records: PathBuf,
    /// Hardware figure to place on the cost axis
    #[arg(long, value_enum, default_value_t = Axis::Kfps)]
    cost_axis: Axis,
    /// Also write the table as CSV to this file
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Axis {
    /// Throughput in kilo-frames per second (higher is better)
    Kfps,
    /// LUT usage (lower is better)
    Luts,
}

impl Axis {
    fn cost_axis(self) -> CostAxis {
        match self {
            Axis::Kfps => CostAxis::Kfps,
            Axis::Luts => CostAxis::Luts,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Axis::Kfps => "kfps",
            Axis::Luts => "luts",
        }
    }
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    msg: String,
}

fn input_error(e: impl Display) -> Failure {
    Failure {
        code: 1,
        msg: e.to_string(),
    }
}

fn infeasible(e: impl Display) -> Failure {
    Failure {
        code: 2,
        msg: e.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successes; anything else is an input error.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Estimate(a) => cmd_estimate(a),
        Cmd::Explore(a) => cmd_explore(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Validate(a) => cmd_validate(a),
        Cmd::Roofline(a) => cmd_roofline(a),
        Cmd::Pareto(a) => cmd_pareto(a),
    }
}

fn load_topology(path: &Path) -> Result<NetworkTopology, Failure> {
    NetworkTopology::load(path).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn load_device(path: &Path) -> Result<DeviceModel, Failure> {
    DeviceModel::load(path).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn load_cost_table(path: &Option<PathBuf>) -> Result<CostTable, Failure> {
    match path {
        Some(p) => CostTable::load(p).map_err(|e| input_error(format!("{}: {e}", p.display()))),
        None => Ok(CostTable::default_rule_only()),
    }
}

fn load_folding(
    path: &Option<PathBuf>,
    topo: &NetworkTopology,
) -> Result<FoldingConfig, Failure> {
    let fold = match path {
        Some(p) => {
            FoldingConfig::load(p).map_err(|e| input_error(format!("{}: {e}", p.display())))?
        }
        None => FoldingConfig::minimal(topo),
    };
    fold.validate(topo).map_err(input_error)?;
    Ok(fold)
}

fn clock_hz(mhz: f64) -> Result<f64, Failure> {
    if !(mhz.is_finite() && mhz > 0.0) {
        return Err(input_error(format!("clock {mhz} MHz must be positive")));
    }
    Ok(mhz * 1e6)
}

fn check_cap(cap: f64) -> Result<f64, Failure> {
    if !(cap.is_finite() && cap > 0.0 && cap <= 1.0) {
        return Err(input_error(format!(
            "utilization cap {cap} outside (0, 1]"
        )));
    }
    Ok(cap)
}

/// Renders `report` per the output options and writes it to the chosen sink.
fn emit<R: serde::Serialize>(
    opts: &OutputOpts,
    report: &R,
    text: impl FnOnce(&R) -> String,
) -> Result<(), Failure> {
    let body = match opts.format {
        Format::Text => text(report),
        Format::Machine => {
            let mut json = serde_json::to_string_pretty(report).map_err(input_error)?;
            json.push('\n');
            json
        }
    };
    match &opts.out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| input_error(format!("{}: {e}", path.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn cmd_estimate(a: EstimateArgs) -> Result<(), Failure> {
    let topo = load_topology(&a.topology)?;
    let dev = load_device(&a.device)?;
    let table = load_cost_table(&a.cost_table)?;
    let mut fold = load_folding(&a.folding, &topo)?;
    if let Some(m) = a.m {
        fold.m = m;
    }
    let clock = clock_hz(a.clock_mhz)?;
    let cap = check_cap(a.utilization_cap)?;
    let resources =
        estimate_network(&topo, &fold, &dev, &table, a.eq2_mode.rule()).map_err(input_error)?;
    let perf = estimate_perf(&topo, &fold, clock).map_err(input_error)?;
    let verdict = resources.check_budget(&dev, cap);
    let report = EstimateReport {
        topology: topo.name.clone(),
        device: dev.name.clone(),
        folding: fold,
        resources,
        perf,
    };
    emit(&a.output, &report, EstimateReport::to_text)?;
    verdict.map_err(infeasible)
}

fn cmd_explore(a: ExploreArgs) -> Result<(), Failure> {
    let topo = load_topology(&a.topology)?;
    let dev = load_device(&a.device)?;
    let table = load_cost_table(&a.cost_table)?;
    let goal = ExploreGoal {
        clock_hz: clock_hz(a.clock_mhz)?,
        utilization_cap: check_cap(a.utilization_cap)?,
        target_fps: a.target_fps,
        max_m: a.max_m,
    };
    let result = explore(&topo, &dev, &table, &goal, a.eq2_mode.rule()).map_err(|e| match e {
        streamfold::Error::DeviceUnsuitable { .. } => infeasible(e),
        other => input_error(other),
    })?;
    if let Some(path) = &a.emit_folding {
        std::fs::write(path, result.folding.to_toml())
            .map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    }
    let report = ExploreReport {
        topology: topo.name.clone(),
        device: dev.name.clone(),
        result,
    };
    emit(&a.output, &report, ExploreReport::to_text)
}

fn load_weight_tensors(dir: &Path, topo: &NetworkTopology) -> Result<Vec<QTensor>, Failure> {
    (0..topo.num_weighted())
        .map(|pos| {
            let path = dir.join(format!("layer{pos}.qtns"));
            QTensor::load(&path).map_err(|e| input_error(format!("{}: {e}", path.display())))
        })
        .collect()
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), Failure> {
    let topo = load_topology(&a.topology)?;
    let fold = load_folding(&a.folding, &topo)?;
    let weights = load_weight_tensors(&a.weights, &topo)?;
    let channels: Vec<u32> = topo.weighted_layers().map(|(_, l)| l.c_out).collect();
    let thresholds: Vec<Option<ThresholdSet>> = match &a.thresholds {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| input_error(format!("{}: {e}", path.display())))?;
            parse_threshold_sets_opt(&text, &channels).map_err(input_error)?
        }
        None => vec![None; channels.len()],
    };
    let image =
        QTensor::load(&a.input).map_err(|e| input_error(format!("{}: {e}", a.input.display())))?;
    let opts = SimOptions {
        group_queue_capacity: a.group_queue,
        pixel_queue_capacity: a.pixel_queue,
        cycle_limit: a.cycle_limit,
    };
    let report = simulate_network(
        &topo,
        &fold,
        &weights,
        &thresholds,
        std::slice::from_ref(&image),
        &opts,
    )
    .map_err(input_error)?;
    emit(&a.output, &report, |r| render_simulation(r))
}

/// One weighted layer's synthesized tensors plus the affine parameters its
/// thresholds were built from, so they can be cross-checked later.
struct SynthLayer {
    weights: QTensor,
    thresholds: ThresholdSet,
    /// Quantizer the thresholds implement (the next layer's input precision).
    spec: QuantSpec,
    /// Per-output-channel (scale, bias) of the pre-activation.
    params: Vec<(f64, f64)>,
    /// Dot-product width, for accumulator range bounds.
    simd_total: u64,
    w_bits: u8,
}

/// Deterministic weights and thresholds for a topology, for model-vs-simulator
/// checks without real trained tensors.
fn synthesize(topo: &NetworkTopology, seed: u64) -> Result<Vec<SynthLayer>, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weighted: Vec<_> = topo.weighted_layers().collect();
    let mut out = Vec::with_capacity(weighted.len());
    for (pos, &(_, layer)) in weighted.iter().enumerate() {
        let dims = [layer.c_out, layer.c, layer.k, layer.k];
        let len = dims.iter().product::<u32>() as usize;
        let codes: Vec<u64> = (0..len)
            .map(|_| rng.gen_range(0..(1u64 << layer.w_bits)))
            .collect();
        let enc = if layer.w_bits == 1 {
            Encoding::Bipolar
        } else {
            Encoding::TwosComplement
        };
        let weights =
            QTensor::from_codes(&dims, layer.w_bits, enc, &codes).map_err(input_error)?;

        // Output codes must be what the next layer declares it consumes.
        let a_out = weighted
            .get(pos + 1)
            .map_or(layer.a_bits, |&(_, next)| next.a_bits);
        let spec = QuantSpec::new(a_out).map_err(input_error)?;
        let simd_total = u64::from(layer.k) * u64::from(layer.k) * u64::from(layer.c);
        let params: Vec<(f64, f64)> = (0..layer.c_out)
            .map(|_| {
                (
                    rng.gen_range(0.3..1.2) / simd_total as f64,
                    rng.gen_range(-0.2..0.4),
                )
            })
            .collect();
        let thresholds = affine_thresholds(&spec, &params, simd_total).map_err(input_error)?;
        out.push(SynthLayer {
            weights,
            thresholds,
            spec,
            params,
            simd_total,
            w_bits: layer.w_bits,
        });
    }
    Ok(out)
}

fn cmd_validate(a: ValidateArgs) -> Result<(), Failure> {
    let topo = load_topology(&a.topology)?;
    let fold = load_folding(&a.folding, &topo)?;
    let clock = clock_hz(a.clock_mhz)?;
    if !(a.tolerance.is_finite() && a.tolerance >= 0.0) {
        return Err(input_error(format!(
            "tolerance {} must be non-negative",
            a.tolerance
        )));
    }
    let synth = synthesize(&topo, a.seed)?;

    // Quantizer cross-check: the synthesized thresholds must classify sampled
    // accumulators exactly like the real-valued quantizer. The literal clip
    // rule zeroes above-range values, which monotone integer thresholds
    // cannot express, so under it disagreements are reported rather than
    // failed.
    let mut agree = 0u64;
    let mut checked = 0u64;
    for layer in &synth {
        let enc = WeightEncoding::new(layer.w_bits).map_err(input_error)?;
        let bound = accumulator_bound(layer.simd_total, &layer.spec, &enc);
        let step = (2 * bound / 200).max(1);
        for (ch, &(scale, bias)) in layer.params.iter().enumerate() {
            let mut acc = -bound;
            while acc <= bound {
                let direct = quantize_activation(
                    scale * acc as f64 + bias,
                    &layer.spec,
                    a.relu_mode.clip(),
                )
                .map_err(input_error)?;
                if layer.thresholds.apply(ch, acc) == direct {
                    agree += 1;
                }
                checked += 1;
                acc += step;
            }
        }
    }

    let opts = SimOptions {
        group_queue_capacity: a.group_queue,
        pixel_queue_capacity: a.pixel_queue,
        cycle_limit: None,
    };
    let image = synth_image(&topo, a.seed);
    let weights: Vec<QTensor> = synth.iter().map(|l| l.weights.clone()).collect();
    let thresholds: Vec<Option<ThresholdSet>> =
        synth.iter().map(|l| Some(l.thresholds.clone())).collect();
    let sim = simulate_network(
        &topo,
        &fold,
        &weights,
        &thresholds,
        std::slice::from_ref(&image),
        &opts,
    )
    .map_err(input_error)?;

    let refs: Vec<Option<&ThresholdSet>> = synth.iter().map(|l| Some(&l.thresholds)).collect();
    let expect =
        reference_network(&topo, &weights, &refs, &tensor_codes(&image)).map_err(input_error)?;
    let outputs_match = sim.outputs.iter().all(|lane| lane.values == expect);

    let perf = estimate_perf(&topo, &fold, clock).map_err(input_error)?;
    let layers: Vec<LayerCheck> = perf
        .per_layer_ii
        .iter()
        .zip(&sim.layers)
        .map(|(p, s)| LayerCheck {
            layer: p.layer,
            predicted_ii: p.ii,
            busy: s.mvtu.busy,
            stall: s.mvtu.stall,
            busy_matches: s.mvtu.busy == p.ii,
        })
        .collect();
    let excess =
        100.0 * (sim.cycles_per_batch as f64 - perf.max_ii as f64) / perf.max_ii as f64;
    let quantizer_ok = a.relu_mode == ReluMode::PaperLiteral || agree == checked;
    let report = ValidateReport {
        max_ii: perf.max_ii,
        cycles_per_batch: sim.cycles_per_batch,
        interval_excess_pct: excess,
        tolerance_pct: a.tolerance,
        outputs_match,
        passed: outputs_match
            && quantizer_ok
            && layers.iter().all(|l| l.busy_matches)
            && excess <= a.tolerance + 1e-9,
        layers,
    };
    let mode = match a.relu_mode {
        ReluMode::Standard => "standard",
        ReluMode::PaperLiteral => "paper-literal",
    };
    emit(&a.output, &report, |r| {
        let mut text = r.to_text();
        text.push_str(&format!(
            "quantizer agreement ({mode} clip): {agree}/{checked}\n"
        ));
        let sim_fps = fold.m as f64 * clock / sim.cycles_per_batch as f64;
        text.push_str(&format!(
            "throughput at {:.1} MHz: predicted {:.1} fps, simulated {:.1} fps\n",
            clock / 1e6,
            perf.fps,
            sim_fps
        ));
        text
    })?;
    if report.passed {
        Ok(())
    } else {
        Err(infeasible(format!(
            "validation failed: interval excess {:.2}% (tolerance {:.0}%), outputs {}",
            report.interval_excess_pct,
            report.tolerance_pct,
            if report.outputs_match {
                "match"
            } else {
                "MISMATCH"
            }
        )))
    }
}

fn synth_image(topo: &NetworkTopology, seed: u64) -> QTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1000);
    let dims = [topo.input.height, topo.input.width, topo.input.channels];
    let len = dims.iter().product::<u32>() as usize;
    let codes: Vec<u64> = (0..len)
        .map(|_| rng.gen_range(0..(1u64 << topo.input.bits)))
        .collect();
    QTensor::from_codes(&dims, topo.input.bits, Encoding::UnsignedLevel, &codes)
        .expect("image dims and codes are in range by construction")
}

fn parse_precisions(text: &str) -> Result<Vec<(u8, u8)>, Failure> {
    text.split(',')
        .map(|pair| {
            let (w, a) = pair
                .trim()
                .split_once('/')
                .ok_or_else(|| input_error(format!("precision '{pair}' is not w/a")))?;
            let w: u8 = w
                .parse()
                .map_err(|_| input_error(format!("weight bits '{w}' not a number")))?;
            let a: u8 = a
                .parse()
                .map_err(|_| input_error(format!("activation bits '{a}' not a number")))?;
            Ok((a, w))
        })
        .collect()
}

fn cmd_roofline(a: RooflineArgs) -> Result<(), Failure> {
    let dev = load_device(&a.device)?;
    let table = load_cost_table(&a.cost_table)?;
    let clock = clock_hz(a.clock_mhz)?;
    let cap = check_cap(a.utilization_cap)?;
    let precisions = parse_precisions(&a.precisions)?;
    let curves = roofline(&dev, &table, &precisions, clock, cap).map_err(input_error)?;
    let report = RooflineReport {
        device: dev.name.clone(),
        clock_hz: clock,
        utilization_cap: cap,
        curves,
    };
    emit(&a.output, &report, RooflineReport::to_text)
}

fn cmd_pareto(a: ParetoArgs) -> Result<(), Failure> {
    let records = load_accuracy(&a.records)
        .map_err(|e| input_error(format!("{}: {e}", a.records.display())))?;
    let projected = records_to_pareto(&records, a.cost_axis.cost_axis()).map_err(input_error)?;
    let front =
        pareto_front(&projected, a.cost_axis.cost_axis().orientation()).map_err(input_error)?;
    let report = ParetoReport {
        axis: a.cost_axis.name().to_string(),
        records: projected,
        front,
    };
    if let Some(path) = &a.csv {
        std::fs::write(path, report.to_csv())
            .map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    }
    emit(&a.output, &report, ParetoReport::to_text)
}
