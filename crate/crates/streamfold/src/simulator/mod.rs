//! Cycle-level simulation of the streaming pipeline.
//!
//! Every weighted layer becomes a window generator feeding a matrix unit
//! through a bounded queue, with an optional fused max-pool on the output;
//! layers hand pixels to each other through bounded queues as well. One
//! source pixel enters per cycle and a sink drains the last layer without
//! backpressure. Stages tick downstream-first, so anything pushed in cycle
//! `t` is consumable in cycle `t + 1`. The run produces both bit-exact
//! outputs (checked against the plain references in [`oracle`]) and per-stage
//! busy/stall counts that the analytic throughput model can be held against.

pub mod oracle;

mod mvtu;
mod pool;
mod swu;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::costmodel::{FoldingConfig, LayerFolding};
use crate::error::{Error, Result};
use crate::perfmodel::layer_ii;
use crate::quant::{Encoding, QTensor, ThresholdSet};
use crate::topology::{InputSpec, LayerKind, LayerSpec, NetworkTopology};

use mvtu::MatrixUnit;
use pool::PoolWindow;
use swu::{EmitOutcome, SlidingWindow};

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    /// Capacity of each window-group queue; default is one full window so the
    /// generator can run ahead while the matrix unit replays.
    pub group_queue_capacity: Option<usize>,
    /// Capacity of each pixel queue between layers; default is one row of the
    /// producing layer's output.
    pub pixel_queue_capacity: Option<usize>,
    /// Abort if the pipeline has not drained after this many cycles; default
    /// is a generous multiple of the predicted work.
    pub cycle_limit: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounters {
    /// Cycles the stage did work.
    pub busy: u64,
    /// Cycles the stage wanted to work but could not, counted only once the
    /// stage has seen its first input (pipeline fill is not a stall).
    pub stall: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCycleReport {
    /// Topology index of the weighted layer.
    pub layer: usize,
    pub swu: StageCounters,
    pub mvtu: StageCounters,
    /// Present when a pooling layer is fused behind this one; `busy` counts
    /// emitted pixels and pooling itself never stalls.
    pub pool: Option<StageCounters>,
    /// Largest number of row-buffer bits resident at any point, across lanes.
    pub swu_peak_bits: u64,
    /// Weight rows pulled from storage; independent of the lane count.
    pub weight_rows_fetched: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaneOutput {
    pub dims: [u32; 3],
    /// Row-major `(y, x, c)` codes, or raw accumulators for an unthresholded
    /// final layer.
    pub values: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub m: u32,
    pub layers: Vec<LayerCycleReport>,
    pub outputs: Vec<LaneOutput>,
    pub total_cycles: u64,
    pub first_output_cycle: Option<u64>,
    /// Steady-state cycles between batches: busy + stall of the pace-setting
    /// matrix unit (the one with the most work; earliest on ties). Downstream
    /// units' activity windows include pipeline-fill skew from a single-frame
    /// run and would overstate the period.
    pub cycles_per_batch: u64,
}

/// All element codes of a tensor widened to `i64`.
pub fn tensor_codes(t: &QTensor) -> Vec<i64> {
    (0..t.len()).map(|i| t.get(i) as i64).collect()
}

struct Queue {
    items: VecDeque<Vec<i64>>,
    cap: usize,
}

impl Queue {
    fn new(cap: usize) -> Self {
        Queue {
            items: VecDeque::new(),
            cap: cap.max(1),
        }
    }

    fn can_push(&self) -> bool {
        self.items.len() < self.cap
    }

    fn push(&mut self, item: Vec<i64>) {
        debug_assert!(self.can_push());
        self.items.push_back(item);
    }

    fn pop(&mut self) -> Option<Vec<i64>> {
        self.items.pop_front()
    }

    fn has_item(&self) -> bool {
        !self.items.is_empty()
    }
}

struct LayerPipe {
    topo_idx: usize,
    swu: SlidingWindow,
    mvtu: MatrixUnit,
    pool: Option<PoolWindow>,
    group_q: Queue,
}

fn check_weights(layer: &LayerSpec, idx: usize, weights: &QTensor) -> Result<()> {
    let want = [layer.c_out, layer.c, layer.k, layer.k];
    if weights.dims() != want {
        return Err(Error::TensorMismatch(format!(
            "layer {idx}: weight dims {:?}, expected {:?}",
            weights.dims(),
            want
        )));
    }
    if weights.bits() != layer.w_bits {
        return Err(Error::TensorMismatch(format!(
            "layer {idx}: weight bits {}, expected {}",
            weights.bits(),
            layer.w_bits
        )));
    }
    let want_enc = if layer.w_bits == 1 {
        Encoding::Bipolar
    } else {
        Encoding::TwosComplement
    };
    if weights.encoding() != want_enc {
        return Err(Error::TensorMismatch(format!(
            "layer {idx}: weight encoding {:?}, expected {:?}",
            weights.encoding(),
            want_enc
        )));
    }
    Ok(())
}

pub fn simulate_network(
    topo: &NetworkTopology,
    fold: &FoldingConfig,
    weights: &[QTensor],
    thresholds: &[Option<ThresholdSet>],
    images: &[QTensor],
    opts: &SimOptions,
) -> Result<SimReport> {
    topo.validate()?;
    fold.validate(topo)?;
    let weighted: Vec<(usize, &LayerSpec)> = topo.weighted_layers().collect();
    let n_weighted = weighted.len();
    if weights.len() != n_weighted {
        return Err(Error::TensorMismatch(format!(
            "{} weight tensors for {} weighted layers",
            weights.len(),
            n_weighted
        )));
    }
    if thresholds.len() != n_weighted {
        return Err(Error::InvalidArgument(format!(
            "{} threshold entries for {} weighted layers",
            thresholds.len(),
            n_weighted
        )));
    }
    // Pools must ride behind a weighted layer; the pipeline has no
    // free-standing pooling stage.
    for (i, layer) in topo.layers.iter().enumerate() {
        if layer.kind == LayerKind::MaxPool {
            let prev_weighted = i > 0 && topo.layers[i - 1].kind.is_weighted();
            if !prev_weighted {
                return Err(Error::InvalidLayer {
                    layer: i,
                    reason: "pooling must directly follow a conv or fc layer".into(),
                });
            }
            if layer.pad != 0 {
                return Err(Error::InvalidLayer {
                    layer: i,
                    reason: "padded pooling is not supported".into(),
                });
            }
        }
    }
    for (pos, &(idx, layer)) in weighted.iter().enumerate() {
        check_weights(layer, idx, &weights[pos])?;
        match (&thresholds[pos], pos + 1 < n_weighted) {
            (None, true) => {
                return Err(Error::InvalidArgument(format!(
                    "layer {idx} needs thresholds to feed the next layer"
                )));
            }
            (Some(thr), downstream) => {
                if thr.num_channels() != layer.c_out as usize {
                    return Err(Error::InvalidArgument(format!(
                        "layer {idx}: {} threshold channels for {} outputs",
                        thr.num_channels(),
                        layer.c_out
                    )));
                }
                if downstream {
                    let next_bits = weighted[pos + 1].1.a_bits;
                    if thr.a_bits() != next_bits {
                        return Err(Error::InvalidArgument(format!(
                            "layer {idx}: thresholds produce {}-bit codes but the \
                             next layer expects {next_bits}-bit activations",
                            thr.a_bits()
                        )));
                    }
                }
            }
            (None, false) => {}
        }
    }
    let m = fold.m as usize;
    if images.is_empty() || (images.len() != 1 && images.len() != m) {
        return Err(Error::InvalidArgument(format!(
            "{} input images for {m} lanes; pass one shared image or one per lane",
            images.len()
        )));
    }
    let first = weighted[0].1;
    for img in images {
        let want = [topo.input.height, topo.input.width, topo.input.channels];
        if img.dims() != want {
            return Err(Error::TensorMismatch(format!(
                "input dims {:?}, expected {:?}",
                img.dims(),
                want
            )));
        }
        if img.bits() != first.a_bits || img.encoding() != Encoding::UnsignedLevel {
            return Err(Error::TensorMismatch(format!(
                "input is {}-bit {:?}, expected {}-bit {:?}",
                img.bits(),
                img.encoding(),
                first.a_bits,
                Encoding::UnsignedLevel
            )));
        }
    }
    let lanes: Vec<Vec<i64>> = (0..m)
        .map(|l| tensor_codes(&images[if images.len() == 1 { 0 } else { l }]))
        .collect();

    // Assemble the pipeline.
    let mut pipes = Vec::with_capacity(n_weighted);
    let mut pix_q = Vec::with_capacity(n_weighted + 1);
    let mut total_ii = 0u64;
    for (pos, &(idx, layer)) in weighted.iter().enumerate() {
        let lf = fold.per_layer[pos];
        total_ii += layer_ii(layer, lf)?;
        let trailing_pool = topo
            .layers
            .get(idx + 1)
            .filter(|l| l.kind == LayerKind::MaxPool);
        pix_q.push(Queue::new(
            opts.pixel_queue_capacity.unwrap_or(layer.n as usize),
        ));
        pipes.push(LayerPipe {
            topo_idx: idx,
            swu: SlidingWindow::new(layer, lf.simd, fold.m),
            mvtu: MatrixUnit::new(
                layer,
                lf.pe,
                lf.simd,
                fold.m,
                &weights[pos],
                thresholds[pos].as_ref(),
            )?,
            pool: trailing_pool.map(|l| PoolWindow::new(l, fold.m)),
            group_q: Queue::new(opts.group_queue_capacity.unwrap_or_else(|| {
                (layer.k * layer.k * layer.c / lf.simd) as usize
            })),
        });
    }
    pix_q.push(Queue::new(usize::MAX));

    let (final_n, final_c) = topo.output_shape()?;
    let expected_pixels = u64::from(final_n) * u64::from(final_n);
    let final_c = final_c as usize;
    let src_total = (topo.input.height * topo.input.width) as usize;
    let in_c = topo.input.channels as usize;
    let limit = opts
        .cycle_limit
        .unwrap_or(1024 + 8 * total_ii + 64 * src_total as u64);

    let mut outputs: Vec<Vec<i64>> = vec![Vec::new(); m];
    let mut first_output_cycle = None;
    let mut sink_pixels = 0u64;
    let mut src_pos = 0usize;
    let mut cycle = 0u64;
    let total_cycles = loop {
        // Sink first: drain whatever reached the end by last cycle.
        while let Some(px) = pix_q[n_weighted].pop() {
            if first_output_cycle.is_none() {
                first_output_cycle = Some(cycle);
            }
            for (lane, out) in outputs.iter_mut().enumerate() {
                out.extend_from_slice(&px[lane * final_c..(lane + 1) * final_c]);
            }
            sink_pixels += 1;
        }
        if sink_pixels == expected_pixels {
            break cycle;
        }
        if cycle >= limit {
            return Err(Error::Internal(format!(
                "pipeline not drained after {limit} cycles"
            )));
        }
        // Downstream before upstream, so every push lands next cycle.
        for i in (0..n_weighted).rev() {
            let pipe = &mut pipes[i];
            if !pipe.mvtu.done() {
                let have = !pipe.mvtu.needs_input() || pipe.group_q.has_item();
                let out_room = !pipe.mvtu.completing()
                    || match &pipe.pool {
                        Some(pool) => !pool.will_emit() || pix_q[i + 1].can_push(),
                        None => pix_q[i + 1].can_push(),
                    };
                if have && out_room {
                    let item = if pipe.mvtu.needs_input() {
                        pipe.group_q.pop()
                    } else {
                        None
                    };
                    if let Some(px) = pipe.mvtu.step(item)? {
                        let forwarded = match &mut pipe.pool {
                            Some(pool) => pool.push_pixel(&px),
                            None => Some(px),
                        };
                        if let Some(out_px) = forwarded {
                            pix_q[i + 1].push(out_px);
                        }
                    }
                } else {
                    pipe.mvtu.note_stall();
                }
            }
            match pipe.swu.try_emit(pipe.group_q.can_push()) {
                EmitOutcome::Emitted(item) => pipe.group_q.push(item),
                EmitOutcome::Starved | EmitOutcome::Blocked => {
                    if pipe.swu.started() {
                        pipe.swu.stall += 1;
                    }
                }
                EmitOutcome::Done => {}
            }
            if pipe.swu.may_ingest() {
                if let Some(px) = pix_q[i].pop() {
                    pipe.swu.ingest(&px);
                }
            }
        }
        if src_pos < src_total && pix_q[0].can_push() {
            let mut px = Vec::with_capacity(m * in_c);
            for lane in lanes.iter() {
                px.extend_from_slice(&lane[src_pos * in_c..(src_pos + 1) * in_c]);
            }
            pix_q[0].push(px);
            src_pos += 1;
        }
        cycle += 1;
    };

    let layers: Vec<LayerCycleReport> = pipes
        .iter()
        .map(|p| LayerCycleReport {
            layer: p.topo_idx,
            swu: StageCounters {
                busy: p.swu.busy,
                stall: p.swu.stall,
            },
            mvtu: StageCounters {
                busy: p.mvtu.busy,
                stall: p.mvtu.stall,
            },
            pool: p.pool.as_ref().map(|pl| StageCounters {
                busy: pl.emitted,
                stall: 0,
            }),
            swu_peak_bits: p.swu.peak_bits,
            weight_rows_fetched: p.mvtu.weight_rows_fetched,
        })
        .collect();
    // First unit on busy ties, mirroring how the analytic model breaks
    // bottleneck ties.
    let cycles_per_batch = layers
        .iter()
        .map(|l| (l.mvtu.busy, l.mvtu.busy + l.mvtu.stall))
        .fold((0, 0), |best, cur| if cur.0 > best.0 { cur } else { best })
        .1;
    Ok(SimReport {
        m: fold.m,
        layers,
        outputs: outputs
            .into_iter()
            .map(|values| LaneOutput {
                dims: [final_n, final_n, final_c as u32],
                values,
            })
            .collect(),
        total_cycles,
        first_output_cycle,
        cycles_per_batch,
    })
}

/// Simulates one weighted layer in isolation by wrapping it in a one-layer
/// network.
pub fn simulate_layer(
    layer: &LayerSpec,
    lf: LayerFolding,
    m: u32,
    weights: &QTensor,
    thresholds: Option<&ThresholdSet>,
    images: &[QTensor],
    opts: &SimOptions,
) -> Result<SimReport> {
    if !layer.kind.is_weighted() {
        return Err(Error::InvalidArgument(format!(
            "cannot simulate a {} layer on its own",
            layer.kind
        )));
    }
    let topo = NetworkTopology {
        name: "single-layer".into(),
        input: InputSpec {
            height: layer.n,
            width: layer.n,
            channels: layer.c,
            bits: layer.a_bits,
        },
        layers: vec![layer.clone()],
    };
    let fold = FoldingConfig {
        m,
        per_layer: vec![lf],
    };
    simulate_network(
        &topo,
        &fold,
        std::slice::from_ref(weights),
        &[thresholds.cloned()],
        images,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::oracle::{reference_conv, reference_network};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn conv(n: u32, c: u32, k: u32, s: u32, pad: u32, c_out: u32, a: u8, w: u8) -> LayerSpec {
        LayerSpec {
            kind: LayerKind::Conv,
            n,
            c,
            k,
            s,
            pad,
            c_out,
            a_bits: a,
            w_bits: w,
        }
    }

    fn random_image(rng: &mut ChaCha8Rng, n: u32, c: u32, bits: u8) -> QTensor {
        let codes: Vec<u64> = (0..(n * n * c) as usize)
            .map(|_| rng.gen_range(0..(1u64 << bits)))
            .collect();
        QTensor::from_codes(&[n, n, c], bits, Encoding::UnsignedLevel, &codes).unwrap()
    }

    fn random_weights(rng: &mut ChaCha8Rng, layer: &LayerSpec) -> QTensor {
        let enc = if layer.w_bits == 1 {
            Encoding::Bipolar
        } else {
            Encoding::TwosComplement
        };
        let len = (layer.c_out * layer.c * layer.k * layer.k) as usize;
        let codes: Vec<u64> = (0..len)
            .map(|_| rng.gen_range(0..(1u64 << layer.w_bits)))
            .collect();
        QTensor::from_codes(
            &[layer.c_out, layer.c, layer.k, layer.k],
            layer.w_bits,
            enc,
            &codes,
        )
        .unwrap()
    }

    fn random_thresholds(
        rng: &mut ChaCha8Rng,
        channels: u32,
        a_bits: u8,
        span: i64,
    ) -> ThresholdSet {
        let per = (1u32 << a_bits) - 1;
        let mut all = Vec::new();
        for _ in 0..channels {
            let mut t: Vec<i64> = (0..per).map(|_| rng.gen_range(-span..=span)).collect();
            t.sort_unstable();
            all.push(t);
        }
        ThresholdSet::from_channels(a_bits, all).unwrap()
    }

    #[test]
    fn unit_weights_pass_codes_through() {
        // 1x1 kernels with identity weights copy input channels to outputs.
        let layer = conv(2, 2, 1, 1, 0, 2, 2, 2);
        let weights = QTensor::from_codes(
            &[2, 2, 1, 1],
            2,
            Encoding::TwosComplement,
            &[1, 0, 0, 1],
        )
        .unwrap();
        let image = QTensor::from_codes(
            &[2, 2, 2],
            2,
            Encoding::UnsignedLevel,
            &[0, 1, 2, 3, 3, 2, 1, 0],
        )
        .unwrap();
        let report = simulate_layer(
            &layer,
            LayerFolding { pe: 1, simd: 1 },
            1,
            &weights,
            None,
            std::slice::from_ref(&image),
            &SimOptions::default(),
        )
        .unwrap();
        assert_eq!(report.outputs[0].values, vec![0, 1, 2, 3, 3, 2, 1, 0]);
        assert_eq!(report.outputs[0].dims, [2, 2, 2]);
        // Minimal folding: every MAC is its own cycle.
        assert_eq!(report.layers[0].mvtu.busy, 16);
        assert_eq!(report.cycles_per_batch, report.layers[0].mvtu.busy);
    }

    #[test]
    fn zero_image_yields_zero_accumulators() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let layer = conv(4, 2, 3, 1, 1, 4, 2, 3);
        let weights = random_weights(&mut rng, &layer);
        let image = QTensor::zeroed(&[4, 4, 2], 2, Encoding::UnsignedLevel).unwrap();
        let report = simulate_layer(
            &layer,
            LayerFolding { pe: 1, simd: 1 },
            1,
            &weights,
            None,
            std::slice::from_ref(&image),
            &SimOptions::default(),
        )
        .unwrap();
        assert!(report.outputs[0].values.iter().all(|&v| v == 0));
    }

    #[test]
    fn random_layers_match_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let cases = [
            conv(8, 4, 3, 1, 1, 8, 2, 2),
            conv(8, 4, 2, 2, 1, 6, 1, 1),
            conv(6, 6, 3, 1, 0, 4, 3, 4),
        ];
        for layer in &cases {
            let weights = random_weights(&mut rng, layer);
            let thr = random_thresholds(&mut rng, layer.c_out, 2, 40);
            for (pe, simd) in [(1, 1), (2, 2), (layer.c_out, layer.c)] {
                let imgs: Vec<QTensor> = (0..2)
                    .map(|_| random_image(&mut rng, layer.n, layer.c, layer.a_bits))
                    .collect();
                let report = simulate_layer(
                    layer,
                    LayerFolding { pe, simd },
                    2,
                    &weights,
                    Some(&thr),
                    &imgs,
                    &SimOptions::default(),
                )
                .unwrap();
                for lane in 0..2 {
                    let want = reference_conv(
                        layer,
                        &weights,
                        Some(&thr),
                        &tensor_codes(&imgs[lane]),
                    )
                    .unwrap();
                    assert_eq!(report.outputs[lane].values, want, "lane {lane}");
                }
                let ii = layer_ii(layer, LayerFolding { pe, simd }).unwrap();
                assert_eq!(report.layers[0].mvtu.busy, ii);
                // Row buffer never outgrows what the cost model provisions.
                let modeled = u64::from(2 * (layer.k.div_ceil(layer.s) + 1))
                    * u64::from(layer.s)
                    * u64::from(layer.n_padded())
                    * u64::from(layer.c)
                    * u64::from(layer.a_bits);
                assert!(report.layers[0].swu_peak_bits <= modeled);
            }
        }
    }

    fn two_layer_setup() -> (
        NetworkTopology,
        Vec<QTensor>,
        Vec<Option<ThresholdSet>>,
        QTensor,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l1 = conv(4, 2, 3, 1, 1, 4, 2, 2);
        let l2 = conv(4, 4, 3, 1, 1, 2, 2, 2);
        let topo = NetworkTopology {
            name: "two".into(),
            input: InputSpec {
                height: 4,
                width: 4,
                channels: 2,
                bits: 2,
            },
            layers: vec![l1.clone(), l2.clone()],
        };
        let weights = vec![random_weights(&mut rng, &l1), random_weights(&mut rng, &l2)];
        let thresholds = vec![Some(random_thresholds(&mut rng, 4, 2, 20)), None];
        let image = random_image(&mut rng, 4, 2, 2);
        (topo, weights, thresholds, image)
    }

    #[test]
    fn pipeline_matches_reference_and_interval() {
        let (topo, weights, thresholds, image) = two_layer_setup();
        let fold = FoldingConfig {
            m: 1,
            per_layer: vec![
                LayerFolding { pe: 4, simd: 2 },
                LayerFolding { pe: 1, simd: 1 },
            ],
        };
        let report = simulate_network(
            &topo,
            &fold,
            &weights,
            &thresholds,
            std::slice::from_ref(&image),
            &SimOptions::default(),
        )
        .unwrap();
        let thr_refs: Vec<Option<&ThresholdSet>> =
            thresholds.iter().map(|t| t.as_ref()).collect();
        let want = reference_network(&topo, &weights, &thr_refs, &tensor_codes(&image)).unwrap();
        assert_eq!(report.outputs[0].values, want);
        // Matrix units are busy for exactly their predicted intervals and the
        // bottleneck paces the batch within a small stall margin.
        let iis: Vec<u64> = topo
            .weighted_layers()
            .zip(&fold.per_layer)
            .map(|((_, l), &f)| layer_ii(l, f).unwrap())
            .collect();
        assert_eq!(report.layers[0].mvtu.busy, iis[0]);
        assert_eq!(report.layers[1].mvtu.busy, iis[1]);
        let max_ii = *iis.iter().max().unwrap();
        assert!(report.cycles_per_batch >= max_ii);
        assert!(
            (report.cycles_per_batch as f64) <= 1.15 * max_ii as f64,
            "batch interval {} vs bottleneck {max_ii}",
            report.cycles_per_batch
        );
    }

    #[test]
    fn capacity_one_queues_stay_exact() {
        let (topo, weights, thresholds, image) = two_layer_setup();
        let fold = FoldingConfig::minimal(&topo);
        let roomy = simulate_network(
            &topo,
            &fold,
            &weights,
            &thresholds,
            std::slice::from_ref(&image),
            &SimOptions::default(),
        )
        .unwrap();
        let tight = simulate_network(
            &topo,
            &fold,
            &weights,
            &thresholds,
            std::slice::from_ref(&image),
            &SimOptions {
                group_queue_capacity: Some(1),
                pixel_queue_capacity: Some(1),
                cycle_limit: None,
            },
        )
        .unwrap();
        assert_eq!(roomy.outputs, tight.outputs);
        assert!(tight.total_cycles >= roomy.total_cycles);
    }

    #[test]
    fn weight_fetches_do_not_scale_with_lanes() {
        let (topo, weights, thresholds, image) = two_layer_setup();
        let mut fold = FoldingConfig::minimal(&topo);
        let one = simulate_network(
            &topo,
            &fold,
            &weights,
            &thresholds,
            std::slice::from_ref(&image),
            &SimOptions::default(),
        )
        .unwrap();
        fold.m = 2;
        let two = simulate_network(
            &topo,
            &fold,
            &weights,
            &thresholds,
            std::slice::from_ref(&image),
            &SimOptions::default(),
        )
        .unwrap();
        for (a, b) in one.layers.iter().zip(&two.layers) {
            assert_eq!(a.weight_rows_fetched, b.weight_rows_fetched);
            assert_eq!(a.mvtu.busy, b.mvtu.busy);
        }
        // A shared image produces identical lanes.
        assert_eq!(two.outputs[0], two.outputs[1]);
        assert_eq!(two.outputs[0].values, one.outputs[0].values);
    }

    #[test]
    fn pooled_network_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let l1 = conv(4, 2, 3, 1, 1, 4, 2, 2);
        let pool = LayerSpec {
            kind: LayerKind::MaxPool,
            n: 4,
            c: 4,
            k: 2,
            s: 2,
            pad: 0,
            c_out: 4,
            a_bits: 2,
            w_bits: 0,
        };
        let l2 = conv(2, 4, 1, 1, 0, 3, 2, 2);
        let topo = NetworkTopology {
            name: "pooled".into(),
            input: InputSpec {
                height: 4,
                width: 4,
                channels: 2,
                bits: 2,
            },
            layers: vec![l1.clone(), pool, l2.clone()],
        };
        topo.validate().unwrap();
        let weights = vec![random_weights(&mut rng, &l1), random_weights(&mut rng, &l2)];
        let thresholds = vec![Some(random_thresholds(&mut rng, 4, 2, 20)), None];
        let image = random_image(&mut rng, 4, 2, 2);
        let report = simulate_network(
            &topo,
            &FoldingConfig::minimal(&topo),
            &weights,
            &thresholds,
            std::slice::from_ref(&image),
            &SimOptions::default(),
        )
        .unwrap();
        let thr_refs: Vec<Option<&ThresholdSet>> =
            thresholds.iter().map(|t| t.as_ref()).collect();
        let want = reference_network(&topo, &weights, &thr_refs, &tensor_codes(&image)).unwrap();
        assert_eq!(report.outputs[0].values, want);
        assert_eq!(report.outputs[0].dims, [2, 2, 3]);
        assert_eq!(report.layers[0].pool, Some(StageCounters { busy: 4, stall: 0 }));
    }

    #[test]
    fn rejects_inconsistent_inputs() {
        let (topo, weights, thresholds, image) = two_layer_setup();
        let fold = FoldingConfig::minimal(&topo);
        // Missing intermediate thresholds.
        let missing = vec![None, None];
        assert!(simulate_network(
            &topo,
            &fold,
            &weights,
            &missing,
            std::slice::from_ref(&image),
            &SimOptions::default()
        )
        .is_err());
        // Wrong weight shape.
        let bad = vec![weights[1].clone(), weights[0].clone()];
        assert!(simulate_network(
            &topo,
            &fold,
            &bad,
            &thresholds,
            std::slice::from_ref(&image),
            &SimOptions::default()
        )
        .is_err());
        // Two images for one lane.
        let imgs = vec![image.clone(), image];
        assert!(simulate_network(
            &topo,
            &fold,
            &weights,
            &thresholds,
            &imgs,
            &SimOptions::default()
        )
        .is_err());
    }
}
