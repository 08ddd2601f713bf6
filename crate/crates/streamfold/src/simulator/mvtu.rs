//! Matrix of MAC lanes: consumes window column groups, accumulates dot
//! products for `pe` neurons at a time, and replays each buffered window
//! `c_out / pe` times so the input stream is read only once per position.
//!
//! Weight rows are fetched once per work cycle regardless of how many image
//! lanes run, which is the sharing the batch dimension exists to exploit.
//! When both activations and weights are one bit wide the dot product runs
//! on packed words through the popcount identity instead of the generic
//! multiply loop; both paths are exercised against each other in tests.

use crate::error::{Error, Result};
use crate::quant::{mac_dot_binary, pack_bits, QTensor, ThresholdSet};
use crate::topology::LayerSpec;

pub(crate) struct MatrixUnit {
    simd: usize,
    pe: usize,
    m: usize,
    c_out: usize,
    groups_per_window: usize,
    passes: usize,
    positions: u64,
    /// Signed weight values per neuron, flattened in window order
    /// `(kh * k + kw) * c + ci`.
    weight_rows: Vec<Vec<i64>>,
    /// Bit-packed weight codes per neuron and group, present only on the
    /// one-bit fast path.
    packed_rows: Option<Vec<Vec<Vec<u64>>>>,
    thresholds: Option<ThresholdSet>,
    window: Vec<Vec<i64>>,
    acc: Vec<i64>,
    pixel: Vec<i64>,
    pass: usize,
    group: usize,
    positions_done: u64,
    started: bool,
    pub busy: u64,
    pub stall: u64,
    pub weight_rows_fetched: u64,
}

impl MatrixUnit {
    pub(crate) fn new(
        layer: &LayerSpec,
        pe: u32,
        simd: u32,
        m: u32,
        weights: &QTensor,
        thresholds: Option<&ThresholdSet>,
    ) -> Result<Self> {
        let (k, c, c_out) = (layer.k as usize, layer.c as usize, layer.c_out as usize);
        let flat = k * k * c;
        // Reorder weights from tensor layout (c_in, kh, kw) into the window
        // order (kh, kw, c_in) the generator streams; keep both the decoded
        // integers and the raw codes so the packed path sees the same order.
        let mut weight_rows = Vec::with_capacity(c_out);
        let mut code_rows = Vec::with_capacity(c_out);
        for neuron in 0..c_out {
            let mut row = Vec::with_capacity(flat);
            let mut codes = Vec::with_capacity(flat);
            for kh in 0..k {
                for kw in 0..k {
                    for ci in 0..c {
                        let idx = weights.index4(neuron as u32, ci as u32, kh as u32, kw as u32);
                        row.push(weights.signed_value(idx));
                        codes.push(weights.get(idx) as u8);
                    }
                }
            }
            weight_rows.push(row);
            code_rows.push(codes);
        }
        let simd = simd as usize;
        let groups_per_window = flat / simd;
        let packed_rows = if layer.a_bits == 1 && layer.w_bits == 1 {
            Some(
                code_rows
                    .iter()
                    .map(|codes| {
                        (0..groups_per_window)
                            .map(|g| pack_bits(&codes[g * simd..(g + 1) * simd]))
                            .collect()
                    })
                    .collect(),
            )
        } else {
            None
        };
        let n_out = layer.output_dim()?;
        let passes = c_out / pe as usize;
        Ok(MatrixUnit {
            simd,
            pe: pe as usize,
            m: m as usize,
            c_out,
            groups_per_window,
            passes,
            positions: u64::from(n_out) * u64::from(n_out),
            weight_rows,
            packed_rows,
            thresholds: thresholds.cloned(),
            window: vec![Vec::new(); groups_per_window],
            acc: vec![0; m as usize * pe as usize],
            pixel: vec![0; m as usize * c_out],
            pass: 0,
            group: 0,
            positions_done: 0,
            started: false,
            busy: 0,
            stall: 0,
            weight_rows_fetched: 0,
        })
    }

    pub(crate) fn done(&self) -> bool {
        self.positions_done == self.positions
    }

    /// The next work cycle must pop a fresh group from the input queue.
    pub(crate) fn needs_input(&self) -> bool {
        self.pass == 0
    }

    /// The next work cycle finishes a full output pixel.
    pub(crate) fn completing(&self) -> bool {
        self.pass == self.passes - 1 && self.group == self.groups_per_window - 1
    }

    pub(crate) fn note_stall(&mut self) {
        if self.started && !self.done() {
            self.stall += 1;
        }
    }

    /// Runs one work cycle. `item` must be `Some` exactly when
    /// [`needs_input`](Self::needs_input) says so; the return value is the
    /// completed pixel (`m * c_out` codes or raw accumulators) if this cycle
    /// finished one.
    pub(crate) fn step(&mut self, item: Option<Vec<i64>>) -> Result<Option<Vec<i64>>> {
        self.started = true;
        let g = self.group;
        if let Some(it) = item {
            debug_assert!(self.needs_input());
            self.window[g] = it;
        }
        let codes = std::mem::take(&mut self.window[g]);
        if codes.len() != self.m * self.simd {
            return Err(Error::Internal(format!(
                "window group of {} codes, expected {}",
                codes.len(),
                self.m * self.simd
            )));
        }
        for lane in 0..self.m {
            let a = &codes[lane * self.simd..(lane + 1) * self.simd];
            for p in 0..self.pe {
                let neuron = self.pass * self.pe + p;
                let dot = match &self.packed_rows {
                    Some(packed) => {
                        let a8: Vec<u8> = a.iter().map(|&v| v as u8).collect();
                        mac_dot_binary(&pack_bits(&a8), &packed[neuron][g], self.simd)?
                    }
                    None => {
                        let w = &self.weight_rows[neuron][g * self.simd..(g + 1) * self.simd];
                        a.iter().zip(w).map(|(&av, &wv)| av * wv).sum()
                    }
                };
                self.acc[lane * self.pe + p] += dot;
            }
        }
        // One row fetch per neuron in flight, shared by every lane.
        self.weight_rows_fetched += self.pe as u64;
        self.busy += 1;
        self.window[g] = codes;

        self.group += 1;
        if self.group < self.groups_per_window {
            return Ok(None);
        }
        self.group = 0;
        for lane in 0..self.m {
            for p in 0..self.pe {
                let neuron = self.pass * self.pe + p;
                let acc = self.acc[lane * self.pe + p];
                let out = match &self.thresholds {
                    Some(thr) => i64::from(thr.apply(neuron, acc)),
                    None => acc,
                };
                self.pixel[lane * self.c_out + neuron] = out;
            }
        }
        self.acc.iter_mut().for_each(|a| *a = 0);
        self.pass += 1;
        if self.pass < self.passes {
            return Ok(None);
        }
        self.pass = 0;
        self.positions_done += 1;
        let pixel = std::mem::replace(&mut self.pixel, vec![0; self.m * self.c_out]);
        Ok(Some(pixel))
    }
}
