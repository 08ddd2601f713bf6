//! Sliding window generator: turns a streamed image into the sequence of
//! window column groups the matrix unit consumes.
//!
//! Rows are buffered in a bounded ring that mirrors the cost model's row
//! budget: while output row `oy` is being emitted, only padded rows belonging
//! to row groups `oy .. oy + ceil(k/s)` may be resident, which caps the
//! buffer at `(ceil(k/s) + 1) * s` rows per lane. Padding rows and columns
//! are synthesized as zero codes at emission time and never stored.

use std::collections::BTreeMap;

use crate::topology::LayerSpec;

/// What the window generator did, or failed to do, in one cycle.
pub(crate) enum EmitOutcome {
    Emitted(Vec<i64>),
    /// A required real row has not finished arriving.
    Starved,
    /// The group queue has no room.
    Blocked,
    /// Every window group of every position has been produced.
    Done,
}

pub(crate) struct SlidingWindow {
    n: u32,
    c: u32,
    k: u32,
    s: u32,
    pad: u32,
    n_out: u32,
    simd: u32,
    m: u32,
    a_bits: u8,
    n_pad: u32,
    /// Row groups the ring can hold: the `ceil(k/s)` a window spans plus one
    /// being filled ahead.
    row_window: u32,
    /// Complete rows, keyed by padded row index; each holds `m * n * c` codes
    /// laid out lane-major.
    rows: BTreeMap<u32, Vec<i64>>,
    incoming: Vec<i64>,
    next_in_y: u32,
    next_in_x: u32,
    // Emission cursor, innermost last: (oy, ox, kh, kw, cg).
    oy: u32,
    ox: u32,
    kh: u32,
    kw: u32,
    cg: u32,
    done: bool,
    started: bool,
    pub busy: u64,
    pub stall: u64,
    pub peak_bits: u64,
}

impl SlidingWindow {
    pub(crate) fn new(layer: &LayerSpec, simd: u32, m: u32) -> Self {
        let n_out = layer
            .output_dim()
            .expect("layer validated before simulation");
        SlidingWindow {
            n: layer.n,
            c: layer.c,
            k: layer.k,
            s: layer.s,
            pad: layer.pad,
            n_out,
            simd,
            m,
            a_bits: layer.a_bits,
            n_pad: layer.n_padded(),
            row_window: layer.k.div_ceil(layer.s) + 1,
            rows: BTreeMap::new(),
            incoming: Vec::new(),
            next_in_y: 0,
            next_in_x: 0,
            oy: 0,
            ox: 0,
            kh: 0,
            kw: 0,
            cg: 0,
            done: false,
            started: false,
            busy: 0,
            stall: 0,
            peak_bits: 0,
        }
    }

    pub(crate) fn started(&self) -> bool {
        self.started
    }

    pub(crate) fn wants_input(&self) -> bool {
        self.next_in_y < self.n
    }

    /// Ring bound: the incoming row's group must sit inside the window of
    /// groups anchored at the output row currently being emitted.
    pub(crate) fn may_ingest(&self) -> bool {
        self.wants_input() && self.pad + self.next_in_y < (self.oy + self.row_window) * self.s
    }

    /// Accepts one pixel (`m * c` codes, lane-major) into the current row.
    pub(crate) fn ingest(&mut self, pixel: &[i64]) {
        debug_assert_eq!(pixel.len(), (self.m * self.c) as usize);
        self.started = true;
        let (n, c) = (self.n as usize, self.c as usize);
        if self.incoming.is_empty() {
            self.incoming = vec![0; self.m as usize * n * c];
        }
        let x = self.next_in_x as usize;
        for lane in 0..self.m as usize {
            let src = &pixel[lane * c..(lane + 1) * c];
            self.incoming[lane * n * c + x * c..lane * n * c + (x + 1) * c].copy_from_slice(src);
        }
        self.next_in_x += 1;
        if self.next_in_x == self.n {
            self.next_in_x = 0;
            let row = std::mem::take(&mut self.incoming);
            self.rows.insert(self.pad + self.next_in_y, row);
            self.next_in_y += 1;
        }
        self.note_resident();
    }

    fn note_resident(&mut self) {
        let resident = self.rows.len() as u64 + u64::from(!self.incoming.is_empty());
        let bits = resident
            * u64::from(self.m)
            * u64::from(self.n_pad)
            * u64::from(self.c)
            * u64::from(self.a_bits);
        self.peak_bits = self.peak_bits.max(bits);
    }

    /// Padded row the current group reads, and whether it is synthetic.
    fn current_row(&self) -> (u32, bool) {
        let r = self.oy * self.s + self.kh;
        (r, r < self.pad || r >= self.pad + self.n)
    }

    pub(crate) fn try_emit(&mut self, room: bool) -> EmitOutcome {
        if self.done {
            return EmitOutcome::Done;
        }
        if !room {
            return EmitOutcome::Blocked;
        }
        let (r, synthetic) = self.current_row();
        if !synthetic && !self.rows.contains_key(&r) {
            return EmitOutcome::Starved;
        }
        let (n, c, simd) = (self.n as usize, self.c as usize, self.simd as usize);
        let col = self.ox * self.s + self.kw;
        let col_synthetic = col < self.pad || col >= self.pad + self.n;
        let mut item = vec![0i64; self.m as usize * simd];
        if !synthetic && !col_synthetic {
            let row = &self.rows[&r];
            let x = (col - self.pad) as usize;
            let base = x * c + self.cg as usize * simd;
            for lane in 0..self.m as usize {
                let src = &row[lane * n * c + base..lane * n * c + base + simd];
                item[lane * simd..(lane + 1) * simd].copy_from_slice(src);
            }
        }
        self.busy += 1;
        self.advance();
        EmitOutcome::Emitted(item)
    }

    fn advance(&mut self) {
        self.cg += 1;
        if self.cg < self.c / self.simd {
            return;
        }
        self.cg = 0;
        self.kw += 1;
        if self.kw < self.k {
            return;
        }
        self.kw = 0;
        self.kh += 1;
        if self.kh < self.k {
            return;
        }
        self.kh = 0;
        self.ox += 1;
        if self.ox < self.n_out {
            return;
        }
        self.ox = 0;
        self.oy += 1;
        if self.oy == self.n_out {
            self.done = true;
            self.rows.clear();
            return;
        }
        // The window slid down: rows below the new anchor group are dead.
        let min_keep = self.oy * self.s;
        self.rows.retain(|&r, _| r >= min_keep);
    }
}
