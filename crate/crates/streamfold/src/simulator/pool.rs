//! Max pooling fused behind a matrix unit: pixels flow through a small line
//! buffer and a pooled pixel pops out, in the same cycle, whenever an input
//! pixel completes a window. Level codes are monotone in the values they
//! stand for, so taking the maximum of codes is taking the maximum of
//! activations.

use std::collections::VecDeque;

use crate::topology::LayerSpec;

pub(crate) struct PoolWindow {
    n: usize,
    c: usize,
    k: usize,
    s: usize,
    m: usize,
    /// Up to `k - 1` previous complete rows, oldest first; each `m * n * c`.
    rows: VecDeque<Vec<i64>>,
    current: Vec<i64>,
    y: usize,
    x: usize,
    pub emitted: u64,
}

impl PoolWindow {
    pub(crate) fn new(layer: &LayerSpec, m: u32) -> Self {
        let (n, c) = (layer.n as usize, layer.c as usize);
        PoolWindow {
            n,
            c,
            k: layer.k as usize,
            s: layer.s as usize,
            m: m as usize,
            rows: VecDeque::new(),
            current: vec![0; m as usize * n * c],
            y: 0,
            x: 0,
            emitted: 0,
        }
    }

    /// Whether accepting the next input pixel will complete a window.
    pub(crate) fn will_emit(&self) -> bool {
        self.y + 1 >= self.k
            && (self.y + 1 - self.k) % self.s == 0
            && self.x + 1 >= self.k
            && (self.x + 1 - self.k) % self.s == 0
    }

    /// Feeds one pixel (`m * c` codes); returns the pooled pixel when the
    /// window it closes is complete.
    pub(crate) fn push_pixel(&mut self, pixel: &[i64]) -> Option<Vec<i64>> {
        debug_assert_eq!(pixel.len(), self.m * self.c);
        let (n, c) = (self.n, self.c);
        for lane in 0..self.m {
            let dst = lane * n * c + self.x * c;
            self.current[dst..dst + c].copy_from_slice(&pixel[lane * c..(lane + 1) * c]);
        }
        let out = if self.will_emit() {
            let x0 = self.x + 1 - self.k;
            let mut pooled = vec![i64::MIN; self.m * c];
            for dy in 0..self.k {
                let row_y = self.y + 1 - self.k + dy;
                let row = if row_y == self.y {
                    &self.current
                } else {
                    // rows holds the previous complete rows oldest-first.
                    &self.rows[self.rows.len() - (self.y - row_y)]
                };
                for lane in 0..self.m {
                    for dx in 0..self.k {
                        let src = lane * n * c + (x0 + dx) * c;
                        for ch in 0..c {
                            let v = row[src + ch];
                            let slot = &mut pooled[lane * c + ch];
                            *slot = (*slot).max(v);
                        }
                    }
                }
            }
            self.emitted += 1;
            Some(pooled)
        } else {
            None
        };
        self.x += 1;
        if self.x == n {
            self.x = 0;
            self.y += 1;
            let finished = std::mem::replace(&mut self.current, vec![0; self.m * n * c]);
            self.rows.push_back(finished);
            while self.rows.len() >= self.k.max(1) {
                self.rows.pop_front();
            }
        }
        out
    }
}
