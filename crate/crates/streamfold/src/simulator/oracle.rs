//! Plain reference implementations the streaming simulator is checked
//! against. Everything here is written the obvious way: nested loops over a
//! zero-padded image, a linear scan for threshold application, and explicit
//! sign handling, sharing no arithmetic shortcuts with the pipelined model.

use crate::error::{Error, Result};
use crate::quant::{QTensor, ThresholdSet};
use crate::topology::{LayerKind, LayerSpec, NetworkTopology};

/// Signed integer a weight code stands for: one bit is bipolar, wider codes
/// are two's complement.
fn weight_int(code: u64, bits: u8) -> i64 {
    if bits == 1 {
        if code == 1 {
            1
        } else {
            -1
        }
    } else {
        let sign = 1i64 << (bits - 1);
        let v = code as i64;
        if v >= sign {
            v - (sign << 1)
        } else {
            v
        }
    }
}

fn threshold_code(thresholds: &[i64], acc: i64) -> i64 {
    let mut code = 0i64;
    for &t in thresholds {
        if t <= acc {
            code += 1;
        }
    }
    code
}

/// Direct convolution over one image held as codes in row-major `(y, x, c)`
/// order. Returns `(n_out, n_out, c_out)` values: threshold codes when a
/// threshold set is given, raw accumulators otherwise.
pub fn reference_conv(
    layer: &LayerSpec,
    weights: &QTensor,
    thresholds: Option<&ThresholdSet>,
    image: &[i64],
) -> Result<Vec<i64>> {
    if !layer.kind.is_weighted() {
        return Err(Error::InvalidArgument(format!(
            "{} layer has no weights to convolve",
            layer.kind
        )));
    }
    let (n, c, k, s, pad, c_out) = (
        layer.n as i64,
        layer.c as i64,
        layer.k as i64,
        layer.s as i64,
        layer.pad as i64,
        layer.c_out as i64,
    );
    if image.len() != (n * n * c) as usize {
        return Err(Error::LengthMismatch {
            left: image.len(),
            right: (n * n * c) as usize,
        });
    }
    let n_out = i64::from(layer.output_dim()?);
    let mut out = Vec::with_capacity((n_out * n_out * c_out) as usize);
    for oy in 0..n_out {
        for ox in 0..n_out {
            for co in 0..c_out {
                let mut acc = 0i64;
                for kh in 0..k {
                    for kw in 0..k {
                        let y = oy * s + kh - pad;
                        let x = ox * s + kw - pad;
                        if y < 0 || y >= n || x < 0 || x >= n {
                            continue;
                        }
                        for ci in 0..c {
                            let a = image[((y * n + x) * c + ci) as usize];
                            let widx = weights.index4(co as u32, ci as u32, kh as u32, kw as u32);
                            acc += a * weight_int(weights.get(widx), weights.bits());
                        }
                    }
                }
                out.push(match thresholds {
                    Some(thr) => threshold_code(thr.thresholds(co as usize), acc),
                    None => acc,
                });
            }
        }
    }
    Ok(out)
}

/// Direct max pooling over codes in row-major `(y, x, c)` order.
pub fn reference_pool(layer: &LayerSpec, image: &[i64]) -> Result<Vec<i64>> {
    if layer.kind != LayerKind::MaxPool {
        return Err(Error::InvalidArgument(format!(
            "{} layer is not a pooling layer",
            layer.kind
        )));
    }
    if layer.pad != 0 {
        return Err(Error::InvalidArgument(
            "padded pooling is not supported".into(),
        ));
    }
    let (n, c, k, s) = (
        layer.n as usize,
        layer.c as usize,
        layer.k as usize,
        layer.s as usize,
    );
    if image.len() != n * n * c {
        return Err(Error::LengthMismatch {
            left: image.len(),
            right: n * n * c,
        });
    }
    let n_out = layer.output_dim()? as usize;
    let mut out = Vec::with_capacity(n_out * n_out * c);
    for oy in 0..n_out {
        for ox in 0..n_out {
            for ch in 0..c {
                let mut best = i64::MIN;
                for kh in 0..k {
                    for kw in 0..k {
                        let y = oy * s + kh;
                        let x = ox * s + kw;
                        best = best.max(image[(y * n + x) * c + ch]);
                    }
                }
                out.push(best);
            }
        }
    }
    Ok(out)
}

/// Runs the whole network layer by layer on one image of input codes.
/// `weights` and `thresholds` line up with the weighted layers in order.
pub fn reference_network(
    topo: &NetworkTopology,
    weights: &[QTensor],
    thresholds: &[Option<&ThresholdSet>],
    image: &[i64],
) -> Result<Vec<i64>> {
    let mut cur = image.to_vec();
    let mut wi = 0;
    for layer in &topo.layers {
        cur = match layer.kind {
            LayerKind::MaxPool => reference_pool(layer, &cur)?,
            _ => {
                let out = reference_conv(layer, &weights[wi], thresholds[wi], &cur)?;
                wi += 1;
                out
            }
        };
    }
    Ok(cur)
}
