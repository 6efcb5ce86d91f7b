//! Forward and backward kernels on channel-first `f64` buffers.

use super::spec::Shape;

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub input: Shape,
    pub output: Shape,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeom {
    // Output columns `ox` whose tap `kx` lands inside the input row.
    fn valid_cols(&self, kx: usize) -> (usize, usize) {
        valid_range(self.output.width, self.input.width, kx, self.stride, self.padding)
    }

    fn valid_rows(&self, ky: usize) -> (usize, usize) {
        valid_range(self.output.height, self.input.height, ky, self.stride, self.padding)
    }
}

// Range [lo, hi) of output positions o with 0 <= o*stride + k - pad < n.
fn valid_range(out: usize, n: usize, k: usize, stride: usize, pad: usize) -> (usize, usize) {
    let lo = if k >= pad { 0 } else { (pad - k).div_ceil(stride) };
    let hi = if n + pad > k { ((n + pad - k - 1) / stride + 1).min(out) } else { 0 };
    (lo.min(hi), hi)
}

/// `weights` is `[out][in][k][k]`.
pub(crate) fn conv_forward(g: &ConvGeom, input: &[f64], weights: &[f64], bias: &[f64], out: &mut [f64]) {
    let (ic, ih, iw) = (g.input.channels, g.input.height, g.input.width);
    let (oc, oh, ow) = (g.output.channels, g.output.height, g.output.width);
    let k = g.kernel;
    for o in 0..oc {
        let plane = &mut out[o * oh * ow..(o + 1) * oh * ow];
        plane.fill(bias[o]);
        for c in 0..ic {
            let src = &input[c * ih * iw..(c + 1) * ih * iw];
            let kern = &weights[(o * ic + c) * k * k..(o * ic + c + 1) * k * k];
            for ky in 0..k {
                let (y_lo, y_hi) = g.valid_rows(ky);
                for kx in 0..k {
                    let w = kern[ky * k + kx];
                    let (x_lo, x_hi) = g.valid_cols(kx);
                    if x_lo >= x_hi {
                        continue;
                    }
                    for oy in y_lo..y_hi {
                        let iy = oy * g.stride + ky - g.padding;
                        let row = &src[iy * iw..(iy + 1) * iw];
                        let dst = &mut plane[oy * ow + x_lo..oy * ow + x_hi];
                        let ix0 = x_lo * g.stride + kx - g.padding;
                        if g.stride == 1 {
                            for (d, s) in dst.iter_mut().zip(&row[ix0..ix0 + (x_hi - x_lo)]) {
                                *d += w * s;
                            }
                        } else {
                            for (j, d) in dst.iter_mut().enumerate() {
                                *d += w * row[ix0 + j * g.stride];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Accumulates into `grad_w`/`grad_b`; writes `grad_in` when given.
pub(crate) fn conv_backward(
    g: &ConvGeom,
    input: &[f64],
    weights: &[f64],
    grad_out: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    mut grad_in: Option<&mut [f64]>,
) {
    let (ic, ih, iw) = (g.input.channels, g.input.height, g.input.width);
    let (oc, oh, ow) = (g.output.channels, g.output.height, g.output.width);
    let k = g.kernel;
    if let Some(gi) = grad_in.as_deref_mut() {
        gi.fill(0.0);
    }
    for o in 0..oc {
        let dplane = &grad_out[o * oh * ow..(o + 1) * oh * ow];
        grad_b[o] += dplane.iter().sum::<f64>();
        for c in 0..ic {
            let src = &input[c * ih * iw..(c + 1) * ih * iw];
            let base = (o * ic + c) * k * k;
            for ky in 0..k {
                let (y_lo, y_hi) = g.valid_rows(ky);
                for kx in 0..k {
                    let (x_lo, x_hi) = g.valid_cols(kx);
                    if x_lo >= x_hi {
                        continue;
                    }
                    let w = weights[base + ky * k + kx];
                    let mut acc = 0.0;
                    for oy in y_lo..y_hi {
                        let iy = oy * g.stride + ky - g.padding;
                        let drow = &dplane[oy * ow + x_lo..oy * ow + x_hi];
                        let ix0 = x_lo * g.stride + kx - g.padding;
                        let row_start = iy * iw;
                        if g.stride == 1 {
                            let srow = &src[row_start + ix0..row_start + ix0 + drow.len()];
                            acc += drow.iter().zip(srow).map(|(d, s)| d * s).sum::<f64>();
                            if let Some(gi) = grad_in.as_deref_mut() {
                                let gplane = &mut gi[c * ih * iw..(c + 1) * ih * iw];
                                for (t, d) in gplane[row_start + ix0..row_start + ix0 + drow.len()].iter_mut().zip(drow)
                                {
                                    *t += w * d;
                                }
                            }
                        } else {
                            for (j, d) in drow.iter().enumerate() {
                                let ix = ix0 + j * g.stride;
                                acc += d * src[row_start + ix];
                                if let Some(gi) = grad_in.as_deref_mut() {
                                    gi[c * ih * iw + row_start + ix] += w * d;
                                }
                            }
                        }
                    }
                    grad_w[base + ky * k + kx] += acc;
                }
            }
        }
    }
}

/// Max pooling; `argmax` receives the flat input index of each output's
/// maximum (first one on ties).
pub(crate) fn maxpool_forward(
    input: Shape,
    output: Shape,
    size: usize,
    stride: usize,
    x: &[f64],
    out: &mut [f64],
    argmax: &mut [usize],
) {
    let (ih, iw) = (input.height, input.width);
    let (oh, ow) = (output.height, output.width);
    for c in 0..input.channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0;
                for dy in 0..size {
                    let row = c * ih * iw + (oy * stride + dy) * iw;
                    for dx in 0..size {
                        let idx = row + ox * stride + dx;
                        if x[idx] > best {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                let o = c * oh * ow + oy * ow + ox;
                out[o] = best;
                argmax[o] = best_idx;
            }
        }
    }
}

pub(crate) fn maxpool_backward(argmax: &[usize], grad_out: &[f64], grad_in: &mut [f64]) {
    grad_in.fill(0.0);
    for (g, &idx) in grad_out.iter().zip(argmax) {
        grad_in[idx] += g;
    }
}

pub(crate) fn relu_forward(x: &[f64], out: &mut [f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o = v.max(0.0);
    }
}

pub(crate) fn relu_backward(x: &[f64], grad_out: &[f64], grad_in: &mut [f64]) {
    for ((gi, go), v) in grad_in.iter_mut().zip(grad_out).zip(x) {
        *gi = if *v > 0.0 { *go } else { 0.0 };
    }
}

/// `weights` is `[units][inputs]`.
pub(crate) fn dense_forward(x: &[f64], weights: &[f64], bias: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (j, o) in out.iter_mut().enumerate() {
        let row = &weights[j * n..(j + 1) * n];
        *o = bias[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
    }
}

pub(crate) fn dense_backward(
    x: &[f64],
    weights: &[f64],
    grad_out: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    mut grad_in: Option<&mut [f64]>,
) {
    let n = x.len();
    if let Some(gi) = grad_in.as_deref_mut() {
        gi.fill(0.0);
    }
    for (j, &d) in grad_out.iter().enumerate() {
        grad_b[j] += d;
        if d == 0.0 {
            continue;
        }
        let gw = &mut grad_w[j * n..(j + 1) * n];
        for (g, v) in gw.iter_mut().zip(x) {
            *g += d * v;
        }
        if let Some(gi) = grad_in.as_deref_mut() {
            for (g, w) in gi.iter_mut().zip(&weights[j * n..(j + 1) * n]) {
                *g += d * w;
            }
        }
    }
}

/// Numerically stable softmax (shifted by the max logit).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
