//! Real-valued convolution kernels for the CAE baseline. Same structure as
//! the quaternion kernels with scalar multiplication in place of the Hamilton
//! product (and therefore no conjugation anywhere).

use super::{RealConvLayer, RealLayerGrads};
use crate::error::Result;
use crate::tensor::RealTensor;
use rayon::prelude::*;

fn embed(t: &RealTensor, bh: usize, bw: usize, off: usize) -> RealTensor {
    let (c, h, w) = t.shape();
    let mut out = RealTensor::zeros(c, bh, bw).expect("embed dims positive");
    for ch in 0..c {
        let src = t.channel(ch);
        let dst = out.channel_mut(ch);
        for i in 0..h {
            let d0 = (i + off) * bw + off;
            dst[d0..d0 + w].copy_from_slice(&src[i * w..(i + 1) * w]);
        }
    }
    out
}

fn crop(t: &RealTensor, h: usize, w: usize, off: usize) -> RealTensor {
    let (c, _, bw) = t.shape();
    let mut out = RealTensor::zeros(c, h, w).expect("crop dims positive");
    for ch in 0..c {
        let src = t.channel(ch);
        let dst = out.channel_mut(ch);
        for i in 0..h {
            let s0 = (i + off) * bw + off;
            dst[i * w..(i + 1) * w].copy_from_slice(&src[s0..s0 + w]);
        }
    }
    out
}

#[inline(always)]
fn gather_row(out: &mut [f64], u: &[f64], w: f64, s: usize) {
    for b in 0..out.len() {
        out[b] += w * u[b * s];
    }
}

/// Fused 3x3 gather: all nine taps of one kernel applied per output element.
/// `u0`/`u1`/`u2` are the three padded input rows, spanning `(n-1)*s + 3`.
#[inline(always)]
fn gather_3x3(out: &mut [f64], u0: &[f64], u1: &[f64], u2: &[f64], w: &[f64; 9], s: usize) {
    for b in 0..out.len() {
        let i = b * s;
        out[b] += w[0] * u0[i]
            + w[1] * u0[i + 1]
            + w[2] * u0[i + 2]
            + w[3] * u1[i]
            + w[4] * u1[i + 1]
            + w[5] * u1[i + 2]
            + w[6] * u2[i]
            + w[7] * u2[i + 1]
            + w[8] * u2[i + 2];
    }
}

/// Fused 3x3 weight-gradient row: nine tap accumulators in one pass.
#[inline(always)]
fn row_dot_3x3(g: &[f64], u0: &[f64], u1: &[f64], u2: &[f64], s: usize, acc: &mut [f64; 9]) {
    let mut a = [0.0f64; 9];
    for b in 0..g.len() {
        let i = b * s;
        let gv = g[b];
        a[0] += gv * u0[i];
        a[1] += gv * u0[i + 1];
        a[2] += gv * u0[i + 2];
        a[3] += gv * u1[i];
        a[4] += gv * u1[i + 1];
        a[5] += gv * u1[i + 2];
        a[6] += gv * u2[i];
        a[7] += gv * u2[i + 1];
        a[8] += gv * u2[i + 2];
    }
    for t in 0..9 {
        acc[t] += a[t];
    }
}

#[inline(always)]
fn scatter_row(out: &mut [f64], u: &[f64], w: f64, s: usize) {
    for b in 0..u.len() {
        out[b * s] += w * u[b];
    }
}

/// Fused 3x3 scatter: each input element feeds all nine taps at once.
/// `o0`/`o1`/`o2` are the three target rows, spanning `(n-1)*s + 3`.
#[inline(always)]
fn scatter_3x3(o0: &mut [f64], o1: &mut [f64], o2: &mut [f64], u: &[f64], w: &[f64; 9], s: usize) {
    for b in 0..u.len() {
        let i = b * s;
        let v = u[b];
        o0[i] += w[0] * v;
        o0[i + 1] += w[1] * v;
        o0[i + 2] += w[2] * v;
        o1[i] += w[3] * v;
        o1[i + 1] += w[4] * v;
        o1[i + 2] += w[5] * v;
        o2[i] += w[6] * v;
        o2[i + 1] += w[7] * v;
        o2[i + 2] += w[8] * v;
    }
}

/// Three mutable row slices of one plane, starting at `r0`/`r1`/`r2`, each
/// `len` long. The rows never overlap because they are one plane row apart.
fn three_rows(
    plane: &mut [f64],
    r0: usize,
    r1: usize,
    r2: usize,
    len: usize,
) -> (&mut [f64], &mut [f64], &mut [f64]) {
    debug_assert!(r0 + len <= r1 && r1 + len <= r2);
    let (a, rest) = plane[r0..].split_at_mut(r1 - r0);
    let (b, c) = rest.split_at_mut(r2 - r1);
    (&mut a[..len], &mut b[..len], &mut c[..len])
}

#[inline(always)]
fn row_dot(a: &[f64], u: &[f64], s: usize) -> f64 {
    let mut acc = 0.0;
    for b in 0..a.len() {
        acc += a[b] * u[b * s];
    }
    acc
}

pub(super) fn forward(layer: &RealConvLayer, input: &RealTensor) -> Result<RealTensor> {
    let (_, h, w) = input.shape();
    let (k, s, p) = (layer.kernel, layer.stride, layer.padding);
    let h_out = super::conv_out_dim(h, k, s, p)?;
    let w_out = super::conv_out_dim(w, k, s, p)?;
    let pw = w + 2 * p;
    let padded = embed(input, h + 2 * p, pw, p);
    let span = (w_out - 1) * s + 1;

    let mut out = RealTensor::zeros(layer.c_out, h_out, w_out)?;
    let hw = h_out * w_out;
    out.data_mut()
        .par_chunks_mut(hw)
        .enumerate()
        .for_each(|(o, plane)| {
            plane.fill(layer.bias[o]);
            for ci in 0..layer.c_in {
                let u = padded.channel(ci);
                if k == 3 {
                    let w0 = (o * layer.c_in + ci) * 9;
                    let w9: &[f64; 9] = layer.weights[w0..w0 + 9].try_into().expect("3x3 kernel");
                    let span3 = (w_out - 1) * s + 3;
                    for a in 0..h_out {
                        let r0 = (a * s) * pw;
                        let r1 = (a * s + 1) * pw;
                        let r2 = (a * s + 2) * pw;
                        let dst = a * w_out;
                        gather_3x3(
                            &mut plane[dst..dst + w_out],
                            &u[r0..r0 + span3],
                            &u[r1..r1 + span3],
                            &u[r2..r2 + span3],
                            w9,
                            s,
                        );
                    }
                    continue;
                }
                for kc in 0..k {
                    for kd in 0..k {
                        let wv = layer.weight_at(o, ci, kc, kd);
                        for a in 0..h_out {
                            let src = (a * s + kc) * pw + kd;
                            let dst = a * w_out;
                            gather_row(&mut plane[dst..dst + w_out], &u[src..src + span], wv, s);
                        }
                    }
                }
            }
        });
    Ok(out)
}

pub(super) fn backward(
    layer: &RealConvLayer,
    grad_output: &RealTensor,
    input: &RealTensor,
) -> Result<(RealTensor, RealLayerGrads)> {
    let (_, h, w) = input.shape();
    let (k, s, p) = (layer.kernel, layer.stride, layer.padding);
    let (_, h_out, w_out) = grad_output.shape();
    let ph = h + 2 * p;
    let pw = w + 2 * p;
    let padded = embed(input, ph, pw, p);
    let span = (w_out - 1) * s + 1;

    let kk = layer.c_in * k * k;
    let mut grads = RealLayerGrads {
        weights: vec![0.0; layer.c_out * kk],
        bias: vec![0.0; layer.c_out],
    };
    grads
        .weights
        .par_chunks_mut(kk)
        .zip(grads.bias.par_iter_mut())
        .enumerate()
        .for_each(|(o, (gw, gb))| {
            let g = grad_output.channel(o);
            *gb = g.iter().sum();
            for ci in 0..layer.c_in {
                let u = padded.channel(ci);
                if k == 3 {
                    let mut acc = [0.0f64; 9];
                    let span3 = (w_out - 1) * s + 3;
                    for a in 0..h_out {
                        let r0 = (a * s) * pw;
                        let r1 = (a * s + 1) * pw;
                        let r2 = (a * s + 2) * pw;
                        let dst = a * w_out;
                        row_dot_3x3(
                            &g[dst..dst + w_out],
                            &u[r0..r0 + span3],
                            &u[r1..r1 + span3],
                            &u[r2..r2 + span3],
                            s,
                            &mut acc,
                        );
                    }
                    gw[ci * 9..ci * 9 + 9].copy_from_slice(&acc);
                    continue;
                }
                for kc in 0..k {
                    for kd in 0..k {
                        let mut acc = 0.0;
                        for a in 0..h_out {
                            let src = (a * s + kc) * pw + kd;
                            let dst = a * w_out;
                            acc += row_dot(&g[dst..dst + w_out], &u[src..src + span], s);
                        }
                        gw[(ci * k + kc) * k + kd] = acc;
                    }
                }
            }
        });

    let mut gin_padded = RealTensor::zeros(layer.c_in, ph, pw)?;
    let phw = ph * pw;
    gin_padded
        .data_mut()
        .par_chunks_mut(phw)
        .enumerate()
        .for_each(|(ci, plane)| {
            for o in 0..layer.c_out {
                let g = grad_output.channel(o);
                if k == 3 {
                    let w0 = (o * layer.c_in + ci) * 9;
                    let w9: &[f64; 9] = layer.weights[w0..w0 + 9].try_into().expect("3x3 kernel");
                    let span3 = (w_out - 1) * s + 3;
                    for a in 0..h_out {
                        let base = a * s * pw;
                        let (o0, o1, o2) =
                            three_rows(plane, base, base + pw, base + 2 * pw, span3);
                        scatter_3x3(o0, o1, o2, &g[a * w_out..(a + 1) * w_out], w9, s);
                    }
                    continue;
                }
                for kc in 0..k {
                    for kd in 0..k {
                        let wv = layer.weight_at(o, ci, kc, kd);
                        for a in 0..h_out {
                            let dst = (a * s + kc) * pw + kd;
                            let src = a * w_out;
                            scatter_row(&mut plane[dst..dst + span], &g[src..src + w_out], wv, s);
                        }
                    }
                }
            }
        });
    Ok((crop(&gin_padded, h, w, p), grads))
}

pub(super) fn forward_transposed(layer: &RealConvLayer, input: &RealTensor) -> Result<RealTensor> {
    let (_, h, w) = input.shape();
    let (k, s, p) = (layer.kernel, layer.stride, layer.padding);
    let h_out = super::tconv_out_dim(h, k, s, p, layer.output_padding)?;
    let w_out = super::tconv_out_dim(w, k, s, p, layer.output_padding)?;
    let bh = ((h - 1) * s + k).max(h_out + p);
    let bw = ((w - 1) * s + k).max(w_out + p);

    let mut buf = RealTensor::zeros(layer.c_out, bh, bw)?;
    let bhw = bh * bw;
    let span = (w - 1) * s + 1;
    buf.data_mut()
        .par_chunks_mut(bhw)
        .enumerate()
        .for_each(|(co, plane)| {
            for ci in 0..layer.c_in {
                let u = input.channel(ci);
                if k == 3 {
                    let w0 = (co * layer.c_in + ci) * 9;
                    let w9: &[f64; 9] = layer.weights[w0..w0 + 9].try_into().expect("3x3 kernel");
                    let span3 = (w - 1) * s + 3;
                    for a in 0..h {
                        let base = a * s * bw;
                        let (o0, o1, o2) =
                            three_rows(plane, base, base + bw, base + 2 * bw, span3);
                        scatter_3x3(o0, o1, o2, &u[a * w..(a + 1) * w], w9, s);
                    }
                    continue;
                }
                for kc in 0..k {
                    for kd in 0..k {
                        let wv = layer.weight_at(co, ci, kc, kd);
                        for a in 0..h {
                            let dst = (a * s + kc) * bw + kd;
                            let src = a * w;
                            scatter_row(&mut plane[dst..dst + span], &u[src..src + w], wv, s);
                        }
                    }
                }
            }
        });

    let mut out = crop(&buf, h_out, w_out, p);
    for co in 0..layer.c_out {
        let b = layer.bias[co];
        for v in out.channel_mut(co) {
            *v += b;
        }
    }
    Ok(out)
}

pub(super) fn backward_transposed(
    layer: &RealConvLayer,
    grad_output: &RealTensor,
    input: &RealTensor,
) -> Result<(RealTensor, RealLayerGrads)> {
    let (_, h, w) = input.shape();
    let (k, s, p) = (layer.kernel, layer.stride, layer.padding);
    let (_, h_out, w_out) = grad_output.shape();
    let bh = ((h - 1) * s + k).max(h_out + p);
    let bw = ((w - 1) * s + k).max(w_out + p);
    let gpad = embed(grad_output, bh, bw, p);
    let span = (w - 1) * s + 1;

    let kk = layer.c_in * k * k;
    let mut grads = RealLayerGrads {
        weights: vec![0.0; layer.c_out * kk],
        bias: vec![0.0; layer.c_out],
    };
    grads
        .weights
        .par_chunks_mut(kk)
        .zip(grads.bias.par_iter_mut())
        .enumerate()
        .for_each(|(co, (gw, gb))| {
            let g = gpad.channel(co);
            *gb = grad_output.channel(co).iter().sum();
            for ci in 0..layer.c_in {
                let u = input.channel(ci);
                if k == 3 {
                    let mut acc = [0.0f64; 9];
                    let span3 = (w - 1) * s + 3;
                    for a in 0..h {
                        let r0 = (a * s) * bw;
                        let r1 = (a * s + 1) * bw;
                        let r2 = (a * s + 2) * bw;
                        let u0 = a * w;
                        row_dot_3x3(
                            &u[u0..u0 + w],
                            &g[r0..r0 + span3],
                            &g[r1..r1 + span3],
                            &g[r2..r2 + span3],
                            s,
                            &mut acc,
                        );
                    }
                    gw[ci * 9..ci * 9 + 9].copy_from_slice(&acc);
                    continue;
                }
                for kc in 0..k {
                    for kd in 0..k {
                        let mut acc = 0.0;
                        for a in 0..h {
                            let g0 = (a * s + kc) * bw + kd;
                            let u0 = a * w;
                            acc += row_dot(&u[u0..u0 + w], &g[g0..g0 + span], s);
                        }
                        gw[(ci * k + kc) * k + kd] = acc;
                    }
                }
            }
        });

    let mut grad_input = RealTensor::zeros(layer.c_in, h, w)?;
    let hw = h * w;
    grad_input
        .data_mut()
        .par_chunks_mut(hw)
        .enumerate()
        .for_each(|(ci, plane)| {
            for co in 0..layer.c_out {
                let g = gpad.channel(co);
                if k == 3 {
                    let w0 = (co * layer.c_in + ci) * 9;
                    let w9: &[f64; 9] = layer.weights[w0..w0 + 9].try_into().expect("3x3 kernel");
                    let span3 = (w - 1) * s + 3;
                    for a in 0..h {
                        let r0 = (a * s) * bw;
                        let r1 = (a * s + 1) * bw;
                        let r2 = (a * s + 2) * bw;
                        let dst = a * w;
                        gather_3x3(
                            &mut plane[dst..dst + w],
                            &g[r0..r0 + span3],
                            &g[r1..r1 + span3],
                            &g[r2..r2 + span3],
                            w9,
                            s,
                        );
                    }
                    continue;
                }
                for kc in 0..k {
                    for kd in 0..k {
                        let wv = layer.weight_at(co, ci, kc, kd);
                        for a in 0..h {
                            let src = (a * s + kc) * bw + kd;
                            let dst = a * w;
                            gather_row(&mut plane[dst..dst + w], &g[src..src + span], wv, s);
                        }
                    }
                }
            }
        });
    Ok((grad_input, grads))
}
