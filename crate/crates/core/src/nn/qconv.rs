//! Kernels for the quaternion convolution and its transposed form.
//!
//! The transposed convolution is the exact adjoint of the strided
//! cross-correlation under the Euclidean inner product on all real
//! components, which for quaternion weights means left-multiplying by the
//! conjugate. Backward passes fall out of the same identity:
//!
//! * conv forward         `out += w ⊗ u`
//! * conv input grad      `gin += conj(w) ⊗ g`
//! * conv weight grad     `gw  += g ⊗ conj(u)`
//! * tconv forward        `out += conj(w) ⊗ u`  (scattered)
//! * tconv input grad     `gin += w ⊗ g`        (gathered)
//! * tconv weight grad    `gw  += u ⊗ conj(g)`
//!
//! All accumulation loops run in a fixed per-channel order, so results are
//! bit-identical no matter how many rayon threads execute the channel loop.

use super::{QConvLayer, QLayerGrads};
use crate::error::Result;
use crate::quat::Quaternion;
use crate::tensor::QTensor;
use rayon::prelude::*;

/// Copy `t` into a zeroed `(C, bh, bw)` buffer with its top-left corner at
/// `(off, off)`.
fn embed(t: &QTensor, bh: usize, bw: usize, off: usize) -> QTensor {
    let (c, h, w) = t.shape();
    let mut out = QTensor::zeros(c, bh, bw).expect("embed dims positive");
    for ch in 0..c {
        for comp in 0..4 {
            let src = t.plane(ch, comp);
            let dst = out.plane_mut(ch, comp);
            for i in 0..h {
                let d0 = (i + off) * bw + off;
                dst[d0..d0 + w].copy_from_slice(&src[i * w..(i + 1) * w]);
            }
        }
    }
    out
}

/// Inverse of [`embed`]: extract the `(C, h, w)` window at offset `(off, off)`.
fn crop(t: &QTensor, h: usize, w: usize, off: usize) -> QTensor {
    let (c, _, bw) = t.shape();
    let mut out = QTensor::zeros(c, h, w).expect("crop dims positive");
    for ch in 0..c {
        for comp in 0..4 {
            let src = t.plane(ch, comp);
            let dst = out.plane_mut(ch, comp);
            for i in 0..h {
                let s0 = (i + off) * bw + off;
                dst[i * w..(i + 1) * w].copy_from_slice(&src[s0..s0 + w]);
            }
        }
    }
    out
}

/// `out[b] += w ⊗ u[b*s]` over one row. `u*` slices must span `(n-1)*s + 1`.
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn gather_row(
    or_: &mut [f64],
    ox: &mut [f64],
    oy: &mut [f64],
    oz: &mut [f64],
    ur: &[f64],
    ux: &[f64],
    uy: &[f64],
    uz: &[f64],
    w: Quaternion,
    s: usize,
) {
    for b in 0..or_.len() {
        let i = b * s;
        let (r, x, y, z) = (ur[i], ux[i], uy[i], uz[i]);
        or_[b] += w.r * r - w.x * x - w.y * y - w.z * z;
        ox[b] += w.r * x + w.x * r + w.y * z - w.z * y;
        oy[b] += w.r * y - w.x * z + w.y * r + w.z * x;
        oz[b] += w.r * z + w.x * y - w.y * x + w.z * r;
    }
}

/// Fused kernel row for `k == 3`: `out[b] += Σ_d w[d] ⊗ u[b*s + d]`.
/// `u*` slices must span `(n-1)*s + 3`.
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn gather_row3(
    or_: &mut [f64],
    ox: &mut [f64],
    oy: &mut [f64],
    oz: &mut [f64],
    ur: &[f64],
    ux: &[f64],
    uy: &[f64],
    uz: &[f64],
    taps: &[Quaternion; 3],
    s: usize,
) {
    let [w0, w1, w2] = *taps;
    for b in 0..or_.len() {
        let i = b * s;
        let (mut ar, mut ax, mut ay, mut az) = (or_[b], ox[b], oy[b], oz[b]);
        let (r, x, y, z) = (ur[i], ux[i], uy[i], uz[i]);
        ar += w0.r * r - w0.x * x - w0.y * y - w0.z * z;
        ax += w0.r * x + w0.x * r + w0.y * z - w0.z * y;
        ay += w0.r * y - w0.x * z + w0.y * r + w0.z * x;
        az += w0.r * z + w0.x * y - w0.y * x + w0.z * r;
        let (r, x, y, z) = (ur[i + 1], ux[i + 1], uy[i + 1], uz[i + 1]);
        ar += w1.r * r - w1.x * x - w1.y * y - w1.z * z;
        ax += w1.r * x + w1.x * r + w1.y * z - w1.z * y;
        ay += w1.r * y - w1.x * z + w1.y * r + w1.z * x;
        az += w1.r * z + w1.x * y - w1.y * x + w1.z * r;
        let (r, x, y, z) = (ur[i + 2], ux[i + 2], uy[i + 2], uz[i + 2]);
        ar += w2.r * r - w2.x * x - w2.y * y - w2.z * z;
        ax += w2.r * x + w2.x * r + w2.y * z - w2.z * y;
        ay += w2.r * y - w2.x * z + w2.y * r + w2.z * x;
        az += w2.r * z + w2.x * y - w2.y * x + w2.z * r;
        or_[b] = ar;
        ox[b] = ax;
        oy[b] = ay;
        oz[b] = az;
    }
}

/// `out[b*s] += w ⊗ u[b]` over one row; the strided side is the output.
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn scatter_row(
    or_: &mut [f64],
    ox: &mut [f64],
    oy: &mut [f64],
    oz: &mut [f64],
    ur: &[f64],
    ux: &[f64],
    uy: &[f64],
    uz: &[f64],
    w: Quaternion,
    s: usize,
) {
    for b in 0..ur.len() {
        let i = b * s;
        let (r, x, y, z) = (ur[b], ux[b], uy[b], uz[b]);
        or_[i] += w.r * r - w.x * x - w.y * y - w.z * z;
        ox[i] += w.r * x + w.x * r + w.y * z - w.z * y;
        oy[i] += w.r * y - w.x * z + w.y * r + w.z * x;
        oz[i] += w.r * z + w.x * y - w.y * x + w.z * r;
    }
}

/// Fused kernel row for `k == 3`: `out[b*s + d] += w[d] ⊗ u[b]` for the three
/// taps. Output slices must span `(n-1)*s + 3`.
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn scatter_row3(
    or_: &mut [f64],
    ox: &mut [f64],
    oy: &mut [f64],
    oz: &mut [f64],
    ur: &[f64],
    ux: &[f64],
    uy: &[f64],
    uz: &[f64],
    taps: &[Quaternion; 3],
    s: usize,
) {
    let [w0, w1, w2] = *taps;
    for b in 0..ur.len() {
        let i = b * s;
        let (r, x, y, z) = (ur[b], ux[b], uy[b], uz[b]);
        or_[i] += w0.r * r - w0.x * x - w0.y * y - w0.z * z;
        ox[i] += w0.r * x + w0.x * r + w0.y * z - w0.z * y;
        oy[i] += w0.r * y - w0.x * z + w0.y * r + w0.z * x;
        oz[i] += w0.r * z + w0.x * y - w0.y * x + w0.z * r;
        or_[i + 1] += w1.r * r - w1.x * x - w1.y * y - w1.z * z;
        ox[i + 1] += w1.r * x + w1.x * r + w1.y * z - w1.z * y;
        oy[i + 1] += w1.r * y - w1.x * z + w1.y * r + w1.z * x;
        oz[i + 1] += w1.r * z + w1.x * y - w1.y * x + w1.z * r;
        or_[i + 2] += w2.r * r - w2.x * x - w2.y * y - w2.z * z;
        ox[i + 2] += w2.r * x + w2.x * r + w2.y * z - w2.z * y;
        oy[i + 2] += w2.r * y - w2.x * z + w2.y * r + w2.z * x;
        oz[i + 2] += w2.r * z + w2.x * y - w2.y * x + w2.z * r;
    }
}

/// Accumulate `Σ_b a[b] ⊗ conj(u[b*s])` over one row.
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn row_product_conj(
    ar: &[f64],
    ax: &[f64],
    ay: &[f64],
    az: &[f64],
    ur: &[f64],
    ux: &[f64],
    uy: &[f64],
    uz: &[f64],
    s: usize,
    acc: &mut [f64; 4],
) {
    let (mut cr, mut cx, mut cy, mut cz) = (0.0, 0.0, 0.0, 0.0);
    for b in 0..ar.len() {
        let i = b * s;
        let (gr, gx, gy, gz) = (ar[b], ax[b], ay[b], az[b]);
        let (r, x, y, z) = (ur[i], ux[i], uy[i], uz[i]);
        // g ⊗ conj(u), expanded
        cr += gr * r + gx * x + gy * y + gz * z;
        cx += -gr * x + gx * r - gy * z + gz * y;
        cy += -gr * y + gx * z + gy * r - gz * x;
        cz += -gr * z - gx * y + gy * x + gz * r;
    }
    acc[0] += cr;
    acc[1] += cx;
    acc[2] += cy;
    acc[3] += cz;
}

/// Fused weight-gradient row for `k == 3`: three tap accumulators
/// `Σ_b a[b] ⊗ conj(u[b*s + d])` filled in one pass over the row.
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn row_product_conj3(
    ar: &[f64],
    ax: &[f64],
    ay: &[f64],
    az: &[f64],
    ur: &[f64],
    ux: &[f64],
    uy: &[f64],
    uz: &[f64],
    s: usize,
    acc: &mut [f64; 12],
) {
    let mut local = [0.0f64; 12];
    for b in 0..ar.len() {
        let i = b * s;
        let (gr, gx, gy, gz) = (ar[b], ax[b], ay[b], az[b]);
        for d in 0..3 {
            let (r, x, y, z) = (ur[i + d], ux[i + d], uy[i + d], uz[i + d]);
            local[4 * d] += gr * r + gx * x + gy * y + gz * z;
            local[4 * d + 1] += -gr * x + gx * r - gy * z + gz * y;
            local[4 * d + 2] += -gr * y + gx * z + gy * r - gz * x;
            local[4 * d + 3] += -gr * z - gx * y + gy * x + gz * r;
        }
    }
    for t in 0..12 {
        acc[t] += local[t];
    }
}

/// Split one contiguous 4-plane channel chunk into its component planes.
fn split_planes(chunk: &mut [f64], hw: usize) -> (&mut [f64], &mut [f64], &mut [f64], &mut [f64]) {
    let (r, rest) = chunk.split_at_mut(hw);
    let (x, rest) = rest.split_at_mut(hw);
    let (y, z) = rest.split_at_mut(hw);
    (r, x, y, z)
}

pub(super) fn forward(layer: &QConvLayer, input: &QTensor) -> Result<QTensor> {
    let (_, h, w) = input.shape();
    let (k, s, p) = (layer.kernel, layer.stride, layer.padding);
    let h_out = super::conv_out_dim(h, k, s, p)?;
    let w_out = super::conv_out_dim(w, k, s, p)?;
    let pw = w + 2 * p;
    let padded = embed(input, h + 2 * p, pw, p);
    let span = (w_out - 1) * s + 1;

    let mut out = QTensor::zeros(layer.c_out, h_out, w_out)?;
    let hw = h_out * w_out;
    out.data_mut()
        .par_chunks_mut(4 * hw)
        .enumerate()
        .for_each(|(o, chunk)| {
            let (or_, ox, oy, oz) = split_planes(chunk, hw);
            let bq = layer.bias_quat(o);
            or_.fill(bq.r);
            ox.fill(bq.x);
            oy.fill(bq.y);
            oz.fill(bq.z);
            for ci in 0..layer.c_in {
                let ur = padded.plane(ci, 0);
                let ux = padded.plane(ci, 1);
                let uy = padded.plane(ci, 2);
                let uz = padded.plane(ci, 3);
                if k == 3 {
                    let span3 = (w_out - 1) * s + 3;
                    for kc in 0..3 {
                        let taps = [
                            layer.weight_quat(o, ci, kc, 0),
                            layer.weight_quat(o, ci, kc, 1),
                            layer.weight_quat(o, ci, kc, 2),
                        ];
                        for a in 0..h_out {
                            let src = (a * s + kc) * pw;
                            let dst = a * w_out;
                            gather_row3(
                                &mut or_[dst..dst + w_out],
                                &mut ox[dst..dst + w_out],
                                &mut oy[dst..dst + w_out],
                                &mut oz[dst..dst + w_out],
                                &ur[src..src + span3],
                                &ux[src..src + span3],
                                &uy[src..src + span3],
                                &uz[src..src + span3],
                                &taps,
                                s,
                            );
                        }
                    }
                    continue;
                }
                for kc in 0..k {
                    for kd in 0..k {
                        let wq = layer.weight_quat(o, ci, kc, kd);
                        for a in 0..h_out {
                            let src = (a * s + kc) * pw + kd;
                            let dst = a * w_out;
                            gather_row(
                                &mut or_[dst..dst + w_out],
                                &mut ox[dst..dst + w_out],
                                &mut oy[dst..dst + w_out],
                                &mut oz[dst..dst + w_out],
                                &ur[src..src + span],
                                &ux[src..src + span],
                                &uy[src..src + span],
                                &uz[src..src + span],
                                wq,
                                s,
                            );
                        }
                    }
                }
            }
        });
    Ok(out)
}

pub(super) fn backward(
    layer: &QConvLayer,
    grad_output: &QTensor,
    input: &QTensor,
) -> Result<(QTensor, QLayerGrads)> {
    let (_, h, w) = input.shape();
    let (k, s, p) = (layer.kernel, layer.stride, layer.padding);
    let (_, h_out, w_out) = grad_output.shape();
    let ph = h + 2 * p;
    let pw = w + 2 * p;
    let padded = embed(input, ph, pw, p);
    let span = (w_out - 1) * s + 1;

    // Weight and bias gradients, one task per output channel.
    let kk = layer.c_in * k * k;
    let mut grads = QLayerGrads {
        weights: vec![0.0; 4 * layer.c_out * kk],
        bias: vec![0.0; 4 * layer.c_out],
    };
    grads
        .weights
        .par_chunks_mut(4 * kk)
        .zip(grads.bias.par_chunks_mut(4))
        .enumerate()
        .for_each(|(o, (gw, gb))| {
            let gr = grad_output.plane(o, 0);
            let gx = grad_output.plane(o, 1);
            let gy = grad_output.plane(o, 2);
            let gz = grad_output.plane(o, 3);
            for (comp, b) in gb.iter_mut().enumerate() {
                *b = grad_output.plane(o, comp).iter().sum();
            }
            for ci in 0..layer.c_in {
                let ur = padded.plane(ci, 0);
                let ux = padded.plane(ci, 1);
                let uy = padded.plane(ci, 2);
                let uz = padded.plane(ci, 3);
                if k == 3 {
                    let span3 = (w_out - 1) * s + 3;
                    for kc in 0..3 {
                        let mut acc = [0.0; 12];
                        for a in 0..h_out {
                            let src = (a * s + kc) * pw;
                            let dst = a * w_out;
                            row_product_conj3(
                                &gr[dst..dst + w_out],
                                &gx[dst..dst + w_out],
                                &gy[dst..dst + w_out],
                                &gz[dst..dst + w_out],
                                &ur[src..src + span3],
                                &ux[src..src + span3],
                                &uy[src..src + span3],
                                &uz[src..src + span3],
                                s,
                                &mut acc,
                            );
                        }
                        let at = 4 * (ci * 3 + kc) * 3;
                        gw[at..at + 12].copy_from_slice(&acc);
                    }
                    continue;
                }
                for kc in 0..k {
                    for kd in 0..k {
                        let mut acc = [0.0; 4];
                        for a in 0..h_out {
                            let src = (a * s + kc) * pw + kd;
                            let dst = a * w_out;
                            row_product_conj(
                                &gr[dst..dst + w_out],
                                &gx[dst..dst + w_out],
                                &gy[dst..dst + w_out],
                                &gz[dst..dst + w_out],
                                &ur[src..src + span],
                                &ux[src..src + span],
                                &uy[src..src + span],
                                &uz[src..src + span],
                                s,
                                &mut acc,
                            );
                        }
                        let at = 4 * ((ci * k + kc) * k + kd);
                        gw[at..at + 4].copy_from_slice(&acc);
                    }
                }
            }
        });

    // Input gradient, scattered into a padded buffer then cropped.
    let mut gin_padded = QTensor::zeros(layer.c_in, ph, pw)?;
    let phw = ph * pw;
    gin_padded
        .data_mut()
        .par_chunks_mut(4 * phw)
        .enumerate()
        .for_each(|(ci, chunk)| {
            let (pr, px, py, pz) = split_planes(chunk, phw);
            for o in 0..layer.c_out {
                let gr = grad_output.plane(o, 0);
                let gx = grad_output.plane(o, 1);
                let gy = grad_output.plane(o, 2);
                let gz = grad_output.plane(o, 3);
                if k == 3 {
                    let span3 = (w_out - 1) * s + 3;
                    for kc in 0..3 {
                        let taps = [
                            layer.weight_quat(o, ci, kc, 0).conjugate(),
                            layer.weight_quat(o, ci, kc, 1).conjugate(),
                            layer.weight_quat(o, ci, kc, 2).conjugate(),
                        ];
                        for a in 0..h_out {
                            let dst = (a * s + kc) * pw;
                            let src = a * w_out;
                            scatter_row3(
                                &mut pr[dst..dst + span3],
                                &mut px[dst..dst + span3],
                                &mut py[dst..dst + span3],
                                &mut pz[dst..dst + span3],
                                &gr[src..src + w_out],
                                &gx[src..src + w_out],
                                &gy[src..src + w_out],
                                &gz[src..src + w_out],
                                &taps,
                                s,
                            );
                        }
                    }
                    continue;
                }
                for kc in 0..k {
                    for kd in 0..k {
                        let wc = layer.weight_quat(o, ci, kc, kd).conjugate();
                        for a in 0..h_out {
                            let dst = (a * s + kc) * pw + kd;
                            let src = a * w_out;
                            scatter_row(
                                &mut pr[dst..dst + span],
                                &mut px[dst..dst + span],
                                &mut py[dst..dst + span],
                                &mut pz[dst..dst + span],
                                &gr[src..src + w_out],
                                &gx[src..src + w_out],
                                &gy[src..src + w_out],
                                &gz[src..src + w_out],
                                wc,
                                s,
                            );
                        }
                    }
                }
            }
        });
    let grad_input = crop(&gin_padded, h, w, p);
    Ok((grad_input, grads))
}

pub(super) fn forward_transposed(layer: &QConvLayer, input: &QTensor) -> Result<QTensor> {
    let (_, h, w) = input.shape();
    let (k, s, p) = (layer.kernel, layer.stride, layer.padding);
    let h_out = super::tconv_out_dim(h, k, s, p, layer.output_padding)?;
    let w_out = super::tconv_out_dim(w, k, s, p, layer.output_padding)?;
    // Scatter targets live at (a*s + kc, b*s + kd) before the padding crop.
    let bh = ((h - 1) * s + k).max(h_out + p);
    let bw = ((w - 1) * s + k).max(w_out + p);

    let mut buf = QTensor::zeros(layer.c_out, bh, bw)?;
    let bhw = bh * bw;
    buf.data_mut()
        .par_chunks_mut(4 * bhw)
        .enumerate()
        .for_each(|(co, chunk)| {
            let (br, bx, by, bz) = split_planes(chunk, bhw);
            for ci in 0..layer.c_in {
                let ur = input.plane(ci, 0);
                let ux = input.plane(ci, 1);
                let uy = input.plane(ci, 2);
                let uz = input.plane(ci, 3);
                if k == 3 {
                    let span3 = (w - 1) * s + 3;
                    for kc in 0..3 {
                        let taps = [
                            layer.weight_quat(co, ci, kc, 0).conjugate(),
                            layer.weight_quat(co, ci, kc, 1).conjugate(),
                            layer.weight_quat(co, ci, kc, 2).conjugate(),
                        ];
                        for a in 0..h {
                            let dst = (a * s + kc) * bw;
                            let src = a * w;
                            scatter_row3(
                                &mut br[dst..dst + span3],
                                &mut bx[dst..dst + span3],
                                &mut by[dst..dst + span3],
                                &mut bz[dst..dst + span3],
                                &ur[src..src + w],
                                &ux[src..src + w],
                                &uy[src..src + w],
                                &uz[src..src + w],
                                &taps,
                                s,
                            );
                        }
                    }
                    continue;
                }
                for kc in 0..k {
                    for kd in 0..k {
                        let wc = layer.weight_quat(co, ci, kc, kd).conjugate();
                        let span = (w - 1) * s + 1;
                        for a in 0..h {
                            let dst = (a * s + kc) * bw + kd;
                            let src = a * w;
                            scatter_row(
                                &mut br[dst..dst + span],
                                &mut bx[dst..dst + span],
                                &mut by[dst..dst + span],
                                &mut bz[dst..dst + span],
                                &ur[src..src + w],
                                &ux[src..src + w],
                                &uy[src..src + w],
                                &uz[src..src + w],
                                wc,
                                s,
                            );
                        }
                    }
                }
            }
        });

    let mut out = crop(&buf, h_out, w_out, p);
    for co in 0..layer.c_out {
        let bq = layer.bias_quat(co);
        for (comp, b) in bq.to_array().into_iter().enumerate() {
            for v in out.plane_mut(co, comp) {
                *v += b;
            }
        }
    }
    Ok(out)
}

pub(super) fn backward_transposed(
    layer: &QConvLayer,
    grad_output: &QTensor,
    input: &QTensor,
) -> Result<(QTensor, QLayerGrads)> {
    let (_, h, w) = input.shape();
    let (k, s, p) = (layer.kernel, layer.stride, layer.padding);
    let (_, h_out, w_out) = grad_output.shape();
    let bh = ((h - 1) * s + k).max(h_out + p);
    let bw = ((w - 1) * s + k).max(w_out + p);
    let gpad = embed(grad_output, bh, bw, p);
    let span = (w - 1) * s + 1;

    // Weight and bias gradients.
    let kk = layer.c_in * k * k;
    let mut grads = QLayerGrads {
        weights: vec![0.0; 4 * layer.c_out * kk],
        bias: vec![0.0; 4 * layer.c_out],
    };
    grads
        .weights
        .par_chunks_mut(4 * kk)
        .zip(grads.bias.par_chunks_mut(4))
        .enumerate()
        .for_each(|(co, (gw, gb))| {
            let gr = gpad.plane(co, 0);
            let gx = gpad.plane(co, 1);
            let gy = gpad.plane(co, 2);
            let gz = gpad.plane(co, 3);
            for (comp, b) in gb.iter_mut().enumerate() {
                *b = grad_output.plane(co, comp).iter().sum();
            }
            for ci in 0..layer.c_in {
                let ur = input.plane(ci, 0);
                let ux = input.plane(ci, 1);
                let uy = input.plane(ci, 2);
                let uz = input.plane(ci, 3);
                if k == 3 {
                    let span3 = (w - 1) * s + 3;
                    for kc in 0..3 {
                        let mut acc = [0.0; 12];
                        for a in 0..h {
                            let g0 = (a * s + kc) * bw;
                            let u0 = a * w;
                            // u ⊗ conj(g): input rows are the left operand.
                            row_product_conj3(
                                &ur[u0..u0 + w],
                                &ux[u0..u0 + w],
                                &uy[u0..u0 + w],
                                &uz[u0..u0 + w],
                                &gr[g0..g0 + span3],
                                &gx[g0..g0 + span3],
                                &gy[g0..g0 + span3],
                                &gz[g0..g0 + span3],
                                s,
                                &mut acc,
                            );
                        }
                        let at = 4 * (ci * 3 + kc) * 3;
                        gw[at..at + 12].copy_from_slice(&acc);
                    }
                    continue;
                }
                for kc in 0..k {
                    for kd in 0..k {
                        let mut acc = [0.0; 4];
                        for a in 0..h {
                            let g0 = (a * s + kc) * bw + kd;
                            let u0 = a * w;
                            // u ⊗ conj(g): input rows are the left operand.
                            row_product_conj(
                                &ur[u0..u0 + w],
                                &ux[u0..u0 + w],
                                &uy[u0..u0 + w],
                                &uz[u0..u0 + w],
                                &gr[g0..g0 + span],
                                &gx[g0..g0 + span],
                                &gy[g0..g0 + span],
                                &gz[g0..g0 + span],
                                s,
                                &mut acc,
                            );
                        }
                        let at = 4 * ((ci * k + kc) * k + kd);
                        gw[at..at + 4].copy_from_slice(&acc);
                    }
                }
            }
        });

    // Input gradient is a plain gather with the unconjugated weights.
    let mut grad_input = QTensor::zeros(layer.c_in, h, w)?;
    let hw = h * w;
    grad_input
        .data_mut()
        .par_chunks_mut(4 * hw)
        .enumerate()
        .for_each(|(ci, chunk)| {
            let (vr, vx, vy, vz) = split_planes(chunk, hw);
            for co in 0..layer.c_out {
                let gr = gpad.plane(co, 0);
                let gx = gpad.plane(co, 1);
                let gy = gpad.plane(co, 2);
                let gz = gpad.plane(co, 3);
                if k == 3 {
                    let span3 = (w - 1) * s + 3;
                    for kc in 0..3 {
                        let taps = [
                            layer.weight_quat(co, ci, kc, 0),
                            layer.weight_quat(co, ci, kc, 1),
                            layer.weight_quat(co, ci, kc, 2),
                        ];
                        for a in 0..h {
                            let src = (a * s + kc) * bw;
                            let dst = a * w;
                            gather_row3(
                                &mut vr[dst..dst + w],
                                &mut vx[dst..dst + w],
                                &mut vy[dst..dst + w],
                                &mut vz[dst..dst + w],
                                &gr[src..src + span3],
                                &gx[src..src + span3],
                                &gy[src..src + span3],
                                &gz[src..src + span3],
                                &taps,
                                s,
                            );
                        }
                    }
                    continue;
                }
                for kc in 0..k {
                    for kd in 0..k {
                        let wq = layer.weight_quat(co, ci, kc, kd);
                        for a in 0..h {
                            let src = (a * s + kc) * bw + kd;
                            let dst = a * w;
                            gather_row(
                                &mut vr[dst..dst + w],
                                &mut vx[dst..dst + w],
                                &mut vy[dst..dst + w],
                                &mut vz[dst..dst + w],
                                &gr[src..src + span],
                                &gx[src..src + span],
                                &gy[src..src + span],
                                &gz[src..src + span],
                                wq,
                                s,
                            );
                        }
                    }
                }
            }
        });
    Ok((grad_input, grads))
}
