//! Shared test helpers: naive reference implementations of every convolution
//! variant (straight loops over `get`/`set` and the scalar Hamilton product)
//! and the block-matrix expansion of a quaternion layer. These stay
//! deliberately independent of the optimized kernel code paths.

use qcae_core::nn::{ConvMode, QConvLayer, RealConvLayer};
use qcae_core::quat::Quaternion;
use qcae_core::tensor::{QTensor, RealTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_qtensor(c: usize, h: usize, w: usize, rng: &mut ChaCha8Rng) -> QTensor {
    let data = (0..4 * c * h * w)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    QTensor::from_data(c, h, w, data).unwrap()
}

pub fn random_rtensor(c: usize, h: usize, w: usize, rng: &mut ChaCha8Rng) -> RealTensor {
    let data = (0..c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
    RealTensor::from_data(c, h, w, data).unwrap()
}

pub fn randomize_qlayer(layer: &mut QConvLayer, rng: &mut ChaCha8Rng) {
    for v in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
        *v = rng.random_range(-1.0..1.0);
    }
}

pub fn randomize_rlayer(layer: &mut RealConvLayer, rng: &mut ChaCha8Rng) {
    for v in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
        *v = rng.random_range(-1.0..1.0);
    }
}

/// Brute-force quaternion convolution: triple loop, zero padding handled by
/// bounds tests on signed indices.
pub fn naive_qconv(layer: &QConvLayer, input: &QTensor) -> QTensor {
    assert_eq!(layer.mode, ConvMode::Conv);
    let (c_in, h, w) = input.shape();
    let (k, s, p) = (layer.kernel, layer.stride, layer.padding);
    let h_out = (h + 2 * p - k) / s + 1;
    let w_out = (w + 2 * p - k) / s + 1;
    let mut out = QTensor::zeros(layer.c_out, h_out, w_out).unwrap();
    for o in 0..layer.c_out {
        for a in 0..h_out {
            for b in 0..w_out {
                let mut acc = layer.bias_quat(o);
                for ci in 0..c_in {
                    for kc in 0..k {
                        for kd in 0..k {
                            let i = (a * s + kc) as isize - p as isize;
                            let j = (b * s + kd) as isize - p as isize;
                            if i < 0 || j < 0 || i >= h as isize || j >= w as isize {
                                continue;
                            }
                            let u = input.get(ci, i as usize, j as usize).unwrap();
                            acc = acc + layer.weight_quat(o, ci, kc, kd).hamilton(u);
                        }
                    }
                }
                out.set(o, a, b, acc).unwrap();
            }
        }
    }
    out
}

/// Brute-force transposed quaternion convolution, written as the explicit
/// adjoint sum: every input element scatters `conj(w) ⊗ v` to its targets.
pub fn naive_qtconv(layer: &QConvLayer, input: &QTensor) -> QTensor {
    assert_eq!(layer.mode, ConvMode::Transposed);
    let (c_in, h, w) = input.shape();
    let (k, s, p, op) = (layer.kernel, layer.stride, layer.padding, layer.output_padding);
    let h_out = (h - 1) * s + k + op - 2 * p;
    let w_out = (w - 1) * s + k + op - 2 * p;
    let mut out = QTensor::zeros(layer.c_out, h_out, w_out).unwrap();
    for co in 0..layer.c_out {
        for ci in 0..c_in {
            for alpha in 0..h {
                for beta in 0..w {
                    let v = input.get(ci, alpha, beta).unwrap();
                    for kc in 0..k {
                        for kd in 0..k {
                            let i = (alpha * s + kc) as isize - p as isize;
                            let j = (beta * s + kd) as isize - p as isize;
                            if i < 0 || j < 0 || i >= h_out as isize || j >= w_out as isize {
                                continue;
                            }
                            let w_conj = layer.weight_quat(co, ci, kc, kd).conjugate();
                            let prev = out.get(co, i as usize, j as usize).unwrap();
                            out.set(co, i as usize, j as usize, prev + w_conj.hamilton(v))
                                .unwrap();
                        }
                    }
                }
            }
        }
    }
    for co in 0..layer.c_out {
        let b = layer.bias_quat(co);
        for i in 0..h_out {
            for j in 0..w_out {
                let prev = out.get(co, i, j).unwrap();
                out.set(co, i, j, prev + b).unwrap();
            }
        }
    }
    out
}

/// Brute-force real cross-correlation.
pub fn naive_rconv(layer: &RealConvLayer, input: &RealTensor) -> RealTensor {
    assert_eq!(layer.mode, ConvMode::Conv);
    let (c_in, h, w) = input.shape();
    let (k, s, p) = (layer.kernel, layer.stride, layer.padding);
    let h_out = (h + 2 * p - k) / s + 1;
    let w_out = (w + 2 * p - k) / s + 1;
    let mut out = RealTensor::zeros(layer.c_out, h_out, w_out).unwrap();
    for o in 0..layer.c_out {
        for a in 0..h_out {
            for b in 0..w_out {
                let mut acc = layer.bias[o];
                for ci in 0..c_in {
                    for kc in 0..k {
                        for kd in 0..k {
                            let i = (a * s + kc) as isize - p as isize;
                            let j = (b * s + kd) as isize - p as isize;
                            if i < 0 || j < 0 || i >= h as isize || j >= w as isize {
                                continue;
                            }
                            acc += layer.weight_at(o, ci, kc, kd)
                                * input.get(ci, i as usize, j as usize).unwrap();
                        }
                    }
                }
                out.set(o, a, b, acc).unwrap();
            }
        }
    }
    out
}

pub fn naive_rtconv(layer: &RealConvLayer, input: &RealTensor) -> RealTensor {
    assert_eq!(layer.mode, ConvMode::Transposed);
    let (c_in, h, w) = input.shape();
    let (k, s, p, op) = (layer.kernel, layer.stride, layer.padding, layer.output_padding);
    let h_out = (h - 1) * s + k + op - 2 * p;
    let w_out = (w - 1) * s + k + op - 2 * p;
    let mut out = RealTensor::zeros(layer.c_out, h_out, w_out).unwrap();
    for co in 0..layer.c_out {
        for ci in 0..c_in {
            for alpha in 0..h {
                for beta in 0..w {
                    let v = input.get(ci, alpha, beta).unwrap();
                    for kc in 0..k {
                        for kd in 0..k {
                            let i = (alpha * s + kc) as isize - p as isize;
                            let j = (beta * s + kd) as isize - p as isize;
                            if i < 0 || j < 0 || i >= h_out as isize || j >= w_out as isize {
                                continue;
                            }
                            let prev = out.get(co, i as usize, j as usize).unwrap();
                            out.set(
                                co,
                                i as usize,
                                j as usize,
                                prev + layer.weight_at(co, ci, kc, kd) * v,
                            )
                            .unwrap();
                        }
                    }
                }
            }
        }
    }
    for co in 0..layer.c_out {
        let b = layer.bias[co];
        for i in 0..h_out {
            for j in 0..w_out {
                let prev = out.get(co, i, j).unwrap();
                out.set(co, i, j, prev + b).unwrap();
            }
        }
    }
    out
}

/// Expand a quaternion conv layer into the real layer on 4x the channels
/// whose 4x4 blocks are the real-matrix representation of each quaternion
/// weight. Real channel `m*C + c` is component `m` of quaternion channel `c`,
/// matching `QTensor::to_real_blocks`.
pub fn expand_to_real(layer: &QConvLayer) -> RealConvLayer {
    let (c_out, c_in, k) = (layer.c_out, layer.c_in, layer.kernel);
    let mut real = RealConvLayer::new(
        layer.mode,
        4 * c_out,
        4 * c_in,
        k,
        layer.stride,
        layer.padding,
        layer.output_padding,
    )
    .unwrap();
    for o in 0..c_out {
        for ci in 0..c_in {
            for kc in 0..k {
                for kd in 0..k {
                    let m = layer.weight_quat(o, ci, kc, kd).to_real_matrix();
                    for (mo, row) in m.iter().enumerate() {
                        for (mi, &v) in row.iter().enumerate() {
                            let ro = mo * c_out + o;
                            let rc = mi * c_in + ci;
                            let at = ((ro * 4 * c_in + rc) * k + kc) * k + kd;
                            real.weights[at] = v;
                        }
                    }
                }
            }
        }
    }
    for o in 0..c_out {
        for comp in 0..4 {
            real.bias[comp * c_out + o] = layer.bias[4 * o + comp];
        }
    }
    real
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Euclidean inner product over all real components.
pub fn inner_q(a: &QTensor, b: &QTensor) -> f64 {
    a.data().iter().zip(b.data().iter()).map(|(x, y)| x * y).sum()
}

pub fn inner_r(a: &RealTensor, b: &RealTensor) -> f64 {
    a.data().iter().zip(b.data().iter()).map(|(x, y)| x * y).sum()
}

/// Transposed layer sharing the conv layer's weight bank (channel axes
/// swapped), bias zero.
pub fn tied_transposed_q(conv: &QConvLayer, output_padding: usize) -> QConvLayer {
    let mut t = QConvLayer::new(
        ConvMode::Transposed,
        conv.c_in,
        conv.c_out,
        conv.kernel,
        conv.stride,
        conv.padding,
        output_padding,
    )
    .unwrap();
    let k = conv.kernel;
    for a in 0..conv.c_in {
        for b in 0..conv.c_out {
            for kc in 0..k {
                for kd in 0..k {
                    let src = 4 * (((b * conv.c_in + a) * k + kc) * k + kd);
                    let dst = 4 * (((a * conv.c_out + b) * k + kc) * k + kd);
                    t.weights[dst..dst + 4].copy_from_slice(&conv.weights[src..src + 4]);
                }
            }
        }
    }
    t
}

pub fn tied_transposed_r(conv: &RealConvLayer, output_padding: usize) -> RealConvLayer {
    let mut t = RealConvLayer::new(
        ConvMode::Transposed,
        conv.c_in,
        conv.c_out,
        conv.kernel,
        conv.stride,
        conv.padding,
        output_padding,
    )
    .unwrap();
    let k = conv.kernel;
    for a in 0..conv.c_in {
        for b in 0..conv.c_out {
            for kc in 0..k {
                for kd in 0..k {
                    t.weights[((a * conv.c_out + b) * k + kc) * k + kd] =
                        conv.weights[((b * conv.c_in + a) * k + kc) * k + kd];
                }
            }
        }
    }
    t
}

pub fn quat_from_rng(rng: &mut ChaCha8Rng) -> Quaternion {
    Quaternion::new(
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
    )
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
