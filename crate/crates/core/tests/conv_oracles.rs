//! The optimized convolution kernels against brute-force reference loops,
//! plus the block-matrix equivalence and the adjoint identity.

mod common;

use common::*;
use qcae_core::nn::{ConvMode, QConvLayer, RealConvLayer};
use rand::Rng;

#[test]
fn qconv_forward_matches_naive_loops() {
    let mut rng = seeded(101);
    for trial in 0..20 {
        let c_in = rng.random_range(1..=3);
        let c_out = rng.random_range(1..=3);
        let k = if rng.random_range(0..2) == 0 { 1 } else { 3 };
        let s = rng.random_range(1..=2);
        let p = rng.random_range(0..=1);
        let h = rng.random_range(k + 1..=9);
        let w = rng.random_range(k + 1..=9);
        let mut layer = QConvLayer::new(ConvMode::Conv, c_out, c_in, k, s, p, 0).unwrap();
        randomize_qlayer(&mut layer, &mut rng);
        let input = random_qtensor(c_in, h, w, &mut rng);
        let (out, _) = layer.forward(&input).unwrap();
        let reference = naive_qconv(&layer, &input);
        assert_eq!(out.shape(), reference.shape());
        let diff = max_abs_diff(out.data(), reference.data());
        assert!(diff < 1e-12, "trial {trial}: max diff {diff}");
    }
}

#[test]
fn qconv_forward_matches_naive_on_spec_instance() {
    // 1x6x6 input, k=3, stride 2, padding 1 -> 3x3 output
    let mut rng = seeded(102);
    let mut layer = QConvLayer::new(ConvMode::Conv, 1, 1, 3, 2, 1, 0).unwrap();
    randomize_qlayer(&mut layer, &mut rng);
    let input = random_qtensor(1, 6, 6, &mut rng);
    let (out, _) = layer.forward(&input).unwrap();
    assert_eq!(out.shape(), (1, 3, 3));
    assert!(max_abs_diff(out.data(), naive_qconv(&layer, &input).data()) < 1e-12);
}

#[test]
fn qtconv_forward_matches_naive_loops() {
    let mut rng = seeded(103);
    for trial in 0..20 {
        let c_in = rng.random_range(1..=3);
        let c_out = rng.random_range(1..=3);
        let k = if rng.random_range(0..2) == 0 { 1 } else { 3 };
        let s = rng.random_range(1..=2);
        let p = rng.random_range(0..=1).min(k - 1);
        let op = rng.random_range(0..s);
        let h = rng.random_range(2..=6);
        let w = rng.random_range(2..=6);
        if (h - 1) * s + k + op <= 2 * p || (w - 1) * s + k + op <= 2 * p {
            continue;
        }
        let mut layer = QConvLayer::new(ConvMode::Transposed, c_out, c_in, k, s, p, op).unwrap();
        randomize_qlayer(&mut layer, &mut rng);
        let input = random_qtensor(c_in, h, w, &mut rng);
        let (out, _) = layer.forward(&input).unwrap();
        let reference = naive_qtconv(&layer, &input);
        assert_eq!(out.shape(), reference.shape());
        let diff = max_abs_diff(out.data(), reference.data());
        assert!(diff < 1e-12, "trial {trial}: max diff {diff}");
    }
}

#[test]
fn tconv_size_formula() {
    // 1x3x3 input, k=3, stride 2, padding 1, output_padding 1 -> 6x6
    let layer = QConvLayer::new(ConvMode::Transposed, 1, 1, 3, 2, 1, 1).unwrap();
    assert_eq!(layer.output_dims(3, 3).unwrap(), (6, 6));
}

#[test]
fn rconv_matches_naive_loops() {
    let mut rng = seeded(104);
    // spec instance: random 3x8x8 input
    let mut layer = RealConvLayer::new(ConvMode::Conv, 2, 3, 3, 2, 1, 0).unwrap();
    randomize_rlayer(&mut layer, &mut rng);
    let input = random_rtensor(3, 8, 8, &mut rng);
    let (out, _) = layer.forward(&input).unwrap();
    assert!(max_abs_diff(out.data(), naive_rconv(&layer, &input).data()) < 1e-12);

    for _ in 0..10 {
        let c_in = rng.random_range(1..=4);
        let c_out = rng.random_range(1..=4);
        let k = if rng.random_range(0..2) == 0 { 1 } else { 3 };
        let s = rng.random_range(1..=2);
        let p = rng.random_range(0..=1);
        let h = rng.random_range(k + 1..=9);
        let w = rng.random_range(k + 1..=9);
        let mut layer = RealConvLayer::new(ConvMode::Conv, c_out, c_in, k, s, p, 0).unwrap();
        randomize_rlayer(&mut layer, &mut rng);
        let input = random_rtensor(c_in, h, w, &mut rng);
        let (out, _) = layer.forward(&input).unwrap();
        assert!(max_abs_diff(out.data(), naive_rconv(&layer, &input).data()) < 1e-12);
    }
}

#[test]
fn rtconv_matches_naive_loops() {
    let mut rng = seeded(105);
    for _ in 0..10 {
        let c_in = rng.random_range(1..=4);
        let c_out = rng.random_range(1..=4);
        let k = if rng.random_range(0..2) == 0 { 1 } else { 3 };
        let s = rng.random_range(1..=2);
        let p = rng.random_range(0..=1).min(k - 1);
        let op = rng.random_range(0..s);
        let h = rng.random_range(2..=6);
        let w = rng.random_range(2..=6);
        if (h - 1) * s + k + op <= 2 * p || (w - 1) * s + k + op <= 2 * p {
            continue;
        }
        let mut layer = RealConvLayer::new(ConvMode::Transposed, c_out, c_in, k, s, p, op).unwrap();
        randomize_rlayer(&mut layer, &mut rng);
        let input = random_rtensor(c_in, h, w, &mut rng);
        let (out, _) = layer.forward(&input).unwrap();
        assert!(max_abs_diff(out.data(), naive_rtconv(&layer, &input).data()) < 1e-12);
    }
}

#[test]
fn structured_equivalence_with_expanded_real_kernel() {
    // The quaternion conv equals the real conv whose kernel is built from the
    // 4x4 real-matrix blocks of each quaternion weight, acting on the
    // component-plane block layout.
    let mut rng = seeded(106);
    for trial in 0..20 {
        let c_in = rng.random_range(1..=4);
        let c_out = rng.random_range(1..=4);
        let k = if rng.random_range(0..2) == 0 { 1 } else { 3 };
        let s = rng.random_range(1..=2);
        let p = rng.random_range(0..=1);
        let h = rng.random_range(k..=10);
        let w = rng.random_range(k..=10);
        let mut layer = QConvLayer::new(ConvMode::Conv, c_out, c_in, k, s, p, 0).unwrap();
        randomize_qlayer(&mut layer, &mut rng);
        let real_layer = expand_to_real(&layer);
        // exactly 4x the real weight parameters
        assert_eq!(real_layer.weights.len(), 4 * layer.weights.len());

        let input = random_qtensor(c_in, h, w, &mut rng);
        let (q_out, _) = layer.forward(&input).unwrap();
        let (r_out, _) = real_layer.forward(&input.to_real_blocks()).unwrap();
        let diff = max_abs_diff(q_out.to_real_blocks().data(), r_out.data());
        assert!(diff < 1e-12, "trial {trial}: max diff {diff}");
    }
}

#[test]
fn adjoint_identity_quaternion() {
    let mut rng = seeded(107);
    for trial in 0..20 {
        let c_in = rng.random_range(1..=3);
        let c_out = rng.random_range(1..=3);
        let k = if rng.random_range(0..2) == 0 { 1 } else { 3 };
        let s = rng.random_range(1..=2);
        let p = rng.random_range(0..=1);
        let h = rng.random_range(k + 1..=8);
        // same stride residue on both axes so one output_padding fits both
        let w = {
            let cand = rng.random_range(k + 1..=8);
            if (cand + 2 * p) % s == (h + 2 * p) % s {
                cand
            } else {
                cand + 1
            }
        };
        let mut conv = QConvLayer::new(ConvMode::Conv, c_out, c_in, k, s, p, 0).unwrap();
        randomize_qlayer(&mut conv, &mut rng);
        conv.bias.fill(0.0);

        let u = random_qtensor(c_in, h, w, &mut rng);
        let (cu, _) = conv.forward(&u).unwrap();

        let op_h = (h + 2 * p - k) % s;
        let tconv = tied_transposed_q(&conv, op_h);
        let v = random_qtensor(cu.channels(), cu.height(), cu.width(), &mut rng);
        let tv = tconv.forward(&v).unwrap().0;
        assert_eq!(tv.shape(), u.shape(), "trial {trial}");

        let lhs = inner_q(&cu, &v);
        let rhs = inner_q(&u, &tv);
        assert!(
            (lhs - rhs).abs() < 1e-10,
            "trial {trial}: <conv(u),v> = {lhs} but <u,tconv(v)> = {rhs}"
        );
    }
}

#[test]
fn adjoint_identity_real() {
    let mut rng = seeded(108);
    for trial in 0..20 {
        let c_in = rng.random_range(1..=4);
        let c_out = rng.random_range(1..=4);
        let k = if rng.random_range(0..2) == 0 { 1 } else { 3 };
        let s = rng.random_range(1..=2);
        let p = rng.random_range(0..=1);
        let h = rng.random_range(k + 1..=8);
        let w = {
            let cand = rng.random_range(k + 1..=8);
            if (cand + 2 * p) % s == (h + 2 * p) % s {
                cand
            } else {
                cand + 1
            }
        };
        let mut conv = RealConvLayer::new(ConvMode::Conv, c_out, c_in, k, s, p, 0).unwrap();
        randomize_rlayer(&mut conv, &mut rng);
        conv.bias.fill(0.0);

        let u = random_rtensor(c_in, h, w, &mut rng);
        let (cu, _) = conv.forward(&u).unwrap();

        let op_h = (h + 2 * p - k) % s;
        let tconv = tied_transposed_r(&conv, op_h);
        let v = random_rtensor(cu.channels(), cu.height(), cu.width(), &mut rng);
        let tv = tconv.forward(&v).unwrap().0;
        assert_eq!(tv.shape(), u.shape(), "trial {trial}");

        let lhs = inner_r(&cu, &v);
        let rhs = inner_r(&u, &tv);
        assert!(
            (lhs - rhs).abs() < 1e-10,
            "trial {trial}: {lhs} vs {rhs}"
        );
    }
}

#[test]
fn backward_matches_naive_forward_differences() {
    // Independent check of the optimized backward against finite differences
    // of the *naive* forward, so neither side shares code with the other.
    let mut rng = seeded(109);
    let mut layer = QConvLayer::new(ConvMode::Conv, 2, 2, 3, 2, 1, 0).unwrap();
    randomize_qlayer(&mut layer, &mut rng);
    let input = random_qtensor(2, 4, 5, &mut rng);
    let (out, cache) = layer.forward(&input).unwrap();
    let cot = random_qtensor(out.channels(), out.height(), out.width(), &mut rng);
    let (gin, grads) = layer.backward(&cot, &cache).unwrap();

    let eps = 1e-5;
    let loss = |l: &QConvLayer, x: &qcae_core::QTensor| -> f64 {
        naive_qconv(l, x)
            .data()
            .iter()
            .zip(cot.data().iter())
            .map(|(a, b)| a * b)
            .sum()
    };
    // a sample of weight and input coordinates
    for idx in [0usize, 5, 17, 44, layer.weights.len() - 1] {
        let mut hi = layer.clone();
        let mut lo = layer.clone();
        hi.weights[idx] += eps;
        lo.weights[idx] -= eps;
        let fd = (loss(&hi, &input) - loss(&lo, &input)) / (2.0 * eps);
        let a = grads.weights[idx];
        assert!((a - fd).abs() / a.abs().max(fd.abs()).max(1e-6) < 1e-4);
    }
    for idx in [0usize, 31, 77, input.data().len() - 1] {
        let mut hi = input.clone();
        let mut lo = input.clone();
        hi.data_mut()[idx] += eps;
        lo.data_mut()[idx] -= eps;
        let fd = (loss(&layer, &hi) - loss(&layer, &lo)) / (2.0 * eps);
        let a = gin.data()[idx];
        assert!((a - fd).abs() / a.abs().max(fd.abs()).max(1e-6) < 1e-4);
    }
}
