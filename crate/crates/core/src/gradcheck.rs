//! Central finite-difference verification of every hand-written backward
//! pass. The checks perturb each parameter and input component in turn and
//! compare `(L(θ+ε) - L(θ-ε)) / 2ε` against the analytic gradient of the
//! probe loss `L(θ) = Σ forward(θ) · t` for a fixed random cotangent `t`.
//! Only the forward pass is exercised numerically, so the oracle is
//! independent of the backward code it is checking.

use crate::error::Result;
use crate::nn::{
    hardtanh_backward_q, hardtanh_forward_q, ConvMode, QConvLayer, RealConvLayer,
};
use crate::optim::mse_loss;
use crate::tensor::{QTensor, RealTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_EPSILON: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct GradCheck {
    pub name: String,
    pub max_rel_err: f64,
    pub components: usize,
    pub tolerance: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn fill_random(data: &mut [f64], rng: &mut ChaCha8Rng) {
    for v in data.iter_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Check one quaternion layer: every weight, bias, and input component.
fn check_q_layer(name: &str, mut layer: QConvLayer, input_shape: (usize, usize, usize), rng: &mut ChaCha8Rng) -> Result<GradCheck> {
    fill_random(&mut layer.weights, rng);
    fill_random(&mut layer.bias, rng);
    let (c, h, w) = input_shape;
    let mut input = QTensor::zeros(c, h, w)?;
    fill_random(input.data_mut(), rng);

    let (out, cache) = layer.forward(&input)?;
    let mut cot = QTensor::zeros(out.channels(), out.height(), out.width())?;
    fill_random(cot.data_mut(), rng);

    let (gin, grads) = layer.backward(&cot, &cache)?;
    let mut analytic = Vec::new();
    analytic.extend_from_slice(&grads.weights);
    analytic.extend_from_slice(&grads.bias);
    analytic.extend_from_slice(gin.data());

    let n_w = layer.weights.len();
    let n_b = layer.bias.len();
    let loss = |layer: &QConvLayer, input: &QTensor| -> f64 {
        let (out, _) = layer.forward(input).expect("forward in fd probe");
        dot(out.data(), cot.data())
    };

    let mut max_err = 0.0f64;
    let total = n_w + n_b + input.data().len();
    for idx in 0..total {
        let bump = |delta: f64| -> f64 {
            let mut l = layer.clone();
            let mut x = input.clone();
            if idx < n_w {
                l.weights[idx] += delta;
            } else if idx < n_w + n_b {
                l.bias[idx - n_w] += delta;
            } else {
                x.data_mut()[idx - n_w - n_b] += delta;
            }
            loss(&l, &x)
        };
        let numeric = (bump(FD_EPSILON) - bump(-FD_EPSILON)) / (2.0 * FD_EPSILON);
        max_err = max_err.max(rel_err(analytic[idx], numeric));
    }
    Ok(GradCheck {
        name: name.to_string(),
        max_rel_err: max_err,
        components: total,
        tolerance: FD_TOLERANCE,
    })
}

fn check_r_layer(name: &str, mut layer: RealConvLayer, input_shape: (usize, usize, usize), rng: &mut ChaCha8Rng) -> Result<GradCheck> {
    fill_random(&mut layer.weights, rng);
    fill_random(&mut layer.bias, rng);
    let (c, h, w) = input_shape;
    let mut input = RealTensor::zeros(c, h, w)?;
    fill_random(input.data_mut(), rng);

    let (out, cache) = layer.forward(&input)?;
    let mut cot = RealTensor::zeros(out.channels(), out.height(), out.width())?;
    fill_random(cot.data_mut(), rng);

    let (gin, grads) = layer.backward(&cot, &cache)?;
    let mut analytic = Vec::new();
    analytic.extend_from_slice(&grads.weights);
    analytic.extend_from_slice(&grads.bias);
    analytic.extend_from_slice(gin.data());

    let n_w = layer.weights.len();
    let n_b = layer.bias.len();
    let loss = |layer: &RealConvLayer, input: &RealTensor| -> f64 {
        let (out, _) = layer.forward(input).expect("forward in fd probe");
        dot(out.data(), cot.data())
    };

    let mut max_err = 0.0f64;
    let total = n_w + n_b + input.data().len();
    for idx in 0..total {
        let bump = |delta: f64| -> f64 {
            let mut l = layer.clone();
            let mut x = input.clone();
            if idx < n_w {
                l.weights[idx] += delta;
            } else if idx < n_w + n_b {
                l.bias[idx - n_w] += delta;
            } else {
                x.data_mut()[idx - n_w - n_b] += delta;
            }
            loss(&l, &x)
        };
        let numeric = (bump(FD_EPSILON) - bump(-FD_EPSILON)) / (2.0 * FD_EPSILON);
        max_err = max_err.max(rel_err(analytic[idx], numeric));
    }
    Ok(GradCheck {
        name: name.to_string(),
        max_rel_err: max_err,
        components: total,
        tolerance: FD_TOLERANCE,
    })
}

/// Hardtanh, with test points kept clear of the kinks at ±1 by more than
/// 10 ·ε so the central difference stays on one side.
fn check_hardtanh(rng: &mut ChaCha8Rng) -> Result<GradCheck> {
    let mut input = QTensor::zeros(2, 4, 5)?;
    for v in input.data_mut().iter_mut() {
        *v = loop {
            let cand: f64 = rng.random_range(-1.5..1.5);
            if (cand.abs() - 1.0).abs() > 10.0 * FD_EPSILON * 10.0 {
                break cand;
            }
        };
    }
    let (out, pre) = hardtanh_forward_q(&input);
    let mut cot = QTensor::zeros(out.channels(), out.height(), out.width())?;
    fill_random(cot.data_mut(), rng);
    let analytic = hardtanh_backward_q(&cot, &pre)?;

    let mut max_err = 0.0f64;
    for idx in 0..input.data().len() {
        let bump = |delta: f64| -> f64 {
            let mut x = input.clone();
            x.data_mut()[idx] += delta;
            let (out, _) = hardtanh_forward_q(&x);
            dot(out.data(), cot.data())
        };
        let numeric = (bump(FD_EPSILON) - bump(-FD_EPSILON)) / (2.0 * FD_EPSILON);
        max_err = max_err.max(rel_err(analytic.data()[idx], numeric));
    }
    Ok(GradCheck {
        name: "hardtanh".into(),
        max_rel_err: max_err,
        components: input.data().len(),
        tolerance: FD_TOLERANCE,
    })
}

fn check_mse(rng: &mut ChaCha8Rng) -> Result<GradCheck> {
    let mut pred = QTensor::zeros(2, 3, 4)?;
    let mut target = QTensor::zeros(2, 3, 4)?;
    fill_random(pred.data_mut(), rng);
    fill_random(target.data_mut(), rng);
    let (_, grad) = mse_loss(&pred, &target)?;

    let mut max_err = 0.0f64;
    for idx in 0..pred.data().len() {
        let bump = |delta: f64| -> f64 {
            let mut p = pred.clone();
            p.data_mut()[idx] += delta;
            mse_loss(&p, &target).expect("mse in fd probe").0
        };
        let numeric = (bump(FD_EPSILON) - bump(-FD_EPSILON)) / (2.0 * FD_EPSILON);
        max_err = max_err.max(rel_err(grad.data()[idx], numeric));
    }
    Ok(GradCheck {
        name: "mse_loss".into(),
        max_rel_err: max_err,
        components: pred.data().len(),
        tolerance: FD_TOLERANCE,
    })
}

/// The full finite-difference suite on small instances.
pub fn run_all(seed: u64) -> Result<Vec<GradCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    checks.push(check_q_layer(
        "qconv2d k3 s2 p1",
        QConvLayer::new(ConvMode::Conv, 3, 2, 3, 2, 1, 0)?,
        (2, 5, 6),
        &mut rng,
    )?);
    checks.push(check_q_layer(
        "qconv2d k1 s1",
        QConvLayer::new(ConvMode::Conv, 2, 2, 1, 1, 0, 0)?,
        (2, 3, 3),
        &mut rng,
    )?);
    checks.push(check_q_layer(
        "qtconv2d k3 s2 p1 op1",
        QConvLayer::new(ConvMode::Transposed, 2, 3, 3, 2, 1, 1)?,
        (3, 3, 4),
        &mut rng,
    )?);
    checks.push(check_q_layer(
        "qtconv2d k1 s1",
        QConvLayer::new(ConvMode::Transposed, 2, 2, 1, 1, 0, 0)?,
        (2, 3, 3),
        &mut rng,
    )?);
    checks.push(check_r_layer(
        "real_conv2d k3 s2 p1",
        RealConvLayer::new(ConvMode::Conv, 4, 3, 3, 2, 1, 0)?,
        (3, 5, 6),
        &mut rng,
    )?);
    checks.push(check_r_layer(
        "real_tconv2d k3 s2 p1 op1",
        RealConvLayer::new(ConvMode::Transposed, 3, 4, 3, 2, 1, 1)?,
        (4, 3, 4),
        &mut rng,
    )?);
    checks.push(check_hardtanh(&mut rng)?);
    checks.push(check_mse(&mut rng)?);
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for check in run_all(2024).unwrap() {
            assert!(
                check.passed(),
                "{} failed: max rel err {} over {} components",
                check.name,
                check.max_rel_err,
                check.components
            );
        }
    }
}
