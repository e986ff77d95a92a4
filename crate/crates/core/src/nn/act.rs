//! Split hardtanh activation.
//!
//! Applied independently to every real component of a quaternion tensor
//! (the "split" convention) or to every scalar of a real tensor. The
//! subgradient at exactly ±1 is taken to be 0, matching the clamped region.

use crate::error::{Error, Result};
use crate::tensor::{QTensor, RealTensor};

#[inline(always)]
pub fn hardtanh(v: f64) -> f64 {
    v.clamp(-1.0, 1.0)
}

#[inline(always)]
fn pass_mask(pre: f64) -> f64 {
    if pre > -1.0 && pre < 1.0 {
        1.0
    } else {
        0.0
    }
}

fn forward_slice(data: &[f64], out: &mut [f64]) {
    for (o, &v) in out.iter_mut().zip(data.iter()) {
        *o = hardtanh(v);
    }
}

fn backward_slice(grad: &[f64], pre: &[f64], out: &mut [f64]) {
    for ((o, &g), &p) in out.iter_mut().zip(grad.iter()).zip(pre.iter()) {
        *o = g * pass_mask(p);
    }
}

/// Clamp every component to `[-1, 1]`; the returned cache is the
/// pre-activation tensor needed by the backward pass.
pub fn hardtanh_forward_q(t: &QTensor) -> (QTensor, QTensor) {
    let mut out = t.clone();
    forward_slice(t.data(), out.data_mut());
    (out, t.clone())
}

pub fn hardtanh_backward_q(grad: &QTensor, pre: &QTensor) -> Result<QTensor> {
    if grad.shape() != pre.shape() {
        return Err(Error::shape(format!(
            "hardtanh grad shape {:?} does not match cache {:?}",
            grad.shape(),
            pre.shape()
        )));
    }
    let mut out = grad.clone();
    backward_slice(grad.data(), pre.data(), out.data_mut());
    Ok(out)
}

pub fn hardtanh_forward_real(t: &RealTensor) -> (RealTensor, RealTensor) {
    let mut out = t.clone();
    forward_slice(t.data(), out.data_mut());
    (out, t.clone())
}

pub fn hardtanh_backward_real(grad: &RealTensor, pre: &RealTensor) -> Result<RealTensor> {
    if grad.shape() != pre.shape() {
        return Err(Error::shape(format!(
            "hardtanh grad shape {:?} does not match cache {:?}",
            grad.shape(),
            pre.shape()
        )));
    }
    let mut out = grad.clone();
    backward_slice(grad.data(), pre.data(), out.data_mut());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_and_gradient_cases() {
        let pre = RealTensor::from_data(1, 1, 4, vec![0.5, 2.0, -1.0, -3.7]).unwrap();
        let (out, cache) = hardtanh_forward_real(&pre);
        assert_eq!(out.data(), &[0.5, 1.0, -1.0, -1.0]);

        let grad = RealTensor::from_data(1, 1, 4, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let back = hardtanh_backward_real(&grad, &cache).unwrap();
        // passes strictly inside (-1, 1); zero outside and at the boundary
        assert_eq!(back.data(), &[1.0, 0.0, 0.0, 0.0]);
    }
}
