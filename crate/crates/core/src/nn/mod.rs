//! Quaternion and real convolutional layers with hand-written reverse-mode
//! backward passes, the split hardtanh activation, and weight initialization.

mod act;
mod init;
mod qconv;
mod rconv;

pub use act::{
    hardtanh, hardtanh_backward_q, hardtanh_backward_real, hardtanh_forward_q,
    hardtanh_forward_real,
};
pub use init::{init_quaternion_weights, init_real_weights, quaternion_weight_bank, real_weight_bank};

use crate::error::{Error, Result};
use crate::quat::Quaternion;
use crate::tensor::{QTensor, RealTensor};
use serde::{Deserialize, Serialize};

/// Whether a layer applies the strided cross-correlation or its adjoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvMode {
    Conv,
    Transposed,
}

/// Learnable quaternion convolution (or transposed convolution) layer.
///
/// Weights are a `(C_out, C_in, K, K)` bank of quaternions stored with the
/// four components of each quaternion adjacent in `(r, x, y, z)` order;
/// `bias` holds `C_out` quaternions in the same packing.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QConvLayer {
    pub c_out: usize,
    pub c_in: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub output_padding: usize,
    pub mode: ConvMode,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Real-valued counterpart used by the CAE baseline. Same conventions,
/// one scalar where the quaternion layer has four.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RealConvLayer {
    pub c_out: usize,
    pub c_in: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub output_padding: usize,
    pub mode: ConvMode,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Input tensor saved by a forward pass for the matching backward pass.
#[derive(Clone, Debug)]
pub struct QConvCache {
    pub input: QTensor,
}

#[derive(Clone, Debug)]
pub struct RealConvCache {
    pub input: RealTensor,
}

/// Parameter gradients in the same packing as the layer's own storage.
#[derive(Clone, Debug)]
pub struct QLayerGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RealLayerGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

fn validate_geometry(
    c_out: usize,
    c_in: usize,
    kernel: usize,
    stride: usize,
    output_padding: usize,
    mode: ConvMode,
) -> Result<()> {
    if c_out == 0 || c_in == 0 || kernel == 0 || stride == 0 {
        return Err(Error::Config(format!(
            "layer dimensions must be positive (c_out={c_out}, c_in={c_in}, k={kernel}, stride={stride})"
        )));
    }
    match mode {
        ConvMode::Conv if output_padding != 0 => Err(Error::Config(
            "output_padding only applies to transposed layers".into(),
        )),
        ConvMode::Transposed if output_padding >= stride => Err(Error::Config(format!(
            "output_padding {output_padding} must be smaller than stride {stride}"
        ))),
        _ => Ok(()),
    }
}

/// Spatial output size of a strided cross-correlation.
pub fn conv_out_dim(input: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    let padded = input + 2 * padding;
    if padded < kernel {
        return Err(Error::shape(format!(
            "input size {input} with padding {padding} is smaller than kernel {kernel}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

/// Spatial output size of the transposed convolution.
pub fn tconv_out_dim(
    input: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    output_padding: usize,
) -> Result<usize> {
    let grown = (input - 1) * stride + kernel + output_padding;
    grown.checked_sub(2 * padding).filter(|&d| d > 0).ok_or_else(|| {
        Error::shape(format!(
            "transposed output size is not positive for input {input}, kernel {kernel}, \
             stride {stride}, padding {padding}, output_padding {output_padding}"
        ))
    })
}

impl QConvLayer {
    /// Zero-initialized layer; callers fill `weights` afterwards.
    pub fn new(
        mode: ConvMode,
        c_out: usize,
        c_in: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        output_padding: usize,
    ) -> Result<Self> {
        validate_geometry(c_out, c_in, kernel, stride, output_padding, mode)?;
        Ok(QConvLayer {
            c_out,
            c_in,
            kernel,
            stride,
            padding,
            output_padding,
            mode,
            weights: vec![0.0; 4 * c_out * c_in * kernel * kernel],
            bias: vec![0.0; 4 * c_out],
        })
    }

    /// Count of real scalars held by the layer.
    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Weight quaternion at `(o, ci, kc, kd)`.
    #[inline(always)]
    pub fn weight_quat(&self, o: usize, ci: usize, kc: usize, kd: usize) -> Quaternion {
        let at = 4 * (((o * self.c_in + ci) * self.kernel + kc) * self.kernel + kd);
        Quaternion::new(
            self.weights[at],
            self.weights[at + 1],
            self.weights[at + 2],
            self.weights[at + 3],
        )
    }

    /// Bias quaternion of output channel `o`.
    pub fn bias_quat(&self, o: usize) -> Quaternion {
        Quaternion::new(
            self.bias[4 * o],
            self.bias[4 * o + 1],
            self.bias[4 * o + 2],
            self.bias[4 * o + 3],
        )
    }

    /// Output spatial dimensions for an `(h, w)` input.
    pub fn output_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        match self.mode {
            ConvMode::Conv => Ok((
                conv_out_dim(h, self.kernel, self.stride, self.padding)?,
                conv_out_dim(w, self.kernel, self.stride, self.padding)?,
            )),
            ConvMode::Transposed => Ok((
                tconv_out_dim(h, self.kernel, self.stride, self.padding, self.output_padding)?,
                tconv_out_dim(w, self.kernel, self.stride, self.padding, self.output_padding)?,
            )),
        }
    }

    fn check_input(&self, input: &QTensor) -> Result<()> {
        if input.channels() != self.c_in {
            return Err(Error::shape(format!(
                "layer expects {} input channels, got {}",
                self.c_in,
                input.channels()
            )));
        }
        Ok(())
    }

    /// Pre-activation forward pass. The activation is composed separately.
    pub fn forward(&self, input: &QTensor) -> Result<(QTensor, QConvCache)> {
        self.check_input(input)?;
        let out = match self.mode {
            ConvMode::Conv => qconv::forward(self, input)?,
            ConvMode::Transposed => qconv::forward_transposed(self, input)?,
        };
        Ok((
            out,
            QConvCache {
                input: input.clone(),
            },
        ))
    }

    /// Reverse-mode gradients of [`QConvLayer::forward`] for the given
    /// upstream gradient.
    pub fn backward(
        &self,
        grad_output: &QTensor,
        cache: &QConvCache,
    ) -> Result<(QTensor, QLayerGrads)> {
        self.check_input(&cache.input)?;
        let (eh, ew) = self.output_dims(cache.input.height(), cache.input.width())?;
        if grad_output.shape() != (self.c_out, eh, ew) {
            return Err(Error::shape(format!(
                "grad_output shape {:?} does not match forward output ({}, {eh}, {ew})",
                grad_output.shape(),
                self.c_out
            )));
        }
        match self.mode {
            ConvMode::Conv => qconv::backward(self, grad_output, &cache.input),
            ConvMode::Transposed => qconv::backward_transposed(self, grad_output, &cache.input),
        }
    }
}

impl RealConvLayer {
    pub fn new(
        mode: ConvMode,
        c_out: usize,
        c_in: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        output_padding: usize,
    ) -> Result<Self> {
        validate_geometry(c_out, c_in, kernel, stride, output_padding, mode)?;
        Ok(RealConvLayer {
            c_out,
            c_in,
            kernel,
            stride,
            padding,
            output_padding,
            mode,
            weights: vec![0.0; c_out * c_in * kernel * kernel],
            bias: vec![0.0; c_out],
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Weight scalar at `(o, ci, kc, kd)`.
    #[inline(always)]
    pub fn weight_at(&self, o: usize, ci: usize, kc: usize, kd: usize) -> f64 {
        self.weights[((o * self.c_in + ci) * self.kernel + kc) * self.kernel + kd]
    }

    pub fn output_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        match self.mode {
            ConvMode::Conv => Ok((
                conv_out_dim(h, self.kernel, self.stride, self.padding)?,
                conv_out_dim(w, self.kernel, self.stride, self.padding)?,
            )),
            ConvMode::Transposed => Ok((
                tconv_out_dim(h, self.kernel, self.stride, self.padding, self.output_padding)?,
                tconv_out_dim(w, self.kernel, self.stride, self.padding, self.output_padding)?,
            )),
        }
    }

    fn check_input(&self, input: &RealTensor) -> Result<()> {
        if input.channels() != self.c_in {
            return Err(Error::shape(format!(
                "layer expects {} input channels, got {}",
                self.c_in,
                input.channels()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, input: &RealTensor) -> Result<(RealTensor, RealConvCache)> {
        self.check_input(input)?;
        let out = match self.mode {
            ConvMode::Conv => rconv::forward(self, input)?,
            ConvMode::Transposed => rconv::forward_transposed(self, input)?,
        };
        Ok((
            out,
            RealConvCache {
                input: input.clone(),
            },
        ))
    }

    pub fn backward(
        &self,
        grad_output: &RealTensor,
        cache: &RealConvCache,
    ) -> Result<(RealTensor, RealLayerGrads)> {
        self.check_input(&cache.input)?;
        let (eh, ew) = self.output_dims(cache.input.height(), cache.input.width())?;
        if grad_output.shape() != (self.c_out, eh, ew) {
            return Err(Error::shape(format!(
                "grad_output shape {:?} does not match forward output ({}, {eh}, {ew})",
                grad_output.shape(),
                self.c_out
            )));
        }
        match self.mode {
            ConvMode::Conv => rconv::backward(self, grad_output, &cache.input),
            ConvMode::Transposed => rconv::backward_transposed(self, grad_output, &cache.input),
        }
    }
}
