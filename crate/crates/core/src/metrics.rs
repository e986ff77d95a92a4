//! Reconstruction quality metrics and parameter accounting.

use crate::error::{Error, Result};
use crate::imaging::ImageBuffer;
use crate::model::Model;
use serde::{Deserialize, Serialize};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;

fn check_same_dims(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::shape(format!(
            "image dimensions differ: {}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB over all `3·H·W` 8-bit components, with
/// a 255 peak. Identical images yield `+∞`.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_same_dims(a, b)?;
    let mut sum_sq = 0.0f64;
    for (&pa, &pb) in a.data().iter().zip(b.data().iter()) {
        let d = pa as f64 - pb as f64;
        sum_sq += d * d;
    }
    let mse = sum_sq / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

fn luma_channel(img: &ImageBuffer) -> Vec<f64> {
    img.data()
        .chunks_exact(3)
        .map(|px| 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64)
        .collect()
}

fn gaussian_window() -> [f64; SSIM_WINDOW * SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for i in 0..SSIM_WINDOW {
        for j in 0..SSIM_WINDOW {
            let du = i as f64 - half;
            let dv = j as f64 - half;
            let v = (-(du * du + dv * dv) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            w[i * SSIM_WINDOW + j] = v;
            sum += v;
        }
    }
    for v in w.iter_mut() {
        *v /= sum;
    }
    w
}

/// Mean local SSIM over the luma channel: 11x11 Gaussian window (σ = 1.5),
/// `C1 = (0.01·255)²`, `C2 = (0.03·255)²`, windows fully inside the image.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_same_dims(a, b)?;
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::shape(format!(
            "image {h}x{w} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let la = luma_channel(a);
    let lb = luma_channel(b);
    let window = gaussian_window();

    let c1 = (0.01 * 255.0) * (0.01 * 255.0);
    let c2 = (0.03 * 255.0) * (0.03 * 255.0);

    let mut total = 0.0;
    let mut count = 0usize;
    for i0 in 0..=(h - SSIM_WINDOW) {
        for j0 in 0..=(w - SSIM_WINDOW) {
            let (mut mu_a, mut mu_b) = (0.0, 0.0);
            let (mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0);
            for wi in 0..SSIM_WINDOW {
                let row = (i0 + wi) * w + j0;
                let wrow = wi * SSIM_WINDOW;
                for wj in 0..SSIM_WINDOW {
                    let g = window[wrow + wj];
                    let va = la[row + wj];
                    let vb = lb[row + wj];
                    mu_a += g * va;
                    mu_b += g * vb;
                    aa += g * va * va;
                    bb += g * vb * vb;
                    ab += g * va * vb;
                }
            }
            let var_a = aa - mu_a * mu_a;
            let var_b = bb - mu_b * mu_b;
            let cov = ab - mu_a * mu_b;
            let s = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            total += s;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Mean normalized inter-channel deviation: `(|R-G| + |G-B| + |B-R|) / (3·255)`
/// averaged over pixels. Exactly zero iff the image is achromatic.
pub fn colorfulness(img: &ImageBuffer) -> f64 {
    let mut total = 0.0f64;
    for px in img.data().chunks_exact(3) {
        let (r, g, b) = (px[0] as f64, px[1] as f64, px[2] as f64);
        total += (r - g).abs() + (g - b).abs() + (b - r).abs();
    }
    total / (3.0 * 255.0 * (img.height() * img.width()) as f64)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerParamCount {
    pub layer: String,
    pub real_scalars: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamCountReport {
    pub per_layer: Vec<LayerParamCount>,
    pub total: usize,
}

/// Real-scalar parameter counts per layer and in total. A quaternion weight
/// or bias counts as four scalars.
pub fn count_parameters(model: &Model) -> ParamCountReport {
    let per_layer: Vec<LayerParamCount> = model
        .layer_parameter_counts()
        .into_iter()
        .map(|(layer, real_scalars)| LayerParamCount {
            layer,
            real_scalars,
        })
        .collect();
    ParamCountReport {
        total: per_layer.iter().map(|l| l.real_scalars).sum(),
        per_layer,
    }
}

/// Parameters of a real dense layer with `units` inputs and `units` outputs,
/// bias-free.
pub fn dense_real_params(units: usize) -> usize {
    units * units
}

/// Real scalars of the quaternion dense layer matching `units` real
/// inputs/outputs: `units/4` quaternion units each way, four scalars per
/// quaternion weight.
pub fn dense_quaternion_real_params(units: usize) -> usize {
    (units / 4) * (units / 4) * 4
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;
    use crate::imaging::to_gray_luma;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn constant_image(h: usize, w: usize, rgb: [u8; 3]) -> ImageBuffer {
        let mut img = ImageBuffer::new(h, w).unwrap();
        for i in 0..h {
            for j in 0..w {
                img.set_pixel(i, j, rgb);
            }
        }
        img
    }

    fn random_image(h: usize, w: usize, seed: u64) -> ImageBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..3 * h * w).map(|_| rng.random()).collect();
        ImageBuffer::from_rgb(h, w, data).unwrap()
    }

    #[test]
    fn psnr_closed_forms() {
        let a = random_image(8, 8, 1);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);

        // every component off by one
        let mut b = a.clone();
        let data: Vec<u8> = b
            .data()
            .iter()
            .map(|&v| if v == 255 { 254 } else { v + 1 })
            .collect();
        b = ImageBuffer::from_rgb(8, 8, data).unwrap();
        let expect = 10.0 * (255.0f64 * 255.0).log10();
        assert!((psnr(&a, &b).unwrap() - expect).abs() < 1e-6);

        let black = constant_image(8, 8, [0, 0, 0]);
        let white = constant_image(8, 8, [255, 255, 255]);
        assert!((psnr(&black, &white).unwrap()).abs() < 1e-6);

        let small = constant_image(4, 4, [0, 0, 0]);
        assert!(psnr(&a, &small).is_err());
    }

    #[test]
    fn psnr_symmetric_and_noise_monotone() {
        let a = random_image(16, 16, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut prev = f64::INFINITY;
        for amplitude in [2i16, 8, 32, 96] {
            let data: Vec<u8> = a
                .data()
                .iter()
                .map(|&v| {
                    let noise = rng.random_range(-amplitude..=amplitude);
                    (v as i16 + noise).clamp(0, 255) as u8
                })
                .collect();
            let noisy = ImageBuffer::from_rgb(16, 16, data).unwrap();
            let p = psnr(&a, &noisy).unwrap();
            let q = psnr(&noisy, &a).unwrap();
            assert_eq!(p, q);
            assert!(p < prev, "psnr should drop as noise grows");
            prev = p;
        }
    }

    #[test]
    fn ssim_identical_is_one() {
        let a = random_image(16, 20, 4);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ssim_constant_images_closed_form() {
        let a = constant_image(16, 16, [100, 100, 100]);
        let b = constant_image(16, 16, [150, 150, 150]);
        let c1 = (0.01f64 * 255.0).powi(2);
        // zero variances leave only the luminance term; contrast/structure
        // term is C2/C2 = 1
        let expect = (2.0 * 100.0 * 150.0 + c1) / (100.0f64.powi(2) + 150.0f64.powi(2) + c1);
        assert!((ssim(&a, &b).unwrap() - expect).abs() < 1e-6);
        assert!((ssim(&b, &a).unwrap() - ssim(&a, &b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn ssim_inverted_checker_is_negative() {
        let mut a = ImageBuffer::new(16, 16).unwrap();
        let mut b = ImageBuffer::new(16, 16).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let on = (i + j) % 2 == 0;
                a.set_pixel(i, j, if on { [200; 3] } else { [50; 3] });
                b.set_pixel(i, j, if on { [50; 3] } else { [200; 3] });
            }
        }
        assert!(ssim(&a, &b).unwrap() < 0.0);
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = constant_image(10, 16, [1, 1, 1]);
        assert!(ssim(&a, &a).is_err());
    }

    #[test]
    fn colorfulness_cases() {
        let gray = to_gray_luma(&random_image(8, 8, 5));
        assert_eq!(colorfulness(&gray), 0.0);

        let red = constant_image(8, 8, [255, 0, 0]);
        assert!((colorfulness(&red) - 2.0 / 3.0).abs() < 1e-12);

        // half gray, half pure red
        let mut half = constant_image(8, 8, [90, 90, 90]);
        for i in 0..8 {
            for j in 0..4 {
                half.set_pixel(i, j, [255, 0, 0]);
            }
        }
        assert!((colorfulness(&half) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn parameter_counts() {
        use crate::nn::{ConvMode, QConvLayer};
        let layer = QConvLayer::new(ConvMode::Conv, 8, 1, 3, 2, 1, 0).unwrap();
        assert_eq!(layer.parameter_count(), 4 * (72 + 8));

        let qcae = Model::build(&ModelConfig::default(), 1).unwrap();
        let cae = Model::build(&ModelConfig::default().real_counterpart(), 1).unwrap();
        let qn = count_parameters(&qcae).total;
        let cn = count_parameters(&cae).total;
        let ratio = cn as f64 / qn as f64;
        assert!((3.6..=4.4).contains(&ratio), "ratio {ratio}");

        // dense-layer accounting: 1024² vs (1024/4)²·4
        assert_eq!(dense_real_params(1024), 1_048_576);
        assert_eq!(dense_quaternion_real_params(1024), 262_144);
        assert_eq!(dense_real_params(1024) / dense_quaternion_real_params(1024), 4);
    }
}
