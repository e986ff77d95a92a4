//! End-to-end harness: train an autoencoder on a single gray-scale image,
//! then measure how well it reconstructs unseen color images.
//!
//! Evaluation protocol: the QCAE reconstruction is scored against the true
//! color image; the CAE reconstruction is scored against the gray-scale
//! (luma) version of the same image, since the real baseline cannot recover
//! colors and would otherwise be penalized twice. A colorfulness diagnostic
//! is reported for both so the gray-output failure mode is visible directly.

use crate::config::{ExperimentConfig, ModelConfig, ModelKind};
use crate::error::{Error, Result};
use crate::imaging::{
    decode_quaternion_image, decode_real_image, encode_color_quaternion, encode_gray_quaternion,
    encode_real, load_image, save_image, to_gray_luma, ImageBuffer,
};
use crate::metrics::{colorfulness, count_parameters, psnr, ssim, ParamCountReport};
use crate::model::{forward_dims, CaeModel, Model, QcaeModel};
use crate::optim::{adam_step, mse_loss, mse_loss_real, AdamState};
use crate::tensor::{QTensor, RealTensor};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const REPORT_VERSION: u32 = 1;

/// A pixel grid encoded for one model kind.
pub enum Encoded {
    Quaternion(QTensor),
    Real(RealTensor),
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    pub losses: Vec<f64>,
}

impl TrainResult {
    pub fn initial_loss(&self) -> f64 {
        *self.losses.first().unwrap_or(&f64::NAN)
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().unwrap_or(&f64::NAN)
    }
}

fn train_qcae(model: &mut QcaeModel, target: &QTensor, epochs: usize, lr: f64) -> Result<TrainResult> {
    let mut params: Vec<f64> = model
        .layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
        .collect();
    let mut adam = AdamState::new(params.len(), lr);
    let mut losses = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let (out, cache) = model.forward(target)?;
        let (loss, grad) = mse_loss(&out, target)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        losses.push(loss);
        let grads = model.backward(&grad, &cache)?;
        adam_step(&mut params, &grads, &mut adam)?;
        let mut at = 0;
        for l in model.layers.iter_mut() {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
    }
    Ok(TrainResult { losses })
}

fn train_cae(model: &mut CaeModel, target: &RealTensor, epochs: usize, lr: f64) -> Result<TrainResult> {
    let mut params: Vec<f64> = model
        .layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
        .collect();
    let mut adam = AdamState::new(params.len(), lr);
    let mut losses = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let (out, cache) = model.forward(target)?;
        let (loss, grad) = mse_loss_real(&out, target)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        losses.push(loss);
        let grads = model.backward(&grad, &cache)?;
        adam_step(&mut params, &grads, &mut adam)?;
        let mut at = 0;
        for l in model.layers.iter_mut() {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
    }
    Ok(TrainResult { losses })
}

/// Full-batch autoencoder training against the encoded target itself.
pub fn train_on_encoded(model: &mut Model, target: &Encoded, epochs: usize, lr: f64) -> Result<TrainResult> {
    match (model, target) {
        (Model::Qcae(m), Encoded::Quaternion(t)) => train_qcae(m, t, epochs, lr),
        (Model::Cae(m), Encoded::Real(t)) => train_cae(m, t, epochs, lr),
        _ => Err(Error::shape(
            "encoded input kind does not match model kind",
        )),
    }
}

/// Encode a gray training image for the model kind and train to reproduce it.
pub fn train_on_image(model: &mut Model, img: &ImageBuffer, epochs: usize, lr: f64) -> Result<TrainResult> {
    let target = match model.kind() {
        ModelKind::Qcae => Encoded::Quaternion(encode_gray_quaternion(img)?),
        ModelKind::Cae => Encoded::Real(encode_real(img, true)?),
    };
    train_on_encoded(model, &target, epochs, lr)
}

/// Run a color image through a trained model and decode the reconstruction.
pub fn reconstruct(model: &Model, img: &ImageBuffer) -> Result<ImageBuffer> {
    match model {
        Model::Qcae(m) => decode_quaternion_image(&m.predict(&encode_color_quaternion(img))?),
        Model::Cae(m) => decode_real_image(&m.predict(&encode_real(img, false)?)?),
    }
}

mod psnr_db_serde {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(D::Error::custom(format!("bad psnr value {other:?}"))),
            },
        }
    }
}

/// Metrics of one reconstruction. `psnr_db` may be the `+inf` sentinel when
/// the reconstruction is exact; it serializes as the string `"inf"`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalRecord {
    pub image: String,
    /// What the reconstruction was compared against: `color` or `gray(luma)`.
    pub protocol_target: String,
    #[serde(with = "psnr_db_serde")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub colorfulness: f64,
    pub target_colorfulness: f64,
}

/// Latent bottleneck accounting for one trained model. Both the latent and
/// input scalar counts are reported; no relation between them is asserted.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatentInfo {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub real_scalars: usize,
    pub input_real_scalars: usize,
    pub input_pixels: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelEval {
    pub kind: ModelKind,
    pub parameters: ParamCountReport,
    pub latent: LatentInfo,
    pub train_final_loss: f64,
    pub train_record: EvalRecord,
    pub records: Vec<EvalRecord>,
}

/// The structured evaluation report written by `reproduce` and `eval`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub crop_height: usize,
    pub crop_width: usize,
    pub models: Vec<ModelEval>,
}

impl EvalReport {
    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Checkpoint(format!("report serialize failed: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<EvalReport> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("report parse failed: {e}")))
    }

    /// Flat CSV table, one row per (model, image).
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("image,model,protocol_target,psnr_db,ssim,colorfulness,target_colorfulness\n");
        for model in &self.models {
            for rec in std::iter::once(&model.train_record).chain(model.records.iter()) {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    rec.image,
                    model.kind,
                    rec.protocol_target,
                    rec.psnr_db,
                    rec.ssim,
                    rec.colorfulness,
                    rec.target_colorfulness
                ));
            }
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn eval_one(model: &Model, name: &str, color: &ImageBuffer) -> Result<(EvalRecord, ImageBuffer)> {
    let recon = reconstruct(model, color)?;
    let (target, protocol) = match model.kind() {
        ModelKind::Qcae => (color.clone(), "color"),
        ModelKind::Cae => (to_gray_luma(color), "gray(luma)"),
    };
    let record = EvalRecord {
        image: name.to_string(),
        protocol_target: protocol.to_string(),
        psnr_db: psnr(&recon, &target)?,
        ssim: ssim(&recon, &target)?,
        colorfulness: colorfulness(&recon),
        target_colorfulness: colorfulness(color),
    };
    Ok((record, recon))
}

/// Evaluate a trained model on already-cropped test images; reconstructions
/// are written as PNGs when `out_dir` is given.
pub fn evaluate(
    model: &Model,
    tests: &[(String, ImageBuffer)],
    out_dir: Option<&Path>,
) -> Result<Vec<EvalRecord>> {
    let mut records = Vec::with_capacity(tests.len());
    for (name, color) in tests {
        let (record, recon) = eval_one(model, name, color)?;
        if let Some(dir) = out_dir {
            save_image(&recon, dir.join(format!("recon_{}_{}.png", model.kind(), name)))?;
        }
        records.push(record);
    }
    Ok(records)
}

/// Largest crop dimensions not exceeding `(h0/scale, w0/scale)` for which the
/// model output size equals its input size.
pub fn symmetric_crop_dims(cfg: &ModelConfig, h0: usize, w0: usize, scale: usize) -> Result<(usize, usize)> {
    let fit = |target: usize| -> Result<usize> {
        for d in (1..=target).rev() {
            if let Ok((oh, ow)) = forward_dims(cfg, d, d) {
                if (oh, ow) == (d, d) {
                    return Ok(d);
                }
            }
        }
        Err(Error::Config(format!(
            "no symmetric crop size at or below {target} for this topology"
        )))
    };
    Ok((fit(h0 / scale)?, fit(w0 / scale)?))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".to_string())
}

fn latent_info(model: &Model, h: usize, w: usize) -> Result<LatentInfo> {
    let (c, lh, lw) = model.latent_dims(h, w)?;
    let (per_unit, input_scalars) = match model.kind() {
        ModelKind::Qcae => (4, 4 * h * w),
        ModelKind::Cae => (1, 3 * h * w),
    };
    Ok(LatentInfo {
        channels: c,
        height: lh,
        width: lw,
        real_scalars: per_unit * c * lh * lw,
        input_real_scalars: input_scalars,
        input_pixels: h * w,
    })
}

fn write_loss_csv(path: &Path, result: &TrainResult) -> Result<()> {
    let mut text = String::from("epoch,mse\n");
    for (epoch, loss) in result.losses.iter().enumerate() {
        text.push_str(&format!("{epoch},{loss}\n"));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Train one model end to end per the config and return it together with its
/// evaluation. Used by both `train`/`eval` and [`reproduce`].
fn run_one_model(
    model_cfg: &ModelConfig,
    cfg: &ExperimentConfig,
    gray_train: &ImageBuffer,
    tests: &[(String, ImageBuffer)],
    out_dir: &Path,
) -> Result<(Model, ModelEval)> {
    let mut model = Model::build(model_cfg, cfg.train.seed)?;
    let result = train_on_image(&mut model, gray_train, cfg.train.epochs, cfg.train.lr)?;
    let kind = model.kind();

    model.save(out_dir.join(format!("{kind}_checkpoint.json")))?;
    write_loss_csv(&out_dir.join(format!("loss_{kind}.csv")), &result)?;

    let (train_record, train_recon) = eval_one(&model, &format!("{}_train", file_stem(&cfg.train.train_image)), gray_train)?;
    save_image(
        &train_recon,
        out_dir.join(format!("recon_{kind}_train.png")),
    )?;
    let records = evaluate(&model, tests, Some(out_dir))?;

    let eval = ModelEval {
        kind,
        parameters: count_parameters(&model),
        latent: latent_info(&model, gray_train.height(), gray_train.width())?,
        train_final_loss: result.final_loss(),
        train_record,
        records,
    };
    Ok((model, eval))
}

/// The full pipeline: crop and gray the training image, train both the QCAE
/// and the 4x-wide CAE with the same seed, evaluate both on every test image,
/// and write checkpoints, reconstructions, loss curves, and the report.
pub fn reproduce(cfg: &ExperimentConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let out_dir = cfg.train.output_dir.clone();
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let qcae_cfg = ModelConfig {
        kind: ModelKind::Qcae,
        ..cfg.model.clone()
    };
    let cae_cfg = qcae_cfg.real_counterpart();

    let train_img = load_image(&cfg.train.train_image)?;
    let (crop_h, crop_w) =
        symmetric_crop_dims(&qcae_cfg, train_img.height(), train_img.width(), cfg.train.scale)?;
    let gray_train = to_gray_luma(&train_img.center_crop(crop_h, crop_w)?);

    let mut tests = Vec::new();
    for path in &cfg.train.test_images {
        let img = load_image(path)?.center_crop(crop_h, crop_w)?;
        tests.push((file_stem(path), img));
    }

    let (_, qcae_eval) = run_one_model(&qcae_cfg, cfg, &gray_train, &tests, &out_dir)?;
    let (_, cae_eval) = run_one_model(&cae_cfg, cfg, &gray_train, &tests, &out_dir)?;

    let report = EvalReport {
        format_version: REPORT_VERSION,
        seed: cfg.train.seed,
        config: cfg.clone(),
        crop_height: crop_h,
        crop_width: crop_w,
        models: vec![qcae_eval, cae_eval],
    };
    report.save_json(out_dir.join("report.json"))?;
    report.save_csv(out_dir.join("metrics.csv"))?;
    Ok(report)
}

/// Train the single model named by the config (used by the `train`
/// subcommand). Returns the checkpoint path.
pub fn train_pipeline(cfg: &ExperimentConfig) -> Result<(PathBuf, TrainResult)> {
    cfg.validate()?;
    let out_dir = cfg.train.output_dir.clone();
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let train_img = load_image(&cfg.train.train_image)?;
    let (crop_h, crop_w) =
        symmetric_crop_dims(&cfg.model, train_img.height(), train_img.width(), cfg.train.scale)?;
    let gray_train = to_gray_luma(&train_img.center_crop(crop_h, crop_w)?);

    let mut model = Model::build(&cfg.model, cfg.train.seed)?;
    let result = train_on_image(&mut model, &gray_train, cfg.train.epochs, cfg.train.lr)?;
    let ckpt = out_dir.join(format!("{}_checkpoint.json", model.kind()));
    model.save(&ckpt)?;
    write_loss_csv(&out_dir.join(format!("loss_{}.csv", model.kind())), &result)?;
    Ok((ckpt, result))
}

/// Evaluate a saved checkpoint on the config's test images (the `eval`
/// subcommand). The training image defines the crop dimensions.
pub fn eval_pipeline(cfg: &ExperimentConfig, checkpoint: &Path) -> Result<EvalReport> {
    cfg.validate()?;
    let out_dir = cfg.train.output_dir.clone();
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let model = Model::load(checkpoint)?;
    let model_cfg = ModelConfig {
        kind: model.kind(),
        ..cfg.model.clone()
    };
    let train_img = load_image(&cfg.train.train_image)?;
    let (crop_h, crop_w) =
        symmetric_crop_dims(&model_cfg, train_img.height(), train_img.width(), cfg.train.scale)?;
    let gray_train = to_gray_luma(&train_img.center_crop(crop_h, crop_w)?);

    let mut tests = Vec::new();
    for path in &cfg.train.test_images {
        let img = load_image(path)?.center_crop(crop_h, crop_w)?;
        tests.push((file_stem(path), img));
    }

    let (train_record, train_recon) = eval_one(
        &model,
        &format!("{}_train", file_stem(&cfg.train.train_image)),
        &gray_train,
    )?;
    save_image(
        &train_recon,
        out_dir.join(format!("recon_{}_train.png", model.kind())),
    )?;
    let records = evaluate(&model, &tests, Some(&out_dir))?;

    let eval = ModelEval {
        kind: model.kind(),
        parameters: count_parameters(&model),
        latent: latent_info(&model, crop_h, crop_w)?,
        train_final_loss: f64::NAN,
        train_record,
        records,
    };
    let report = EvalReport {
        format_version: REPORT_VERSION,
        seed: cfg.train.seed,
        config: cfg.clone(),
        crop_height: crop_h,
        crop_width: crop_w,
        models: vec![eval],
    };
    report.save_json(out_dir.join("report.json"))?;
    report.save_csv(out_dir.join("metrics.csv"))?;
    Ok(report)
}
