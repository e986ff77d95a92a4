use clap::{Args, Parser, Subcommand, ValueEnum};
use qcae_core::config::{ExperimentConfig, ModelKind};
use qcae_core::experiment::{eval_pipeline, reproduce, train_pipeline, EvalReport};
use qcae_core::gradcheck;
use std::path::PathBuf;
use std::process::ExitCode;

/// Quaternion convolutional encoder-decoder experiments: train on one
/// gray-scale image, evaluate color reconstruction on unseen images.
#[derive(Parser)]
#[command(name = "qcae", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Qcae,
    Cae,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> ModelKind {
        match k {
            KindArg::Qcae => ModelKind::Qcae,
            KindArg::Cae => ModelKind::Cae,
        }
    }
}

#[derive(Args)]
struct CommonOpts {
    /// TOML config file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Training image (PNG or binary PPM).
    #[arg(long)]
    train_image: Option<PathBuf>,

    /// Test images evaluated after training.
    #[arg(long = "test-image")]
    test_images: Vec<PathBuf>,

    #[arg(long)]
    epochs: Option<usize>,

    #[arg(long)]
    lr: Option<f64>,

    /// Integer crop factor: images are center-cropped to (H/scale, W/scale)
    /// of the training image.
    #[arg(long)]
    scale: Option<usize>,

    /// Output directory (overridden by $QCAE_OUTPUT_DIR).
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl CommonOpts {
    fn build_config(&self, seed: Option<u64>, kind: Option<KindArg>) -> Result<ExperimentConfig, qcae_core::Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(kind) = kind {
            cfg.model.kind = kind.into();
        }
        if let Some(p) = &self.train_image {
            cfg.train.train_image = p.clone();
        }
        if !self.test_images.is_empty() {
            cfg.train.test_images = self.test_images.clone();
        }
        if let Some(e) = self.epochs {
            cfg.train.epochs = e;
        }
        if let Some(lr) = self.lr {
            cfg.train.lr = lr;
        }
        if let Some(s) = self.scale {
            cfg.train.scale = s;
        }
        if let Some(d) = &self.output_dir {
            cfg.train.output_dir = d.clone();
        }
        if let Some(seed) = seed {
            cfg.train.seed = seed;
        }
        if let Ok(dir) = std::env::var("QCAE_OUTPUT_DIR") {
            if !dir.is_empty() {
                cfg.train.output_dir = PathBuf::from(dir);
            }
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one model (QCAE or CAE) on the gray-scaled training image.
    Train {
        #[command(flatten)]
        common: CommonOpts,
        /// Which model to train.
        #[arg(long, value_enum, default_value = "qcae")]
        model: KindArg,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a saved checkpoint on the config's test images.
    Eval {
        #[command(flatten)]
        common: CommonOpts,
        /// Checkpoint written by `train` or `reproduce`.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Full pipeline: train QCAE and CAE with one seed, evaluate both,
    /// write checkpoints, reconstructions, loss curves, and the report.
    Reproduce {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        seed: u64,
    },
    /// Run the finite-difference gradient checks for every layer type.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Pretty-print a report.json produced by `reproduce` or `eval`.
    Report { path: PathBuf },
}

fn print_report(report: &EvalReport) {
    println!(
        "crop {}x{}  seed {}",
        report.crop_height, report.crop_width, report.seed
    );
    for model in &report.models {
        println!("\n[{}] {} parameters", model.kind, model.parameters.total);
        for layer in &model.parameters.per_layer {
            println!("    {:<28} {:>8}", layer.layer, layer.real_scalars);
        }
        println!(
            "    latent {}x{}x{} = {} real scalars (input: {} real scalars, {} pixels)",
            model.latent.channels,
            model.latent.height,
            model.latent.width,
            model.latent.real_scalars,
            model.latent.input_real_scalars,
            model.latent.input_pixels
        );
        if model.train_final_loss.is_finite() {
            println!("    final train mse {:.3e}", model.train_final_loss);
        }
        for rec in std::iter::once(&model.train_record).chain(model.records.iter()) {
            println!(
                "    {:<24} vs {:<10}  psnr {:>7}  ssim {:.4}  colorfulness {:.4} (target {:.4})",
                rec.image,
                rec.protocol_target,
                if rec.psnr_db.is_finite() {
                    format!("{:.2}dB", rec.psnr_db)
                } else {
                    "inf".to_string()
                },
                rec.ssim,
                rec.colorfulness,
                rec.target_colorfulness
            );
        }
    }
}

fn run(cli: Cli) -> Result<(), qcae_core::Error> {
    match cli.command {
        Command::Train {
            common,
            model,
            seed,
        } => {
            let cfg = common.build_config(seed, Some(model))?;
            let (ckpt, result) = train_pipeline(&cfg)?;
            println!(
                "trained {} for {} epochs: mse {:.4e} -> {:.4e}",
                cfg.model.kind,
                result.losses.len(),
                result.initial_loss(),
                result.final_loss()
            );
            println!("checkpoint: {}", ckpt.display());
        }
        Command::Eval { common, checkpoint } => {
            let cfg = common.build_config(None, None)?;
            let report = eval_pipeline(&cfg, &checkpoint)?;
            print_report(&report);
            println!(
                "\nreport: {}",
                cfg.train.output_dir.join("report.json").display()
            );
        }
        Command::Reproduce { common, seed } => {
            let cfg = common.build_config(Some(seed), None)?;
            let report = reproduce(&cfg)?;
            print_report(&report);
            println!(
                "\nreport: {}",
                cfg.train.output_dir.join("report.json").display()
            );
        }
        Command::Gradcheck { seed } => {
            let checks = gradcheck::run_all(seed)?;
            let mut all_ok = true;
            for check in &checks {
                println!(
                    "{} {:<28} max rel err {:.3e} over {} components",
                    if check.passed() { "PASS" } else { "FAIL" },
                    check.name,
                    check.max_rel_err,
                    check.components
                );
                all_ok &= check.passed();
            }
            if !all_ok {
                return Err(qcae_core::Error::Validation(
                    "gradient checks failed".into(),
                ));
            }
        }
        Command::Report { path } => {
            let report = EvalReport::load_json(&path)?;
            print_report(&report);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
