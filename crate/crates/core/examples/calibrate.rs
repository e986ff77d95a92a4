use qcae_core::config::ExperimentConfig;
use qcae_core::experiment::reproduce;
use qcae_core::imaging::{save_image, ImageBuffer};
use std::f64::consts::PI;
use std::time::Instant;

// Photo-like synthetic: smooth shaded background, colored disks, edges.
fn synth_train(h: usize, w: usize) -> ImageBuffer {
    let mut img = ImageBuffer::new(h, w).unwrap();
    for i in 0..h {
        for j in 0..w {
            let (y, x) = (i as f64 / h as f64, j as f64 / w as f64);
            let base = 110.0 + 70.0 * (2.0 * PI * (1.7 * x + 0.6 * y)).sin();
            let stripe = 35.0 * (2.0 * PI * 6.0 * (x - 0.8 * y)).sin();
            let blob = 60.0 * (-((x - 0.4).powi(2) + (y - 0.5).powi(2)) / 0.02).exp();
            let r = (base + stripe + blob).clamp(0.0, 255.0) as u8;
            let g = (base + 0.5 * stripe - 0.3 * blob + 20.0).clamp(0.0, 255.0) as u8;
            let b = (base - stripe + 0.8 * blob - 10.0).clamp(0.0, 255.0) as u8;
            img.set_pixel(i, j, [r, g, b]);
        }
    }
    img
}

fn synth_test(h: usize, w: usize) -> ImageBuffer {
    let mut img = ImageBuffer::new(h, w).unwrap();
    for i in 0..h {
        for j in 0..w {
            let (y, x) = (i as f64 / h as f64, j as f64 / w as f64);
            let r = (255.0 * (0.5 + 0.5 * (2.0 * PI * (x + 0.3 * y)).sin())).clamp(0.0, 255.0);
            let g = (255.0 * (0.5 + 0.5 * (2.0 * PI * (y * 2.0 - x)).cos())).clamp(0.0, 255.0);
            let b = (255.0 * (0.5 + 0.4 * (2.0 * PI * (x * 3.0 + y * 1.5)).sin()
                + 0.2 * (-((x - 0.6).powi(2) + (y - 0.3).powi(2)) / 0.05).exp()))
            .clamp(0.0, 255.0);
            let disk = (-((x - 0.25).powi(2) + (y - 0.7).powi(2)) / 0.01).exp();
            let r = (r * (1.0 - disk) + 230.0 * disk) as u8;
            let g = (g * (1.0 - disk) + 40.0 * disk) as u8;
            let b = (b * (1.0 - disk) + 30.0 * disk) as u8;
            img.set_pixel(i, j, [r, g, b]);
        }
    }
    img
}

fn main() {
    let dir = std::path::PathBuf::from("/tmp/qcae_calibrate");
    std::fs::create_dir_all(&dir).unwrap();
    save_image(&synth_train(512, 768), dir.join("train.png")).unwrap();
    save_image(&synth_test(512, 768), dir.join("test.png")).unwrap();

    let mut cfg = ExperimentConfig::default();
    cfg.train.train_image = dir.join("train.png");
    cfg.train.test_images = vec![dir.join("test.png")];
    cfg.train.seed = 42;
    cfg.train.scale = 4;
    cfg.train.epochs = 2000;
    cfg.train.output_dir = dir.join("out");

    let t0 = Instant::now();
    let report = reproduce(&cfg).unwrap();
    println!("elapsed: {:?}", t0.elapsed());
    for m in &report.models {
        println!("== {} ({} params, final mse {:.3e})", m.kind, m.parameters.total, m.train_final_loss);
        for r in std::iter::once(&m.train_record).chain(m.records.iter()) {
            println!(
                "  {:<16} vs {:<10} psnr {:>8.3} ssim {:.4} colorfulness {:.4} / target {:.4}",
                r.image, r.protocol_target, r.psnr_db, r.ssim, r.colorfulness, r.target_colorfulness
            );
        }
    }
}
