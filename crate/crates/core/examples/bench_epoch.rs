use qcae_core::config::ModelConfig;
use qcae_core::experiment::train_on_image;
use qcae_core::imaging::ImageBuffer;
use qcae_core::model::Model;
use std::time::Instant;

fn main() {
    let (h, w) = (128, 192);
    let mut img = ImageBuffer::new(h, w).unwrap();
    for i in 0..h {
        for j in 0..w {
            let v = (128.0 + 90.0 * ((i as f64) * 0.23).sin() * ((j as f64) * 0.17).cos()).clamp(0.0, 255.0) as u8;
            img.set_pixel(i, j, [v, v, v]);
        }
    }
    let epochs = 20;
    let mut qcae = Model::build(&ModelConfig::default(), 42).unwrap();
    let t0 = Instant::now();
    train_on_image(&mut qcae, &img, epochs, 5e-4).unwrap();
    let qt = t0.elapsed();
    println!("QCAE: {:?} per epoch ({:?} for {epochs})", qt / epochs as u32, qt);

    let mut cae = Model::build(&ModelConfig::default().real_counterpart(), 42).unwrap();
    let t0 = Instant::now();
    train_on_image(&mut cae, &img, epochs, 5e-4).unwrap();
    let ct = t0.elapsed();
    println!("CAE : {:?} per epoch ({:?} for {epochs})", ct / epochs as u32, ct);
    let total = (qt + ct) * 100; // 2000 epochs
    println!("projected 2x2000 epochs: {:?}", total);
}
