//! Times full-scale training steps to project long-run wall time.

use radar_repr::vae::train::{train_model, TrainHyper, TrainTargets, VaeDataset};
use radar_repr::vae::{VaeModel, Variant};
use std::time::Instant;

fn bench(variant: Variant, n: usize, epochs: usize) {
    let in_len = match variant {
        Variant::Rd | Variant::Ra => 128 * 128,
        Variant::Chirp => 8 * 256,
        Variant::ChirpFft => 16 * 128,
    };
    let inputs: Vec<Vec<f32>> = (0..n)
        .map(|i| (0..in_len).map(|j| (((i * 31 + j) % 97) as f32) / 97.0).collect())
        .collect();
    let targets = match variant {
        Variant::Rd | Variant::Ra => TrainTargets::SameAsInput,
        _ => {
            let maps: Vec<Vec<f32>> = (0..n)
                .map(|i| (0..128 * 128).map(|j| (((i * 7 + j) % 89) as f32) / 89.0).collect())
                .collect();
            TrainTargets::Maps { rd: maps.clone(), ra: maps }
        }
    };
    let data = VaeDataset { inputs, targets };
    let mut model = VaeModel::<f32>::new(variant, 1);
    model.init(0);
    let hyper = TrainHyper { epochs, batch: 32, seed: 0, ..TrainHyper::default() };
    let t = Instant::now();
    let logs = train_model(&mut model, &data, &hyper).unwrap();
    let dt = t.elapsed().as_secs_f64();
    let steps = epochs * n.div_ceil(32);
    println!(
        "{:9} n={n} epochs={epochs}: {:7.2} s  ({:6.1} ms/step, {} steps) recon {:.4}",
        variant.name(), dt, dt * 1e3 / steps as f64, steps, logs.last().unwrap().recon,
    );
}

fn main() {
    bench(Variant::Rd, 96, 8);
    bench(Variant::Chirp, 96, 4);
}
