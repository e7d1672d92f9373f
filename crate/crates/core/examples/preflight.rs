//! Reduced-scale rehearsal of the two training-heavy acceptance criteria.
//! Usage: preflight [n_samples] [rd_epochs] [chirp_epochs] [noise] [lambda0]

use radar_repr::config::{derive_axes, RadarConfig};
use radar_repr::downstream::{evaluate, fit_head, split_dataset, HeadHyper};
use radar_repr::dsp::{range_azimuth_map, range_doppler_map, squash, RadarMap, SquashStats};
use radar_repr::simsig::{random_scene, simulate_frame, PointTarget, Scene, SceneBounds};
use radar_repr::vae::chirp::{chirp_input, raw_stats, ChirpMode};
use radar_repr::vae::train::{train_vae, TrainHyper, TrainTargets, VaeDataset};
use radar_repr::vae::{VaeModel, Variant};
use rayon::prelude::*;
use std::time::Instant;

fn heldout_rmse(feats: &[Vec<f64>], ranges: &[f64]) -> f64 {
    let (train, test) = split_dataset(feats.len(), 0).unwrap();
    let tx: Vec<Vec<f64>> = train.iter().map(|&i| feats[i].clone()).collect();
    let ty: Vec<f64> = train.iter().map(|&i| ranges[i]).collect();
    let head = fit_head(&tx, &ty, &HeadHyper::default()).unwrap();
    let ex: Vec<f64> = test.iter().flat_map(|&i| feats[i].clone()).collect();
    let ey: Vec<f64> = test.iter().map(|&i| ranges[i]).collect();
    evaluate(&head.predict(&ex).unwrap(), &ey).unwrap().rmse
}

/// A dominant point target plus a few extended weak reflectors (range
/// ridges), so the maps carry enough structure for representation
/// learning while the strongest blob stays unambiguous.
fn rich_scene(
    seed: u64,
    bounds: &SceneBounds,
    cfg: &radar_repr::config::RadarConfig,
    noise: f64,
) -> Scene {
    use rand::Rng;
    use rand::SeedableRng;
    let mut scene = random_scene(seed, bounds, cfg).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let n_walls = 2 + (rng.random::<u64>() % 2) as usize; // 2..=3
    for _ in 0..n_walls {
        let anchor = random_scene(rng.random::<u64>(), bounds, cfg).unwrap().targets[0];
        let pieces = 10 + (rng.random::<u64>() % 8) as usize;
        for k in 0..pieces {
            let du = k as f64 / pieces as f64;
            let r = (anchor.range + du * 2.5).min(8.9);
            let az = (anchor.azimuth + (rng.random::<f64>() - 0.5) * 0.15)
                .clamp(-0.85, 0.85);
            let v = (anchor.radial_velocity + (rng.random::<f64>() - 0.5) * 0.3)
                .clamp(-4.0, 4.0);
            scene.targets.push(PointTarget {
                range: r,
                radial_velocity: v,
                azimuth: az,
                amplitude: 0.1 + 0.25 * rng.random::<f64>(),
            });
        }
    }
    scene.noise_std = noise;
    scene
}

fn feats_of(model: &VaeModel<f32>, inputs: &[Vec<f32>]) -> Vec<Vec<f64>> {
    inputs.par_iter().map(|x| model.encode(x).unwrap().mean).collect()
}

/// Feature diagnostics: spread of posterior means per dim, best |corr|
/// with range, and mean posterior std.
fn diagnose(model: &VaeModel<f32>, inputs: &[Vec<f32>], ranges: &[f64]) {
    let n = inputs.len() as f64;
    let posts: Vec<_> = inputs.par_iter().map(|x| model.encode(x).unwrap()).collect();
    let r_mean = ranges.iter().sum::<f64>() / n;
    let r_std = (ranges.iter().map(|r| (r - r_mean).powi(2)).sum::<f64>() / n).sqrt();
    let mut best_corr = 0.0f64;
    let mut spread_max = 0.0f64;
    let mut std_mean = 0.0f64;
    for d in 0..32 {
        let vals: Vec<f64> = posts.iter().map(|q| q.mean[d]).collect();
        let m = vals.iter().sum::<f64>() / n;
        let v = (vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
        spread_max = spread_max.max(v);
        if v > 1e-9 {
            let cov = vals
                .iter()
                .zip(ranges)
                .map(|(x, r)| (x - m) * (r - r_mean))
                .sum::<f64>()
                / n;
            best_corr = best_corr.max((cov / (v * r_std)).abs());
        }
        std_mean += posts.iter().map(|q| q.std[d]).sum::<f64>() / n / 32.0;
    }
    println!(
        "  diag: max mean-spread {spread_max:.4}, best |corr(mean, range)| {best_corr:.3}, avg posterior std {std_mean:.4}"
    );
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(400);
    let rd_epochs: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(60);
    let chirp_epochs: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(40);
    let noise: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(0.001);
    let lambda0: f64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(1.0);

    let cfg = RadarConfig::default();
    let axes = derive_axes(&cfg).unwrap();
    let bounds = SceneBounds::standard();

    let t = Instant::now();
    let scenes: Vec<Scene> = (0..n)
        .map(|i| rich_scene(1_000_000 + i as u64, &bounds, &cfg, noise))
        .collect();
    let frames: Vec<_> = scenes
        .par_iter()
        .enumerate()
        .map(|(i, s)| simulate_frame(s, &cfg, 2_000_000 + i as u64).unwrap())
        .collect();
    let ranges: Vec<f64> = scenes.iter().map(|s| s.targets[0].range).collect();
    let rd_raw: Vec<RadarMap> = frames.par_iter().map(|f| range_doppler_map(f).unwrap()).collect();
    let ra_raw: Vec<RadarMap> = frames.par_iter().map(|f| range_azimuth_map(f).unwrap()).collect();
    let rd_stats = SquashStats::from_maps(rd_raw.iter()).unwrap();
    let ra_stats = SquashStats::from_maps(ra_raw.iter()).unwrap();
    let to32 = |m: &RadarMap| -> Vec<f32> { m.values().iter().map(|&v| v as f32).collect() };
    let rd_sq: Vec<Vec<f32>> = rd_raw.par_iter().map(|m| to32(&squash(m, &rd_stats).unwrap())).collect();
    let ra_sq: Vec<Vec<f32>> = ra_raw.par_iter().map(|m| to32(&squash(m, &ra_stats).unwrap())).collect();
    let cstats = raw_stats(&frames).unwrap();
    let blocks: Vec<Vec<f32>> = frames
        .par_iter()
        .map(|f| chirp_input(f, ChirpMode::Raw, &cstats).unwrap().values.iter().map(|&v| v as f32).collect())
        .collect();
    println!("data: {n} frames in {:.0} s", t.elapsed().as_secs_f64());

    // RD rehearsal
    let data = VaeDataset { inputs: rd_sq.clone(), targets: TrainTargets::SameAsInput };
    let mut geco = radar_repr::vae::geco::GecoState::default();
    geco.multiplier = lambda0;
    let mut model = VaeModel::<f32>::new(Variant::Rd, 1);
    model.init(0);
    let seg = 50usize.min(rd_epochs.max(1));
    let mut done = 0usize;
    let t = Instant::now();
    let mut first = f64::NAN;
    while done < rd_epochs {
        let e = seg.min(rd_epochs - done);
        let hyper = TrainHyper { epochs: e, seed: 0xA + done as u64, geco, ..TrainHyper::default() };
        let logs = radar_repr::vae::train::train_model(&mut model, &data, &hyper).unwrap();
        if done == 0 {
            first = logs.first().unwrap().recon;
        }
        done += e;
        let rmse = heldout_rmse(&feats_of(&model, &rd_sq), &ranges);
        println!(
            "rd@{done}: recon {:.5} kl {:.2} lambda {:.3e} rmse {rmse:.4}",
            logs.last().unwrap().recon,
            logs.last().unwrap().kl,
            logs.last().unwrap().multiplier
        );
        diagnose(&model, &rd_sq, &ranges);
    }
    let dt = t.elapsed().as_secs_f64();
    let mut untrained = VaeModel::<f32>::new(Variant::Rd, 1);
    untrained.init(0);
    let rmse_u = heldout_rmse(&feats_of(&untrained, &rd_sq), &ranges);
    println!(
        "rd done: {rd_epochs} epochs in {dt:.0} s ({:.0} ms/step), first-epoch recon {first:.5}, untrained rmse {rmse_u:.4} (limit {:.4})",
        dt * 1e3 / (rd_epochs as f64 * (n as f64 / 32.0).ceil()).max(1.0),
        3.0 * axes.range_resolution
    );

    if chirp_epochs == 0 {
        return;
    }
    // chirp rehearsal
    let data = VaeDataset {
        inputs: blocks.clone(),
        targets: TrainTargets::Maps { rd: rd_sq, ra: ra_sq },
    };
    let hyper = TrainHyper { epochs: chirp_epochs, seed: 0, geco, ..TrainHyper::default() };
    let t = Instant::now();
    let (model, logs) = train_vae(Variant::Chirp, &data, &hyper).unwrap();
    let dt = t.elapsed().as_secs_f64();
    let rmse = heldout_rmse(&feats_of(&model, &blocks), &ranges);
    println!(
        "chirp: {chirp_epochs} epochs in {dt:.0} s ({:.0} ms/step) final recon {:.5} rmse {rmse:.4} (limit {:.4})",
        dt * 1e3 / (chirp_epochs as f64 * (n as f64 / 32.0).ceil()),
        logs.last().unwrap().recon,
        6.0 * axes.range_resolution
    );
}
