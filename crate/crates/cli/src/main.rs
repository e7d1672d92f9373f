//! Batch command-line front end for the radar pipeline.
//!
//! Subcommands cover the full flow: `sim` (synthetic raw ADC frames),
//! `process` (range-Doppler / range-azimuth maps), `squash`, `train`
//! (VAE variants), `probe` (frozen-encoder regression), `baseline`
//! (classical estimators), `eval` (metrics from CSVs) and `render`
//! (PGM snapshots). All randomness flows from explicit `--seed` flags, so
//! reruns produce byte-identical outputs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use radar_repr::baseline;
use radar_repr::config::{derive_axes, RadarConfig};
use radar_repr::dataio::{
    read_dataset, write_dataset, Dataset, DatasetHeader, Record, RecordKind,
};
use radar_repr::downstream::{
    evaluate, fit_head, read_values_csv, split_dataset, write_values_csv, HeadHyper,
};
use radar_repr::dsp::{
    range_azimuth_map, range_doppler_map, squash, MapKind, RadarMap, SquashStats,
};
use radar_repr::error::Error;
use radar_repr::simsig::{random_scene, simulate_frame, SceneBounds};
use radar_repr::vae::chirp::{chirp_input, ChirpMode};
use radar_repr::vae::io::save_model;
use radar_repr::vae::train::{train_vae, EpochLog, TrainHyper, TrainTargets, VaeDataset};
use radar_repr::vae::{Variant, LATENT_DIM};
use radar_repr::Result;

#[derive(Parser)]
#[command(name = "radar-repr", version, about = "FMCW radar processing and representation learning")]
struct Cli {
    /// Radar configuration file (key=value); defaults match the reference sensor.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MapKindArg {
    Rd,
    Ra,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Rd,
    Ra,
    Chirp,
    #[value(name = "chirp-fft")]
    ChirpFft,
}

impl VariantArg {
    fn to_variant(self) -> Variant {
        match self {
            VariantArg::Rd => Variant::Rd,
            VariantArg::Ra => Variant::Ra,
            VariantArg::Chirp => Variant::Chirp,
            VariantArg::ChirpFft => Variant::ChirpFft,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TaskArg {
    #[value(name = "wall-distance")]
    WallDistance,
    Velocity,
    #[value(name = "target-distance")]
    TargetDistance,
    #[value(name = "target-angle")]
    TargetAngle,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate random single-target scenes into a raw ADC container.
    Sim {
        /// Number of scenes to generate.
        #[arg(long)]
        scenes: usize,
        /// Master seed; scene i derives its own stream from it.
        #[arg(long)]
        seed: u64,
        /// Additive white noise standard deviation (linear amplitude).
        #[arg(long)]
        noise: f64,
        /// Output container path.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Compute range-Doppler or range-azimuth maps from raw frames.
    Process {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: MapKindArg,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Squash raw maps with dataset-level statistics.
    Squash {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Train a VAE variant.
    Train {
        #[arg(long, value_enum)]
        variant: VariantArg,
        /// Squashed map container (rd/ra) or raw ADC container (chirp variants).
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        /// Optional held-out dataset of the same kind; final reconstruction
        /// loss on it is reported after training.
        #[arg(long, value_name = "FILE")]
        data2: Option<PathBuf>,
        #[arg(long)]
        epochs: usize,
        #[arg(long)]
        seed: u64,
        /// Model output; loss curves go to <out>.loss.csv and encoder
        /// features of the training data to <out>.latents.rds.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Fit a frozen-encoder regression head and write predictions.
    Probe {
        #[arg(long, value_enum)]
        task: TaskArg,
        /// Latent container produced by `train` (carries ground truth when
        /// the source dataset did).
        #[arg(long, value_name = "FILE")]
        features: PathBuf,
        /// Ground truth: two-column CSV or a container with embedded
        /// ground-truth keys.
        #[arg(long, value_name = "FILE")]
        gt: PathBuf,
        /// Predictions CSV (one row per frame).
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Run a classical estimator over maps and report metrics.
    Baseline {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long, value_name = "FILE")]
        maps: PathBuf,
        #[arg(long, value_name = "FILE")]
        gt: PathBuf,
    },
    /// Evaluate prediction CSVs against ground-truth CSVs.
    Eval {
        #[arg(long, value_name = "FILE")]
        pred: PathBuf,
        #[arg(long, value_name = "FILE")]
        gt: PathBuf,
    },
    /// Render one map record as an 8-bit PGM image.
    Render {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long)]
        frame: usize,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match run(cli.cmd, &config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RadarConfig> {
    match path {
        None => Ok(RadarConfig::default()),
        Some(p) => RadarConfig::from_key_value_file(p),
    }
}

fn run(cmd: Cmd, config: &RadarConfig) -> Result<()> {
    match cmd {
        Cmd::Sim {
            scenes,
            seed,
            noise,
            out,
        } => cmd_sim(config, scenes, seed, noise, &out),
        Cmd::Process { input, kind, out } => cmd_process(&input, kind, &out),
        Cmd::Squash { input, out } => cmd_squash(&input, &out),
        Cmd::Train {
            variant,
            data,
            data2,
            epochs,
            seed,
            out,
        } => cmd_train(variant.to_variant(), &data, data2.as_deref(), epochs, seed, &out),
        Cmd::Probe {
            task,
            features,
            gt,
            out,
        } => cmd_probe(task, &features, &gt, &out),
        Cmd::Baseline { task, maps, gt } => cmd_baseline(task, &maps, &gt),
        Cmd::Eval { pred, gt } => cmd_eval(&pred, &gt),
        Cmd::Render { input, frame, out } => cmd_render(&input, frame, &out),
    }
}

fn mix(seed: u64, index: u64, tag: u64) -> u64 {
    let mut x = seed
        ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ tag.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Ground-truth keys stored by `sim` (task values derive from these).
const GT_KEYS: [&str; 3] = ["range", "velocity", "azimuth"];

fn cmd_sim(config: &RadarConfig, scenes: usize, seed: u64, noise: f64, out: &Path) -> Result<()> {
    if noise < 0.0 {
        return Err(Error::validation("--noise must be >= 0"));
    }
    let bounds = SceneBounds::standard();
    let records: Vec<Record> = (0..scenes)
        .into_par_iter()
        .map(|i| -> Result<Record> {
            let mut scene = random_scene(mix(seed, i as u64, 1), &bounds, config)?;
            scene.noise_std = noise;
            let frame = simulate_frame(&scene, config, mix(seed, i as u64, 2))?;
            let t = scene.targets[0];
            Ok(Record::from_frame(&frame).with_gt(vec![t.range, t.radial_velocity, t.azimuth]))
        })
        .collect::<Result<_>>()?;
    let mut dataset = Dataset::new(DatasetHeader::adc(config).with_gt_keys(&GT_KEYS));
    for r in records {
        dataset.push(r)?;
    }
    write_dataset(&dataset, out)?;
    println!("simulated {scenes} scenes to {}", out.display());
    Ok(())
}

fn cmd_process(input: &Path, kind: MapKindArg, out: &Path) -> Result<()> {
    let src = read_dataset(input)?;
    if src.header.kind != RecordKind::Adc {
        return Err(Error::validation(format!(
            "process expects an adc container, got {}",
            src.header.kind.name()
        )));
    }
    let map_kind = match kind {
        MapKindArg::Rd => MapKind::RangeDoppler,
        MapKindArg::Ra => MapKind::RangeAzimuth,
    };
    let maps: Vec<Record> = src
        .records
        .par_iter()
        .map(|rec| -> Result<Record> {
            let frame = rec.to_frame(&src.header)?;
            let map = match map_kind {
                MapKind::RangeDoppler => range_doppler_map(&frame)?,
                MapKind::RangeAzimuth => range_azimuth_map(&frame)?,
            };
            Ok(Record::from_map(&map).with_gt(rec.gt.clone()))
        })
        .collect::<Result<_>>()?;
    let header = DatasetHeader {
        gt_keys: src.header.gt_keys.clone(),
        ..DatasetHeader::map(&src.header.config, map_kind, None)
    };
    let mut dataset = Dataset::new(header);
    for m in maps {
        dataset.push(m)?;
    }
    write_dataset(&dataset, out)?;
    println!(
        "processed {} frames into {} maps at {}",
        src.len(),
        dataset.len(),
        out.display()
    );
    Ok(())
}

fn record_to_map(ds: &Dataset, index: usize) -> Result<RadarMap> {
    ds.records[index].to_map(&ds.header)
}

fn cmd_squash(input: &Path, out: &Path) -> Result<()> {
    let src = read_dataset(input)?;
    if !matches!(src.header.kind, RecordKind::RdMap | RecordKind::RaMap) {
        return Err(Error::validation("squash expects a map container"));
    }
    if src.header.squash.is_some() {
        return Err(Error::State("maps are already squashed".into()));
    }
    if src.is_empty() {
        return Err(Error::validation("cannot squash an empty dataset"));
    }
    let maps: Vec<RadarMap> = (0..src.len())
        .map(|i| record_to_map(&src, i))
        .collect::<Result<_>>()?;
    let stats = SquashStats::from_maps(maps.iter())?;
    let header = DatasetHeader {
        squash: Some(stats),
        ..src.header.clone()
    };
    let mut dataset = Dataset::new(header);
    for (map, rec) in maps.iter().zip(&src.records) {
        let squashed = squash(map, &stats)?;
        dataset.push(Record::from_map(&squashed).with_gt(rec.gt.clone()))?;
    }
    write_dataset(&dataset, out)?;
    println!(
        "squashed {} maps (mean {:.4}, std {:.4}) to {}",
        dataset.len(),
        stats.mean,
        stats.std,
        out.display()
    );
    Ok(())
}

fn maps_to_vae_inputs(ds: &Dataset) -> Vec<Vec<f32>> {
    ds.records.iter().map(|r| r.values.clone()).collect()
}

fn cmd_train(
    variant: Variant,
    data: &Path,
    data2: Option<&Path>,
    epochs: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let src = read_dataset(data)?;
    let (dataset, stats) = build_train_dataset(variant, &src)?;

    let hyper = TrainHyper {
        epochs,
        seed,
        ..TrainHyper::default()
    };
    let started = std::time::Instant::now();
    let (mut model, logs) = train_vae(variant, &dataset, &hyper)?;
    model.stats = stats;
    let elapsed = started.elapsed().as_secs_f64();

    save_model(&model, out)?;
    write_loss_csv(&loss_path(out), &logs)?;

    // encoder features of the training data, with ground truth carried over
    let latents = encode_all(&model, &dataset.inputs)?;
    let mut latent_ds = Dataset::new(DatasetHeader {
        gt_keys: src.header.gt_keys.clone(),
        ..DatasetHeader::latent(&src.header.config)
    });
    for (z, rec) in latents.iter().zip(&src.records) {
        latent_ds.push(Record {
            values: z.clone(),
            gt: rec.gt.clone(),
        })?;
    }
    write_dataset(&latent_ds, &latents_path(out))?;

    if let Some(last) = logs.last() {
        println!(
            "trained {} for {} epochs in {elapsed:.1} s: recon {:.6}, kl {:.4}, lambda {:.3e}",
            variant.name(),
            logs.len(),
            last.recon,
            last.kl,
            last.multiplier
        );
    } else {
        println!("trained {} for 0 epochs (initialization only)", variant.name());
    }

    if let Some(holdout) = data2 {
        let held_src = read_dataset(holdout)?;
        let (held, _) = build_train_dataset(variant, &held_src)?;
        let loss = reconstruction_loss(&model, &held)?;
        println!("holdout recon {loss:.6} over {} samples", held.inputs.len());
    }
    Ok(())
}

fn loss_path(model_out: &Path) -> PathBuf {
    let mut p = model_out.as_os_str().to_owned();
    p.push(".loss.csv");
    PathBuf::from(p)
}

fn latents_path(model_out: &Path) -> PathBuf {
    let mut p = model_out.as_os_str().to_owned();
    p.push(".latents.rds");
    PathBuf::from(p)
}

fn write_loss_csv(path: &Path, logs: &[EpochLog]) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "epoch,recon,kl,multiplier")?;
    for l in logs {
        writeln!(f, "{},{},{},{}", l.epoch, l.recon, l.kl, l.multiplier)?;
    }
    f.flush()?;
    Ok(())
}

/// Build the training inputs/targets for a variant from a container,
/// returning the normalization stats to store with the model.
fn build_train_dataset(
    variant: Variant,
    src: &Dataset,
) -> Result<(VaeDataset, Vec<(String, [f64; 2])>)> {
    match variant {
        Variant::Rd | Variant::Ra => {
            let want = match variant {
                Variant::Rd => RecordKind::RdMap,
                _ => RecordKind::RaMap,
            };
            if src.header.kind != want {
                return Err(Error::validation(format!(
                    "variant {} expects a {} container, got {}",
                    variant.name(),
                    want.name(),
                    src.header.kind.name()
                )));
            }
            let stats = src.header.squash.ok_or_else(|| {
                Error::State("maps are not squashed; run `squash` first".into())
            })?;
            Ok((
                VaeDataset {
                    inputs: maps_to_vae_inputs(src),
                    targets: TrainTargets::SameAsInput,
                },
                vec![("squash".into(), [stats.mean, stats.std])],
            ))
        }
        Variant::Chirp | Variant::ChirpFft => {
            if src.header.kind != RecordKind::Adc {
                return Err(Error::validation(format!(
                    "variant {} expects an adc container, got {}",
                    variant.name(),
                    src.header.kind.name()
                )));
            }
            let mode = match variant {
                Variant::Chirp => ChirpMode::Raw,
                _ => ChirpMode::Fft,
            };
            // streaming passes keep only one frame in memory at a time
            // (a full-length f64 frame corpus would run to gigabytes)
            let input_stats = {
                let mut acc = radar_repr::vae::chirp::StatsAccumulator::new();
                for rec in &src.records {
                    let f = rec.to_frame(&src.header)?;
                    match mode {
                        ChirpMode::Raw => acc.add_raw(&f)?,
                        ChirpMode::Fft => acc.add_fft_amplitudes(&f)?,
                    }
                }
                acc.finish()?
            };
            let per_frame: Vec<(Vec<f32>, RadarMap, RadarMap)> = src
                .records
                .par_iter()
                .map(|rec| -> Result<(Vec<f32>, RadarMap, RadarMap)> {
                    let f = rec.to_frame(&src.header)?;
                    let block: Vec<f32> = chirp_input(&f, mode, &input_stats)?
                        .values
                        .iter()
                        .map(|&v| v as f32)
                        .collect();
                    Ok((block, range_doppler_map(&f)?, range_azimuth_map(&f)?))
                })
                .collect::<Result<_>>()?;
            let inputs: Vec<Vec<f32>> = per_frame.iter().map(|p| p.0.clone()).collect();
            let rd_raw: Vec<RadarMap> = per_frame.iter().map(|p| p.1.clone()).collect();
            let ra_raw: Vec<RadarMap> = per_frame.into_iter().map(|p| p.2).collect();
            let rd_stats = SquashStats::from_maps(rd_raw.iter())?;
            let ra_stats = SquashStats::from_maps(ra_raw.iter())?;
            let to_f32 = |m: &RadarMap| -> Vec<f32> {
                m.values().iter().map(|&v| v as f32).collect()
            };
            let rd: Vec<Vec<f32>> = rd_raw
                .iter()
                .map(|m| Ok(to_f32(&squash(m, &rd_stats)?)))
                .collect::<Result<_>>()?;
            let ra: Vec<Vec<f32>> = ra_raw
                .iter()
                .map(|m| Ok(to_f32(&squash(m, &ra_stats)?)))
                .collect::<Result<_>>()?;
            Ok((
                VaeDataset {
                    inputs,
                    targets: TrainTargets::Maps { rd, ra },
                },
                vec![
                    ("input".into(), [input_stats.mean, input_stats.std]),
                    ("squash_rd".into(), [rd_stats.mean, rd_stats.std]),
                    ("squash_ra".into(), [ra_stats.mean, ra_stats.std]),
                ],
            ))
        }
    }
}

fn encode_all(
    model: &radar_repr::vae::VaeModel<f32>,
    inputs: &[Vec<f32>],
) -> Result<Vec<Vec<f32>>> {
    inputs
        .par_iter()
        .map(|x| -> Result<Vec<f32>> {
            let q = model.encode(x)?;
            Ok(q.mean.iter().map(|&v| v as f32).collect())
        })
        .collect()
}

fn reconstruction_loss(
    model: &radar_repr::vae::VaeModel<f32>,
    data: &VaeDataset,
) -> Result<f64> {
    use radar_repr::nn::layers::Scratch;
    use radar_repr::vae::train::chunk_loss;
    use radar_repr::vae::CHUNK;

    let n = data.inputs.len();
    let in_len = model.input_len();
    let n_heads = model.decoders.len();
    let mut acts = model.make_acts(CHUNK);
    let mut scratch = Scratch::new();
    let eps = vec![0.0f32; CHUNK * LATENT_DIM]; // posterior mean reconstruction
    let mut xs = vec![0.0f32; CHUNK * in_len];
    let mut total = 0.0;
    let mut start = 0;
    while start < n {
        let mb = (n - start).min(CHUNK);
        for s in 0..mb {
            xs[s * in_len..(s + 1) * in_len].copy_from_slice(&data.inputs[start + s]);
        }
        let targets: Vec<&[f32]> = (0..n_heads)
            .flat_map(|di| {
                (0..mb).map(move |s| match &data.targets {
                    TrainTargets::SameAsInput => data.inputs[start + s].as_slice(),
                    TrainTargets::Maps { rd, ra } => {
                        if di == 0 {
                            rd[start + s].as_slice()
                        } else {
                            ra[start + s].as_slice()
                        }
                    }
                })
            })
            .collect();
        let (recon, _) = chunk_loss(
            model,
            &model.arena.data,
            &xs[..mb * in_len],
            &targets,
            &eps[..mb * LATENT_DIM],
            &mut acts,
            &mut scratch,
        );
        total += recon;
        start += mb;
    }
    Ok(total / n as f64)
}

/// Task ground truth from container keys: ranges map directly; the
/// velocity task uses approach speed (positive toward the sensor), the
/// negative of the stored radial velocity.
fn gt_from_container(task: TaskArg, ds_path: &Path) -> Result<Vec<f64>> {
    let ds = read_dataset(ds_path)?;
    let key = match task {
        TaskArg::WallDistance | TaskArg::TargetDistance => "range",
        TaskArg::Velocity => "velocity",
        TaskArg::TargetAngle => "azimuth",
    };
    let ki = ds
        .header
        .gt_keys
        .iter()
        .position(|k| k == key)
        .ok_or_else(|| {
            Error::validation(format!(
                "container {} has no ground-truth key {key:?}",
                ds_path.display()
            ))
        })?;
    Ok(ds
        .records
        .iter()
        .map(|r| {
            let v = r.gt[ki];
            if matches!(task, TaskArg::Velocity) {
                -v
            } else {
                v
            }
        })
        .collect())
}

fn load_gt(task: TaskArg, path: &Path) -> Result<Vec<f64>> {
    if path.extension().and_then(|e| e.to_str()) == Some("csv") {
        read_values_csv(path)
    } else {
        gt_from_container(task, path)
    }
}

fn cmd_probe(task: TaskArg, features: &Path, gt: &Path, out: &Path) -> Result<()> {
    let ds = read_dataset(features)?;
    if ds.header.kind != RecordKind::Latent {
        return Err(Error::validation(format!(
            "probe expects a latent container, got {}",
            ds.header.kind.name()
        )));
    }
    let feats: Vec<Vec<f64>> = ds
        .records
        .iter()
        .map(|r| r.values.iter().map(|&v| v as f64).collect())
        .collect();
    let truth = load_gt(task, gt)?;
    if truth.len() != feats.len() {
        return Err(Error::shape(
            format!("{} ground-truth values", feats.len()),
            truth.len().to_string(),
        ));
    }

    // deterministic protocol: 5/6 train, 1/6 held out, fixed seed
    let (train_idx, test_idx) = split_dataset(feats.len(), 0)?;
    let train_feats: Vec<Vec<f64>> = train_idx.iter().map(|&i| feats[i].clone()).collect();
    let train_gt: Vec<f64> = train_idx.iter().map(|&i| truth[i]).collect();
    let head = fit_head(&train_feats, &train_gt, &HeadHyper::default())?;

    let flat: Vec<f64> = feats.iter().flatten().cloned().collect();
    let preds = head.predict(&flat)?;
    write_values_csv(out, &preds)?;

    let test_preds: Vec<f64> = test_idx.iter().map(|&i| preds[i]).collect();
    let test_gt: Vec<f64> = test_idx.iter().map(|&i| truth[i]).collect();
    let metrics = evaluate(&test_preds, &test_gt)?;
    print_metrics(task_label(task), test_preds.len(), &metrics);
    Ok(())
}

/// Fixed-format table plus a machine-readable key=value line.
fn print_metrics(label: &str, n: usize, m: &radar_repr::downstream::TaskMetrics) {
    println!("{:<18} {:>10} {:>12} {:>12} {:>12}", "task", "frames", "rmse", "median", "iqr");
    println!(
        "{label:<18} {n:>10} {:>12.6} {:>12.6} {:>12.6}",
        m.rmse, m.median_error, m.interquartile
    );
    println!("{m}");
}

fn task_label(task: TaskArg) -> &'static str {
    match task {
        TaskArg::WallDistance => "wall-distance",
        TaskArg::Velocity => "velocity",
        TaskArg::TargetDistance => "target-distance",
        TaskArg::TargetAngle => "target-angle",
    }
}

fn cmd_baseline(task: TaskArg, maps: &Path, gt: &Path) -> Result<()> {
    let ds = read_dataset(maps)?;
    if !matches!(ds.header.kind, RecordKind::RdMap | RecordKind::RaMap) {
        return Err(Error::validation("baseline expects a map container"));
    }
    let axes = derive_axes(&ds.header.config)?;
    let preds: Vec<f64> = (0..ds.len())
        .map(|i| -> Result<f64> {
            let map = record_to_map(&ds, i)?;
            match task {
                TaskArg::WallDistance => baseline::estimate_wall_distance(&map, &axes),
                TaskArg::Velocity => baseline::estimate_forward_velocity(&map, &axes),
                TaskArg::TargetDistance => baseline::estimate_target_distance(&map, &axes),
                TaskArg::TargetAngle => baseline::estimate_target_angle(&map, &axes),
            }
        })
        .collect::<Result<_>>()?;
    let truth = load_gt(task, gt)?;
    let metrics = evaluate(&preds, &truth)?;
    print_metrics(task_label(task), preds.len(), &metrics);
    Ok(())
}

fn cmd_eval(pred: &Path, gt: &Path) -> Result<()> {
    let p = read_values_csv(pred)?;
    let g = read_values_csv(gt)?;
    let metrics = evaluate(&p, &g)?;
    print_metrics("eval", p.len(), &metrics);
    Ok(())
}

fn cmd_render(input: &Path, frame: usize, out: &Path) -> Result<()> {
    let ds = read_dataset(input)?;
    if !matches!(ds.header.kind, RecordKind::RdMap | RecordKind::RaMap) {
        return Err(Error::validation("render expects a map container"));
    }
    if frame >= ds.len() {
        return Err(Error::Bounds {
            name: "frame",
            value: frame,
            limit: ds.len(),
        });
    }
    let map = record_to_map(&ds, frame)?;
    render_map(&map, out)
}

/// Write a map as binary 8-bit PGM, min-max scaled, with range on the
/// vertical axis increasing downward. A constant map renders as all
/// zeros.
pub fn render_map(map: &RadarMap, path: &Path) -> Result<()> {
    use std::io::Write;
    let (rows, cols) = (map.rows(), map.cols());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in map.values() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;
    let mut body = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let v = map.at(r, c);
            let px = if span > 0.0 {
                ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            };
            body.push(px);
        }
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P5\n{cols} {rows}\n255\n")?;
    f.write_all(&body)?;
    f.flush()?;
    Ok(())
}
