//! Frozen-encoder regression heads and task metrics.
//!
//! A trained encoder is probed by fitting a small fully connected network
//! (two hidden layers of 128) on the 32-dimensional posterior means, one
//! head per task. Errors are reported as RMSE, median error and the
//! inter-quartile difference.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::nn::adam::Adam;
use crate::nn::layers::{Act, Dense, ParamArena};
use crate::nn::real::Real;
use crate::vae::{VaeModel, LATENT_DIM};
use crate::Result;

/// Posterior mean of the frozen encoder: the 32-value feature vector.
pub fn extract_features<T: Real>(model: &VaeModel<T>, x: &[T]) -> Result<Vec<f64>> {
    Ok(model.encode(x)?.mean)
}

/// Deterministic shuffled split with `round(n/6)` test samples.
pub fn split_dataset(n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 6 {
        return Err(Error::validation(format!(
            "need at least 6 samples to split 5/6 : 1/6, got {n}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_test = ((n as f64) / 6.0).round() as usize;
    let test = idx[..n_test].to_vec();
    let train = idx[n_test..].to_vec();
    Ok((train, test))
}

/// Hyperparameters for head fitting.
#[derive(Debug, Clone)]
pub struct HeadHyper {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for HeadHyper {
    fn default() -> Self {
        HeadHyper {
            epochs: 500,
            lr: 1e-3,
            batch: 32,
            seed: 0,
        }
    }
}

/// Linear(32→128) → Linear(128→128) → Linear(128→1), leaky ReLU between.
/// Targets are standardized during training and un-standardized at
/// prediction time.
#[derive(Debug, Clone)]
pub struct RegressionHead {
    arena: ParamArena<f32>,
    l1: Dense,
    l2: Dense,
    l3: Dense,
    target_mean: f64,
    target_std: f64,
}

const HIDDEN: usize = 128;

impl RegressionHead {
    fn new() -> Self {
        let mut arena = ParamArena::<f32>::new();
        let l1 = Dense::new(&mut arena, "head.fc1", LATENT_DIM, HIDDEN, Act::LeakyRelu);
        let l2 = Dense::new(&mut arena, "head.fc2", HIDDEN, HIDDEN, Act::LeakyRelu);
        let l3 = Dense::new(&mut arena, "head.fc3", HIDDEN, 1, Act::None);
        RegressionHead {
            arena,
            l1,
            l2,
            l3,
            target_mean: 0.0,
            target_std: 1.0,
        }
    }

    fn init(&mut self, seed: u64) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries: Vec<_> = self.arena.entries().to_vec();
        for e in &entries {
            if e.name.ends_with(".weight") {
                let bound = 1.0 / (e.shape[0] as f64).sqrt();
                for v in &mut self.arena.data[e.offset..e.offset + e.len] {
                    let u: f64 = rng.random();
                    *v = ((2.0 * u - 1.0) * bound) as f32;
                }
            }
        }
    }

    fn forward(
        &self,
        features: &[f32],
        mb: usize,
        h1: &mut [f32],
        h2: &mut [f32],
        out: &mut [f32],
    ) {
        self.l1
            .forward(&self.arena, &self.arena.data, features, h1, mb);
        self.l2.forward(&self.arena, &self.arena.data, h1, h2, mb);
        self.l3.forward(&self.arena, &self.arena.data, h2, out, mb);
    }

    /// Predict task values for a batch of feature vectors.
    pub fn predict(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() % LATENT_DIM != 0 {
            return Err(Error::shape(
                format!("multiple of {LATENT_DIM} features"),
                features.len().to_string(),
            ));
        }
        let n = features.len() / LATENT_DIM;
        let f32s: Vec<f32> = features.iter().map(|&v| v as f32).collect();
        let mut out = Vec::with_capacity(n);
        let mut h1 = vec![0.0f32; HIDDEN];
        let mut h2 = vec![0.0f32; HIDDEN];
        let mut o = vec![0.0f32; 1];
        for s in 0..n {
            self.forward(
                &f32s[s * LATENT_DIM..(s + 1) * LATENT_DIM],
                1,
                &mut h1,
                &mut h2,
                &mut o,
            );
            out.push(o[0] as f64 * self.target_std + self.target_mean);
        }
        Ok(out)
    }
}

/// Fit a regression head on (features, targets) with MSE + Adam.
/// Deterministic for a given seed.
pub fn fit_head(
    features: &[Vec<f64>],
    targets: &[f64],
    hyper: &HeadHyper,
) -> Result<RegressionHead> {
    if features.is_empty() || features.len() != targets.len() {
        return Err(Error::shape(
            format!("{} targets", features.len()),
            targets.len().to_string(),
        ));
    }
    if features.len() < 2 {
        return Err(Error::validation("need at least 2 samples to fit"));
    }
    for (i, f) in features.iter().enumerate() {
        if f.len() != LATENT_DIM {
            return Err(Error::shape(
                format!("sample {i}: {LATENT_DIM} features"),
                f.len().to_string(),
            ));
        }
    }

    let n = targets.len();
    let mean: f64 = targets.iter().sum::<f64>() / n as f64;
    let var: f64 = targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt().max(1e-12);

    let mut head = RegressionHead::new();
    head.init(hyper.seed);
    head.target_mean = mean;
    head.target_std = std;

    let feats: Vec<f32> = features
        .iter()
        .flat_map(|f| f.iter().map(|&v| v as f32))
        .collect();
    let std_targets: Vec<f32> = targets.iter().map(|&t| ((t - mean) / std) as f32).collect();

    let mut adam = Adam::<f32>::new(head.arena.len(), hyper.lr);
    let batch = hyper.batch.max(1);
    let mut order: Vec<usize> = (0..n).collect();

    let mut xbuf = vec![0.0f32; batch * LATENT_DIM];
    let mut h1 = vec![0.0f32; batch * HIDDEN];
    let mut h2 = vec![0.0f32; batch * HIDDEN];
    let mut out = vec![0.0f32; batch];
    let mut d_out = vec![0.0f32; batch];
    let mut d_h2 = vec![0.0f32; batch * HIDDEN];
    let mut d_h1 = vec![0.0f32; batch * HIDDEN];
    let mut grads = head.arena.zeros_like();

    for epoch in 0..hyper.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(
            hyper.seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        order.shuffle(&mut rng);
        let mut start = 0;
        while start < n {
            let bs = (n - start).min(batch);
            for (s, &i) in order[start..start + bs].iter().enumerate() {
                xbuf[s * LATENT_DIM..(s + 1) * LATENT_DIM]
                    .copy_from_slice(&feats[i * LATENT_DIM..(i + 1) * LATENT_DIM]);
            }
            head.forward(
                &xbuf[..bs * LATENT_DIM],
                bs,
                &mut h1[..bs * HIDDEN],
                &mut h2[..bs * HIDDEN],
                &mut out[..bs],
            );
            for s in 0..bs {
                let t = std_targets[order[start + s]];
                d_out[s] = 2.0 * (out[s] - t) / bs as f32;
            }
            grads.iter_mut().for_each(|g| *g = 0.0);
            let arena = &head.arena;
            head.l3.backward(
                arena,
                &arena.data,
                &h2[..bs * HIDDEN],
                &out[..bs],
                &mut d_out[..bs],
                Some(&mut d_h2[..bs * HIDDEN]),
                &mut grads,
                bs,
            );
            head.l2.backward(
                arena,
                &arena.data,
                &h1[..bs * HIDDEN],
                &h2[..bs * HIDDEN],
                &mut d_h2[..bs * HIDDEN],
                Some(&mut d_h1[..bs * HIDDEN]),
                &mut grads,
                bs,
            );
            head.l1.backward(
                arena,
                &arena.data,
                &xbuf[..bs * LATENT_DIM],
                &h1[..bs * HIDDEN],
                &mut d_h1[..bs * HIDDEN],
                None,
                &mut grads,
                bs,
            );
            adam.step(&mut head.arena.data, &grads);
            start += bs;
        }
    }
    Ok(head)
}

/// RMSE, median error and inter-quartile difference of prediction errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskMetrics {
    pub rmse: f64,
    pub median_error: f64,
    pub interquartile: f64,
}

impl std::fmt::Display for TaskMetrics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "rmse={:.6} median={:.6} iqr={:.6}",
            self.rmse, self.median_error, self.interquartile
        )
    }
}

/// Linear-interpolation quantile of a sorted slice at fraction `p`.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = (n - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < n {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

/// Evaluate signed errors `pred − gt`.
///
/// Median uses the midpoint convention for even counts; quartiles use
/// linear interpolation between order statistics.
pub fn evaluate(predictions: &[f64], ground_truth: &[f64]) -> Result<TaskMetrics> {
    if predictions.len() != ground_truth.len() {
        return Err(Error::shape(
            format!("{} ground-truth values", predictions.len()),
            ground_truth.len().to_string(),
        ));
    }
    if predictions.is_empty() {
        return Err(Error::validation("cannot evaluate zero samples"));
    }
    let mut errors: Vec<f64> = predictions
        .iter()
        .zip(ground_truth)
        .map(|(p, g)| p - g)
        .collect();
    let n = errors.len() as f64;
    let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_error = if errors.len() % 2 == 1 {
        errors[errors.len() / 2]
    } else {
        0.5 * (errors[errors.len() / 2 - 1] + errors[errors.len() / 2])
    };
    let interquartile = quantile_sorted(&errors, 0.75) - quantile_sorted(&errors, 0.25);
    Ok(TaskMetrics {
        rmse,
        median_error,
        interquartile,
    })
}

/// Write `(frame_index, value)` rows.
pub fn write_values_csv(path: &std::path::Path, values: &[f64]) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "frame_index,value")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(f, "{i},{v}")?;
    }
    f.flush()?;
    Ok(())
}

/// Read `(frame_index, value)` rows, requiring indices 0..n in order.
pub fn read_values_csv(path: &std::path::Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("frame_index")) {
            continue;
        }
        let (idx, val) = line.split_once(',').ok_or_else(|| {
            Error::validation(format!("line {}: expected index,value", lineno + 1))
        })?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|_| Error::validation(format!("line {}: bad index", lineno + 1)))?;
        if idx != values.len() {
            return Err(Error::validation(format!(
                "line {}: expected frame {} got {}",
                lineno + 1,
                values.len(),
                idx
            )));
        }
        let val: f64 = val
            .trim()
            .parse()
            .map_err(|_| Error::validation(format!("line {}: bad value", lineno + 1)))?;
        values.push(val);
    }
    Ok(values)
}

/// Reference metrics from the full recorded-dataset benchmark, for
/// comparison when the optional full-data run is reproduced.
pub mod reference {
    /// (rmse, median, interquartile) per task:
    /// wall distance, forward velocity, target distance, target angle.
    pub type ModelRow = [(f64, f64, f64); 4];

    pub const RADAR_BASELINE: ModelRow = [
        (1.32, 0.43, 0.51),
        (0.20, -0.02, 0.28),
        (0.48, 0.20, 0.14),
        (0.14, 0.03, 0.07),
    ];
    pub const RD_VAE: ModelRow = [
        (0.75, -0.05, 0.59),
        (0.14, 0.02, 0.17),
        (0.19, 0.03, 0.22),
        (0.17, 0.02, 0.19),
    ];
    pub const RA_VAE: ModelRow = [
        (0.86, 0.00, 0.70),
        (0.28, -0.06, 0.37),
        (0.23, 0.04, 0.25),
        (0.11, -0.01, 0.13),
    ];
    pub const CHIRP_VAE: ModelRow = [
        (0.84, 0.00, 0.75),
        (0.48, -0.19, 0.61),
        (0.28, 0.08, 0.31),
        (0.18, 0.00, 0.20),
    ];
    pub const CHIRP_FFT_VAE: ModelRow = [
        (0.89, 0.00, 0.87),
        (0.48, -0.16, 0.57),
        (0.24, 0.06, 0.32),
        (0.18, 0.01, 0.20),
    ];
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluate_exact_predictions() {
        let m = evaluate(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(
            m,
            TaskMetrics {
                rmse: 0.0,
                median_error: 0.0,
                interquartile: 0.0
            }
        );
    }

    #[test]
    fn evaluate_unit_errors() {
        // errors {−1, 0, 1}: rmse √(2/3), median 0, IQR 1 under the
        // linear-interpolation quantile convention
        let m = evaluate(&[0.0, 1.0, 3.0], &[1.0, 1.0, 2.0]).unwrap();
        assert!((m.rmse - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((m.rmse - 0.8165).abs() < 1e-4);
        assert_eq!(m.median_error, 0.0);
        assert!((m.interquartile - 1.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_is_permutation_invariant() {
        let pred = vec![1.0, 4.0, 2.0, 8.0, 5.5];
        let gt = vec![0.5, 4.5, 2.5, 7.0, 5.5];
        let a = evaluate(&pred, &gt).unwrap();
        let perm = [3usize, 0, 4, 1, 2];
        let pred_p: Vec<f64> = perm.iter().map(|&i| pred[i]).collect();
        let gt_p: Vec<f64> = perm.iter().map(|&i| gt[i]).collect();
        let b = evaluate(&pred_p, &gt_p).unwrap();
        assert!((a.rmse - b.rmse).abs() < 1e-15);
        assert_eq!(a.median_error, b.median_error);
        assert_eq!(a.interquartile, b.interquartile);
    }

    #[test]
    fn shifting_predictions_shifts_median_only() {
        let pred = vec![1.0, 4.0, 2.0, 8.0, 5.5, 3.3];
        let gt = vec![0.5, 4.5, 2.5, 7.0, 5.5, 3.0];
        let base = evaluate(&pred, &gt).unwrap();
        let shifted: Vec<f64> = pred.iter().map(|p| p + 0.7).collect();
        let m = evaluate(&shifted, &gt).unwrap();
        assert!((m.median_error - (base.median_error + 0.7)).abs() < 1e-12);
        assert!((m.interquartile - base.interquartile).abs() < 1e-12);
    }

    #[test]
    fn rmse_decomposition_identity() {
        let pred = vec![1.2, -0.3, 4.4, 2.0, 0.0, 9.1, 3.3];
        let gt = vec![1.0, 0.0, 4.0, 2.5, -1.0, 8.0, 3.0];
        let m = evaluate(&pred, &gt).unwrap();
        let errors: Vec<f64> = pred.iter().zip(&gt).map(|(p, g)| p - g).collect();
        let mean = errors.iter().sum::<f64>() / errors.len() as f64;
        let var =
            errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / errors.len() as f64;
        assert!((m.rmse * m.rmse - (mean * mean + var)).abs() / (m.rmse * m.rmse) < 1e-12);
        // rmse ≥ |mean error|
        assert!(m.rmse >= mean.abs());
    }

    #[test]
    fn split_sizes_and_partition() {
        let (train, test) = split_dataset(6, 0).unwrap();
        assert_eq!((train.len(), test.len()), (5, 1));
        let (train, test) = split_dataset(12_000, 1).unwrap();
        assert_eq!((train.len(), test.len()), (10_000, 2_000));
        assert!(split_dataset(5, 0).is_err());

        for n in [6usize, 7, 100, 999] {
            let (train, test) = split_dataset(n, 42).unwrap();
            let mut all: Vec<usize> = train.iter().chain(test.iter()).cloned().collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>(), "n={n}");
        }
        assert_eq!(split_dataset(100, 7).unwrap(), split_dataset(100, 7).unwrap());
        assert_ne!(
            split_dataset(100, 7).unwrap().1,
            split_dataset(100, 8).unwrap().1
        );
    }

    #[test]
    fn head_fits_constant_target() {
        let features: Vec<Vec<f64>> = (0..40)
            .map(|i| (0..32).map(|j| ((i * j) % 7) as f64 / 7.0).collect())
            .collect();
        let targets = vec![3.25; 40];
        let head = fit_head(&features, &targets, &HeadHyper::default()).unwrap();
        let flat: Vec<f64> = features.iter().flatten().cloned().collect();
        let preds = head.predict(&flat).unwrap();
        for p in preds {
            assert!((p - 3.25).abs() < 1e-3, "prediction {p}");
        }
    }

    #[test]
    fn head_recovers_linear_map() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w: Vec<f64> = (0..32).map(|_| rng.random::<f64>() - 0.5).collect();
        let features: Vec<Vec<f64>> = (0..240)
            .map(|_| (0..32).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let targets: Vec<f64> = features
            .iter()
            .map(|f| f.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let head = fit_head(&features, &targets, &HeadHyper::default()).unwrap();
        let flat: Vec<f64> = features.iter().flatten().cloned().collect();
        let preds = head.predict(&flat).unwrap();
        let m = evaluate(&preds, &targets).unwrap();
        let t_std = {
            let mean = targets.iter().sum::<f64>() / targets.len() as f64;
            (targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>()
                / targets.len() as f64)
                .sqrt()
        };
        assert!(m.rmse < 1e-2 * t_std, "train rmse {} vs std {t_std}", m.rmse);
    }

    #[test]
    fn head_is_deterministic() {
        let features: Vec<Vec<f64>> = (0..24)
            .map(|i| (0..32).map(|j| ((i + j) % 5) as f64).collect())
            .collect();
        let targets: Vec<f64> = (0..24).map(|i| i as f64 * 0.1).collect();
        let hyper = HeadHyper {
            epochs: 20,
            ..HeadHyper::default()
        };
        let a = fit_head(&features, &targets, &hyper).unwrap();
        let b = fit_head(&features, &targets, &hyper).unwrap();
        let flat: Vec<f64> = features.iter().flatten().cloned().collect();
        assert_eq!(a.predict(&flat).unwrap(), b.predict(&flat).unwrap());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(fit_head(&[], &[], &HeadHyper::default()).is_err());
        let features = vec![vec![0.0; 32]];
        assert!(fit_head(&features, &[1.0, 2.0], &HeadHyper::default()).is_err());
        assert!(evaluate(&[1.0], &[1.0, 2.0]).is_err());
        assert!(evaluate(&[], &[]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut path = std::env::temp_dir();
        path.push(format!("radar-repr-csv-{}.csv", std::process::id()));
        let values = vec![1.5, -2.25, 0.0, 1e-9];
        write_values_csv(&path, &values).unwrap();
        let back = read_values_csv(&path).unwrap();
        assert_eq!(values, back);
        std::fs::remove_file(&path).ok();
    }
}
