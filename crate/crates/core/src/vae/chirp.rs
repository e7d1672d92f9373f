//! Input blocks for the chirp VAE variants.
//!
//! `raw` mode takes the ADC samples of the first two chirps across all
//! antennas (2·num_rx channels × samples_per_chirp), standardized by
//! dataset mean/std. `fft` mode range-FFTs those chirps and stacks
//! log-squashed amplitudes with π-scaled phases
//! (2 · 2·num_rx channels × range bins).
//!
//! Blocks are laid out `[position][channel]` to match the 1-D conv layers.

use crate::dsp::{range_fft, SquashStats};
use crate::error::Error;
use crate::simsig::AdcFrame;
use crate::Result;

/// Which preprocessing a chirp block went through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChirpMode {
    Raw,
    Fft,
}

/// One neural-net input block.
#[derive(Debug, Clone, PartialEq)]
pub struct ChirpBlock {
    pub mode: ChirpMode,
    /// `[position][channel]`, row-major.
    pub values: Vec<f64>,
    pub channels: usize,
    pub len: usize,
}

/// Dataset-level standardization for raw mode (mean/std of the ADC
/// samples) or squash stats for fft-mode amplitudes.
pub type ChirpStats = SquashStats;

/// Streaming moment accumulator so dataset statistics can be computed
/// one frame at a time (a full f64 frame corpus would run to gigabytes).
#[derive(Debug, Clone, Copy, Default)]
pub struct StatsAccumulator {
    sum: f64,
    sum_sq: f64,
    count: u64,
}

impl StatsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fold in the raw two-chirp samples of one frame.
    pub fn add_raw(&mut self, frame: &AdcFrame) -> Result<()> {
        check_two_chirps(frame)?;
        for chirp in 0..2 {
            for ant in 0..frame.config().num_rx {
                for &v in frame.chirp(chirp, ant) {
                    self.sum += v;
                    self.sum_sq += v * v;
                    self.count += 1;
                }
            }
        }
        Ok(())
    }

    /// Fold in the log-amplitudes of one frame's two-chirp range FFT.
    pub fn add_fft_amplitudes(&mut self, frame: &AdcFrame) -> Result<()> {
        check_two_chirps(frame)?;
        let cube = range_fft(frame)?;
        for chirp in 0..2 {
            for ant in 0..cube.num_rx() {
                for r in 0..cube.num_range_bins() {
                    let x = (1.0 + cube.at(chirp, ant, r).norm()).log10();
                    self.sum += x;
                    self.sum_sq += x * x;
                    self.count += 1;
                }
            }
        }
        Ok(())
    }

    pub fn finish(&self) -> Result<ChirpStats> {
        if self.count == 0 {
            return Err(Error::validation("empty frame corpus"));
        }
        let mean = self.sum / self.count as f64;
        let std = (self.sum_sq / self.count as f64 - mean * mean).max(0.0).sqrt();
        Ok(ChirpStats {
            mean,
            std: std.max(1e-12),
        })
    }
}

/// Mean/std of the raw two-chirp samples over a dataset.
pub fn raw_stats(frames: &[AdcFrame]) -> Result<ChirpStats> {
    let mut acc = StatsAccumulator::new();
    for frame in frames {
        acc.add_raw(frame)?;
    }
    acc.finish()
}

/// Squash stats of the two-chirp range-FFT amplitudes over a dataset.
pub fn fft_amplitude_stats(frames: &[AdcFrame]) -> Result<ChirpStats> {
    let mut acc = StatsAccumulator::new();
    for frame in frames {
        acc.add_fft_amplitudes(frame)?;
    }
    acc.finish()
}

fn check_two_chirps(frame: &AdcFrame) -> Result<()> {
    if frame.config().num_chirps < 2 {
        return Err(Error::validation(format!(
            "chirp input needs at least 2 chirps, frame has {}",
            frame.config().num_chirps
        )));
    }
    Ok(())
}

/// Build the network input block from the first two chirps of a frame.
pub fn chirp_input(frame: &AdcFrame, mode: ChirpMode, stats: &ChirpStats) -> Result<ChirpBlock> {
    check_two_chirps(frame)?;
    stats.validate()?;
    let cfg = frame.config();
    let n_src = 2 * cfg.num_rx;
    match mode {
        ChirpMode::Raw => {
            let len = cfg.samples_per_chirp;
            let mut values = vec![0.0f64; len * n_src];
            for chirp in 0..2usize {
                for ant in 0..cfg.num_rx {
                    let ch = chirp * cfg.num_rx + ant;
                    for (pos, &v) in frame.chirp(chirp, ant).iter().enumerate() {
                        values[pos * n_src + ch] = (v - stats.mean) / stats.std;
                    }
                }
            }
            Ok(ChirpBlock {
                mode,
                values,
                channels: n_src,
                len,
            })
        }
        ChirpMode::Fft => {
            let cube = range_fft(frame)?;
            let len = cube.num_range_bins();
            let channels = 2 * n_src;
            let mut values = vec![0.0f64; len * channels];
            for chirp in 0..2usize {
                for ant in 0..cfg.num_rx {
                    let src = chirp * cfg.num_rx + ant;
                    for r in 0..len {
                        let z = cube.at(chirp, ant, r);
                        let t = (((1.0 + z.norm()).log10() - stats.mean) / stats.std)
                            .clamp(-36.0, 36.0);
                        let amp = 1.0 / (1.0 + (-t).exp());
                        let phase = z.arg() / std::f64::consts::PI;
                        values[r * channels + src] = amp;
                        values[r * channels + n_src + src] = phase;
                    }
                }
            }
            Ok(ChirpBlock {
                mode,
                values,
                channels,
                len,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RadarConfig;
    use crate::simsig::{simulate_frame, PointTarget, Scene};

    fn frame(range: f64) -> AdcFrame {
        let scene = Scene::single(
            PointTarget {
                range,
                radial_velocity: 0.0,
                azimuth: 0.0,
                amplitude: 1.0,
            },
            0.0,
        );
        simulate_frame(&scene, &RadarConfig::default(), 0).unwrap()
    }

    #[test]
    fn raw_block_shape_and_zero_frame() {
        let zero = simulate_frame(&Scene::empty(), &RadarConfig::default(), 0).unwrap();
        let stats = ChirpStats {
            mean: 0.0,
            std: 1.0,
        };
        let block = chirp_input(&zero, ChirpMode::Raw, &stats).unwrap();
        assert_eq!((block.channels, block.len), (8, 256));
        assert!(block.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fft_block_shape_and_ranges() {
        let f = frame(5.0);
        let stats = fft_amplitude_stats(std::slice::from_ref(&f)).unwrap();
        let block = chirp_input(&f, ChirpMode::Fft, &stats).unwrap();
        assert_eq!((block.channels, block.len), (16, 128));
        for r in 0..block.len {
            for c in 0..8 {
                let amp = block.values[r * 16 + c];
                assert!(amp > 0.0 && amp < 1.0);
                let ph = block.values[r * 16 + 8 + c];
                assert!((-1.0..=1.0).contains(&ph));
            }
        }
    }

    #[test]
    fn fft_amplitude_peaks_at_target_bin() {
        let f = frame(5.0);
        let stats = fft_amplitude_stats(std::slice::from_ref(&f)).unwrap();
        let block = chirp_input(&f, ChirpMode::Fft, &stats).unwrap();
        for c in 0..8 {
            let peak = (0..block.len)
                .max_by(|&a, &b| {
                    block.values[a * 16 + c]
                        .partial_cmp(&block.values[b * 16 + c])
                        .unwrap()
                })
                .unwrap();
            assert_eq!(peak, 68, "amplitude channel {c}");
        }
    }

    #[test]
    fn raw_standardization_uses_stats() {
        let f = frame(3.0);
        let stats = raw_stats(std::slice::from_ref(&f)).unwrap();
        let block = chirp_input(&f, ChirpMode::Raw, &stats).unwrap();
        let n = block.values.len() as f64;
        let mean: f64 = block.values.iter().sum::<f64>() / n;
        let var: f64 = block.values.iter().map(|v| v * v).sum::<f64>() / n - mean * mean;
        assert!(mean.abs() < 0.2, "standardized mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 0.35, "standardized std {}", var.sqrt());
    }

    #[test]
    fn too_few_chirps_rejected() {
        let cfg = RadarConfig {
            num_chirps: 1,
            ..RadarConfig::default()
        };
        let f = simulate_frame(&Scene::empty(), &cfg, 0).unwrap();
        let stats = ChirpStats {
            mean: 0.0,
            std: 1.0,
        };
        assert!(chirp_input(&f, ChirpMode::Raw, &stats).is_err());
    }
}
