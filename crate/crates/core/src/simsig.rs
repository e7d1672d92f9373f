//! Synthetic raw-ADC frame generation from parametric point-target scenes.
//!
//! The simulator implements the standard FMCW beat-signal model for a
//! uniform linear receive array with λ/2 spacing. A target at range R,
//! radial velocity v (positive = receding) and azimuth θ contributes to
//! chirp m, antenna p, fast-time sample n:
//!
//! ```text
//! a · cos(2π f_b n / f_s  +  m Δφ  +  p ψ  +  φ0)
//!   f_b = 2 R s / c          beat frequency (slope s)
//!   Δφ  = 4π v T_c / λ       Doppler phase step per chirp
//!   ψ   = π sin θ            array phase step per antenna
//!   φ0  = 4π R / λ           constant range phase
//! ```
//!
//! Samples are real-valued; the conjugate image at negative beat frequency
//! is discarded later by keeping positive range bins only. Range migration
//! within one frame is neglected (stop-and-hop).

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{derive_axes, RadarConfig};
use crate::error::Error;
use crate::Result;

/// A single ideal point scatterer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointTarget {
    /// Range (m), 0 < range < unambiguous range.
    pub range: f64,
    /// Radial velocity (m/s), positive = receding; |v| < unambiguous speed.
    pub radial_velocity: f64,
    /// Azimuth (rad) in (−π/2, π/2).
    pub azimuth: f64,
    /// Linear amplitude, > 0.
    pub amplitude: f64,
}

/// A collection of point targets plus white noise. May be empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub targets: Vec<PointTarget>,
    /// Standard deviation of the additive Gaussian noise (linear amplitude).
    pub noise_std: f64,
}

impl Scene {
    pub fn empty() -> Self {
        Scene {
            targets: Vec::new(),
            noise_std: 0.0,
        }
    }

    pub fn single(target: PointTarget, noise_std: f64) -> Self {
        Scene {
            targets: vec![target],
            noise_std,
        }
    }
}

/// One frame of raw ADC samples: chirps × receive antennas × fast time.
#[derive(Debug, Clone, PartialEq)]
pub struct AdcFrame {
    samples: Vec<f64>,
    config: RadarConfig,
}

impl AdcFrame {
    /// Build a frame from raw samples laid out `[chirp][antenna][sample]`.
    pub fn from_samples(samples: Vec<f64>, config: RadarConfig) -> Result<Self> {
        config.validate()?;
        let expected = config.num_chirps * config.num_rx * config.samples_per_chirp;
        if samples.len() != expected {
            return Err(Error::shape(
                format!(
                    "{}x{}x{} = {expected} samples",
                    config.num_chirps, config.num_rx, config.samples_per_chirp
                ),
                samples.len().to_string(),
            ));
        }
        if !samples.iter().all(|v| v.is_finite()) {
            return Err(Error::validation("non-finite ADC sample"));
        }
        Ok(AdcFrame { samples, config })
    }

    pub fn config(&self) -> &RadarConfig {
        &self.config
    }

    /// Flat `[chirp][antenna][sample]` view.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Fast-time slice for one chirp and antenna.
    pub fn chirp(&self, chirp: usize, antenna: usize) -> &[f64] {
        let n = self.config.samples_per_chirp;
        let start = (chirp * self.config.num_rx + antenna) * n;
        &self.samples[start..start + n]
    }

    /// Sum of squared samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum()
    }
}

/// Validate a target against the unambiguous limits of `cfg`.
pub fn validate_target(target: &PointTarget, cfg: &RadarConfig) -> Result<()> {
    let axes = derive_axes(cfg)?;
    if !(target.range > 0.0) || target.range >= axes.max_range() {
        return Err(Error::validation(format!(
            "target range {} m outside (0, {:.3}) m",
            target.range,
            axes.max_range()
        )));
    }
    let vmax = axes.max_unambiguous_speed();
    if target.radial_velocity.abs() >= vmax {
        return Err(Error::validation(format!(
            "target speed {} m/s outside ±{vmax:.3} m/s",
            target.radial_velocity
        )));
    }
    if target.azimuth.abs() >= PI / 2.0 {
        return Err(Error::validation(format!(
            "target azimuth {} rad outside (−π/2, π/2)",
            target.azimuth
        )));
    }
    if !(target.amplitude > 0.0) {
        return Err(Error::validation("target amplitude must be > 0"));
    }
    Ok(())
}

/// Simulate one raw ADC frame.
///
/// Noise is drawn from a generator seeded only by `seed`, so frames are
/// reproducible regardless of how many frames were generated before.
pub fn simulate_frame(scene: &Scene, cfg: &RadarConfig, seed: u64) -> Result<AdcFrame> {
    cfg.validate()?;
    if scene.noise_std < 0.0 {
        return Err(Error::validation("noise_std must be >= 0"));
    }
    for t in &scene.targets {
        validate_target(t, cfg)?;
    }
    let axes = derive_axes(cfg)?;

    let n_fast = cfg.samples_per_chirp;
    let total = cfg.num_chirps * cfg.num_rx * n_fast;
    let mut samples = vec![0.0f64; total];

    for t in &scene.targets {
        let beat_freq = 2.0 * t.range * cfg.frequency_slope / crate::config::SPEED_OF_LIGHT;
        let fast_step = 2.0 * PI * beat_freq / cfg.sample_rate;
        let doppler_step = 4.0 * PI * t.radial_velocity * axes.chirp_interval / axes.wavelength;
        let antenna_step = PI * t.azimuth.sin();
        let phase0 = 4.0 * PI * t.range / axes.wavelength;

        let mut idx = 0;
        for m in 0..cfg.num_chirps {
            for p in 0..cfg.num_rx {
                let base = m as f64 * doppler_step + p as f64 * antenna_step + phase0;
                for n in 0..n_fast {
                    samples[idx] += t.amplitude * (fast_step * n as f64 + base).cos();
                    idx += 1;
                }
            }
        }
    }

    if scene.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in samples.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *s += scene.noise_std * e;
        }
    }

    AdcFrame::from_samples(samples, cfg.clone())
}

/// Uniform sampling bounds for [`random_scene`]. Degenerate intervals
/// (`lo == hi`) are allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneBounds {
    pub range_m: (f64, f64),
    pub velocity_mps: (f64, f64),
    pub azimuth_rad: (f64, f64),
}

impl SceneBounds {
    /// Bounds used by the seeded experiment sweeps: range 1–9 m,
    /// speed ±4 m/s, azimuth ±50°.
    pub fn standard() -> Self {
        SceneBounds {
            range_m: (1.0, 9.0),
            velocity_mps: (-4.0, 4.0),
            azimuth_rad: (-50f64.to_radians(), 50f64.to_radians()),
        }
    }

    fn validate(&self, cfg: &RadarConfig) -> Result<()> {
        for (name, (lo, hi)) in [
            ("range", self.range_m),
            ("velocity", self.velocity_mps),
            ("azimuth", self.azimuth_rad),
        ] {
            if !(lo <= hi) {
                return Err(Error::validation(format!("empty {name} interval [{lo}, {hi}]")));
            }
        }
        // both endpoints must be representable targets
        for r in [self.range_m.0, self.range_m.1] {
            for v in [self.velocity_mps.0, self.velocity_mps.1] {
                for a in [self.azimuth_rad.0, self.azimuth_rad.1] {
                    validate_target(
                        &PointTarget {
                            range: r,
                            radial_velocity: v,
                            azimuth: a,
                            amplitude: 1.0,
                        },
                        cfg,
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Draw one uniformly distributed target (amplitude 1) within `bounds`.
/// Deterministic given the seed; noise is left at 0 for the caller to set.
pub fn random_scene(rng_seed: u64, bounds: &SceneBounds, cfg: &RadarConfig) -> Result<Scene> {
    bounds.validate(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut uniform = |lo: f64, hi: f64| {
        let u: f64 = rand::Rng::random(&mut rng);
        lo + u * (hi - lo)
    };
    let target = PointTarget {
        range: uniform(bounds.range_m.0, bounds.range_m.1),
        radial_velocity: uniform(bounds.velocity_mps.0, bounds.velocity_mps.1),
        azimuth: uniform(bounds.azimuth_rad.0, bounds.azimuth_rad.1),
        amplitude: 1.0,
    };
    Ok(Scene {
        targets: vec![target],
        noise_std: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn cfg() -> RadarConfig {
        RadarConfig::default()
    }

    /// Test-side brute-force DFT magnitude (independent of crate::fft).
    fn dft_mag(signal: &[f64]) -> Vec<f64> {
        let n = signal.len();
        (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, &x) in signal.iter().enumerate() {
                    let ang = -2.0 * PI * (k * j) as f64 / n as f64;
                    acc += Complex64::new(x, 0.0) * Complex64::from_polar(1.0, ang);
                }
                acc.norm()
            })
            .collect()
    }

    #[test]
    fn empty_scene_is_all_zero() {
        let frame = simulate_frame(&Scene::empty(), &cfg(), 1).unwrap();
        assert!(frame.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn target_at_5m_peaks_at_range_bin_68() {
        // f_b = 2·5·50e12/c ≈ 1.6678 MHz → bin f_b/f_s·256 ≈ 68.4
        let scene = Scene::single(
            PointTarget {
                range: 5.0,
                radial_velocity: 0.0,
                azimuth: 0.0,
                amplitude: 1.0,
            },
            0.0,
        );
        let frame = simulate_frame(&scene, &cfg(), 0).unwrap();
        for &(chirp, ant) in &[(0usize, 0usize), (17, 2), (127, 3)] {
            let mags = dft_mag(frame.chirp(chirp, ant));
            let peak = mags[1..128]
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
                + 1;
            assert_eq!(peak, 68, "chirp {chirp} antenna {ant}");
        }
    }

    #[test]
    fn doppler_phase_step_matches_peak_bin() {
        // v = 2 m/s → Δφ ≈ 0.6972 rad/chirp → Doppler bin 64+14 after shift.
        let scene = Scene::single(
            PointTarget {
                range: 5.0,
                radial_velocity: 2.0,
                azimuth: 0.0,
                amplitude: 1.0,
            },
            0.0,
        );
        let frame = simulate_frame(&scene, &cfg(), 0).unwrap();

        // extract the complex range-bin-68 value per chirp with a brute-force DFT
        let k = 68;
        let slow: Vec<Complex64> = (0..128)
            .map(|m| {
                let sig = frame.chirp(m, 0);
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, &x) in sig.iter().enumerate() {
                    let ang = -2.0 * PI * (k * j) as f64 / 256.0;
                    acc += Complex64::new(x, 0.0) * Complex64::from_polar(1.0, ang);
                }
                acc
            })
            .collect();
        // brute-force slow-time DFT, then locate the peak relative to DC
        let peak = (0..128)
            .map(|l| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (m, &s) in slow.iter().enumerate() {
                    let ang = -2.0 * PI * (l * m) as f64 / 128.0;
                    acc += s * Complex64::from_polar(1.0, ang);
                }
                acc.norm()
            })
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap()
            .0;
        // positive (receding) Doppler: centred bin = 64 + peak for peak < 64
        assert_eq!((peak + 64) % 128, 78);
    }

    #[test]
    fn superposition_is_linear() {
        let t1 = PointTarget {
            range: 3.0,
            radial_velocity: 1.0,
            azimuth: 0.2,
            amplitude: 0.7,
        };
        let t2 = PointTarget {
            range: 6.5,
            radial_velocity: -2.0,
            azimuth: -0.4,
            amplitude: 1.3,
        };
        let fa = simulate_frame(&Scene::single(t1, 0.0), &cfg(), 0).unwrap();
        let fb = simulate_frame(&Scene::single(t2, 0.0), &cfg(), 0).unwrap();
        let fab = simulate_frame(
            &Scene {
                targets: vec![t1, t2],
                noise_std: 0.0,
            },
            &cfg(),
            0,
        )
        .unwrap();
        for ((a, b), ab) in fa
            .samples()
            .iter()
            .zip(fb.samples())
            .zip(fab.samples())
        {
            assert!((a + b - ab).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_energy_matches_variance() {
        let scene = Scene {
            targets: vec![],
            noise_std: 0.3,
        };
        let frame = simulate_frame(&scene, &cfg(), 42).unwrap();
        let n = frame.samples().len() as f64;
        assert!(n >= 1e5);
        let expected = 0.3 * 0.3 * n;
        let energy = frame.energy();
        assert!(
            (energy - expected).abs() / expected < 0.05,
            "energy {energy}, expected {expected}"
        );
    }

    #[test]
    fn zero_velocity_chirps_identical() {
        let scene = Scene::single(
            PointTarget {
                range: 4.2,
                radial_velocity: 0.0,
                azimuth: 0.3,
                amplitude: 1.0,
            },
            0.0,
        );
        let frame = simulate_frame(&scene, &cfg(), 0).unwrap();
        let first = frame.chirp(0, 1);
        for m in 1..128 {
            for (a, b) in frame.chirp(m, 1).iter().zip(first) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noise_reproducible_from_seed() {
        let scene = Scene {
            targets: vec![],
            noise_std: 1.0,
        };
        let a = simulate_frame(&scene, &cfg(), 7).unwrap();
        let b = simulate_frame(&scene, &cfg(), 7).unwrap();
        assert_eq!(a.samples(), b.samples());
        let c = simulate_frame(&scene, &cfg(), 8).unwrap();
        assert_ne!(a.samples(), c.samples());
    }

    #[test]
    fn rejects_out_of_range_targets() {
        let too_far = PointTarget {
            range: 100.0,
            radial_velocity: 0.0,
            azimuth: 0.0,
            amplitude: 1.0,
        };
        assert!(simulate_frame(&Scene::single(too_far, 0.0), &cfg(), 0).is_err());
        let too_fast = PointTarget {
            range: 5.0,
            radial_velocity: 20.0,
            azimuth: 0.0,
            amplitude: 1.0,
        };
        assert!(simulate_frame(&Scene::single(too_fast, 0.0), &cfg(), 0).is_err());
    }

    #[test]
    fn random_scene_deterministic_and_bounded() {
        let bounds = SceneBounds::standard();
        let a = random_scene(123, &bounds, &cfg()).unwrap();
        let b = random_scene(123, &bounds, &cfg()).unwrap();
        assert_eq!(a, b);

        for seed in 0..1000 {
            let s = random_scene(seed, &bounds, &cfg()).unwrap();
            let t = s.targets[0];
            assert!(t.range >= 1.0 && t.range <= 9.0);
            assert!(t.radial_velocity.abs() <= 4.0);
            assert!(t.azimuth.abs() <= 50f64.to_radians());
        }
    }

    #[test]
    fn degenerate_bounds_pin_the_target() {
        let bounds = SceneBounds {
            range_m: (5.0, 5.0),
            velocity_mps: (0.0, 0.0),
            azimuth_rad: (0.0, 0.0),
        };
        let s = random_scene(9, &bounds, &cfg()).unwrap();
        assert_eq!(s.targets[0].range, 5.0);
        assert_eq!(s.targets[0].radial_velocity, 0.0);
    }

    #[test]
    fn empty_bounds_interval_rejected() {
        let bounds = SceneBounds {
            range_m: (5.0, 4.0),
            velocity_mps: (0.0, 0.0),
            azimuth_rad: (0.0, 0.0),
        };
        assert!(random_scene(0, &bounds, &cfg()).is_err());
    }
}
