//! Radar configuration and derived physical axes.
//!
//! The configuration mirrors the sensor parameter table of a 77 GHz TI
//! mmWave device. Every other module works in bin space (128×128 maps) and
//! uses [`RadarAxes`] to translate bins into metres, metres/second and
//! radians.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use crate::error::Error;
use crate::Result;

/// Speed of light in vacuum (m/s), exact by SI definition.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Number of angle bins in a range-azimuth map.
pub const ANGLE_BINS: usize = 128;

/// FMCW sensor configuration.
///
/// Defaults reproduce the recording configuration: 128 chirps of 256
/// samples at 6.24 MS/s, 77 GHz start frequency, 50 MHz/µs slope, four
/// receive antennas.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarConfig {
    /// Chirps per frame (slow-time length).
    pub num_chirps: usize,
    /// Transmit antennas. Only informational for the single-TX simulation;
    /// an 8-element virtual array is modelled by setting `num_rx = 8`.
    pub num_tx: usize,
    /// Receive antennas (uniform linear array, λ/2 spacing).
    pub num_rx: usize,
    /// ADC samples per chirp (fast-time length).
    pub samples_per_chirp: usize,
    /// Ramp start frequency (Hz).
    pub start_frequency: f64,
    /// Frequency slope (Hz/s).
    pub frequency_slope: f64,
    /// ADC sample rate (Hz).
    pub sample_rate: f64,
    /// Delay from ramp start to first ADC sample (s).
    pub adc_start_time: f64,
    /// Ramp duration (s).
    pub ramp_end_time: f64,
    /// Idle time between ramps (s).
    pub idle_time: f64,
    /// Frame rate (Hz).
    pub frame_rate: f64,
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self {
            num_chirps: 128,
            num_tx: 2,
            num_rx: 4,
            samples_per_chirp: 256,
            start_frequency: 77e9,
            frequency_slope: 50e12,
            sample_rate: 6.24e6,
            adc_start_time: 11e-6,
            ramp_end_time: 68e-6,
            idle_time: 40e-6,
            frame_rate: 5.0,
        }
    }
}

impl RadarConfig {
    /// Check the structural invariants.
    pub fn validate(&self) -> Result<()> {
        if self.num_chirps < 1 || self.num_tx < 1 || self.num_rx < 1 || self.samples_per_chirp < 1
        {
            return Err(Error::config("all counts must be >= 1"));
        }
        for (name, v) in [
            ("start_frequency", self.start_frequency),
            ("frequency_slope", self.frequency_slope),
            ("sample_rate", self.sample_rate),
            ("adc_start_time", self.adc_start_time),
            ("ramp_end_time", self.ramp_end_time),
            ("idle_time", self.idle_time),
            ("frame_rate", self.frame_rate),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        let adc_window = self.adc_start_time + self.samples_per_chirp as f64 / self.sample_rate;
        if adc_window > self.ramp_end_time {
            return Err(Error::config(format!(
                "ADC window ({:.3e} s) does not fit the ramp ({:.3e} s)",
                adc_window, self.ramp_end_time
            )));
        }
        Ok(())
    }

    /// Number of range bins kept after the real-input range FFT.
    pub fn range_bins(&self) -> usize {
        self.samples_per_chirp / 2
    }

    /// Sampled sweep bandwidth (Hz): slope times the ADC window.
    pub fn sampled_bandwidth(&self) -> f64 {
        self.frequency_slope * self.samples_per_chirp as f64 / self.sample_rate
    }

    /// Load a configuration from a plain-text `key=value` file.
    ///
    /// Unknown keys are rejected; keys not present keep their defaults.
    /// Blank lines and `#` comments are ignored.
    pub fn from_key_value_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_key_value_str(&text)
    }

    /// Parse `key=value` text (see [`Self::from_key_value_file`]).
    pub fn from_key_value_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}: expected key=value, got {raw:?}", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::config(format!("duplicate key {key:?}")));
            }
            let parse_count = || -> Result<usize> {
                value
                    .parse::<usize>()
                    .map_err(|_| Error::config(format!("key {key:?}: bad count {value:?}")))
            };
            let parse_f64 = || -> Result<f64> {
                value
                    .parse::<f64>()
                    .map_err(|_| Error::config(format!("key {key:?}: bad number {value:?}")))
            };
            match key {
                "num_chirps" => cfg.num_chirps = parse_count()?,
                "num_tx" => cfg.num_tx = parse_count()?,
                "num_rx" => cfg.num_rx = parse_count()?,
                "samples_per_chirp" => cfg.samples_per_chirp = parse_count()?,
                "start_frequency" => cfg.start_frequency = parse_f64()?,
                "frequency_slope" => cfg.frequency_slope = parse_f64()?,
                "sample_rate" => cfg.sample_rate = parse_f64()?,
                "adc_start_time" => cfg.adc_start_time = parse_f64()?,
                "ramp_end_time" => cfg.ramp_end_time = parse_f64()?,
                "idle_time" => cfg.idle_time = parse_f64()?,
                "frame_rate" => cfg.frame_rate = parse_f64()?,
                other => {
                    return Err(Error::config(format!("unknown key {other:?}")));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for RadarConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "num_chirps={}", self.num_chirps)?;
        writeln!(f, "num_tx={}", self.num_tx)?;
        writeln!(f, "num_rx={}", self.num_rx)?;
        writeln!(f, "samples_per_chirp={}", self.samples_per_chirp)?;
        writeln!(f, "start_frequency={}", self.start_frequency)?;
        writeln!(f, "frequency_slope={}", self.frequency_slope)?;
        writeln!(f, "sample_rate={}", self.sample_rate)?;
        writeln!(f, "adc_start_time={}", self.adc_start_time)?;
        writeln!(f, "ramp_end_time={}", self.ramp_end_time)?;
        writeln!(f, "idle_time={}", self.idle_time)?;
        write!(f, "frame_rate={}", self.frame_rate)
    }
}

/// Physical axes derived from a [`RadarConfig`].
///
/// Axes are immutable after construction and cheap to clone/share.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarAxes {
    /// Range per bin (m): c / (2 B) over the sampled bandwidth.
    pub range_resolution: f64,
    /// `range_axis[i] = i * range_resolution`.
    pub range_axis: Vec<f64>,
    /// Velocity per Doppler bin (m/s).
    pub velocity_resolution: f64,
    /// Zero-centred velocity axis; bin `num_chirps/2` maps to exactly 0.
    pub velocity_axis: Vec<f64>,
    /// Uniform sine-space axis over [−1, 1), 128 bins.
    pub angle_axis: Vec<f64>,
    /// Chirp repetition interval (s): idle + ramp.
    pub chirp_interval: f64,
    /// Carrier wavelength at the start frequency (m).
    pub wavelength: f64,
}

impl RadarAxes {
    /// Maximum unambiguous radial speed (m/s): λ / (4 T_c).
    pub fn max_unambiguous_speed(&self) -> f64 {
        self.wavelength / (4.0 * self.chirp_interval)
    }

    /// Maximum unambiguous range (m): one bin beyond the last axis entry.
    pub fn max_range(&self) -> f64 {
        self.range_axis.len() as f64 * self.range_resolution
    }

    /// Nearest range bin for a range in metres (clamped to the axis).
    pub fn range_to_bin(&self, range_m: f64) -> usize {
        let bin = (range_m / self.range_resolution).round();
        (bin.max(0.0) as usize).min(self.range_axis.len() - 1)
    }

    /// Nearest Doppler bin for a radial velocity (clamped to the axis).
    pub fn velocity_to_bin(&self, velocity_mps: f64) -> usize {
        let half = self.velocity_axis.len() / 2;
        let bin = (velocity_mps / self.velocity_resolution).round() + half as f64;
        (bin.max(0.0) as usize).min(self.velocity_axis.len() - 1)
    }

    /// Nearest angle bin for an azimuth in radians (clamped to the axis).
    pub fn azimuth_to_bin(&self, azimuth_rad: f64) -> usize {
        let n = self.angle_axis.len() as f64;
        let bin = ((azimuth_rad.sin() + 1.0) * n / 2.0).round();
        (bin.max(0.0) as usize).min(self.angle_axis.len() - 1)
    }
}

/// Derive all physical axes from a configuration.
///
/// Standard FMCW relations: the sampled bandwidth is
/// `B = slope * samples / sample_rate`, range resolution `c / (2 B)`,
/// velocity resolution `λ / (2 N T_c)` over the frame of `N` chirps.
pub fn derive_axes(cfg: &RadarConfig) -> Result<RadarAxes> {
    cfg.validate()?;
    let bandwidth = cfg.sampled_bandwidth();
    let range_resolution = SPEED_OF_LIGHT / (2.0 * bandwidth);
    let wavelength = SPEED_OF_LIGHT / cfg.start_frequency;
    let chirp_interval = cfg.idle_time + cfg.ramp_end_time;
    let velocity_resolution =
        wavelength / (2.0 * cfg.num_chirps as f64 * chirp_interval);

    let n_range = cfg.range_bins();
    let range_axis = (0..n_range).map(|i| i as f64 * range_resolution).collect();
    let half = cfg.num_chirps / 2;
    let velocity_axis = (0..cfg.num_chirps)
        .map(|k| (k as f64 - half as f64) * velocity_resolution)
        .collect();
    let angle_axis = (0..ANGLE_BINS)
        .map(|i| -1.0 + 2.0 * i as f64 / ANGLE_BINS as f64)
        .collect();

    Ok(RadarAxes {
        range_resolution,
        range_axis,
        velocity_resolution,
        velocity_axis,
        angle_axis,
        chirp_interval,
        wavelength,
    })
}

/// Translate (range, doppler, angle) bins into physical units
/// (metres, metres/second, radians).
pub fn bins_to_physical(
    range_bin: usize,
    doppler_bin: usize,
    angle_bin: usize,
    axes: &RadarAxes,
) -> Result<(f64, f64, f64)> {
    let checks = [
        ("range_bin", range_bin, axes.range_axis.len()),
        ("doppler_bin", doppler_bin, axes.velocity_axis.len()),
        ("angle_bin", angle_bin, axes.angle_axis.len()),
    ];
    for (name, value, limit) in checks {
        if value >= limit {
            return Err(Error::Bounds { name, value, limit });
        }
    }
    Ok((
        axes.range_axis[range_bin],
        axes.velocity_axis[doppler_bin],
        axes.angle_axis[angle_bin].asin(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_config_range_resolution() {
        let axes = derive_axes(&RadarConfig::default()).unwrap();
        // B = 50e12 * 256 / 6.24e6 ≈ 2.0513 GHz, c/(2B) ≈ 0.0731 m
        assert!((axes.range_resolution - 0.073_1).abs() < 5e-4);
        let b = 50e12 * 256.0 / 6.24e6;
        assert!((axes.range_resolution - SPEED_OF_LIGHT / (2.0 * b)).abs() < 1e-12);
    }

    #[test]
    fn doubled_slope_halves_range_resolution() {
        let base = derive_axes(&RadarConfig::default()).unwrap();
        let cfg = RadarConfig {
            frequency_slope: 2.0 * 50e12,
            ..RadarConfig::default()
        };
        let axes = derive_axes(&cfg).unwrap();
        assert!((axes.range_resolution - base.range_resolution / 2.0).abs() < 1e-12);
    }

    #[test]
    fn table_config_velocity_axis() {
        let axes = derive_axes(&RadarConfig::default()).unwrap();
        // λ = c/77e9 ≈ 3.8934 mm, T_c = 108 µs
        assert!((axes.wavelength - 3.893_4e-3).abs() < 1e-7);
        assert!((axes.chirp_interval - 108e-6).abs() < 1e-18);
        assert!((axes.velocity_resolution - 0.140_8).abs() < 5e-4);
        assert!((axes.max_unambiguous_speed() - 9.013).abs() < 2e-3);
        assert_eq!(axes.velocity_axis[64], 0.0);
        assert_eq!(axes.velocity_axis.len(), 128);
    }

    #[test]
    fn range_axis_monotone() {
        let axes = derive_axes(&RadarConfig::default()).unwrap();
        assert_eq!(axes.range_axis.len(), 128);
        assert_eq!(axes.range_axis[0], 0.0);
        for i in 1..axes.range_axis.len() {
            assert!(axes.range_axis[i] > axes.range_axis[i - 1]);
        }
    }

    #[test]
    fn angle_axis_sine_space() {
        let axes = derive_axes(&RadarConfig::default()).unwrap();
        assert_eq!(axes.angle_axis.len(), 128);
        assert_eq!(axes.angle_axis[0], -1.0);
        assert_eq!(axes.angle_axis[64], 0.0);
        assert!((axes.angle_axis[127] - (1.0 - 2.0 / 128.0)).abs() < 1e-15);
    }

    #[test]
    fn derive_axes_is_pure() {
        let a = derive_axes(&RadarConfig::default()).unwrap();
        let b = derive_axes(&RadarConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bins_to_physical_examples() {
        let axes = derive_axes(&RadarConfig::default()).unwrap();
        let (r, v, a) = bins_to_physical(0, 64, 64, &axes).unwrap();
        assert_eq!((r, v, a), (0.0, 0.0, 0.0));

        let (r, _, _) = bins_to_physical(68, 64, 64, &axes).unwrap();
        assert!((r - 4.97).abs() < 0.01);

        let (r, v, a) = bins_to_physical(10, 78, 64, &axes).unwrap();
        assert!((r - 0.731).abs() < 0.005);
        assert!((v - 1.972).abs() < 0.005);
        assert_eq!(a, 0.0);
    }

    #[test]
    fn bins_to_physical_bounds() {
        let axes = derive_axes(&RadarConfig::default()).unwrap();
        assert!(bins_to_physical(128, 0, 0, &axes).is_err());
        assert!(bins_to_physical(0, 128, 0, &axes).is_err());
        assert!(bins_to_physical(0, 0, 128, &axes).is_err());
    }

    #[test]
    fn bin_round_trip() {
        let axes = derive_axes(&RadarConfig::default()).unwrap();
        for b in 0..128 {
            let (r, v, a) = bins_to_physical(b, b, b, &axes).unwrap();
            assert_eq!(axes.range_to_bin(r), b);
            assert_eq!(axes.velocity_to_bin(v), b);
            assert_eq!(axes.azimuth_to_bin(a), b);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = RadarConfig {
            sample_rate: 0.0,
            ..RadarConfig::default()
        };
        assert!(derive_axes(&cfg).is_err());
        let cfg = RadarConfig {
            frequency_slope: -1.0,
            ..RadarConfig::default()
        };
        assert!(derive_axes(&cfg).is_err());
        // ADC window must fit inside the ramp
        let cfg = RadarConfig {
            samples_per_chirp: 512,
            ..RadarConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn key_value_parsing() {
        let cfg = RadarConfig::from_key_value_str(
            "# override two keys\nnum_rx = 8\nsample_rate = 6.24e6\n",
        )
        .unwrap();
        assert_eq!(cfg.num_rx, 8);
        assert_eq!(cfg.num_chirps, 128);

        assert!(RadarConfig::from_key_value_str("bogus_key = 3\n").is_err());
        assert!(RadarConfig::from_key_value_str("num_rx = -1\n").is_err());
        assert!(RadarConfig::from_key_value_str("num_rx\n").is_err());
        assert!(RadarConfig::from_key_value_str("num_rx=2\nnum_rx=3\n").is_err());

        // defaults round-trip through Display
        let d = RadarConfig::default();
        assert_eq!(RadarConfig::from_key_value_str(&d.to_string()).unwrap(), d);
    }
}
