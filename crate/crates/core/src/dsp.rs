//! Classical radar map processing: range FFT, range-Doppler maps, Capon
//! range-azimuth maps, and the sigmoid squash used for neural-net inputs.
//!
//! All internal computation runs at 64-bit; maps only drop to f32 when they
//! are written to disk. Every operation here is a pure function of its
//! inputs, so independent frames can be processed concurrently.

use num_complex::Complex64;

use crate::config::{derive_axes, ANGLE_BINS};
use crate::error::Error;
use crate::fft::{fft_in_place, fft_shift, hann_window};
use crate::simsig::AdcFrame;
use crate::Result;

/// Diagonal loading factor for the Capon covariance (relative to the mean
/// eigenvalue trace/num_rx).
const CAPON_LOADING: f64 = 1e-3;

/// Complex range profiles per chirp and antenna (positive-frequency bins).
#[derive(Debug, Clone)]
pub struct RangeCube {
    values: Vec<Complex64>,
    num_chirps: usize,
    num_rx: usize,
    num_range_bins: usize,
}

impl RangeCube {
    pub fn num_chirps(&self) -> usize {
        self.num_chirps
    }

    pub fn num_rx(&self) -> usize {
        self.num_rx
    }

    pub fn num_range_bins(&self) -> usize {
        self.num_range_bins
    }

    /// Complex value at (chirp, antenna, range bin).
    pub fn at(&self, chirp: usize, antenna: usize, range_bin: usize) -> Complex64 {
        self.values[(chirp * self.num_rx + antenna) * self.num_range_bins + range_bin]
    }
}

/// Which product a 128×128 map is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    RangeDoppler,
    RangeAzimuth,
}

/// Whether map values are raw magnitudes or squashed into (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapScale {
    Raw,
    Squashed,
}

/// A real-valued map with range on the row axis.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarMap {
    pub kind: MapKind,
    pub scale: MapScale,
    values: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl RadarMap {
    pub fn new(kind: MapKind, scale: MapScale, values: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::shape(
                format!("{rows}x{cols}"),
                format!("{} values", values.len()),
            ));
        }
        Ok(RadarMap {
            kind,
            scale,
            values,
            rows,
            cols,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, range_bin: usize, col: usize) -> f64 {
        self.values[range_bin * self.cols + col]
    }

    pub fn row(&self, range_bin: usize) -> &[f64] {
        &self.values[range_bin * self.cols..(range_bin + 1) * self.cols]
    }
}

/// Windowed real-to-complex range FFT; keeps the positive-frequency half.
pub fn range_fft(frame: &AdcFrame) -> Result<RangeCube> {
    let cfg = frame.config();
    let n_fast = cfg.samples_per_chirp;
    if !n_fast.is_power_of_two() {
        return Err(Error::shape(
            "power-of-two samples_per_chirp",
            n_fast.to_string(),
        ));
    }
    let n_keep = cfg.range_bins();
    let window = hann_window(n_fast);
    let mut values = Vec::with_capacity(cfg.num_chirps * cfg.num_rx * n_keep);
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fast];
    for chirp in 0..cfg.num_chirps {
        for ant in 0..cfg.num_rx {
            let sig = frame.chirp(chirp, ant);
            for ((b, &x), &w) in buf.iter_mut().zip(sig).zip(&window) {
                *b = Complex64::new(x * w, 0.0);
            }
            fft_in_place(&mut buf);
            values.extend_from_slice(&buf[..n_keep]);
        }
    }
    Ok(RangeCube {
        values,
        num_chirps: cfg.num_chirps,
        num_rx: cfg.num_rx,
        num_range_bins: n_keep,
    })
}

/// Range-Doppler map: slow-time Hann + FFT per range bin and antenna,
/// centred so zero Doppler is bin `num_chirps/2`, magnitudes averaged
/// over antennas.
pub fn range_doppler_map(frame: &AdcFrame) -> Result<RadarMap> {
    let cube = range_fft(frame)?;
    let n_chirps = cube.num_chirps;
    let n_rx = cube.num_rx;
    let n_range = cube.num_range_bins;
    if !n_chirps.is_power_of_two() {
        return Err(Error::shape(
            "power-of-two num_chirps",
            n_chirps.to_string(),
        ));
    }

    let window = hann_window(n_chirps);
    let mut map = vec![0.0f64; n_range * n_chirps];
    let mut slow = vec![Complex64::new(0.0, 0.0); n_chirps];
    for r in 0..n_range {
        for ant in 0..n_rx {
            for (m, s) in slow.iter_mut().enumerate() {
                *s = cube.at(m, ant, r) * window[m];
            }
            fft_in_place(&mut slow);
            fft_shift(&mut slow);
            for (d, s) in slow.iter().enumerate() {
                map[r * n_chirps + d] += s.norm();
            }
        }
    }
    let inv = 1.0 / n_rx as f64;
    for v in map.iter_mut() {
        *v *= inv;
    }
    RadarMap::new(MapKind::RangeDoppler, MapScale::Raw, map, n_range, n_chirps)
}

/// Capon (MVDR) range-azimuth map over 128 sine-space angle bins.
///
/// Per range bin, the antenna snapshot covariance over all chirps is
/// diagonally loaded with `1e-3 · trace/num_rx` and the spectrum is
/// `P(θ) = 1 / (aᴴ R⁻¹ a)` with steering `a[p] = exp(jπ p sinθ)`.
pub fn range_azimuth_map(frame: &AdcFrame) -> Result<RadarMap> {
    let cfg = frame.config();
    if cfg.num_rx < 2 {
        return Err(Error::validation(format!(
            "range_azimuth_map needs at least 2 antennas, got {}",
            cfg.num_rx
        )));
    }
    let cube = range_fft(frame)?;
    let n_rx = cube.num_rx;
    let n_chirps = cube.num_chirps;
    let n_range = cube.num_range_bins;
    let axes = derive_axes(cfg)?;

    // steering vectors for every angle bin
    let steering: Vec<Vec<Complex64>> = axes
        .angle_axis
        .iter()
        .map(|&s| {
            (0..n_rx)
                .map(|p| Complex64::from_polar(1.0, std::f64::consts::PI * p as f64 * s))
                .collect()
        })
        .collect();

    let mut map = vec![0.0f64; n_range * ANGLE_BINS];
    let mut cov = vec![Complex64::new(0.0, 0.0); n_rx * n_rx];
    let mut chol = vec![Complex64::new(0.0, 0.0); n_rx * n_rx];
    let mut y = vec![Complex64::new(0.0, 0.0); n_rx];

    for r in 0..n_range {
        // sample covariance R = X Xᴴ / n_chirps (upper triangle, Hermitian)
        cov.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for m in 0..n_chirps {
            for i in 0..n_rx {
                let xi = cube.at(m, i, r);
                for j in i..n_rx {
                    let xj = cube.at(m, j, r);
                    cov[i * n_rx + j] += xi * xj.conj();
                }
            }
        }
        let scale = 1.0 / n_chirps as f64;
        for i in 0..n_rx {
            for j in i..n_rx {
                cov[i * n_rx + j] *= scale;
                if j > i {
                    cov[j * n_rx + i] = cov[i * n_rx + j].conj();
                }
            }
        }
        let trace: f64 = (0..n_rx).map(|i| cov[i * n_rx + i].re).sum();
        let loading = CAPON_LOADING * trace / n_rx as f64;
        for i in 0..n_rx {
            cov[i * n_rx + i] += Complex64::new(loading, 0.0);
        }

        cholesky(&cov, &mut chol, n_rx).map_err(|msg| Error::Numeric { range_bin: r, msg })?;

        for (a_idx, a) in steering.iter().enumerate() {
            // solve L y = a, then aᴴ R⁻¹ a = ‖y‖²
            for i in 0..n_rx {
                let mut acc = a[i];
                for k in 0..i {
                    acc -= chol[i * n_rx + k] * y[k];
                }
                y[i] = acc / chol[i * n_rx + i].re;
            }
            let denom: f64 = y.iter().map(|v| v.norm_sqr()).sum();
            if !(denom > 0.0) || !denom.is_finite() {
                return Err(Error::Numeric {
                    range_bin: r,
                    msg: format!("Capon denominator {denom} at angle bin {a_idx}"),
                });
            }
            map[r * ANGLE_BINS + a_idx] = 1.0 / denom;
        }
    }
    RadarMap::new(MapKind::RangeAzimuth, MapScale::Raw, map, n_range, ANGLE_BINS)
}

/// Cholesky factorization of a Hermitian positive-definite matrix
/// (row-major, n×n). Writes the lower triangle of L into `out`.
fn cholesky(a: &[Complex64], out: &mut [Complex64], n: usize) -> std::result::Result<(), String> {
    out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
    for j in 0..n {
        let mut diag = a[j * n + j].re;
        for k in 0..j {
            diag -= out[j * n + k].norm_sqr();
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(format!("covariance not positive definite (pivot {diag})"));
        }
        let l_jj = diag.sqrt();
        out[j * n + j] = Complex64::new(l_jj, 0.0);
        for i in (j + 1)..n {
            let mut acc = a[i * n + j];
            for k in 0..j {
                acc -= out[i * n + k] * out[j * n + k].conj();
            }
            out[i * n + j] = acc / l_jj;
        }
    }
    Ok(())
}

/// Dataset-level statistics of `log10(1 + value)` used by [`squash`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquashStats {
    pub mean: f64,
    pub std: f64,
}

impl SquashStats {
    pub fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() || !self.std.is_finite() || !(self.std > 0.0) {
            return Err(Error::validation(format!(
                "invalid squash stats: mean {}, std {}",
                self.mean, self.std
            )));
        }
        Ok(())
    }

    /// Compute stats over a corpus of raw maps.
    pub fn from_maps<'a, I>(maps: I) -> Result<SquashStats>
    where
        I: IntoIterator<Item = &'a RadarMap>,
    {
        let mut count = 0u64;
        let mut sum = 0.0f64;
        let mut sum_sq = 0.0f64;
        for map in maps {
            if map.scale != MapScale::Raw {
                return Err(Error::State("squash stats need raw maps".into()));
            }
            for &v in map.values() {
                let x = (1.0 + v).log10();
                sum += x;
                sum_sq += x * x;
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::validation("empty map corpus"));
        }
        let mean = sum / count as f64;
        let var = (sum_sq / count as f64 - mean * mean).max(0.0);
        let std = var.sqrt();
        let stats = SquashStats { mean, std };
        stats.validate()?;
        Ok(stats)
    }
}

/// Logistic squash of a raw map: `σ((log10(1+v) − mean)/std)`.
///
/// Outputs are strictly inside (0, 1); the standardized argument is clamped
/// to ±36 so the logistic never rounds to exactly 0 or 1 in f64. Values
/// beyond that clamp saturate to a common output, so ordering (and argmax
/// invariance) is only guaranteed while |t| stays below the clamp —
/// dataset-level statistics keep real maps well inside it.
pub fn squash(map: &RadarMap, stats: &SquashStats) -> Result<RadarMap> {
    if map.scale != MapScale::Raw {
        return Err(Error::State("map is already squashed".into()));
    }
    stats.validate()?;
    let values = map
        .values()
        .iter()
        .map(|&v| {
            let t = (((1.0 + v).log10() - stats.mean) / stats.std).clamp(-36.0, 36.0);
            1.0 / (1.0 + (-t).exp())
        })
        .collect();
    RadarMap::new(map.kind, MapScale::Squashed, values, map.rows, map.cols)
}
