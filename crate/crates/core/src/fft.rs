//! Small fixed-radix FFT used by the map processing chain.
//!
//! The pipeline only ever needs power-of-two sizes (256-point fast-time,
//! 128-point slow-time), so a plain iterative radix-2 Cooley-Tukey transform
//! is enough and keeps the output bit-reproducible across runs.

use num_complex::Complex64;
use std::f64::consts::PI;

/// In-place radix-2 decimation-in-time FFT. `data.len()` must be a power of two.
pub fn fft_in_place(data: &mut [Complex64]) {
    let n = data.len();
    assert!(n.is_power_of_two(), "FFT length must be a power of two");
    if n <= 1 {
        return;
    }

    // bit-reversal permutation
    let mut j = 0usize;
    for i in 0..n {
        if i < j {
            data.swap(i, j);
        }
        let mut m = n >> 1;
        while m >= 1 && j >= m {
            j -= m;
            m >>= 1;
        }
        j += m;
    }

    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = -2.0 * PI / len as f64;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = Complex64::from_polar(1.0, step * k as f64);
                let even = data[start + k];
                let odd = data[start + k + half] * w;
                data[start + k] = even + odd;
                data[start + k + half] = even - odd;
            }
        }
        len <<= 1;
    }
}

/// FFT of a real signal; returns the full complex spectrum.
pub fn fft_real(signal: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_in_place(&mut buf);
    buf
}

/// Periodic Hann window of length `n`: `0.5 (1 − cos(2πi/n))`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos()))
        .collect()
}

/// Swap spectrum halves so bin `n/2` becomes the zero-frequency bin.
pub fn fft_shift<T: Copy>(data: &mut [T]) {
    let n = data.len();
    assert!(n % 2 == 0, "fft_shift requires even length");
    let half = n / 2;
    for i in 0..half {
        data.swap(i, i + half);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// O(n²) reference DFT.
    fn naive_dft(signal: &[Complex64]) -> Vec<Complex64> {
        let n = signal.len();
        (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, &x) in signal.iter().enumerate() {
                    let angle = -2.0 * PI * (k * j) as f64 / n as f64;
                    acc += x * Complex64::from_polar(1.0, angle);
                }
                acc
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        for &n in &[2usize, 8, 64, 256] {
            let signal: Vec<Complex64> = (0..n)
                .map(|i| {
                    let t = i as f64;
                    Complex64::new((0.3 * t).sin() + 0.2, (0.7 * t).cos() * 0.5)
                })
                .collect();
            let expected = naive_dft(&signal);
            let mut got = signal.clone();
            fft_in_place(&mut got);
            for (g, e) in got.iter().zip(&expected) {
                assert!((g - e).norm() < 1e-9 * n as f64, "n={n}");
            }
        }
    }

    #[test]
    fn pure_tone_lands_on_its_bin() {
        let n = 256;
        let k0 = 64; // f_s / 4
        let signal: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * k0 as f64 * i as f64 / n as f64).cos())
            .collect();
        let spec = fft_real(&signal);
        let peak = spec
            .iter()
            .take(n / 2)
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak, k0);
        assert!((spec[k0].norm() - n as f64 / 2.0).abs() < 1e-9);
    }

    #[test]
    fn parseval_identity() {
        let n = 128;
        let signal: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64 * 0.11).sin(), (i as f64 * 0.07).cos()))
            .collect();
        let time_energy: f64 = signal.iter().map(|x| x.norm_sqr()).sum();
        let mut spec = signal.clone();
        fft_in_place(&mut spec);
        let freq_energy: f64 = spec.iter().map(|x| x.norm_sqr()).sum::<f64>() / n as f64;
        assert!((time_energy - freq_energy).abs() / time_energy < 1e-12);
    }

    #[test]
    fn shift_centres_dc() {
        let mut bins: Vec<usize> = (0..8).collect();
        fft_shift(&mut bins);
        assert_eq!(bins, vec![4, 5, 6, 7, 0, 1, 2, 3]);
        // DC (old index 0) now sits at n/2
        assert_eq!(bins[4], 0);
    }

    #[test]
    fn hann_endpoints_and_symmetry() {
        let w = hann_window(128);
        assert_eq!(w[0], 0.0);
        assert!((w[64] - 1.0).abs() < 1e-15);
        for i in 1..64 {
            assert!((w[i] - w[128 - i]).abs() < 1e-15);
        }
    }
}
