//! Direct AVX-512 kernels for the stride-1 3×3 NHWC convolutions that
//! dominate decoder time. The input row triple is kept in a small padded
//! ring buffer, so the only DRAM traffic is one pass over the input and
//! one over the output — no im2col materialization.
//!
//! Shapes outside the supported envelope (or non-AVX-512 hosts, or non-f32
//! scalars) fall back to the im2col path in `layers`, which doubles as the
//! correctness oracle for these kernels.

#![allow(clippy::too_many_arguments)]

use super::layers::{Act, LEAKY_SLOPE};

#[cfg(target_arch = "x86_64")]
fn avx512_available() -> bool {
    use std::sync::OnceLock;
    static OK: OnceLock<bool> = OnceLock::new();
    *OK.get_or_init(|| is_x86_feature_detected!("avx512f"))
}

#[cfg(not(target_arch = "x86_64"))]
fn avx512_available() -> bool {
    false
}

/// Envelope the kernels handle: stride 1, square-ish maps with rows that
/// split into 8-pixel blocks, channel counts that tile the SIMD width.
pub fn supports(stride: usize, wout: usize, cin: usize, cout: usize, act: Act) -> bool {
    avx512_available()
        && stride == 1
        && wout % 8 == 0
        && wout >= 8
        && cin % 8 == 0
        && cout % 16 == 0
        && matches!(act, Act::None | Act::LeakyRelu)
}

/// Scratch for the padded row ring (3 rows of `(win+2)·cin`).
pub struct PadRing {
    buf: Vec<f32>,
    row_len: usize,
    loaded: [isize; 3],
}

impl PadRing {
    pub fn new() -> Self {
        PadRing {
            buf: Vec::new(),
            row_len: 0,
            loaded: [isize::MIN; 3],
        }
    }

    fn reset(&mut self, win: usize, cin: usize) {
        let row_len = (win + 2) * cin;
        if self.buf.len() < 3 * row_len {
            self.buf.resize(3 * row_len, 0.0);
        }
        if self.row_len != row_len {
            self.buf.iter_mut().for_each(|v| *v = 0.0);
        }
        self.row_len = row_len;
        self.loaded = [isize::MIN; 3];
    }

    /// Returns the padded row for input row `iy` (zeros outside [0, hin)).
    fn row(&mut self, x: &[f32], iy: isize, hin: usize, win: usize, cin: usize) -> *const f32 {
        let slot = iy.rem_euclid(3) as usize;
        let start = slot * self.row_len;
        if self.loaded[slot] != iy {
            let dst = &mut self.buf[start..start + self.row_len];
            if iy < 0 || iy as usize >= hin {
                dst.iter_mut().for_each(|v| *v = 0.0);
            } else {
                dst[..cin].iter_mut().for_each(|v| *v = 0.0);
                let src = &x[iy as usize * win * cin..(iy as usize + 1) * win * cin];
                dst[cin..cin + win * cin].copy_from_slice(src);
                dst[cin + win * cin..].iter_mut().for_each(|v| *v = 0.0);
            }
            self.loaded[slot] = iy;
        }
        unsafe { self.buf.as_ptr().add(start) }
    }
}

impl Default for PadRing {
    fn default() -> Self {
        Self::new()
    }
}

/// y = act(conv3x3(x, w) + bias). Weights laid out `[(ky·3+kx)·cin+ci][cout]`.
/// `bias` may be empty (treated as zeros, used by the backward-data pass).
pub fn forward(
    x: &[f32],
    w: &[f32],
    bias: &[f32],
    y: &mut [f32],
    hin: usize,
    win: usize,
    cin: usize,
    cout: usize,
    act: Act,
    ring: &mut PadRing,
) {
    debug_assert!(supports(1, win, cin, cout, act));
    debug_assert_eq!(x.len(), hin * win * cin);
    debug_assert_eq!(y.len(), hin * win * cout);
    ring.reset(win, cin);
    unsafe { forward_avx512(x, w, bias, y, hin, win, cin, cout, act, ring) }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn forward_avx512(
    x: &[f32],
    w: &[f32],
    bias: &[f32],
    y: &mut [f32],
    hin: usize,
    win: usize,
    cin: usize,
    cout: usize,
    act: Act,
    ring: &mut PadRing,
) {
    use std::arch::x86_64::*;
    let slope = _mm512_set1_ps(LEAKY_SLOPE as f32);
    let zero = _mm512_setzero_ps();
    let wp = w.as_ptr();
    for oy in 0..hin {
        let rows = [
            ring.row(x, oy as isize - 1, hin, win, cin),
            ring.row(x, oy as isize, hin, win, cin),
            ring.row(x, oy as isize + 1, hin, win, cin),
        ];
        for co0 in (0..cout).step_by(16) {
            let bv = if bias.is_empty() {
                zero
            } else {
                _mm512_loadu_ps(bias.as_ptr().add(co0))
            };
            let mut ox0 = 0usize;
            while ox0 < win {
                let mut acc = [bv; 8];
                for (r, &row) in rows.iter().enumerate() {
                    for kx in 0..3usize {
                        // padded column offset: input col (ox+kx-1) sits at (ox+kx)·cin
                        let base = row.add((ox0 + kx) * cin);
                        for ci in 0..cin {
                            let wv =
                                _mm512_loadu_ps(wp.add(((r * 3 + kx) * cin + ci) * cout + co0));
                            for (p, a) in acc.iter_mut().enumerate() {
                                *a = _mm512_fmadd_ps(
                                    _mm512_set1_ps(*base.add(p * cin + ci)),
                                    wv,
                                    *a,
                                );
                            }
                        }
                    }
                }
                let out_base = (oy * win + ox0) * cout + co0;
                for (p, a) in acc.iter().enumerate() {
                    let v = if matches!(act, Act::LeakyRelu) {
                        let neg = _mm512_cmp_ps_mask(*a, zero, _CMP_LT_OQ);
                        _mm512_mask_mul_ps(*a, neg, *a, slope)
                    } else {
                        *a
                    };
                    _mm512_storeu_ps(y.as_mut_ptr().add(out_base + p * cout), v);
                }
                ox0 += 8;
            }
        }
    }
}

/// dW += Σ_pixels x_patch ⊗ dpre, written directly into the weight-gradient
/// slice (same layout as the weights).
pub fn weight_grad(
    x: &[f32],
    dpre: &[f32],
    dw: &mut [f32],
    hin: usize,
    win: usize,
    cin: usize,
    cout: usize,
    ring: &mut PadRing,
) {
    debug_assert_eq!(dw.len(), 9 * cin * cout);
    ring.reset(win, cin);
    unsafe { weight_grad_avx512(x, dpre, dw, hin, win, cin, cout, ring) }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn weight_grad_avx512(
    x: &[f32],
    dpre: &[f32],
    dw: &mut [f32],
    hin: usize,
    win: usize,
    cin: usize,
    cout: usize,
    ring: &mut PadRing,
) {
    use std::arch::x86_64::*;
    let dp = dpre.as_ptr();
    for oy in 0..hin {
        let rows = [
            ring.row(x, oy as isize - 1, hin, win, cin),
            ring.row(x, oy as isize, hin, win, cin),
            ring.row(x, oy as isize + 1, hin, win, cin),
        ];
        let dy_row = dp.add(oy * win * cout);
        for (r, &row) in rows.iter().enumerate() {
            for kx in 0..3usize {
                let base = row.add(kx * cin);
                for ci0 in (0..cin).step_by(8) {
                    for co0 in (0..cout).step_by(16) {
                        let mut acc = [_mm512_setzero_ps(); 8];
                        for ox in 0..win {
                            let dyv = _mm512_loadu_ps(dy_row.add(ox * cout + co0));
                            let xbase = base.add(ox * cin + ci0);
                            for (i, a) in acc.iter_mut().enumerate() {
                                *a = _mm512_fmadd_ps(_mm512_set1_ps(*xbase.add(i)), dyv, *a);
                            }
                        }
                        for (i, a) in acc.iter().enumerate() {
                            let off = ((r * 3 + kx) * cin + ci0 + i) * cout + co0;
                            let prev = _mm512_loadu_ps(dw.as_ptr().add(off));
                            _mm512_storeu_ps(dw.as_mut_ptr().add(off), _mm512_add_ps(prev, *a));
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::{Conv2d, ParamArena, Scratch};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Direct kernels must agree with the f64 im2col reference.
    #[test]
    fn forward_matches_reference() {
        if !supports(1, 16, 16, 16, Act::LeakyRelu) {
            return; // host without AVX-512
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(h, cin, cout) in &[(16usize, 16usize, 16usize), (8, 32, 16), (16, 64, 32)] {
            let mut arena = ParamArena::<f64>::new();
            let conv = Conv2d::new(&mut arena, "c", cin, cout, h, h, 1, Act::LeakyRelu);
            let params: Vec<f64> = (0..arena.len()).map(|_| rng.random::<f64>() - 0.5).collect();
            let x: Vec<f64> = (0..conv.in_len()).map(|_| rng.random::<f64>() - 0.5).collect();
            let mut y_ref = vec![0.0f64; conv.out_len()];
            conv.forward(&arena, &params, &x, &mut y_ref, &mut Scratch::new());

            let we = arena.entry(conv.w).clone();
            let be = arena.entry(conv.b).clone();
            let w32: Vec<f32> = params[we.offset..we.offset + we.len]
                .iter()
                .map(|&v| v as f32)
                .collect();
            let b32: Vec<f32> = params[be.offset..be.offset + be.len]
                .iter()
                .map(|&v| v as f32)
                .collect();
            let x32: Vec<f32> = x.iter().map(|&v| v as f32).collect();
            let mut y = vec![0.0f32; conv.out_len()];
            let mut ring = PadRing::new();
            forward(&x32, &w32, &b32, &mut y, h, h, cin, cout, Act::LeakyRelu, &mut ring);
            for (i, (got, want)) in y.iter().zip(&y_ref).enumerate() {
                assert!(
                    (*got as f64 - want).abs() < 1e-3 * (1.0 + want.abs()),
                    "h={h} cin={cin} cout={cout} idx {i}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn weight_grad_matches_reference() {
        if !supports(1, 16, 16, 16, Act::None) {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for &(h, cin, cout) in &[(16usize, 16usize, 16usize), (8, 64, 32)] {
            let x: Vec<f32> = (0..h * h * cin).map(|_| rng.random::<f32>() - 0.5).collect();
            let dpre: Vec<f32> = (0..h * h * cout).map(|_| rng.random::<f32>() - 0.5).collect();

            // f64 reference via the naive patch loop
            let mut dw_ref = vec![0.0f64; 9 * cin * cout];
            for oy in 0..h {
                for ox in 0..h {
                    for ky in 0..3isize {
                        for kx in 0..3isize {
                            let iy = oy as isize + ky - 1;
                            let ix = ox as isize + kx - 1;
                            if iy < 0 || iy >= h as isize || ix < 0 || ix >= h as isize {
                                continue;
                            }
                            for ci in 0..cin {
                                let xv =
                                    x[((iy as usize) * h + ix as usize) * cin + ci] as f64;
                                for co in 0..cout {
                                    let d = dpre[(oy * h + ox) * cout + co] as f64;
                                    dw_ref[(((ky * 3 + kx) as usize) * cin + ci) * cout + co] +=
                                        xv * d;
                                }
                            }
                        }
                    }
                }
            }

            let mut dw = vec![0.0f32; 9 * cin * cout];
            let mut ring = PadRing::new();
            weight_grad(&x, &dpre, &mut dw, h, h, cin, cout, &mut ring);
            for (i, (got, want)) in dw.iter().zip(&dw_ref).enumerate() {
                assert!(
                    (*got as f64 - want).abs() < 1e-2 * (1.0 + want.abs()),
                    "h={h} cin={cin} cout={cout} idx {i}: {got} vs {want}"
                );
            }
            // accumulation on repeat
            weight_grad(&x, &dpre, &mut dw, h, h, cin, cout, &mut ring);
            assert!((dw[0] as f64 - 2.0 * dw_ref[0]).abs() < 2e-2 * (1.0 + dw_ref[0].abs()));
        }
    }
}
