//! Matrix kernels behind the conv/dense layers.
//!
//! Two primitives cover every layer:
//!
//! - `matmul`:   C[m×n] (+)= A[m×k] · B[k×n]
//! - `matmul_at_b`: C[k×n] += A[m×k]ᵀ · B[m×n]   (weight gradients)
//!
//! All matrices are row-major. The f32 path dispatches at runtime to an
//! AVX-512 or AVX2 register-blocked kernel for the tall, thin-N shapes the
//! im2col convolutions produce, and to `matrixmultiply` for small-m /
//! wide-n dense shapes where its packing wins. Other scalar types fall back
//! to a blocked generic loop. Accumulation order is fixed for every path,
//! so results are reproducible run to run on the same machine.

use std::any::TypeId;

use super::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Isa {
    Avx512,
    Avx2,
    Generic,
}

#[cfg(target_arch = "x86_64")]
fn isa() -> Isa {
    use std::sync::OnceLock;
    static ISA: OnceLock<Isa> = OnceLock::new();
    *ISA.get_or_init(|| {
        if is_x86_feature_detected!("avx512f") {
            Isa::Avx512
        } else if is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma") {
            Isa::Avx2
        } else {
            Isa::Generic
        }
    })
}

#[cfg(not(target_arch = "x86_64"))]
fn isa() -> Isa {
    Isa::Generic
}

/// C[m×n] = A[m×k]·B[k×n], overwriting C (or adding when `accumulate`).
pub fn matmul<T: Real>(
    a: &[T],
    b: &[T],
    c: &mut [T],
    m: usize,
    k: usize,
    n: usize,
    accumulate: bool,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if TypeId::of::<T>() == TypeId::of::<f32>() {
        let (a, b, c) = unsafe {
            (
                std::slice::from_raw_parts(a.as_ptr() as *const f32, a.len()),
                std::slice::from_raw_parts(b.as_ptr() as *const f32, b.len()),
                std::slice::from_raw_parts_mut(c.as_mut_ptr() as *mut f32, c.len()),
            )
        };
        return matmul_f32(a, b, c, m, k, n, accumulate);
    }
    matmul_generic(a, b, c, m, k, n, accumulate);
}

/// C[k×n] += A[m×k]ᵀ · B[m×n].
pub fn matmul_at_b<T: Real>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(c.len(), k * n);
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    if TypeId::of::<T>() == TypeId::of::<f32>() {
        let (a, b, c) = unsafe {
            (
                std::slice::from_raw_parts(a.as_ptr() as *const f32, a.len()),
                std::slice::from_raw_parts(b.as_ptr() as *const f32, b.len()),
                std::slice::from_raw_parts_mut(c.as_mut_ptr() as *mut f32, c.len()),
            )
        };
        return matmul_at_b_f32(a, b, c, m, k, n);
    }
    // generic path: fixed-order row-major accumulation
    for i in 0..m {
        for kk in 0..k {
            let av = a[i * k + kk];
            let crow = &mut c[kk * n..kk * n + n];
            let brow = &b[i * n..i * n + n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

/// Blocked generic fallback used by non-f32 scalar types.
fn matmul_generic<T: Real>(
    a: &[T],
    b: &[T],
    c: &mut [T],
    m: usize,
    k: usize,
    n: usize,
    accumulate: bool,
) {
    if !accumulate {
        c.iter_mut().for_each(|v| *v = T::ZERO);
    }
    for i in 0..m {
        let arow = &a[i * k..i * k + k];
        let crow = &mut c[i * n..i * n + n];
        for (kk, &av) in arow.iter().enumerate() {
            let brow = &b[kk * n..kk * n + n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

fn matmul_f32(a: &[f32], b: &[f32], c: &mut [f32], m: usize, k: usize, n: usize, accumulate: bool) {
    if n == 1 && m >= 64 && isa() != Isa::Generic {
        return dot_rows_f32(a, b, c, m, k, accumulate);
    }
    // Small-m and wide-n shapes: matrixmultiply packs and wins.
    let use_mm = m < 64 || n >= 256 || isa() == Isa::Generic;
    if use_mm {
        let beta = if accumulate { 1.0 } else { 0.0 };
        unsafe {
            matrixmultiply::sgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                k as isize,
                1,
                b.as_ptr(),
                n as isize,
                1,
                beta,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        return;
    }
    // A walks rows (row stride k, reduction stride 1).
    panel_gemm(
        a.as_ptr(),
        k as isize,
        1,
        b,
        c,
        m,
        k,
        n,
        accumulate,
    );
}

fn matmul_at_b_f32(a: &[f32], b: &[f32], c: &mut [f32], m: usize, k: usize, n: usize) {
    if n == 1 && m >= 64 && isa() != Isa::Generic {
        return axpy_cols_f32(a, b, c, m, k);
    }
    // Thin reduction (small m): matrixmultiply with a transposed A view.
    if m < 64 || n >= 256 || isa() == Isa::Generic {
        unsafe {
            matrixmultiply::sgemm(
                k,
                m,
                n,
                1.0,
                a.as_ptr(),
                1,
                k as isize, // Aᵀ via swapped strides
                b.as_ptr(),
                n as isize,
                1,
                1.0,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        return;
    }
    // Compute the small transposed product C'[n×k] = Bᵀ · A instead: the
    // broadcast operand (B) walks one cache line per step and A streams
    // row-major exactly once per row tile. C' then folds into C.
    AT_SCRATCH.with(|cell| {
        let mut buf = cell.borrow_mut();
        if buf.len() < n * k {
            buf.resize(n * k, 0.0);
        }
        let ct = &mut buf[..n * k];
        panel_gemm(b.as_ptr(), 1, n as isize, a, ct, n, m, k, false);
        for j in 0..n {
            for kk in 0..k {
                c[kk * n + j] += ct[j * k + kk];
            }
        }
    });
}

thread_local! {
    static AT_SCRATCH: std::cell::RefCell<Vec<f32>> = const { std::cell::RefCell::new(Vec::new()) };
}

/// C[m×1] (+)= A[m×k] · b[k]: one vectorized dot product per row.
fn dot_rows_f32(a: &[f32], b: &[f32], c: &mut [f32], m: usize, k: usize, accumulate: bool) {
    #[cfg(target_arch = "x86_64")]
    {
        if isa() == Isa::Avx512 {
            unsafe { return dot_rows_avx512(a, b, c, m, k, accumulate) };
        }
        if isa() == Isa::Avx2 {
            unsafe { return dot_rows_avx2(a, b, c, m, k, accumulate) };
        }
    }
    for i in 0..m {
        let mut acc = 0.0f32;
        for (av, bv) in a[i * k..(i + 1) * k].iter().zip(b) {
            acc += av * bv;
        }
        c[i] = if accumulate { c[i] + acc } else { acc };
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn dot_rows_avx512(a: &[f32], b: &[f32], c: &mut [f32], m: usize, k: usize, accumulate: bool) {
    use std::arch::x86_64::*;
    let kv = k / 16 * 16;
    for i in 0..m {
        let row = a.as_ptr().add(i * k);
        let mut acc0 = _mm512_setzero_ps();
        let mut acc1 = _mm512_setzero_ps();
        let mut j = 0usize;
        while j + 32 <= kv {
            acc0 = _mm512_fmadd_ps(_mm512_loadu_ps(row.add(j)), _mm512_loadu_ps(b.as_ptr().add(j)), acc0);
            acc1 = _mm512_fmadd_ps(
                _mm512_loadu_ps(row.add(j + 16)),
                _mm512_loadu_ps(b.as_ptr().add(j + 16)),
                acc1,
            );
            j += 32;
        }
        while j < kv {
            acc0 = _mm512_fmadd_ps(_mm512_loadu_ps(row.add(j)), _mm512_loadu_ps(b.as_ptr().add(j)), acc0);
            j += 16;
        }
        let mut acc = _mm512_reduce_add_ps(_mm512_add_ps(acc0, acc1));
        while j < k {
            acc += *row.add(j) * b[j];
            j += 1;
        }
        c[i] = if accumulate { c[i] + acc } else { acc };
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn dot_rows_avx2(a: &[f32], b: &[f32], c: &mut [f32], m: usize, k: usize, accumulate: bool) {
    use std::arch::x86_64::*;
    let kv = k / 8 * 8;
    for i in 0..m {
        let row = a.as_ptr().add(i * k);
        let mut accv = _mm256_setzero_ps();
        let mut j = 0usize;
        while j < kv {
            accv = _mm256_fmadd_ps(_mm256_loadu_ps(row.add(j)), _mm256_loadu_ps(b.as_ptr().add(j)), accv);
            j += 8;
        }
        let mut tmp = [0.0f32; 8];
        _mm256_storeu_ps(tmp.as_mut_ptr(), accv);
        let mut acc = tmp.iter().sum::<f32>();
        while j < k {
            acc += *row.add(j) * b[j];
            j += 1;
        }
        c[i] = if accumulate { c[i] + acc } else { acc };
    }
}

/// C[k] += Σ_m b[m] · A[m×k] row m (weight gradient of an N=1 head).
fn axpy_cols_f32(a: &[f32], b: &[f32], c: &mut [f32], m: usize, k: usize) {
    #[cfg(target_arch = "x86_64")]
    {
        if isa() == Isa::Avx512 && k <= 160 {
            unsafe { return axpy_cols_avx512_resident(a, b, c, m, k) };
        }
        if isa() != Isa::Generic {
            unsafe { return axpy_cols_avx2(a, b, c, m, k) };
        }
    }
    for i in 0..m {
        let bv = b[i];
        for (cv, av) in c.iter_mut().zip(&a[i * k..(i + 1) * k]) {
            *cv += bv * av;
        }
    }
}

/// All k accumulators live in registers (k ≤ 160 → 10 zmm), so A streams
/// through exactly once.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn axpy_cols_avx512_resident(a: &[f32], b: &[f32], c: &mut [f32], m: usize, k: usize) {
    use std::arch::x86_64::*;
    let lanes = k.div_ceil(16);
    debug_assert!(lanes <= 10);
    let mut acc = [_mm512_setzero_ps(); 10];
    let tail_mask: __mmask16 = if k % 16 == 0 { !0 } else { (1u16 << (k % 16)) - 1 };
    for i in 0..m {
        let bv = _mm512_set1_ps(b[i]);
        let row = a.as_ptr().add(i * k);
        for l in 0..lanes {
            let mask = if l == lanes - 1 { tail_mask } else { !0 };
            let av = _mm512_maskz_loadu_ps(mask, row.add(l * 16));
            acc[l] = _mm512_fmadd_ps(bv, av, acc[l]);
        }
    }
    for l in 0..lanes {
        let mask = if l == lanes - 1 { tail_mask } else { !0 };
        let prev = _mm512_maskz_loadu_ps(mask, c.as_ptr().add(l * 16));
        _mm512_mask_storeu_ps(c.as_mut_ptr().add(l * 16), mask, _mm512_add_ps(prev, acc[l]));
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn axpy_cols_avx2(a: &[f32], b: &[f32], c: &mut [f32], m: usize, k: usize) {
    use std::arch::x86_64::*;
    let mut j = 0usize;
    while j + 8 <= k {
        let mut acc = _mm256_loadu_ps(c.as_ptr().add(j));
        for i in 0..m {
            acc = _mm256_fmadd_ps(
                _mm256_set1_ps(b[i]),
                _mm256_loadu_ps(a.as_ptr().add(i * k + j)),
                acc,
            );
        }
        _mm256_storeu_ps(c.as_mut_ptr().add(j), acc);
        j += 8;
    }
    while j < k {
        let mut acc = c[j];
        for i in 0..m {
            acc += b[i] * a[i * k + j];
        }
        c[j] = acc;
        j += 1;
    }
}

/// Register-blocked panel kernel: C rows indexed by `i` with
/// `a(i, r) = a_ptr[i·a_row + r·a_red]`, reduction length `red`,
/// B row-major [red×n], C row-major [rows×n].
#[allow(clippy::too_many_arguments)]
fn panel_gemm(
    a_ptr: *const f32,
    a_row: isize,
    a_red: isize,
    b: &[f32],
    c: &mut [f32],
    rows: usize,
    red: usize,
    n: usize,
    accumulate: bool,
) {
    match isa() {
        #[cfg(target_arch = "x86_64")]
        Isa::Avx512 => unsafe {
            avx512::drive(a_ptr, a_row, a_red, b.as_ptr(), c.as_mut_ptr(), rows, red, n, accumulate)
        },
        #[cfg(target_arch = "x86_64")]
        Isa::Avx2 => unsafe {
            avx2::drive(a_ptr, a_row, a_red, b.as_ptr(), c.as_mut_ptr(), rows, red, n, accumulate)
        },
        _ => {
            // strided-A generic fallback
            if !accumulate {
                c.iter_mut().for_each(|v| *v = 0.0);
            }
            for i in 0..rows {
                let crow = &mut c[i * n..i * n + n];
                for r in 0..red {
                    let av = unsafe { *a_ptr.offset(i as isize * a_row + r as isize * a_red) };
                    let brow = &b[r * n..r * n + n];
                    for (cv, &bv) in crow.iter_mut().zip(brow) {
                        *cv += av * bv;
                    }
                }
            }
        }
    }
}

#[cfg(target_arch = "x86_64")]
mod avx512 {
    use std::arch::x86_64::*;

    /// One register tile: MR C-rows × one 16-wide column panel.
    macro_rules! tile {
        ($name:ident, $mr:expr) => {
            #[target_feature(enable = "avx512f")]
            #[allow(clippy::too_many_arguments)]
            unsafe fn $name(
                a: *const f32,
                a_row: isize,
                a_red: isize,
                b: *const f32,
                ldb: isize,
                c: *mut f32,
                ldc: isize,
                red: usize,
                mask: __mmask16,
                accumulate: bool,
            ) {
                let mut acc = [_mm512_setzero_ps(); $mr];
                let mut bp = b;
                for r in 0..red {
                    let bv = _mm512_maskz_loadu_ps(mask, bp);
                    for i in 0..$mr {
                        let av = _mm512_set1_ps(*a.offset(i as isize * a_row + r as isize * a_red));
                        acc[i] = _mm512_fmadd_ps(av, bv, acc[i]);
                    }
                    bp = bp.offset(ldb);
                }
                for i in 0..$mr {
                    let cp = c.offset(i as isize * ldc);
                    let out = if accumulate {
                        _mm512_add_ps(_mm512_maskz_loadu_ps(mask, cp), acc[i])
                    } else {
                        acc[i]
                    };
                    _mm512_mask_storeu_ps(cp, mask, out);
                }
            }
        };
    }

    tile!(tile16, 16);
    tile!(tile8, 8);
    tile!(tile4, 4);
    tile!(tile2, 2);
    tile!(tile1, 1);

    #[target_feature(enable = "avx512f")]
    #[allow(clippy::too_many_arguments)]
    pub unsafe fn drive(
        a: *const f32,
        a_row: isize,
        a_red: isize,
        b: *const f32,
        c: *mut f32,
        rows: usize,
        red: usize,
        n: usize,
        accumulate: bool,
    ) {
        let mut j = 0usize;
        while j < n {
            let width = (n - j).min(16);
            let mask: __mmask16 = if width == 16 { !0 } else { (1u16 << width) - 1 };
            let bj = b.add(j);
            let cj = c.add(j);
            let mut i = 0usize;
            while i + 16 <= rows {
                tile16(
                    a.offset(i as isize * a_row),
                    a_row,
                    a_red,
                    bj,
                    n as isize,
                    cj.add(i * n),
                    n as isize,
                    red,
                    mask,
                    accumulate,
                );
                i += 16;
            }
            while i + 8 <= rows {
                tile8(
                    a.offset(i as isize * a_row),
                    a_row,
                    a_red,
                    bj,
                    n as isize,
                    cj.add(i * n),
                    n as isize,
                    red,
                    mask,
                    accumulate,
                );
                i += 8;
            }
            for (step, f) in [
                (4usize, tile4 as unsafe fn(_, _, _, _, _, _, _, _, _, _)),
                (2, tile2),
                (1, tile1),
            ] {
                while i + step <= rows {
                    f(
                        a.offset(i as isize * a_row),
                        a_row,
                        a_red,
                        bj,
                        n as isize,
                        cj.add(i * n),
                        n as isize,
                        red,
                        mask,
                        accumulate,
                    );
                    i += step;
                }
            }
            j += width;
        }
    }
}

#[cfg(target_arch = "x86_64")]
mod avx2 {
    use std::arch::x86_64::*;

    const LANE_MASKS: [[i32; 8]; 9] = {
        let mut m = [[0i32; 8]; 9];
        let mut w = 0;
        while w <= 8 {
            let mut i = 0;
            while i < 8 {
                m[w][i] = if i < w { -1 } else { 0 };
                i += 1;
            }
            w += 1;
        }
        m
    };

    macro_rules! tile {
        ($name:ident, $mr:expr) => {
            #[target_feature(enable = "avx2,fma")]
            #[allow(clippy::too_many_arguments)]
            unsafe fn $name(
                a: *const f32,
                a_row: isize,
                a_red: isize,
                b: *const f32,
                ldb: isize,
                c: *mut f32,
                ldc: isize,
                red: usize,
                width: usize,
                accumulate: bool,
            ) {
                let mask = _mm256_loadu_si256(LANE_MASKS[width].as_ptr() as *const __m256i);
                let full = width == 8;
                let mut acc = [_mm256_setzero_ps(); $mr];
                let mut bp = b;
                for r in 0..red {
                    let bv = if full {
                        _mm256_loadu_ps(bp)
                    } else {
                        _mm256_maskload_ps(bp, mask)
                    };
                    for i in 0..$mr {
                        let av = _mm256_set1_ps(*a.offset(i as isize * a_row + r as isize * a_red));
                        acc[i] = _mm256_fmadd_ps(av, bv, acc[i]);
                    }
                    bp = bp.offset(ldb);
                }
                for i in 0..$mr {
                    let cp = c.offset(i as isize * ldc);
                    let prev = if accumulate {
                        if full {
                            _mm256_loadu_ps(cp)
                        } else {
                            _mm256_maskload_ps(cp, mask)
                        }
                    } else {
                        _mm256_setzero_ps()
                    };
                    let out = _mm256_add_ps(prev, acc[i]);
                    if full {
                        _mm256_storeu_ps(cp, out);
                    } else {
                        _mm256_maskstore_ps(cp, mask, out);
                    }
                }
            }
        };
    }

    tile!(tile6, 6);
    tile!(tile2, 2);
    tile!(tile1, 1);

    #[target_feature(enable = "avx2,fma")]
    #[allow(clippy::too_many_arguments)]
    pub unsafe fn drive(
        a: *const f32,
        a_row: isize,
        a_red: isize,
        b: *const f32,
        c: *mut f32,
        rows: usize,
        red: usize,
        n: usize,
        accumulate: bool,
    ) {
        let mut j = 0usize;
        while j < n {
            let width = (n - j).min(8);
            let bj = b.add(j);
            let cj = c.add(j);
            let mut i = 0usize;
            while i + 6 <= rows {
                tile6(
                    a.offset(i as isize * a_row),
                    a_row,
                    a_red,
                    bj,
                    n as isize,
                    cj.add(i * n),
                    n as isize,
                    red,
                    width,
                    accumulate,
                );
                i += 6;
            }
            for (step, f) in [
                (2usize, tile2 as unsafe fn(_, _, _, _, _, _, _, _, _, _)),
                (1, tile1),
            ] {
                while i + step <= rows {
                    f(
                        a.offset(i as isize * a_row),
                        a_row,
                        a_red,
                        bj,
                        n as isize,
                        cj.add(i * n),
                        n as isize,
                        red,
                        width,
                        accumulate,
                    );
                    i += step;
                }
            }
            j += width;
        }
    }
}
