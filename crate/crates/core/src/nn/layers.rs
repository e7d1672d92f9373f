//! Layer primitives: 3×3 convolutions (NHWC), 1-D convolutions (LC),
//! dense layers, activations, and ×2 nearest-neighbour upsampling.
//!
//! Parameters live in a flat [`ParamArena`] so the optimizer, serializer
//! and gradient checks can treat a model as one coordinate vector.
//! Convolutions run per sample (im2col + GEMM); dense layers batch over a
//! chunk of samples.

use super::conv_direct;
use super::kernels::{matmul, matmul_at_b};
use super::real::Real;
use std::any::TypeId;

fn is_f32<T: 'static>() -> bool {
    TypeId::of::<T>() == TypeId::of::<f32>()
}

fn as_f32(v: &[impl Real]) -> &[f32] {
    unsafe { std::slice::from_raw_parts(v.as_ptr() as *const f32, v.len()) }
}

fn as_f32_mut(v: &mut [impl Real]) -> &mut [f32] {
    unsafe { std::slice::from_raw_parts_mut(v.as_mut_ptr() as *mut f32, v.len()) }
}

/// Handle to one named tensor inside a [`ParamArena`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

/// Flat storage for every parameter of a model.
#[derive(Debug, Clone)]
pub struct ParamArena<T> {
    pub data: Vec<T>,
    entries: Vec<ParamEntry>,
}

impl<T: Real> Default for ParamArena<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ParamArena<T> {
    pub fn new() -> Self {
        ParamArena {
            data: Vec::new(),
            entries: Vec::new(),
        }
    }

    pub fn alloc(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        let len = shape.iter().product();
        let offset = self.data.len();
        self.data.resize(offset + len, T::ZERO);
        self.entries.push(ParamEntry {
            name: name.into(),
            shape: shape.to_vec(),
            offset,
            len,
        });
        ParamId(self.entries.len() - 1)
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry {
        &self.entries[id.0]
    }

    pub fn get<'a>(&self, data: &'a [T], id: ParamId) -> &'a [T] {
        let e = &self.entries[id.0];
        &data[e.offset..e.offset + e.len]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// A zeroed gradient buffer matching this arena.
    pub fn zeros_like(&self) -> Vec<T> {
        vec![T::ZERO; self.data.len()]
    }
}

fn slice_pair<'a, T>(data: &'a mut [T], off: usize, len: usize) -> &'a mut [T] {
    &mut data[off..off + len]
}

/// Pointwise activation applied after a layer's affine part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Act {
    None,
    /// Leaky ReLU, negative slope 0.01.
    LeakyRelu,
    Sigmoid,
}

pub const LEAKY_SLOPE: f64 = 0.01;

impl Act {
    pub fn forward<T: Real>(self, y: &mut [T]) {
        match self {
            Act::None => {}
            Act::LeakyRelu => {
                let slope = T::from_f64(LEAKY_SLOPE);
                for v in y.iter_mut() {
                    if *v < T::ZERO {
                        *v *= slope;
                    }
                }
            }
            Act::Sigmoid => {
                for v in y.iter_mut() {
                    *v = T::ONE / (T::ONE + (-*v).exp());
                }
            }
        }
    }

    /// Turn d(post) into d(pre) in place, given the post-activation values.
    pub fn backward<T: Real>(self, dy: &mut [T], y_post: &[T]) {
        match self {
            Act::None => {}
            Act::LeakyRelu => {
                let slope = T::from_f64(LEAKY_SLOPE);
                for (d, &y) in dy.iter_mut().zip(y_post) {
                    if y < T::ZERO {
                        *d *= slope;
                    }
                }
            }
            Act::Sigmoid => {
                for (d, &y) in dy.iter_mut().zip(y_post) {
                    *d *= y * (T::ONE - y);
                }
            }
        }
    }
}

/// Reusable per-thread temporaries.
#[derive(Default)]
pub struct Scratch<T> {
    pub cols: Vec<T>,
    pub cols2: Vec<T>,
    pub wtmp: Vec<T>,
    pub ring: conv_direct::PadRing,
}

impl<T: Real> Scratch<T> {
    pub fn new() -> Self {
        Scratch {
            cols: Vec::new(),
            cols2: Vec::new(),
            wtmp: Vec::new(),
            ring: conv_direct::PadRing::new(),
        }
    }
}

fn ensure<T: Real>(buf: &mut Vec<T>, len: usize) {
    if buf.len() < len {
        buf.resize(len, T::ZERO);
    }
}

/// 3×3 convolution, padding 1, stride 1 or 2, NHWC layout, one sample at
/// a time. Weights are `[(ky·3+kx)·cin + ci][cout]` row-major.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub cin: usize,
    pub cout: usize,
    pub stride: usize,
    pub hin: usize,
    pub win: usize,
    pub hout: usize,
    pub wout: usize,
    pub w: ParamId,
    pub b: ParamId,
    pub act: Act,
}

fn conv_out(n: usize, stride: usize) -> usize {
    // kernel 3, padding 1
    (n + 2 - 3) / stride + 1
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real>(
        arena: &mut ParamArena<T>,
        name: &str,
        cin: usize,
        cout: usize,
        hin: usize,
        win: usize,
        stride: usize,
        act: Act,
    ) -> Self {
        let w = arena.alloc(format!("{name}.weight"), &[9 * cin, cout]);
        let b = arena.alloc(format!("{name}.bias"), &[cout]);
        Conv2d {
            cin,
            cout,
            stride,
            hin,
            win,
            hout: conv_out(hin, stride),
            wout: conv_out(win, stride),
            w,
            b,
            act,
        }
    }

    pub fn in_len(&self) -> usize {
        self.hin * self.win * self.cin
    }

    pub fn out_len(&self) -> usize {
        self.hout * self.wout * self.cout
    }

    fn k(&self) -> usize {
        9 * self.cin
    }

    /// Output rows per strip: keeps the im2col panel L2-resident instead
    /// of materializing the whole 9·cin column matrix.
    fn strip_rows(&self) -> usize {
        let bytes_per_row = self.wout * self.k() * std::mem::size_of::<f64>();
        (256 * 1024 / bytes_per_row.max(1)).clamp(1, self.hout)
    }

    pub fn forward<T: Real>(
        &self,
        arena: &ParamArena<T>,
        params: &[T],
        x: &[T],
        y: &mut [T],
        scratch: &mut Scratch<T>,
    ) {
        debug_assert_eq!(x.len(), self.in_len());
        debug_assert_eq!(y.len(), self.out_len());
        if is_f32::<T>()
            && self.stride == 1
            && conv_direct::supports(1, self.wout, self.cin, self.cout, self.act)
        {
            conv_direct::forward(
                as_f32(x),
                as_f32(arena.get(params, self.w)),
                as_f32(arena.get(params, self.b)),
                as_f32_mut(y),
                self.hin,
                self.win,
                self.cin,
                self.cout,
                self.act,
                &mut scratch.ring,
            );
            return;
        }
        let k = self.k();
        let strip = self.strip_rows();
        ensure(&mut scratch.cols, strip * self.wout * k);
        let w = arena.get(params, self.w);
        let mut oy = 0;
        while oy < self.hout {
            let oy1 = (oy + strip).min(self.hout);
            let m = (oy1 - oy) * self.wout;
            let cols = &mut scratch.cols[..m * k];
            im2col_2d(x, cols, self.hin, self.win, self.cin, oy, oy1, self.wout, self.stride);
            let y_strip = &mut y[oy * self.wout * self.cout..oy1 * self.wout * self.cout];
            matmul(cols, w, y_strip, m, k, self.cout, false);
            oy = oy1;
        }
        add_bias_act(y, arena.get(params, self.b), self.cout, self.act);
    }

    /// Backward pass. `dy` holds d(post-activation) and is consumed;
    /// `dx` is overwritten when `Some`.
    #[allow(clippy::too_many_arguments)]
    pub fn backward<T: Real>(
        &self,
        arena: &ParamArena<T>,
        params: &[T],
        x: &[T],
        y_post: &[T],
        dy: &mut [T],
        mut dx: Option<&mut [T]>,
        grads: &mut [T],
        scratch: &mut Scratch<T>,
    ) {
        self.act.backward(dy, y_post);
        let k = self.k();

        let we = arena.entry(self.w);
        if is_f32::<T>()
            && self.stride == 1
            && conv_direct::supports(1, self.wout, self.cin, self.cout, Act::None)
        {
            conv_direct::weight_grad(
                as_f32(x),
                as_f32(dy),
                as_f32_mut(slice_pair(grads, we.offset, we.len)),
                self.hin,
                self.win,
                self.cin,
                self.cout,
                &mut scratch.ring,
            );
        } else {
            // weight gradient: strip-mined colsᵀ · dpre, fixed strip order
            let strip = self.strip_rows();
            ensure(&mut scratch.cols, strip * self.wout * k);
            let dw = slice_pair(grads, we.offset, we.len);
            let mut oy = 0;
            while oy < self.hout {
                let oy1 = (oy + strip).min(self.hout);
                let m = (oy1 - oy) * self.wout;
                let cols = &mut scratch.cols[..m * k];
                im2col_2d(x, cols, self.hin, self.win, self.cin, oy, oy1, self.wout, self.stride);
                let dy_strip = &dy[oy * self.wout * self.cout..oy1 * self.wout * self.cout];
                matmul_at_b(cols, dy_strip, dw, m, k, self.cout);
                oy = oy1;
            }
        }
        let be = arena.entry(self.b);
        accumulate_bias_grad(dy, slice_pair(grads, be.offset, be.len), self.cout);

        if let Some(dx) = dx.take() {
            debug_assert_eq!(dx.len(), self.in_len());
            let w = arena.get(params, self.w);
            if self.stride == 1 {
                // full correlation: conv of dpre with flipped, transposed kernels
                ensure(&mut scratch.wtmp, 9 * self.cout * self.cin);
                let wflip = &mut scratch.wtmp[..9 * self.cout * self.cin];
                for ky in 0..3 {
                    for kx in 0..3 {
                        for co in 0..self.cout {
                            for ci in 0..self.cin {
                                let src = ((2 - ky) * 3 + (2 - kx)) * self.cin + ci;
                                wflip[((ky * 3 + kx) * self.cout + co) * self.cin + ci] =
                                    w[src * self.cout + co];
                            }
                        }
                    }
                }
                if is_f32::<T>()
                    && conv_direct::supports(1, self.wout, self.cout, self.cin, Act::None)
                {
                    conv_direct::forward(
                        as_f32(dy),
                        as_f32(wflip),
                        &[],
                        as_f32_mut(dx),
                        self.hout,
                        self.wout,
                        self.cout,
                        self.cin,
                        Act::None,
                        &mut scratch.ring,
                    );
                } else {
                    let kb = 9 * self.cout;
                    let strip_b = (256 * 1024 / (self.win * kb * 8).max(1)).clamp(1, self.hin);
                    ensure(&mut scratch.cols2, strip_b * self.win * kb);
                    let mut iy = 0;
                    while iy < self.hin {
                        let iy1 = (iy + strip_b).min(self.hin);
                        let m = (iy1 - iy) * self.win;
                        let cols2 = &mut scratch.cols2[..m * kb];
                        im2col_2d(dy, cols2, self.hout, self.wout, self.cout, iy, iy1, self.win, 1);
                        let dx_strip =
                            &mut dx[iy * self.win * self.cin..iy1 * self.win * self.cin];
                        matmul(cols2, wflip, dx_strip, m, kb, self.cin, false);
                        iy = iy1;
                    }
                }
            } else {
                // strided: G = dpre · Wᵀ, scattered back through col2im
                ensure(&mut scratch.wtmp, k * self.cout);
                let wt = &mut scratch.wtmp[..k * self.cout];
                for kk in 0..k {
                    for co in 0..self.cout {
                        wt[co * k + kk] = w[kk * self.cout + co];
                    }
                }
                let m = self.hout * self.wout;
                ensure(&mut scratch.cols2, m * k);
                let g = &mut scratch.cols2[..m * k];
                matmul(dy, wt, g, m, self.cout, k, false);
                dx.iter_mut().for_each(|v| *v = T::ZERO);
                col2im_add_2d(
                    g, dx, self.hin, self.win, self.cin, self.hout, self.wout, self.stride,
                );
            }
        }
    }
}

/// 1-D convolution, kernel 3, padding 1, layout `[position][channel]`.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub cin: usize,
    pub cout: usize,
    pub stride: usize,
    pub lin: usize,
    pub lout: usize,
    pub w: ParamId,
    pub b: ParamId,
    pub act: Act,
}

impl Conv1d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real>(
        arena: &mut ParamArena<T>,
        name: &str,
        cin: usize,
        cout: usize,
        lin: usize,
        stride: usize,
        act: Act,
    ) -> Self {
        let w = arena.alloc(format!("{name}.weight"), &[3 * cin, cout]);
        let b = arena.alloc(format!("{name}.bias"), &[cout]);
        Conv1d {
            cin,
            cout,
            stride,
            lin,
            lout: conv_out(lin, stride),
            w,
            b,
            act,
        }
    }

    pub fn in_len(&self) -> usize {
        self.lin * self.cin
    }

    pub fn out_len(&self) -> usize {
        self.lout * self.cout
    }

    fn im2col<T: Real>(&self, x: &[T], cols: &mut [T]) {
        let cin = self.cin;
        for o in 0..self.lout {
            let dst = &mut cols[o * 3 * cin..(o + 1) * 3 * cin];
            for t in 0..3usize {
                let i = (o * self.stride + t) as isize - 1;
                let seg = &mut dst[t * cin..(t + 1) * cin];
                if i < 0 || i as usize >= self.lin {
                    seg.iter_mut().for_each(|v| *v = T::ZERO);
                } else {
                    seg.copy_from_slice(&x[i as usize * cin..(i as usize + 1) * cin]);
                }
            }
        }
    }

    pub fn forward<T: Real>(
        &self,
        arena: &ParamArena<T>,
        params: &[T],
        x: &[T],
        y: &mut [T],
        scratch: &mut Scratch<T>,
    ) {
        let m = self.lout;
        let k = 3 * self.cin;
        ensure(&mut scratch.cols, m * k);
        let cols = &mut scratch.cols[..m * k];
        self.im2col(x, cols);
        matmul(cols, arena.get(params, self.w), y, m, k, self.cout, false);
        add_bias_act(y, arena.get(params, self.b), self.cout, self.act);
    }

    #[allow(clippy::too_many_arguments)]
    pub fn backward<T: Real>(
        &self,
        arena: &ParamArena<T>,
        params: &[T],
        x: &[T],
        y_post: &[T],
        dy: &mut [T],
        mut dx: Option<&mut [T]>,
        grads: &mut [T],
        scratch: &mut Scratch<T>,
    ) {
        self.act.backward(dy, y_post);
        let m = self.lout;
        let k = 3 * self.cin;
        ensure(&mut scratch.cols, m * k);
        let cols = &mut scratch.cols[..m * k];
        self.im2col(x, cols);
        let we = arena.entry(self.w);
        matmul_at_b(cols, dy, slice_pair(grads, we.offset, we.len), m, k, self.cout);
        let be = arena.entry(self.b);
        accumulate_bias_grad(dy, slice_pair(grads, be.offset, be.len), self.cout);

        if let Some(dx) = dx.take() {
            let w = arena.get(params, self.w);
            ensure(&mut scratch.wtmp, k * self.cout);
            let wt = &mut scratch.wtmp[..k * self.cout];
            for kk in 0..k {
                for co in 0..self.cout {
                    wt[co * k + kk] = w[kk * self.cout + co];
                }
            }
            ensure(&mut scratch.cols2, m * k);
            let g = &mut scratch.cols2[..m * k];
            matmul(dy, wt, g, m, self.cout, k, false);
            dx.iter_mut().for_each(|v| *v = T::ZERO);
            for o in 0..m {
                for t in 0..3usize {
                    let i = (o * self.stride + t) as isize - 1;
                    if i < 0 || i as usize >= self.lin {
                        continue;
                    }
                    let src = &g[(o * 3 + t) * self.cin..(o * 3 + t + 1) * self.cin];
                    let dst = &mut dx[i as usize * self.cin..(i as usize + 1) * self.cin];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
        }
    }
}

/// Fully connected layer over a chunk of `mb` rows.
#[derive(Debug, Clone)]
pub struct Dense {
    pub nin: usize,
    pub nout: usize,
    pub w: ParamId,
    pub b: ParamId,
    pub act: Act,
}

impl Dense {
    pub fn new<T: Real>(
        arena: &mut ParamArena<T>,
        name: &str,
        nin: usize,
        nout: usize,
        act: Act,
    ) -> Self {
        let w = arena.alloc(format!("{name}.weight"), &[nin, nout]);
        let b = arena.alloc(format!("{name}.bias"), &[nout]);
        Dense {
            nin,
            nout,
            w,
            b,
            act,
        }
    }

    pub fn forward<T: Real>(
        &self,
        arena: &ParamArena<T>,
        params: &[T],
        x: &[T],
        y: &mut [T],
        mb: usize,
    ) {
        debug_assert_eq!(x.len(), mb * self.nin);
        debug_assert_eq!(y.len(), mb * self.nout);
        matmul(x, arena.get(params, self.w), y, mb, self.nin, self.nout, false);
        let b = arena.get(params, self.b);
        for row in y.chunks_exact_mut(self.nout) {
            for (v, &bv) in row.iter_mut().zip(b) {
                *v += bv;
            }
            self.act.forward(row);
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn backward<T: Real>(
        &self,
        arena: &ParamArena<T>,
        params: &[T],
        x: &[T],
        y_post: &[T],
        dy: &mut [T],
        dx: Option<&mut [T]>,
        grads: &mut [T],
        mb: usize,
    ) {
        self.act.backward(dy, y_post);
        let we = arena.entry(self.w);
        matmul_at_b(
            x,
            dy,
            slice_pair(grads, we.offset, we.len),
            mb,
            self.nin,
            self.nout,
        );
        let be = arena.entry(self.b);
        accumulate_bias_grad(dy, slice_pair(grads, be.offset, be.len), self.nout);
        if let Some(dx) = dx {
            // dx = dpre · Wᵀ, via transposed strides (no weight copy)
            mat_bt(dy, arena.get(params, self.w), dx, mb, self.nout, self.nin);
        }
    }
}

/// C[m×n] = A[m×k] · B[n×k]ᵀ; dense shapes, delegated to matrixmultiply.
fn mat_bt<T: Real>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    use std::any::TypeId;
    if TypeId::of::<T>() == TypeId::of::<f32>() {
        unsafe {
            matrixmultiply::sgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr() as *const f32,
                k as isize,
                1,
                b.as_ptr() as *const f32,
                1,
                k as isize,
                0.0,
                c.as_mut_ptr() as *mut f32,
                n as isize,
                1,
            );
        }
        return;
    }
    for i in 0..m {
        for j in 0..n {
            let mut acc = T::ZERO;
            for kk in 0..k {
                acc += a[i * k + kk] * b[j * k + kk];
            }
            c[i * n + j] = acc;
        }
    }
}

/// ×2 nearest-neighbour upsampling, NHWC.
pub fn upsample2x_forward<T: Real>(x: &[T], y: &mut [T], h: usize, w: usize, c: usize) {
    debug_assert_eq!(x.len(), h * w * c);
    debug_assert_eq!(y.len(), 4 * h * w * c);
    let wo = 2 * w;
    for iy in 0..h {
        for ix in 0..w {
            let src = &x[(iy * w + ix) * c..(iy * w + ix + 1) * c];
            for dy in 0..2 {
                for dx in 0..2 {
                    let o = ((2 * iy + dy) * wo + 2 * ix + dx) * c;
                    y[o..o + c].copy_from_slice(src);
                }
            }
        }
    }
}

pub fn upsample2x_backward<T: Real>(dy: &[T], dx: &mut [T], h: usize, w: usize, c: usize) {
    let wo = 2 * w;
    for iy in 0..h {
        for ix in 0..w {
            let dst = &mut dx[(iy * w + ix) * c..(iy * w + ix + 1) * c];
            dst.iter_mut().for_each(|v| *v = T::ZERO);
            for oy in 0..2 {
                for ox in 0..2 {
                    let o = ((2 * iy + oy) * wo + 2 * ix + ox) * c;
                    for (d, s) in dst.iter_mut().zip(&dy[o..o + c]) {
                        *d += *s;
                    }
                }
            }
        }
    }
}

fn add_bias_act<T: Real>(y: &mut [T], bias: &[T], cout: usize, act: Act) {
    for row in y.chunks_exact_mut(cout) {
        for (v, &b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
    act.forward(y);
}

fn accumulate_bias_grad<T: Real>(dpre: &[T], db: &mut [T], cout: usize) {
    for row in dpre.chunks_exact(cout) {
        for (g, &d) in db.iter_mut().zip(row) {
            *g += d;
        }
    }
}

/// im2col for output rows `[oy0, oy1)`; `cols` holds `(oy1-oy0)*wout` rows.
#[allow(clippy::too_many_arguments)]
fn im2col_2d<T: Real>(
    x: &[T],
    cols: &mut [T],
    hin: usize,
    win: usize,
    cin: usize,
    oy0: usize,
    oy1: usize,
    wout: usize,
    stride: usize,
) {
    let k = 9 * cin;
    for oy in oy0..oy1 {
        let row = oy - oy0;
        for ox in 0..wout {
            let dst = &mut cols[(row * wout + ox) * k..(row * wout + ox + 1) * k];
            for ky in 0..3usize {
                let iy = (oy * stride + ky) as isize - 1;
                for kx in 0..3usize {
                    let ix = (ox * stride + kx) as isize - 1;
                    let seg = &mut dst[(ky * 3 + kx) * cin..(ky * 3 + kx + 1) * cin];
                    if iy < 0 || iy as usize >= hin || ix < 0 || ix as usize >= win {
                        seg.iter_mut().for_each(|v| *v = T::ZERO);
                    } else {
                        let s = (iy as usize * win + ix as usize) * cin;
                        seg.copy_from_slice(&x[s..s + cin]);
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn col2im_add_2d<T: Real>(
    g: &[T],
    dx: &mut [T],
    hin: usize,
    win: usize,
    cin: usize,
    hout: usize,
    wout: usize,
    stride: usize,
) {
    let k = 9 * cin;
    for oy in 0..hout {
        for ox in 0..wout {
            let src = &g[(oy * wout + ox) * k..(oy * wout + ox + 1) * k];
            for ky in 0..3usize {
                let iy = (oy * stride + ky) as isize - 1;
                if iy < 0 || iy as usize >= hin {
                    continue;
                }
                for kx in 0..3usize {
                    let ix = (ox * stride + kx) as isize - 1;
                    if ix < 0 || ix as usize >= win {
                        continue;
                    }
                    let seg = &src[(ky * 3 + kx) * cin..(ky * 3 + kx + 1) * cin];
                    let d = (iy as usize * win + ix as usize) * cin;
                    for (dv, &sv) in dx[d..d + cin].iter_mut().zip(seg) {
                        *dv += sv;
                    }
                }
            }
        }
    }
}
