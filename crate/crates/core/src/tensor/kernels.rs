//! Raw forward/backward kernels over flat slices.
//!
//! Parallel loops split work by batch item only; every reduction across
//! batch items happens sequentially in index order so results are bit-stable.

use rayon::prelude::*;

use super::Real;

/// `out[m×n] = a[m×k] · b[k×n]`
pub(crate) fn matmul<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `out[m×k] = g[m×n] · bᵀ` where `b` is `k×n`.
pub(crate) fn matmul_nt<T: Real>(g: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * k];
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            out[i * k + p] = dot(grow, brow);
        }
    }
    out
}

/// `out[k×n] = aᵀ · g` where `a` is `m×k` and `g` is `m×n`.
pub(crate) fn matmul_tn<T: Real>(a: &[T], g: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); k * n];
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &gv) in orow.iter_mut().zip(grow) {
                *o += av * gv;
            }
        }
    }
    out
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvDims {
    pub batch: usize,
    pub height: usize,
    pub width: usize,
    pub in_ch: usize,
    pub size: usize,
    pub filters: usize,
}

impl ConvDims {
    pub fn out_h(&self) -> usize {
        self.height - self.size + 1
    }
    pub fn out_w(&self) -> usize {
        self.width - self.size + 1
    }
    fn in_len(&self) -> usize {
        self.height * self.width * self.in_ch
    }
    fn out_len(&self) -> usize {
        self.out_h() * self.out_w() * self.filters
    }
}

/// Valid cross-correlation, stride 1. Kernel layout is S×S×Cin×F, so for a
/// fixed kernel row the patch (kx, ci) is contiguous in both input and kernel.
pub(crate) fn conv2d_forward<T: Real>(x: &[T], k: &[T], d: ConvDims) -> Vec<T> {
    let (s, c, f, w) = (d.size, d.in_ch, d.filters, d.width);
    let (oh, ow) = (d.out_h(), d.out_w());
    let mut out = vec![T::zero(); d.batch * d.out_len()];
    out.par_chunks_mut(d.out_len())
        .zip(x.par_chunks(d.in_len()))
        .for_each(|(out_b, x_b)| {
            for oy in 0..oh {
                for ox in 0..ow {
                    let o = &mut out_b[(oy * ow + ox) * f..][..f];
                    for ky in 0..s {
                        let patch = &x_b[((oy + ky) * w + ox) * c..][..s * c];
                        let krow = &k[ky * s * c * f..][..s * c * f];
                        for (p, &xv) in patch.iter().enumerate() {
                            let kk = &krow[p * f..][..f];
                            for (ov, &kv) in o.iter_mut().zip(kk) {
                                *ov += xv * kv;
                            }
                        }
                    }
                }
            }
        });
    out
}

pub(crate) fn conv2d_backward_input<T: Real>(g: &[T], k: &[T], d: ConvDims) -> Vec<T> {
    let (s, c, f, w) = (d.size, d.in_ch, d.filters, d.width);
    let (oh, ow) = (d.out_h(), d.out_w());
    let mut gx = vec![T::zero(); d.batch * d.in_len()];
    gx.par_chunks_mut(d.in_len())
        .zip(g.par_chunks(d.out_len()))
        .for_each(|(gx_b, g_b)| {
            for oy in 0..oh {
                for ox in 0..ow {
                    let go = &g_b[(oy * ow + ox) * f..][..f];
                    for ky in 0..s {
                        let patch = &mut gx_b[((oy + ky) * w + ox) * c..][..s * c];
                        let krow = &k[ky * s * c * f..][..s * c * f];
                        for (p, gv) in patch.iter_mut().enumerate() {
                            *gv += dot(&krow[p * f..][..f], go);
                        }
                    }
                }
            }
        });
    gx
}

pub(crate) fn conv2d_backward_kernel<T: Real>(x: &[T], g: &[T], d: ConvDims) -> Vec<T> {
    let (s, c, f, w) = (d.size, d.in_ch, d.filters, d.width);
    let (oh, ow) = (d.out_h(), d.out_w());
    let klen = s * s * c * f;
    let partials: Vec<Vec<T>> = x
        .par_chunks(d.in_len())
        .zip(g.par_chunks(d.out_len()))
        .map(|(x_b, g_b)| {
            let mut gk = vec![T::zero(); klen];
            for oy in 0..oh {
                for ox in 0..ow {
                    let go = &g_b[(oy * ow + ox) * f..][..f];
                    for ky in 0..s {
                        let patch = &x_b[((oy + ky) * w + ox) * c..][..s * c];
                        let krow = &mut gk[ky * s * c * f..][..s * c * f];
                        for (p, &xv) in patch.iter().enumerate() {
                            for (kv, &gv) in krow[p * f..][..f].iter_mut().zip(go) {
                                *kv += xv * gv;
                            }
                        }
                    }
                }
            }
            gk
        })
        .collect();
    let mut total = vec![T::zero(); klen];
    for part in partials {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    total
}

/// 2×2 window, stride 2, floor on odd extents. Returns (output, flat argmax
/// index into the input per output cell). Ties go to the first element in
/// row-major window order.
pub(crate) fn maxpool2x2<T: Real>(x: &[T], b: usize, h: usize, w: usize, c: usize) -> (Vec<T>, Vec<usize>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(b * oh * ow * c);
    let mut arg = Vec::with_capacity(b * oh * ow * c);
    for bi in 0..b {
        for oy in 0..oh {
            for ox in 0..ow {
                for ci in 0..c {
                    let mut best_idx = ((bi * h + 2 * oy) * w + 2 * ox) * c + ci;
                    let mut best = x[best_idx];
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = ((bi * h + 2 * oy + dy) * w + 2 * ox + dx) * c + ci;
                        if x[idx] > best {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                    out.push(best);
                    arg.push(best_idx);
                }
            }
        }
    }
    (out, arg)
}
