//! Same-padded, stride-1 cross-correlation via im2col and GEMM.

use super::Tensor;
use crate::error::{Error, Result};

/// `c = a · b + beta · c` for row-major `a: (m, k)`, `b: (k, n)`, `c: (m, n)`.
/// `trans_a` / `trans_b` read the stored matrix as its transpose.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for v in c.iter_mut() {
            *v *= beta;
        }
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the strides above address exactly the m*k, k*n and m*n
    // elements of the checked slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    batch: usize,
    depth: usize,
    rows: usize,
    cols: usize,
    in_ch: usize,
    out_ch: usize,
    kd: usize,
    kh: usize,
    kw: usize,
}

impl Geometry {
    fn new(x: &[usize], k: &[usize]) -> Result<Self> {
        if x.len() != 5 {
            return Err(Error::InvalidArgument(format!(
                "conv input must be (batch, depth, rows, cols, channels), got {x:?}"
            )));
        }
        if k.len() != 5 {
            return Err(Error::InvalidArgument(format!(
                "conv kernel must be (kd, kh, kw, in_ch, out_ch), got {k:?}"
            )));
        }
        if k.iter().take(3).any(|&e| e % 2 == 0) {
            return Err(Error::InvalidArgument(format!(
                "same-padded conv needs odd kernel extents, got {k:?}"
            )));
        }
        if x[4] != k[3] {
            return Err(Error::shape(
                "conv",
                &[x[0], x[1], x[2], x[3], k[3]],
                x,
            ));
        }
        Ok(Self {
            batch: x[0],
            depth: x[1],
            rows: x[2],
            cols: x[3],
            in_ch: x[4],
            out_ch: k[4],
            kd: k[0],
            kh: k[1],
            kw: k[2],
        })
    }

    fn positions(&self) -> usize {
        self.batch * self.depth * self.rows * self.cols
    }

    fn patch_len(&self) -> usize {
        self.kd * self.kh * self.kw * self.in_ch
    }

    /// Visits every (output position, kernel tap) pair that lands inside the
    /// input, passing the offsets of the patch slot and the input channel run.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize)) {
        let (pd, ph, pw) = (self.kd / 2, self.kh / 2, self.kw / 2);
        let patch = self.patch_len();
        let mut row = 0;
        for b in 0..self.batch {
            for d in 0..self.depth {
                for r in 0..self.rows {
                    for c in 0..self.cols {
                        let base = row * patch;
                        for a in 0..self.kd {
                            let dd = d as isize + a as isize - pd as isize;
                            if dd < 0 || dd >= self.depth as isize {
                                continue;
                            }
                            for bb in 0..self.kh {
                                let rr = r as isize + bb as isize - ph as isize;
                                if rr < 0 || rr >= self.rows as isize {
                                    continue;
                                }
                                for cc in 0..self.kw {
                                    let ccol = c as isize + cc as isize - pw as isize;
                                    if ccol < 0 || ccol >= self.cols as isize {
                                        continue;
                                    }
                                    let src = (((b * self.depth + dd as usize) * self.rows
                                        + rr as usize)
                                        * self.cols
                                        + ccol as usize)
                                        * self.in_ch;
                                    let dst = base + ((a * self.kh + bb) * self.kw + cc) * self.in_ch;
                                    f(dst, src);
                                }
                            }
                        }
                        row += 1;
                    }
                }
            }
        }
    }

    fn im2col(&self, x: &[f64]) -> Vec<f64> {
        let mut col = vec![0.0; self.positions() * self.patch_len()];
        let ch = self.in_ch;
        self.for_each_tap(|dst, src| col[dst..dst + ch].copy_from_slice(&x[src..src + ch]));
        col
    }

    fn col2im(&self, col: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.positions() * self.in_ch];
        let ch = self.in_ch;
        self.for_each_tap(|dst, src| {
            for (xi, ci) in x[src..src + ch].iter_mut().zip(&col[dst..dst + ch]) {
                *xi += ci;
            }
        });
        x
    }
}

/// Cross-correlation of `x: (b, d, h, w, cin)` with `kernel: (kd, kh, kw, cin, cout)`,
/// zero same-padding, stride 1. Output is `(b, d, h, w, cout)`.
pub fn conv_same(x: &Tensor, kernel: &Tensor) -> Result<Tensor> {
    let g = Geometry::new(x.shape(), kernel.shape())?;
    let col = g.im2col(x.data());
    let mut out = vec![0.0; g.positions() * g.out_ch];
    gemm(
        g.positions(),
        g.patch_len(),
        g.out_ch,
        &col,
        false,
        kernel.data(),
        false,
        0.0,
        &mut out,
    );
    Tensor::new(
        vec![g.batch, g.depth, g.rows, g.cols, g.out_ch],
        out,
    )
}

/// Gradients of [`conv_same`] with respect to its input and kernel. Either
/// side may be skipped when the caller does not need it.
pub fn conv_same_backward(
    x: &Tensor,
    kernel: &Tensor,
    grad_out: &Tensor,
    want_input: bool,
    want_kernel: bool,
) -> Result<(Option<Tensor>, Option<Tensor>)> {
    let g = Geometry::new(x.shape(), kernel.shape())?;
    let grad_kernel = if want_kernel {
        let col = g.im2col(x.data());
        let mut gk = vec![0.0; g.patch_len() * g.out_ch];
        gemm(
            g.patch_len(),
            g.positions(),
            g.out_ch,
            &col,
            true,
            grad_out.data(),
            false,
            0.0,
            &mut gk,
        );
        Some(Tensor::new(kernel.shape().to_vec(), gk)?)
    } else {
        None
    };
    let grad_input = if want_input {
        let mut gcol = vec![0.0; g.positions() * g.patch_len()];
        gemm(
            g.positions(),
            g.out_ch,
            g.patch_len(),
            grad_out.data(),
            false,
            kernel.data(),
            true,
            0.0,
            &mut gcol,
        );
        Some(Tensor::new(x.shape().to_vec(), g.col2im(&gcol))?)
    } else {
        None
    };
    Ok((grad_input, grad_kernel))
}
