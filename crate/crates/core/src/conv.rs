//! Valid (unpadded, stride 1) 2-D convolution and its gradients.
//!
//! "Convolution" here is cross-correlation, the usual CNN convention:
//!
//! ```text
//! out[k, y, x] = b[k] + Σ_c Σ_i Σ_j in[c, y+i, x+j] · w[k, c, i, j]
//! ```
//!
//! The forward pass lowers the input to a column matrix (one row per
//! `(c, i, j)` tap, one column per output pixel) and accumulates small
//! blocks of output channels and pixels in registers. Every output element receives
//! its terms in `(c, i, j)` order starting from the bias, so results are
//! bit-identical to a straightforward nested loop that sums in that order.

use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::tensor::{FilterBank, Tensor};

/// Gradients of `Σ grad_output ⊙ conv2d_valid(input, bank)`.
#[derive(Clone, Debug)]
pub struct ConvGradients {
    pub input: Tensor,
    /// Same layout as the bank: weight gradients in `weights()`, bias gradients in `biases()`.
    pub params: FilterBank,
}

fn output_dims(input: &Tensor, bank: &FilterBank) -> Result<(usize, usize)> {
    let (c, h, w) = input.shape();
    if c != bank.in_channels() {
        return Err(Error::shape(format!(
            "input has {c} channels, filter bank expects {}",
            bank.in_channels()
        )));
    }
    let f = bank.filter_size();
    if h < f || w < f {
        return Err(Error::shape(format!(
            "input {h}x{w} is smaller than the {f}x{f} filter"
        )));
    }
    Ok((h - f + 1, w - f + 1))
}

thread_local! {
    static COLS: RefCell<Vec<f64>> = const { RefCell::new(Vec::new()) };
    static DCOLS: RefCell<Vec<f64>> = const { RefCell::new(Vec::new()) };
}

/// Runs `body` with a per-thread scratch buffer of `len` elements (contents unspecified).
fn with_scratch<R>(
    key: &'static std::thread::LocalKey<RefCell<Vec<f64>>>,
    len: usize,
    body: impl FnOnce(&mut [f64]) -> R,
) -> R {
    key.with(|cell| {
        let mut buf = cell.borrow_mut();
        if buf.len() < len {
            buf.resize(len, 0.0);
        }
        body(&mut buf[..len])
    })
}

/// Lowers `input` to a `(C·f·f) × (oh·ow)` row-major matrix.
fn im2col(input: &Tensor, f: usize, oh: usize, ow: usize, cols: &mut [f64]) {
    let (c, _, w) = input.shape();
    let n = oh * ow;
    let mut row = 0;
    for ch in 0..c {
        let plane = input.plane(ch);
        for i in 0..f {
            for j in 0..f {
                let dst = &mut cols[row * n..(row + 1) * n];
                for y in 0..oh {
                    let s = (y + i) * w + j;
                    dst[y * ow..(y + 1) * ow].copy_from_slice(&plane[s..s + ow]);
                }
                row += 1;
            }
        }
    }
}

/// Scatter-adds a column-matrix gradient back onto an input-shaped tensor.
fn col2im(dcols: &[f64], c: usize, h: usize, w: usize, f: usize, oh: usize, ow: usize) -> Tensor {
    let n = oh * ow;
    let mut out = Tensor::zeros(c, h, w);
    let mut row = 0;
    for ch in 0..c {
        let plane = out.plane_mut(ch);
        for i in 0..f {
            for j in 0..f {
                let src = &dcols[row * n..(row + 1) * n];
                for y in 0..oh {
                    let d = (y + i) * w + j;
                    let dst = &mut plane[d..d + ow];
                    for (o, &g) in dst.iter_mut().zip(&src[y * ow..(y + 1) * ow]) {
                        *o += g;
                    }
                }
                row += 1;
            }
        }
    }
    out
}

const KB: usize = 4;
const PB: usize = 6;

/// `out[k][p] += Σ_t a[k][t] · b[t][p]`, accumulating over `t` in ascending
/// order for every element. `a` is `m × taps`, `b` is `taps × n`, `out` is `m × n`.
fn matmul_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, taps: usize, n: usize) {
    let full_p = n - n % PB;
    let full_k = m - m % KB;
    let mut p0 = 0;
    while p0 < full_p {
        let mut k0 = 0;
        while k0 < full_k {
            let ak: [&[f64]; KB] = std::array::from_fn(|r| &a[(k0 + r) * taps..(k0 + r + 1) * taps]);
            let mut acc = [[0.0f64; PB]; KB];
            for (r, row) in acc.iter_mut().enumerate() {
                row.copy_from_slice(&out[(k0 + r) * n + p0..(k0 + r) * n + p0 + PB]);
            }
            for t in 0..taps {
                let s: &[f64; PB] = b[t * n + p0..t * n + p0 + PB].try_into().unwrap();
                for r in 0..KB {
                    let w = ak[r][t];
                    for q in 0..PB {
                        acc[r][q] += w * s[q];
                    }
                }
            }
            for (r, row) in acc.iter().enumerate() {
                out[(k0 + r) * n + p0..(k0 + r) * n + p0 + PB].copy_from_slice(row);
            }
            k0 += KB;
        }
        for k in full_k..m {
            let ak = &a[k * taps..(k + 1) * taps];
            let mut acc: [f64; PB] = out[k * n + p0..k * n + p0 + PB].try_into().unwrap();
            for (t, &w) in ak.iter().enumerate() {
                let s: &[f64; PB] = b[t * n + p0..t * n + p0 + PB].try_into().unwrap();
                for q in 0..PB {
                    acc[q] += w * s[q];
                }
            }
            out[k * n + p0..k * n + p0 + PB].copy_from_slice(&acc);
        }
        p0 += PB;
    }
    for k in 0..m {
        let ak = &a[k * taps..(k + 1) * taps];
        for p in full_p..n {
            let mut o = out[k * n + p];
            for (t, &w) in ak.iter().enumerate() {
                o += w * b[t * n + p];
            }
            out[k * n + p] = o;
        }
    }
}

/// `out[k][t] = Σ_p g[k][p] · cols[t][p]` for `g` of `m × n` and `cols` of `taps × n`.
fn matmul_bt(g: &[f64], cols: &[f64], out: &mut [f64], m: usize, taps: usize, n: usize) {
    const L: usize = 4;
    const TB: usize = 4;
    let full = n - n % L;
    let mut t0 = 0;
    while t0 < taps {
        let tb = TB.min(taps - t0);
        for k in 0..m {
            let gk = &g[k * n..(k + 1) * n];
            let mut acc = [[0.0f64; L]; TB];
            let mut p = 0;
            while p < full {
                let gv: &[f64; L] = gk[p..p + L].try_into().unwrap();
                for (r, a) in acc.iter_mut().enumerate().take(tb) {
                    let t = t0 + r;
                    let cv: &[f64; L] = cols[t * n + p..t * n + p + L].try_into().unwrap();
                    for q in 0..L {
                        a[q] += gv[q] * cv[q];
                    }
                }
                p += L;
            }
            for (r, a) in acc.iter().enumerate().take(tb) {
                let t = t0 + r;
                let mut s = (a[0] + a[1]) + (a[2] + a[3]);
                for pp in full..n {
                    s += gk[pp] * cols[t * n + pp];
                }
                out[k * taps + t] = s;
            }
        }
        t0 += tb;
    }
}

pub fn conv2d_valid(input: &Tensor, bank: &FilterBank) -> Result<Tensor> {
    let (oh, ow) = output_dims(input, bank)?;
    let f = bank.filter_size();
    let taps = bank.in_channels() * f * f;
    let n = oh * ow;
    let nf = bank.num_filters();

    let mut out = vec![0.0; nf * n];
    for (k, plane) in out.chunks_exact_mut(n).enumerate() {
        plane.fill(bank.biases()[k]);
    }
    if taps == 1 {
        // 1x1 filters on one channel need no lowering.
        matmul_acc(bank.weights(), input.data(), &mut out, nf, taps, n);
    } else {
        with_scratch(&COLS, taps * n, |cols| {
            im2col(input, f, oh, ow, cols);
            matmul_acc(bank.weights(), cols, &mut out, nf, taps, n);
        });
    }
    Tensor::new(nf, oh, ow, out)
}

fn check_grad_shape(input: &Tensor, bank: &FilterBank, grad_output: &Tensor) -> Result<()> {
    let (oh, ow) = output_dims(input, bank)?;
    if grad_output.shape() != (bank.num_filters(), oh, ow) {
        return Err(Error::shape(format!(
            "grad_output is {:?}, forward output would be {:?}",
            grad_output.shape(),
            (bank.num_filters(), oh, ow)
        )));
    }
    Ok(())
}

/// Weight and bias gradients only; skips the input gradient (not needed for the first layer).
pub fn conv2d_param_grads(
    input: &Tensor,
    bank: &FilterBank,
    grad_output: &Tensor,
) -> Result<FilterBank> {
    check_grad_shape(input, bank, grad_output)?;
    let (oh, ow) = output_dims(input, bank)?;
    let f = bank.filter_size();
    let taps = bank.in_channels() * f * f;
    let n = oh * ow;
    let nf = bank.num_filters();
    let g = grad_output.data();

    let mut dw = vec![0.0; nf * taps];
    with_scratch(&COLS, taps * n, |cols| {
        im2col(input, f, oh, ow, cols);
        matmul_bt(g, cols, &mut dw, nf, taps, n);
    });
    let db = (0..nf).map(|k| g[k * n..(k + 1) * n].iter().sum()).collect();
    FilterBank::new(nf, bank.in_channels(), f, dw, db)
}

/// Gradient with respect to the input only.
pub fn conv2d_input_grad(
    input: &Tensor,
    bank: &FilterBank,
    grad_output: &Tensor,
) -> Result<Tensor> {
    check_grad_shape(input, bank, grad_output)?;
    let (c, h, w_in) = input.shape();
    let (oh, ow) = output_dims(input, bank)?;
    let f = bank.filter_size();
    let taps = c * f * f;
    let n = oh * ow;
    let nf = bank.num_filters();
    let w = bank.weights();

    let mut wt = vec![0.0; taps * nf];
    for k in 0..nf {
        for t in 0..taps {
            wt[t * nf + k] = w[k * taps + t];
        }
    }
    Ok(with_scratch(&DCOLS, taps * n, |dcols| {
        dcols.fill(0.0);
        matmul_acc(&wt, grad_output.data(), dcols, taps, nf, n);
        col2im(dcols, c, h, w_in, f, oh, ow)
    }))
}

/// Exact partial derivatives of `Σ grad_output ⊙ conv2d_valid(input, bank)`
/// with respect to the input, the weights and the biases.
pub fn conv2d_backward(
    input: &Tensor,
    bank: &FilterBank,
    grad_output: &Tensor,
) -> Result<ConvGradients> {
    let params = conv2d_param_grads(input, bank, grad_output)?;
    let input = conv2d_input_grad(input, bank, grad_output)?;
    Ok(ConvGradients { input, params })
}
