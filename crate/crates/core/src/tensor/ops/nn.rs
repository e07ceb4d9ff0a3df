//! Convolutional building blocks over single-sample `C x H x W` feature maps.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::{record_op, DType, Tensor};

fn chw(op: &'static str, x: &Tensor) -> Result<(usize, usize, usize)> {
    x.expect_dtype(op, DType::Real)?;
    match *x.shape() {
        [c, h, w] => Ok((c, h, w)),
        ref s => Err(Error::invalid(op, format!("expected C x H x W, got {s:?}"))),
    }
}

fn check_vector(op: &'static str, v: &Tensor, len: usize) -> Result<()> {
    v.expect_dtype(op, DType::Real)?;
    if v.shape() != [len] {
        return Err(Error::shape(op, v.shape(), &[len]));
    }
    Ok(())
}

/// Output indices `i` in `0..n` for which `i + d` stays inside `0..n`.
fn valid_range(n: usize, d: isize) -> Range<usize> {
    let lo = (-d).max(0) as usize;
    let hi = (n as isize - d).clamp(0, n as isize) as usize;
    lo..hi.max(lo)
}

fn strides(rows: usize, cols: usize, transposed: bool) -> (isize, isize) {
    if transposed {
        (1, rows as isize)
    } else {
        (cols as isize, 1)
    }
}

/// `a' b'` for row-major `a'` (`m x kk`) and `b'` (`kk x n`), where `'` is
/// an optional transpose of the stored matrix, into a fresh buffer.
fn gemm_new(m: usize, kk: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool) -> Vec<f64> {
    assert!(a.len() >= m * kk && b.len() >= kk * n);
    let mut c = Vec::with_capacity(m * n);
    // SAFETY: with beta = 0 the kernel writes every entry of the `m x n`
    // output without reading it, so the buffer is initialized afterwards.
    let (rsa, csa) = strides(m, kk, a_t);
    let (rsb, csb) = strides(kk, n, b_t);
    unsafe {
        let (pa, pb, pc) = (a.as_ptr(), b.as_ptr(), c.as_mut_ptr());
        matrixmultiply::dgemm(m, kk, n, 1.0, pa, rsa, csa, pb, rsb, csb, 0.0, pc, n as isize, 1);
        c.set_len(m * n);
    }
    c
}

/// Patch matrix `(C k k) x (H W)` of a zero-padded `C x H x W` input.
fn im2col(input: &[f64], cin: usize, h: usize, w: usize, k: usize) -> Vec<f64> {
    let p = (k / 2) as isize;
    let mut cols = Vec::with_capacity(cin * k * k * h * w);
    for ci in 0..cin {
        let plane = &input[ci * h * w..][..h * w];
        for ky in 0..k {
            for kx in 0..k {
                let (dy, dx) = (ky as isize - p, kx as isize - p);
                let (rows, xs) = (valid_range(h, dy), valid_range(w, dx));
                let src = shift(&xs, dx);
                for y in 0..h {
                    if !rows.contains(&y) {
                        cols.resize(cols.len() + w, 0.0);
                        continue;
                    }
                    let line = &plane[(y as isize + dy) as usize * w..][..w];
                    cols.resize(cols.len() + xs.start, 0.0);
                    cols.extend_from_slice(&line[src.clone()]);
                    cols.resize(cols.len() + w - xs.end, 0.0);
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto the input.
fn col2im(cols: &[f64], cin: usize, h: usize, w: usize, k: usize) -> Vec<f64> {
    let p = (k / 2) as isize;
    let hw = h * w;
    let mut out = vec![0.0; cin * hw];
    for ci in 0..cin {
        for ky in 0..k {
            for kx in 0..k {
                let (dy, dx) = (ky as isize - p, kx as isize - p);
                let row = &cols[((ci * k + ky) * k + kx) * hw..][..hw];
                let (rows, xs) = (valid_range(h, dy), valid_range(w, dx));
                for y in rows {
                    let dst = &mut out[ci * hw + (y as isize + dy) as usize * w..][shift(&xs, dx)];
                    dst.iter_mut()
                        .zip(&row[y * w..][xs.clone()])
                        .for_each(|(d, s)| *d += s);
                }
            }
        }
    }
    out
}

/// Stride-1 cross-correlation with zero padding `(k-1)/2`, so the output
/// has the input's spatial size.
///
/// `weight` is `C_out x C_in x k x k` with `k` odd; `bias`, if given, has
/// length `C_out`.
pub fn conv2d(x: &Tensor, weight: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
    let (cin, h, w) = chw("conv2d", x)?;
    weight.expect_dtype("conv2d", DType::Real)?;
    let (cout, k) = match *weight.shape() {
        [co, ci, k1, k2] if ci == cin && k1 == k2 => (co, k1),
        [_, ci, _, _] if ci != cin => {
            return Err(Error::invalid(
                "conv2d",
                format!("input has {cin} channels but weight expects {ci}"),
            ))
        }
        ref s => return Err(Error::invalid("conv2d", format!("bad weight shape {s:?}"))),
    };
    if k % 2 == 0 {
        return Err(Error::invalid(
            "conv2d",
            format!("kernel size must be odd, got {k}"),
        ));
    }
    if let Some(b) = bias {
        check_vector("conv2d", b, cout)?;
    }
    let (hw, patch) = (h * w, cin * k * k);
    // A 1x1 kernel's patch matrix is the input itself.
    let cols = if k == 1 {
        Arc::clone(x.data_arc())
    } else {
        Arc::new(im2col(x.data(), cin, h, w, k))
    };
    let wts = Arc::clone(weight.data_arc());
    let mut out = gemm_new(cout, patch, hw, &wts, false, &cols, false);
    if let Some(b) = bias {
        for (plane, &bv) in out.chunks_exact_mut(hw).zip(b.data()) {
            plane.iter_mut().for_each(|v| *v += bv);
        }
    }
    let value = Tensor::from_parts(vec![cout, h, w], DType::Real, out);
    let mut inputs = vec![x, weight];
    inputs.extend(bias);
    record_op(value, &inputs, move |g, needs| {
        let gx = needs[0].then(|| {
            let gcols = gemm_new(patch, cout, hw, &wts, true, g, false);
            if k == 1 {
                gcols
            } else {
                col2im(&gcols, cin, h, w, k)
            }
        });
        let gw = needs[1].then(|| gemm_new(cout, hw, patch, g, false, &cols, true));
        let mut grads = vec![gx, gw];
        if needs.len() > 2 {
            grads.push(needs[2].then(|| g.chunks_exact(hw).map(|p| p.iter().sum()).collect()));
        }
        grads
    })
}

fn shift(cols: &Range<usize>, dx: isize) -> Range<usize> {
    let start = (cols.start as isize + dx) as usize;
    start..start + cols.len()
}

/// Stride-2, kernel-2 transposed convolution doubling the spatial size.
///
/// `weight` is `C_in x C_out x 2 x 2`.
pub fn transpose_conv_up2(x: &Tensor, weight: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
    let (cin, h, w) = chw("transpose_conv_up2", x)?;
    weight.expect_dtype("transpose_conv_up2", DType::Real)?;
    let cout = match *weight.shape() {
        [ci, co, 2, 2] if ci == cin => co,
        ref s => {
            return Err(Error::invalid(
                "transpose_conv_up2",
                format!("weight {s:?} does not fit {cin} input channels"),
            ))
        }
    };
    if let Some(b) = bias {
        check_vector("transpose_conv_up2", b, cout)?;
    }
    let (hw, ho, wo) = (h * w, 2 * h, 2 * w);
    let input = Arc::clone(x.data_arc());
    let wts = Arc::clone(weight.data_arc());
    // Row `(co, t)` of `taps` holds tap `t` of every output 2x2 block.
    let taps = gemm_new(cout * 4, cin, hw, &wts, true, &input, false);
    let mut out = vec![0.0; cout * ho * wo];
    for co in 0..cout {
        let bv = bias.map_or(0.0, |b| b.data()[co]);
        let o = &mut out[co * ho * wo..][..ho * wo];
        for t in 0..4 {
            let row = &taps[(co * 4 + t) * hw..][..hw];
            let off = (t / 2) * wo + t % 2;
            for y in 0..h {
                for x in 0..w {
                    o[2 * y * wo + 2 * x + off] = row[y * w + x] + bv;
                }
            }
        }
    }
    let value = Tensor::from_parts(vec![cout, ho, wo], DType::Real, out);
    let mut inputs = vec![x, weight];
    inputs.extend(bias);
    record_op(value, &inputs, move |g, needs| {
        let mut gt = vec![0.0; cout * 4 * hw];
        for co in 0..cout {
            let gp = &g[co * ho * wo..][..ho * wo];
            for t in 0..4 {
                let row = &mut gt[(co * 4 + t) * hw..][..hw];
                let off = (t / 2) * wo + t % 2;
                for y in 0..h {
                    for x in 0..w {
                        row[y * w + x] = gp[2 * y * wo + 2 * x + off];
                    }
                }
            }
        }
        let gx = needs[0].then(|| gemm_new(cin, cout * 4, hw, &wts, false, &gt, false));
        let gw = needs[1].then(|| gemm_new(cin, hw, cout * 4, &input, false, &gt, true));
        let mut grads = vec![gx, gw];
        if needs.len() > 2 {
            grads.push(needs[2].then(|| g.chunks_exact(ho * wo).map(|p| p.iter().sum()).collect()));
        }
        grads
    })
}

/// 2x2 average pooling with stride 2.
pub fn avg_pool2(x: &Tensor) -> Result<Tensor> {
    let (c, h, w) = chw("avg_pool2", x)?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::invalid("avg_pool2", format!("odd spatial size {h}x{w}")));
    }
    let (ho, wo) = (h / 2, w / 2);
    let d = x.data();
    let mut out = vec![0.0; c * ho * wo];
    for ch in 0..c {
        for y in 0..ho {
            for xx in 0..wo {
                let i = ch * h * w + 2 * y * w + 2 * xx;
                out[ch * ho * wo + y * wo + xx] = 0.25 * (d[i] + d[i + 1] + d[i + w] + d[i + w + 1]);
            }
        }
    }
    let value = Tensor::from_parts(vec![c, ho, wo], DType::Real, out);
    record_op(value, &[x], move |g, _| {
        let mut gx = vec![0.0; c * h * w];
        for ch in 0..c {
            for y in 0..ho {
                for xx in 0..wo {
                    let v = 0.25 * g[ch * ho * wo + y * wo + xx];
                    let i = ch * h * w + 2 * y * w + 2 * xx;
                    gx[i] = v;
                    gx[i + 1] = v;
                    gx[i + w] = v;
                    gx[i + w + 1] = v;
                }
            }
        }
        vec![Some(gx)]
    })
}

/// Stacks `a` and `b` along the channel axis.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ca, h, w) = chw("concat_channels", a)?;
    let (cb, hb, wb) = chw("concat_channels", b)?;
    if (h, w) != (hb, wb) {
        return Err(Error::shape("concat_channels", a.shape(), b.shape()));
    }
    let mut out = Vec::with_capacity((ca + cb) * h * w);
    out.extend_from_slice(a.data());
    out.extend_from_slice(b.data());
    let value = Tensor::from_parts(vec![ca + cb, h, w], DType::Real, out);
    let split = ca * h * w;
    record_op(value, &[a, b], move |g, needs| {
        vec![
            needs[0].then(|| g[..split].to_vec()),
            needs[1].then(|| g[split..].to_vec()),
        ]
    })
}

/// Per-channel normalization over the spatial dims followed by the affine
/// map `gamma * x_hat + beta`. Uses the biased variance.
pub fn instance_norm(x: &Tensor, gamma: &Tensor, beta: &Tensor, eps: f64) -> Result<Tensor> {
    if !(eps > 0.0) {
        return Err(Error::invalid(
            "instance_norm",
            format!("eps must be > 0, got {eps}"),
        ));
    }
    let (c, h, w) = chw("instance_norm", x)?;
    check_vector("instance_norm", gamma, c)?;
    check_vector("instance_norm", beta, c)?;
    let n = h * w;
    let mut xhat = vec![0.0; c * n];
    let mut inv_std = vec![0.0; c];
    for ch in 0..c {
        let plane = &x.data()[ch * n..(ch + 1) * n];
        // shifted two-pass mean: exact for constant channels
        let shift = plane[0];
        let mean = shift + plane.iter().map(|v| v - shift).sum::<f64>() / n as f64;
        let var = plane.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let inv = 1.0 / (var + eps).sqrt();
        inv_std[ch] = inv;
        for (o, v) in xhat[ch * n..(ch + 1) * n].iter_mut().zip(plane) {
            *o = (v - mean) * inv;
        }
    }
    let (gm, bt) = (gamma.data(), beta.data());
    let out = xhat
        .iter()
        .enumerate()
        .map(|(i, v)| gm[i / n] * v + bt[i / n])
        .collect();
    let value = Tensor::from_parts(vec![c, h, w], DType::Real, out);
    let gamma_v = Arc::clone(gamma.data_arc());
    record_op(value, &[x, gamma, beta], move |g, needs| {
        let gx = needs[0].then(|| {
            let mut gx = vec![0.0; c * n];
            for ch in 0..c {
                let gp = &g[ch * n..(ch + 1) * n];
                let xh = &xhat[ch * n..(ch + 1) * n];
                let gam = gamma_v[ch];
                let sum_g: f64 = gp.iter().sum::<f64>() * gam;
                let sum_gx: f64 = gp.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() * gam;
                let scale = inv_std[ch] / n as f64;
                for ((o, gv), xv) in gx[ch * n..(ch + 1) * n].iter_mut().zip(gp).zip(xh) {
                    *o = scale * (n as f64 * gam * gv - sum_g - xv * sum_gx);
                }
            }
            gx
        });
        let ggamma = needs[1].then(|| {
            (0..c)
                .map(|ch| {
                    g[ch * n..(ch + 1) * n]
                        .iter()
                        .zip(&xhat[ch * n..(ch + 1) * n])
                        .map(|(a, b)| a * b)
                        .sum()
                })
                .collect()
        });
        let gbeta = needs[2].then(|| g.chunks_exact(n).map(|p| p.iter().sum()).collect());
        vec![gx, ggamma, gbeta]
    })
}
