use std::sync::Arc;

use super::elementwise::conj_product;
use crate::error::{Error, Result};
use crate::tensor::{fft, is_power_of_two, record_op, DType, Tensor};

fn plane_dims(op: &'static str, x: &Tensor) -> Result<(usize, usize)> {
    x.expect_dtype(op, DType::Complex)?;
    let s = x.shape();
    if s.len() < 2 {
        return Err(Error::invalid(op, format!("need at least 2 dims, got {s:?}")));
    }
    let (h, w) = (s[s.len() - 2], s[s.len() - 1]);
    if !is_power_of_two(h) || !is_power_of_two(w) {
        return Err(Error::invalid(
            op,
            format!("spatial dims must be powers of two, got {h}x{w}"),
        ));
    }
    Ok((h, w))
}

fn transform(op: &'static str, x: &Tensor, inverse: bool) -> Result<Tensor> {
    let (h, w) = plane_dims(op, x)?;
    let mut out = x.to_vec();
    fft::fft2_planes(&mut out, h, w, inverse);
    let value = x.with_data(out);
    record_op(value, &[x], move |g, _| {
        let mut gi = g.to_vec();
        fft::fft2_planes(&mut gi, h, w, !inverse);
        vec![Some(gi)]
    })
}

/// Unitary 2-D DFT over the two trailing dims (scaled by `1/sqrt(HW)`).
pub fn fft2(x: &Tensor) -> Result<Tensor> {
    transform("fft2", x, false)
}

/// Inverse of [`fft2`]; also its adjoint.
pub fn ifft2(x: &Tensor) -> Result<Tensor> {
    transform("ifft2", x, true)
}

/// Elementwise complex magnitude. The subgradient at zero is taken as zero.
pub fn magnitude(x: &Tensor) -> Result<Tensor> {
    x.expect_dtype("magnitude", DType::Complex)?;
    let input = Arc::clone(x.data_arc());
    let mags: Vec<f64> = input.chunks_exact(2).map(|z| z[0].hypot(z[1])).collect();
    let value = Tensor::from_parts(x.shape().to_vec(), DType::Real, mags.clone());
    record_op(value, &[x], move |g, _| {
        let out = g
            .iter()
            .zip(input.chunks_exact(2).zip(&mags))
            .flat_map(|(g, (z, &r))| {
                if r > 0.0 {
                    [g * z[0] / r, g * z[1] / r]
                } else {
                    [0.0, 0.0]
                }
            })
            .collect();
        vec![Some(out)]
    })
}

pub fn real_part(x: &Tensor) -> Result<Tensor> {
    x.expect_dtype("real_part", DType::Complex)?;
    let re = x.data().iter().step_by(2).copied().collect();
    let value = Tensor::from_parts(x.shape().to_vec(), DType::Real, re);
    record_op(value, &[x], |g, _| {
        vec![Some(g.iter().flat_map(|&g| [g, 0.0]).collect())]
    })
}

/// Embeds a real tensor as complex with zero imaginary part.
pub fn to_complex(x: &Tensor) -> Result<Tensor> {
    x.expect_dtype("to_complex", DType::Real)?;
    let data = x.data().iter().flat_map(|&v| [v, 0.0]).collect();
    let value = Tensor::from_parts(x.shape().to_vec(), DType::Complex, data);
    record_op(value, &[x], |g, _| {
        vec![Some(g.iter().step_by(2).copied().collect())]
    })
}

/// `H x W` complex image to a `2 x H x W` real stack `[re, im]`.
pub fn complex_to_channels(x: &Tensor) -> Result<Tensor> {
    x.expect_dtype("complex_to_channels", DType::Complex)?;
    if x.shape().len() != 2 {
        return Err(Error::invalid(
            "complex_to_channels",
            format!("expected H x W, got {:?}", x.shape()),
        ));
    }
    let (h, w) = (x.shape()[0], x.shape()[1]);
    let n = h * w;
    let mut data = vec![0.0; 2 * n];
    for (i, z) in x.data().chunks_exact(2).enumerate() {
        data[i] = z[0];
        data[n + i] = z[1];
    }
    let value = Tensor::from_parts(vec![2, h, w], DType::Real, data);
    record_op(value, &[x], move |g, _| {
        vec![Some((0..n).flat_map(|i| [g[i], g[n + i]]).collect())]
    })
}

/// Inverse of [`complex_to_channels`].
pub fn channels_to_complex(x: &Tensor) -> Result<Tensor> {
    x.expect_dtype("channels_to_complex", DType::Real)?;
    let s = x.shape();
    if s.len() != 3 || s[0] != 2 {
        return Err(Error::invalid(
            "channels_to_complex",
            format!("expected 2 x H x W, got {s:?}"),
        ));
    }
    let (h, w) = (s[1], s[2]);
    let n = h * w;
    let d = x.data();
    let data = (0..n).flat_map(|i| [d[i], d[n + i]]).collect();
    let value = Tensor::from_parts(vec![h, w], DType::Complex, data);
    record_op(value, &[x], move |g, _| {
        let mut out = vec![0.0; 2 * n];
        for i in 0..n {
            out[i] = g[2 * i];
            out[n + i] = g[2 * i + 1];
        }
        vec![Some(out)]
    })
}

/// Multiplies every row of the trailing `H x W` planes by per-column weights
/// (a 0/1 sampling pattern in practice). Self-adjoint.
pub fn apply_mask(x: &Tensor, columns: &Arc<Vec<f64>>) -> Result<Tensor> {
    x.expect_dtype("apply_mask", DType::Complex)?;
    let w = *x.shape().last().unwrap_or(&0);
    if w != columns.len() {
        return Err(Error::shape("apply_mask", x.shape(), &[columns.len()]));
    }
    let mask_data = |data: &[f64]| -> Vec<f64> {
        data.iter()
            .enumerate()
            .map(|(i, v)| v * columns[(i / 2) % w])
            .collect()
    };
    let value = x.with_data(mask_data(x.data()));
    let columns = Arc::clone(columns);
    record_op(value, &[x], move |g, _| {
        vec![Some(
            g.iter()
                .enumerate()
                .map(|(i, v)| v * columns[(i / 2) % w])
                .collect(),
        )]
    })
}

fn check_coils(op: &'static str, sens: &Tensor, h: usize, w: usize) -> Result<usize> {
    sens.expect_dtype(op, DType::Complex)?;
    let s = sens.shape();
    if s.len() != 3 || s[1] != h || s[2] != w {
        return Err(Error::shape(op, s, &[s.first().copied().unwrap_or(0), h, w]));
    }
    Ok(s[0])
}

/// `H x W` image to `C x H x W` coil images `S_c x`. Sensitivities are
/// treated as constants.
pub fn coil_expand(x: &Tensor, sens: &Tensor) -> Result<Tensor> {
    x.expect_dtype("coil_expand", DType::Complex)?;
    if x.shape().len() != 2 {
        return Err(Error::invalid(
            "coil_expand",
            format!("expected H x W, got {:?}", x.shape()),
        ));
    }
    let (h, w) = (x.shape()[0], x.shape()[1]);
    let coils = check_coils("coil_expand", sens, h, w)?;
    let n = 2 * h * w;
    let s = Arc::clone(sens.data_arc());
    let mut out = Vec::with_capacity(coils * n);
    for c in 0..coils {
        let sc = &s[c * n..(c + 1) * n];
        out.extend(
            x.data()
                .chunks_exact(2)
                .zip(sc.chunks_exact(2))
                .flat_map(|(z, q)| [z[0] * q[0] - z[1] * q[1], z[0] * q[1] + z[1] * q[0]]),
        );
    }
    let value = Tensor::from_parts(vec![coils, h, w], DType::Complex, out);
    record_op(value, &[x], move |g, _| vec![Some(combine(g, &s, coils, n))])
}

/// `C x H x W` coil images to `sum_c conj(S_c) k_c`; adjoint of [`coil_expand`].
pub fn coil_combine(k: &Tensor, sens: &Tensor) -> Result<Tensor> {
    k.expect_dtype("coil_combine", DType::Complex)?;
    if k.shape().len() != 3 {
        return Err(Error::invalid(
            "coil_combine",
            format!("expected C x H x W, got {:?}", k.shape()),
        ));
    }
    let (h, w) = (k.shape()[1], k.shape()[2]);
    let coils = check_coils("coil_combine", sens, h, w)?;
    if coils != k.shape()[0] {
        return Err(Error::shape("coil_combine", k.shape(), sens.shape()));
    }
    let n = 2 * h * w;
    let s = Arc::clone(sens.data_arc());
    let value = Tensor::from_parts(vec![h, w], DType::Complex, combine(k.data(), &s, coils, n));
    record_op(value, &[k], move |g, _| {
        let mut out = Vec::with_capacity(coils * n);
        for c in 0..coils {
            let sc = &s[c * n..(c + 1) * n];
            out.extend(
                g.chunks_exact(2)
                    .zip(sc.chunks_exact(2))
                    .flat_map(|(z, q)| [z[0] * q[0] - z[1] * q[1], z[0] * q[1] + z[1] * q[0]]),
            );
        }
        vec![Some(out)]
    })
}

fn combine(k: &[f64], s: &[f64], coils: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for c in 0..coils {
        let prod = conj_product(&k[c * n..(c + 1) * n], &s[c * n..(c + 1) * n]);
        out.iter_mut().zip(prod).for_each(|(o, p)| *o += p);
    }
    out
}
