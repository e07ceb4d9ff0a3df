use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::{record_op, DType, Tensor};

/// Separable "valid" correlation of an `H x W` real image with the outer
/// product `kernel kernel^T`; output is `(H-k+1) x (W-k+1)`.
pub fn separable_filter_valid(x: &Tensor, kernel: &[f64]) -> Result<Tensor> {
    x.expect_dtype("separable_filter_valid", DType::Real)?;
    let k = kernel.len();
    let (h, w) = match *x.shape() {
        [h, w] if h >= k && w >= k && k > 0 => (h, w),
        ref s => {
            return Err(Error::invalid(
                "separable_filter_valid",
                format!("image {s:?} smaller than window {k}"),
            ))
        }
    };
    let (ho, wo) = (h - k + 1, w - k + 1);
    let kern: Arc<Vec<f64>> = Arc::new(kernel.to_vec());
    let out = filter_forward(x.data(), h, w, &kern);
    let value = Tensor::from_parts(vec![ho, wo], DType::Real, out);
    record_op(value, &[x], move |g, _| {
        // rows pass transposed, then columns pass transposed
        let mut mid = vec![0.0; ho * w];
        for y in 0..ho {
            for (a, &kv) in kern.iter().enumerate() {
                let src = &g[y * wo..(y + 1) * wo];
                let dst = &mut mid[y * w + a..y * w + a + wo];
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += kv * s);
            }
        }
        let mut gx = vec![0.0; h * w];
        for y in 0..ho {
            for (a, &kv) in kern.iter().enumerate() {
                let src = &mid[y * w..(y + 1) * w];
                let dst = &mut gx[(y + a) * w..(y + a + 1) * w];
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += kv * s);
            }
        }
        vec![Some(gx)]
    })
}

fn filter_forward(x: &[f64], h: usize, w: usize, kern: &[f64]) -> Vec<f64> {
    let k = kern.len();
    let (ho, wo) = (h - k + 1, w - k + 1);
    // columns first: mid is ho x w
    let mut mid = vec![0.0; ho * w];
    for y in 0..ho {
        let dst = &mut mid[y * w..(y + 1) * w];
        for (a, &kv) in kern.iter().enumerate() {
            let src = &x[(y + a) * w..(y + a + 1) * w];
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += kv * s);
        }
    }
    let mut out = vec![0.0; ho * wo];
    for y in 0..ho {
        let dst = &mut out[y * wo..(y + 1) * wo];
        for (a, &kv) in kern.iter().enumerate() {
            let src = &mid[y * w + a..y * w + a + wo];
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += kv * s);
        }
    }
    out
}
