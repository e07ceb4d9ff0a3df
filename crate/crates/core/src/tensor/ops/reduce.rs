use crate::error::Result;
use crate::tensor::{record_op, Tensor};

/// Sum of all elements; complex tensors give a complex scalar.
pub fn sum(x: &Tensor) -> Result<Tensor> {
    reduce(x, 1.0)
}

/// Mean over all elements.
pub fn mean(x: &Tensor) -> Result<Tensor> {
    reduce(x, 1.0 / x.numel().max(1) as f64)
}

fn reduce(x: &Tensor, factor: f64) -> Result<Tensor> {
    let stride = x.dtype().width();
    let mut acc = vec![0.0; stride];
    for chunk in x.data().chunks_exact(stride) {
        for (a, v) in acc.iter_mut().zip(chunk) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a *= factor);
    let len = x.data().len();
    let value = Tensor::from_parts(Vec::new(), x.dtype(), acc);
    record_op(value, &[x], move |g, _| {
        vec![Some((0..len).map(|i| g[i % stride] * factor).collect())]
    })
}
