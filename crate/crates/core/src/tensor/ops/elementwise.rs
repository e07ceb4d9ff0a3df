use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::{record_op, DType, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn name(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
        }
    }
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    binary(BinOp::Add, a, b)
}

pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    binary(BinOp::Sub, a, b)
}

/// Elementwise product. Complex operands multiply as complex numbers; a
/// real scalar tensor broadcasts against any tensor.
pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    binary(BinOp::Mul, a, b)
}

/// Elementwise quotient of real tensors, or any tensor by a real scalar.
pub fn div(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    binary(BinOp::Div, a, b)
}

fn is_real_scalar(t: &Tensor) -> bool {
    t.dtype() == DType::Real && t.numel() == 1
}

fn binary(op: BinOp, a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() == b.shape() && a.dtype() == b.dtype() {
        return same_shape(op, a, b);
    }
    if is_real_scalar(b) {
        return with_scalar(op, a, b);
    }
    if is_real_scalar(a) {
        return match op {
            BinOp::Add | BinOp::Mul => with_scalar(op, b, a),
            BinOp::Sub => add(&scale(b, -1.0)?, a),
            BinOp::Div => Err(Error::invalid("div", "scalar numerator is not supported")),
        };
    }
    Err(Error::shape(op.name(), a.shape(), b.shape()))
}

fn same_shape(op: BinOp, a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (x, y) = (Arc::clone(a.data_arc()), Arc::clone(b.data_arc()));
    let complex = a.is_complex();
    if complex && op == BinOp::Div {
        return Err(Error::invalid("div", "complex division is not supported"));
    }
    let out: Vec<f64> = match (op, complex) {
        (BinOp::Add, _) => x.iter().zip(y.iter()).map(|(p, q)| p + q).collect(),
        (BinOp::Sub, _) => x.iter().zip(y.iter()).map(|(p, q)| p - q).collect(),
        (BinOp::Mul, false) => x.iter().zip(y.iter()).map(|(p, q)| p * q).collect(),
        (BinOp::Mul, true) => x
            .chunks_exact(2)
            .zip(y.chunks_exact(2))
            .flat_map(|(p, q)| [p[0] * q[0] - p[1] * q[1], p[0] * q[1] + p[1] * q[0]])
            .collect(),
        (BinOp::Div, _) => x.iter().zip(y.iter()).map(|(p, q)| p / q).collect(),
    };
    let value = a.with_data(out);
    record_op(value, &[a, b], move |g, needs| {
        let ga = needs[0].then(|| match (op, complex) {
            (BinOp::Add | BinOp::Sub, _) => g.to_vec(),
            (BinOp::Mul, false) => g.iter().zip(y.iter()).map(|(g, q)| g * q).collect(),
            (BinOp::Mul, true) => conj_product(g, &y),
            (BinOp::Div, _) => g.iter().zip(y.iter()).map(|(g, q)| g / q).collect(),
        });
        let gb = needs[1].then(|| match (op, complex) {
            (BinOp::Add, _) => g.to_vec(),
            (BinOp::Sub, _) => g.iter().map(|g| -g).collect(),
            (BinOp::Mul, false) => g.iter().zip(x.iter()).map(|(g, p)| g * p).collect(),
            (BinOp::Mul, true) => conj_product(g, &x),
            (BinOp::Div, _) => g
                .iter()
                .zip(x.iter().zip(y.iter()))
                .map(|(g, (p, q))| -g * p / (q * q))
                .collect(),
        });
        vec![ga, gb]
    })
}

/// `g * conj(w)` over interleaved buffers.
pub(crate) fn conj_product(g: &[f64], w: &[f64]) -> Vec<f64> {
    g.chunks_exact(2)
        .zip(w.chunks_exact(2))
        .flat_map(|(g, w)| [g[0] * w[0] + g[1] * w[1], g[1] * w[0] - g[0] * w[1]])
        .collect()
}

fn with_scalar(op: BinOp, a: &Tensor, s: &Tensor) -> Result<Tensor> {
    let sv = s.data()[0];
    let x = Arc::clone(a.data_arc());
    let stride = a.dtype().width();
    // Real scalars act on the real part only under add/sub.
    let out: Vec<f64> = match op {
        BinOp::Add | BinOp::Sub => {
            let d = if op == BinOp::Add { sv } else { -sv };
            x.iter()
                .enumerate()
                .map(|(i, v)| if i % stride == 0 { v + d } else { *v })
                .collect()
        }
        BinOp::Mul => x.iter().map(|v| v * sv).collect(),
        BinOp::Div => x.iter().map(|v| v / sv).collect(),
    };
    let value = a.with_data(out);
    record_op(value, &[a, s], move |g, needs| {
        let ga = needs[0].then(|| match op {
            BinOp::Add | BinOp::Sub => g.to_vec(),
            BinOp::Mul => g.iter().map(|g| g * sv).collect(),
            BinOp::Div => g.iter().map(|g| g / sv).collect(),
        });
        let gs = needs[1].then(|| {
            let v = match op {
                BinOp::Add => g.iter().step_by(stride).sum(),
                BinOp::Sub => -g.iter().step_by(stride).sum::<f64>(),
                BinOp::Mul => g.iter().zip(x.iter()).map(|(g, v)| g * v).sum(),
                BinOp::Div => -g.iter().zip(x.iter()).map(|(g, v)| g * v).sum::<f64>() / (sv * sv),
            };
            vec![v]
        });
        vec![ga, gs]
    })
}

/// Multiplies every component by a constant.
pub fn scale(a: &Tensor, c: f64) -> Result<Tensor> {
    let value = a.with_data(a.data().iter().map(|v| v * c).collect());
    record_op(value, &[a], move |g, _| {
        vec![Some(g.iter().map(|g| g * c).collect())]
    })
}

/// Adds a constant to every element (to the real part of complex elements).
pub fn add_scalar(a: &Tensor, c: f64) -> Result<Tensor> {
    let stride = a.dtype().width();
    let value = a.with_data(
        a.data()
            .iter()
            .enumerate()
            .map(|(i, v)| if i % stride == 0 { v + c } else { *v })
            .collect(),
    );
    record_op(value, &[a], |g, _| vec![Some(g.to_vec())])
}

pub fn leaky_relu(x: &Tensor, slope: f64) -> Result<Tensor> {
    x.expect_dtype("leaky_relu", DType::Real)?;
    let input = Arc::clone(x.data_arc());
    let value = x.with_data(
        input
            .iter()
            .map(|&v| if v > 0.0 { v } else { slope * v })
            .collect(),
    );
    record_op(value, &[x], move |g, _| {
        vec![Some(
            g.iter()
                .zip(input.iter())
                .map(|(g, &v)| if v > 0.0 { *g } else { slope * g })
                .collect(),
        )]
    })
}

/// `ln(1 + e^x)`, computed without overflow.
pub fn softplus(x: &Tensor) -> Result<Tensor> {
    x.expect_dtype("softplus", DType::Real)?;
    let input = Arc::clone(x.data_arc());
    let value = x.with_data(input.iter().map(|&v| softplus_scalar(v)).collect());
    record_op(value, &[x], move |g, _| {
        vec![Some(
            g.iter().zip(input.iter()).map(|(g, &v)| g * sigmoid(v)).collect(),
        )]
    })
}

pub fn softplus_scalar(v: f64) -> f64 {
    v.max(0.0) + (-v.abs()).exp().ln_1p()
}

/// Inverse of [`softplus_scalar`] for positive arguments.
pub fn softplus_inverse(y: f64) -> f64 {
    // y + ln(1 - e^-y), stable for both small and large y
    y + (-(-y).exp()).ln_1p()
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Soft-thresholding `S_t(x) = sign(x) max(|x| - t, 0)`; complex inputs keep
/// their phase and shrink their magnitude.
pub fn soft_threshold(x: &Tensor, t: f64) -> Result<Tensor> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::invalid(
            "soft_threshold",
            format!("threshold must be >= 0, got {t}"),
        ));
    }
    let input = Arc::clone(x.data_arc());
    match x.dtype() {
        DType::Real => {
            let value = x.with_data(
                input
                    .iter()
                    .map(|&v| v.signum() * (v.abs() - t).max(0.0))
                    .collect(),
            );
            record_op(value, &[x], move |g, _| {
                vec![Some(
                    g.iter()
                        .zip(input.iter())
                        .map(|(g, v)| if v.abs() > t { *g } else { 0.0 })
                        .collect(),
                )]
            })
        }
        DType::Complex => {
            let value = x.with_data(
                input
                    .chunks_exact(2)
                    .flat_map(|z| {
                        let r = z[0].hypot(z[1]);
                        if r > t {
                            let f = 1.0 - t / r;
                            [z[0] * f, z[1] * f]
                        } else {
                            [0.0, 0.0]
                        }
                    })
                    .collect(),
            );
            record_op(value, &[x], move |g, _| {
                let out = g
                    .chunks_exact(2)
                    .zip(input.chunks_exact(2))
                    .flat_map(|(g, z)| {
                        let r = z[0].hypot(z[1]);
                        if r <= t {
                            return [0.0, 0.0];
                        }
                        // J = (1 - t/r) I + (t / r^3) z z^T
                        let proj = t * (g[0] * z[0] + g[1] * z[1]) / (r * r * r);
                        let f = 1.0 - t / r;
                        [f * g[0] + proj * z[0], f * g[1] + proj * z[1]]
                    })
                    .collect();
                vec![Some(out)]
            })
        }
    }
}

/// Identity on values; the result carries no tape record, so nothing
/// upstream of it receives gradient through this path.
pub fn stop_gradient(x: &Tensor) -> Tensor {
    x.detach()
}

pub fn reshape(x: &Tensor, shape: &[usize]) -> Result<Tensor> {
    if shape.iter().product::<usize>() != x.numel() {
        return Err(Error::shape("reshape", x.shape(), shape));
    }
    let value = Tensor::from_parts(shape.to_vec(), x.dtype(), x.to_vec());
    record_op(value, &[x], |g, _| vec![Some(g.to_vec())])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{backward, Tape};

    #[test]
    fn add_and_scale_values() {
        let a = Tensor::real(&[2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::real(&[2], vec![3.0, 4.0]).unwrap();
        assert_eq!(add(&a, &b).unwrap().data(), &[4.0, 6.0]);
        assert_eq!(scale(&a, 0.0).unwrap().data(), &[0.0, 0.0]);
        assert_eq!(sub(&a, &b).unwrap().data(), &[-2.0, -2.0]);
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let a = Tensor::zeros(&[2, 3], DType::Real);
        let b = Tensor::zeros(&[3, 2], DType::Real);
        let msg = add(&a, &b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[3, 2]"), "{msg}");
    }

    #[test]
    fn scalar_broadcast_both_sides() {
        let a = Tensor::real(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let s = Tensor::scalar(2.0);
        assert_eq!(mul(&s, &a).unwrap().data(), &[2.0, 4.0, 6.0]);
        assert_eq!(sub(&s, &a).unwrap().data(), &[1.0, 0.0, -1.0]);
        assert_eq!(div(&a, &s).unwrap().data(), &[0.5, 1.0, 1.5]);
        assert!(div(&s, &a).is_err());
    }

    #[test]
    fn leaky_relu_definition() {
        let x = Tensor::real(&[2], vec![-1.0, 2.0]).unwrap();
        assert_eq!(leaky_relu(&x, 0.2).unwrap().data(), &[-0.2, 2.0]);
    }

    #[test]
    fn soft_threshold_cases() {
        let x = Tensor::real(&[3], vec![1.2, -0.3, -2.0]).unwrap();
        let y = soft_threshold(&x, 0.5).unwrap();
        assert!((y.data()[0] - 0.7).abs() < 1e-15);
        assert_eq!(y.data()[1], 0.0);
        assert!((y.data()[2] + 1.5).abs() < 1e-15);
        assert_eq!(soft_threshold(&x, 0.0).unwrap().data(), x.data());
        assert!(soft_threshold(&x, -0.1).is_err());

        let z = Tensor::complex(&[1], vec![3.0, 4.0]).unwrap();
        let s = soft_threshold(&z, 1.0).unwrap();
        assert!((s.data()[0] - 2.4).abs() < 1e-15 && (s.data()[1] - 3.2).abs() < 1e-15);
    }

    #[test]
    fn stop_gradient_is_bitwise_identity_and_blocks_gradient() {
        let tape = Tape::new();
        let p = tape.leaf(&Tensor::real(&[2], vec![0.1, -3.7]).unwrap());
        let f = mul(&p, &p).unwrap();
        let sg = stop_gradient(&f);
        assert_eq!(sg.data(), f.data());
        assert!(!sg.is_recorded());

        let loss = super::super::sum(&sg).unwrap();
        let g = backward(&loss).unwrap();
        assert_eq!(g.get(&p).data(), &[0.0, 0.0]);

        let loss = super::super::sum(&add(&f, &sg).unwrap()).unwrap();
        let g = backward(&loss).unwrap();
        assert_eq!(g.get(&p).data(), &[0.2, -7.4]);
    }

    #[test]
    fn softplus_inverse_round_trip() {
        for y in [1e-6, 0.5, 1.0, 30.0] {
            assert!((softplus_scalar(softplus_inverse(y)) - y).abs() < 1e-12 * y.max(1.0));
        }
    }
}
