mod common;

use common::{naive_dft2, random_complex, random_real, real_dot, rng};
use dunmri_core::tensor::gradcheck::{grad_check, GradCheckOptions};
use dunmri_core::tensor::{backward, ops, Tape};
use dunmri_core::{DType, Tensor};
use proptest::prelude::*;
use std::sync::Arc;

fn opts() -> GradCheckOptions {
    GradCheckOptions {
        step: 1e-6,
        tolerance: 1e-6,
        floor: 1e-4,
        ..Default::default()
    }
}

fn named(ts: Vec<Tensor>) -> Vec<(String, Tensor)> {
    ts.into_iter()
        .enumerate()
        .map(|(i, t)| (format!("p{i}"), t))
        .collect()
}

fn assert_passes(report: &dunmri_core::tensor::gradcheck::GradCheckReport) {
    for p in &report.params {
        assert!(
            p.max_rel_err < report.options.tolerance,
            "{}: rel err {:e} (|a|max {:e})",
            p.name,
            p.max_rel_err,
            p.max_analytic
        );
    }
}

#[test]
fn sum_of_squares_gradient() {
    let tape = Tape::new();
    let p = tape.leaf(&Tensor::real(&[2], vec![1.0, 2.0]).unwrap());
    let loss = ops::sum(&ops::mul(&p, &p).unwrap()).unwrap();
    let g = backward(&loss).unwrap();
    assert_eq!(g.get(&p).data(), &[2.0, 4.0]);
}

#[test]
fn product_gradient_equals_other_factor() {
    let mut r = rng(1);
    let a = random_real(&[5], &mut r);
    let b = random_real(&[5], &mut r);
    let tape = Tape::new();
    let al = tape.leaf(&a);
    let loss = ops::sum(&ops::mul(&al, &b).unwrap()).unwrap();
    let g = backward(&loss).unwrap();
    assert_eq!(g.get(&al).data(), b.data());
    let report = grad_check(|p| ops::sum(&ops::mul(&p[0], &b)?), &named(vec![a]), &opts()).unwrap();
    assert_passes(&report);
}

#[test]
fn backward_rejects_non_scalar_and_complex() {
    let tape = Tape::new();
    let p = tape.leaf(&Tensor::zeros(&[2], DType::Real));
    assert!(backward(&p).is_err());
    let c = tape.leaf(&Tensor::zeros(&[1], DType::Complex));
    assert!(backward(&c).is_err());
}

#[test]
fn fft_matches_naive_dft_and_round_trips() {
    let mut r = rng(2);
    let x = random_complex(&[8, 8], &mut r);
    let f = ops::fft2(&x).unwrap();
    let oracle = naive_dft2(&x, false);
    for (a, b) in f.data().iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-12);
    }
    let back = ops::ifft2(&f).unwrap();
    let err: f64 = back
        .data()
        .iter()
        .zip(x.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    assert!(err / x.norm() < 1e-12);
    assert!(((f.norm() - x.norm()) / x.norm()).abs() < 1e-12);
    let inv_oracle = naive_dft2(&x, true);
    for (a, b) in ops::ifft2(&x).unwrap().data().iter().zip(&inv_oracle) {
        assert!((a - b).abs() < 1e-12);
    }
}

/// Checks |<Ax, y> - <x, A^T y>| with A^T taken from the tape.
fn adjoint_gap(forward: impl Fn(&Tensor) -> Tensor, x: &Tensor, y: &Tensor) -> f64 {
    let tape = Tape::new();
    let xl = tape.leaf(x);
    let ax = forward(&xl);
    let lhs = real_dot(&ax, y).unwrap();
    let g = backward(&lhs).unwrap();
    let rhs = x.dot_re(&g.get(&xl)).unwrap();
    (lhs.item().unwrap() - rhs).abs() / (x.norm() * y.norm())
}

#[test]
fn adjoint_identities_of_linear_ops() {
    let mut r = rng(3);
    for _ in 0..20 {
        let x = random_complex(&[3, 16, 16], &mut r);
        let y = random_complex(&[3, 16, 16], &mut r);
        assert!(adjoint_gap(|t| ops::fft2(t).unwrap(), &x, &y) < 1e-10);
        assert!(adjoint_gap(|t| ops::ifft2(t).unwrap(), &x, &y) < 1e-10);
        // explicit adjoint pair: <F x, y> = <x, F^H y>
        let lhs = ops::fft2(&x).unwrap().dot_complex(&y).unwrap();
        let rhs = x.dot_complex(&ops::ifft2(&y).unwrap()).unwrap();
        assert!((lhs.0 - rhs.0).abs().max((lhs.1 - rhs.1).abs()) < 1e-10 * x.norm() * y.norm());

        let cols: Vec<f64> = (0..16).map(|i| (i % 3 == 0) as u8 as f64).collect();
        let cols = Arc::new(cols);
        assert!(adjoint_gap(|t| ops::apply_mask(t, &cols).unwrap(), &x, &y) < 1e-10);

        let w = random_real(&[4, 3, 3, 3], &mut r);
        let xr = random_real(&[3, 16, 16], &mut r);
        let yr = random_real(&[4, 16, 16], &mut r);
        assert!(adjoint_gap(|t| ops::conv2d(t, &w, None).unwrap(), &xr, &yr) < 1e-10);
    }
}

fn naive_conv(
    x: &[f64],
    w: &[f64],
    b: &[f64],
    cin: usize,
    cout: usize,
    h: usize,
    wd: usize,
    k: usize,
) -> Vec<f64> {
    let p = (k / 2) as isize;
    let mut out = vec![0.0; cout * h * wd];
    for co in 0..cout {
        for y in 0..h as isize {
            for xx in 0..wd as isize {
                let mut acc = b[co];
                for ci in 0..cin {
                    for ky in 0..k as isize {
                        for kx in 0..k as isize {
                            let (sy, sx) = (y + ky - p, xx + kx - p);
                            if sy < 0 || sx < 0 || sy >= h as isize || sx >= wd as isize {
                                continue;
                            }
                            let wi = ((co * cin + ci) * k + ky as usize) * k + kx as usize;
                            acc += w[wi] * x[(ci * h + sy as usize) * wd + sx as usize];
                        }
                    }
                }
                out[(co * h + y as usize) * wd + xx as usize] = acc;
            }
        }
    }
    out
}

#[test]
fn conv_layers_match_direct_loops() {
    let mut r = rng(31);
    for (cin, cout, h, w, k) in [(3, 5, 7, 9, 3), (2, 4, 8, 8, 1), (1, 2, 6, 5, 5), (4, 3, 2, 2, 3)] {
        let x = random_real(&[cin, h, w], &mut r);
        let wt = random_real(&[cout, cin, k, k], &mut r);
        let b = random_real(&[cout], &mut r);
        let got = ops::conv2d(&x, &wt, Some(&b)).unwrap();
        assert_eq!(got.shape(), &[cout, h, w]);
        let want = naive_conv(x.data(), wt.data(), b.data(), cin, cout, h, w, k);
        for (g, e) in got.data().iter().zip(&want) {
            assert!((g - e).abs() < 1e-12);
        }
        let no_bias = ops::conv2d(&x, &wt, None).unwrap();
        let zero = vec![0.0; cout];
        let want = naive_conv(x.data(), wt.data(), &zero, cin, cout, h, w, k);
        for (g, e) in no_bias.data().iter().zip(&want) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    let (cin, cout, h, w) = (3, 2, 4, 5);
    let x = random_real(&[cin, h, w], &mut r);
    let wt = random_real(&[cin, cout, 2, 2], &mut r);
    let b = random_real(&[cout], &mut r);
    let got = ops::transpose_conv_up2(&x, &wt, Some(&b)).unwrap();
    assert_eq!(got.shape(), &[cout, 2 * h, 2 * w]);
    for co in 0..cout {
        for oy in 0..2 * h {
            for ox in 0..2 * w {
                let mut want = b.data()[co];
                for ci in 0..cin {
                    let tap = ((ci * cout + co) * 2 + oy % 2) * 2 + ox % 2;
                    want += wt.data()[tap] * x.data()[(ci * h + oy / 2) * w + ox / 2];
                }
                let g = got.data()[(co * 2 * h + oy) * 2 * w + ox];
                assert!((g - want).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn elementwise_and_complex_ops_gradcheck() {
    let mut r = rng(4);
    let a = random_complex(&[4, 4], &mut r);
    let b = random_complex(&[4, 4], &mut r);
    let s = Tensor::scalar(0.7);
    let report = grad_check(
        |p| {
            let prod = ops::mul(&p[0], &p[1])?;
            let scaled = ops::div(&ops::mul(&prod, &p[2])?, &ops::add_scalar(&p[2], 1.0)?)?;
            let f = ops::fft2(&ops::sub(&scaled, &p[0])?)?;
            let t = ops::soft_threshold(&f, 0.05)?;
            let m = ops::magnitude(&ops::add(&ops::ifft2(&t)?, &p[1])?)?;
            ops::mean(&ops::mul(&m, &m)?)
        },
        &named(vec![a, b, s]),
        &opts(),
    )
    .unwrap();
    assert_passes(&report);
}

#[test]
fn real_ops_gradcheck() {
    let mut r = rng(5);
    let x = random_real(&[2, 8, 8], &mut r);
    let report = grad_check(
        |p| {
            let c = ops::channels_to_complex(&p[0])?;
            let back = ops::complex_to_channels(&ops::fft2(&c)?)?;
            let re = ops::real_part(&ops::ifft2(&ops::to_complex(&ops::leaky_relu(&back, 0.2)?)?)?)?;
            let sp = ops::softplus(&re)?;
            let q = ops::div(&sp, &ops::add_scalar(&ops::mul(&re, &re)?, 1.0)?)?;
            let f =
                ops::separable_filter_valid(&ops::reshape(&ops::avg_pool2(&q)?, &[8, 4])?, &[0.3, 0.5, 0.2])?;
            ops::sum(&ops::mul(&f, &f)?)
        },
        &named(vec![x]),
        &opts(),
    )
    .unwrap();
    assert_passes(&report);
}

#[test]
fn network_layers_gradcheck() {
    let mut r = rng(6);
    let x = random_real(&[2, 8, 8], &mut r);
    let w = random_real(&[3, 2, 3, 3], &mut r);
    let b = random_real(&[3], &mut r);
    let gamma = random_real(&[3], &mut r);
    let beta = random_real(&[3], &mut r);
    let up = random_real(&[3, 2, 2, 2], &mut r);
    let upb = random_real(&[2], &mut r);
    let report = grad_check(
        |p| {
            let h = ops::conv2d(&p[0], &p[1], Some(&p[2]))?;
            let h = ops::instance_norm(&h, &p[3], &p[4], 1e-5)?;
            let h = ops::leaky_relu(&h, 0.2)?;
            let d = ops::avg_pool2(&h)?;
            let u = ops::transpose_conv_up2(&d, &p[5], Some(&p[6]))?;
            let cat = ops::concat_channels(&u, &p[0])?;
            let y = ops::mul(&cat, &cat)?;
            ops::mean(&y)
        },
        &named(vec![x, w, b, gamma, beta, up, upb]),
        &opts(),
    )
    .unwrap();
    assert_passes(&report);
}

#[test]
fn coil_ops_gradcheck_and_adjoint() {
    let mut r = rng(7);
    let x = random_complex(&[8, 8], &mut r);
    let sens = random_complex(&[3, 8, 8], &mut r);
    let y = random_complex(&[3, 8, 8], &mut r);
    assert!(adjoint_gap(|t| ops::coil_expand(t, &sens).unwrap(), &x, &y) < 1e-10);
    assert!(adjoint_gap(|t| ops::coil_combine(t, &sens).unwrap(), &y, &x) < 1e-10);
    let report = grad_check(
        |p| {
            let k = ops::fft2(&ops::coil_expand(&p[0], &sens)?)?;
            let img = ops::coil_combine(&ops::ifft2(&k)?, &sens)?;
            ops::mean(&ops::magnitude(&img)?)
        },
        &named(vec![x]),
        &opts(),
    )
    .unwrap();
    assert_passes(&report);
}

#[test]
fn stop_gradient_path_is_flagged() {
    let mut r = rng(8);
    let x = random_real(&[4], &mut r);
    let report = grad_check(
        |p| ops::sum(&ops::stop_gradient(&ops::mul(&p[0], &p[0])?)),
        &named(vec![x]),
        &opts(),
    )
    .unwrap();
    assert!(!report.passed());
    assert_eq!(report.stop_gradient_mismatches().len(), 1);
    assert_eq!(report.params[0].max_analytic, 0.0);
}

#[test]
fn identity_sum_has_zero_error() {
    let mut r = rng(9);
    let report = grad_check(
        |p| ops::sum(&p[0]),
        &named(vec![random_real(&[6], &mut r)]),
        &opts(),
    )
    .unwrap();
    assert!(report.max_rel_err() < 1e-9);
}

#[test]
fn repeated_backward_is_bitwise_identical() {
    let mut r = rng(10);
    let tape = Tape::new();
    let x = tape.leaf(&random_real(&[2, 8, 8], &mut r));
    let w = tape.leaf(&random_real(&[2, 2, 3, 3], &mut r));
    let loss = ops::mean(&ops::leaky_relu(&ops::conv2d(&x, &w, None).unwrap(), 0.2).unwrap()).unwrap();
    let g1 = backward(&loss).unwrap();
    let g2 = backward(&loss).unwrap();
    assert_eq!(g1.get(&w).data(), g2.get(&w).data());
    assert_eq!(g1.get(&x).data(), g2.get(&x).data());
}

#[test]
fn mixing_tapes_is_an_error() {
    let (t1, t2) = (Tape::new(), Tape::new());
    let a = t1.leaf(&Tensor::scalar(1.0));
    let b = t2.leaf(&Tensor::scalar(2.0));
    assert!(ops::add(&a, &b).is_err());
}

proptest! {
    #[test]
    fn fft_round_trip_and_isometry(seed in 0u64..1000, log_h in 0u32..5, log_w in 0u32..5) {
        let mut r = rng(seed);
        let x = random_complex(&[1 << log_h, 1 << log_w], &mut r);
        let f = ops::fft2(&x).unwrap();
        prop_assert!(((f.norm() - x.norm()) / x.norm()).abs() < 1e-12);
        let back = ops::ifft2(&f).unwrap();
        for (a, b) in back.data().iter().zip(x.data()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stop_gradient_is_identity(values in proptest::collection::vec(-1e6f64..1e6, 1..32)) {
        let n = values.len();
        let t = Tensor::real(&[n], values).unwrap();
        let s = ops::stop_gradient(&t);
        prop_assert_eq!(s.data(), t.data());
        prop_assert!(!s.is_recorded());
    }
}
