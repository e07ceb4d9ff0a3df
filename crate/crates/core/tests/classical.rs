mod common;

use common::{random_complex, rng};
use dunmri_core::classical::*;
use dunmri_core::physics::*;
use dunmri_core::tensor::ops;
use dunmri_core::{DType, Error, Tensor};

fn s(v: f64) -> Tensor {
    Tensor::scalar(v)
}

#[test]
fn update_y_fixed_point_and_half() {
    let mut r = rng(1);
    let k = random_complex(&[1, 8, 8], &mut r);
    let zero = Tensor::zeros(&[1, 8, 8], DType::Complex);
    for sigma in [0.1, 0.5, 3.0] {
        let y = update_y(&zero, &k, &k, &s(sigma)).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }
    let u = random_complex(&[1, 8, 8], &mut r);
    let y = update_y(&zero, &u, &zero, &s(1.0)).unwrap();
    for (a, b) in y.data().iter().zip(u.data()) {
        assert_eq!(*a, b / 2.0);
    }
}

#[test]
fn update_rules_match_scalar_loops() {
    let mut r = rng(2);
    let y = random_complex(&[1, 8, 8], &mut r);
    let az = random_complex(&[1, 8, 8], &mut r);
    let k = random_complex(&[1, 8, 8], &mut r);
    let sigma = 0.37;
    let got = update_y(&y, &az, &k, &s(sigma)).unwrap();
    for i in 0..y.data().len() {
        let want = (y.data()[i] + sigma * (az.data()[i] - k.data()[i])) / (1.0 + sigma);
        assert!((got.data()[i] - want).abs() <= 1e-15 * want.abs().max(1.0));
    }

    let xn = random_complex(&[8, 8], &mut r);
    let x = random_complex(&[8, 8], &mut r);
    let theta = 0.8;
    let z = extrapolate(&xn, &x, &s(theta)).unwrap();
    for i in 0..x.data().len() {
        let want = xn.data()[i] + theta * (xn.data()[i] - x.data()[i]);
        assert!((z.data()[i] - want).abs() <= 1e-15 * want.abs().max(1.0));
    }

    let t = 0.3;
    let p = prox_soft(&x, t).unwrap();
    for (i, zc) in x.data().chunks_exact(2).enumerate() {
        let m = (zc[0] * zc[0] + zc[1] * zc[1]).sqrt();
        let f = if m > t { (m - t) / m } else { 0.0 };
        for c in 0..2 {
            let want = zc[c] * f;
            assert!((p.data()[2 * i + c] - want).abs() <= 1e-15 * want.abs().max(1.0));
        }
    }
}

#[test]
fn extrapolate_edge_cases() {
    let x = Tensor::real(&[1], vec![0.0]).unwrap();
    let xn = Tensor::real(&[1], vec![1.0]).unwrap();
    assert_eq!(extrapolate(&xn, &x, &s(1.0)).unwrap().data(), &[2.0]);
    assert_eq!(extrapolate(&xn, &x, &s(0.0)).unwrap().data(), &[1.0]);
    assert_eq!(extrapolate(&x, &x, &s(5.0)).unwrap().data(), &[0.0]);
}

#[test]
fn prox_edge_cases() {
    let mut r = rng(3);
    let x = random_complex(&[8, 8], &mut r);
    assert_eq!(prox_soft(&x, 0.0).unwrap().data(), x.data());
    assert!(prox_soft(&x, 2.0).unwrap().data().iter().all(|&v| v == 0.0));
}

#[test]
fn certificate_gate() {
    assert!(matches!(
        CPPAConfig::new(1.0, 1.0, 1.0, 0.0, 10, 1e-8),
        Err(Error::Certificate { .. })
    ));
    assert!(matches!(
        CPPAConfig::new(2.0, 0.6, 1.0, 0.0, 10, 1e-8),
        Err(Error::Certificate { .. })
    ));
    assert!(CPPAConfig::new(0.99, 1.0, 1.0, 0.0, 10, 1e-8).is_ok());
    let cfg = CPPAConfig {
        tau: 1.0,
        sigma: 1.5,
        ..Default::default()
    };
    let m = make_mask(8, 1, MaskPattern::Random, 0).unwrap();
    let k = KSpaceData::new(Tensor::zeros(&[1, 8, 8], DType::Complex), m).unwrap();
    assert!(matches!(solve(&k, None, &cfg), Err(Error::Certificate { .. })));
}

#[test]
fn full_mask_converges_to_inverse_transform() {
    let x = make_phantom(32, 32, PhantomKind::SheppLogan, 0).unwrap();
    let m = make_mask(32, 1, MaskPattern::Equispaced, 0).unwrap();
    let k = forward_single(&x, &m).unwrap();
    let cfg = CPPAConfig {
        threshold: 0.0,
        max_iters: 200,
        ..Default::default()
    };
    let (img, trace) = solve(&k, None, &cfg).unwrap();
    assert!(trace.iterations() <= 200);
    assert!(trace.final_residual() < 1e-8, "{}", trace.final_residual());
    let exact = adjoint_single(&k).unwrap();
    assert!(ops::sub(&img, &exact).unwrap().norm() < 1e-8);
    assert_eq!(trace.residual.len(), trace.delta.len());
}

#[test]
fn zero_data_stays_zero() {
    let m = make_mask(16, 4, MaskPattern::Random, 0).unwrap();
    let k = KSpaceData::new(Tensor::zeros(&[1, 16, 16], DType::Complex), m).unwrap();
    let (img, trace) = solve(&k, None, &CPPAConfig::default()).unwrap();
    assert!(img.data().iter().all(|&v| v == 0.0));
    assert!(trace.residual.iter().all(|&v| v == 0.0));
}

#[test]
fn consistent_start_is_stationary() {
    let mut r = rng(4);
    let m = make_mask(16, 4, MaskPattern::Random, 1).unwrap();
    let p = Physics::single(&m, 16);
    let x0 = random_complex(&[16, 16], &mut r);
    let k = p.forward(&x0).unwrap();
    let cfg = CPPAConfig {
        threshold: 0.0,
        max_iters: 20,
        tol: 0.0,
        ..Default::default()
    };
    let (x, trace) = solve_from(&p, &k, &x0, &cfg).unwrap();
    assert!(ops::sub(&x, &x0).unwrap().norm() < 1e-14 * x0.norm());
    assert!(trace.delta.iter().all(|&d| d < 1e-14));
}

#[test]
fn undersampled_phantom_residual_drops_hundredfold() {
    let x = make_phantom(64, 64, PhantomKind::SheppLogan, 0).unwrap();
    let m = make_mask(64, 4, MaskPattern::Random, 0).unwrap();
    let k = forward_single(&x, &m).unwrap();
    let cfg = CPPAConfig {
        threshold: 1e-3,
        ..Default::default()
    };
    let (_, trace) = solve(&k, None, &cfg).unwrap();
    assert!(trace.final_residual() < trace.initial_residual / 100.0);
    // multi-coil with synthetic maps
    let sens = synthetic_sensitivities(4, 64, 64, 0).unwrap();
    let k = forward_multi(&x, &sens, &m).unwrap();
    let (_, trace) = solve(&k, Some(&sens), &cfg).unwrap();
    assert!(trace.final_residual() <= trace.initial_residual);
}

#[test]
fn trace_csv_layout() {
    let trace = SolveTrace {
        initial_residual: 2.0,
        residual: vec![1.0, 0.5],
        delta: vec![0.3, 0.1],
    };
    let csv = trace.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "iter,residual,delta");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("2,"));
}
