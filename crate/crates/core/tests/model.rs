mod common;

use common::toy::{generic_params, phantom_sample, toy_config};
use common::{random_complex, random_real, real_dot, rng};
use dunmri_core::classical::update_y;
use dunmri_core::metrics::SsimParams;
use dunmri_core::model::*;
use dunmri_core::physics::*;
use dunmri_core::ssl::{loss_gradcheck, sample_gradients, LossWeights, PartitionSpec};
use dunmri_core::tensor::gradcheck::{grad_check, ErrorScale, GradCheckOptions};
use dunmri_core::tensor::ops;
use dunmri_core::{DType, Tensor};
use proptest::prelude::*;

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

/// Same parameters with every ProxNet output layer set to zero, so each
/// stage's correction vanishes.
fn zero_output(p: &ModelParams) -> ModelParams {
    p.map(|name, t| {
        if name.ends_with("out.weight") {
            Tensor::zeros(t.shape(), t.dtype())
        } else {
            t.clone()
        }
    })
}

fn group_opts(entries: usize) -> GradCheckOptions {
    GradCheckOptions {
        step: 1e-6,
        scale: ErrorScale::Group,
        tolerance: 1e-5,
        floor: 1e-8,
        max_entries: Some(entries),
        ..Default::default()
    }
}

#[test]
fn parameter_count_matches_table() {
    // (K, base channels, levels, size) -> count, tallied layer by layer.
    let table = [
        ((1, 2, 1, 4), 259),
        ((2, 4, 4, 16), 109_394),
        ((4, 8, 4, 32), 885_300),
        ((4, 8, 4, 64), 1_020_468),
        ((8, 8, 4, 320), 10_691_688),
    ];
    for ((k, c, l, n), expected) in table {
        let cfg = toy_config(k, c, n, l);
        assert_eq!(cfg.parameter_count(), expected, "{k} {c} {l} {n}");
        if n <= 64 {
            assert_eq!(ModelParams::init(&cfg, 0).unwrap().parameter_count(), expected);
        }
    }
}

#[test]
fn global_filters_match_level_dims() {
    let cfg = ModelConfig::default();
    let p = ModelParams::init(&cfg, 3).unwrap();
    for stage in &p.stages {
        for (l, e) in stage.proxnet.encoder.iter().enumerate() {
            let cin = if l == 0 { 2 } else { cfg.channels(l - 1) };
            assert_eq!(e.global_filter.shape(), &[cin, 64 >> l, 64 >> l]);
            assert_eq!(e.global_filter.dtype(), DType::Complex);
        }
    }
}

#[test]
fn step_sizes_start_at_configured_values() {
    let p = ModelParams::init(&ModelConfig::default(), 0).unwrap();
    for s in &p.stages {
        assert!((s.tau().unwrap().item().unwrap() - 0.5).abs() < 1e-12);
        assert!((s.sigma().unwrap().item().unwrap() - 0.5).abs() < 1e-12);
        assert!((s.theta().unwrap().item().unwrap() - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn step_sizes_are_positive(raw in -30.0f64..30.0) {
        let mut p = ModelParams::init(&toy_config(1, 2, 4, 1), 0).unwrap();
        p.stages[0].tau_raw = Tensor::scalar(raw);
        p.stages[0].sigma_raw = Tensor::scalar(raw);
        p.stages[0].theta_raw = Tensor::scalar(raw);
        let s = &p.stages[0];
        for v in [s.tau(), s.sigma(), s.theta()] {
            prop_assert!(v.unwrap().item().unwrap() > 0.0);
        }
    }
}

#[test]
fn proxnet_preserves_shape() {
    for n in [64, 32] {
        let cfg = toy_config(1, 8, n, 4);
        let p = generic_params(&cfg, 1);
        let v = random_real(&[2, n, n], &mut rng(n as u64));
        let out = proxnet_apply(&v, &p.stages[0].proxnet, &cfg).unwrap();
        assert_eq!(out.shape(), &[2, n, n]);
    }
}

#[test]
fn proxnet_maps_zero_to_zero() {
    let cfg = toy_config(1, 4, 32, 4);
    let p = ModelParams::init(&cfg, 5).unwrap();
    let zero = Tensor::zeros(&[2, 32, 32], DType::Real);
    let out = proxnet_apply(&zero, &p.stages[0].proxnet, &cfg).unwrap();
    assert!(out.data().iter().all(|&v| v == 0.0));
}

#[test]
fn proxnet_rejects_small_inputs() {
    let cfg = toy_config(1, 4, 16, 4);
    let p = ModelParams::init(&cfg, 0).unwrap();
    let v = Tensor::zeros(&[2, 8, 8], DType::Real);
    assert!(proxnet_apply(&v, &p.stages[0].proxnet, &cfg).is_err());
    let v = Tensor::zeros(&[3, 16, 16], DType::Real);
    assert!(proxnet_apply(&v, &p.stages[0].proxnet, &cfg).is_err());
    let cfg_small = toy_config(1, 4, 8, 4);
    assert!(ModelParams::init(&cfg_small, 0).is_err());
}

/// `conv1x1(concat(spatial, freq)) + proj(f)` with the spatial branch built
/// from the same ops as the block.
fn sffe_with_freq(f: &Tensor, p: &SffeParams, cfg: &ModelConfig, freq: &Tensor) -> Tensor {
    let s = ops::conv2d(f, &p.spatial_weight, None).unwrap();
    let s = ops::instance_norm(&s, &p.norm_gamma, &p.norm_beta, cfg.norm_eps).unwrap();
    let s = ops::leaky_relu(&s, cfg.slope).unwrap();
    let fused = ops::conv2d(
        &ops::concat_channels(&s, freq).unwrap(),
        &p.fuse_weight,
        Some(&p.fuse_bias),
    )
    .unwrap();
    ops::add(&fused, &ops::conv2d(f, &p.proj_weight, None).unwrap()).unwrap()
}

#[test]
fn sffe_unit_filter_passes_input_and_zero_filter_blocks_it() {
    let cfg = toy_config(1, 4, 16, 2);
    let base = generic_params(&cfg, 2).stages[0].proxnet.encoder[1].clone();
    let f = random_real(&[4, 8, 8], &mut rng(9));
    let mut ones = vec![0.0; 2 * 4 * 64];
    ones.iter_mut().step_by(2).for_each(|v| *v = 1.0);

    let mut p = base.clone();
    p.global_filter = Tensor::complex(&[4, 8, 8], ones).unwrap();
    let got = sffe_block(&f, &p, &cfg).unwrap();
    let want = sffe_with_freq(&f, &p, &cfg, &f);
    assert!(max_rel_diff(got.data(), want.data()) < 1e-13);

    p.global_filter = Tensor::zeros(&[4, 8, 8], DType::Complex);
    let got = sffe_block(&f, &p, &cfg).unwrap();
    let want = sffe_with_freq(&f, &p, &cfg, &Tensor::zeros(&[4, 8, 8], DType::Real));
    assert!(max_rel_diff(got.data(), want.data()) < 1e-15);
}

#[test]
fn sffe_rejects_mismatched_input() {
    let cfg = toy_config(1, 4, 16, 2);
    let p = ModelParams::init(&cfg, 0).unwrap().stages[0].proxnet.encoder[0].clone();
    assert!(sffe_block(&Tensor::zeros(&[2, 8, 8], DType::Real), &p, &cfg).is_err());
    assert!(sffe_block(&Tensor::zeros(&[4, 16, 16], DType::Real), &p, &cfg).is_err());
}

#[test]
fn sffe_global_filter_gradient() {
    let cfg = toy_config(1, 4, 16, 1);
    let p = generic_params(&cfg, 4).stages[0].proxnet.encoder[0].clone();
    let f = random_real(&[2, 16, 16], &mut rng(10));
    let probe = random_real(&[4, 16, 16], &mut rng(22));
    let named = [("global_filter".to_string(), p.global_filter.clone())];
    let with_filter = |t: &Tensor| {
        let mut q = p.clone();
        q.global_filter = t.clone();
        sffe_block(&f, &q, &cfg)
    };
    // The plain sum only sees the DC bin of each filter channel; the probe
    // weighting reaches every bin.
    let sum = grad_check(
        |t| ops::sum(&with_filter(&t[0])?),
        &named,
        &group_opts(usize::MAX),
    )
    .unwrap();
    assert!(sum.passed(), "{:?}", sum.params);
    let weighted = grad_check(
        |t| real_dot(&with_filter(&t[0])?, &probe),
        &named,
        &group_opts(usize::MAX),
    )
    .unwrap();
    assert!(weighted.passed(), "{:?}", weighted.params);
    assert!(weighted.params[0].max_analytic > 1e-3);
}

#[test]
fn proxnet_gradcheck_on_16x16() {
    let cfg = toy_config(1, 4, 16, 4);
    let p = generic_params(&cfg, 6);
    let v = random_real(&[2, 16, 16], &mut rng(11));
    let probe = random_real(&[2, 16, 16], &mut rng(12));
    let mut named: Vec<(String, Tensor)> = vec![("input".into(), v.clone())];
    named.extend(p.named().into_iter().skip(3).map(|(n, t)| (n, t.clone())));
    let report = grad_check(
        |t| {
            let mut it = t[1..].iter();
            let q = p.map(|name, old| {
                if name.contains(".prox.") {
                    it.next().unwrap().clone()
                } else {
                    old.clone()
                }
            });
            real_dot(&proxnet_apply(&t[0], &q.stages[0].proxnet, &cfg)?, &probe)
        },
        &named,
        &group_opts(8),
    )
    .unwrap();
    assert!(report.passed(), "max rel err {:e}", report.max_rel_err());
}

fn single_coil_setup(n: usize, seed: u64) -> (Physics, Tensor) {
    let mask = make_mask(n, 4, MaskPattern::Random, seed).unwrap();
    let x = make_phantom(n, n, PhantomKind::RandomEllipses, seed).unwrap();
    let k = forward_single(&x, &mask).unwrap();
    (Physics::single(&mask, n), k.samples().clone())
}

fn multi_coil_setup(n: usize, seed: u64) -> (Physics, Tensor) {
    let mask = make_mask(n, 4, MaskPattern::Equispaced, seed).unwrap();
    let sens = synthetic_sensitivities(4, n, n, seed).unwrap();
    let x = make_phantom(n, n, PhantomKind::SheppLogan, seed).unwrap();
    let k = forward_multi(&x, &sens, &mask).unwrap();
    (Physics::multi(&mask, &sens).unwrap(), k.samples().clone())
}

#[test]
fn stage_matches_hand_composition() {
    let cfg = toy_config(1, 4, 16, 2);
    let mut params = generic_params(&cfg, 7);
    params.stages[0].tau_raw = Tensor::scalar(0.3);
    params.stages[0].sigma_raw = Tensor::scalar(-0.2);
    params.stages[0].theta_raw = Tensor::scalar(0.9);
    let stage = &params.stages[0];
    let (tau, sigma, theta) = (
        ops::softplus_scalar(0.3),
        ops::softplus_scalar(-0.2),
        ops::softplus_scalar(0.9),
    );
    for (physics, k) in [single_coil_setup(16, 1), multi_coil_setup(16, 2)] {
        let mut r = rng(13);
        let x = random_complex(&[16, 16], &mut r);
        let y = random_complex(k.shape(), &mut r);
        let (x_next, y_next) = stage_forward(&x, &y, &k, stage, &params, &physics).unwrap();

        let a_h_y = physics.adjoint(&y).unwrap();
        let x_bar: Vec<f64> = x
            .data()
            .iter()
            .zip(a_h_y.data())
            .map(|(a, b)| a - tau * b)
            .collect();
        let mut v = vec![0.0; 2 * 256];
        for i in 0..256 {
            v[i] = x_bar[2 * i];
            v[256 + i] = x_bar[2 * i + 1];
        }
        let v = Tensor::real(&[2, 16, 16], v).unwrap();
        let corr = proxnet_apply(&v, &stage.proxnet, &cfg).unwrap();
        let mut want_x = x.to_vec();
        for i in 0..256 {
            want_x[2 * i] += corr.data()[i];
            want_x[2 * i + 1] += corr.data()[256 + i];
        }
        let z: Vec<f64> = want_x
            .iter()
            .zip(x.data())
            .map(|(n, o)| n + theta * (n - o))
            .collect();
        let a_z = physics.forward(&Tensor::complex(&[16, 16], z).unwrap()).unwrap();
        let want_y: Vec<f64> = (0..y.data().len())
            .map(|i| (y.data()[i] + sigma * (a_z.data()[i] - k.data()[i])) / (1.0 + sigma))
            .collect();
        assert!(max_rel_diff(x_next.data(), &want_x) < 1e-14);
        assert!(max_rel_diff(y_next.data(), &want_y) < 1e-14);
    }
}

#[test]
fn zero_prox_freezes_x_and_leaves_classical_dual_updates() {
    let cfg = toy_config(3, 4, 16, 2);
    let params = zero_output(&ModelParams::init(&cfg, 8).unwrap());
    for (physics, k) in [single_coil_setup(16, 3), multi_coil_setup(16, 4)] {
        let x0 = physics.adjoint(&k).unwrap();
        let mut x = x0.clone();
        let mut y = Tensor::zeros(k.shape(), DType::Complex);
        let mut y_ref = y.clone();
        let a_x0 = physics.forward(&x0).unwrap();
        for stage in &params.stages {
            (x, y) = stage_forward(&x, &y, &k, stage, &params, &physics).unwrap();
            y_ref = update_y(&y_ref, &a_x0, &k, &stage.sigma().unwrap()).unwrap();
            assert_eq!(x.data(), x0.data());
            assert!(max_rel_diff(y.data(), y_ref.data()) < 1e-15);
        }
        let out = model_forward(&k, &params, &physics).unwrap();
        assert_eq!(out.data(), x0.data());
    }
}

#[test]
fn zero_tau_with_zero_output_keeps_x() {
    let cfg = toy_config(1, 4, 16, 2);
    let mut params = zero_output(&ModelParams::init(&cfg, 9).unwrap());
    params.stages[0].tau_raw = Tensor::scalar(-800.0);
    assert_eq!(params.stages[0].tau().unwrap().item().unwrap(), 0.0);
    let (physics, k) = single_coil_setup(16, 5);
    let mut r = rng(14);
    let x = random_complex(&[16, 16], &mut r);
    let y = random_complex(k.shape(), &mut r);
    let (x_next, _) = stage_forward(&x, &y, &k, &params.stages[0], &params, &physics).unwrap();
    assert_eq!(x_next.data(), x.data());
}

#[test]
fn zero_stages_return_zero_filled() {
    let cfg = toy_config(0, 4, 16, 2);
    let params = ModelParams {
        config: cfg.clone(),
        stages: Vec::new(),
    };
    let mask = make_mask(16, 4, MaskPattern::Random, 6).unwrap();
    let x = make_phantom(16, 16, PhantomKind::SheppLogan, 0).unwrap();
    let k = forward_single(&x, &mask).unwrap();
    let out = model_forward(k.samples(), &params, &Physics::single(&mask, 16)).unwrap();
    assert_eq!(out.data(), zero_filled(&k, None).unwrap().data());
}

#[test]
fn forward_is_deterministic() {
    let cfg = toy_config(2, 4, 16, 4);
    let params = generic_params(&cfg, 10);
    let (physics, k) = multi_coil_setup(16, 7);
    let a = model_forward(&k, &params, &physics).unwrap();
    let b = model_forward(&k, &params.clone(), &physics).unwrap();
    assert_eq!(a.data(), b.data());
    assert_eq!(params.detached().named().len(), params.named().len());
}

#[test]
fn data_consistency_restores_measured_samples() {
    let cfg = toy_config(2, 4, 16, 4);
    let params = generic_params(&cfg, 11);
    let (physics, k) = single_coil_setup(16, 8);
    let x = reconstruct(&k, &params, &physics, true).unwrap();
    let ax = physics.forward(&x).unwrap();
    assert!(max_rel_diff(ax.data(), k.data()) < 1e-13);
    let raw = reconstruct(&k, &params, &physics, false).unwrap();
    assert!(max_rel_diff(physics.forward(&raw).unwrap().data(), k.data()) > 1e-6);
}

#[test]
fn named_round_trip() {
    let cfg = toy_config(2, 4, 16, 2);
    let params = generic_params(&cfg, 12);
    let map = params.named().into_iter().map(|(n, t)| (n, t.clone())).collect();
    let back = ModelParams::from_named(&cfg, map).unwrap();
    for ((n1, a), (n2, b)) in params.named().into_iter().zip(back.named()) {
        assert_eq!(n1, n2);
        assert_eq!(a.data(), b.data());
    }

    let mut missing: std::collections::BTreeMap<_, _> =
        params.named().into_iter().map(|(n, t)| (n, t.clone())).collect();
    missing.remove("stage1.prox.out.bias");
    assert!(ModelParams::from_named(&cfg, missing).is_err());

    let mut extra: std::collections::BTreeMap<_, _> =
        params.named().into_iter().map(|(n, t)| (n, t.clone())).collect();
    extra.insert("stage9.tau".into(), Tensor::scalar(0.0));
    assert!(ModelParams::from_named(&cfg, extra).is_err());
}

#[test]
fn full_loss_gradcheck_on_toy_model() {
    let cfg = toy_config(2, 4, 16, 4);
    let params = generic_params(&cfg, 13);
    let sample = phantom_sample(16, 4, 14);
    let report = loss_gradcheck(
        &sample,
        &params,
        &PartitionSpec::new(0.5, 15),
        &LossWeights::default(),
        &SsimParams::default(),
        &group_opts(4),
    )
    .unwrap();
    assert!(report.passed(), "max rel err {:e}", report.max_rel_err());
}

#[test]
fn only_structural_parameters_are_dead() {
    let cfg = toy_config(3, 4, 16, 4);
    let params = generic_params(&cfg, 16);
    let sample = phantom_sample(16, 4, 17);
    let (grads, _) = sample_gradients(
        &sample,
        &params,
        &PartitionSpec::new(0.6, 18),
        &LossWeights::default(),
        &SsimParams::default(),
        false,
    )
    .unwrap();
    let dead = ["stage0.tau", "stage2.sigma", "stage2.theta"];
    for ((name, _), g) in params.named().into_iter().zip(&grads) {
        let live = g.iter().any(|&v| v != 0.0);
        assert_eq!(live, !dead.contains(&name.as_str()), "{name}");
    }
}

#[test]
fn zero_output_layer_blocks_upstream_gradients() {
    let cfg = toy_config(2, 4, 16, 2);
    let params = zero_output(&ModelParams::init(&cfg, 19).unwrap());
    let sample = phantom_sample(16, 4, 20);
    let (grads, _) = sample_gradients(
        &sample,
        &params,
        &PartitionSpec::new(0.5, 21),
        &LossWeights::default(),
        &SsimParams::default(),
        false,
    )
    .unwrap();
    for ((name, _), g) in params.named().into_iter().zip(&grads) {
        let live = g.iter().any(|&v| v != 0.0);
        let expected = name.ends_with("out.weight") || name.ends_with("out.bias");
        assert_eq!(live, expected, "{name}");
    }
}
