mod common;

use common::{naive_ssim, rng};
use dunmri_core::metrics::*;
use dunmri_core::Tensor;
use proptest::prelude::*;
use rand::Rng;

fn random_image(h: usize, w: usize, seed: u64) -> Tensor {
    let mut r = rng(seed);
    Tensor::real(&[h, w], (0..h * w).map(|_| r.random_range(0.0..1.0)).collect()).unwrap()
}

fn naive_psnr(a: &[f64], b: &[f64], range: f64) -> f64 {
    let mut se = 0.0;
    for i in 0..a.len() {
        se += (a[i] - b[i]) * (a[i] - b[i]);
    }
    10.0 * (range * range / (se / a.len() as f64)).log10()
}

#[test]
fn metrics_match_naive_oracles() {
    let params = SsimParams::default();
    for seed in 0..20 {
        let a = random_image(32, 32, 2 * seed);
        let b = random_image(32, 32, 2 * seed + 1);
        let range = data_range(&a);
        let p = psnr(&a, &b, range).unwrap();
        assert!((p - naive_psnr(a.data(), b.data(), range)).abs() < 1e-10);
        let s = ssim(&a, &b, range, &params).unwrap();
        let want = naive_ssim(a.data(), b.data(), 32, 32, range, 11, 1.5);
        assert!((s - want).abs() < 1e-10, "{s} vs {want}");
    }
}

#[test]
fn psnr_reference_values() {
    let a = random_image(16, 16, 1);
    assert_eq!(psnr(&a, &a, 1.0).unwrap(), PSNR_CAP);
    let zeros = Tensor::real(&[10, 10], vec![0.0; 100]).unwrap();
    let tenth = Tensor::real(&[10, 10], vec![0.1; 100]).unwrap();
    assert!((psnr(&zeros, &tenth, 1.0).unwrap() - 20.0).abs() < 1e-12);
    assert!(psnr(&a, &a, 0.0).is_err());
    assert!(psnr(&a, &zeros, 1.0).is_err());
}

#[test]
fn psnr_decreases_with_noise() {
    let clean = random_image(32, 32, 3);
    let noise = random_image(32, 32, 4);
    let mut last = f64::INFINITY;
    for sigma in [0.01, 0.02, 0.05, 0.1, 0.2] {
        let noisy: Vec<f64> = clean
            .data()
            .iter()
            .zip(noise.data())
            .map(|(c, n)| c + sigma * (n - 0.5))
            .collect();
        let p = psnr(&clean, &Tensor::real(&[32, 32], noisy).unwrap(), 1.0).unwrap();
        assert!(p < last);
        last = p;
    }
}

#[test]
fn ssim_of_inverted_binary_image_is_low() {
    let mut r = rng(5);
    let bits: Vec<f64> = (0..64 * 64)
        .map(|_| if r.random_bool(0.5) { 1.0 } else { 0.0 })
        .collect();
    let inv: Vec<f64> = bits.iter().map(|b| 1.0 - b).collect();
    let x = Tensor::real(&[64, 64], bits).unwrap();
    let y = Tensor::real(&[64, 64], inv).unwrap();
    let s = ssim(&x, &y, 1.0, &SsimParams::default()).unwrap();
    assert!(s < 0.1, "{s}");
    assert!((s - naive_ssim(x.data(), y.data(), 64, 64, 1.0, 11, 1.5)).abs() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ssim_is_bounded_symmetric_and_reflexive(seed in any::<u64>(), range in 0.5f64..4.0) {
        let a = random_image(24, 24, seed);
        let b = random_image(24, 24, seed.wrapping_add(1));
        let params = SsimParams::default();
        let ab = ssim(&a, &b, range, &params).unwrap();
        let ba = ssim(&b, &a, range, &params).unwrap();
        prop_assert!((-1.0..=1.0).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert_eq!(ssim(&a, &a, range, &params).unwrap(), 1.0);
    }

    #[test]
    fn error_map_is_normalized(seed in any::<u64>()) {
        let a = random_image(8, 8, seed);
        let b = random_image(8, 8, seed.wrapping_add(7));
        let e = error_map(&a, &b).unwrap();
        let range = data_range(&a);
        for ((&v, &x), &y) in e.data().iter().zip(a.data()).zip(b.data()) {
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!((v - ((x - y).abs() / range).min(1.0)).abs() < 1e-15);
        }
    }
}

#[test]
fn report_summary_matches_slices() {
    let pairs: Vec<(String, Tensor, Tensor)> = (0..6)
        .map(|i| {
            (
                format!("s{i}"),
                random_image(16, 16, 100 + i),
                random_image(16, 16, 200 + i),
            )
        })
        .collect();
    let report = MetricReport::evaluate(&pairs, &SsimParams::default()).unwrap();
    let range = pairs.iter().map(|(_, r, _)| data_range(r)).fold(0.0, f64::max);
    let n = pairs.len() as f64;
    let p: Vec<f64> = pairs
        .iter()
        .map(|(_, r, t)| naive_psnr(r.data(), t.data(), range))
        .collect();
    let mean = p.iter().sum::<f64>() / n;
    let std = (p.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!((report.psnr_mean - mean).abs() < 1e-10);
    assert!((report.psnr_std - std).abs() < 1e-10);
    let s: Vec<f64> = report.slices.iter().map(|m| m.ssim).collect();
    let s_mean = s.iter().sum::<f64>() / n;
    assert!((report.ssim_mean - s_mean).abs() < 1e-12);

    let csv = report.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "slice_id,psnr_db,ssim");
    assert_eq!(lines.len(), 1 + 6 + 2);
    assert!(lines[7].starts_with("mean,"));
    assert!(lines[8].starts_with("std,"));
}

#[test]
fn identical_pairs_report_cap_and_one() {
    let a = random_image(16, 16, 9);
    let report = MetricReport::evaluate(&[("a".into(), a.clone(), a)], &SsimParams::default()).unwrap();
    assert_eq!(report.psnr_mean, PSNR_CAP);
    assert_eq!(report.ssim_mean, 1.0);
    assert_eq!(report.psnr_std, 0.0);
}
