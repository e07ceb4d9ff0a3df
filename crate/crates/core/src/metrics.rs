//! PSNR, SSIM and error maps on real magnitude images.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::tensor::{DType, Tensor};

/// Reported PSNR when the images are identical.
pub const PSNR_CAP: f64 = 99.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

impl SsimParams {
    /// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
    pub fn taps(&self) -> Vec<f64> {
        let c = (self.window as f64 - 1.0) / 2.0;
        let raw: Vec<f64> = (0..self.window)
            .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * self.sigma * self.sigma)).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    }

    pub fn constants(&self, data_range: f64) -> (f64, f64) {
        ((self.k1 * data_range).powi(2), (self.k2 * data_range).powi(2))
    }
}

fn image_dims(op: &'static str, a: &Tensor, b: &Tensor) -> Result<(usize, usize)> {
    a.expect_dtype(op, DType::Real)?;
    b.expect_dtype(op, DType::Real)?;
    if a.shape() != b.shape() {
        return Err(Error::shape(op, a.shape(), b.shape()));
    }
    match *a.shape() {
        [h, w] => Ok((h, w)),
        ref s => Err(Error::invalid(op, format!("expected H x W images, got {s:?}"))),
    }
}

/// Maximum of the reference, the evaluation data range.
pub fn data_range(reference: &Tensor) -> f64 {
    reference.data().iter().cloned().fold(0.0, f64::max)
}

pub fn psnr(reference: &Tensor, test: &Tensor, data_range: f64) -> Result<f64> {
    image_dims("psnr", reference, test)?;
    if !(data_range > 0.0) {
        return Err(Error::invalid(
            "psnr",
            format!("data_range must be > 0, got {data_range}"),
        ));
    }
    let n = reference.numel() as f64;
    let mse = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(r, t)| (r - t) * (r - t))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (data_range * data_range / mse).log10()).min(PSNR_CAP))
}

/// Separable valid-mode filtering of an `h x w` plane.
fn filter_valid(x: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let mut rows = vec![0.0; h * ow];
    for i in 0..h {
        for j in 0..ow {
            rows[i * ow + j] = (0..k).map(|t| taps[t] * x[i * w + j + t]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        for j in 0..ow {
            out[i * ow + j] = (0..k).map(|t| taps[t] * rows[(i + t) * ow + j]).sum();
        }
    }
    out
}

/// Local SSIM map (valid region only).
pub fn ssim_map(reference: &Tensor, test: &Tensor, data_range: f64, params: &SsimParams) -> Result<Tensor> {
    let (h, w) = image_dims("ssim", reference, test)?;
    if h < params.window || w < params.window {
        return Err(Error::invalid(
            "ssim",
            format!("{h}x{w} image is smaller than the {0}x{0} window", params.window),
        ));
    }
    if !(data_range > 0.0) {
        return Err(Error::invalid(
            "ssim",
            format!("data_range must be > 0, got {data_range}"),
        ));
    }
    let taps = params.taps();
    let (c1, c2) = params.constants(data_range);
    let (x, y) = (reference.data(), test.data());
    let prod = |f: &dyn Fn(usize) -> f64| (0..h * w).map(f).collect::<Vec<f64>>();
    let mx = filter_valid(x, h, w, &taps);
    let my = filter_valid(y, h, w, &taps);
    let mxx = filter_valid(&prod(&|i| x[i] * x[i]), h, w, &taps);
    let myy = filter_valid(&prod(&|i| y[i] * y[i]), h, w, &taps);
    let mxy = filter_valid(&prod(&|i| x[i] * y[i]), h, w, &taps);
    let map = (0..mx.len())
        .map(|i| {
            let (a, b) = (mx[i], my[i]);
            let vx = mxx[i] - a * a;
            let vy = myy[i] - b * b;
            let cov = mxy[i] - a * b;
            ((2.0 * a * b + c1) * (2.0 * cov + c2)) / ((a * a + b * b + c1) * (vx + vy + c2))
        })
        .collect();
    Tensor::real(&[h + 1 - params.window, w + 1 - params.window], map)
}

/// Mean of the local SSIM map.
pub fn ssim(reference: &Tensor, test: &Tensor, data_range: f64, params: &SsimParams) -> Result<f64> {
    let map = ssim_map(reference, test, data_range, params)?;
    Ok(map.data().iter().sum::<f64>() / map.numel() as f64)
}

/// `|reference - test|` divided by the reference range, clamped to `[0, 1]`.
pub fn error_map(reference: &Tensor, test: &Tensor) -> Result<Tensor> {
    let (h, w) = image_dims("error_map", reference, test)?;
    let range = match data_range(reference) {
        r if r > 0.0 => r,
        _ => 1.0,
    };
    let data = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(r, t)| ((r - t).abs() / range).min(1.0))
        .collect();
    Tensor::real(&[h, w], data)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SliceMetrics {
    pub id: String,
    pub psnr_db: f64,
    pub ssim: f64,
}

/// Per-slice metrics with mean and population standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub slices: Vec<SliceMetrics>,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub ssim_mean: f64,
    pub ssim_std: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl MetricReport {
    pub fn new(slices: Vec<SliceMetrics>) -> Self {
        let p: Vec<f64> = slices.iter().map(|s| s.psnr_db).collect();
        let s: Vec<f64> = slices.iter().map(|s| s.ssim).collect();
        let (psnr_mean, psnr_std) = mean_std(&p);
        let (ssim_mean, ssim_std) = mean_std(&s);
        Self {
            slices,
            psnr_mean,
            psnr_std,
            ssim_mean,
            ssim_std,
        }
    }

    /// Evaluates magnitude image pairs with a volume-wide data range
    /// (maximum over all references).
    pub fn evaluate(pairs: &[(String, Tensor, Tensor)], params: &SsimParams) -> Result<Self> {
        let range = pairs.iter().map(|(_, r, _)| data_range(r)).fold(0.0, f64::max);
        let range = if range > 0.0 { range } else { 1.0 };
        let slices = pairs
            .iter()
            .map(|(id, r, t)| {
                Ok(SliceMetrics {
                    id: id.clone(),
                    psnr_db: psnr(r, t, range)?,
                    ssim: ssim(r, t, range, params)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(slices))
    }

    /// `slice_id,psnr_db,ssim` rows followed by `mean` and `std` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("slice_id,psnr_db,ssim\n");
        for m in &self.slices {
            let _ = writeln!(s, "{},{:.6},{:.6}", m.id, m.psnr_db, m.ssim);
        }
        let _ = writeln!(s, "mean,{:.6},{:.6}", self.psnr_mean, self.ssim_mean);
        let _ = writeln!(s, "std,{:.6},{:.6}", self.psnr_std, self.ssim_std);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(v: Vec<f64>, h: usize, w: usize) -> Tensor {
        Tensor::real(&[h, w], v).unwrap()
    }

    #[test]
    fn psnr_known_values() {
        let a = img(vec![0.5; 16], 4, 4);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), PSNR_CAP);
        let b = img(vec![0.6; 16], 4, 4);
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-12);
        assert!(psnr(&a, &img(vec![0.0; 4], 2, 2), 1.0).is_err());
    }

    #[test]
    fn ssim_identity_and_small_image() {
        let a = img((0..256).map(|i| (i % 7) as f64 / 7.0).collect(), 16, 16);
        assert_eq!(ssim(&a, &a, 1.0, &SsimParams::default()).unwrap(), 1.0);
        let small = img(vec![0.0; 64], 8, 8);
        assert!(ssim(&small, &small, 1.0, &SsimParams::default()).is_err());
    }

    #[test]
    fn error_map_cases() {
        let a = img(vec![0.0, 1.0, 0.5, 0.25], 2, 2);
        assert!(error_map(&a, &a).unwrap().data().iter().all(|&v| v == 0.0));
        let b = img(vec![0.0, 1.0, 0.4, 0.25], 2, 2);
        let e = error_map(&a, &b).unwrap();
        assert_eq!(e.data().iter().filter(|&&v| v != 0.0).count(), 1);
        let far = img(vec![5.0, -3.0, 0.5, 0.25], 2, 2);
        assert!(error_map(&a, &far).unwrap().data().iter().all(|&v| v <= 1.0));
    }

    #[test]
    fn report_rows() {
        let r = MetricReport::new(vec![
            SliceMetrics {
                id: "a".into(),
                psnr_db: 30.0,
                ssim: 0.9,
            },
            SliceMetrics {
                id: "b".into(),
                psnr_db: 32.0,
                ssim: 0.7,
            },
        ]);
        assert!((r.psnr_mean - 31.0).abs() < 1e-12 && (r.psnr_std - 1.0).abs() < 1e-12);
        let csv = r.to_csv();
        assert!(csv.lines().nth(3).unwrap().starts_with("mean,31.0"));
        assert!(csv.lines().nth(4).unwrap().starts_with("std,1.0"));
    }
}
