//! Python bindings: images are flat row-major lists of floats with an
//! explicit `(height, width)` shape; complex images are interleaved.

use clap::Parser;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use dunmri_core::classical::{solve, CPPAConfig};
use dunmri_core::cli::{run, Cli};
use dunmri_core::metrics::{self, SsimParams};
use dunmri_core::physics::{
    forward_single, make_mask, make_phantom, zero_filled as zf, MaskPattern, PhantomKind,
};
use dunmri_core::tensor::ops;
use dunmri_core::{Error, Tensor};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn real_image(data: Vec<f64>, shape: (usize, usize)) -> PyResult<Tensor> {
    Tensor::real(&[shape.0, shape.1], data).map_err(py_err)
}

/// Centered phase-encode line indices of a sampling mask.
#[pyfunction]
#[pyo3(signature = (width, accel, pattern = "random", seed = 0))]
fn mask_lines(width: usize, accel: u32, pattern: &str, seed: u64) -> PyResult<Vec<usize>> {
    let pattern: MaskPattern = pattern.parse().map_err(py_err)?;
    let m = make_mask(width, accel, pattern, seed).map_err(py_err)?;
    Ok(m.line_set().to_vec())
}

/// Real phantom of shape `(size, size)`.
#[pyfunction]
#[pyo3(signature = (size, kind = "shepp-logan", seed = 0))]
fn phantom(size: usize, kind: &str, seed: u64) -> PyResult<Vec<f64>> {
    let kind: PhantomKind = kind.parse().map_err(py_err)?;
    let x = make_phantom(size, size, kind, seed).map_err(py_err)?;
    Ok(ops::magnitude(&x).map_err(py_err)?.to_vec())
}

/// Magnitude of the zero-filled and classical reconstructions of a real
/// image sampled under a single-coil mask.
#[pyfunction]
#[pyo3(signature = (image, shape, accel = 4, pattern = "random", seed = 0, threshold = 1e-3, iters = 200))]
fn undersample_and_solve(
    image: Vec<f64>,
    shape: (usize, usize),
    accel: u32,
    pattern: &str,
    seed: u64,
    threshold: f64,
    iters: usize,
) -> PyResult<(Vec<f64>, Vec<f64>, usize)> {
    let x = real_image(image, shape)?;
    let pattern: MaskPattern = pattern.parse().map_err(py_err)?;
    let mask = make_mask(shape.1, accel, pattern, seed).map_err(py_err)?;
    let k = forward_single(&ops::to_complex(&x).map_err(py_err)?, &mask).map_err(py_err)?;
    let base = ops::magnitude(&zf(&k, None).map_err(py_err)?).map_err(py_err)?;
    let cfg = CPPAConfig {
        threshold,
        max_iters: iters,
        ..Default::default()
    };
    let (rec, trace) = solve(&k, None, &cfg).map_err(py_err)?;
    let rec = ops::magnitude(&rec).map_err(py_err)?;
    Ok((base.to_vec(), rec.to_vec(), trace.iterations()))
}

/// PSNR in dB; `data_range` defaults to the reference maximum.
#[pyfunction]
#[pyo3(signature = (reference, test, shape, data_range = None))]
fn psnr(
    reference: Vec<f64>,
    test: Vec<f64>,
    shape: (usize, usize),
    data_range: Option<f64>,
) -> PyResult<f64> {
    let (r, t) = (real_image(reference, shape)?, real_image(test, shape)?);
    let range = data_range.unwrap_or_else(|| metrics::data_range(&r));
    metrics::psnr(&r, &t, range).map_err(py_err)
}

/// Mean SSIM with the 11x11 Gaussian window.
#[pyfunction]
#[pyo3(signature = (reference, test, shape, data_range = None))]
fn ssim(
    reference: Vec<f64>,
    test: Vec<f64>,
    shape: (usize, usize),
    data_range: Option<f64>,
) -> PyResult<f64> {
    let (r, t) = (real_image(reference, shape)?, real_image(test, shape)?);
    let range = data_range.unwrap_or_else(|| metrics::data_range(&r));
    metrics::ssim(&r, &t, range, &SsimParams::default()).map_err(py_err)
}

/// Runs a `dunmri` command line (without the program name) and returns
/// its one-line summary.
#[pyfunction]
fn cli(args: Vec<String>) -> PyResult<String> {
    let parsed = Cli::try_parse_from(std::iter::once("dunmri".to_string()).chain(args))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    run(parsed.command).map_err(py_err)
}

#[pymodule]
fn dunmri(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(mask_lines, m)?)?;
    m.add_function(wrap_pyfunction!(phantom, m)?)?;
    m.add_function(wrap_pyfunction!(undersample_and_solve, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(cli, m)?)?;
    Ok(())
}
