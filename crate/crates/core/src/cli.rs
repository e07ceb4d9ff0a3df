//! Command implementations behind the `dunmri` binary.
//!
//! Each command returns the one-line summary the binary prints. Image
//! outputs ending in `.pgm` are written as 16-bit magnitude images; any
//! other path gets a container with a complex `image` record.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::classical::{solve, CPPAConfig};
use crate::error::{Error, Result};
use crate::io::{
    export_pgm, load_item, load_params, load_state, phantom_dataset, read_dataset, read_pgm, save_state,
    write_dataset, write_text, Acquisition, DataConsistency, RunConfig, TensorContainer,
};
use crate::metrics::{MetricReport, SsimParams};
use crate::model::{reconstruct, ModelParams};
use crate::physics::{make_mask, make_phantom, MaskPattern, PhantomKind};
use crate::ssl::{generic_point, history_csv, loss_gradcheck, train_with, PartitionSpec, Sample, TrainState};
use crate::tensor::gradcheck::{ErrorScale, GradCheckOptions, GradCheckReport, Stencil};
use crate::tensor::{ops, DType, Tensor};

#[derive(Parser, Debug)]
#[command(name = "dunmri", version, about = "Unfolded primal-dual MRI reconstruction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a phantom dataset directory.
    Phantom(PhantomArgs),
    /// Write a sampling mask file.
    Mask(MaskArgs),
    /// Train a model with the self-supervised loss.
    Train(TrainArgs),
    /// Reconstruct one sample file with a trained model.
    Reconstruct(ReconstructArgs),
    /// PSNR / SSIM of test images against references.
    Eval(EvalArgs),
    /// Check the loss gradient of a model against finite differences.
    Gradcheck(GradcheckArgs),
    /// Reconstruct one sample file with the classical primal-dual solver.
    Classical(ClassicalArgs),
}

#[derive(Args, Debug)]
pub struct PhantomArgs {
    #[arg(long, default_value_t = 8)]
    pub count: usize,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value = "random-ellipses")]
    pub kind: PhantomKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub accel: u32,
    #[arg(long, default_value = "random")]
    pub pattern: MaskPattern,
    #[arg(long, default_value_t = 1)]
    pub coils: usize,
    /// Relative k-space noise level.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
}

#[derive(Args, Debug)]
pub struct MaskArgs {
    #[arg(long)]
    pub width: usize,
    #[arg(long)]
    pub accel: u32,
    #[arg(long, default_value = "random")]
    pub pattern: MaskPattern,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Dataset directory written by `phantom`.
    #[arg(long)]
    pub data: PathBuf,
    /// Training checkpoint, rewritten after every epoch.
    #[arg(long)]
    pub out_checkpoint: PathBuf,
    /// Continue from this training checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Per-step loss history CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Sample file.
    #[arg(long)]
    pub kspace: PathBuf,
    #[arg(long)]
    pub out_image: PathBuf,
    /// Replace measured k-space samples after inference (`auto` follows
    /// `--noise`).
    #[arg(long, default_value = "auto")]
    pub data_consistency: DataConsistency,
    /// Noise level of the input, used by `--data-consistency auto`.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Reference image file or directory.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Test image file or directory (files matched by name).
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out_csv: PathBuf,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Args, Debug)]
pub struct ClassicalArgs {
    /// Sample file.
    #[arg(long)]
    pub kspace: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub threshold: f64,
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-iteration residual CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

pub fn run(command: Command) -> Result<String> {
    match command {
        Command::Phantom(a) => cmd_phantom(&a),
        Command::Mask(a) => cmd_mask(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Reconstruct(a) => cmd_reconstruct(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Gradcheck(a) => cmd_gradcheck(&a).map(|(line, _)| line),
        Command::Classical(a) => cmd_classical(&a),
    }
}

pub fn cmd_phantom(a: &PhantomArgs) -> Result<String> {
    let acq = Acquisition {
        accel: a.accel,
        pattern: a.pattern,
        coils: a.coils,
        noise: a.noise,
        ..Default::default()
    };
    let items = phantom_dataset(a.count, a.size, a.kind, a.seed, &acq)?;
    write_dataset(&a.out, &items)?;
    Ok(format!(
        "wrote {} samples ({}x{}) to {}",
        items.len(),
        a.size,
        a.size,
        a.out.display()
    ))
}

pub fn cmd_mask(a: &MaskArgs) -> Result<String> {
    let mask = make_mask(a.width, a.accel, a.pattern, a.seed)?;
    mask.save(&a.out)?;
    Ok(format!(
        "{} of {} lines ({} center) written to {}",
        mask.line_set().len(),
        a.width,
        mask.center_count(),
        a.out.display()
    ))
}

pub fn cmd_train(a: &TrainArgs) -> Result<String> {
    let cfg = RunConfig::load(&a.config)?;
    let data: Vec<Sample> = read_dataset(&a.data)?.into_iter().map(|i| i.sample).collect();
    let (h, w) = (cfg.model.height, cfg.model.width);
    if let Some(s) = data
        .iter()
        .find(|s| s.kspace.height() != h || s.kspace.width() != w)
    {
        return Err(Error::Config {
            key: "height".into(),
            msg: format!(
                "model is {h}x{w} but sample {} is {}x{}",
                s.id,
                s.kspace.height(),
                s.kspace.width()
            ),
        });
    }
    let state = match &a.resume {
        Some(path) => {
            let state = load_state(path)?;
            if state.params.config != cfg.model {
                return Err(Error::Config {
                    key: "stages".into(),
                    msg: format!(
                        "checkpoint {} was trained with another model shape",
                        path.display()
                    ),
                });
            }
            state
        }
        None => TrainState::new(ModelParams::init(&cfg.model, cfg.init_seed)?),
    };
    let state = train_with(&data, state, &cfg.train, |s| save_state(s, &a.out_checkpoint))?;
    if let Some(path) = &a.history {
        write_text(path, &history_csv(&state.history))?;
    }
    let last = state.history.last().map_or(f64::NAN, |r| r.losses.l_d);
    Ok(format!(
        "trained {} epochs ({} steps), last L_d {last:.6}, checkpoint {}",
        state.epochs_done,
        state.adam.step,
        a.out_checkpoint.display()
    ))
}

fn write_image(image: &Tensor, path: &Path) -> Result<()> {
    if path.extension().is_some_and(|e| e == "pgm") {
        export_pgm(&ops::magnitude(image)?, path, None)
    } else {
        let mut c = TensorContainer::new();
        c.insert("image", image)?;
        c.save(path)
    }
}

/// Magnitude image from a PGM (scaled to `[0, 1]`) or from the `image`
/// record of a container.
pub fn read_image(path: &Path) -> Result<Tensor> {
    if path.extension().is_some_and(|e| e == "pgm") {
        return read_pgm(path)?.to_image(1.0);
    }
    let c = TensorContainer::load(path)?;
    let image = c.require("image")?;
    match image.dtype() {
        DType::Complex => ops::magnitude(image),
        DType::Real => Ok(image.clone()),
    }
}

pub fn cmd_reconstruct(a: &ReconstructArgs) -> Result<String> {
    let params = load_params(&a.checkpoint)?;
    let item = load_item(&a.kspace)?;
    let physics = item.sample.physics()?;
    let dc = a.data_consistency.enabled(a.noise);
    let x = reconstruct(item.sample.kspace.samples(), &params, &physics, dc)?;
    write_image(&x, &a.out_image)?;
    Ok(format!(
        "reconstructed {} with {} stages (data consistency {}) to {}",
        a.kspace.display(),
        params.config.stages,
        if dc { "on" } else { "off" },
        a.out_image.display()
    ))
}

fn image_files(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "pgm" || e == "dunt"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn cmd_eval(a: &EvalArgs) -> Result<String> {
    let refs = image_files(&a.reference)?;
    if refs.is_empty() {
        return Err(Error::invalid(
            "eval",
            format!("no images in {}", a.reference.display()),
        ));
    }
    let mut pairs = Vec::with_capacity(refs.len());
    for r in &refs {
        let t = if a.test.is_dir() {
            a.test.join(r.file_name().unwrap_or_default())
        } else {
            a.test.clone()
        };
        let id = r
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("image")
            .to_string();
        pairs.push((id, read_image(r)?, read_image(&t)?));
    }
    let report = MetricReport::evaluate(&pairs, &SsimParams::default())?;
    write_text(&a.out_csv, &report.to_csv())?;
    Ok(format!(
        "{} images: PSNR {:.2} +- {:.2} dB, SSIM {:.4} +- {:.4}",
        pairs.len(),
        report.psnr_mean,
        report.psnr_std,
        report.ssim_mean,
        report.ssim_std
    ))
}

/// Runs the configured gradient check; the line starts with `PASS` or
/// `FAIL`.
pub fn cmd_gradcheck(a: &GradcheckArgs) -> Result<(String, GradCheckReport)> {
    let cfg = RunConfig::load(&a.config)?;
    let report = gradcheck_report(&cfg)?;
    let entries: usize = report.params.iter().map(|p| p.checked).sum();
    let verdict = if report.passed() { "PASS" } else { "FAIL" };
    let mut line = format!(
        "{verdict}, max rel err {:.3e} (tolerance {:e}, {} tensors, {entries} entries)",
        report.max_rel_err(),
        report.options.tolerance,
        report.params.len()
    );
    if !report.passed() {
        let worst = report
            .params
            .iter()
            .max_by(|x, y| x.max_rel_err.total_cmp(&y.max_rel_err))
            .map_or("", |p| p.name.as_str());
        line.push_str(&format!(", worst {worst}"));
    }
    Ok((line, report))
}

pub fn gradcheck_report(cfg: &RunConfig) -> Result<GradCheckReport> {
    cfg.validate()?;
    let g = &cfg.gradcheck;
    let m = &cfg.model;
    if m.height != m.width {
        return Err(Error::Config {
            key: "height".into(),
            msg: "gradcheck phantoms are square; height must equal width".into(),
        });
    }
    let image = make_phantom(m.height, m.width, PhantomKind::RandomEllipses, g.seed)?;
    let item = crate::io::simulate("gradcheck", &image, g.seed, &cfg.acquisition)?;
    let params = generic_point(&ModelParams::init(m, cfg.init_seed)?, g.output_scale, g.seed)?;
    let options = GradCheckOptions {
        step: g.step,
        stencil: Stencil::Central2,
        scale: ErrorScale::Group,
        tolerance: g.tolerance,
        floor: 1e-8,
        max_entries: Some(g.entries),
        seed: g.seed,
    };
    loss_gradcheck(
        &item.sample,
        &params,
        &PartitionSpec::new(g.rho, g.seed),
        &cfg.train.weights,
        &cfg.train.ssim,
        &options,
    )
}

pub fn cmd_classical(a: &ClassicalArgs) -> Result<String> {
    let item = load_item(&a.kspace)?;
    let cfg = CPPAConfig::new(a.tau, a.sigma, a.theta, a.threshold, a.iters, a.tol)?;
    let (x, trace) = solve(&item.sample.kspace, item.sample.sens.as_ref(), &cfg)?;
    write_image(&x, &a.out)?;
    if let Some(path) = &a.trace {
        write_text(path, &trace.to_csv())?;
    }
    Ok(format!(
        "{} iterations, final residual {:.3e}, image written to {}",
        trace.iterations(),
        trace.final_residual(),
        a.out.display()
    ))
}
