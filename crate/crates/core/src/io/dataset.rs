//! Sample files and phantom datasets.
//!
//! A sample file is a [`TensorContainer`] with records
//! `kspace` (complex `C x H x W`), `mask.lines` (centered line indices),
//! `mask.meta` (`width, accel, pattern, seed_lo, seed_hi`), optionally
//! `sens` (complex coil maps) with `sens.calibration`, and optionally the
//! ground-truth `image` (complex `H x W`, used only for evaluation).
//! A dataset directory holds sample files plus `manifest.txt` with one
//! `file seed` line per sample.

use std::path::{Path, PathBuf};

use super::config::Acquisition;
use super::container::TensorContainer;
use crate::error::{Error, Result};
use crate::physics::{
    add_kspace_noise, forward_multi, forward_single, make_mask, make_phantom, synthetic_sensitivities,
    CoilSensitivities, KSpaceData, MaskPattern, PhantomKind, SamplingMask,
};
use crate::ssl::Sample;
use crate::tensor::{DType, Tensor};

pub const MANIFEST: &str = "manifest.txt";

/// Seed offsets so a sample's phantom, mask and noise draw from different
/// streams.
const MASK_STREAM: u64 = 0x6d61_736b;
const NOISE_STREAM: u64 = 0x6e6f_6973;

/// Acquired data of one sample, with its ground truth when known.
#[derive(Clone, Debug)]
pub struct DatasetItem {
    pub seed: u64,
    pub sample: Sample,
    pub image: Option<Tensor>,
}

/// Simulates the acquisition of `image` (real or complex) under `acq`.
pub fn simulate(id: &str, image: &Tensor, seed: u64, acq: &Acquisition) -> Result<DatasetItem> {
    let s = image.shape();
    if s.len() != 2 {
        return Err(Error::invalid(
            "simulate",
            format!("expected an H x W image, got {s:?}"),
        ));
    }
    let image = match image.dtype() {
        DType::Real => crate::tensor::ops::to_complex(image)?,
        DType::Complex => image.clone(),
    };
    let (h, w) = (s[0], s[1]);
    let mask = make_mask(w, acq.accel, acq.pattern, seed ^ MASK_STREAM)?;
    let (kspace, sens) = if acq.coils > 1 {
        let sens = synthetic_sensitivities(acq.coils, h, w, seed)?;
        (forward_multi(&image, &sens, &mask)?, Some(sens))
    } else {
        (forward_single(&image, &mask)?, None)
    };
    let kspace = add_kspace_noise(&kspace, acq.noise, seed ^ NOISE_STREAM)?;
    Ok(DatasetItem {
        seed,
        sample: Sample {
            id: id.to_string(),
            kspace,
            sens,
        },
        image: Some(image),
    })
}

/// `count` phantoms with seeds `seed, seed + 1, ...`.
pub fn phantom_dataset(
    count: usize,
    size: usize,
    kind: PhantomKind,
    seed: u64,
    acq: &Acquisition,
) -> Result<Vec<DatasetItem>> {
    (0..count as u64)
        .map(|i| {
            let s = seed.wrapping_add(i);
            simulate(
                &format!("sample_{i:04}"),
                &make_phantom(size, size, kind, s)?,
                s,
                acq,
            )
        })
        .collect()
}

fn pattern_code(p: MaskPattern) -> f64 {
    match p {
        MaskPattern::Equispaced => 0.0,
        MaskPattern::Random => 1.0,
    }
}

pub fn mask_records(c: &mut TensorContainer, mask: &SamplingMask) -> Result<()> {
    let lines: Vec<f64> = mask.line_set().iter().map(|&l| l as f64).collect();
    c.insert("mask.lines", &Tensor::real(&[lines.len()], lines)?)?;
    let seed = mask.seed();
    let meta = vec![
        mask.width() as f64,
        mask.acceleration() as f64,
        pattern_code(mask.pattern()),
        (seed & 0xffff_ffff) as f64,
        (seed >> 32) as f64,
    ];
    c.insert("mask.meta", &Tensor::real(&[5], meta)?)
}

fn as_index(v: f64, what: &str) -> Result<u64> {
    if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(53) {
        Ok(v as u64)
    } else {
        Err(Error::invalid(
            "dataset",
            format!("{what} `{v}` is not a non-negative integer"),
        ))
    }
}

pub fn mask_from_records(c: &TensorContainer) -> Result<SamplingMask> {
    let meta = c.require("mask.meta")?.data();
    if meta.len() != 5 {
        return Err(Error::invalid("dataset", "mask.meta must hold 5 values"));
    }
    let pattern = match meta[2] {
        0.0 => MaskPattern::Equispaced,
        1.0 => MaskPattern::Random,
        v => {
            return Err(Error::invalid(
                "dataset",
                format!("unknown mask pattern code {v}"),
            ))
        }
    };
    let seed = as_index(meta[3], "seed")? | (as_index(meta[4], "seed")? << 32);
    let lines = c
        .require("mask.lines")?
        .data()
        .iter()
        .map(|&v| as_index(v, "line index").map(|l| l as usize))
        .collect::<Result<Vec<_>>>()?;
    SamplingMask::from_parts(
        as_index(meta[0], "width")? as usize,
        as_index(meta[1], "acceleration")? as u32,
        pattern,
        seed,
        lines,
    )
}

pub fn item_to_container(item: &DatasetItem) -> Result<TensorContainer> {
    let mut c = TensorContainer::new();
    c.insert("kspace", item.sample.kspace.samples())?;
    mask_records(&mut c, item.sample.kspace.mask())?;
    if let Some(sens) = &item.sample.sens {
        c.insert("sens", sens.maps())?;
        c.insert(
            "sens.calibration",
            &Tensor::scalar(sens.calibration_width() as f64),
        )?;
    }
    if let Some(image) = &item.image {
        c.insert("image", image)?;
    }
    Ok(c)
}

pub fn item_from_container(c: &TensorContainer, id: &str, seed: u64) -> Result<DatasetItem> {
    let kspace = KSpaceData::new(c.require("kspace")?.clone(), mask_from_records(c)?)?;
    let sens = match c.get("sens") {
        Some(maps) => {
            let cal = c.get("sens.calibration").map(|t| t.data()[0]).unwrap_or(0.0);
            Some(CoilSensitivities::new(
                maps.clone(),
                as_index(cal, "calibration width")? as usize,
            )?)
        }
        None => None,
    };
    Ok(DatasetItem {
        seed,
        sample: Sample {
            id: id.to_string(),
            kspace,
            sens,
        },
        image: c.get("image").cloned(),
    })
}

pub fn save_item(item: &DatasetItem, path: &Path) -> Result<()> {
    item_to_container(item)?.save(path)
}

pub fn load_item(path: &Path) -> Result<DatasetItem> {
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sample");
    item_from_container(&TensorContainer::load(path)?, id, 0)
}

/// Writes `items` as `<id>.dunt` files plus the manifest.
pub fn write_dataset(dir: &Path, items: &[DatasetItem]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::new();
    let mut paths = Vec::with_capacity(items.len());
    for item in items {
        let name = format!("{}.dunt", item.sample.id);
        let path = dir.join(&name);
        save_item(item, &path)?;
        manifest.push_str(&format!("{name} {}\n", item.seed));
        paths.push(path);
    }
    let m = dir.join(MANIFEST);
    std::fs::write(&m, manifest).map_err(|e| Error::io(&m, e))?;
    Ok(paths)
}

/// Loads every sample listed in the directory's manifest, in order.
pub fn read_dataset(dir: &Path) -> Result<Vec<DatasetItem>> {
    let m = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&m).map_err(|e| Error::io(&m, e))?;
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (name, seed) = line
            .split_once(' ')
            .and_then(|(n, s)| s.trim().parse::<u64>().ok().map(|s| (n, s)))
            .ok_or_else(|| Error::format(&m, format!("line {}: expected `file seed`", i + 1)))?;
        let path = dir.join(name);
        let id = name.strip_suffix(".dunt").unwrap_or(name);
        items.push(item_from_container(&TensorContainer::load(&path)?, id, seed)?);
    }
    if items.is_empty() {
        return Err(Error::format(&m, "manifest lists no samples"));
    }
    Ok(items)
}
