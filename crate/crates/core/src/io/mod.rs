//! File formats: the named-tensor container, sample files and datasets,
//! checkpoints, run configuration and 16-bit PGM export.

mod checkpoint;
mod config;
mod container;
mod dataset;
mod pgm;

pub use checkpoint::{
    load_params, load_state, params_from_container, params_to_container, save_params, save_state,
    state_from_container, state_to_container,
};
pub use config::{Acquisition, DataConsistency, GradCheckSettings, RunConfig};
pub use container::{TensorContainer, MAGIC, VERSION};
pub use dataset::{
    item_from_container, item_to_container, load_item, mask_from_records, mask_records, phantom_dataset,
    read_dataset, save_item, simulate, write_dataset, DatasetItem, MANIFEST,
};
pub use pgm::{export_pgm, parse_pgm, pgm_bytes, read_pgm, Pgm, PGM_MAX};

use std::path::Path;

use crate::error::{Error, Result};

/// Writes a text artifact (CSV, manifest, mask).
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
