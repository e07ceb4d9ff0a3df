use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Fraction of the line budget given to the low-frequency block.
pub const CENTER_FRACTION: f64 = 0.32;

pub const ACCELERATIONS: [u32; 4] = [1, 4, 8, 12];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MaskPattern {
    Equispaced,
    Random,
}

impl fmt::Display for MaskPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaskPattern::Equispaced => "equispaced",
            MaskPattern::Random => "random",
        })
    }
}

impl FromStr for MaskPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equispaced" => Ok(MaskPattern::Equispaced),
            "random" => Ok(MaskPattern::Random),
            other => Err(Error::invalid(
                "mask",
                format!("unknown pattern `{other}` (expected equispaced or random)"),
            )),
        }
    }
}

/// Cartesian phase-encode mask. Line indices are in the centered
/// convention: column `width / 2` holds DC.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplingMask {
    width: usize,
    acceleration: u32,
    pattern: MaskPattern,
    seed: u64,
    center_count: usize,
    line_set: Vec<usize>,
}

/// Lines acquired for a given width and acceleration.
pub fn line_budget(width: usize, acceleration: u32) -> usize {
    (width as f64 / acceleration as f64).round() as usize
}

/// `round(0.32 * budget)` taken to the nearest even value, at least 2.
pub fn center_count_for(budget: usize) -> usize {
    (2.0 * (CENTER_FRACTION * budget as f64 / 2.0).round()).max(2.0) as usize
}

/// Fully-sampled center block `[width/2 - c/2, width/2 + c/2)`.
pub fn center_block(width: usize, center_count: usize) -> std::ops::Range<usize> {
    let start = width / 2 - center_count / 2;
    start..start + center_count
}

pub fn make_mask(width: usize, acceleration: u32, pattern: MaskPattern, seed: u64) -> Result<SamplingMask> {
    if !crate::tensor::is_power_of_two(width) {
        return Err(Error::invalid(
            "make_mask",
            format!("width must be a power of two, got {width}"),
        ));
    }
    if !ACCELERATIONS.contains(&acceleration) {
        return Err(Error::invalid(
            "make_mask",
            format!("acceleration must be one of {ACCELERATIONS:?}, got {acceleration}"),
        ));
    }
    let budget = line_budget(width, acceleration);
    let center_count = center_count_for(budget);
    if budget < center_count || center_count > width {
        return Err(Error::invalid(
            "make_mask",
            format!("line budget {budget} is smaller than the center block {center_count}"),
        ));
    }
    let center = center_block(width, center_count);
    let outer: Vec<usize> = (0..width).filter(|j| !center.contains(j)).collect();
    let remaining = budget - center_count;

    let mut lines: Vec<usize> = center.collect();
    match pattern {
        MaskPattern::Equispaced => {
            if remaining > 0 {
                let step = outer.len() as f64 / remaining as f64;
                lines.extend((0..remaining).map(|i| outer[(step / 2.0 + i as f64 * step) as usize]));
            }
        }
        MaskPattern::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            lines.extend(
                sample(&mut rng, outer.len(), remaining)
                    .into_iter()
                    .map(|i| outer[i]),
            );
        }
    }
    lines.sort_unstable();
    Ok(SamplingMask {
        width,
        acceleration,
        pattern,
        seed,
        center_count,
        line_set: lines,
    })
}

impl SamplingMask {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn acceleration(&self) -> u32 {
        self.acceleration
    }

    pub fn pattern(&self) -> MaskPattern {
        self.pattern
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn center_count(&self) -> usize {
        self.center_count
    }

    /// Sorted centered column indices.
    pub fn line_set(&self) -> &[usize] {
        &self.line_set
    }

    pub fn center_lines(&self) -> std::ops::Range<usize> {
        center_block(self.width, self.center_count)
    }

    pub fn is_empty(&self) -> bool {
        self.line_set.is_empty()
    }

    /// Same metadata, different line subset. Lines must come from `self`.
    pub fn with_lines(&self, mut lines: Vec<usize>) -> Result<SamplingMask> {
        lines.sort_unstable();
        lines.dedup();
        if let Some(&bad) = lines.iter().find(|l| self.line_set.binary_search(l).is_err()) {
            return Err(Error::invalid(
                "mask",
                format!("line {bad} is not in the parent mask"),
            ));
        }
        Ok(SamplingMask {
            line_set: lines,
            ..self.clone()
        })
    }

    /// Storage column (DC at index 0) for a centered index.
    pub fn storage_column(&self, centered: usize) -> usize {
        (centered + self.width / 2) % self.width
    }

    /// Per-column 0/1 weights in storage order, as consumed by
    /// [`crate::tensor::ops::apply_mask`].
    pub fn column_weights(&self) -> Arc<Vec<f64>> {
        let mut w = vec![0.0; self.width];
        for &l in &self.line_set {
            w[self.storage_column(l)] = 1.0;
        }
        Arc::new(w)
    }

    pub fn sampled_fraction(&self) -> f64 {
        self.line_set.len() as f64 / self.width as f64
    }

    pub fn to_text(&self) -> String {
        let lines: Vec<String> = self.line_set.iter().map(|l| l.to_string()).collect();
        format!(
            "{} {} {} {}\n{}\n",
            self.width,
            self.acceleration,
            self.pattern,
            self.seed,
            lines.join(",")
        )
    }

    pub fn from_text(text: &str) -> Result<SamplingMask> {
        let bad = |msg: String| Error::invalid("mask", msg);
        let mut it = text.lines();
        let header = it.next().ok_or_else(|| bad("empty mask text".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(bad(format!(
                "header needs `width accel pattern seed`, got `{header}`"
            )));
        }
        let num = |s: &str, what: &str| {
            s.parse::<u64>()
                .map_err(|_| bad(format!("{what} `{s}` is not an unsigned integer")))
        };
        let width = num(fields[0], "width")? as usize;
        let acceleration = num(fields[1], "acceleration")? as u32;
        let pattern: MaskPattern = fields[2].parse()?;
        let seed = num(fields[3], "seed")?;
        let body = it.next().unwrap_or("").trim();
        let mut line_set = Vec::new();
        if !body.is_empty() {
            for s in body.split(',') {
                line_set.push(num(s.trim(), "line index")? as usize);
            }
        }
        Self::from_parts(width, acceleration, pattern, seed, line_set)
    }

    /// Rebuilds a stored mask. Lines must be strictly increasing and below
    /// `width`; the center count is recomputed from width and acceleration.
    pub fn from_parts(
        width: usize,
        acceleration: u32,
        pattern: MaskPattern,
        seed: u64,
        line_set: Vec<usize>,
    ) -> Result<SamplingMask> {
        let bad = |msg: String| Error::invalid("mask", msg);
        if line_set.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("line indices must be strictly increasing".into()));
        }
        if line_set.last().is_some_and(|&l| l >= width) {
            return Err(bad(format!("line index out of range for width {width}")));
        }
        if acceleration == 0 {
            return Err(bad("acceleration must be positive".into()));
        }
        let center_count = center_count_for(line_budget(width, acceleration)).min(width);
        Ok(SamplingMask {
            width,
            acceleration,
            pattern,
            seed,
            center_count,
            line_set,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<SamplingMask> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_and_center_for_256_at_4x() {
        let m = make_mask(256, 4, MaskPattern::Equispaced, 0).unwrap();
        assert_eq!(m.line_set().len(), 64);
        assert_eq!(m.center_count(), 20);
        assert!(m.center_lines().all(|l| m.line_set().contains(&l)));
    }

    #[test]
    fn full_acceleration_samples_everything() {
        for p in [MaskPattern::Equispaced, MaskPattern::Random] {
            let m = make_mask(32, 1, p, 3).unwrap();
            assert_eq!(m.line_set(), (0..32).collect::<Vec<_>>().as_slice());
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(make_mask(48, 4, MaskPattern::Random, 0).is_err());
        assert!(make_mask(64, 3, MaskPattern::Random, 0).is_err());
        assert!(make_mask(8, 12, MaskPattern::Random, 0).is_err());
    }

    #[test]
    fn text_round_trip() {
        let m = make_mask(64, 8, MaskPattern::Random, 11).unwrap();
        assert_eq!(SamplingMask::from_text(&m.to_text()).unwrap(), m);
        assert!(SamplingMask::from_text("64 4 random 1\n3,2\n").is_err());
        assert!(SamplingMask::from_text("64 4 zigzag 1\n").is_err());
    }

    #[test]
    fn storage_column_puts_dc_first() {
        let m = make_mask(16, 1, MaskPattern::Random, 0).unwrap();
        assert_eq!(m.storage_column(8), 0);
        assert_eq!(m.storage_column(0), 8);
        assert_eq!(m.storage_column(15), 7);
    }
}
