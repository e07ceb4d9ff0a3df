use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{is_power_of_two, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PhantomKind {
    SheppLogan,
    RandomEllipses,
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhantomKind::SheppLogan => "shepp-logan",
            PhantomKind::RandomEllipses => "random-ellipses",
        })
    }
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shepp-logan" => Ok(PhantomKind::SheppLogan),
            "random-ellipses" => Ok(PhantomKind::RandomEllipses),
            other => Err(Error::invalid(
                "phantom",
                format!("unknown kind `{other}` (expected shepp-logan or random-ellipses)"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Ellipse {
    intensity: f64,
    a: f64,
    b: f64,
    x0: f64,
    y0: f64,
    /// Rotation in radians.
    phi: f64,
}

impl Ellipse {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.phi.sin_cos();
        let (dx, dy) = (x - self.x0, y - self.y0);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.a).powi(2) + (v / self.b).powi(2) <= 1.0
    }
}

// Modified Shepp-Logan head (higher-contrast intensities).
const SHEPP_LOGAN: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

fn shepp_logan() -> Vec<Ellipse> {
    SHEPP_LOGAN
        .iter()
        .map(|&(intensity, a, b, x0, y0, deg)| Ellipse {
            intensity,
            a,
            b,
            x0,
            y0,
            phi: deg.to_radians(),
        })
        .collect()
}

/// A bright head ellipse plus 4 to 11 inner ellipses of random signed
/// intensity, orientation and size.
fn random_ellipses(rng: &mut ChaCha8Rng) -> Vec<Ellipse> {
    let count = rng.random_range(5..=12);
    let head = Ellipse {
        intensity: rng.random_range(0.6..1.0),
        a: rng.random_range(0.6..0.9),
        b: rng.random_range(0.7..0.95),
        x0: rng.random_range(-0.05..0.05),
        y0: rng.random_range(-0.05..0.05),
        phi: rng.random_range(-0.3..0.3),
    };
    let mut out = vec![head];
    for _ in 1..count {
        let r = rng.random_range(0.0..0.6f64);
        let t = rng.random_range(0.0..2.0 * PI);
        out.push(Ellipse {
            intensity: rng.random_range(-0.4..0.4),
            a: rng.random_range(0.05..0.35),
            b: rng.random_range(0.05..0.35),
            x0: head.x0 + r * t.cos() * head.a,
            y0: head.y0 + r * t.sin() * head.b,
            phi: rng.random_range(0.0..PI),
        });
    }
    out
}

/// Piecewise-constant phantom on `[-1, 1]^2`, magnitude clamped to
/// `[0, 1]`, zero phase.
pub fn make_phantom(height: usize, width: usize, kind: PhantomKind, seed: u64) -> Result<Tensor> {
    if !is_power_of_two(height) || !is_power_of_two(width) {
        return Err(Error::invalid(
            "make_phantom",
            format!("dims must be powers of two, got {height}x{width}"),
        ));
    }
    let ellipses = match kind {
        PhantomKind::SheppLogan => shepp_logan(),
        PhantomKind::RandomEllipses => random_ellipses(&mut ChaCha8Rng::seed_from_u64(seed)),
    };
    let mut data = Vec::with_capacity(2 * height * width);
    for i in 0..height {
        // image row 0 is the top, y grows upward
        let y = 1.0 - (2 * i + 1) as f64 / height as f64;
        for j in 0..width {
            let x = (2 * j + 1) as f64 / width as f64 - 1.0;
            let v: f64 = ellipses
                .iter()
                .filter(|e| e.contains(x, y))
                .map(|e| e.intensity)
                .sum();
            data.push(v.clamp(0.0, 1.0));
            data.push(0.0);
        }
    }
    Tensor::complex(&[height, width], data)
}

/// Multiplies an image by `exp(i phi)` with `phi` a random low-order
/// polynomial of amplitude below `pi / 2`.
pub fn apply_smooth_phase(image: &Tensor, seed: u64) -> Result<Tensor> {
    image.expect_dtype("apply_smooth_phase", crate::tensor::DType::Complex)?;
    let s = image.shape();
    if s.len() != 2 {
        return Err(Error::invalid(
            "apply_smooth_phase",
            format!("expected H x W, got {s:?}"),
        ));
    }
    let (h, w) = (s[0], s[1]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<f64> = (0..6).map(|_| rng.random_range(-0.25..0.25) * PI).collect();
    let mut out = image.to_vec();
    for i in 0..h {
        let y = 1.0 - (2 * i + 1) as f64 / h as f64;
        for j in 0..w {
            let x = (2 * j + 1) as f64 / w as f64 - 1.0;
            let phi = c[0] + c[1] * x + c[2] * y + 0.5 * (c[3] * x * x + c[4] * x * y + c[5] * y * y);
            let (sn, cs) = phi.sin_cos();
            let p = 2 * (i * w + j);
            let (a, b) = (out[p], out[p + 1]);
            out[p] = a * cs - b * sn;
            out[p + 1] = a * sn + b * cs;
        }
    }
    Tensor::complex(&[h, w], out)
}
