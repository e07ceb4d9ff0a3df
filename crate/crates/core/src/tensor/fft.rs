//! Iterative radix-2 Cooley-Tukey transform on interleaved complex buffers.
//!
//! The 2-D transform runs the butterflies over whole rows at a time, so one
//! 1-D pass transforms every column of a plane; a transpose brings the rows
//! into column position for the second pass.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::rc::Rc;

pub(crate) struct Plan {
    n: usize,
    // exp(-2 pi i k / n) for k < n/2, interleaved
    twiddles: Vec<f64>,
    // (i, j) with i < j and j the bit reversal of i
    swaps: Vec<(usize, usize)>,
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, Rc<Plan>>> = RefCell::new(HashMap::new());
}

impl Plan {
    pub(crate) fn new(n: usize) -> Self {
        debug_assert!(super::is_power_of_two(n));
        let twiddles = (0..n / 2)
            .flat_map(|k| {
                let angle = -2.0 * PI * k as f64 / n as f64;
                [angle.cos(), angle.sin()]
            })
            .collect();
        let bits = n.trailing_zeros();
        let swaps = (0..n)
            .filter_map(|i| {
                let j = if n < 2 {
                    i
                } else {
                    i.reverse_bits() >> (usize::BITS - bits)
                };
                (j > i).then_some((i, j))
            })
            .collect();
        Plan { n, twiddles, swaps }
    }

    fn cached(n: usize) -> Rc<Plan> {
        PLANS.with(|p| Rc::clone(p.borrow_mut().entry(n).or_insert_with(|| Rc::new(Plan::new(n)))))
    }

    /// Unnormalized in-place transform along the leading axis of an
    /// `n x m` grid of interleaved complex values, i.e. of each of its `m`
    /// columns. `inverse` flips the sign of the exponent.
    pub(crate) fn run_columns(&self, buf: &mut [f64], m: usize, inverse: bool) {
        let (n, row) = (self.n, 2 * m);
        debug_assert_eq!(buf.len(), n * row);
        for &(i, j) in &self.swaps {
            let (lo, hi) = buf.split_at_mut(j * row);
            lo[i * row..(i + 1) * row].swap_with_slice(&mut hi[..row]);
        }
        let sign = if inverse { -1.0 } else { 1.0 };
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for block in buf.chunks_exact_mut(len * row) {
                let (top, bottom) = block.split_at_mut(half * row);
                for k in 0..half {
                    let wr = self.twiddles[2 * k * stride];
                    let wi = sign * self.twiddles[2 * k * stride + 1];
                    let a = &mut top[k * row..(k + 1) * row];
                    let b = &mut bottom[k * row..(k + 1) * row];
                    for (a, b) in a.chunks_exact_mut(2).zip(b.chunks_exact_mut(2)) {
                        let tr = b[0] * wr - b[1] * wi;
                        let ti = b[0] * wi + b[1] * wr;
                        b[0] = a[0] - tr;
                        b[1] = a[1] - ti;
                        a[0] += tr;
                        a[1] += ti;
                    }
                }
            }
            len <<= 1;
        }
    }

    /// Unnormalized in-place transform of `n` interleaved complex values.
    #[cfg(test)]
    fn run(&self, buf: &mut [f64], inverse: bool) {
        self.run_columns(buf, 1, inverse);
    }
}

/// Writes the transpose of the `h x w` complex grid `src` into `dst`,
/// multiplied by `scale`.
fn transpose(src: &[f64], dst: &mut [f64], h: usize, w: usize, scale: f64) {
    const TILE: usize = 16;
    for y0 in (0..h).step_by(TILE) {
        for x0 in (0..w).step_by(TILE) {
            for y in y0..(y0 + TILE).min(h) {
                for x in x0..(x0 + TILE).min(w) {
                    dst[2 * (x * h + y)] = src[2 * (y * w + x)] * scale;
                    dst[2 * (x * h + y) + 1] = src[2 * (y * w + x) + 1] * scale;
                }
            }
        }
    }
}

/// Unitary 2-D transform over the trailing `h x w` planes of `data`.
pub(crate) fn fft2_planes(data: &mut [f64], h: usize, w: usize, inverse: bool) {
    let plane = 2 * h * w;
    let (col_plan, row_plan) = (Plan::cached(h), Plan::cached(w));
    let scale = 1.0 / ((h * w) as f64).sqrt();
    let mut scratch = vec![0.0; plane];
    for p in data.chunks_exact_mut(plane) {
        col_plan.run_columns(p, w, inverse);
        transpose(p, &mut scratch, h, w, 1.0);
        row_plan.run_columns(&mut scratch, h, inverse);
        transpose(&scratch, p, w, h, scale);
    }
}
