//! Memoized tail integrals `H(x) = ∫_x^∞ h(v) dv`.
//!
//! The all-holes small-cell evaluator needs `H` at every abscissa its `z1`
//! integrator visits, and each `h(v)` is itself a quadrature. Once the
//! number of requests passes a threshold, `H` is tabulated on a knot grid
//! (with knots on every kink of `h`) and answered by cubic Hermite
//! interpolation, using `H' = -h` for the slopes.

use super::settle;
use crate::quadrature::{integrate, integrate_tail, QuadConfig, QuadError};

/// Sub-panels per segment between consecutive structural knots.
const PANELS_PER_SEGMENT: usize = 12;

#[derive(Debug, Clone)]
struct HermiteTable {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl HermiteTable {
    fn eval(&self, x: f64) -> f64 {
        let n = self.knots.len();
        let i = self.knots.partition_point(|k| *k <= x).clamp(1, n - 1) - 1;
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let w = x1 - x0;
        let t = ((x - x0) / w).clamp(0.0, 1.0);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.values[i] + h10 * w * self.slopes[i] + h01 * self.values[i + 1] + h11 * w * self.slopes[i + 1]
    }
}

/// `H(x) = ∫_x^∞ h` for `x` in `[lo, hi]`, with the part beyond `hi` done as
/// a semi-infinite integral with decay length `tail_scale`.
pub(crate) struct TailMemo<F> {
    h: F,
    lo: f64,
    hi: f64,
    kinks: Vec<f64>,
    tail_scale: f64,
    cfg: QuadConfig,
    threshold: usize,
    requests: usize,
    beyond_hi: Option<f64>,
    table: Option<HermiteTable>,
}

impl<F: FnMut(f64) -> f64> TailMemo<F> {
    /// `kinks` are points where `h` is not smooth.
    pub(crate) fn new(
        h: F,
        lo: f64,
        hi: f64,
        kinks: &[f64],
        tail_scale: f64,
        cfg: QuadConfig,
        threshold: usize,
    ) -> Self {
        let mut kinks: Vec<f64> = kinks.iter().copied().filter(|k| *k > lo && *k < hi).collect();
        kinks.sort_by(f64::total_cmp);
        kinks.dedup();
        Self { h, lo, hi, kinks, tail_scale, cfg, threshold, requests: 0, beyond_hi: None, table: None }
    }

    fn beyond_hi(&mut self) -> Result<f64, QuadError> {
        if let Some(v) = self.beyond_hi {
            return Ok(v);
        }
        let v = settle(integrate_tail(&mut self.h, self.hi, self.tail_scale, &self.cfg))?;
        self.beyond_hi = Some(v);
        Ok(v)
    }

    /// Direct evaluation, bypassing the table.
    pub(crate) fn direct(&mut self, x: f64) -> Result<f64, QuadError> {
        let mut total = self.beyond_hi()?;
        let mut right = self.hi;
        for k in self.kinks.iter().rev().copied() {
            if k <= x {
                break;
            }
            total += settle(integrate(&mut self.h, k, right, &self.cfg))?;
            right = k;
        }
        if x < right {
            total += settle(integrate(&mut self.h, x, right, &self.cfg))?;
        }
        Ok(total)
    }

    fn build(&mut self) -> Result<(), QuadError> {
        // Structural knots: endpoints, kinks and a geometric ladder so that
        // panels widen away from where h has its features.
        let mut structural = vec![self.lo];
        structural.extend(self.kinks.iter().copied());
        let first = self.kinks.first().copied().unwrap_or(self.hi);
        let mut step = ((first - self.lo) / 4.0).max((self.hi - self.lo) / 4096.0);
        let mut x = self.kinks.last().copied().unwrap_or(self.lo);
        loop {
            x += step;
            if x >= self.hi {
                break;
            }
            structural.push(x);
            step *= 2.0;
        }
        structural.push(self.hi);
        structural.sort_by(f64::total_cmp);
        structural.dedup();

        let mut knots = Vec::with_capacity(structural.len() * PANELS_PER_SEGMENT);
        for w in structural.windows(2) {
            for j in 0..PANELS_PER_SEGMENT {
                knots.push(w[0] + (w[1] - w[0]) * j as f64 / PANELS_PER_SEGMENT as f64);
            }
        }
        knots.push(self.hi);

        let n = knots.len();
        let mut values = vec![0.0; n];
        values[n - 1] = self.beyond_hi()?;
        for i in (0..n - 1).rev() {
            values[i] = values[i + 1] + settle(integrate(&mut self.h, knots[i], knots[i + 1], &self.cfg))?;
        }
        let slopes = knots.iter().map(|&k| -(self.h)(k)).collect();
        self.table = Some(HermiteTable { knots, values, slopes });
        Ok(())
    }

    /// `H(x)`; tabulated once more than `threshold` requests have been made.
    pub(crate) fn at(&mut self, x: f64) -> Result<f64, QuadError> {
        self.requests += 1;
        if self.table.is_none() && self.requests > self.threshold {
            self.build()?;
        }
        if x >= self.lo && x <= self.hi {
            if let Some(t) = &self.table {
                return Ok(t.eval(x));
            }
        }
        self.direct(x)
    }

    #[cfg(test)]
    pub(crate) fn is_tabulated(&self) -> bool {
        self.table.is_some()
    }
}
