//! Finite feature maps for one-dimensional Gaussian RBF kernels.
//!
//! A Gaussian `G_s(u - v)` equals, up to a constant, the integral over `t` of
//! `G_{s/sqrt2}(u - t) G_{s/sqrt2}(v - t)`. Replacing the integral with a sum
//! over `Z` pivots gives the map `phi(u) = [G_{s/sqrt2}(u - t_1), ...]` and
//! `G_s(u - v) ≈ c phi(u)·phi(v)`. The constant `c` is fitted by least squares
//! ([`PivotGrid::calibrate`]) and folded into the map as `sqrt(c)`.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// Number of least-squares sample points per axis used by default.
pub const DEFAULT_CALIBRATION_SAMPLES: usize = 41;

static OUT_OF_RANGE: AtomicU64 = AtomicU64::new(0);

/// Number of feature-map evaluations so far whose input fell outside the
/// pivot interval. Such inputs are legal; the counter is diagnostic only.
pub fn out_of_range_count() -> u64 {
    OUT_OF_RANGE.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbfKernel {
    sigma: f64,
}

impl RbfKernel {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma > 0.0 && sigma.is_finite() {
            Ok(Self { sigma })
        } else {
            Err(Error::invalid(format!(
                "RBF bandwidth must be positive, got {sigma}"
            )))
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    #[inline]
    pub fn eval(&self, delta: f64) -> f64 {
        gauss(self, delta)
    }
}

/// `exp(-delta^2 / (2 sigma^2))`.
#[inline]
pub fn gauss(kernel: &RbfKernel, delta: f64) -> f64 {
    (-delta * delta / (2.0 * kernel.sigma * kernel.sigma)).exp()
}

/// `Z` evenly spaced values on `[lo, hi]`, endpoints included; the midpoint when `Z = 1`.
pub fn uniform_pivots(z: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if z == 0 {
        return Err(Error::invalid("pivot count must be at least 1"));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!(
            "pivot interval [{lo}, {hi}] is empty"
        )));
    }
    if z == 1 {
        return Ok(vec![0.5 * (lo + hi)]);
    }
    let step = (hi - lo) / (z - 1) as f64;
    Ok((0..z)
        .map(|p| if p + 1 == z { hi } else { lo + step * p as f64 })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PivotGrid {
    pivots: Vec<f64>,
    kernel: RbfKernel,
    c: f64,
    interval: (f64, f64),
}

impl PivotGrid {
    pub fn new(pivots: Vec<f64>, sigma: f64, c: f64) -> Result<Self> {
        let kernel = RbfKernel::new(sigma)?;
        if pivots.is_empty() {
            return Err(Error::invalid("a pivot grid needs at least one pivot"));
        }
        if pivots.windows(2).any(|w| !(w[0] < w[1])) || pivots.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid(
                "pivots must be finite and strictly increasing",
            ));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!(
                "calibration constant must be positive, got {c}"
            )));
        }
        let interval = (pivots[0], pivots[pivots.len() - 1]);
        Ok(Self {
            pivots,
            kernel,
            c,
            interval,
        })
    }

    /// Uniform pivots on `[lo, hi]` with `c = 1`; the interval is kept for
    /// calibration even when `Z = 1`.
    pub fn uniform(z: usize, lo: f64, hi: f64, sigma: f64) -> Result<Self> {
        let mut grid = Self::new(uniform_pivots(z, lo, hi)?, sigma, 1.0)?;
        grid.interval = (lo, hi);
        Ok(grid)
    }

    /// Uniform grid calibrated with [`DEFAULT_CALIBRATION_SAMPLES`].
    pub fn calibrated(z: usize, lo: f64, hi: f64, sigma: f64) -> Result<Self> {
        Self::uniform(z, lo, hi, sigma)?.calibrate(DEFAULT_CALIBRATION_SAMPLES)
    }

    pub fn pivots(&self) -> &[f64] {
        &self.pivots
    }

    pub fn len(&self) -> usize {
        self.pivots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pivots.is_empty()
    }

    pub fn sigma(&self) -> f64 {
        self.kernel.sigma
    }

    pub fn kernel(&self) -> RbfKernel {
        self.kernel
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    /// Unscaled map entry `G_{sigma/sqrt2}(u - pivot) = exp(-(u - pivot)^2 / sigma^2)`.
    #[inline]
    fn raw(&self, u: f64, pivot: f64) -> f64 {
        let d = u - pivot;
        (-d * d / (self.kernel.sigma * self.kernel.sigma)).exp()
    }

    /// Writes `sqrt(c) phi(u)` into `out` (length `Z`).
    pub fn feature_map_into(&self, u: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.pivots.len());
        if u < self.interval.0 || u > self.interval.1 {
            OUT_OF_RANGE.fetch_add(1, Ordering::Relaxed);
        }
        let scale = self.c.sqrt();
        for (o, &p) in out.iter_mut().zip(&self.pivots) {
            *o = scale * self.raw(u, p);
        }
    }

    pub fn feature_map(&self, u: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.pivots.len()];
        self.feature_map_into(u, &mut out);
        out
    }

    /// `[phi(x); phi(y); phi(z)]`, approximating the sum of three per-axis Gaussians.
    pub fn feature_map_3d(&self, x: [f64; 3]) -> Vec<f64> {
        let mut out = vec![0.0; 3 * self.pivots.len()];
        self.feature_map_3d_into(x, &mut out);
        out
    }

    pub fn feature_map_3d_into(&self, x: [f64; 3], out: &mut [f64]) {
        let z = self.pivots.len();
        for (axis, block) in out.chunks_exact_mut(z).enumerate() {
            self.feature_map_into(x[axis], block);
        }
    }

    /// `c phi(u)·phi(v)`.
    pub fn approx_kernel(&self, u: f64, v: f64) -> f64 {
        self.c
            * self
                .pivots
                .iter()
                .map(|&p| self.raw(u, p) * self.raw(v, p))
                .sum::<f64>()
    }

    /// Refits `c` by least squares over all pairs of `sample_count` evenly
    /// spaced points of the pivot interval.
    pub fn calibrate(&self, sample_count: usize) -> Result<Self> {
        if sample_count < 2 {
            return Err(Error::invalid("calibration needs at least 2 sample points"));
        }
        let (lo, hi) = self.interval;
        let step = (hi - lo) / (sample_count - 1) as f64;
        let samples: Vec<f64> = (0..sample_count).map(|a| lo + step * a as f64).collect();
        self.calibrate_on(&samples)
    }

    /// Least-squares fit of `c` over all ordered pairs of `samples`.
    pub fn calibrate_on(&self, samples: &[f64]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid("calibration needs at least 2 sample points"));
        }
        let maps: Vec<Vec<f64>> = samples
            .iter()
            .map(|&u| self.pivots.iter().map(|&p| self.raw(u, p)).collect())
            .collect();
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, &u) in samples.iter().enumerate() {
            for (b, &v) in samples.iter().enumerate() {
                let design: f64 = maps[a].iter().zip(&maps[b]).map(|(x, y)| x * y).sum();
                num += gauss(&self.kernel, u - v) * design;
                den += design * design;
            }
        }
        let c = num / den;
        if !(den > 0.0) || !(c > 0.0) || !c.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "calibration design is degenerate (sigma {}, {} pivots)",
                self.kernel.sigma,
                self.pivots.len()
            )));
        }
        Ok(Self { c, ..self.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_values() {
        let k = RbfKernel::new(1.0).unwrap();
        assert_eq!(gauss(&k, 0.0), 1.0);
        assert!((gauss(&k, 1.0) - 0.606_530_659_712_633_4).abs() < 1e-15);
        for d in [0.1, 0.7, 3.3] {
            assert_eq!(gauss(&k, d), gauss(&k, -d));
            assert!(gauss(&k, d) < 1.0 && gauss(&k, d) > 0.0);
        }
        assert!(RbfKernel::new(0.0).is_err());
    }

    #[test]
    fn pivot_layouts() {
        assert_eq!(
            uniform_pivots(5, -1.0, 1.0).unwrap(),
            vec![-1.0, -0.5, 0.0, 0.5, 1.0]
        );
        assert_eq!(uniform_pivots(2, 0.0, 1.0).unwrap(), vec![0.0, 1.0]);
        assert_eq!(uniform_pivots(1, 0.0, 1.0).unwrap(), vec![0.5]);
        assert!(uniform_pivots(0, 0.0, 1.0).is_err());
        assert!(uniform_pivots(3, 1.0, 1.0).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(PivotGrid::new(vec![], 1.0, 1.0).is_err());
        assert!(PivotGrid::new(vec![0.0, 0.0], 1.0, 1.0).is_err());
        assert!(PivotGrid::new(vec![0.0], 1.0, 0.0).is_err());
        assert!(PivotGrid::new(vec![0.0], -1.0, 1.0).is_err());
    }

    #[test]
    fn single_pivot_map() {
        let g = PivotGrid::new(vec![0.0], 0.5, 2.0).unwrap();
        assert_eq!(g.feature_map(0.0), vec![2.0f64.sqrt()]);
    }

    #[test]
    fn map_entries_positive_and_peak_at_pivot() {
        let g = PivotGrid::uniform(7, -1.0, 1.0, 0.4).unwrap();
        for (p, &pivot) in g.pivots().iter().enumerate() {
            let phi = g.feature_map(pivot);
            assert!(phi.iter().all(|&x| x > 0.0 && x <= g.c().sqrt()));
            let argmax = (0..phi.len())
                .max_by(|&a, &b| phi[a].total_cmp(&phi[b]))
                .unwrap();
            assert_eq!(argmax, p);
        }
    }

    #[test]
    fn map_3d_blocks_are_separable() {
        let g = PivotGrid::uniform(4, -1.0, 1.0, 0.6).unwrap();
        let a = g.feature_map_3d([0.0, 0.0, 0.0]);
        assert_eq!(&a[0..4], &a[4..8]);
        assert_eq!(&a[4..8], &a[8..12]);
        let b = g.feature_map_3d([0.0, 0.3, 0.0]);
        assert_eq!(&a[0..4], &b[0..4]);
        assert_eq!(&a[8..12], &b[8..12]);
        assert_ne!(&a[4..8], &b[4..8]);
    }

    #[test]
    fn map_3d_self_dot_approximates_three() {
        let g = PivotGrid::calibrated(10, -1.0, 1.0, 0.6).unwrap();
        let x = [0.1, -0.2, 0.3];
        let phi = g.feature_map_3d(x);
        let dot: f64 = phi.iter().map(|v| v * v).sum();
        assert!((dot - 3.0).abs() < 0.3, "{dot}");
    }

    #[test]
    fn calibration_centre_value() {
        let g = PivotGrid::calibrated(10, 0.0, 1.0, 0.5).unwrap();
        assert!((g.approx_kernel(0.5, 0.5) - 1.0).abs() <= 0.1);
    }

    #[test]
    fn calibration_is_symmetric_and_deterministic() {
        let g = PivotGrid::calibrated(6, 0.0, 1.0, 0.3).unwrap();
        assert_eq!(g.approx_kernel(0.2, 0.7), g.approx_kernel(0.7, 0.2));
        let h = PivotGrid::calibrated(6, 0.0, 1.0, 0.3).unwrap();
        assert_eq!(g.c(), h.c());
    }

    #[test]
    fn calibration_ignores_sample_order() {
        let g = PivotGrid::uniform(10, 0.0, 1.0, 0.5).unwrap();
        let mut samples: Vec<f64> = (0..30).map(|a| a as f64 / 29.0).collect();
        let forward = g.calibrate_on(&samples).unwrap().c();
        samples.reverse();
        samples.swap(3, 17);
        let shuffled = g.calibrate_on(&samples).unwrap().c();
        assert!((forward - shuffled).abs() <= 1e-12 * forward);
    }

    #[test]
    fn calibration_rejects_tiny_sample() {
        let g = PivotGrid::uniform(3, 0.0, 1.0, 0.3).unwrap();
        assert!(g.calibrate(1).is_err());
    }
}
