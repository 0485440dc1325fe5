//! Counter-based Gaussian noise.
//!
//! Every random stream is a ChaCha8 generator keyed by a 64-bit subkey that is
//! a hash of `(master, path index, stream id)`. Results therefore never depend
//! on the order in which paths are simulated.

use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Stream id of the driving Brownian increments.
pub const STREAM_BROWNIAN: u64 = 0x5745_0000;
/// Stream id of the auxiliary noise that enlarges the filtration.
pub const STREAM_EXTRA: u64 = 0x4558_0000;
/// Stream id used by samplers (assumption checks, property testers).
pub const STREAM_SAMPLER: u64 = 0x5341_0000;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child key from a parent key and a counter.
#[inline]
pub fn subkey(parent: u64, counter: u64) -> u64 {
    mix64(mix64(parent) ^ counter.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Seed of the `index`-th Monte Carlo path under `master`.
#[inline]
pub fn path_seed(master: u64, index: u64) -> u64 {
    subkey(master, index)
}

pub fn stream_rng(key: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(key)
}

pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Uniform in `[0, 1)` with 53 bits of precision.
pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    use rand_core::RngCore;
    (rng.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// A strictly increasing time grid `s = t_0 < ... < t_N = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidInput("time grid needs at least two points".into()));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "time grid must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self { times })
    }

    pub fn uniform(start: f64, end: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(end > start) {
            return Err(Error::InvalidInput(
                "uniform grid needs steps >= 1 and end > start".into(),
            ));
        }
        let dt = (end - start) / steps as f64;
        let mut times: Vec<f64> = (0..=steps).map(|i| start + dt * i as f64).collect();
        times[steps] = end;
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of intervals.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn dt(&self, i: usize) -> f64 {
        self.times[i + 1] - self.times[i]
    }

    /// First grid index whose time is `>= t` (up to round-off), clamped to the grid.
    pub fn index_at_or_after(&self, t: f64) -> usize {
        let tol = 1e-12 * (1.0 + libm::fabs(t));
        self.times.partition_point(|&ti| ti < t - tol).min(self.times.len() - 1)
    }
}

/// Keys of the two noise streams of one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseKeys {
    pub brownian: u64,
    pub extra: u64,
}

impl NoiseKeys {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            brownian: subkey(seed, STREAM_BROWNIAN),
            extra: subkey(seed, STREAM_EXTRA),
        }
    }
}

/// Brownian increments plus an optional independent auxiliary noise on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub grid: TimeGrid,
    /// `steps × dim_w`, row-major.
    pub dw: Vec<f64>,
    pub dim_w: usize,
    /// `steps × dim_extra`, row-major; empty when `dim_extra == 0`.
    pub extra: Vec<f64>,
    pub dim_extra: usize,
    pub seed: u64,
}

impl NoisePath {
    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    pub fn dw_at(&self, i: usize) -> &[f64] {
        &self.dw[i * self.dim_w..(i + 1) * self.dim_w]
    }

    pub fn extra_at(&self, i: usize) -> &[f64] {
        &self.extra[i * self.dim_extra..(i + 1) * self.dim_extra]
    }

    /// A path with all increments zero.
    pub fn zero(grid: TimeGrid, dim_w: usize, dim_extra: usize) -> Self {
        let n = grid.steps();
        Self {
            grid,
            dw: alloc::vec![0.0; n * dim_w],
            dim_w,
            extra: alloc::vec![0.0; n * dim_extra],
            dim_extra,
            seed: 0,
        }
    }
}

/// Samples a noise path; both streams are derived from `seed`.
pub fn sample_noise(grid: &TimeGrid, seed: u64, dim_w: usize, dim_extra: usize) -> NoisePath {
    sample_noise_with_keys(grid, seed, NoiseKeys::from_seed(seed), dim_w, dim_extra)
}

/// Samples a noise path from explicit stream keys.
pub fn sample_noise_with_keys(
    grid: &TimeGrid,
    seed: u64,
    keys: NoiseKeys,
    dim_w: usize,
    dim_extra: usize,
) -> NoisePath {
    let n = grid.steps();
    let dw = gaussian_increments(grid, keys.brownian, dim_w);
    let extra = if dim_extra == 0 {
        Vec::new()
    } else {
        gaussian_increments(grid, keys.extra, dim_extra)
    };
    debug_assert_eq!(dw.len(), n * dim_w);
    NoisePath {
        grid: grid.clone(),
        dw,
        dim_w,
        extra,
        dim_extra,
        seed,
    }
}

fn gaussian_increments(grid: &TimeGrid, key: u64, dim: usize) -> Vec<f64> {
    let mut rng = stream_rng(key);
    let mut out = Vec::with_capacity(grid.steps() * dim);
    for i in 0..grid.steps() {
        let sd = libm::sqrt(grid.dt(i));
        for _ in 0..dim {
            out.push(sd * standard_normal(&mut rng));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_is_bitwise_identical() {
        let grid = TimeGrid::uniform(0.0, 1.0, 64).unwrap();
        let a = sample_noise(&grid, 7, 2, 1);
        let b = sample_noise(&grid, 7, 2, 1);
        assert_eq!(a, b);
        let c = sample_noise(&grid, 8, 2, 1);
        assert_ne!(a.dw, c.dw);
    }

    #[test]
    fn brownian_stream_ignores_extra_dimension() {
        let grid = TimeGrid::uniform(0.0, 1.0, 50).unwrap();
        let a = sample_noise(&grid, 11, 1, 0);
        let b = sample_noise(&grid, 11, 1, 2);
        assert!(a.extra.is_empty());
        assert_eq!(b.extra.len(), 100);
        assert_eq!(a.dw, b.dw);
    }

    #[test]
    fn increment_variance_matches_step() {
        // N = 1e4 steps of dt = 1e-4, seed 0.
        let grid = TimeGrid::uniform(0.0, 1.0, 10_000).unwrap();
        let p = sample_noise(&grid, 0, 1, 0);
        let n = p.dw.len() as f64;
        let mean = p.dw.iter().sum::<f64>() / n;
        let var = p.dw.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
        let dt = 1e-4;
        assert!(var >= 0.9 * dt && var <= 1.1 * dt, "var = {var}");
        assert!(mean.abs() <= 5.0 * libm::sqrt(dt / n), "mean = {mean}");
    }

    #[test]
    fn index_snapping() {
        let grid = TimeGrid::uniform(0.0, 1.0, 4).unwrap();
        assert_eq!(grid.index_at_or_after(0.5), 2);
        assert_eq!(grid.index_at_or_after(0.3), 2);
        assert_eq!(grid.index_at_or_after(-1.0), 0);
        assert_eq!(grid.index_at_or_after(2.0), 4);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(alloc::vec![0.0, 0.0]).is_err());
        assert!(TimeGrid::uniform(1.0, 0.0, 3).is_err());
    }
}
