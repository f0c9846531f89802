//! Seeded test-direction dictionary for weak-form residuals.
//!
//! Each direction is `(a G, b G)` with `G = exp(-((x - x0)/w)^2) sin(m pi y)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::field::{Grid2D, Variation};
use crate::wavefields::WaveField;

pub const DEFAULT_SEED: u64 = 20_240_611;
pub const DICTIONARY_SIZE: usize = 5;
/// Relative probe step for first variations.
pub const GATEAUX_STEP: f64 = 1e-4;
/// Relative probe step for Hessian corners.
pub const HESSIAN_STEP: f64 = 1e-4;

/// Relative probe steps, multiplied by the state scale over the direction's max-norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeSteps {
    pub gateaux: f64,
    pub hessian: f64,
}

impl Default for ProbeSteps {
    fn default() -> Self {
        Self {
            gateaux: GATEAUX_STEP,
            hessian: HESSIAN_STEP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectionSpec {
    pub id: usize,
    pub center: f64,
    pub width: f64,
    pub mode: u32,
    pub rho_weight: f64,
    pub sigma_weight: f64,
}

impl DirectionSpec {
    pub fn sample(&self, grid: &Grid2D) -> Variation {
        let m = f64::from(self.mode);
        let shape =
            |x: f64, y: f64| (-((x - self.center) / self.width).powi(2)).exp() * (m * PI * y).sin();
        Variation {
            d_rho: grid.from_fn(|x, y| self.rho_weight * shape(x, y)),
            d_sigma: grid.from_fn(|x, y| self.sigma_weight * shape(x, y)),
        }
    }
}

fn signed_weight(rng: &mut ChaCha8Rng) -> f64 {
    let v = rng.random_range(0.5..1.0);
    if rng.random_bool(0.5) {
        v
    } else {
        -v
    }
}

/// `count` directions drawn from `seed`; the same seed always gives the same list.
pub fn dictionary(seed: u64, count: usize) -> Vec<DirectionSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|id| DirectionSpec {
            id,
            center: rng.random_range(-2.0..2.0),
            width: rng.random_range(1.0..2.0),
            mode: rng.random_range(1..=3),
            rho_weight: signed_weight(&mut rng),
            sigma_weight: signed_weight(&mut rng),
        })
        .collect()
}

/// Size of the state against which probe steps are measured: the larger of
/// `max |rho - rho_bar|` and `max |sigma|`, or 1 for the quiescent state.
pub fn state_scale(wave: &WaveField, rho_bar: impl Fn(f64) -> f64) -> f64 {
    let g = &wave.grid;
    let mut s: f64 = 0.0;
    for ((i, j), r) in wave.rho.indexed_iter() {
        s = s
            .max((r - rho_bar(g.y(j))).abs())
            .max(wave.sigma[[i, j]].abs());
    }
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// `rel * scale / ||eta||_max`.
pub fn probe_step(rel: f64, scale: f64, eta: &Variation) -> f64 {
    let n = eta.max_norm();
    if n > 0.0 {
        rel * scale / n
    } else {
        rel * scale
    }
}
