use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::model::{ModelKind, ProcessModel, SafeSet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    /// Normal-approximation 95% half-width.
    pub half_width_95: f64,
    pub successes: u64,
    pub samples: u64,
}

const TRAJECTORIES_PER_TASK: u64 = 1 << 14;

/// Fraction of simulated trajectories from `s0` that stay in `safe` at every
/// step `1..=horizon`.
///
/// Trajectory `t` draws from a ChaCha stream keyed by `(seed, t)`, so the
/// estimate does not depend on how trajectories are scheduled.
pub fn monte_carlo(
    model: &ProcessModel,
    safe: &SafeSet,
    horizon: usize,
    s0: &[f64],
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    if samples == 0 {
        return Err(Error::InvalidParameter("Monte Carlo needs at least one sample".into()));
    }
    if model.dim() != safe.dim() || s0.len() != model.dim() {
        return Err(Error::DimensionMismatch(
            "model, safe set and initial state dimensions differ".into(),
        ));
    }
    if !safe.contains(s0) {
        return Err(Error::OutsideSafeSet(format!("initial state {s0:?}")));
    }
    let n = model.dim();
    let gaussian = model.kind() == ModelKind::LinearGaussian;
    let tasks = samples.div_ceil(TRAJECTORIES_PER_TASK);
    let successes: u64 = (0..tasks)
        .into_par_iter()
        .map(|task| {
            let lo = task * TRAJECTORIES_PER_TASK;
            let hi = (lo + TRAJECTORIES_PER_TASK).min(samples);
            let mut state = vec![0.0; n];
            let mut next = vec![0.0; n];
            let mut ok = 0u64;
            for t in lo..hi {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t);
                state.copy_from_slice(s0);
                let mut inside = true;
                for _ in 0..horizon {
                    for (j, slot) in next.iter_mut().enumerate() {
                        *slot = if gaussian {
                            model.draw(j, &state, rng.sample(StandardNormal), 0.5)
                        } else {
                            model.draw(j, &state, 0.0, rng.gen_range(f64::EPSILON..1.0))
                        };
                    }
                    std::mem::swap(&mut state, &mut next);
                    if !safe.contains(&state) {
                        inside = false;
                        break;
                    }
                }
                ok += u64::from(inside);
            }
            ok
        })
        .sum();
    let p = successes as f64 / samples as f64;
    Ok(McEstimate {
        estimate: p,
        half_width_95: 1.96 * (p * (1.0 - p) / samples as f64).sqrt(),
        successes,
        samples,
    })
}
