//! Tuned starting configurations for the bundled problems.

use crate::coupler::RunConfig;
use crate::error::Result;
use crate::objectives::{length_scale_for, GaussianMixture, GolombObjective, GolombRuler};

/// Upper edge of the default init box `[0, hi]^order`.
///
/// Orders with a known optimum start a quarter above its length, which keeps
/// the search near short rulers. Larger orders get a box wide enough that a
/// random ruler is usually valid: about `C(order, 2)^2`.
pub fn golomb_box_hi(order: usize) -> f64 {
    match GolombRuler::optimal_length(order) {
        Some(len) => (1.25 * len as f64).ceil().max(order as f64),
        None => {
            let pairs = (order * order.saturating_sub(1) / 2) as f64;
            pairs * pairs
        }
    }
}

/// Smallest `k >= 3` whose length penalty stays below one across the box.
pub fn golomb_k(order: usize) -> u32 {
    length_scale_for(golomb_box_hi(order)).max(3)
}

/// Default objective and run settings for an order-`order` ruler.
///
/// The HMC particle runs without the Metropolis correction: on this
/// piecewise-constant loss nearly every proposal adds a violation, and the
/// correction pins the particle to the global best.
pub fn golomb(order: usize) -> (GolombObjective, RunConfig) {
    let objective = GolombObjective::new(order, golomb_k(order));
    let mut cfg = RunConfig::new(order, 0.0, golomb_box_hi(order));
    cfg.n_particles = 50;
    cfg.hmc.step_size = 0.3;
    cfg.hmc.num_steps = 10;
    cfg.hmc.metropolis = false;
    cfg.max_iters = 1000;
    // plateaus of a hundred iterations are common before a shorter ruler
    // turns up, so stagnation alone does not stop the run
    cfg.conv_window = cfg.max_iters;
    (objective, cfg)
}

/// Nine unit-variance modes four apart, the center weighted 0.2.
pub fn mixture_landscape() -> Result<GaussianMixture> {
    GaussianMixture::grid3x3(4.0, 1.0, 0.2)
}

/// Settings for [`mixture_landscape`]: a small swarm and an HMC path length
/// long enough for the particle's cloud to reach neighbouring modes.
pub fn mixture_config() -> RunConfig {
    let mut cfg = RunConfig::new(2, -8.0, 8.0);
    cfg.n_particles = 5;
    cfg.hmc.step_size = 1.0;
    cfg.hmc.num_steps = 10;
    cfg.hmc.metropolis = false;
    cfg.max_iters = 300;
    cfg.conv_window = cfg.max_iters;
    cfg
}
