//! Parallel Monte Carlo ensembles and the analytic-vs-simulation comparisons.

use harvest_core::averaging::{joint_spd_with, DensityField, StationaryModel};
use harvest_core::mcs::{simulate_trajectory, EnsembleEstimates, SimConfig};
use harvest_core::{ExcitationParams, NoiseParams, Result, SystemParams};
use rayon::prelude::*;

/// [`harvest_core::mcs::run_ensemble`] with trajectories spread over the
/// current rayon pool. Statistics are pooled in trajectory order, so the
/// result does not depend on the thread count.
pub fn run_ensemble_par(
    p: &SystemParams,
    np: &NoiseParams,
    ex: &ExcitationParams,
    cfg: &SimConfig,
) -> Result<EnsembleEstimates> {
    cfg.validate(p, np, ex)?;
    let trajs = (0..cfg.n_traj as u64)
        .into_par_iter()
        .map(|k| simulate_trajectory(p, np, ex, cfg, k))
        .collect::<Result<Vec<_>>>()?;
    EnsembleEstimates::from_trajectories(p, ex, cfg, &trajs)
}

/// Analytic joint density on exactly the histogram grid of `cfg`.
pub fn analytic_on_sim_grid(p: &SystemParams, np: &NoiseParams, cfg: &SimConfig) -> Result<DensityField> {
    let model = StationaryModel::for_grid(*p, *np, &cfg.grid)?;
    joint_spd_with(&model, &cfg.grid, false)
}
