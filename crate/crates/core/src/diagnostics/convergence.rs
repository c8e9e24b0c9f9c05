use crate::error::{Error, Result};
use crate::solver::ScalarState;

/// L² distances of every state to the last one, the surrogate limit.
/// States on coarser grids are injected spectrally into the finer one.
pub fn strong_convergence_check(states: &[ScalarState]) -> Result<Vec<f64>> {
    if states.len() < 2 {
        return Err(Error::Input("need at least two states".into()));
    }
    let reference = &states[states.len() - 1].theta;
    states.iter().map(|s| s.theta.l2_distance(reference)).collect()
}
