use serde::{Deserialize, Serialize};

use super::initial::ScalarState;
use super::integrate::DissipationLedger;
use crate::error::{Error, Result};

/// The function β in ∫β(θ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "coefficients", rename_all = "snake_case")]
pub enum Beta {
    Identity,
    Square,
    Cubic,
    /// Σ c_i θ^i
    Polynomial(Vec<f64>),
}

impl Beta {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Beta::Identity => x,
            Beta::Square => x * x,
            Beta::Cubic => x * x * x,
            Beta::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci),
        }
    }
}

fn integral(state: &ScalarState, beta: &Beta) -> f64 {
    let vals = state.theta.real();
    match beta {
        // Parseval: exact for the trigonometric interpolant.
        Beta::Square => state.theta.mean_square(),
        Beta::Identity => state.theta.mean(0),
        _ => vals.iter().map(|&x| beta.eval(x)).sum::<f64>() / vals.len() as f64,
    }
}

/// |∫β(θ(t)) − ∫β(θ(0))| along a trajectory.
pub fn renormalization_defect(trajectory: &[ScalarState], beta: &Beta) -> Result<Vec<f64>> {
    let first = trajectory
        .first()
        .ok_or_else(|| Error::Input("empty trajectory".into()))?;
    let base = integral(first, beta);
    Ok(trajectory.iter().map(|s| (integral(s, beta) - base).abs()).collect())
}

/// max_t |variance(t) − variance(0) + 2·dissipation(t)| / variance(0).
pub fn energy_balance_residual(ledger: &DissipationLedger) -> Result<f64> {
    let v0 = *ledger
        .variance
        .first()
        .ok_or_else(|| Error::Input("empty ledger".into()))?;
    if v0 == 0.0 {
        return Err(Error::DegenerateData("initial variance is zero".into()));
    }
    Ok(ledger
        .variance
        .iter()
        .zip(&ledger.dissipation_cumulative)
        .map(|(v, d)| (v - v0 + 2.0 * d).abs())
        .fold(0.0, f64::max)
        / v0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fabricated_ledger() {
        let ledger = DissipationLedger {
            epsilon: 0.1,
            resolution: 8,
            dt: 0.1,
            steps: 1,
            times: vec![0.0, 1.0],
            dissipation_cumulative: vec![0.0, 0.3],
            variance: vec![0.5, 0.5],
            balance_residual: vec![0.0, 0.6],
            truncation_loss: 0.0,
        };
        assert!((energy_balance_residual(&ledger).unwrap() - 0.6 / 0.5).abs() < 1e-15);
        let mut zero = ledger.clone();
        zero.variance = vec![0.0, 0.0];
        assert!(matches!(energy_balance_residual(&zero), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn polynomial_evaluation() {
        assert_eq!(Beta::Polynomial(vec![1.0, 0.0, 2.0]).eval(3.0), 19.0);
        assert!(renormalization_defect(&[], &Beta::Identity).is_err());
    }
}
