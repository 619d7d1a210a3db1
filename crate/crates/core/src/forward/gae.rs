use crate::{Error, Result};

/// Generalized advantage estimates for one episode.
///
/// `values` carries one entry per step plus the bootstrap value of the state
/// after the last step (0 for a finished episode).
pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Result<Vec<f64>> {
    if values.len() != rewards.len() + 1 {
        return Err(Error::DimensionMismatch {
            context: "gae values (rewards + bootstrap)",
            expected: rewards.len() + 1,
            actual: values.len(),
        });
    }
    if !(0.0..=1.0).contains(&gamma) || !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!(
            "gae gamma and lambda must lie in [0, 1], got {gamma} and {lambda}"
        )));
    }
    let mut adv = vec![0.0; rewards.len()];
    let mut running = 0.0;
    for t in (0..rewards.len()).rev() {
        let delta = rewards[t] + gamma * values[t + 1] - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
    }
    Ok(adv)
}

/// Value targets: `advantages + values` (the bootstrap entry is ignored).
pub fn returns(advantages: &[f64], values: &[f64]) -> Vec<f64> {
    advantages.iter().zip(values).map(|(a, v)| a + v).collect()
}
