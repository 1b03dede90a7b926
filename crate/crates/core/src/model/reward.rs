use serde::{Deserialize, Serialize};

use super::ModelError;

/// Coefficients of the per-match reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardParams {
    /// Flag fare per new rider.
    pub flag_fare: f64,
    /// Revenue per origin-destination kilometre.
    pub per_km: f64,
    /// Cost per minute of rider waiting.
    pub per_wait_min: f64,
    /// Cost per detour minute up to the tolerance.
    pub per_detour_min: f64,
    /// Cost per detour minute beyond the tolerance.
    pub per_excess_detour_min: f64,
    /// Detour tolerance in minutes.
    pub detour_tolerance_min: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            flag_fare: 100.0,
            per_km: 40.0,
            per_wait_min: 5.0,
            per_detour_min: 0.0,
            per_excess_detour_min: 10.0,
            detour_tolerance_min: 15.0,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let all = [
            self.flag_fare,
            self.per_km,
            self.per_wait_min,
            self.per_detour_min,
            self.per_excess_detour_min,
            self.detour_tolerance_min,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::Argument("reward parameters must be finite".into()));
        }
        if !(self.per_excess_detour_min >= self.per_detour_min && self.per_detour_min >= 0.0) {
            return Err(ModelError::Argument(
                "reward.per_excess_detour_min >= reward.per_detour_min >= 0 is required".into(),
            ));
        }
        if self.detour_tolerance_min <= 0.0 {
            return Err(ModelError::Argument("reward.detour_tolerance_min must be positive".into()));
        }
        Ok(())
    }

    /// Piecewise-linear delay cost of a total detour.
    pub fn penalty(&self, total_detour_min: f64) -> f64 {
        let k = self.detour_tolerance_min;
        self.per_detour_min * total_detour_min.min(k) + self.per_excess_detour_min * (total_detour_min - k).max(0.0)
    }
}

/// Reward for serving a new rider:
/// `fare + per_km * dis - per_wait * wait - pen(sum after) + pen(sum before)`.
///
/// `detours_after` covers the new rider and the passengers already
/// assigned; `detours_before` covers the existing passengers only.
pub fn compute_reward(
    params: &RewardParams,
    od_km: f64,
    wait_min: f64,
    detours_after: &[f64],
    detours_before: &[f64],
) -> Result<f64, ModelError> {
    let bad = |x: &f64| !(x.is_finite() && *x >= 0.0);
    if bad(&od_km) || bad(&wait_min) || detours_after.iter().any(bad) || detours_before.iter().any(bad) {
        return Err(ModelError::Argument("reward inputs must be finite and non-negative".into()));
    }
    let after: f64 = detours_after.iter().sum();
    let before: f64 = detours_before.iter().sum();
    Ok(params.flag_fare + params.per_km * od_km - params.per_wait_min * wait_min - params.penalty(after)
        + params.penalty(before))
}
