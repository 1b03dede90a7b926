use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{euclidean_km, Action, EncodedState, GeoPoint, StateEncoder, VehicleState, ZoneId};

use super::MatchingError;

pub type RiderId = u64;

/// Action values for a batch of encoded states.
pub trait ValueModel {
    fn action_count(&self) -> usize;
    /// Row-major `states.len() x action_count()` values in reward units.
    fn action_values(&self, states: &[EncodedState]) -> Vec<f64>;
}

/// Immediate-reward estimates for every action of a batch of states.
pub trait RewardModel {
    fn action_count(&self) -> usize;
    /// Row-major `states.len() x action_count()` estimates in reward units.
    fn reward_estimates(&self, states: &[EncodedState]) -> Vec<f64>;
}

/// A vehicle offered to the matching round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchVehicle {
    pub id: usize,
    /// Current state with dummy candidate zones.
    pub state: VehicleState,
    pub position: GeoPoint,
}

/// A waiting rider.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchRider {
    pub id: RiderId,
    pub origin: GeoPoint,
    pub destination: GeoPoint,
    pub origin_zone: ZoneId,
    pub dest_zone: ZoneId,
    pub pooling_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchingParams {
    /// Maximum vehicle-to-pickup distance.
    #[serde(default = "default_radius")]
    pub radius_km: f64,
    /// Weight given to explored edges.
    #[serde(default = "default_q_bar")]
    pub exploration_weight: f64,
    /// Exploration keeps actions whose estimated reward exceeds this.
    #[serde(default = "default_threshold")]
    pub reward_threshold: f64,
}

fn default_radius() -> f64 {
    1.2
}

fn default_q_bar() -> f64 {
    1e6
}

fn default_threshold() -> f64 {
    100.0
}

impl Default for MatchingParams {
    fn default() -> Self {
        Self { radius_km: default_radius(), exploration_weight: default_q_bar(), reward_threshold: default_threshold() }
    }
}

impl MatchingParams {
    pub fn validate(&self) -> Result<(), MatchingError> {
        if !(self.radius_km.is_finite() && self.radius_km > 0.0) {
            return Err(MatchingError::Config(format!("matching.radius_km must be positive, got {}", self.radius_km)));
        }
        if !(self.exploration_weight.is_finite() && self.exploration_weight > 0.0) {
            return Err(MatchingError::Config(format!(
                "matching.exploration_weight must be positive, got {}",
                self.exploration_weight
            )));
        }
        if !self.reward_threshold.is_finite() {
            return Err(MatchingError::Config("matching.reward_threshold must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateEdge {
    /// Index into the vehicle slice.
    pub vehicle: usize,
    /// Index into the rider slice.
    pub rider: usize,
    pub weight: f64,
    pub action: Action,
    pub explored: bool,
    /// Value estimate of `action` at the candidate state.
    pub value: f64,
    pub state: EncodedState,
}

/// Everything a round of edge construction needs besides the participants.
pub struct EdgeContext<'a> {
    pub encoder: &'a StateEncoder,
    pub params: &'a MatchingParams,
    pub values: &'a dyn ValueModel,
    /// Filters exploration when present.
    pub guider: Option<&'a dyn RewardModel>,
    pub epsilon: f64,
    /// Actions allowed for every rider (stations, service mode).
    pub action_mask: &'a [bool],
    pub seed: u64,
    pub round: u64,
}

/// Valid actions for one rider under the global mask.
pub fn rider_mask(global: &[bool], rider: &MatchRider) -> Vec<bool> {
    global.iter().enumerate().map(|(a, &ok)| ok && (a == 0 || !rider.pooling_only)).collect()
}

fn argmax_valid(values: &[f64], mask: &[bool]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (a, (&q, &ok)) in values.iter().zip(mask).enumerate() {
        if ok && best.map_or(true, |(_, b)| q > b) {
            best = Some((a, q));
        }
    }
    best
}

/// Builds weighted vehicle-rider edges for one matching round.
///
/// Each feasible pair draws its own exploration coin from a stream keyed
/// by `(seed, round, vehicle id, rider id)`.
pub fn build_edges(
    ctx: &EdgeContext<'_>,
    vehicles: &[MatchVehicle],
    riders: &[MatchRider],
) -> Result<Vec<CandidateEdge>, MatchingError> {
    let n_actions = ctx.values.action_count();
    if ctx.action_mask.len() != n_actions {
        return Err(MatchingError::Config(format!(
            "action mask has {} entries, value model {n_actions}",
            ctx.action_mask.len()
        )));
    }
    if let Some(g) = ctx.guider {
        if g.action_count() != n_actions {
            return Err(MatchingError::Config("guider and value model disagree on action count".into()));
        }
    }

    // feasible pairs, with candidate states de-duplicated per vehicle
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    let mut states: Vec<EncodedState> = Vec::new();
    let mut keys: Vec<(usize, ZoneId, ZoneId)> = Vec::new();
    for (vi, v) in vehicles.iter().enumerate() {
        if v.state.vacant == 0 {
            continue;
        }
        for (ri, r) in riders.iter().enumerate() {
            if euclidean_km(v.position, r.origin) > ctx.params.radius_km {
                continue;
            }
            let key = (vi, r.origin_zone, r.dest_zone);
            let idx = match keys.iter().rposition(|k| *k == key) {
                Some(i) => i,
                None => {
                    let s = v.state.with_candidate(r.origin_zone, r.dest_zone);
                    states.push(ctx.encoder.encode(&s).map_err(MatchingError::Model)?);
                    keys.push(key);
                    keys.len() - 1
                }
            };
            pairs.push((vi, ri, idx));
        }
    }
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let q = ctx.values.action_values(&states);
    let g = ctx.guider.map(|g| g.reward_estimates(&states));

    let mut edges = Vec::with_capacity(pairs.len());
    for (vi, ri, si) in pairs {
        let (v, r) = (&vehicles[vi], &riders[ri]);
        let mask = rider_mask(ctx.action_mask, r);
        let qs = &q[si * n_actions..(si + 1) * n_actions];
        let Some((best, best_q)) = argmax_valid(qs, &mask) else {
            continue;
        };
        let mut rng = crate::seed::rng(ctx.seed, &[ctx.round, v.id as u64, r.id]);
        let explore = ctx.epsilon > 0.0 && rng.gen::<f64>() < ctx.epsilon;
        let mut edge = CandidateEdge {
            vehicle: vi,
            rider: ri,
            weight: best_q,
            action: Action(best as u16),
            explored: false,
            value: best_q,
            state: states[si],
        };
        if explore {
            let pool: Vec<usize> = match &g {
                Some(g) => {
                    let gs = &g[si * n_actions..(si + 1) * n_actions];
                    (0..n_actions).filter(|&a| mask[a] && gs[a] > ctx.params.reward_threshold).collect()
                }
                None => (0..n_actions).filter(|&a| mask[a]).collect(),
            };
            // an empty filtered set keeps the exploitation edge
            if !pool.is_empty() {
                let a = pool[rng.gen_range(0..pool.len())];
                edge.action = Action(a as u16);
                edge.explored = true;
                edge.weight = ctx.params.exploration_weight;
                edge.value = qs[a];
            }
        }
        edges.push(edge);
    }
    Ok(edges)
}
