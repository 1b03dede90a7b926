use serde::{Deserialize, Serialize};

use crate::model::{euclidean_km, Action, StateEncoder};
use crate::routing::{insert_order, RoutePlan, Stop, TravelTimeProvider};
use crate::transit::TransitNetwork;

use super::{rider_mask, solve_assignment, CandidateEdge, MatchResult, MatchRider, MatchVehicle, MatchingError, MatchingParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsertionParams {
    /// Largest extra trip time of a transit drop-off over the direct drive.
    #[serde(default = "default_deadline")]
    pub deadline_min: f64,
    /// Constant added to negated costs so every feasible edge is positive.
    #[serde(default = "default_offset")]
    pub weight_offset: f64,
    /// Transit zones tried per pair, best estimates first.
    #[serde(default = "default_candidates")]
    pub transit_candidates: usize,
}

fn default_deadline() -> f64 {
    15.0
}

fn default_offset() -> f64 {
    1000.0
}

fn default_candidates() -> usize {
    3
}

impl Default for InsertionParams {
    fn default() -> Self {
        Self {
            deadline_min: default_deadline(),
            weight_offset: default_offset(),
            transit_candidates: default_candidates(),
        }
    }
}

/// Myopic insertion baseline: each pair's weight is the offset minus the
/// route minutes its cheapest admissible drop-off adds to the vehicle.
#[allow(clippy::too_many_arguments)]
pub fn sequential_insertion_match<P: TravelTimeProvider + ?Sized>(
    vehicles: &[MatchVehicle],
    plans: &[&RoutePlan],
    riders: &[MatchRider],
    provider: &P,
    transit: Option<&TransitNetwork>,
    action_mask: &[bool],
    encoder: &StateEncoder,
    params: &MatchingParams,
    insertion: &InsertionParams,
) -> Result<MatchResult, MatchingError> {
    if plans.len() != vehicles.len() {
        return Err(MatchingError::Config("one route plan per vehicle required".into()));
    }
    let mut edges = Vec::new();
    for (ri, r) in riders.iter().enumerate() {
        let mask = rider_mask(action_mask, r);
        let direct = provider.travel_time(r.origin, r.destination);
        // transit zones ranked by an estimate that ignores other passengers
        let mut transit_options: Vec<(f64, Action, crate::model::GeoPoint, f64)> = Vec::new();
        if let Some(net) = transit {
            for (zone, choice) in net.destination_table(r.destination).zones() {
                if !mask.get(zone as usize).copied().unwrap_or(false) {
                    continue;
                }
                let extra = provider.travel_time(r.origin, choice.point) + choice.post_minutes - direct;
                if extra <= insertion.deadline_min {
                    transit_options.push((extra, Action::zone(zone), choice.point, choice.post_minutes));
                }
            }
            transit_options.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            transit_options.truncate(insertion.transit_candidates);
        }

        for (vi, v) in vehicles.iter().enumerate() {
            if v.state.vacant == 0 || euclidean_km(v.position, r.origin) > params.radius_km {
                continue;
            }
            let plan = plans[vi];
            let mut best: Option<(f64, Action)> = None;
            let mut consider = |action: Action, dropoff, post: f64| -> Result<(), MatchingError> {
                let ins = insert_order(plan, Stop::pickup(r.id, r.origin), Stop::dropoff(r.id, dropoff), provider)?;
                if !action.is_door_to_door() && ins.new_onboard() + post - direct > insertion.deadline_min {
                    return Ok(());
                }
                let cost = ins.plan.end_time() - plan.end_time();
                if best.map_or(true, |(c, a)| cost < c || (cost == c && action < a)) {
                    best = Some((cost, action));
                }
                Ok(())
            };
            if mask[0] {
                consider(Action::DOOR_TO_DOOR, r.destination, 0.0)?;
            }
            for &(_, action, point, post) in &transit_options {
                consider(action, point, post)?;
            }
            if let Some((cost, action)) = best {
                let state = encoder.encode(&v.state.with_candidate(r.origin_zone, r.dest_zone)).map_err(MatchingError::Model)?;
                edges.push(CandidateEdge {
                    vehicle: vi,
                    rider: ri,
                    weight: insertion.weight_offset - cost,
                    action,
                    explored: false,
                    value: -cost,
                    state,
                });
            }
        }
    }
    edges.sort_by_key(|e| (e.vehicle, e.rider));
    Ok(solve_assignment(&edges, vehicles.len(), riders.len()))
}
