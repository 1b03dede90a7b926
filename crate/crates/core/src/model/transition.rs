use super::{
    euclidean_km, compute_reward, Action, GeoPoint, ModelError, PassengerRecord, RewardParams, VehicleState, ZoneId,
    SEAT_CAPACITY,
};

/// The rider being matched, as seen by the state update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedRider {
    pub origin_zone: ZoneId,
    pub dest_zone: ZoneId,
    pub origin: GeoPoint,
    pub destination: GeoPoint,
    pub pooling_only: bool,
}

/// Route-derived timing for a match.
///
/// `existing_remaining[k]` is the new remaining on-board time of the
/// passenger in seat `k` (ignored for vacant seats).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteDelta {
    /// Estimated minutes from request to pickup.
    pub wait_min: f64,
    /// Minutes from pickup to drop-off for the new rider.
    pub new_onboard_min: f64,
    /// Transit plus walking minutes after drop-off (0 for door-to-door).
    pub after_dropoff_min: f64,
    /// Direct solo drive, origin to destination.
    pub direct_min: f64,
    pub existing_remaining: [f64; SEAT_CAPACITY],
}

/// Result of booking a match on a vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchOutcome {
    pub next: VehicleState,
    pub reward: f64,
    /// Seat index given to the new rider.
    pub seat: usize,
}

/// Books `rider` on the vehicle with drop-off choice `action`.
///
/// The rider takes the lowest vacant seat. Existing passengers get their
/// remaining time from `delta` and their detour grows by the same amount
/// (floored at zero). The returned state keeps dummy candidate zones.
pub fn apply_match(
    state: &VehicleState,
    rider: &MatchedRider,
    action: Action,
    delta: &RouteDelta,
    params: &RewardParams,
    dummy: ZoneId,
) -> Result<MatchOutcome, ModelError> {
    if state.vacant == 0 {
        return Err(ModelError::State("no vacant seat".into()));
    }
    if rider.pooling_only && !action.is_door_to_door() {
        return Err(ModelError::Contract(format!(
            "pooling-only rider cannot take drop-off action {}",
            action.0
        )));
    }
    let seat = state
        .passengers
        .iter()
        .position(|p| p.is_vacant())
        .ok_or_else(|| ModelError::State("vacant count disagrees with passenger records".into()))?;

    let mut next = *state;
    let mut before = Vec::with_capacity(SEAT_CAPACITY);
    let mut after = Vec::with_capacity(SEAT_CAPACITY + 1);
    for (k, p) in next.passengers.iter_mut().enumerate() {
        if p.is_vacant() {
            continue;
        }
        let new_remaining = delta.existing_remaining[k];
        if !(new_remaining.is_finite() && new_remaining >= 0.0) {
            return Err(ModelError::Argument(format!("seat {k} remaining time {new_remaining} invalid")));
        }
        before.push(p.detour_min);
        p.detour_min = (p.detour_min + new_remaining - p.remaining_min).max(0.0);
        p.remaining_min = new_remaining;
        after.push(p.detour_min);
    }

    let dropoff_zone = if action.is_door_to_door() { rider.dest_zone } else { action.0 as ZoneId };
    let detour = (delta.new_onboard_min + delta.after_dropoff_min - delta.direct_min).max(0.0);
    next.passengers[seat] = PassengerRecord {
        dropoff_zone,
        remaining_min: delta.new_onboard_min,
        detour_min: detour,
        destination: Some(rider.destination),
        via_transit: !action.is_door_to_door(),
    };
    after.push(detour);
    next.vacant -= 1;
    next.candidate_origin = dummy;
    next.candidate_dest = dummy;

    let od_km = euclidean_km(rider.origin, rider.destination);
    let reward = compute_reward(params, od_km, delta.wait_min, &after, &before)?;
    Ok(MatchOutcome { next, reward, seat })
}
