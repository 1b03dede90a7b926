//! Per-vehicle decision model: zones, vehicle states and their encoding,
//! the match reward and the state update applied when a rider is booked.

mod grid;
mod reward;
mod state;
mod transition;

pub use grid::{euclidean_km, km_per_degree, GeoPoint, ZoneGrid, ZoneId, EARTH_RADIUS_KM};
pub use reward::{compute_reward, RewardParams};
pub use state::{
    augment_nonpooling, Action, EncodedState, NonPoolingState, PassengerRecord, StateEncoder, VehicleState,
    SEAT_CAPACITY, STATE_DIM,
};
pub use transition::{apply_match, MatchOutcome, MatchedRider, RouteDelta};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("zone {zone} out of range (max {max})")]
    ZoneOutOfRange { zone: ZoneId, max: ZoneId },
    #[error("point ({lat}, {lon}) lies outside the zone grid")]
    OutOfBounds { lat: f64, lon: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("contract violation: {0}")]
    Contract(String),
}
