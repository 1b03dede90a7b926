use serde::{Deserialize, Serialize};

use super::{GeoPoint, ModelError, ZoneId};

/// Seats per pooled vehicle.
pub const SEAT_CAPACITY: usize = 3;

/// Length of the encoded state vector.
pub const STATE_DIM: usize = 5 + 3 * SEAT_CAPACITY;

pub type EncodedState = [f32; STATE_DIM];

/// Drop-off choice for a matched rider: `0` is door-to-door, `z` drops the
/// rider at the best station in zone `z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Action(pub u16);

impl Action {
    pub const DOOR_TO_DOOR: Action = Action(0);

    pub fn zone(z: ZoneId) -> Action {
        Action(z as u16)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_door_to_door(self) -> bool {
        self.0 == 0
    }
}

/// One seat of the on-board passenger vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PassengerRecord {
    /// Drop-off zone (`0` when the seat is vacant).
    pub dropoff_zone: ZoneId,
    /// Estimated remaining minutes on board.
    pub remaining_min: f64,
    /// Accumulated extra minutes compared with a direct solo ride.
    pub detour_min: f64,
    /// Final destination, kept out of the encoding.
    #[serde(skip)]
    pub destination: Option<GeoPoint>,
    #[serde(skip)]
    pub via_transit: bool,
}

impl PassengerRecord {
    pub const VACANT: PassengerRecord = PassengerRecord {
        dropoff_zone: 0,
        remaining_min: 0.0,
        detour_min: 0.0,
        destination: None,
        via_transit: false,
    };

    pub fn occupied(dropoff_zone: ZoneId, remaining_min: f64, detour_min: f64) -> Self {
        Self { dropoff_zone, remaining_min, detour_min, destination: None, via_transit: false }
    }

    pub fn is_vacant(&self) -> bool {
        self.dropoff_zone == 0 && self.remaining_min == 0.0 && self.detour_min == 0.0
    }
}

/// Per-vehicle MDP state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub time_min: f64,
    pub zone: ZoneId,
    pub vacant: u8,
    pub passengers: [PassengerRecord; SEAT_CAPACITY],
    pub candidate_origin: ZoneId,
    pub candidate_dest: ZoneId,
}

impl VehicleState {
    /// An empty vehicle with no candidate rider.
    pub fn empty(time_min: f64, zone: ZoneId, dummy: ZoneId) -> Self {
        Self {
            time_min,
            zone,
            vacant: SEAT_CAPACITY as u8,
            passengers: [PassengerRecord::VACANT; SEAT_CAPACITY],
            candidate_origin: dummy,
            candidate_dest: dummy,
        }
    }

    pub fn occupied_count(&self) -> usize {
        self.passengers.iter().filter(|p| !p.is_vacant()).count()
    }

    pub fn with_candidate(mut self, origin: ZoneId, dest: ZoneId) -> Self {
        self.candidate_origin = origin;
        self.candidate_dest = dest;
        self
    }

    pub fn check_invariants(&self, dummy: ZoneId) -> Result<(), ModelError> {
        let vacant_records = SEAT_CAPACITY - self.occupied_count();
        if self.vacant as usize != vacant_records {
            return Err(ModelError::State(format!(
                "vacant seats {} but {} vacant records",
                self.vacant, vacant_records
            )));
        }
        if self.vacant == 0 && (self.candidate_origin != dummy || self.candidate_dest != dummy) {
            return Err(ModelError::State("full vehicle must carry dummy candidate zones".into()));
        }
        if self.passengers.iter().any(|p| p.remaining_min < 0.0 || p.detour_min < 0.0) {
            return Err(ModelError::State("negative passenger times".into()));
        }
        Ok(())
    }

    /// Unnormalised feature layout `[t, l, v, i1..i3, t1..t3, dt1..dt3, o, d]`.
    pub fn raw_features(&self) -> [f64; STATE_DIM] {
        let mut out = [0.0; STATE_DIM];
        out[0] = self.time_min;
        out[1] = self.zone as f64;
        out[2] = self.vacant as f64;
        for (k, p) in self.passengers.iter().enumerate() {
            out[3 + k] = p.dropoff_zone as f64;
            out[3 + SEAT_CAPACITY + k] = p.remaining_min;
            out[3 + 2 * SEAT_CAPACITY + k] = p.detour_min;
        }
        out[STATE_DIM - 2] = self.candidate_origin as f64;
        out[STATE_DIM - 1] = self.candidate_dest as f64;
        out
    }
}

/// Min-max normalisation of vehicle states into `[0, 1]`-ranged vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateEncoder {
    pub start_min: f64,
    pub horizon_min: f64,
    pub zone_count: u32,
}

impl StateEncoder {
    pub fn new(start_min: f64, horizon_min: f64, zone_count: u32) -> Self {
        Self { start_min, horizon_min, zone_count }
    }

    fn zone_scale(&self) -> f64 {
        (self.zone_count + 1) as f64
    }

    pub fn encode(&self, state: &VehicleState) -> Result<EncodedState, ModelError> {
        let dummy = self.zone_count + 1;
        let check_zone = |z: ZoneId, allow_zero: bool, allow_dummy: bool| -> Result<(), ModelError> {
            let ok = (z >= 1 && z <= self.zone_count) || (allow_zero && z == 0) || (allow_dummy && z == dummy);
            if ok {
                Ok(())
            } else {
                Err(ModelError::ZoneOutOfRange { zone: z, max: dummy })
            }
        };
        check_zone(state.zone, false, false)?;
        for p in &state.passengers {
            check_zone(p.dropoff_zone, true, false)?;
        }
        check_zone(state.candidate_origin, false, true)?;
        check_zone(state.candidate_dest, false, true)?;
        if state.vacant as usize > SEAT_CAPACITY {
            return Err(ModelError::State(format!("vacant seats {} exceed capacity", state.vacant)));
        }

        let raw = state.raw_features();
        let zs = self.zone_scale();
        let mut out = [0f32; STATE_DIM];
        out[0] = ((raw[0] - self.start_min) / self.horizon_min) as f32;
        out[1] = (raw[1] / zs) as f32;
        out[2] = (raw[2] / SEAT_CAPACITY as f64) as f32;
        for k in 0..SEAT_CAPACITY {
            out[3 + k] = (raw[3 + k] / zs) as f32;
            out[3 + SEAT_CAPACITY + k] = (raw[3 + SEAT_CAPACITY + k] / self.horizon_min) as f32;
            out[3 + 2 * SEAT_CAPACITY + k] = (raw[3 + 2 * SEAT_CAPACITY + k] / self.horizon_min) as f32;
        }
        out[STATE_DIM - 2] = (raw[STATE_DIM - 2] / zs) as f32;
        out[STATE_DIM - 1] = (raw[STATE_DIM - 1] / zs) as f32;
        Ok(out)
    }

    /// Inverse of [`StateEncoder::encode`]; integer fields are rounded.
    pub fn decode(&self, v: &EncodedState) -> VehicleState {
        let zs = self.zone_scale();
        let zone = |x: f32| (x as f64 * zs).round() as ZoneId;
        let minutes = |x: f32| x as f64 * self.horizon_min;
        let mut passengers = [PassengerRecord::VACANT; SEAT_CAPACITY];
        for (k, p) in passengers.iter_mut().enumerate() {
            *p = PassengerRecord::occupied(
                zone(v[3 + k]),
                minutes(v[3 + SEAT_CAPACITY + k]),
                minutes(v[3 + 2 * SEAT_CAPACITY + k]),
            );
        }
        VehicleState {
            time_min: self.start_min + v[0] as f64 * self.horizon_min,
            zone: zone(v[1]),
            vacant: (v[2] as f64 * SEAT_CAPACITY as f64).round() as u8,
            passengers,
            candidate_origin: zone(v[STATE_DIM - 2]),
            candidate_dest: zone(v[STATE_DIM - 1]),
        }
    }

    /// Normalised action feature appended to the state for reward regression.
    pub fn action_feature(&self, action: Action) -> f32 {
        (action.0 as f64 / self.zone_scale()) as f32
    }
}

/// State of a single-seat (non-pooling) vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonPoolingState {
    pub time_min: f64,
    pub zone: ZoneId,
    pub vacant: u8,
    pub passenger: PassengerRecord,
    pub candidate_origin: ZoneId,
    pub candidate_dest: ZoneId,
}

/// Lifts a single-seat state into the three-seat layout: the one passenger
/// occupies seat 1, seats 2 and 3 are vacant and two vacant seats are added.
pub fn augment_nonpooling(np: &NonPoolingState) -> VehicleState {
    let mut passengers = [PassengerRecord::VACANT; SEAT_CAPACITY];
    passengers[0] = np.passenger;
    VehicleState {
        time_min: np.time_min,
        zone: np.zone,
        vacant: np.vacant + (SEAT_CAPACITY as u8 - 1),
        passengers,
        candidate_origin: np.candidate_origin,
        candidate_dest: np.candidate_dest,
    }
}
