//! Discrete-time ride-pooling simulator: demand, matching rounds, vehicle
//! motion, transit hand-offs, experience collection and episode metrics.

mod city;
mod dataset;
mod episode;
mod policies;
mod world;

pub use city::{format_clock, load_orders, parse_clock, write_orders, LineSpec, Order, SyntheticCitySpec, ORDER_HEADER};
pub use dataset::{generate_dataset, harvest_sources, quotas, DataSource, DatasetRecipe};
pub use episode::{
    episode_orders, fleet_positions, metrics_header, read_metrics, run_episode, write_metrics, EpisodeMetrics,
    EpisodeSetup, MetricsRow,
};
pub use policies::{decisions_from_matching, InsertionController, RandomController, ZeroValues};
pub use world::{Controller, Decision, MatchRecord, Round, RoundLog, World};

use serde::{Deserialize, Serialize};

use crate::matching::{InsertionParams, MatchingError, MatchingParams};
use crate::model::{ModelError, RewardParams, StateEncoder, ZoneGrid};
use crate::routing::{GridRouter, RoutingError};
use crate::transit::{Timetable, TransitError, TransitNetwork, TransitParams};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("order file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("order file: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o: {0}")]
    Io(String),
    #[error("round {round}: {msg}")]
    Fault { round: u64, msg: String },
    #[error(transparent)]
    Model(ModelError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Transit(TransitError),
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error("controller: {0}")]
    Controller(String),
}

/// Episode timing, fleet and demand handling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Clock minute of the first matching round.
    pub start_min: f64,
    /// Clock minute at which the episode closes.
    pub end_min: f64,
    pub step_min: f64,
    pub vehicles: usize,
    pub seat_capacity: u8,
    pub speed_kmh: f64,
    /// Unmatched riders leave after waiting longer than this.
    pub wait_tolerance_min: f64,
    /// Share of riders who only accept door-to-door service.
    pub p_pool: f64,
    /// Share of the order file replayed each episode.
    pub subsample: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            start_min: 480.0,
            end_min: 540.0,
            step_min: 1.0,
            vehicles: 50,
            seat_capacity: 3,
            speed_kmh: GridRouter::DEFAULT_SPEED_KMH,
            wait_tolerance_min: 5.0,
            p_pool: 0.0,
            subsample: 0.95,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if !(self.start_min.is_finite() && self.end_min > self.start_min) {
            return bad("end_min must exceed start_min".into());
        }
        if !(self.step_min.is_finite() && self.step_min > 0.0) {
            return bad(format!("step_min must be positive, got {}", self.step_min));
        }
        if !(1..=crate::model::SEAT_CAPACITY as u8).contains(&self.seat_capacity) {
            return bad(format!("seat_capacity must be 1..=3, got {}", self.seat_capacity));
        }
        if !(self.speed_kmh.is_finite() && self.speed_kmh > 0.0) {
            return bad(format!("speed_kmh must be positive, got {}", self.speed_kmh));
        }
        if !(self.wait_tolerance_min.is_finite() && self.wait_tolerance_min > 0.0) {
            return bad(format!("wait_tolerance_min must be positive, got {}", self.wait_tolerance_min));
        }
        if !(0.0..=1.0).contains(&self.p_pool) {
            return bad(format!("p_pool must be in [0, 1], got {}", self.p_pool));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad(format!("subsample must be in (0, 1], got {}", self.subsample));
        }
        Ok(())
    }

    pub fn horizon_min(&self) -> f64 {
        self.end_min - self.start_min
    }

    pub fn rounds(&self) -> u64 {
        (self.horizon_min() / self.step_min - 1e-9).ceil() as u64
    }
}

/// Everything fixed across episodes: city, demand and parameters.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub grid: ZoneGrid,
    pub router: GridRouter,
    pub transit: TransitNetwork,
    pub encoder: StateEncoder,
    pub orders: Vec<Order>,
    pub sim: SimConfig,
    pub reward: RewardParams,
    pub matching: MatchingParams,
    pub insertion: InsertionParams,
    pub seed: u64,
}

impl Scenario {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: ZoneGrid,
        timetable: Timetable,
        transit: TransitParams,
        orders: Vec<Order>,
        sim: SimConfig,
        reward: RewardParams,
        matching: MatchingParams,
        insertion: InsertionParams,
        seed: u64,
    ) -> Result<Self, SimError> {
        sim.validate()?;
        grid.validate().map_err(SimError::Model)?;
        reward.validate().map_err(SimError::Model)?;
        matching.validate()?;
        transit.validate().map_err(SimError::Transit)?;
        let transit = TransitNetwork::new(timetable, grid.zone_count(), transit).map_err(SimError::Transit)?;
        let router = GridRouter::new(sim.speed_kmh)?;
        let encoder = StateEncoder::new(sim.start_min, sim.horizon_min(), grid.zone_count());
        Ok(Self { grid, router, transit, encoder, orders, sim, reward, matching, insertion, seed })
    }

    /// Builds a scenario on a synthetic city, generating its orders from `seed`.
    pub fn synthetic(city: &SyntheticCitySpec, sim: SimConfig, seed: u64) -> Result<Self, SimError> {
        let timetable = city.timetable()?;
        let orders = city.generate_orders(sim.start_min, sim.end_min, &mut crate::seed::rng(seed, &[ORDER_STREAM]))?;
        Self::new(
            city.grid,
            timetable,
            TransitParams::default(),
            orders,
            sim,
            RewardParams::default(),
            MatchingParams::default(),
            InsertionParams::default(),
            seed,
        )
    }

    /// Door-to-door plus every zone with a station, or door-to-door only.
    pub fn action_mask(&self, transit: bool) -> Vec<bool> {
        (0..self.grid.action_count())
            .map(|a| a == 0 || (transit && self.transit.zone_has_station(a as u32)))
            .collect()
    }
}

/// Seed key of a synthetic city's order stream.
pub const ORDER_STREAM: u64 = 0x6f72_6465_7273;

#[cfg(test)]
mod tests;
