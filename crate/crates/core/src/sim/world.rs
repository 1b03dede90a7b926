use crate::learner::Experience;
use crate::matching::{rider_mask, MatchRider, MatchVehicle, MatchingParams};
use crate::model::{
    apply_match, augment_nonpooling, Action, EncodedState, GeoPoint, MatchedRider, NonPoolingState, PassengerRecord,
    RouteDelta, StateEncoder, VehicleState, SEAT_CAPACITY,
};
use crate::routing::{insert_order, RoutePlan, Stop, StopKind, TravelTimeProvider};
use crate::transit::TransitNetwork;

use super::{Order, Scenario, SimError};

/// What a controller sees at one matching round.
pub struct Round<'a> {
    pub index: u64,
    pub time_min: f64,
    /// Vehicles with a free seat; `id` is the fleet index.
    pub vehicles: &'a [MatchVehicle],
    /// Route plans aligned with `vehicles`.
    pub plans: &'a [&'a RoutePlan],
    /// Waiting riders; `id` is the order id.
    pub riders: &'a [MatchRider],
    pub encoder: &'a StateEncoder,
    pub action_mask: &'a [bool],
    pub matching: &'a MatchingParams,
    pub router: &'a dyn TravelTimeProvider,
    pub transit: &'a TransitNetwork,
    /// Seed of this episode's per-edge exploration streams.
    pub seed: u64,
}

/// One vehicle-rider assignment chosen by a controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    /// Index into [`Round::vehicles`].
    pub vehicle: usize,
    /// Index into [`Round::riders`].
    pub rider: usize,
    pub action: Action,
    /// Predicted value of the decision in raw reward units, if the
    /// controller has one.
    pub value: Option<f64>,
    pub explored: bool,
}

/// A dispatch policy plugged into the simulator.
pub trait Controller {
    fn decide(&mut self, round: &Round<'_>) -> Result<Vec<Decision>, SimError>;

    /// Experiences completed during the round just simulated.
    fn observe(&mut self, _experiences: &[Experience]) -> Result<(), SimError> {
        Ok(())
    }
}

/// Counters of one round.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RoundLog {
    pub round: u64,
    pub time_min: f64,
    pub arrivals: usize,
    pub expired: usize,
    pub waiting: usize,
    pub eligible_vehicles: usize,
    pub matches: usize,
    pub transit_matches: usize,
    pub reward: f64,
}

/// An executed match with the inputs its reward was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchRecord {
    pub round: u64,
    pub vehicle: usize,
    pub order_id: u64,
    pub action: Action,
    pub reward: f64,
    pub od_km: f64,
    pub wait_min: f64,
    /// Detours of the vehicle's other passengers before the match.
    pub detours_before: Vec<f64>,
    /// Their detours after it, followed by the new rider's.
    pub detours_after: Vec<f64>,
    /// Encoded decision state, candidate zones included.
    pub state: EncodedState,
}

#[derive(Debug, Clone, Copy)]
struct Seat {
    order: usize,
    record: PassengerRecord,
}

#[derive(Debug, Clone)]
struct Vehicle {
    plan: RoutePlan,
    seats: [Option<Seat>; SEAT_CAPACITY],
    /// Decision awaiting its next state: (state, action, reward).
    pending: Option<(EncodedState, Action, f64)>,
    /// Rewards of this vehicle's decisions in order.
    rewards: Vec<f64>,
}

impl Vehicle {
    fn occupied(&self) -> usize {
        self.seats.iter().filter(|s| s.is_some()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Future,
    Waiting,
    Expired,
    Matched,
}

#[derive(Debug, Clone, Copy)]
struct Booking {
    vehicle: usize,
    direct_min: f64,
    post_min: f64,
    action: Action,
    pickup_time: Option<f64>,
}

/// A logged exploitation decision for the overestimation metric.
#[derive(Debug, Clone, Copy)]
pub(super) struct ValueLog {
    pub vehicle: usize,
    /// Index into that vehicle's reward list.
    pub step: usize,
    pub value: f64,
}

/// State of one episode.
pub struct World<'s> {
    sc: &'s Scenario,
    capacity: u8,
    action_mask: Vec<bool>,
    seed: u64,
    orders: Vec<Order>,
    status: Vec<Status>,
    bookings: Vec<Option<Booking>>,
    next_order: usize,
    waiting: Vec<usize>,
    vehicles: Vec<Vehicle>,
    round: u64,
    time: f64,
    pub(super) served: usize,
    pub(super) expired: usize,
    pub(super) total_reward: f64,
    /// Realized detours of riders who finished their ride leg.
    pub(super) detours: Vec<f64>,
    pub(super) value_log: Vec<ValueLog>,
    matches: Vec<MatchRecord>,
    max_onboard: usize,
}

impl<'s> World<'s> {
    /// A fresh episode.
    ///
    /// `orders` must be sorted by request time; `positions` gives each
    /// vehicle's start point.
    pub fn new(
        sc: &'s Scenario,
        orders: Vec<Order>,
        positions: &[GeoPoint],
        capacity: u8,
        action_mask: Vec<bool>,
        seed: u64,
    ) -> Result<Self, SimError> {
        if !(1..=SEAT_CAPACITY as u8).contains(&capacity) {
            return Err(SimError::Config(format!("seat capacity {capacity} outside 1..=3")));
        }
        if action_mask.len() != sc.grid.action_count() || !action_mask[0] {
            return Err(SimError::Config("action mask must cover every action and allow door-to-door".into()));
        }
        if orders.windows(2).any(|w| w[1].request_min < w[0].request_min || w[1].id <= w[0].id) {
            return Err(SimError::Config("orders must be sorted by request time with increasing ids".into()));
        }
        let start = sc.sim.start_min;
        let vehicles = positions
            .iter()
            .map(|&p| Vehicle { plan: RoutePlan::idle(p, start), seats: [None; 3], pending: None, rewards: Vec::new() })
            .collect();
        let n = orders.len();
        Ok(Self {
            sc,
            capacity,
            action_mask,
            seed,
            orders,
            status: vec![Status::Future; n],
            bookings: vec![None; n],
            next_order: 0,
            waiting: Vec::new(),
            vehicles,
            round: 0,
            time: start,
            served: 0,
            expired: 0,
            total_reward: 0.0,
            detours: Vec::new(),
            value_log: Vec::new(),
            matches: Vec::new(),
            max_onboard: 0,
        })
    }

    pub fn time_min(&self) -> f64 {
        self.time
    }

    pub fn round_index(&self) -> u64 {
        self.round
    }

    pub fn is_finished(&self) -> bool {
        self.round >= self.sc.sim.rounds()
    }

    pub fn orders(&self) -> &[Order] {
        &self.orders
    }

    pub fn waiting(&self) -> usize {
        self.waiting.len()
    }

    /// Most riders any vehicle has held at once so far.
    pub fn max_onboard(&self) -> usize {
        self.max_onboard
    }

    /// Current decision state of vehicle `v` with dummy candidate zones.
    pub fn vehicle_state(&self, v: usize) -> VehicleState {
        let veh = &self.vehicles[v];
        let dummy = self.sc.grid.dummy_zone();
        let zone = self.sc.grid.zone_of(veh.plan.position()).unwrap_or(1);
        let mut records = [PassengerRecord::VACANT; SEAT_CAPACITY];
        for (k, seat) in veh.seats.iter().enumerate() {
            if let Some(s) = seat {
                let id = self.orders[s.order].id;
                let mut r = s.record;
                r.remaining_min = veh.plan.remaining_onboard(id).unwrap_or(0.0);
                records[k] = r;
            }
        }
        if self.capacity == 1 {
            let np = NonPoolingState {
                time_min: self.time,
                zone,
                vacant: 1 - veh.occupied() as u8,
                passenger: records[0],
                candidate_origin: dummy,
                candidate_dest: dummy,
            };
            return augment_nonpooling(&np);
        }
        let mut state = VehicleState::empty(self.time, zone, dummy);
        state.passengers = records;
        state.vacant = (SEAT_CAPACITY - veh.occupied()) as u8;
        state
    }

    fn fault(&self, msg: impl Into<String>) -> SimError {
        SimError::Fault { round: self.round, msg: msg.into() }
    }

    /// Runs one matching round and advances the clock by one step.
    /// Returns the round's counters and the experiences it completed.
    pub fn step(&mut self, controller: &mut dyn Controller) -> Result<(RoundLog, Vec<Experience>), SimError> {
        if self.is_finished() {
            return Err(self.fault("episode already finished"));
        }
        let sc = self.sc;
        let t = self.time;
        let mut log = RoundLog { round: self.round, time_min: t, ..RoundLog::default() };

        while self.next_order < self.orders.len() && self.orders[self.next_order].request_min <= t {
            self.status[self.next_order] = Status::Waiting;
            self.waiting.push(self.next_order);
            self.next_order += 1;
            log.arrivals += 1;
        }
        let tolerance = sc.sim.wait_tolerance_min;
        let (stay, gone): (Vec<usize>, Vec<usize>) =
            self.waiting.iter().partition(|&&o| t - self.orders[o].request_min <= tolerance + 1e-9);
        for &o in &gone {
            self.status[o] = Status::Expired;
        }
        self.expired += gone.len();
        log.expired = gone.len();
        self.waiting = stay;
        log.waiting = self.waiting.len();

        // the matching problem
        let mut fleet_index = Vec::new();
        let mut mvs = Vec::new();
        for v in 0..self.vehicles.len() {
            if self.vehicles[v].occupied() < self.capacity as usize {
                fleet_index.push(v);
                mvs.push(MatchVehicle { id: v, state: self.vehicle_state(v), position: self.vehicles[v].plan.position() });
            }
        }
        log.eligible_vehicles = mvs.len();
        let riders: Vec<MatchRider> = self
            .waiting
            .iter()
            .map(|&o| {
                let r = &self.orders[o];
                MatchRider {
                    id: r.id,
                    origin: r.origin,
                    destination: r.destination,
                    origin_zone: r.origin_zone,
                    dest_zone: r.dest_zone,
                    pooling_only: r.pooling_only,
                }
            })
            .collect();

        let mut experiences = Vec::new();
        if !mvs.is_empty() && !riders.is_empty() {
            let plans: Vec<&RoutePlan> = fleet_index.iter().map(|&v| &self.vehicles[v].plan).collect();
            let round = Round {
                index: self.round,
                time_min: t,
                vehicles: &mvs,
                plans: &plans,
                riders: &riders,
                encoder: &sc.encoder,
                action_mask: &self.action_mask,
                matching: &sc.matching,
                router: &sc.router,
                transit: &sc.transit,
                seed: self.seed,
            };
            let decisions = controller.decide(&round)?;
            drop(plans);
            let mut used_v = vec![false; mvs.len()];
            let mut used_r = vec![false; riders.len()];
            for d in &decisions {
                if d.vehicle >= mvs.len() || d.rider >= riders.len() {
                    return Err(self.fault(format!("decision ({}, {}) out of range", d.vehicle, d.rider)));
                }
                if std::mem::replace(&mut used_v[d.vehicle], true) || std::mem::replace(&mut used_r[d.rider], true) {
                    return Err(self.fault("a vehicle or rider was assigned twice"));
                }
                let mask = rider_mask(&self.action_mask, &riders[d.rider]);
                if !mask.get(d.action.index()).copied().unwrap_or(false) {
                    return Err(self.fault(format!("action {} not allowed for rider {}", d.action.0, riders[d.rider].id)));
                }
            }
            for d in &decisions {
                let v = fleet_index[d.vehicle];
                let order = self.waiting[d.rider];
                if let Some(e) = self.book(v, order, &mvs[d.vehicle].state, d, &mut log)? {
                    experiences.push(e);
                }
            }
            let matched: Vec<usize> = decisions.iter().map(|d| self.waiting[d.rider]).collect();
            self.waiting.retain(|o| !matched.contains(o));
        }

        self.total_reward += log.reward;
        self.advance(sc.sim.step_min)?;
        self.round += 1;
        if self.is_finished() {
            experiences.extend(self.close());
        }
        Ok((log, experiences))
    }

    /// Executes one decision; returns the vehicle's previous experience,
    /// now complete.
    fn book(
        &mut self,
        v: usize,
        order: usize,
        state: &VehicleState,
        d: &Decision,
        log: &mut RoundLog,
    ) -> Result<Option<Experience>, SimError> {
        let sc = self.sc;
        let o = self.orders[order];
        let (dropoff, post_min) = if d.action.is_door_to_door() {
            (o.destination, 0.0)
        } else {
            let choice = sc
                .transit
                .best_station_in_zone(d.action.0 as u32, o.destination)
                .ok_or_else(|| self.fault(format!("zone {} has no station", d.action.0)))?;
            (choice.point, choice.post_minutes)
        };
        let veh = &self.vehicles[v];
        let ins = insert_order(&veh.plan, Stop::pickup(o.id, o.origin), Stop::dropoff(o.id, dropoff), &sc.router)?;
        let mut existing = [0.0; SEAT_CAPACITY];
        for (k, seat) in veh.seats.iter().enumerate() {
            if let Some(s) = seat {
                let id = self.orders[s.order].id;
                let delta = ins.existing.iter().find(|p| p.passenger == id);
                existing[k] = delta.ok_or_else(|| self.fault(format!("passenger {id} lost from plan")))?.new_remaining;
            }
        }
        let direct_min = sc.router.travel_time(o.origin, o.destination);
        let delta = RouteDelta {
            wait_min: (ins.pickup_eta - o.request_min).max(0.0),
            new_onboard_min: ins.new_onboard(),
            after_dropoff_min: post_min,
            direct_min,
            existing_remaining: existing,
        };
        let rider = MatchedRider {
            origin_zone: o.origin_zone,
            dest_zone: o.dest_zone,
            origin: o.origin,
            destination: o.destination,
            pooling_only: o.pooling_only,
        };
        let dummy = sc.grid.dummy_zone();
        let outcome = apply_match(state, &rider, d.action, &delta, &sc.reward, dummy).map_err(SimError::Model)?;
        let encoded = sc
            .encoder
            .encode(&state.with_candidate(o.origin_zone, o.dest_zone))
            .map_err(SimError::Model)?;

        let mut before = Vec::new();
        let mut after = Vec::new();
        for (k, p) in state.passengers.iter().enumerate() {
            if !p.is_vacant() {
                before.push(p.detour_min);
                after.push(outcome.next.passengers[k].detour_min);
            }
        }
        after.push(outcome.next.passengers[outcome.seat].detour_min);
        self.matches.push(MatchRecord {
            round: self.round,
            vehicle: v,
            order_id: o.id,
            action: d.action,
            reward: outcome.reward,
            od_km: crate::model::euclidean_km(o.origin, o.destination),
            wait_min: delta.wait_min,
            detours_before: before,
            detours_after: after,
            state: encoded,
        });

        let veh = &mut self.vehicles[v];
        veh.plan = ins.plan;
        for k in 0..SEAT_CAPACITY {
            if let Some(s) = veh.seats[k].as_mut() {
                s.record = outcome.next.passengers[k];
            }
        }
        if veh.seats[outcome.seat].is_some() {
            return Err(SimError::Fault { round: self.round, msg: format!("seat {} already taken", outcome.seat) });
        }
        veh.seats[outcome.seat] = Some(Seat { order, record: outcome.next.passengers[outcome.seat] });
        let onboard = veh.occupied();
        let previous = veh.pending.replace((encoded, d.action, outcome.reward)).map(|(s, a, r)| Experience {
            state: s,
            action: a,
            reward: r,
            next_state: encoded,
            done: false,
        });
        if let (Some(value), false) = (d.value, d.explored) {
            self.value_log.push(ValueLog { vehicle: v, step: veh.rewards.len(), value });
        }
        veh.rewards.push(outcome.reward);

        self.max_onboard = self.max_onboard.max(onboard);
        self.status[order] = Status::Matched;
        self.bookings[order] = Some(Booking { vehicle: v, direct_min, post_min, action: d.action, pickup_time: None });
        self.served += 1;
        log.matches += 1;
        if !d.action.is_door_to_door() {
            log.transit_matches += 1;
        }
        log.reward += outcome.reward;
        Ok(previous)
    }

    fn advance(&mut self, dt: f64) -> Result<(), SimError> {
        for v in 0..self.vehicles.len() {
            let events = self.vehicles[v].plan.advance(dt);
            for ev in events {
                let order = self
                    .orders
                    .binary_search_by(|o| o.id.cmp(&ev.stop.passenger))
                    .map_err(|_| self.fault(format!("unknown passenger {}", ev.stop.passenger)))?;
                let booking = self.bookings[order]
                    .as_mut()
                    .filter(|b| b.vehicle == v)
                    .ok_or_else(|| SimError::Fault { round: self.round, msg: "event for unbooked rider".into() })?;
                match ev.stop.kind {
                    StopKind::Pickup => booking.pickup_time = Some(ev.time),
                    StopKind::Dropoff => {
                        let picked = booking.pickup_time.unwrap_or(ev.time);
                        self.detours.push((ev.time - picked + booking.post_min - booking.direct_min).max(0.0));
                        let seats = &mut self.vehicles[v].seats;
                        let k = seats
                            .iter()
                            .position(|s| s.is_some_and(|s| s.order == order))
                            .ok_or_else(|| SimError::Fault { round: self.round, msg: "drop-off of unseated rider".into() })?;
                        seats[k] = None;
                    }
                }
            }
        }
        self.time += dt;
        Ok(())
    }

    /// Ends the episode: pending decisions become terminal experiences and
    /// vehicles finish their routes so every ride is accounted for.
    fn close(&mut self) -> Vec<Experience> {
        let mut out = Vec::new();
        for v in 0..self.vehicles.len() {
            if let Some((s, a, r)) = self.vehicles[v].pending.take() {
                let end = self.sc.encoder.encode(&self.vehicle_state(v)).expect("own states encode");
                out.push(Experience { state: s, action: a, reward: r, next_state: end, done: true });
            }
        }
        let finish = self.vehicles.iter().map(|v| v.plan.end_time()).fold(self.time, f64::max);
        if finish > self.time {
            let rest = finish - self.time + 1e-9;
            // no further rounds; this only completes booked rides
            let _ = self.advance(rest);
        }
        out
    }

    /// Orders still waiting (or never admitted) when the episode closed.
    pub fn unserved_at_close(&self) -> usize {
        self.status.iter().filter(|s| matches!(s, Status::Waiting | Status::Future)).count()
    }

    /// Per-vehicle rewards of executed decisions.
    pub(super) fn reward_chains(&self) -> Vec<&[f64]> {
        self.vehicles.iter().map(|v| v.rewards.as_slice()).collect()
    }

    /// Every executed match so far, in booking order.
    pub fn matches(&self) -> &[MatchRecord] {
        &self.matches
    }

    pub fn total_reward(&self) -> f64 {
        self.total_reward
    }

    /// Riders assigned to each vehicle and not yet dropped off.
    pub fn occupancy(&self) -> Vec<usize> {
        self.vehicles.iter().map(Vehicle::occupied).collect()
    }

    /// The booked action of each order, if matched.
    pub fn booked_action(&self, order_id: u64) -> Option<Action> {
        let i = self.orders.binary_search_by(|o| o.id.cmp(&order_id)).ok()?;
        self.bookings[i].map(|b| b.action)
    }
}
