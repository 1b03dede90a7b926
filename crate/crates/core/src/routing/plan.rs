use std::collections::HashMap;

use crate::model::GeoPoint;

use super::{RoutingError, TravelTimeProvider};

pub type PassengerId = u64;

/// Routes with at most this many stops are planned by exhaustive search.
pub const EXHAUSTIVE_STOP_LIMIT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopKind {
    Pickup,
    Dropoff,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stop {
    pub point: GeoPoint,
    pub kind: StopKind,
    pub passenger: PassengerId,
}

impl Stop {
    pub fn pickup(passenger: PassengerId, point: GeoPoint) -> Self {
        Self { point, kind: StopKind::Pickup, passenger }
    }

    pub fn dropoff(passenger: PassengerId, point: GeoPoint) -> Self {
        Self { point, kind: StopKind::Dropoff, passenger }
    }
}

/// A stop with its absolute arrival time in minutes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledStop {
    pub stop: Stop,
    pub eta: f64,
}

/// A stop reached during [`RoutePlan::advance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteEvent {
    pub stop: Stop,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlanStrategy {
    /// Exhaustive up to [`EXHAUSTIVE_STOP_LIMIT`] stops, farthest insertion beyond.
    #[default]
    Auto,
    Exhaustive,
    FarthestInsertion,
}

/// Scheduled route of one vehicle.
///
/// The vehicle left `anchor` at `anchor_time` heading for the first stop;
/// its position at `now` is interpolated along that leg. With no stops it
/// is parked at `anchor`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutePlan {
    now: f64,
    anchor: GeoPoint,
    anchor_time: f64,
    stops: Vec<ScheduledStop>,
}

impl RoutePlan {
    /// A parked vehicle.
    pub fn idle(position: GeoPoint, now: f64) -> Self {
        Self { now, anchor: position, anchor_time: now, stops: Vec::new() }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn stops(&self) -> &[ScheduledStop] {
        &self.stops
    }

    pub fn is_idle(&self) -> bool {
        self.stops.is_empty()
    }

    /// Arrival time at the last stop (`now` when idle).
    pub fn end_time(&self) -> f64 {
        self.stops.last().map_or(self.now, |s| s.eta.max(self.now))
    }

    pub fn total_duration(&self) -> f64 {
        self.end_time() - self.now
    }

    pub fn position(&self) -> GeoPoint {
        let Some(first) = self.stops.first() else {
            return self.anchor;
        };
        let leg = first.eta - self.anchor_time;
        if self.now <= self.anchor_time || leg <= 0.0 {
            return self.anchor;
        }
        let f = ((self.now - self.anchor_time) / leg).min(1.0);
        self.anchor.lerp(first.stop.point, f)
    }

    fn find(&self, passenger: PassengerId, kind: StopKind) -> Option<&ScheduledStop> {
        self.stops.iter().find(|s| s.stop.passenger == passenger && s.stop.kind == kind)
    }

    pub fn pickup_eta(&self, passenger: PassengerId) -> Option<f64> {
        self.find(passenger, StopKind::Pickup).map(|s| s.eta)
    }

    pub fn dropoff_eta(&self, passenger: PassengerId) -> Option<f64> {
        self.find(passenger, StopKind::Dropoff).map(|s| s.eta)
    }

    /// Passenger has been picked up but not yet dropped off.
    pub fn is_onboard(&self, passenger: PassengerId) -> bool {
        self.find(passenger, StopKind::Pickup).is_none() && self.find(passenger, StopKind::Dropoff).is_some()
    }

    /// Minutes the passenger will still spend in the vehicle: from now for
    /// onboard passengers, from the planned pickup otherwise.
    pub fn remaining_onboard(&self, passenger: PassengerId) -> Option<f64> {
        let drop = self.dropoff_eta(passenger)?;
        let from = self.pickup_eta(passenger).unwrap_or(self.now);
        Some((drop - from).max(0.0))
    }

    /// Passengers with a pending stop, in order of first appearance.
    pub fn passengers(&self) -> Vec<PassengerId> {
        let mut out: Vec<PassengerId> = Vec::new();
        for s in &self.stops {
            if !out.contains(&s.stop.passenger) {
                out.push(s.stop.passenger);
            }
        }
        out
    }

    /// Checks ETA ordering and pickup-before-dropoff.
    pub fn check_invariants(&self) -> Result<(), RoutingError> {
        let mut prev = self.anchor_time.min(self.now);
        let mut dropped: Vec<PassengerId> = Vec::new();
        for s in &self.stops {
            if !(s.eta >= prev) {
                return Err(RoutingError::Plan(format!("eta {} precedes {prev}", s.eta)));
            }
            prev = s.eta;
            match s.stop.kind {
                StopKind::Dropoff => dropped.push(s.stop.passenger),
                StopKind::Pickup if dropped.contains(&s.stop.passenger) => {
                    return Err(RoutingError::Plan(format!("passenger {} dropped before pickup", s.stop.passenger)));
                }
                StopKind::Pickup => {}
            }
        }
        Ok(())
    }

    /// Moves the vehicle forward by `dt` minutes, returning every stop
    /// reached in that window in route order.
    pub fn advance(&mut self, dt: f64) -> Vec<RouteEvent> {
        if !(dt > 0.0) {
            return Vec::new();
        }
        self.now += dt;
        let reached = self.stops.iter().take_while(|s| s.eta <= self.now).count();
        let events: Vec<RouteEvent> =
            self.stops.drain(..reached).map(|s| RouteEvent { stop: s.stop, time: s.eta }).collect();
        if let Some(last) = events.last() {
            self.anchor = last.stop.point;
            self.anchor_time = last.time;
        }
        if self.stops.is_empty() {
            self.anchor_time = self.anchor_time.min(self.now);
        }
        events
    }
}

/// Orders `stops` into a minimum-duration route leaving `start` at `start_time`.
///
/// A passenger's pickup, when present, must come before their drop-off.
pub fn plan_route<P: TravelTimeProvider + ?Sized>(
    start: GeoPoint,
    start_time: f64,
    stops: &[Stop],
    provider: &P,
) -> Result<RoutePlan, RoutingError> {
    plan_route_with(start, start_time, stops, provider, PlanStrategy::Auto)
}

pub fn plan_route_with<P: TravelTimeProvider + ?Sized>(
    start: GeoPoint,
    start_time: f64,
    stops: &[Stop],
    provider: &P,
    strategy: PlanStrategy,
) -> Result<RoutePlan, RoutingError> {
    let required = precedence(stops)?;
    let n = stops.len();
    let mut points = Vec::with_capacity(n + 1);
    points.push(start);
    points.extend(stops.iter().map(|s| s.point));
    let mut tt = vec![0.0; (n + 1) * (n + 1)];
    for (i, &a) in points.iter().enumerate() {
        for (j, &b) in points.iter().enumerate() {
            if i != j {
                let t = provider.travel_time(a, b);
                if t.is_nan() || t < 0.0 {
                    return Err(RoutingError::Unreachable(format!("leg {i}->{j} returned {t}")));
                }
                tt[i * (n + 1) + j] = t;
            }
        }
    }
    let matrix = Matrix { n: n + 1, tt };
    let exhaustive = match strategy {
        PlanStrategy::Auto => n <= EXHAUSTIVE_STOP_LIMIT,
        PlanStrategy::Exhaustive => true,
        PlanStrategy::FarthestInsertion => false,
    };
    let order = if exhaustive { exhaustive_order(&matrix, &required) } else { farthest_insertion(&matrix, &required) };
    let total = matrix.duration(&order);
    if !total.is_finite() {
        return Err(RoutingError::Unreachable(format!("no finite route through {n} stops")));
    }

    let mut scheduled = Vec::with_capacity(n);
    let mut t = start_time;
    let mut prev = 0;
    for &i in &order {
        t += matrix.get(prev, i + 1);
        scheduled.push(ScheduledStop { stop: stops[i], eta: t });
        prev = i + 1;
    }
    Ok(RoutePlan { now: start_time, anchor: start, anchor_time: start_time, stops: scheduled })
}

/// For each stop, the index of the stop that must be visited first.
fn precedence(stops: &[Stop]) -> Result<Vec<Option<usize>>, RoutingError> {
    let mut pickups: HashMap<PassengerId, usize> = HashMap::new();
    let mut dropoffs: HashMap<PassengerId, usize> = HashMap::new();
    for (i, s) in stops.iter().enumerate() {
        let map = match s.kind {
            StopKind::Pickup => &mut pickups,
            StopKind::Dropoff => &mut dropoffs,
        };
        if map.insert(s.passenger, i).is_some() {
            return Err(RoutingError::Plan(format!("passenger {} has two {:?} stops", s.passenger, s.kind)));
        }
    }
    Ok(stops
        .iter()
        .map(|s| match s.kind {
            StopKind::Dropoff => pickups.get(&s.passenger).copied(),
            StopKind::Pickup => None,
        })
        .collect())
}

struct Matrix {
    n: usize,
    tt: Vec<f64>,
}

impl Matrix {
    /// Node 0 is the start; stop `i` is node `i + 1`.
    fn get(&self, a: usize, b: usize) -> f64 {
        self.tt[a * self.n + b]
    }

    fn duration(&self, order: &[usize]) -> f64 {
        let mut prev = 0;
        let mut total = 0.0;
        for &i in order {
            total += self.get(prev, i + 1);
            prev = i + 1;
        }
        total
    }
}

fn exhaustive_order(m: &Matrix, required: &[Option<usize>]) -> Vec<usize> {
    struct Search<'a> {
        m: &'a Matrix,
        required: &'a [Option<usize>],
        visited: Vec<bool>,
        path: Vec<usize>,
        best: Vec<usize>,
        best_cost: f64,
    }

    impl Search<'_> {
        // Depth-first in ascending stop index, replacing the incumbent only on
        // strict improvement, so ties keep the lexicographically smallest order.
        fn dfs(&mut self, prev: usize, cost: f64) {
            if cost >= self.best_cost {
                return;
            }
            if self.path.len() == self.visited.len() {
                self.best_cost = cost;
                self.best.clone_from(&self.path);
                return;
            }
            for i in 0..self.visited.len() {
                if self.visited[i] || self.required[i].is_some_and(|r| !self.visited[r]) {
                    continue;
                }
                self.visited[i] = true;
                self.path.push(i);
                self.dfs(i + 1, cost + self.m.get(prev, i + 1));
                self.path.pop();
                self.visited[i] = false;
            }
        }
    }

    let n = required.len();
    let mut s =
        Search { m, required, visited: vec![false; n], path: Vec::with_capacity(n), best: Vec::new(), best_cost: f64::INFINITY };
    s.dfs(0, 0.0);
    if s.best.len() != n {
        // every order has an unreachable leg; return a feasible one so the
        // caller reports it
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let next = (0..n)
                .find(|&i| !order.contains(&i) && required[i].map_or(true, |r| order.contains(&r)))
                .expect("a precedence-feasible stop always exists");
            order.push(next);
        }
        return order;
    }
    s.best
}

fn farthest_insertion(m: &Matrix, required: &[Option<usize>]) -> Vec<usize> {
    let n = required.len();
    let mut route: Vec<usize> = Vec::with_capacity(n);
    let mut routed = vec![false; n];
    while route.len() < n {
        let mut pick: Option<(usize, f64)> = None;
        for i in 0..n {
            if routed[i] || required[i].is_some_and(|r| !routed[r]) {
                continue;
            }
            let nearest = std::iter::once(0)
                .chain(route.iter().map(|&j| j + 1))
                .map(|node| m.get(node, i + 1))
                .fold(f64::INFINITY, f64::min);
            if pick.map_or(true, |(_, d)| nearest > d) {
                pick = Some((i, nearest));
            }
        }
        let (i, _) = pick.expect("a precedence-feasible stop always exists");
        let earliest = required[i].map_or(0, |r| route.iter().position(|&j| j == r).unwrap() + 1);
        let mut best: Option<(usize, f64)> = None;
        for pos in earliest..=route.len() {
            route.insert(pos, i);
            let d = m.duration(&route);
            route.remove(pos);
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((pos, d));
            }
        }
        route.insert(best.unwrap().0, i);
        routed[i] = true;
    }
    route
}

/// Remaining on-board time of one passenger before and after an insertion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassengerDelta {
    pub passenger: PassengerId,
    pub old_remaining: f64,
    pub new_remaining: f64,
}

impl PassengerDelta {
    pub fn change(&self) -> f64 {
        self.new_remaining - self.old_remaining
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Insertion {
    pub plan: RoutePlan,
    /// One entry per passenger already in the plan.
    pub existing: Vec<PassengerDelta>,
    pub pickup_eta: f64,
    pub dropoff_eta: f64,
}

impl Insertion {
    /// Full on-board time of the new rider.
    pub fn new_onboard(&self) -> f64 {
        self.dropoff_eta - self.pickup_eta
    }
}

/// Re-plans `plan` from the vehicle's current position with a new rider's
/// pickup and drop-off added.
pub fn insert_order<P: TravelTimeProvider + ?Sized>(
    plan: &RoutePlan,
    pickup: Stop,
    dropoff: Stop,
    provider: &P,
) -> Result<Insertion, RoutingError> {
    if pickup.kind != StopKind::Pickup || dropoff.kind != StopKind::Dropoff || pickup.passenger != dropoff.passenger {
        return Err(RoutingError::Plan("insertion needs a pickup and drop-off of the same passenger".into()));
    }
    if plan.stops.iter().any(|s| s.stop.passenger == pickup.passenger) {
        return Err(RoutingError::Plan(format!("passenger {} already in plan", pickup.passenger)));
    }
    let mut stops: Vec<Stop> = plan.stops.iter().map(|s| s.stop).collect();
    stops.push(pickup);
    stops.push(dropoff);
    let new_plan = plan_route(plan.position(), plan.now, &stops, provider)?;
    let existing = plan
        .passengers()
        .into_iter()
        .map(|p| PassengerDelta {
            passenger: p,
            old_remaining: plan.remaining_onboard(p).unwrap_or(0.0),
            new_remaining: new_plan.remaining_onboard(p).unwrap_or(0.0),
        })
        .collect();
    let pickup_eta = new_plan.pickup_eta(pickup.passenger).expect("pickup was planned");
    let dropoff_eta = new_plan.dropoff_eta(pickup.passenger).expect("drop-off was planned");
    Ok(Insertion { plan: new_plan, existing, pickup_eta, dropoff_eta })
}
