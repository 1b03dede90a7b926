use std::io::{Read, Write};

use rand::seq::index;
use rand::Rng;

use crate::learner::overestimation_rate;
use crate::model::GeoPoint;

use super::world::{Controller, MatchRecord, RoundLog, World};
use super::{Order, Scenario, SimError};

const SUBSAMPLE_STREAM: u64 = 1;
const POOLING_STREAM: u64 = 2;
const FLEET_STREAM: u64 = 3;
const EDGE_STREAM: u64 = 4;

/// Per-episode knobs chosen by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSetup {
    pub episode: u64,
    pub seat_capacity: u8,
    pub action_mask: Vec<bool>,
    /// Reported in the metrics; the controller owns exploration.
    pub epsilon: f64,
    /// Discount of realized returns in the overestimation metric.
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub episode: u64,
    pub orders: usize,
    pub served: usize,
    pub expired: usize,
    /// Orders neither served nor expired when the episode closed.
    pub unserved_at_close: usize,
    pub service_rate: f64,
    pub total_reward: f64,
    /// Mean realized detour of served riders, minutes.
    pub avg_detour: f64,
    /// NaN when no exploitation decision carried a value estimate.
    pub overestimation_rate: f64,
    pub epsilon: f64,
    pub max_onboard: usize,
    pub rounds: Vec<RoundLog>,
    pub matches: Vec<MatchRecord>,
}

impl EpisodeMetrics {
    pub fn row(&self) -> MetricsRow {
        MetricsRow {
            episode: self.episode,
            service_rate: self.service_rate,
            total_reward: self.total_reward,
            avg_detour: self.avg_detour,
            overestimation_rate: self.overestimation_rate,
            epsilon: self.epsilon,
        }
    }
}

/// One line of a metrics file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub episode: u64,
    pub service_rate: f64,
    pub total_reward: f64,
    pub avg_detour: f64,
    pub overestimation_rate: f64,
    pub epsilon: f64,
}

/// The episode's order stream: a seeded subsample of the scenario's
/// orders, each labelled door-to-door-only with probability `p_pool`.
pub fn episode_orders(sc: &Scenario, episode: u64) -> Vec<Order> {
    let n = sc.orders.len();
    let keep = ((sc.sim.subsample * n as f64).round() as usize).min(n);
    let mut rng = crate::seed::rng(sc.seed, &[SUBSAMPLE_STREAM, episode]);
    let mut picked = index::sample(&mut rng, n, keep).into_vec();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|i| {
            let mut o = sc.orders[i];
            let u: f64 = crate::seed::rng(sc.seed, &[POOLING_STREAM, episode, o.id]).gen();
            o.pooling_only = u < sc.sim.p_pool;
            o
        })
        .collect()
}

/// Start points of the fleet: uniform zone, uniform point inside it.
pub fn fleet_positions(sc: &Scenario, episode: u64) -> Vec<GeoPoint> {
    let mut rng = crate::seed::rng(sc.seed, &[FLEET_STREAM, episode]);
    let z = sc.grid.zone_count();
    (0..sc.sim.vehicles)
        .map(|_| {
            let zone = rng.gen_range(1..=z);
            sc.grid.point_in_zone(zone, rng.gen(), rng.gen()).expect("real zone")
        })
        .collect()
}

/// Simulates one episode under `controller`, passing it every completed
/// experience after each round.
pub fn run_episode(sc: &Scenario, setup: &EpisodeSetup, controller: &mut dyn Controller) -> Result<EpisodeMetrics, SimError> {
    let orders = episode_orders(sc, setup.episode);
    let positions = fleet_positions(sc, setup.episode);
    let seed = crate::seed::derive(sc.seed, &[EDGE_STREAM, setup.episode]);
    let mut world = World::new(sc, orders, &positions, setup.seat_capacity, setup.action_mask.clone(), seed)?;
    let mut rounds = Vec::with_capacity(sc.sim.rounds() as usize);
    while !world.is_finished() {
        let (log, experiences) = world.step(controller).map_err(|e| match e {
            SimError::Fault { round, msg } => SimError::Fault { round, msg: format!("episode {}: {msg}", setup.episode) },
            other => other,
        })?;
        controller.observe(&experiences)?;
        rounds.push(log);
    }
    Ok(summarize(&world, setup, rounds))
}

pub(super) fn summarize(world: &World<'_>, setup: &EpisodeSetup, rounds: Vec<RoundLog>) -> EpisodeMetrics {
    let orders = world.orders().len();
    let avg_detour =
        if world.detours.is_empty() { 0.0 } else { world.detours.iter().sum::<f64>() / world.detours.len() as f64 };
    let chains = world.reward_chains();
    let returns: Vec<Vec<f64>> = chains
        .iter()
        .map(|rs| {
            let mut g = vec![0.0; rs.len()];
            let mut acc = 0.0;
            for i in (0..rs.len()).rev() {
                acc = rs[i] + setup.gamma * acc;
                g[i] = acc;
            }
            g
        })
        .collect();
    let predicted: Vec<f64> = world.value_log.iter().map(|l| l.value).collect();
    let realized: Vec<f64> = world.value_log.iter().map(|l| returns[l.vehicle][l.step]).collect();
    let overestimation = overestimation_rate(&predicted, &realized).unwrap_or(f64::NAN);
    EpisodeMetrics {
        episode: setup.episode,
        orders,
        served: world.served,
        expired: world.expired,
        unserved_at_close: world.unserved_at_close(),
        service_rate: if orders == 0 { 0.0 } else { world.served as f64 / orders as f64 },
        total_reward: world.total_reward,
        avg_detour,
        overestimation_rate: overestimation,
        epsilon: setup.epsilon,
        max_onboard: world.max_onboard(),
        rounds,
        matches: world.matches().to_vec(),
    }
}

pub fn metrics_header() -> [&'static str; 6] {
    ["episode", "service_rate", "total_reward", "avg_detour", "overestimation_rate", "epsilon"]
}

pub fn write_metrics<W: Write>(writer: W, rows: &[MetricsRow]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(metrics_header())?;
    for r in rows {
        w.write_record([
            r.episode.to_string(),
            r.service_rate.to_string(),
            r.total_reward.to_string(),
            r.avg_detour.to_string(),
            r.overestimation_rate.to_string(),
            r.epsilon.to_string(),
        ])?;
    }
    w.flush().map_err(|e| SimError::Io(e.to_string()))?;
    Ok(())
}

pub fn read_metrics<R: Read>(reader: R) -> Result<Vec<MetricsRow>, SimError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != metrics_header() {
        return Err(SimError::Parse { line: 1, msg: "not a metrics file".into() });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| SimError::Parse { line, msg: e.to_string() })?;
        let num = |k: usize| -> Result<f64, SimError> {
            rec[k].trim().parse::<f64>().map_err(|_| SimError::Parse { line, msg: format!("column {} is not a number", k + 1) })
        };
        rows.push(MetricsRow {
            episode: rec[0].trim().parse().map_err(|_| SimError::Parse { line, msg: "bad episode number".into() })?,
            service_rate: num(1)?,
            total_reward: num(2)?,
            avg_detour: num(3)?,
            overestimation_rate: num(4)?,
            epsilon: num(5)?,
        });
    }
    Ok(rows)
}
