use std::collections::HashMap;

use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::*;
use crate::learner::Experience;
use crate::matching::{build_edges, rider_mask, solve_assignment, EdgeContext, ValueModel};
use crate::model::{compute_reward, Action, EncodedState, GeoPoint};

fn small_sim() -> SimConfig {
    SimConfig { end_min: 500.0, vehicles: 12, ..SimConfig::default() }
}

fn city(orders_per_min: f64) -> SyntheticCitySpec {
    SyntheticCitySpec { orders_per_min, ..SyntheticCitySpec::default() }
}

fn scenario(orders_per_min: f64, sim: SimConfig, seed: u64) -> Scenario {
    Scenario::synthetic(&city(orders_per_min), sim, seed).unwrap()
}

fn setup(sc: &Scenario, episode: u64, capacity: u8) -> EpisodeSetup {
    EpisodeSetup { episode, seat_capacity: capacity, action_mask: sc.action_mask(true), epsilon: 1.0, gamma: 0.99 }
}

fn order(sc: &Scenario, id: u64, request_min: f64, origin: GeoPoint, destination: GeoPoint) -> Order {
    Order {
        id,
        request_min,
        origin,
        destination,
        origin_zone: sc.grid.zone_of(origin).unwrap(),
        dest_zone: sc.grid.zone_of(destination).unwrap(),
        pooling_only: false,
    }
}

/// Records everything the world hands back.
struct Recorder<C> {
    inner: C,
    experiences: Vec<Experience>,
}

impl<C: Controller> Controller for Recorder<C> {
    fn decide(&mut self, round: &Round<'_>) -> Result<Vec<Decision>, SimError> {
        self.inner.decide(round)
    }

    fn observe(&mut self, experiences: &[Experience]) -> Result<(), SimError> {
        self.experiences.extend_from_slice(experiences);
        Ok(())
    }
}

/// Rates one action high and everything else low.
struct Prefers(usize, usize);

impl ValueModel for Prefers {
    fn action_count(&self) -> usize {
        self.1
    }

    fn action_values(&self, states: &[EncodedState]) -> Vec<f64> {
        let mut row = vec![1.0; self.1];
        row[self.0] = 10.0;
        row.repeat(states.len())
    }
}

struct ArgmaxController(usize);

impl Controller for ArgmaxController {
    fn decide(&mut self, round: &Round<'_>) -> Result<Vec<Decision>, SimError> {
        let values = Prefers(self.0, round.action_mask.len());
        let ctx = EdgeContext {
            encoder: round.encoder,
            params: round.matching,
            values: &values,
            guider: None,
            epsilon: 0.0,
            action_mask: round.action_mask,
            seed: round.seed,
            round: round.index,
        };
        let edges = build_edges(&ctx, round.vehicles, round.riders)?;
        Ok(decisions_from_matching(&solve_assignment(&edges, round.vehicles.len(), round.riders.len()), true))
    }
}

#[test]
fn zero_demand_makes_no_matches() {
    let sc = scenario(0.0, small_sim(), 1);
    assert!(sc.orders.is_empty());
    let m = run_episode(&sc, &setup(&sc, 0, 3), &mut RandomController).unwrap();
    assert_eq!(m.served, 0);
    assert_eq!(m.total_reward, 0.0);
    assert_eq!(m.service_rate, 0.0);
    assert!(m.rounds.iter().all(|r| r.matches == 0));
}

#[test]
fn empty_fleet_serves_nobody() {
    let sc = scenario(10.0, SimConfig { vehicles: 0, ..small_sim() }, 2);
    let m = run_episode(&sc, &setup(&sc, 0, 3), &mut InsertionController::default()).unwrap();
    assert!(m.orders > 0);
    assert_eq!(m.served, 0);
    assert_eq!(m.service_rate, 0.0);
    assert_eq!(m.total_reward, 0.0);
    assert_eq!(m.expired + m.unserved_at_close, m.orders);
}

#[test]
fn single_pair_takes_the_argmax_action() {
    let mut sc = scenario(0.0, small_sim(), 3);
    let origin = sc.grid.point_in_zone(1, 0.5, 0.5).unwrap();
    let destination = sc.grid.point_in_zone(25, 0.5, 0.5).unwrap();
    sc.orders = vec![order(&sc, 0, 480.0, origin, destination)];
    let mask = sc.action_mask(true);
    let target = mask.iter().rposition(|&ok| ok).unwrap();
    assert!(target > 0);
    let mut world = World::new(&sc, sc.orders.clone(), &[origin], 3, mask, 9).unwrap();
    let (log, _) = world.step(&mut ArgmaxController(target)).unwrap();
    assert_eq!(log.matches, 1);
    assert_eq!(world.matches().len(), 1);
    assert_eq!(world.matches()[0].action, Action(target as u16));
    assert_eq!(world.booked_action(0), Some(Action(target as u16)));
}

#[test]
fn unmatched_rider_expires_after_tolerance() {
    let mut sc = scenario(0.0, small_sim(), 4);
    let origin = sc.grid.point_in_zone(7, 0.2, 0.2).unwrap();
    let destination = sc.grid.point_in_zone(13, 0.7, 0.7).unwrap();
    sc.orders = vec![order(&sc, 0, 480.0, origin, destination)];
    let mut world = World::new(&sc, sc.orders.clone(), &[], 3, sc.action_mask(true), 1).unwrap();
    let mut expired_at = None;
    while !world.is_finished() {
        let (log, _) = world.step(&mut RandomController).unwrap();
        if log.expired > 0 {
            expired_at = Some(log.time_min - 480.0);
            break;
        }
    }
    // still eligible at exactly 5 minutes, gone at 6
    assert_eq!(expired_at, Some(6.0));
    assert_eq!(world.waiting(), 0);
}

fn check_episode(m: &EpisodeMetrics, capacity: u8, recipe: &RewardParams) {
    assert_eq!(m.served + m.expired + m.unserved_at_close, m.orders);
    assert!(m.max_onboard <= capacity as usize);
    let mut ids: Vec<u64> = m.matches.iter().map(|r| r.order_id).collect();
    ids.sort_unstable();
    ids.dedup();
    assert_eq!(ids.len(), m.served, "an order was served twice");
    for log in &m.rounds {
        let booked: f64 = m
            .matches
            .iter()
            .filter(|r| r.round == log.round)
            .map(|r| compute_reward(recipe, r.od_km, r.wait_min, &r.detours_after, &r.detours_before).unwrap())
            .sum();
        assert!((booked - log.reward).abs() <= 1e-9 * (1.0 + booked.abs()), "round {}", log.round);
    }
    for r in &m.matches {
        assert!((r.reward - compute_reward(recipe, r.od_km, r.wait_min, &r.detours_after, &r.detours_before).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn episodes_conserve_orders_seats_and_rewards() {
    let sc = scenario(30.0, small_sim(), 5);
    for capacity in [1u8, 3] {
        let mut ins = InsertionController::default();
        check_episode(&run_episode(&sc, &setup(&sc, 0, capacity), &mut ins).unwrap(), capacity, &sc.reward);
        check_episode(&run_episode(&sc, &setup(&sc, 1, capacity), &mut RandomController).unwrap(), capacity, &sc.reward);
    }
}

#[test]
fn experience_chain_links_consecutive_decisions() {
    let sc = scenario(20.0, small_sim(), 6);
    let mut rec = Recorder { inner: RandomController, experiences: Vec::new() };
    let m = run_episode(&sc, &setup(&sc, 3, 3), &mut rec).unwrap();
    assert!(m.served > 20);
    assert_eq!(rec.experiences.len(), m.served);

    let mut chains: HashMap<usize, Vec<&MatchRecord>> = HashMap::new();
    for r in &m.matches {
        chains.entry(r.vehicle).or_default().push(r);
    }
    let mut expected = Vec::new();
    for chain in chains.values() {
        for w in chain.windows(2) {
            expected.push((w[0].state, w[0].action, w[1].state, false));
        }
    }
    let mut seen: Vec<_> = rec.experiences.iter().filter(|e| !e.done).map(|e| (e.state, e.action, e.next_state, e.done)).collect();
    let key = |x: &(EncodedState, Action, EncodedState, bool)| format!("{x:?}");
    expected.sort_by_key(key);
    seen.sort_by_key(key);
    assert_eq!(seen, expected);
    // one terminal transition per vehicle that ever matched, from its last decision
    let terminal: Vec<_> = rec.experiences.iter().filter(|e| e.done).collect();
    assert_eq!(terminal.len(), chains.len());
    for chain in chains.values() {
        let last = chain.last().unwrap();
        assert!(terminal.iter().any(|e| e.state == last.state && e.action == last.action));
    }
}

#[test]
fn pooling_labels_restrict_actions() {
    let sim = SimConfig { p_pool: 0.3, ..small_sim() };
    let sc = scenario(30.0, sim, 8);
    let orders = episode_orders(&sc, 0);
    let labeled = orders.iter().filter(|o| o.pooling_only).count();
    let frac = labeled as f64 / orders.len() as f64;
    assert!((frac - 0.3).abs() < 0.1, "labeled fraction {frac}");
    let label: HashMap<u64, bool> = orders.iter().map(|o| (o.id, o.pooling_only)).collect();
    let m = run_episode(&sc, &setup(&sc, 0, 3), &mut RandomController).unwrap();
    let mut free_transit = 0;
    for r in &m.matches {
        if label[&r.order_id] {
            assert!(r.action.is_door_to_door());
        } else if !r.action.is_door_to_door() {
            free_transit += 1;
        }
    }
    assert!(free_transit > 0);

    let sc = scenario(30.0, SimConfig { p_pool: 1.0, ..small_sim() }, 8);
    let m = run_episode(&sc, &setup(&sc, 0, 3), &mut RandomController).unwrap();
    assert!(m.served > 0);
    assert!(m.matches.iter().all(|r| r.action.is_door_to_door()));
}

#[test]
fn reruns_are_identical_and_pooling_helps() {
    let sc = scenario(30.0, small_sim(), 10);
    let a = run_episode(&sc, &setup(&sc, 2, 3), &mut RandomController).unwrap();
    let b = run_episode(&sc, &setup(&sc, 2, 3), &mut RandomController).unwrap();
    assert_eq!(a.matches, b.matches);
    assert_eq!(a.total_reward.to_bits(), b.total_reward.to_bits());
    assert_eq!(a.rounds, b.rounds);

    let three = run_episode(&sc, &setup(&sc, 0, 3), &mut InsertionController::default()).unwrap();
    let one = run_episode(&sc, &setup(&sc, 0, 1), &mut InsertionController::default()).unwrap();
    assert!(three.service_rate >= one.service_rate);
}

#[test]
fn episode_subsample_and_fleet_are_seeded_per_episode() {
    let sc = scenario(20.0, small_sim(), 11);
    let n = sc.orders.len();
    let a = episode_orders(&sc, 0);
    assert_eq!(a.len(), (0.95 * n as f64).round() as usize);
    assert_eq!(a, episode_orders(&sc, 0));
    assert_ne!(a, episode_orders(&sc, 1));
    assert!(a.windows(2).all(|w| w[0].id < w[1].id));
    assert_eq!(fleet_positions(&sc, 4), fleet_positions(&sc, 4));
    assert_ne!(fleet_positions(&sc, 4), fleet_positions(&sc, 5));
}

#[test]
fn sample_order_row_parses() {
    let grid = SyntheticCitySpec::default().grid;
    let csv = format!(
        "{}\n8:10am,40.727005,-74.00322,40.731125,-73.992233,7,13\n",
        ORDER_HEADER.join(",")
    );
    let orders = load_orders(csv.as_bytes(), &grid).unwrap();
    assert_eq!(orders.len(), 1);
    let o = orders[0];
    assert_eq!(o.request_min, 490.0);
    assert_eq!((o.origin_zone, o.dest_zone), (7, 13));
    assert_eq!(o.origin, GeoPoint { lat: 40.727005, lon: -74.00322 });
}

#[test]
fn order_file_edge_cases() {
    let grid = SyntheticCitySpec::default().grid;
    let header = ORDER_HEADER.join(",");
    assert!(load_orders(format!("{header}\n").as_bytes(), &grid).unwrap().is_empty());
    assert!(load_orders("".as_bytes(), &grid).unwrap().is_empty());

    let far = format!("{header}\n8:10am,41.5,-74.00322,40.731125,-73.992233,7,13\n");
    assert!(load_orders(far.as_bytes(), &grid).is_err());

    let bad = format!("{header}\n8:10am,40.727005,-74.00322,40.731125,-73.992233,7,13\nnoon,x,y,z,w,1,2\n");
    match load_orders(bad.as_bytes(), &grid) {
        Err(SimError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }

    // the recomputed zone wins over a wrong column
    let wrong = format!("{header}\n8:10am,40.727005,-74.00322,40.731125,-73.992233,1,2\n");
    let o = load_orders(wrong.as_bytes(), &grid).unwrap()[0];
    assert_eq!((o.origin_zone, o.dest_zone), (7, 13));
}

#[test]
fn order_file_round_trip() {
    let sc = scenario(5.0, small_sim(), 12);
    let mut buf = Vec::new();
    write_orders(&mut buf, &sc.orders).unwrap();
    let back = load_orders(buf.as_slice(), &sc.grid).unwrap();
    assert_eq!(back.len(), sc.orders.len());
    for (a, b) in back.iter().zip(&sc.orders) {
        assert_eq!(a.request_min, b.request_min);
        assert!((a.origin.lat - b.origin.lat).abs() < 1e-6);
        assert_eq!((a.origin_zone, a.dest_zone), (b.origin_zone, b.dest_zone));
    }
}

#[test]
fn poisson_volume_is_plausible() {
    let spec = city(8.0);
    let mut counts = Vec::new();
    for seed in 0..5 {
        let orders = spec.generate_orders(480.0, 540.0, &mut crate::seed::rng(seed, &[ORDER_STREAM])).unwrap();
        counts.push(orders.len() as f64);
        assert!(orders.iter().all(|o| o.origin_zone != o.dest_zone));
        assert!(orders.windows(2).all(|w| w[0].request_min <= w[1].request_min));
    }
    let mean = 480.0;
    for c in &counts {
        assert!((c - mean).abs() <= 3.0 * mean.sqrt(), "count {c}");
    }
    let zero = city(0.0).generate_orders(480.0, 540.0, &mut crate::seed::rng(0, &[ORDER_STREAM])).unwrap();
    assert!(zero.is_empty());
    let a = spec.generate_orders(480.0, 540.0, &mut crate::seed::rng(3, &[1])).unwrap();
    let b = spec.generate_orders(480.0, 540.0, &mut crate::seed::rng(3, &[1])).unwrap();
    assert_eq!(a, b);
}

#[test]
fn clock_text() {
    assert_eq!(parse_clock("8:10am"), Some(490.0));
    assert_eq!(parse_clock("12:05am"), Some(5.0));
    assert_eq!(parse_clock("1:00pm"), Some(780.0));
    assert_eq!(parse_clock("13:30:30"), Some(810.5));
    assert_eq!(parse_clock("25:00"), None);
    assert_eq!(format_clock(490.5), "08:10:30");
    assert_eq!(parse_clock(&format_clock(612.25)), Some(612.25));
}

#[test]
fn random_dataset_has_uniform_actions() {
    let sc = scenario(30.0, small_sim(), 13);
    let recipe = DatasetRecipe { sources: vec![(DataSource::Random, 1.0)] };
    let data = generate_dataset(&sc, &recipe, 3000, 500, 1).unwrap();
    assert_eq!(data.len(), 3000);
    let mask = sc.action_mask(true);
    let valid: Vec<usize> = (0..mask.len()).filter(|&a| mask[a]).collect();
    let mut counts = vec![0usize; mask.len()];
    for e in &data {
        counts[e.action.index()] += 1;
    }
    assert!(counts.iter().enumerate().all(|(a, &c)| mask[a] || c == 0));
    let expected = data.len() as f64 / valid.len() as f64;
    let chi2: f64 = valid.iter().map(|&a| (counts[a] as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((valid.len() - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn mixed_dataset_meets_quotas() {
    let sc = scenario(30.0, small_sim(), 14);
    let parts = harvest_sources(&sc, &DatasetRecipe::mixed(), 2001, 50, 2).unwrap();
    let q = quotas(2001, &[0.25; 4]);
    assert_eq!(parts.len(), 4);
    for ((_, data), want) in parts.iter().zip(&q) {
        assert_eq!(data.len(), *want);
        assert!((*want as f64 - 2001.0 / 4.0).abs() <= 1.0);
    }
    let single = &parts.iter().find(|(s, _)| *s == DataSource::SingleSeat).unwrap().1;
    // lifted single-seat states never show a second or third passenger
    for e in single {
        assert_eq!((e.state[4], e.state[5]), (0.0, 0.0));
        assert!(e.state[2] >= 2.0 / 3.0 - 1e-6);
    }
    let pooling = &parts.iter().find(|(s, _)| *s == DataSource::PoolingOnly).unwrap().1;
    assert!(pooling.iter().all(|e| e.action.is_door_to_door()));
    let all = generate_dataset(&sc, &DatasetRecipe::mixed(), 2001, 50, 2).unwrap();
    assert_eq!(all.len(), 2001);
}

#[test]
fn quota_rounding() {
    assert_eq!(quotas(10, &[0.5, 0.5]), vec![5, 5]);
    assert_eq!(quotas(10, &[0.9, 0.1]), vec![9, 1]);
    assert_eq!(quotas(3, &[0.25; 4]).iter().sum::<usize>(), 3);
    assert_eq!(quotas(0, &[0.3, 0.7]), vec![0, 0]);
}

#[test]
fn metrics_csv_round_trip() {
    let sc = scenario(10.0, small_sim(), 15);
    let m = run_episode(&sc, &setup(&sc, 0, 3), &mut RandomController).unwrap();
    let mut buf = Vec::new();
    write_metrics(&mut buf, &[m.row()]).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with(&metrics_header().join(",")));
    let back = read_metrics(buf.as_slice()).unwrap();
    assert_eq!(back.len(), 1);
    assert_eq!(back[0].episode, 0);
    assert!((back[0].service_rate - m.service_rate).abs() < 1e-9);
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(SimConfig { step_min: 0.0, ..SimConfig::default() }.validate().is_err());
    assert!(SimConfig { end_min: 400.0, ..SimConfig::default() }.validate().is_err());
    assert!(SimConfig { p_pool: 1.5, ..SimConfig::default() }.validate().is_err());
    assert!(SimConfig { seat_capacity: 4, ..SimConfig::default() }.validate().is_err());
    let sc = scenario(0.0, small_sim(), 0);
    assert!(World::new(&sc, Vec::new(), &[], 0, sc.action_mask(true), 0).is_err());
    assert!(World::new(&sc, Vec::new(), &[], 3, vec![true; 3], 0).is_err());
}

#[test]
fn rider_mask_respects_labels() {
    let global = vec![true, false, true];
    assert_eq!(rider_mask(&global, &labeled_rider(true)), vec![true, false, false]);
    assert_eq!(rider_mask(&global, &labeled_rider(false)), global);
}

fn labeled_rider(pooling_only: bool) -> crate::matching::MatchRider {
    let p = GeoPoint { lat: 0.0, lon: 0.0 };
    crate::matching::MatchRider { id: 0, origin: p, destination: p, origin_zone: 1, dest_zone: 2, pooling_only }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn seat_limits_hold(seed in 0u64..1000, capacity in 1u8..=3, rate in 5.0f64..40.0) {
        let sim = SimConfig { end_min: 495.0, vehicles: 6, ..SimConfig::default() };
        let sc = scenario(rate, sim, seed);
        let m = run_episode(&sc, &setup(&sc, seed, capacity), &mut RandomController).unwrap();
        prop_assert!(m.max_onboard <= capacity as usize);
        prop_assert_eq!(m.served + m.expired + m.unserved_at_close, m.orders);
    }
}
