use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::model::{km_per_degree, Action, EncodedState, GeoPoint, StateEncoder, VehicleState, ZoneGrid};
use crate::routing::{GridRouter, MockRouter, RoutePlan};
use crate::transit::{Line, Station, Timetable, TransitNetwork, TransitParams};

const ACTIONS: usize = 26;

/// Values depend on the candidate destination so different riders differ.
struct Scripted(fn(&EncodedState, usize) -> f64);

impl ValueModel for Scripted {
    fn action_count(&self) -> usize {
        ACTIONS
    }

    fn action_values(&self, states: &[EncodedState]) -> Vec<f64> {
        states.iter().flat_map(|s| (0..ACTIONS).map(move |a| (self.0)(s, a))).collect()
    }
}

impl RewardModel for Scripted {
    fn action_count(&self) -> usize {
        ACTIONS
    }

    fn reward_estimates(&self, states: &[EncodedState]) -> Vec<f64> {
        self.action_values(states)
    }
}

fn grid() -> ZoneGrid {
    ZoneGrid::new(GeoPoint::new(40.70, -74.02), 800.0, 5, 5).unwrap()
}

fn encoder() -> StateEncoder {
    StateEncoder::new(480.0, 60.0, 25)
}

fn east_of(p: GeoPoint, km: f64) -> GeoPoint {
    GeoPoint::new(p.lat, p.lon + km / (km_per_degree() * p.lat.to_radians().cos()))
}

fn vehicle(id: usize, zone: u32, position: GeoPoint) -> MatchVehicle {
    MatchVehicle { id, state: VehicleState::empty(485.0, zone, 26), position }
}

fn rider(id: u64, origin: GeoPoint, dest_zone: u32) -> MatchRider {
    let g = grid();
    MatchRider {
        id,
        origin,
        destination: g.zone_center(dest_zone).unwrap(),
        origin_zone: g.zone_of(origin).unwrap(),
        dest_zone,
        pooling_only: false,
    }
}

fn ctx<'a>(
    enc: &'a StateEncoder,
    params: &'a MatchingParams,
    values: &'a dyn ValueModel,
    guider: Option<&'a dyn RewardModel>,
    epsilon: f64,
    mask: &'a [bool],
) -> EdgeContext<'a> {
    EdgeContext { encoder: enc, params, values, guider, epsilon, action_mask: mask, seed: 7, round: 3 }
}

fn scene() -> (Vec<MatchVehicle>, Vec<MatchRider>) {
    let g = grid();
    let c = g.zone_center(13).unwrap();
    let vehicles = (0..4).map(|i| vehicle(i, 13, east_of(c, 0.2 * i as f64))).collect();
    let riders = (0..5).map(|i| rider(100 + i, east_of(c, 0.1 * i as f64), 1 + 5 * i as u32)).collect();
    (vehicles, riders)
}

fn ramp(s: &EncodedState, a: usize) -> f64 {
    // peaks at an action that depends on the candidate destination
    let peak = (s[13] * 26.0).round() as usize % ACTIONS;
    50.0 - (a as f64 - peak as f64).abs()
}

#[test]
fn greedy_edges_take_the_best_valid_action() {
    let (vehicles, riders) = scene();
    let (enc, params, mask) = (encoder(), MatchingParams::default(), vec![true; ACTIONS]);
    let q = Scripted(ramp);
    let edges = build_edges(&ctx(&enc, &params, &q, None, 0.0, &mask), &vehicles, &riders).unwrap();
    assert_eq!(edges.len(), 4 * 5);
    for e in &edges {
        assert!(!e.explored);
        let qs: Vec<f64> = (0..ACTIONS).map(|a| ramp(&e.state, a)).collect();
        let best = qs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(e.weight, best);
        assert_eq!(e.action.index(), qs.iter().position(|&x| x == best).unwrap());
    }
}

#[test]
fn ties_choose_the_smallest_action() {
    let (vehicles, riders) = scene();
    let (enc, params, mask) = (encoder(), MatchingParams::default(), vec![true; ACTIONS]);
    let flat = Scripted(|_, _| 3.0);
    let edges = build_edges(&ctx(&enc, &params, &flat, None, 0.0, &mask), &vehicles, &riders).unwrap();
    assert!(edges.iter().all(|e| e.action == Action(0)));
    let mut masked = mask.clone();
    masked[0] = false;
    masked[1] = false;
    let edges = build_edges(&ctx(&enc, &params, &flat, None, 0.0, &masked), &vehicles, &riders).unwrap();
    assert!(edges.iter().all(|e| e.action == Action(2)));
}

#[test]
fn guided_exploration_filters_actions() {
    let (vehicles, riders) = scene();
    let (enc, params, mask) = (encoder(), MatchingParams::default(), vec![true; ACTIONS]);
    let q = Scripted(ramp);
    let only_zero = Scripted(|_, a| if a == 0 { 150.0 } else { 20.0 });
    let edges = build_edges(&ctx(&enc, &params, &q, Some(&only_zero), 1.0, &mask), &vehicles, &riders).unwrap();
    assert!(!edges.is_empty());
    for e in &edges {
        assert!(e.explored);
        assert_eq!(e.action, Action(0));
        assert_eq!(e.weight, params.exploration_weight);
    }

    // nothing clears the threshold: fall back to exploitation
    let none = Scripted(|_, _| 0.0);
    let edges = build_edges(&ctx(&enc, &params, &q, Some(&none), 1.0, &mask), &vehicles, &riders).unwrap();
    assert!(edges.iter().all(|e| !e.explored && e.weight < params.exploration_weight));
}

#[test]
fn unguided_exploration_covers_valid_actions() {
    let g = grid();
    let c = g.zone_center(13).unwrap();
    let vehicles: Vec<MatchVehicle> = (0..40).map(|i| vehicle(i, 13, c)).collect();
    let riders: Vec<MatchRider> = (0..40).map(|i| rider(i, c, 7)).collect();
    let (enc, params) = (encoder(), MatchingParams::default());
    let mut mask = vec![false; ACTIONS];
    for a in [0, 3, 9, 17] {
        mask[a] = true;
    }
    let q = Scripted(ramp);
    let edges = build_edges(&ctx(&enc, &params, &q, None, 1.0, &mask), &vehicles, &riders).unwrap();
    let mut counts = [0usize; ACTIONS];
    for e in &edges {
        assert!(e.explored);
        counts[e.action.index()] += 1;
    }
    for a in 0..ACTIONS {
        if mask[a] {
            // 1600 draws over 4 actions
            assert!(counts[a] > 300 && counts[a] < 500, "{a}: {}", counts[a]);
        } else {
            assert_eq!(counts[a], 0);
        }
    }
}

#[test]
fn radius_limits_edges() {
    let g = grid();
    let c = g.zone_center(13).unwrap();
    let vehicles = vec![vehicle(0, 13, c)];
    let riders = vec![rider(1, east_of(c, 1.3), 3), rider(2, east_of(c, 1.1), 3)];
    let (enc, params, mask) = (encoder(), MatchingParams::default(), vec![true; ACTIONS]);
    let q = Scripted(ramp);
    let edges = build_edges(&ctx(&enc, &params, &q, None, 0.0, &mask), &vehicles, &riders).unwrap();
    assert_eq!(edges.len(), 1);
    assert_eq!(edges[0].rider, 1);
}

#[test]
fn pooling_only_riders_get_door_to_door() {
    let (vehicles, mut riders) = scene();
    for r in &mut riders {
        r.pooling_only = true;
    }
    let (enc, params, mask) = (encoder(), MatchingParams::default(), vec![true; ACTIONS]);
    let favors_transit = Scripted(|_, a| a as f64);
    for eps in [0.0, 1.0] {
        let edges = build_edges(&ctx(&enc, &params, &favors_transit, None, eps, &mask), &vehicles, &riders).unwrap();
        assert!(edges.iter().all(|e| e.action == Action(0)));
    }
    let mut no_direct = mask.clone();
    no_direct[0] = false;
    let edges = build_edges(&ctx(&enc, &params, &favors_transit, None, 0.0, &no_direct), &vehicles, &riders).unwrap();
    assert!(edges.is_empty());
}

#[test]
fn full_vehicles_are_skipped() {
    let (mut vehicles, riders) = scene();
    for v in &mut vehicles {
        v.state.vacant = 0;
    }
    let (enc, params, mask) = (encoder(), MatchingParams::default(), vec![true; ACTIONS]);
    let q = Scripted(ramp);
    assert!(build_edges(&ctx(&enc, &params, &q, None, 0.0, &mask), &vehicles, &riders).unwrap().is_empty());
}

#[test]
fn edges_are_reproducible() {
    let (vehicles, riders) = scene();
    let (enc, params, mask) = (encoder(), MatchingParams::default(), vec![true; ACTIONS]);
    let q = Scripted(ramp);
    for eps in [0.0, 0.5] {
        let a = build_edges(&ctx(&enc, &params, &q, None, eps, &mask), &vehicles, &riders).unwrap();
        let b = build_edges(&ctx(&enc, &params, &q, None, eps, &mask), &vehicles, &riders).unwrap();
        assert_eq!(a, b);
    }
}

fn edge(vehicle: usize, rider: usize, weight: f64) -> CandidateEdge {
    CandidateEdge { vehicle, rider, weight, action: Action(0), explored: false, value: weight, state: [0.0; 14] }
}

#[test]
fn assignment_small_cases() {
    let r = solve_assignment(&[edge(0, 0, 2.0)], 1, 1);
    assert_eq!(r.pairs.len(), 1);
    let r = solve_assignment(&[edge(0, 0, 5.0), edge(1, 0, 9.0)], 2, 1);
    assert_eq!((r.pairs[0].vehicle, r.total_weight), (1, 9.0));
    let r = solve_assignment(&[edge(0, 0, -1.0), edge(1, 1, 0.0)], 2, 2);
    assert!(r.pairs.is_empty());
    assert_eq!(solve_assignment(&[], 3, 0), MatchResult::default());
}

fn random_instance(rng: &mut impl Rng) -> (usize, usize, Vec<WeightedEdge>) {
    let rows = rng.gen_range(1..=7);
    let cols = rng.gen_range(1..=7);
    let density = rng.gen_range(0.2..1.0);
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if rng.gen_bool(density) {
                // eighths keep every partial sum exact
                edges.push(WeightedEdge { row: r, col: c, weight: rng.gen_range(-16..200) as f64 / 8.0 });
            }
        }
    }
    (rows, cols, edges)
}

#[test]
fn assignment_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for trial in 0..1000 {
        let (rows, cols, edges) = random_instance(&mut rng);
        let chosen = max_weight_matching(rows, cols, &edges);
        let total: f64 = chosen.iter().map(|&k| edges[k].weight).sum();
        assert_eq!(total, brute_force_matching(rows, cols, &edges), "trial {trial}");
        let mut rows_seen = vec![false; rows];
        let mut cols_seen = vec![false; cols];
        for &k in &chosen {
            assert!(edges[k].weight > 0.0);
            assert!(!std::mem::replace(&mut rows_seen[edges[k].row], true));
            assert!(!std::mem::replace(&mut cols_seen[edges[k].col], true));
        }
    }
}

proptest! {
    #[test]
    fn scaling_keeps_the_matching(seed in any::<u64>(), scale in 0.1f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = rng.gen_range(1..=7);
        let cols = rng.gen_range(1..=7);
        // continuous weights make the optimum unique almost surely
        let edges: Vec<WeightedEdge> = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .map(|(row, col)| WeightedEdge { row, col, weight: rng.gen_range(0.01..10.0) })
            .collect();
        let scaled: Vec<WeightedEdge> = edges.iter().map(|e| WeightedEdge { weight: e.weight * scale, ..*e }).collect();
        prop_assert_eq!(max_weight_matching(rows, cols, &edges), max_weight_matching(rows, cols, &scaled));
    }

    #[test]
    fn explored_actions_pass_the_filter(seed in any::<u64>(), eps in 0.0f64..=1.0) {
        let (vehicles, riders) = scene();
        let (enc, params, mask) = (encoder(), MatchingParams::default(), vec![true; ACTIONS]);
        let q = Scripted(ramp);
        let guider = Scripted(|s, a| if (a + (s[13] * 100.0) as usize) % 3 == 0 { 120.0 } else { 90.0 });
        let mut c = ctx(&enc, &params, &q, Some(&guider), eps, &mask);
        c.seed = seed;
        for e in build_edges(&c, &vehicles, &riders).unwrap() {
            if e.explored {
                let g = guider.reward_estimates(&[e.state])[e.action.index()];
                prop_assert!(g > params.reward_threshold);
            }
        }
    }
}

#[test]
fn insertion_prefers_the_cheaper_vehicle() {
    let g = grid();
    let c = g.zone_center(13).unwrap();
    let (pa, pb, origin) = (east_of(c, 0.3), east_of(c, -0.5), c);
    let r = rider(5, origin, 14);
    let mut router = MockRouter::new(50.0);
    router.set(pa, origin, 5.0).set(pb, origin, 1.0).set(origin, r.destination, 2.0);
    let vehicles = vec![vehicle(0, 13, pa), vehicle(1, 13, pb)];
    let plans = [RoutePlan::idle(pa, 485.0), RoutePlan::idle(pb, 485.0)];
    let plan_refs: Vec<&RoutePlan> = plans.iter().collect();
    let mut mask = vec![false; ACTIONS];
    mask[0] = true;
    let res = sequential_insertion_match(
        &vehicles,
        &plan_refs,
        &[r],
        &router,
        None,
        &mask,
        &encoder(),
        &MatchingParams::default(),
        &InsertionParams::default(),
    )
    .unwrap();
    assert_eq!(res.pairs.len(), 1);
    assert_eq!(res.pairs[0].vehicle, 1);
    assert_eq!(res.pairs[0].value, -3.0);

    let empty = sequential_insertion_match(
        &vehicles,
        &plan_refs,
        &[],
        &router,
        None,
        &mask,
        &encoder(),
        &MatchingParams::default(),
        &InsertionParams::default(),
    )
    .unwrap();
    assert!(empty.pairs.is_empty());
}

fn row_line() -> TransitNetwork {
    let g = grid();
    let stations: Vec<Station> =
        (11..=15).map(|z| Station { id: z, point: g.zone_center(z).unwrap(), zone: z }).collect();
    let tt = Timetable {
        stations,
        lines: vec![Line { id: "R".into(), stations: vec![11, 12, 13, 14, 15], segment_seconds: vec![60.0; 4] }],
        transfers: vec![],
    };
    TransitNetwork::new(tt, 25, TransitParams::default()).unwrap()
}

fn network_mask(net: &TransitNetwork) -> Vec<bool> {
    (0..ACTIONS).map(|a| a == 0 || net.zone_has_station(a as u32)).collect()
}

#[test]
fn insertion_uses_transit_within_the_window() {
    let g = grid();
    let net = row_line();
    let router = GridRouter::default();
    let origin = g.zone_center(11).unwrap();
    let r = rider(1, origin, 15);
    let vehicles = vec![vehicle(0, 11, origin)];
    let plans = [RoutePlan::idle(origin, 485.0)];
    let plan_refs: Vec<&RoutePlan> = plans.iter().collect();
    let run = |riders: &[MatchRider]| {
        sequential_insertion_match(
            &vehicles,
            &plan_refs,
            riders,
            &router,
            Some(&net),
            &network_mask(&net),
            &encoder(),
            &MatchingParams::default(),
            &InsertionParams::default(),
        )
        .unwrap()
    };
    // the station at the pickup adds no driving at all
    assert_eq!(run(&[r]).pairs[0].action, Action(11));

    // destination far from every station: no transit option fits the window
    let far = MatchRider { destination: g.zone_center(1).unwrap(), dest_zone: 1, ..r };
    assert_eq!(run(&[far]).pairs[0].action, Action(0));
}
