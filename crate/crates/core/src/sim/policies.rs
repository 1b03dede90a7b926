use crate::matching::{
    build_edges, sequential_insertion_match, solve_assignment, EdgeContext, InsertionParams, MatchResult, ValueModel,
};
use crate::model::EncodedState;

use super::world::{Controller, Decision, Round};
use super::SimError;

/// A value model that rates every action 0.
#[derive(Debug, Clone, Copy)]
pub struct ZeroValues(pub usize);

impl ValueModel for ZeroValues {
    fn action_count(&self) -> usize {
        self.0
    }

    fn action_values(&self, states: &[EncodedState]) -> Vec<f64> {
        vec![0.0; states.len() * self.0]
    }
}

/// Converts a solved matching into controller decisions.
pub fn decisions_from_matching(result: &MatchResult, valued: bool) -> Vec<Decision> {
    result
        .pairs
        .iter()
        .map(|e| Decision {
            vehicle: e.vehicle,
            rider: e.rider,
            action: e.action,
            value: valued.then_some(e.value),
            explored: e.explored,
        })
        .collect()
}

/// Matches as many pairs as possible, each with a uniformly random valid action.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomController;

impl Controller for RandomController {
    fn decide(&mut self, round: &Round<'_>) -> Result<Vec<Decision>, SimError> {
        let values = ZeroValues(round.action_mask.len());
        let ctx = EdgeContext {
            encoder: round.encoder,
            params: round.matching,
            values: &values,
            guider: None,
            epsilon: 1.0,
            action_mask: round.action_mask,
            seed: round.seed,
            round: round.index,
        };
        let edges = build_edges(&ctx, round.vehicles, round.riders)?;
        Ok(decisions_from_matching(&solve_assignment(&edges, round.vehicles.len(), round.riders.len()), false))
    }
}

/// The cheapest-insertion heuristic.
#[derive(Debug, Clone, Copy, Default)]
pub struct InsertionController {
    pub params: InsertionParams,
}

impl Controller for InsertionController {
    fn decide(&mut self, round: &Round<'_>) -> Result<Vec<Decision>, SimError> {
        let result = sequential_insertion_match(
            round.vehicles,
            round.plans,
            round.riders,
            round.router,
            Some(round.transit),
            round.action_mask,
            round.encoder,
            round.matching,
            &self.params,
        )?;
        Ok(decisions_from_matching(&result, false))
    }
}
