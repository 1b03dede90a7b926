//! Vehicle-rider matching: exploration-aware edge weights and the
//! maximum-weight assignment solved each round.

mod assignment;
mod edges;
mod insertion;

pub use assignment::{brute_force_matching, max_weight_matching, WeightedEdge};
pub use edges::{
    build_edges, rider_mask, CandidateEdge, EdgeContext, MatchRider, MatchVehicle, MatchingParams, RewardModel, RiderId,
    ValueModel,
};
pub use insertion::{sequential_insertion_match, InsertionParams};

use crate::model::ModelError;
use crate::routing::RoutingError;

#[derive(Debug, thiserror::Error)]
pub enum MatchingError {
    #[error("invalid matching config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(ModelError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
}

/// Matched pairs of one round; every vehicle and rider appears at most once.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    pub pairs: Vec<CandidateEdge>,
    pub total_weight: f64,
}

/// Solves the round's assignment over the given edges.
pub fn solve_assignment(edges: &[CandidateEdge], vehicles: usize, riders: usize) -> MatchResult {
    let weighted: Vec<WeightedEdge> =
        edges.iter().map(|e| WeightedEdge { row: e.vehicle, col: e.rider, weight: e.weight }).collect();
    let chosen = max_weight_matching(vehicles, riders, &weighted);
    let pairs: Vec<CandidateEdge> = chosen.into_iter().map(|k| edges[k]).collect();
    let total_weight = pairs.iter().map(|p| p.weight).sum();
    MatchResult { pairs, total_weight }
}

#[cfg(test)]
mod tests;
