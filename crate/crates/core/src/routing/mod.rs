//! Road travel times and per-vehicle route scheduling.

mod plan;
mod provider;

pub use plan::{
    insert_order, plan_route, plan_route_with, Insertion, PassengerDelta, PassengerId, PlanStrategy, RouteEvent,
    RoutePlan, ScheduledStop, Stop, StopKind, EXHAUSTIVE_STOP_LIMIT,
};
pub use provider::{GridRouter, MockRouter, TableRouter, TravelTimeProvider};

#[derive(Debug, thiserror::Error)]
pub enum RoutingError {
    #[error("unreachable: {0}")]
    Unreachable(String),
    #[error("invalid route: {0}")]
    Plan(String),
    #[error("invalid router config: {0}")]
    Config(String),
    #[error("travel-time table: {0}")]
    Table(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
