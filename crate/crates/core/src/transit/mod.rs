//! Transit timetable graph, fastest paths and drop-off station choice.

mod graph;
mod network;
mod timetable;

pub use graph::{Direction, Edge, EdgeKind, Node, TransitGraph, TransitPath, BOARDING_SECONDS, EXITING_SECONDS};
pub use network::{DestinationTable, StationChoice, TransitNetwork, TransitParams};
pub use timetable::{Line, Station, StationId, Timetable, Transfer};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TransitError {
    #[error("invalid timetable: {0}")]
    Build(String),
    #[error("timetable line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown station {0}")]
    UnknownStation(StationId),
    #[error("invalid transit config: {0}")]
    Config(String),
}
