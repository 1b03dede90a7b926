//! Ride-pooling dispatch with transit drop-offs.
//!
//! A discrete-time simulator of shared-ride vehicles in a gridded city with
//! a rail network, and per-vehicle agents that choose, for every rider they
//! pick up, whether to drive the rider to the door or leave them at a
//! station. Agents are trained offline on logged dispatch data with a
//! conservative double-DQN and fine-tuned online, with a reward-regression
//! network deciding which exploratory actions are worth trying.
//!
//! Modules, bottom up:
//!
//! - [`model`]: zones, vehicle states and their encoding, the reward, the
//!   state update of a match
//! - [`routing`]: road travel times and stop sequencing
//! - [`transit`]: timetables, the station graph and last-leg search
//! - [`matching`]: candidate pairs, the assignment solver, insertion dispatch
//! - [`neural`]: a small MLP with manual backpropagation and Adam
//! - [`learner`]: losses, replay memory, offline and online training
//! - [`sim`]: demand, episodes, datasets and metrics
//! - [`cli`]: the `poolnet` command line
//!
//! ```
//! use poolnet::sim::{run_episode, EpisodeSetup, InsertionController, Scenario, SimConfig, SyntheticCitySpec};
//!
//! let sim = SimConfig { end_min: 495.0, vehicles: 8, ..SimConfig::default() };
//! let sc = Scenario::synthetic(&SyntheticCitySpec::default(), sim, 1).unwrap();
//! let setup = EpisodeSetup { episode: 0, seat_capacity: 3, action_mask: sc.action_mask(true), epsilon: 0.0, gamma: 0.99 };
//! let mut ctl = InsertionController { params: sc.insertion };
//! let m = run_episode(&sc, &setup, &mut ctl).unwrap();
//! assert!(m.served > 0);
//! ```
//!
//! The guide in `book/` covers each part with runnable examples.

pub mod model;
pub mod routing;
pub mod transit;
pub mod neural;
pub mod matching;
pub mod seed;
pub mod learner;
pub mod sim;
pub mod cli;

// The guide's code blocks run as doc-tests through these empty modules.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/city.md")]
    pub mod city {}
    #[doc = include_str!("../../../book/src/decisions.md")]
    pub mod decisions {}
    #[doc = include_str!("../../../book/src/matching.md")]
    pub mod matching {}
    #[doc = include_str!("../../../book/src/learning.md")]
    pub mod learning {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
    #[doc = include_str!("../../../book/src/checking.md")]
    pub mod checking {}
}
