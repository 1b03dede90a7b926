use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::learner::Experience;

use super::episode::{run_episode, EpisodeSetup};
use super::policies::{InsertionController, RandomController};
use super::world::{Controller, Decision, Round};
use super::{Scenario, SimError};

/// A behaviour policy that contributes transitions to a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// Random valid actions, pooling and transit allowed.
    Random,
    /// Cheapest insertion with transit.
    Insertion,
    /// Cheapest insertion restricted to door-to-door.
    PoolingOnly,
    /// Cheapest insertion on single-seat vehicles with transit.
    SingleSeat,
}

impl DataSource {
    fn key(self) -> u64 {
        match self {
            DataSource::Random => 1,
            DataSource::Insertion => 2,
            DataSource::PoolingOnly => 3,
            DataSource::SingleSeat => 4,
        }
    }
}

/// Mixture of behaviour policies with their shares of the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecipe {
    pub sources: Vec<(DataSource, f64)>,
}

impl DatasetRecipe {
    /// Narrow expert data: 90% insertion, 10% random.
    pub fn expert() -> Self {
        Self { sources: vec![(DataSource::Insertion, 0.9), (DataSource::Random, 0.1)] }
    }

    /// Broad mixed data: a quarter from each source.
    pub fn mixed() -> Self {
        Self {
            sources: vec![
                (DataSource::Random, 0.25),
                (DataSource::Insertion, 0.25),
                (DataSource::PoolingOnly, 0.25),
                (DataSource::SingleSeat, 0.25),
            ],
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.sources.is_empty() {
            return Err(SimError::Config("dataset recipe has no sources".into()));
        }
        if self.sources.iter().any(|(_, f)| !(f.is_finite() && *f >= 0.0)) {
            return Err(SimError::Config("dataset fractions must be non-negative".into()));
        }
        let sum: f64 = self.sources.iter().map(|(_, f)| f).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SimError::Config(format!("dataset fractions sum to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Splits `total` by `fractions` with largest remainders, ties to the
/// earlier source.
pub fn quotas(total: usize, fractions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * total as f64).collect();
    let mut q: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut left = total.saturating_sub(q.iter().sum());
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().cycle().take(q.len() * 2) {
        if left == 0 {
            break;
        }
        q[i] += 1;
        left -= 1;
    }
    q
}

struct Harvest<'a> {
    inner: &'a mut dyn Controller,
    out: Vec<Experience>,
}

impl Controller for Harvest<'_> {
    fn decide(&mut self, round: &Round<'_>) -> Result<Vec<Decision>, SimError> {
        self.inner.decide(round)
    }

    fn observe(&mut self, experiences: &[Experience]) -> Result<(), SimError> {
        self.out.extend_from_slice(experiences);
        Ok(())
    }
}

/// Runs each source's policy until its quota of transitions is met.
/// Single-seat states arrive already lifted to the three-seat layout.
pub fn harvest_sources(
    sc: &Scenario,
    recipe: &DatasetRecipe,
    total: usize,
    max_episodes: u64,
    seed: u64,
) -> Result<Vec<(DataSource, Vec<Experience>)>, SimError> {
    recipe.validate()?;
    let fractions: Vec<f64> = recipe.sources.iter().map(|(_, f)| *f).collect();
    let mut out = Vec::with_capacity(recipe.sources.len());
    for (&(source, _), quota) in recipe.sources.iter().zip(quotas(total, &fractions)) {
        let (capacity, transit) = match source {
            DataSource::Random | DataSource::Insertion => (sc.sim.seat_capacity, true),
            DataSource::PoolingOnly => (sc.sim.seat_capacity, false),
            DataSource::SingleSeat => (1, true),
        };
        let mut random = RandomController;
        let mut insertion = InsertionController { params: sc.insertion };
        let inner: &mut dyn Controller = match source {
            DataSource::Random => &mut random,
            _ => &mut insertion,
        };
        let mut harvest = Harvest { inner, out: Vec::with_capacity(quota) };
        let mut episode = 0;
        while harvest.out.len() < quota {
            if episode >= max_episodes {
                return Err(SimError::Config(format!(
                    "{source:?} produced {} of {quota} transitions within {max_episodes} episodes",
                    harvest.out.len()
                )));
            }
            let setup = EpisodeSetup {
                episode: crate::seed::derive(seed, &[source.key(), episode]),
                seat_capacity: capacity,
                action_mask: sc.action_mask(transit),
                epsilon: 0.0,
                gamma: 1.0,
            };
            run_episode(sc, &setup, &mut harvest)?;
            episode += 1;
        }
        harvest.out.truncate(quota);
        out.push((source, harvest.out));
    }
    Ok(out)
}

/// The shuffled union of [`harvest_sources`].
pub fn generate_dataset(
    sc: &Scenario,
    recipe: &DatasetRecipe,
    total: usize,
    max_episodes: u64,
    seed: u64,
) -> Result<Vec<Experience>, SimError> {
    let mut data: Vec<Experience> =
        harvest_sources(sc, recipe, total, max_episodes, seed)?.into_iter().flat_map(|(_, d)| d).collect();
    data.shuffle(&mut crate::seed::rng(seed, &[0x5348_5546]));
    Ok(data)
}
