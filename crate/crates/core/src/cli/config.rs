use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::learner::{LearnerConfig, Mode, NetworkConfig};
use crate::matching::{InsertionParams, MatchingParams};
use crate::model::RewardParams;
use crate::routing::GridRouter;
use crate::sim::{load_orders, DataSource, DatasetRecipe, Scenario, SimConfig, SyntheticCitySpec, ORDER_STREAM};
use crate::transit::{Timetable, TransitParams};

/// Everything a command needs, in one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub city: CityConfig,
    pub fleet: FleetConfig,
    pub reward: RewardParams,
    pub matching: MatchingConfig,
    pub neural: NetworkConfig,
    pub learner: LearnerConfig,
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct CityConfig {
    pub layout: SyntheticCitySpec,
    pub transit: TransitParams,
    /// Order file; generated from the layout when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orders: Option<PathBuf>,
    /// Timetable file; derived from the layout's lines when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timetable: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FleetConfig {
    pub vehicles: usize,
    pub seat_capacity: u8,
    pub speed_kmh: f64,
}

impl Default for FleetConfig {
    fn default() -> Self {
        Self { vehicles: 50, seat_capacity: 3, speed_kmh: GridRouter::DEFAULT_SPEED_KMH }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct MatchingConfig {
    pub edges: MatchingParams,
    pub insertion: InsertionParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecipeKind {
    /// Mostly insertion-heuristic transitions.
    T1,
    /// Equal shares of four behaviour policies.
    T2,
    /// The `sources` list of the dataset section.
    Custom,
}

impl std::str::FromStr for RecipeKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t1" => Ok(RecipeKind::T1),
            "t2" => Ok(RecipeKind::T2),
            "custom" => Ok(RecipeKind::Custom),
            _ => bail!("unknown recipe {s:?}; expected t1, t2 or custom"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub recipe: RecipeKind,
    pub size: usize,
    /// Give up when a source needs more episodes than this.
    pub max_episodes: u64,
    pub sources: Vec<(DataSource, f64)>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { recipe: RecipeKind::T2, size: 20_000, max_episodes: 1000, sources: Vec::new() }
    }
}

impl DatasetConfig {
    pub fn recipe(&self, kind: RecipeKind) -> DatasetRecipe {
        match kind {
            RecipeKind::T1 => DatasetRecipe::expert(),
            RecipeKind::T2 => DatasetRecipe::mixed(),
            RecipeKind::Custom => DatasetRecipe { sources: self.sources.clone() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub episodes: u64,
    pub eval_episodes: u64,
    /// The first seed is the root seed of single runs; sweeps use all.
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub start_min: f64,
    pub end_min: f64,
    pub step_min: f64,
    pub wait_tolerance_min: f64,
    pub p_pool: f64,
    pub subsample: f64,
    pub dataset: DatasetConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            mode: Mode::PwtRgcql,
            episodes: 100,
            eval_episodes: 5,
            seeds: vec![1],
            out_dir: PathBuf::from("runs"),
            start_min: sim.start_min,
            end_min: sim.end_min,
            step_min: sim.step_min,
            wait_tolerance_min: sim.wait_tolerance_min,
            p_pool: sim.p_pool,
            subsample: sim.subsample,
            dataset: DatasetConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads a config file. Relative file paths inside it are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::from_json(&text).with_context(|| format!("in config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.city.orders, &mut cfg.city.timetable].into_iter().flatten() {
            if p.is_relative() {
                let joined = base.join(&*p);
                *p = joined.canonicalize().unwrap_or(joined);
            }
        }
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn validate(&self) -> Result<()> {
        self.city.layout.validate()?;
        self.city.transit.validate()?;
        self.reward.validate()?;
        self.matching.edges.validate()?;
        self.neural.validate()?;
        self.learner.validate()?;
        self.sim().validate()?;
        if self.experiment.seeds.is_empty() {
            bail!("experiment.seeds must list at least one seed");
        }
        if self.experiment.dataset.recipe == RecipeKind::Custom {
            self.experiment.dataset.recipe(RecipeKind::Custom).validate()?;
        }
        Ok(())
    }

    pub fn root_seed(&self) -> u64 {
        self.experiment.seeds[0]
    }

    pub fn sim(&self) -> SimConfig {
        let e = &self.experiment;
        SimConfig {
            start_min: e.start_min,
            end_min: e.end_min,
            step_min: e.step_min,
            vehicles: self.fleet.vehicles,
            seat_capacity: self.fleet.seat_capacity,
            speed_kmh: self.fleet.speed_kmh,
            wait_tolerance_min: e.wait_tolerance_min,
            p_pool: e.p_pool,
            subsample: e.subsample,
        }
    }

    /// The city, transit and demand of this config under `seed`.
    pub fn scenario(&self, seed: u64) -> Result<Scenario> {
        let layout = &self.city.layout;
        let grid = layout.grid;
        let timetable = match &self.city.timetable {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading timetable {}", p.display()))?;
                Timetable::parse(&text, &grid).with_context(|| format!("in timetable {}", p.display()))?
            }
            None => layout.timetable()?,
        };
        let sim = self.sim();
        let orders = match &self.city.orders {
            Some(p) => {
                let f = std::fs::File::open(p).with_context(|| format!("opening orders {}", p.display()))?;
                load_orders(std::io::BufReader::new(f), &grid).with_context(|| format!("in orders {}", p.display()))?
            }
            None => layout.generate_orders(sim.start_min, sim.end_min, &mut crate::seed::rng(seed, &[ORDER_STREAM]))?,
        };
        Ok(Scenario::new(
            grid,
            timetable,
            self.city.transit,
            orders,
            sim,
            self.reward,
            self.matching.edges,
            self.matching.insertion,
            seed,
        )?)
    }
}
