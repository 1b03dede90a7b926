//! The `poolnet` command-line front end.

mod config;
pub mod plot;

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{CityConfig, DatasetConfig, ExperimentConfig, FleetConfig, MatchingConfig, RecipeKind, RunConfig};

use crate::learner::{
    evaluate, finetune_online, read_dataset, run_baseline, train_offline, write_dataset, Agent, BaselineInputs, Mode,
    ReplayBuffer,
};
use crate::sim::{read_metrics, write_metrics, write_orders, EpisodeMetrics, MetricsRow};

/// Episode numbers of evaluation runs start here, away from training demand.
pub const EVAL_EPISODE_OFFSET: u64 = 1_000_000;

#[derive(Debug, Parser)]
#[command(name = "poolnet", version, about = "Ride-pooling and transit dispatch experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed, overriding the config's first seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Share of riders restricted to door-to-door service.
    #[arg(long = "p-pool", global = true)]
    pub p_pool: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write grid, timetable, demand and orders of the configured city.
    GenCity {
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one order file.
    GenOrders {
        #[arg(long)]
        out: PathBuf,
    },
    /// Collect offline transitions from behaviour policies.
    GenDataset {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        recipe: Option<RecipeKind>,
        /// Number of transitions.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Fit the value network and guider to a dataset.
    TrainOffline {
        #[arg(long)]
        dataset: PathBuf,
        /// Checkpoint directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Continue training a checkpoint online.
    Finetune {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        episodes: Option<u64>,
        #[arg(long, value_enum)]
        guider: Option<Switch>,
        #[arg(long)]
        epsilon0: Option<f64>,
    },
    /// Greedy episodes of a checkpoint without learning.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        episodes: Option<u64>,
    },
    /// Run one dispatch method for every configured seed.
    Baseline {
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        episodes: Option<u64>,
        /// Offline-trained agent, for modes that start from one.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Offline transitions, for modes that replay them.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        epsilon0: Option<f64>,
    },
    /// Draw metrics files as an SVG line chart.
    Plot {
        /// Metrics CSV files, one series each.
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "total_reward")]
        metric: String,
        /// Rolling-mean window in episodes.
        #[arg(long, default_value_t = 1)]
        window: usize,
    },
}

/// Entry point of the binary.
pub fn main() -> Result<()> {
    let env = env_logger::Env::new().filter_or("POOLNET_LOG", "info");
    env_logger::Builder::from_env(env).format_timestamp(None).init();
    run(Cli::parse())
}

/// The config a command runs with, after flags are applied.
pub fn effective_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.experiment.seeds = vec![seed];
    }
    if let Some(p) = global.p_pool {
        cfg.experiment.p_pool = p;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = effective_config(&cli.global)?;
    match cli.command {
        Command::GenCity { out } => gen_city(&cfg, &out),
        Command::GenOrders { out } => {
            let sc = cfg.scenario(cfg.root_seed())?;
            let mut w = create(&out)?;
            write_orders(&mut w, &sc.orders)?;
            finish(w, &out)
        }
        Command::GenDataset { out, recipe, n } => {
            let d = &cfg.experiment.dataset;
            let kind = recipe.unwrap_or(d.recipe);
            let n = n.unwrap_or(d.size);
            let seed = cfg.root_seed();
            let sc = cfg.scenario(seed)?;
            let data = crate::sim::generate_dataset(&sc, &d.recipe(kind), n, d.max_episodes, seed)?;
            let mut w = create(&out)?;
            write_dataset(&mut w, &data)?;
            finish(w, &out)?;
            log::info!("wrote {} transitions to {}", data.len(), out.display());
            Ok(())
        }
        Command::TrainOffline { dataset, out, steps } => {
            let data = read_dataset(BufReader::new(open(&dataset)?)).with_context(|| format!("in {}", dataset.display()))?;
            let seed = cfg.root_seed();
            let sc = cfg.scenario(seed)?;
            let mut rng = crate::seed::rng(seed, &[0x4f46_464c]);
            let mut agent = Agent::new(sc.action_mask(true), &cfg.neural, &cfg.learner, &mut rng)?;
            let steps = steps.unwrap_or(cfg.learner.offline_steps);
            let curves = train_offline(&mut agent, &data, &cfg.learner, steps, &mut rng)?;
            save_agent(&agent, &out)?;
            let path = out.join("losses.csv");
            let mut w = create(&path)?;
            writeln!(w, "step,q_loss,guider_loss")?;
            for (i, (q, g)) in curves.q.iter().zip(&curves.guider).enumerate() {
                writeln!(w, "{i},{q},{g}")?;
            }
            finish(w, &path)?;
            write_run(&cfg, &out)
        }
        Command::Finetune { checkpoint, out, episodes, guider, epsilon0 } => {
            if let Some(g) = guider {
                cfg.learner.guider_online = g == Switch::On;
            }
            if let Some(e) = epsilon0 {
                cfg.learner.epsilon0 = e;
            }
            cfg.validate()?;
            let seed = cfg.root_seed();
            let sc = cfg.scenario(seed)?;
            let mut agent = load_agent(&checkpoint, &cfg)?;
            let settings = Mode::PwtRgcql.online(&cfg.learner).expect("a learning mode");
            let mut buffer = ReplayBuffer::new(cfg.learner.replay_capacity);
            let n = episodes.unwrap_or(cfg.experiment.episodes);
            let capacity = cfg.fleet.seat_capacity;
            let metrics = finetune_online(&sc, &mut agent, &mut buffer, &cfg.learner, settings, capacity, 0, n)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            save_metrics(&metrics, &out.join("metrics.csv"))?;
            save_matches(&metrics, &out.join("matches.csv"))?;
            save_agent(&agent, &out.join("checkpoint"))?;
            write_run(&cfg, &out)
        }
        Command::Evaluate { checkpoint, out, episodes } => {
            let sc = cfg.scenario(cfg.root_seed())?;
            let mut agent = load_agent(&checkpoint, &cfg)?;
            let n = episodes.unwrap_or(cfg.experiment.eval_episodes);
            let metrics = evaluate(&sc, &mut agent, &cfg.learner, cfg.fleet.seat_capacity, EVAL_EPISODE_OFFSET, n)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            save_metrics(&metrics, &out.join("metrics.csv"))?;
            save_matches(&metrics, &out.join("matches.csv"))?;
            write_run(&cfg, &out)
        }
        Command::Baseline { mode, out, episodes, checkpoint, dataset, epsilon0 } => {
            let mode = mode.unwrap_or(cfg.experiment.mode);
            cfg.experiment.mode = mode;
            if let Some(e) = epsilon0 {
                cfg.learner.epsilon0 = e;
            }
            cfg.validate()?;
            let n = episodes.unwrap_or(cfg.experiment.episodes);
            let data = match &dataset {
                Some(p) => Some(read_dataset(BufReader::new(open(p)?)).with_context(|| format!("in {}", p.display()))?),
                None => None,
            };
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for &seed in &cfg.experiment.seeds {
                let sc = cfg.scenario(seed)?;
                let pretrained = match &checkpoint {
                    Some(p) => Some(load_agent(p, &cfg)?),
                    None => None,
                };
                let inputs =
                    BaselineInputs { network: &cfg.neural, config: &cfg.learner, pretrained, dataset: data.as_deref() };
                let run = run_baseline(mode, &sc, inputs, 0, n)?;
                save_metrics(&run.metrics, &out.join(format!("{mode}_seed{seed}.csv")))?;
                save_matches(&run.metrics, &out.join(format!("{mode}_seed{seed}_matches.csv")))?;
            }
            write_run(&cfg, &out)
        }
        Command::Plot { inputs, out, metric, window } => plot_files(&inputs, &out, &metric, window),
    }
}

fn gen_city(cfg: &RunConfig, out: &Path) -> Result<()> {
    let sc = cfg.scenario(cfg.root_seed())?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let write = |name: &str, text: &str| -> Result<()> {
        let p = out.join(name);
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    };
    write("grid.json", &(serde_json::to_string_pretty(&sc.grid)? + "\n"))?;
    write("timetable.csv", &sc.transit.timetable().to_text())?;
    let mut demand = String::from("zone,orders_per_min\n");
    for (i, rate) in cfg.city.layout.zone_intensities().iter().enumerate() {
        demand.push_str(&format!("{},{rate}\n", i + 1));
    }
    write("demand.csv", &demand)?;
    let orders = out.join("orders.csv");
    let mut w = create(&orders)?;
    write_orders(&mut w, &sc.orders)?;
    finish(w, &orders)?;
    // a config that replays exactly these files
    let mut replay = cfg.clone();
    replay.city.orders = Some(PathBuf::from("orders.csv"));
    replay.city.timetable = Some(PathBuf::from("timetable.csv"));
    write("run.json", &replay.to_json())
}

/// Reads metrics files and writes their chart.
pub fn plot_files(inputs: &[PathBuf], out: &Path, metric: &str, window: usize) -> Result<()> {
    let mut series = Vec::new();
    for p in inputs {
        let rows = read_metrics(BufReader::new(open(p)?)).with_context(|| format!("in {}", p.display()))?;
        if rows.is_empty() {
            bail!("{} has no metrics rows", p.display());
        }
        let y = plot::moving_average(&plot::metric_values(&rows, metric)?, window);
        let x = rows.iter().map(|r| r.episode as f64).collect();
        let label = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        series.push(plot::Series { label, x, y });
    }
    let label = if window > 1 { format!("{metric} ({window}-episode mean)") } else { metric.to_string() };
    let svg = plot::render_svg(&series, "episode", &label)?;
    fs::write(out, svg).with_context(|| format!("writing {}", out.display()))
}

fn open(p: &Path) -> Result<fs::File> {
    fs::File::open(p).with_context(|| format!("opening {}", p.display()))
}

fn create(p: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?))
}

fn finish(mut w: BufWriter<fs::File>, p: &Path) -> Result<()> {
    w.flush().with_context(|| format!("writing {}", p.display()))
}

fn save_metrics(metrics: &[EpisodeMetrics], path: &Path) -> Result<()> {
    let rows: Vec<MetricsRow> = metrics.iter().map(EpisodeMetrics::row).collect();
    let mut w = create(path)?;
    write_metrics(&mut w, &rows)?;
    finish(w, path)
}

/// One row per executed match.
fn save_matches(metrics: &[EpisodeMetrics], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "episode,round,vehicle,order_id,action,reward")?;
    for m in metrics {
        for r in &m.matches {
            writeln!(w, "{},{},{},{},{},{}", m.episode, r.round, r.vehicle, r.order_id, r.action.0, r.reward)?;
        }
    }
    finish(w, path)
}

fn save_agent(agent: &Agent, dir: &Path) -> Result<()> {
    agent.save(dir).with_context(|| format!("saving checkpoint to {}", dir.display()))
}

fn load_agent(dir: &Path, cfg: &RunConfig) -> Result<Agent> {
    Agent::load(dir, &cfg.learner).with_context(|| format!("loading checkpoint {}", dir.display()))
}

/// Records the effective config, root seed included, next to the outputs.
fn write_run(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let p = dir.join("run.json");
    fs::write(&p, cfg.to_json()).with_context(|| format!("writing {}", p.display()))
}
