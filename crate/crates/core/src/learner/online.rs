use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matching::{build_edges, solve_assignment, EdgeContext, RewardModel, ValueModel};
use crate::model::EncodedState;
use crate::sim::{
    run_episode, Controller, Decision, EpisodeMetrics, EpisodeSetup, InsertionController, RandomController, Round,
    Scenario, SimError,
};

use super::loss::{epsilon_after, TrainBatch};
use super::{Agent, Experience, LearnerConfig, LearnerError, NetworkConfig, ReplayBuffer};

/// Dispatch methods that can be trained or evaluated in the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Double DQN from scratch with pooling and transit.
    PwtOnlineRl,
    /// Acts on an online-fitted reward model.
    PwtGreedy,
    /// Cheapest-insertion heuristic, no learning.
    PwtInsertion,
    /// Double DQN from scratch, door-to-door only.
    POnlineRl,
    /// Double DQN from scratch on single-seat vehicles with transit.
    NpwtOnlineRl,
    /// Offline-trained agent fine-tuned with guided exploration.
    PwtRgcql,
    /// Double DQN from scratch with the offline data kept in memory.
    HybridQ,
    /// Offline-trained agent fine-tuned without the guider filter.
    Cql,
    /// Random valid actions.
    Random,
}

impl Mode {
    pub const ALL: [Mode; 9] = [
        Mode::PwtOnlineRl,
        Mode::PwtGreedy,
        Mode::PwtInsertion,
        Mode::POnlineRl,
        Mode::NpwtOnlineRl,
        Mode::PwtRgcql,
        Mode::HybridQ,
        Mode::Cql,
        Mode::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::PwtOnlineRl => "pwt_online_rl",
            Mode::PwtGreedy => "pwt_greedy",
            Mode::PwtInsertion => "pwt_insertion",
            Mode::POnlineRl => "p_online_rl",
            Mode::NpwtOnlineRl => "npwt_online_rl",
            Mode::PwtRgcql => "pwt_rgcql",
            Mode::HybridQ => "hybrid_q",
            Mode::Cql => "cql",
            Mode::Random => "random",
        }
    }

    /// Transit drop-off actions are available.
    pub fn transit(self) -> bool {
        self != Mode::POnlineRl
    }

    pub fn seat_capacity(self, fleet: u8) -> u8 {
        if self == Mode::NpwtOnlineRl {
            1
        } else {
            fleet
        }
    }

    /// Starts from an offline-trained agent.
    pub fn needs_pretrained(self) -> bool {
        matches!(self, Mode::PwtRgcql | Mode::Cql)
    }

    /// Keeps the offline dataset pinned in the replay memory.
    pub fn needs_dataset(self) -> bool {
        self == Mode::HybridQ
    }

    /// Learning behaviour during online episodes; `None` for fixed policies.
    pub fn online(self, cfg: &LearnerConfig) -> Option<OnlineSettings> {
        let scratch = OnlineSettings {
            conservative: 0.0,
            guided: false,
            greedy: false,
            learn_q: true,
            learn_guider: false,
            epsilon0: cfg.epsilon0,
        };
        match self {
            Mode::PwtInsertion | Mode::Random => None,
            Mode::PwtOnlineRl | Mode::POnlineRl | Mode::NpwtOnlineRl | Mode::HybridQ => Some(scratch),
            Mode::PwtGreedy => Some(OnlineSettings { greedy: true, learn_q: false, learn_guider: true, ..scratch }),
            Mode::PwtRgcql => Some(OnlineSettings {
                conservative: cfg.conservative_online,
                guided: cfg.guider_online,
                learn_guider: cfg.guider_online,
                ..scratch
            }),
            Mode::Cql => Some(OnlineSettings { conservative: cfg.conservative_online, ..scratch }),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = Mode::ALL.iter().map(|m| m.as_str()).collect();
            LearnerError::Config(format!("unknown mode {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

/// How an agent explores and learns while it dispatches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnlineSettings {
    /// Conservative weight of the value update.
    pub conservative: f64,
    /// Exploration keeps only actions the guider rates above the threshold.
    pub guided: bool,
    /// Rank actions by the guider's reward estimate instead of Q.
    pub greedy: bool,
    pub learn_q: bool,
    pub learn_guider: bool,
    pub epsilon0: f64,
}

impl OnlineSettings {
    /// Greedy dispatch with frozen networks.
    pub fn evaluation() -> Self {
        Self { conservative: 0.0, guided: false, greedy: false, learn_q: false, learn_guider: false, epsilon0: 0.0 }
    }
}

struct RewardAsValue<'a>(&'a Agent);

impl ValueModel for RewardAsValue<'_> {
    fn action_count(&self) -> usize {
        self.0.action_count()
    }

    fn action_values(&self, states: &[EncodedState]) -> Vec<f64> {
        self.0.reward_estimates(states)
    }
}

/// Dispatches with an agent and trains it from the experiences it sees.
pub struct AgentController<'a> {
    pub agent: &'a mut Agent,
    pub buffer: &'a mut ReplayBuffer,
    pub config: &'a LearnerConfig,
    pub settings: OnlineSettings,
    pub epsilon: f64,
    rng: ChaCha8Rng,
    /// Value losses of the updates made so far.
    pub q_losses: Vec<f64>,
    pub guider_losses: Vec<f64>,
}

impl<'a> AgentController<'a> {
    pub fn new(
        agent: &'a mut Agent,
        buffer: &'a mut ReplayBuffer,
        config: &'a LearnerConfig,
        settings: OnlineSettings,
        seed: u64,
    ) -> Self {
        Self {
            agent,
            buffer,
            config,
            settings,
            epsilon: settings.epsilon0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            q_losses: Vec::new(),
            guider_losses: Vec::new(),
        }
    }

    fn learning(&self) -> bool {
        self.settings.learn_q || self.settings.learn_guider
    }
}

impl Controller for AgentController<'_> {
    fn decide(&mut self, round: &Round<'_>) -> Result<Vec<Decision>, SimError> {
        let agent: &Agent = self.agent;
        let q = agent.values();
        let greedy = RewardAsValue(agent);
        let values: &dyn ValueModel = if self.settings.greedy { &greedy } else { &q };
        let guide = agent.guide();
        let guider: Option<&dyn RewardModel> = if self.settings.guided { Some(&guide) } else { None };
        let ctx = EdgeContext {
            encoder: round.encoder,
            params: round.matching,
            values,
            guider,
            epsilon: self.epsilon,
            action_mask: round.action_mask,
            seed: round.seed,
            round: round.index,
        };
        let edges = build_edges(&ctx, round.vehicles, round.riders)?;
        let result = solve_assignment(&edges, round.vehicles.len(), round.riders.len());
        // reward estimates are not returns, so greedy decisions carry no value
        Ok(crate::sim::decisions_from_matching(&result, !self.settings.greedy))
    }

    fn observe(&mut self, experiences: &[Experience]) -> Result<(), SimError> {
        if !self.learning() {
            return Ok(());
        }
        for e in experiences {
            self.buffer.push(*e);
        }
        if !self.buffer.is_full() {
            return Ok(());
        }
        let cfg = self.config;
        for _ in 0..cfg.updates_per_round {
            let idx = self.buffer.sample_indices(&mut self.rng, cfg.batch_size);
            let batch = TrainBatch::from_experiences(idx.iter().map(|&i| self.buffer.get(i)), self.agent.reward_scale);
            let wrap = |e: LearnerError| SimError::Controller(e.to_string());
            if self.settings.learn_q {
                let parts = self.agent.update_q(&batch, cfg.gamma, self.settings.conservative, cfg.polyak).map_err(wrap)?;
                self.q_losses.push(parts.total);
            }
            if self.settings.learn_guider {
                self.guider_losses.push(self.agent.update_guider(&batch).map_err(wrap)?);
            }
        }
        Ok(())
    }
}

/// Runs `episodes` online episodes numbered from `first_episode`, decaying
/// exploration per episode and training per `settings`.
#[allow(clippy::too_many_arguments)]
pub fn finetune_online(
    sc: &Scenario,
    agent: &mut Agent,
    buffer: &mut ReplayBuffer,
    config: &LearnerConfig,
    settings: OnlineSettings,
    seat_capacity: u8,
    first_episode: u64,
    episodes: u64,
) -> Result<Vec<EpisodeMetrics>, LearnerError> {
    config.validate()?;
    let seed = crate::seed::derive(sc.seed, &[0x4c45_4152, first_episode]);
    let mask = agent.action_mask.clone();
    let mut ctl = AgentController::new(agent, buffer, config, settings, seed);
    let mut out = Vec::with_capacity(episodes as usize);
    for k in 0..episodes {
        let epsilon = if settings.epsilon0 == 0.0 {
            0.0
        } else {
            epsilon_after(settings.epsilon0, config.epsilon_decay, config.epsilon_floor, k as u32)
        };
        ctl.epsilon = epsilon;
        let setup =
            EpisodeSetup { episode: first_episode + k, seat_capacity, action_mask: mask.clone(), epsilon, gamma: config.gamma };
        let m = run_episode(sc, &setup, &mut ctl).map_err(|e| LearnerError::Sim(format!("episode {}: {e}", first_episode + k)))?;
        log::info!(
            "episode {}: service {:.3}, reward {:.0}, epsilon {:.3}",
            m.episode,
            m.service_rate,
            m.total_reward,
            epsilon
        );
        out.push(m);
    }
    Ok(out)
}

/// Greedy, non-learning episodes of a trained agent.
pub fn evaluate(
    sc: &Scenario,
    agent: &mut Agent,
    config: &LearnerConfig,
    seat_capacity: u8,
    first_episode: u64,
    episodes: u64,
) -> Result<Vec<EpisodeMetrics>, LearnerError> {
    let mut buffer = ReplayBuffer::new(0);
    finetune_online(sc, agent, &mut buffer, config, OnlineSettings::evaluation(), seat_capacity, first_episode, episodes)
}

/// Inputs a baseline run may need besides the scenario.
pub struct BaselineInputs<'a> {
    pub network: &'a NetworkConfig,
    pub config: &'a LearnerConfig,
    /// Offline-trained agent for modes that fine-tune one.
    pub pretrained: Option<Agent>,
    /// Offline transitions for modes that keep them in memory.
    pub dataset: Option<&'a [Experience]>,
}

/// Result of a baseline run: metrics and the agent, when one was trained.
pub struct BaselineRun {
    pub metrics: Vec<EpisodeMetrics>,
    pub agent: Option<Agent>,
}

/// Runs one of the dispatch methods for `episodes` episodes.
pub fn run_baseline(
    mode: Mode,
    sc: &Scenario,
    inputs: BaselineInputs<'_>,
    first_episode: u64,
    episodes: u64,
) -> Result<BaselineRun, LearnerError> {
    let cfg = inputs.config;
    let capacity = mode.seat_capacity(sc.sim.seat_capacity);
    let Some(settings) = mode.online(cfg) else {
        let mut random = RandomController;
        let mut insertion = InsertionController { params: sc.insertion };
        let ctl: &mut dyn Controller = if mode == Mode::Random { &mut random } else { &mut insertion };
        let mut metrics = Vec::new();
        for k in 0..episodes {
            let setup = EpisodeSetup {
                episode: first_episode + k,
                seat_capacity: capacity,
                action_mask: sc.action_mask(mode.transit()),
                epsilon: 0.0,
                gamma: cfg.gamma,
            };
            metrics.push(run_episode(sc, &setup, ctl).map_err(|e| LearnerError::Sim(e.to_string()))?);
        }
        return Ok(BaselineRun { metrics, agent: None });
    };
    let mut agent = match (mode.needs_pretrained(), inputs.pretrained) {
        (true, Some(a)) => a,
        (true, None) => return Err(LearnerError::Config(format!("mode {mode} needs an offline-trained agent"))),
        (false, _) => {
            let mut rng = crate::seed::rng(sc.seed, &[0x494e_4954, first_episode]);
            Agent::new(sc.action_mask(mode.transit()), inputs.network, cfg, &mut rng)?
        }
    };
    if agent.action_mask != sc.action_mask(mode.transit()) {
        return Err(LearnerError::Config(format!("agent's action set does not fit mode {mode} on this city")));
    }
    let mut buffer = ReplayBuffer::new(cfg.replay_capacity);
    if mode.needs_dataset() {
        let data = inputs.dataset.ok_or_else(|| LearnerError::Config(format!("mode {mode} needs an offline dataset")))?;
        buffer.pin(data);
    }
    let metrics = finetune_online(sc, &mut agent, &mut buffer, cfg, settings, capacity, first_episode, episodes)?;
    Ok(BaselineRun { metrics, agent: Some(agent) })
}
