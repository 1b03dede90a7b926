use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::matching::{RewardModel, ValueModel};
use crate::model::{EncodedState, STATE_DIM};
use crate::neural::{Adam, Mlp, CHECKPOINT_VERSION};

use super::loss::{cddqn_loss_and_grads, ddqn_targets, guider_inputs, guider_loss_and_grads, LossParts, TrainBatch};
use super::{LearnerConfig, LearnerError, NetworkConfig};

/// File holding the agent's metadata inside a checkpoint directory.
pub const CHECKPOINT_META: &str = "meta.json";

/// Value network, its target copy, the reward guider and their optimizers.
///
/// Networks work in scaled reward units; the [`QView`] and [`GuiderView`]
/// adapters report raw units to the matcher.
#[derive(Debug, Clone)]
pub struct Agent {
    pub qnet: Mlp<f32>,
    pub target: Mlp<f32>,
    pub guider: Mlp<f32>,
    q_opt: Adam,
    g_opt: Adam,
    /// Actions valid anywhere in the city; used for targets and the max term.
    pub action_mask: Vec<bool>,
    pub reward_scale: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    version: u32,
    action_mask: Vec<bool>,
    reward_scale: f64,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(
        action_mask: Vec<bool>,
        network: &NetworkConfig,
        config: &LearnerConfig,
        rng: &mut R,
    ) -> Result<Self, LearnerError> {
        network.validate()?;
        if !action_mask.iter().any(|&ok| ok) {
            return Err(LearnerError::Config("action mask allows no action".into()));
        }
        let n = action_mask.len();
        let dims = |input: usize, output: usize| {
            let mut d = vec![input];
            d.extend_from_slice(&network.hidden);
            d.push(output);
            d
        };
        let qnet = Mlp::new(&dims(STATE_DIM, n), rng)?;
        let guider = Mlp::new(&dims(STATE_DIM + 1, 1), rng)?;
        Ok(Self::from_parts(qnet.clone(), qnet, guider, action_mask, config))
    }

    fn from_parts(
        qnet: Mlp<f32>,
        target: Mlp<f32>,
        guider: Mlp<f32>,
        action_mask: Vec<bool>,
        config: &LearnerConfig,
    ) -> Self {
        let q_opt = Adam::new(qnet.param_count(), config.lr_q);
        let g_opt = Adam::new(guider.param_count(), config.lr_guider);
        Self { qnet, target, guider, q_opt, g_opt, action_mask, reward_scale: config.reward_scale }
    }

    pub fn action_count(&self) -> usize {
        self.action_mask.len()
    }

    /// Raw-unit action values of the training network.
    pub fn q_values(&self, states: &[EncodedState]) -> Vec<f64> {
        let xs: Vec<f32> = states.iter().flatten().copied().collect();
        let out = self.qnet.forward_batch(&xs, states.len()).expect("state width matches the network");
        out.into_iter().map(|q| q as f64 / self.reward_scale).collect()
    }

    /// Raw-unit guider estimates for every action of every state.
    pub fn reward_estimates(&self, states: &[EncodedState]) -> Vec<f64> {
        let n = self.action_count();
        let mut flat = Vec::with_capacity(states.len() * n * STATE_DIM);
        let mut actions = Vec::with_capacity(states.len() * n);
        for s in states {
            for a in 0..n {
                flat.extend_from_slice(s);
                actions.push(a);
            }
        }
        let xs = guider_inputs(&flat, &actions, n);
        let out = self.guider.forward_batch(&xs, actions.len()).expect("guider width matches");
        out.into_iter().map(|g| g as f64 / self.reward_scale).collect()
    }

    pub fn values(&self) -> QView<'_> {
        QView(self)
    }

    pub fn guide(&self) -> GuiderView<'_> {
        GuiderView(self)
    }

    /// One conservative double-DQN step followed by a soft target update.
    pub fn update_q(&mut self, batch: &TrainBatch, gamma: f64, c: f64, polyak: f64) -> Result<LossParts, LearnerError> {
        let targets = ddqn_targets(batch, &self.qnet, &self.target, gamma, &self.action_mask)?;
        let (parts, grads) = cddqn_loss_and_grads(batch, &self.qnet, &targets, c, &self.action_mask)?;
        self.q_opt.step(&mut self.qnet, &grads)?;
        self.target.polyak_update(&self.qnet, polyak)?;
        Ok(parts)
    }

    /// One regression step of the guider; returns the pre-step loss.
    pub fn update_guider(&mut self, batch: &TrainBatch) -> Result<f64, LearnerError> {
        let (loss, grads) = guider_loss_and_grads(batch, &self.guider, self.action_count())?;
        self.g_opt.step(&mut self.guider, &grads)?;
        Ok(loss)
    }

    /// Writes the three networks and metadata into `dir`. Optimizer
    /// moments are not stored; a reloaded agent restarts them.
    pub fn save(&self, dir: &Path) -> Result<(), LearnerError> {
        fs::create_dir_all(dir).map_err(|e| LearnerError::Io(format!("{}: {e}", dir.display())))?;
        self.qnet.save(&dir.join("qnet.bin"))?;
        self.target.save(&dir.join("target.bin"))?;
        self.guider.save(&dir.join("guider.bin"))?;
        let meta =
            Meta { version: CHECKPOINT_VERSION, action_mask: self.action_mask.clone(), reward_scale: self.reward_scale };
        let path = dir.join(CHECKPOINT_META);
        let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
        fs::write(&path, text + "\n").map_err(|e| LearnerError::Io(format!("{}: {e}", path.display())))
    }

    /// Loads a checkpoint directory. The stored action mask and reward
    /// scale win over `config`; learning rates come from `config`.
    pub fn load(dir: &Path, config: &LearnerConfig) -> Result<Self, LearnerError> {
        let path = dir.join(CHECKPOINT_META);
        let text = fs::read_to_string(&path).map_err(|e| LearnerError::Io(format!("{}: {e}", path.display())))?;
        let meta: Meta = serde_json::from_str(&text)
            .map_err(|e| LearnerError::Config(format!("{}: {e}", path.display())))?;
        if meta.version != CHECKPOINT_VERSION {
            return Err(LearnerError::Config(format!(
                "{}: checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                path.display(),
                meta.version
            )));
        }
        let qnet = Mlp::load(&dir.join("qnet.bin"))?;
        let target = Mlp::load(&dir.join("target.bin"))?;
        let guider = Mlp::load(&dir.join("guider.bin"))?;
        let n = meta.action_mask.len();
        if qnet.input_dim() != STATE_DIM
            || qnet.output_dim() != n
            || target.dims() != qnet.dims()
            || guider.input_dim() != STATE_DIM + 1
            || guider.output_dim() != 1
        {
            return Err(LearnerError::Config(format!("{}: network shapes do not fit together", dir.display())));
        }
        let mut cfg = config.clone();
        cfg.reward_scale = meta.reward_scale;
        Ok(Self::from_parts(qnet, target, guider, meta.action_mask, &cfg))
    }
}

/// The agent's value network as seen by the matcher.
pub struct QView<'a>(pub &'a Agent);

impl ValueModel for QView<'_> {
    fn action_count(&self) -> usize {
        self.0.action_count()
    }

    fn action_values(&self, states: &[EncodedState]) -> Vec<f64> {
        self.0.q_values(states)
    }
}

/// The agent's guider as seen by the matcher.
pub struct GuiderView<'a>(pub &'a Agent);

impl RewardModel for GuiderView<'_> {
    fn action_count(&self) -> usize {
        self.0.action_count()
    }

    fn reward_estimates(&self, states: &[EncodedState]) -> Vec<f64> {
        self.0.reward_estimates(states)
    }
}
