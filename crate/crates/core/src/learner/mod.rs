//! Training: replay memory, the conservative double-DQN and reward-guider
//! losses, the agent bundle and the offline and online training loops.

mod agent;
mod loss;
mod offline;
mod online;
mod replay;

pub use agent::{Agent, GuiderView, QView, CHECKPOINT_META};
pub use loss::{
    cddqn_loss_and_grads, ddqn_targets, epsilon_after, epsilon_decay, guider_inputs, guider_loss_and_grads,
    masked_argmax, overestimation_rate, LossParts, TrainBatch,
};
pub use offline::{train_offline, LossCurves};
pub use online::{
    evaluate, finetune_online, run_baseline, AgentController, BaselineInputs, BaselineRun, Mode, OnlineSettings,
};
pub use replay::{dataset_header, read_dataset, write_dataset, Experience, ReplayBuffer};

use serde::{Deserialize, Serialize};

use crate::neural::NeuralError;

#[derive(Debug, thiserror::Error)]
pub enum LearnerError {
    #[error("i/o: {0}")]
    Io(String),
    #[error("dataset line {line}: {msg}")]
    Dataset { line: usize, msg: String },
    #[error("dataset: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("invalid learner config: {0}")]
    Config(String),
    #[error("{0}")]
    Argument(String),
    #[error("simulation: {0}")]
    Sim(String),
}

/// Hyper-parameters of both training stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerConfig {
    pub gamma: f64,
    /// Conservative weight during offline training.
    pub conservative_offline: f64,
    /// Conservative weight during online fine-tuning.
    pub conservative_online: f64,
    pub lr_q: f64,
    pub lr_guider: f64,
    /// Soft target update rate.
    pub polyak: f64,
    pub batch_size: usize,
    pub epsilon0: f64,
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
    pub replay_capacity: usize,
    pub offline_steps: usize,
    /// Rewards are multiplied by this before entering the networks.
    pub reward_scale: f64,
    /// Guided exploration, and guider fitting, during fine-tuning.
    pub guider_online: bool,
    /// Gradient steps per matching round once the memory is full.
    pub updates_per_round: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            conservative_offline: 1.0,
            conservative_online: 0.1,
            lr_q: 0.002,
            lr_guider: 0.005,
            polyak: 0.005,
            batch_size: 1024,
            epsilon0: 1.0,
            epsilon_decay: 0.995,
            epsilon_floor: 0.005,
            replay_capacity: 10_000,
            offline_steps: 20_000,
            reward_scale: 0.01,
            guider_online: true,
            updates_per_round: 1,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |m: String| Err(LearnerError::Config(m));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("learner.gamma must be in [0, 1], got {}", self.gamma));
        }
        for (name, c) in [("conservative_offline", self.conservative_offline), ("conservative_online", self.conservative_online)] {
            if !(c.is_finite() && c >= 0.0) {
                return bad(format!("learner.{name} must be non-negative, got {c}"));
            }
        }
        for (name, lr) in [("lr_q", self.lr_q), ("lr_guider", self.lr_guider)] {
            if !(lr.is_finite() && lr > 0.0) {
                return bad(format!("learner.{name} must be positive, got {lr}"));
            }
        }
        if !(0.0..=1.0).contains(&self.polyak) {
            return bad(format!("learner.polyak must be in [0, 1], got {}", self.polyak));
        }
        if self.batch_size == 0 {
            return bad("learner.batch_size must be positive".into());
        }
        if !(0.0 <= self.epsilon_floor && self.epsilon_floor <= self.epsilon0 && self.epsilon0 <= 1.0) {
            return bad(format!(
                "learner epsilons need 0 <= epsilon_floor <= epsilon0 <= 1, got floor {} and start {}",
                self.epsilon_floor, self.epsilon0
            ));
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay) {
            return bad(format!("learner.epsilon_decay must be in [0, 1], got {}", self.epsilon_decay));
        }
        if !(self.reward_scale.is_finite() && self.reward_scale > 0.0) {
            return bad(format!("learner.reward_scale must be positive, got {}", self.reward_scale));
        }
        Ok(())
    }
}

/// Hidden layer widths shared by the value network and the guider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub hidden: Vec<usize>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { hidden: vec![128; 4] }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        if self.hidden.contains(&0) {
            return Err(LearnerError::Config("neural.hidden widths must be positive".into()));
        }
        Ok(())
    }
}
