use crate::model::STATE_DIM;
use crate::neural::{mse_loss_and_grads, Mlp, NeuralError, Scalar};

use super::{Experience, LearnerError};

/// Experiences laid out for the networks, rewards already scaled to
/// training units.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainBatch {
    pub rows: usize,
    pub states: Vec<f32>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f32>,
    pub dones: Vec<bool>,
}

impl TrainBatch {
    pub fn from_experiences<'a>(items: impl IntoIterator<Item = &'a Experience>, reward_scale: f64) -> Self {
        let mut b = TrainBatch {
            rows: 0,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            dones: Vec::new(),
        };
        for e in items {
            b.rows += 1;
            b.states.extend_from_slice(&e.state);
            b.actions.push(e.action.index());
            b.rewards.push(e.reward * reward_scale);
            b.next_states.extend_from_slice(&e.next_state);
            b.dones.push(e.done);
        }
        b
    }
}

/// Index of the largest value among `mask`ed entries, smallest index on ties.
pub fn masked_argmax(values: &[f64], mask: &[bool]) -> usize {
    let mut best = usize::MAX;
    for (a, (&v, &ok)) in values.iter().zip(mask).enumerate() {
        if ok && (best == usize::MAX || v > values[best]) {
            best = a;
        }
    }
    assert!(best != usize::MAX, "no valid action");
    best
}

/// Double-DQN targets: the training net picks the next action, the target
/// net evaluates it; terminal samples keep only the reward.
pub fn ddqn_targets<T: Scalar>(
    batch: &TrainBatch,
    qnet: &Mlp<T>,
    target: &Mlp<T>,
    gamma: f64,
    mask: &[bool],
) -> Result<Vec<f64>, NeuralError> {
    let n_actions = qnet.output_dim();
    let xs: Vec<T> = batch.next_states.iter().map(|&x| T::from_f64(x as f64)).collect();
    let q_next = qnet.forward_batch(&xs, batch.rows)?;
    let q_eval = target.forward_batch(&xs, batch.rows)?;
    Ok((0..batch.rows)
        .map(|i| {
            if batch.dones[i] {
                return batch.rewards[i];
            }
            let row: Vec<f64> = q_next[i * n_actions..(i + 1) * n_actions].iter().map(|q| q.as_f64()).collect();
            let a = masked_argmax(&row, mask);
            batch.rewards[i] + gamma * q_eval[i * n_actions + a].as_f64()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub td: f64,
    /// Mean max-Q minus mean taken-action Q (before scaling by C).
    pub gap: f64,
}

/// Conservative double-DQN loss and its gradient for given TD targets:
/// mean squared TD error plus `c` times the gap between the mean of
/// per-state max Q and the mean Q of the taken actions. The max passes
/// its gradient to the smallest-index argmax.
pub fn cddqn_loss_and_grads<T: Scalar>(
    batch: &TrainBatch,
    qnet: &Mlp<T>,
    targets: &[f64],
    c: f64,
    mask: &[bool],
) -> Result<(LossParts, Vec<f64>), NeuralError> {
    let rows = batch.rows;
    if rows == 0 {
        return Err(NeuralError::Shape("empty batch".into()));
    }
    let n_actions = qnet.output_dim();
    let xs: Vec<T> = batch.states.iter().map(|&x| T::from_f64(x as f64)).collect();
    let trace = qnet.trace(&xs, rows)?;
    let q = trace.output();
    let inv = 1.0 / rows as f64;
    let mut d_out = vec![0.0; q.len()];
    let (mut td, mut max_sum, mut taken_sum) = (0.0, 0.0, 0.0);
    for i in 0..rows {
        let row = &q[i * n_actions..(i + 1) * n_actions];
        let a = batch.actions[i];
        let err = row[a] - targets[i];
        td += err * err;
        d_out[i * n_actions + a] += 2.0 * err * inv - c * inv;
        let best = masked_argmax(row, mask);
        max_sum += row[best];
        taken_sum += row[a];
        d_out[i * n_actions + best] += c * inv;
    }
    let gap = (max_sum - taken_sum) * inv;
    let td = td * inv;
    let grads = qnet.backward(&trace, &d_out)?;
    Ok((LossParts { total: td + c * gap, td, gap }, grads))
}

/// Guider inputs: each state followed by its action scaled by `1 / action_count`.
pub fn guider_inputs(states: &[f32], actions: &[usize], action_count: usize) -> Vec<f32> {
    let mut xs = Vec::with_capacity(actions.len() * (STATE_DIM + 1));
    for (i, &a) in actions.iter().enumerate() {
        xs.extend_from_slice(&states[i * STATE_DIM..(i + 1) * STATE_DIM]);
        xs.push(a as f32 / action_count as f32);
    }
    xs
}

/// Mean squared error of the guider's reward estimates.
pub fn guider_loss_and_grads<T: Scalar>(
    batch: &TrainBatch,
    guider: &Mlp<T>,
    action_count: usize,
) -> Result<(f64, Vec<f64>), NeuralError> {
    let xs: Vec<T> =
        guider_inputs(&batch.states, &batch.actions, action_count).into_iter().map(|x| T::from_f64(x as f64)).collect();
    mse_loss_and_grads(guider, &xs, batch.rows, &batch.rewards, None)
}

/// One multiplicative decay step with a floor.
pub fn epsilon_decay(epsilon: f64, decay: f64, floor: f64) -> f64 {
    (epsilon * decay).max(floor)
}

/// Exploration rate after `k` decay steps.
pub fn epsilon_after(epsilon0: f64, decay: f64, floor: f64, k: u32) -> f64 {
    (epsilon0 * decay.powi(k as i32)).max(floor)
}

/// Relative excess of predicted over realized returns, clamped at zero.
pub fn overestimation_rate(predicted: &[f64], realized: &[f64]) -> Result<f64, LearnerError> {
    if predicted.is_empty() || predicted.len() != realized.len() {
        return Err(LearnerError::Argument("overestimation needs a non-empty, aligned decision log".into()));
    }
    let p: f64 = predicted.iter().sum();
    let r: f64 = realized.iter().sum();
    if r == 0.0 {
        return Ok(if p > 0.0 { f64::INFINITY } else { 0.0 });
    }
    Ok(((p - r) / r.abs()).max(0.0))
}
