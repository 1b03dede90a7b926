use rand::Rng;

use super::{Agent, Experience, LearnerConfig, LearnerError, TrainBatch};

/// Per-step training losses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossCurves {
    pub q: Vec<f64>,
    pub guider: Vec<f64>,
}

/// Trains the value network and the guider on a fixed dataset for `steps`
/// minibatch updates, sampling `batch_size` transitions with replacement.
pub fn train_offline<R: Rng + ?Sized>(
    agent: &mut Agent,
    data: &[Experience],
    config: &LearnerConfig,
    steps: usize,
    rng: &mut R,
) -> Result<LossCurves, LearnerError> {
    config.validate()?;
    if data.is_empty() {
        return Err(LearnerError::Argument("offline dataset is empty".into()));
    }
    if let Some(e) = data.iter().find(|e| e.action.index() >= agent.action_count()) {
        return Err(LearnerError::Argument(format!(
            "dataset action {} exceeds the agent's {} actions",
            e.action.0,
            agent.action_count()
        )));
    }
    let mut curves = LossCurves { q: Vec::with_capacity(steps), guider: Vec::with_capacity(steps) };
    for step in 0..steps {
        let picks: Vec<&Experience> = (0..config.batch_size).map(|_| &data[rng.gen_range(0..data.len())]).collect();
        let batch = TrainBatch::from_experiences(picks, agent.reward_scale);
        let q = agent.update_q(&batch, config.gamma, config.conservative_offline, config.polyak)?;
        let g = agent.update_guider(&batch)?;
        curves.q.push(q.total);
        curves.guider.push(g);
        if step % 1000 == 0 {
            log::debug!("offline step {step}: q loss {:.5}, guider loss {:.5}", q.total, g);
        }
    }
    Ok(curves)
}
