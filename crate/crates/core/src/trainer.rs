//! Double-DQN training with a periodically synced target network.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{Action, EnvConfig, EnvError, Environment, Mode};
use crate::evaluator::{self, AgentLandmarkMap, EvalConfig, EvalError, NetPolicy};
use crate::qnet::{copy_to_target, NetError, QNet, QNetParams};
use crate::replay::{default_capacity, Batch, JointTransition, ReplayBuffer, ReplayError};
use crate::rng::Rng;
use crate::volume::Volume3D;

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("no training volumes")]
    NoVolumes,
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub type Result<T, E = TrainError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    Dqn,
    DoubleDqn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    /// In gradient updates.
    pub target_sync_every: u64,
    pub batch_size: usize,
    pub learn_rate: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// In environment steps.
    pub eps_decay_steps: u64,
    pub target_mode: TargetMode,
    pub steps_per_train: u64,
    /// Environment-step budget.
    pub max_train_steps: u64,
    /// Validate every this many episodes; 0 disables periodic validation.
    pub val_every: usize,
    pub seed: u64,
    /// Joint transitions kept; `None` means 100000 / n_agents.
    pub replay_capacity: Option<usize>,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            target_sync_every: 2500,
            batch_size: 32,
            learn_rate: 1e-3,
            eps_start: 1.0,
            eps_end: 0.1,
            eps_decay_steps: 100_000,
            target_mode: TargetMode::DoubleDqn,
            steps_per_train: 4,
            max_train_steps: 200_000,
            val_every: 50,
            seed: 0,
            replay_capacity: None,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.eps_end) || !(0.0..=1.0).contains(&self.eps_start) || self.eps_start < self.eps_end {
            return bad("need 0 <= eps_end <= eps_start <= 1");
        }
        if self.batch_size == 0 || self.steps_per_train == 0 || self.target_sync_every == 0 {
            return bad("batch_size, steps_per_train and target_sync_every must be positive");
        }
        if !(self.learn_rate > 0.0) {
            return bad("learn_rate must be positive");
        }
        if self.replay_capacity == Some(0) {
            return bad("replay_capacity must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return bad("adam betas must lie in [0, 1) and adam_eps must be positive");
        }
        Ok(())
    }

    pub fn capacity(&self, n_agents: usize) -> usize {
        self.replay_capacity.unwrap_or_else(|| default_capacity(n_agents))
    }
}

/// Linear decay from `eps_start` to `eps_end` over `eps_decay_steps`.
pub fn epsilon(step: u64, cfg: &TrainConfig) -> f64 {
    if cfg.eps_decay_steps == 0 || step >= cfg.eps_decay_steps {
        return cfg.eps_end;
    }
    let frac = step as f64 / cfg.eps_decay_steps as f64;
    cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac
}

/// Per agent: a uniform random action with probability `eps`, otherwise
/// the greedy one (ties to the lowest id). `q` is `[agent][action]`.
pub fn select_actions(q: &[f32], n_actions: usize, eps: f64, rng: &mut Rng) -> Vec<usize> {
    q.chunks(n_actions)
        .map(|row| {
            if rng.uniform() < eps {
                rng.below(n_actions as u64) as usize
            } else {
                evaluator::argmax(row)
            }
        })
        .collect()
}

/// Bootstrap targets from next-state Q-values, all `[sample][agent][action]`.
/// `q_online_next` is only read in double mode.
pub fn targets_from_q(
    rewards: &[f32],
    terminal: &[bool],
    q_online_next: &[f32],
    q_target_next: &[f32],
    n_actions: usize,
    gamma: f64,
    mode: TargetMode,
) -> Vec<f64> {
    (0..rewards.len())
        .map(|i| {
            let r = rewards[i] as f64;
            if terminal[i] {
                return r;
            }
            let tq = &q_target_next[i * n_actions..(i + 1) * n_actions];
            let boot = match mode {
                TargetMode::DoubleDqn => {
                    let a = evaluator::argmax(&q_online_next[i * n_actions..(i + 1) * n_actions]);
                    tq[a] as f64
                }
                TargetMode::Dqn => tq.iter().fold(f32::NEG_INFINITY, |m, &v| m.max(v)) as f64,
            };
            r + gamma * boot
        })
        .collect()
}

/// Targets `[sample][agent]` for a replayed batch.
pub fn compute_targets(
    batch: &Batch,
    net: &QNet,
    online: &QNetParams,
    target: &QNetParams,
    gamma: f64,
    mode: TargetMode,
) -> Result<Vec<f64>> {
    let n_actions = net.config().n_actions;
    let want = batch.size * net.config().n_agents;
    if batch.n_agents != net.config().n_agents || batch.rewards.len() != want || batch.terminal.len() != want {
        return Err(NetError::ShapeMismatch(format!(
            "batch of {} agents does not fit a {}-agent network",
            batch.n_agents,
            net.config().n_agents
        ))
        .into());
    }
    let q_target = net.predict(&target.values, &batch.next_obs, batch.size)?;
    let q_online = match mode {
        TargetMode::DoubleDqn => net.predict(&online.values, &batch.next_obs, batch.size)?,
        TargetMode::Dqn => Vec::new(),
    };
    Ok(targets_from_q(
        &batch.rewards,
        &batch.terminal,
        &q_online,
        &q_target,
        n_actions,
        gamma,
        mode,
    ))
}

/// First and second moment estimates for Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl OptState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

pub fn adam_update(params: &mut [f32], grads: &[f64], opt: &mut OptState, cfg: &TrainConfig) {
    opt.t += 1;
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let c1 = 1.0 - b1.powi(opt.t.min(i32::MAX as u64) as i32);
    let c2 = 1.0 - b2.powi(opt.t.min(i32::MAX as u64) as i32);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut opt.m).zip(&mut opt.v) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let step = cfg.learn_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.adam_eps);
        *p = (*p as f64 - step) as f32;
    }
}

/// Mean squared TD error over active entries and `dL/dQ`.
pub fn td_loss(q: &[f32], batch: &Batch, targets: &[f64], n_actions: usize) -> (f64, Vec<f64>) {
    let mut dq = vec![0f64; q.len()];
    let count = batch.active.iter().filter(|&&a| a).count();
    if count == 0 {
        return (0.0, dq);
    }
    let mut loss = 0.0;
    for i in 0..targets.len() {
        if !batch.active[i] {
            continue;
        }
        let k = i * n_actions + batch.actions[i];
        let err = q[k] as f64 - targets[i];
        loss += err * err;
        dq[k] = 2.0 * err / count as f64;
    }
    (loss / count as f64, dq)
}

/// Online and target networks plus optimizer state.
#[derive(Debug, Clone)]
pub struct Learner {
    pub net: QNet,
    pub online: QNetParams,
    pub target: QNetParams,
    pub opt: OptState,
    pub cfg: TrainConfig,
}

impl Learner {
    pub fn new(net: QNet, params: QNetParams, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if params.len() != net.param_count() {
            return Err(NetError::ShapeMismatch(format!(
                "{} parameters, network has {}",
                params.len(),
                net.param_count()
            ))
            .into());
        }
        Ok(Self {
            target: copy_to_target(&params),
            opt: OptState::new(params.len()),
            online: params,
            net,
            cfg,
        })
    }

    pub fn updates(&self) -> u64 {
        self.opt.t
    }

    /// One gradient update on a sampled minibatch; returns the loss before
    /// the update.
    pub fn train_step(&mut self, buf: &ReplayBuffer, rng: &mut Rng) -> Result<f64> {
        let batch = buf.sample(self.cfg.batch_size, rng)?;
        self.train_on(&batch)
    }

    pub fn train_on(&mut self, batch: &Batch) -> Result<f64> {
        let targets = compute_targets(batch, &self.net, &self.online, &self.target, self.cfg.gamma, self.cfg.target_mode)?;
        let (q, cache) = self.net.forward(&self.online.values, &batch.obs, batch.size)?;
        let (loss, dq) = td_loss(&q, batch, &targets, self.net.config().n_actions);
        let grads = self.net.backward(&self.online.values, &cache, &dq)?;
        adam_update(&mut self.online.values, &grads.values, &mut self.opt, &self.cfg);
        if self.opt.t % self.cfg.target_sync_every == 0 {
            self.target = copy_to_target(&self.online);
        }
        Ok(loss)
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub episode: usize,
    /// Environment steps taken so far.
    pub step: u64,
    pub epsilon: f64,
    pub mean_loss: Option<f64>,
    pub mean_reward: f64,
    pub val_error_mm: Option<f64>,
}

pub const LOG_HEADER: &str = "episode,step,epsilon,mean_loss,mean_reward,val_error_mm";

pub fn log_csv(records: &[LogRecord]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for r in records {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{:.6},{},{:.6},{}\n",
            r.episode,
            r.step,
            r.epsilon,
            opt(r.mean_loss),
            r.mean_reward,
            opt(r.val_error_mm)
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best_params: QNetParams,
    pub best_val_error: Option<f64>,
    pub final_params: QNetParams,
    pub log: Vec<LogRecord>,
    pub env_steps: u64,
    pub updates: u64,
}

/// Everything `train` needs besides the config structs.
pub struct TrainData<'a> {
    pub train: &'a [Volume3D],
    pub validation: &'a [Volume3D],
    pub map: &'a AgentLandmarkMap,
}

/// Run episodes until the environment-step budget is spent. The budget may
/// cut the last episode short; only completed episodes are logged.
pub fn train(
    net: QNet,
    env_cfg: &EnvConfig,
    cfg: &TrainConfig,
    eval_cfg: &EvalConfig,
    data: &TrainData<'_>,
    mut progress: impl FnMut(&LogRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    env_cfg.validate()?;
    if data.train.is_empty() {
        return Err(TrainError::NoVolumes);
    }
    let n = data.map.n_agents();
    if n != net.config().n_agents {
        return Err(TrainError::InvalidConfig(format!(
            "agent map has {n} agents, network expects {}",
            net.config().n_agents
        )));
    }
    for v in data.train.iter().chain(data.validation) {
        data.map.check(v)?;
    }
    let root = Rng::seed_from_u64(cfg.seed);
    let mut init_rng = root.fork(1);
    let mut env_rng = root.fork(2);
    let mut act_rng = root.fork(3);
    let mut replay_rng = root.fork(4);

    let params = net.init_params(&mut init_rng);
    let n_actions = net.config().n_actions;
    let mut learner = Learner::new(net, params, cfg.clone())?;
    let mut buf = ReplayBuffer::new(cfg.capacity(n), n, env_cfg.observation_len())?;

    let validate = |params: &QNetParams, learner: &Learner| -> Result<Option<f64>> {
        if data.validation.is_empty() {
            return Ok(None);
        }
        let policy = NetPolicy {
            net: &learner.net,
            params: &params.values,
        };
        let reports = evaluator::evaluate(&policy, data.validation, data.map, env_cfg, eval_cfg)?;
        Ok(evaluator::mean_agent_error(&reports))
    };

    let mut best_params = learner.online.clone();
    let mut best_val: Option<f64> = None;
    let mut log = Vec::new();
    let mut env_steps = 0u64;
    let mut episode = 0usize;
    'episodes: while env_steps < cfg.max_train_steps {
        let vol = &data.train[env_rng.below(data.train.len() as u64) as usize];
        let mut env = Environment::reset(vol, &data.map.agents, env_cfg, Mode::Train, &mut env_rng)?;
        let mut losses = Vec::new();
        let (mut reward_sum, mut reward_n) = (0.0, 0usize);
        let mut obs = env.observation();
        while !env.is_done() {
            if env_steps >= cfg.max_train_steps {
                break 'episodes;
            }
            let eps = epsilon(env_steps, cfg);
            let q = learner.net.predict(&learner.online.values, &obs, 1)?;
            let active: Vec<bool> = env.agents().iter().map(|a| !a.terminal).collect();
            let mut actions = select_actions(&q, n_actions, eps, &mut act_rng);
            for (a, &on) in actions.iter_mut().zip(&active) {
                if !on {
                    *a = 0;
                }
            }
            let moves: Vec<Action> = actions.iter().map(|&a| Action::from_index(a).unwrap()).collect();
            let outcomes = env.step(&moves)?;
            let next_obs = env.observation();
            let rewards: Vec<f32> = outcomes.iter().map(|o| o.reward as f32).collect();
            for (r, &on) in rewards.iter().zip(&active) {
                if on {
                    reward_sum += *r as f64;
                    reward_n += 1;
                }
            }
            buf.push(JointTransition {
                obs: std::mem::replace(&mut obs, next_obs.clone()),
                actions,
                rewards,
                next_obs,
                terminal: outcomes.iter().map(|o| o.terminal).collect(),
                active,
            })?;
            env_steps += 1;
            if env_steps % cfg.steps_per_train == 0 && buf.len() >= cfg.batch_size {
                losses.push(learner.train_step(&buf, &mut replay_rng)?);
            }
        }
        episode += 1;
        let val_error_mm = if cfg.val_every > 0 && episode % cfg.val_every == 0 {
            validate(&learner.online, &learner)?
        } else {
            None
        };
        let record = LogRecord {
            episode,
            step: env_steps,
            epsilon: epsilon(env_steps, cfg),
            mean_loss: (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64),
            mean_reward: if reward_n > 0 { reward_sum / reward_n as f64 } else { 0.0 },
            val_error_mm,
        };
        if let Some(v) = val_error_mm {
            if best_val.map_or(true, |b| v < b) {
                best_val = Some(v);
                best_params = learner.online.clone();
            }
        }
        progress(&record);
        log.push(record);
    }
    // Make sure the final weights are considered.
    if let Some(last) = log.last_mut() {
        if last.val_error_mm.is_none() {
            if let Some(v) = validate(&learner.online, &learner)? {
                last.val_error_mm = Some(v);
                if best_val.map_or(true, |b| v < b) {
                    best_val = Some(v);
                    best_params = learner.online.clone();
                }
            }
        }
    }
    Ok(TrainOutcome {
        best_params,
        best_val_error: best_val,
        final_params: learner.online.clone(),
        env_steps,
        updates: learner.updates(),
        log,
    })
}
