//! Greedy evaluation, error statistics and the experiment protocols.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{Action, EnvConfig, EnvError, Environment, Mode, Position, TerminationCause};
use crate::qnet::{NetConfig, NetError, QNet};
use crate::rng::{hash_str, mix_seed, Rng};
use crate::volume::Volume3D;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("unknown landmark {landmark:?} in volume {volume}")]
    UnknownLandmark { landmark: String, volume: String },
    #[error("nothing to summarize")]
    EmptyInput,
    #[error("policy returned {got} Q-values, expected {expected}")]
    PolicyShape { expected: usize, got: usize },
    #[error("experiment {kind} needs {needed}, got {got} landmarks")]
    LandmarkCount { kind: String, needed: String, got: usize },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Net(#[from] NetError),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

/// Landmark assigned to each agent, by agent index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentLandmarkMap {
    pub agents: Vec<String>,
}

impl AgentLandmarkMap {
    pub fn new<S: Into<String>>(agents: impl IntoIterator<Item = S>) -> Self {
        Self {
            agents: agents.into_iter().map(Into::into).collect(),
        }
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    /// Distinct landmarks in order of first appearance.
    pub fn landmarks(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for l in &self.agents {
            if !out.contains(l) {
                out.push(l.clone());
            }
        }
        out
    }

    pub fn agents_for(&self, landmark: &str) -> Vec<usize> {
        (0..self.agents.len()).filter(|&a| self.agents[a] == landmark).collect()
    }

    pub fn check(&self, volume: &Volume3D) -> Result<()> {
        for l in &self.agents {
            if volume.landmark(l).is_none() {
                return Err(EvalError::UnknownLandmark {
                    landmark: l.clone(),
                    volume: volume.id.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Anything that scores the six moves for every agent of an environment.
pub trait Policy: Sync {
    /// Q-values `[agent][action]` for the current state.
    fn q_values(&self, env: &Environment<'_>) -> Result<Vec<f32>>;
}

/// The network acting greedily.
pub struct NetPolicy<'a> {
    pub net: &'a QNet,
    pub params: &'a [f32],
}

impl Policy for NetPolicy<'_> {
    fn q_values(&self, env: &Environment<'_>) -> Result<Vec<f32>> {
        Ok(self.net.predict(self.params, &env.observation(), 1)?)
    }
}

/// Scripted reference policy: step along the axis with the largest
/// remaining offset, toward the target. On the voxel nearest the target it
/// steps anywhere except back to where it came from, so that voxel collects
/// the most visits. Reads the target directly.
pub struct TowardTargetPolicy;

impl TowardTargetPolicy {
    pub fn action(position: Position, target: [f64; 3], previous: Option<Position>, scale: i64) -> Action {
        let delta: [f64; 3] = std::array::from_fn(|a| target[a] - position[a] as f64);
        if delta.iter().all(|d| d.abs() <= 0.5) {
            return Action::ALL
                .into_iter()
                .find(|a| {
                    let (axis, sign) = (a.index() / 2, if a.index() % 2 == 0 { 1 } else { -1 });
                    let mut next = position;
                    next[axis] += sign * scale;
                    Some(next) != previous
                })
                .unwrap();
        }
        let mut axis = 0;
        for a in 1..3 {
            if delta[a].abs() > delta[axis].abs() {
                axis = a;
            }
        }
        Action::from_index(2 * axis + usize::from(delta[axis] < 0.0)).unwrap()
    }
}

impl Policy for TowardTargetPolicy {
    fn q_values(&self, env: &Environment<'_>) -> Result<Vec<f32>> {
        let mut q = vec![0f32; env.n_agents() * Action::COUNT];
        for (i, agent) in env.agents().iter().enumerate() {
            let previous = agent.trace.len().checked_sub(2).map(|k| agent.trace[k]);
            let a = Self::action(agent.position, env.target_position(i), previous, env.current_scale(i) as i64);
            q[i * Action::COUNT + a.index()] = 1.0;
        }
        Ok(q)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(q: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate() {
        if v > q[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReport {
    pub agent: usize,
    pub landmark: String,
    pub final_position: Position,
    pub target: [f64; 3],
    pub error_mm: f64,
    pub steps: usize,
    pub cause: TerminationCause,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub landmark: String,
    pub members: Vec<usize>,
    pub position: [f64; 3],
    pub error_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub volume_id: String,
    pub agents: Vec<AgentReport>,
    /// Landmarks searched by more than one agent.
    pub ensembles: Vec<EnsembleReport>,
}

impl EpisodeReport {
    /// Error used for summaries: the ensemble error when the landmark has
    /// several agents, otherwise the single agent's error.
    pub fn landmark_errors(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = Vec::new();
        for a in &self.agents {
            if out.iter().any(|(l, _)| *l == a.landmark) {
                continue;
            }
            let err = match self.ensembles.iter().find(|e| e.landmark == a.landmark) {
                Some(e) => e.error_mm,
                None => a.error_mm,
            };
            out.push((a.landmark.clone(), err));
        }
        out
    }
}

fn euclid_mm(volume: &Volume3D, p: [f64; 3], q: [f64; 3]) -> f64 {
    let s = volume.spacing();
    (0..3).map(|a| ((p[a] - q[a]) * s[a]).powi(2)).sum::<f64>().sqrt()
}

/// One greedy episode in evaluation mode.
pub fn run_episode<P: Policy + ?Sized>(
    policy: &P,
    volume: &Volume3D,
    map: &AgentLandmarkMap,
    cfg: &EnvConfig,
    rng: &mut Rng,
) -> Result<EpisodeReport> {
    map.check(volume)?;
    let mut env = Environment::reset(volume, &map.agents, cfg, Mode::Eval, rng)?;
    let n = map.n_agents();
    while !env.is_done() {
        let q = policy.q_values(&env)?;
        if q.len() != n * Action::COUNT {
            return Err(EvalError::PolicyShape {
                expected: n * Action::COUNT,
                got: q.len(),
            });
        }
        let actions: Vec<Action> = q
            .chunks(Action::COUNT)
            .map(|row| Action::from_index(argmax(row)).unwrap())
            .collect();
        env.step(&actions)?;
    }
    let agents: Vec<AgentReport> = env
        .agents()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let p = a.final_position.unwrap_or(a.position);
            let target = env.target_position(i);
            AgentReport {
                agent: i,
                landmark: a.target.clone(),
                final_position: p,
                target,
                error_mm: euclid_mm(volume, p.map(|v| v as f64), target),
                steps: a.steps,
                cause: a.cause.unwrap_or(TerminationCause::StepCap),
            }
        })
        .collect();
    let ensembles = map
        .landmarks()
        .into_iter()
        .filter_map(|l| {
            let members = map.agents_for(&l);
            if members.len() < 2 {
                return None;
            }
            let k = members.len() as f64;
            let position: [f64; 3] =
                std::array::from_fn(|ax| members.iter().map(|&m| agents[m].final_position[ax] as f64).sum::<f64>() / k);
            let target = agents[members[0]].target;
            Some(EnsembleReport {
                error_mm: euclid_mm(volume, position, target),
                landmark: l,
                members,
                position,
            })
        })
        .collect();
    Ok(EpisodeReport {
        volume_id: volume.id.clone(),
        agents,
        ensembles,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub seed: u64,
    /// Episodes per volume.
    pub repeats: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { seed: 2024, repeats: 1 }
    }
}

/// Start-position seed for one (volume, episode) pair, shared by every
/// method evaluated with the same base seed.
pub fn eval_start_seed(base: u64, volume_id: &str, episode: usize) -> u64 {
    mix_seed(&[base, hash_str(volume_id), episode as u64])
}

/// Greedy episodes over `volumes`, `repeats` each, in volume order.
pub fn evaluate<P: Policy + ?Sized>(
    policy: &P,
    volumes: &[Volume3D],
    map: &AgentLandmarkMap,
    env_cfg: &EnvConfig,
    eval_cfg: &EvalConfig,
) -> Result<Vec<EpisodeReport>> {
    let jobs: Vec<(usize, usize)> = (0..volumes.len())
        .flat_map(|v| (0..eval_cfg.repeats).map(move |e| (v, e)))
        .collect();
    jobs.par_iter()
        .map(|&(v, e)| {
            let vol = &volumes[v];
            let mut rng = Rng::seed_from_u64(eval_start_seed(eval_cfg.seed, &vol.id, e));
            run_episode(policy, vol, map, env_cfg, &mut rng)
        })
        .collect()
}

/// Mean per-agent error over all reports; the model-selection metric.
pub fn mean_agent_error(reports: &[EpisodeReport]) -> Option<f64> {
    let errs: Vec<f64> = reports.iter().flat_map(|r| r.agents.iter().map(|a| a.error_mm)).collect();
    (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSummary {
    pub landmark: String,
    pub n: usize,
    pub mean_mm: f64,
    /// Population standard deviation.
    pub std_mm: f64,
    pub median_mm: f64,
    pub max_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub rows: Vec<LandmarkSummary>,
}

impl MetricsSummary {
    pub fn row(&self, landmark: &str) -> Option<&LandmarkSummary> {
        self.rows.iter().find(|r| r.landmark == landmark)
    }
}

pub fn describe(landmark: &str, errors: &[f64]) -> Result<LandmarkSummary> {
    if errors.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = errors.len();
    let mean = errors.iter().sum::<f64>() / n as f64;
    let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n as f64;
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(LandmarkSummary {
        landmark: landmark.to_string(),
        n,
        mean_mm: mean,
        std_mm: var.sqrt(),
        median_mm: median,
        max_mm: sorted[n - 1],
    })
}

/// Per-landmark statistics, rows sorted by landmark name.
pub fn summarize(reports: &[EpisodeReport]) -> Result<MetricsSummary> {
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in reports {
        for (l, e) in r.landmark_errors() {
            groups.entry(l).or_default().push(e);
        }
    }
    if groups.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let rows = groups
        .iter()
        .map(|(l, errs)| describe(l, errs))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsSummary { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    MultiLandmark,
    EnsembleSameLandmark,
    Hybrid,
    SingleAgentBaseline,
    CollabBaseline,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        Self::MultiLandmark,
        Self::EnsembleSameLandmark,
        Self::Hybrid,
        Self::SingleAgentBaseline,
        Self::CollabBaseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::MultiLandmark => "multi_landmark",
            Self::EnsembleSameLandmark => "ensemble_same_landmark",
            Self::Hybrid => "hybrid",
            Self::SingleAgentBaseline => "single_agent_baseline",
            Self::CollabBaseline => "collab_baseline",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One network to train and evaluate as part of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRun {
    pub label: String,
    pub map: AgentLandmarkMap,
    pub net: NetConfig,
}

/// Agent maps and network shapes for an experiment over `landmarks`.
/// `ensemble_size` is the agent count for same-landmark ensembles.
pub fn plan_experiment(
    kind: ExperimentKind,
    landmarks: &[String],
    base: &NetConfig,
    ensemble_size: usize,
) -> Result<Vec<PlannedRun>> {
    let need = |needed: &str, ok: bool| {
        if ok {
            Ok(())
        } else {
            Err(EvalError::LandmarkCount {
                kind: kind.to_string(),
                needed: needed.to_string(),
                got: landmarks.len(),
            })
        }
    };
    let run = |label: String, map: AgentLandmarkMap, comm: bool| PlannedRun {
        net: NetConfig {
            n_agents: map.n_agents(),
            comm_enabled: comm,
            ..base.clone()
        },
        label,
        map,
    };
    Ok(match kind {
        ExperimentKind::MultiLandmark | ExperimentKind::CollabBaseline => {
            need("at least 1", !landmarks.is_empty())?;
            let comm = kind == ExperimentKind::MultiLandmark && base.comm_enabled;
            vec![run(kind.to_string(), AgentLandmarkMap::new(landmarks.iter().cloned()), comm)]
        }
        ExperimentKind::EnsembleSameLandmark => {
            need("exactly 1", landmarks.len() == 1)?;
            need("an ensemble of at least 1 agent", ensemble_size >= 1)?;
            let map = AgentLandmarkMap::new(std::iter::repeat(landmarks[0].clone()).take(ensemble_size));
            vec![run(kind.to_string(), map, base.comm_enabled)]
        }
        ExperimentKind::Hybrid => {
            need("exactly 2", landmarks.len() == 2)?;
            let (a, b) = (&landmarks[0], &landmarks[1]);
            let map = AgentLandmarkMap::new([a, a, b, b].map(|s| s.clone()));
            vec![run(kind.to_string(), map, base.comm_enabled)]
        }
        ExperimentKind::SingleAgentBaseline => {
            need("at least 1", !landmarks.is_empty())?;
            landmarks
                .iter()
                .map(|l| run(format!("{kind}_{l}"), AgentLandmarkMap::new([l.clone()]), false))
                .collect()
        }
    })
}

pub const RESULTS_HEADER: &str = "experiment,landmark,volume_id,agent,final_x,final_y,final_z,error_mm,steps,cause";
pub const SUMMARY_HEADER: &str = "experiment,landmark,n,mean_mm,std_mm,median_mm,max_mm";

/// Per-agent rows, then one `ensemble` row per shared landmark.
pub fn results_csv(experiment: &str, reports: &[EpisodeReport]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in reports {
        for a in &r.agents {
            let p = a.final_position;
            let _ = writeln!(
                out,
                "{experiment},{},{},{},{},{},{},{:.6},{},{}",
                a.landmark,
                r.volume_id,
                a.agent,
                p[0],
                p[1],
                p[2],
                a.error_mm,
                a.steps,
                a.cause.as_str()
            );
        }
        for e in &r.ensembles {
            let steps = e.members.iter().map(|&m| r.agents[m].steps).max().unwrap_or(0);
            let _ = writeln!(
                out,
                "{experiment},{},{},ensemble,{:.4},{:.4},{:.4},{:.6},{steps},ensemble",
                e.landmark, r.volume_id, e.position[0], e.position[1], e.position[2], e.error_mm
            );
        }
    }
    out
}

pub fn summary_csv(experiment: &str, summary: &MetricsSummary) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in &summary.rows {
        let _ = writeln!(
            out,
            "{experiment},{},{},{:.6},{:.6},{:.6},{:.6}",
            r.landmark, r.n, r.mean_mm, r.std_mm, r.median_mm, r.max_mm
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn empty_volume(d: usize, lms: &[(&str, [f64; 3])]) -> Volume3D {
        let mut v = Volume3D::from_voxels("empty", [d; 3], [1.0; 3], vec![0.0; d * d * d]).unwrap();
        v.set_landmarks(lms.iter().map(|(k, p)| (k.to_string(), *p)).collect()).unwrap();
        v
    }

    fn env_cfg() -> EnvConfig {
        EnvConfig {
            roi_size: 5,
            ..EnvConfig::default()
        }
    }

    #[test]
    fn oracle_policy_lands_within_half_diagonal() {
        let vol = empty_volume(64, &[("A", [20.3, 40.7, 31.5]), ("B", [45.0, 12.2, 50.9])]);
        let map = AgentLandmarkMap::new(["A", "B"]);
        let mut rng = Rng::seed_from_u64(3);
        for _ in 0..100 {
            let r = run_episode(&TowardTargetPolicy, &vol, &map, &env_cfg(), &mut rng).unwrap();
            for a in &r.agents {
                assert!(a.error_mm <= 3f64.sqrt() / 2.0 + 1e-12, "{a:?}");
                assert_eq!(a.cause, TerminationCause::Oscillation);
                assert!(a.steps < 200);
            }
        }
    }

    #[test]
    fn equal_final_positions_give_equal_ensemble_error() {
        let vol = empty_volume(64, &[("A", [30.2, 30.0, 29.6])]);
        let map = AgentLandmarkMap::new(vec!["A"; 5]);
        let r = run_episode(&TowardTargetPolicy, &vol, &map, &env_cfg(), &mut Rng::seed_from_u64(1)).unwrap();
        let first = r.agents[0].final_position;
        assert!(r.agents.iter().all(|a| a.final_position == first));
        assert_eq!(r.ensembles.len(), 1);
        assert!((r.ensembles[0].error_mm - r.agents[0].error_mm).abs() < 1e-12);
        assert_eq!(r.landmark_errors(), vec![("A".to_string(), r.ensembles[0].error_mm)]);
    }

    #[test]
    fn missing_landmark_is_reported() {
        let vol = empty_volume(32, &[("A", [10.0, 10.0, 10.0])]);
        let map = AgentLandmarkMap::new(["A", "Z"]);
        let err = run_episode(&TowardTargetPolicy, &vol, &map, &env_cfg(), &mut Rng::seed_from_u64(1)).unwrap_err();
        assert!(matches!(err, EvalError::UnknownLandmark { ref landmark, .. } if landmark == "Z"));
    }

    #[test]
    fn step_cap_means_max_steps() {
        struct Still;
        impl Policy for Still {
            fn q_values(&self, env: &Environment<'_>) -> Result<Vec<f32>> {
                // Walk +x forever: clamps at the border and then oscillates,
                // so use a tiny cap to hit it first.
                Ok(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0].repeat(env.n_agents()))
            }
        }
        let vol = empty_volume(64, &[("A", [10.0, 10.0, 10.0])]);
        let cfg = EnvConfig {
            max_steps: 3,
            ..env_cfg()
        };
        let r = run_episode(&Still, &vol, &AgentLandmarkMap::new(["A"]), &cfg, &mut Rng::seed_from_u64(1)).unwrap();
        assert_eq!(r.agents[0].cause, TerminationCause::StepCap);
        assert_eq!(r.agents[0].steps, 3);
    }

    #[test]
    fn policy_shape_is_checked() {
        struct Bad;
        impl Policy for Bad {
            fn q_values(&self, _: &Environment<'_>) -> Result<Vec<f32>> {
                Ok(vec![0.0; 5])
            }
        }
        let vol = empty_volume(32, &[("A", [10.0, 10.0, 10.0])]);
        let err = run_episode(&Bad, &vol, &AgentLandmarkMap::new(["A"]), &env_cfg(), &mut Rng::seed_from_u64(1));
        assert_eq!(err.unwrap_err(), EvalError::PolicyShape { expected: 6, got: 5 });
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.0; 6]), 0);
        assert_eq!(argmax(&[0.0, 2.0, 2.0, 1.0]), 1);
    }

    fn report(landmark_errors: &[(&str, f64)]) -> EpisodeReport {
        EpisodeReport {
            volume_id: "v".into(),
            agents: landmark_errors
                .iter()
                .enumerate()
                .map(|(i, (l, e))| AgentReport {
                    agent: i,
                    landmark: l.to_string(),
                    final_position: [0; 3],
                    target: [0.0; 3],
                    error_mm: *e,
                    steps: 1,
                    cause: TerminationCause::Oscillation,
                })
                .collect(),
            ensembles: vec![],
        }
    }

    #[test]
    fn summary_uses_population_std() {
        let reports: Vec<_> = [1.0, 2.0, 3.0].iter().map(|&e| report(&[("A", e)])).collect();
        let s = summarize(&reports).unwrap();
        let r = s.row("A").unwrap();
        assert_eq!(r.n, 3);
        assert!((r.mean_mm - 2.0).abs() < 1e-12);
        assert!((r.std_mm - 0.816496580927726).abs() < 1e-12);
        assert_eq!(r.median_mm, 2.0);
        assert_eq!(r.max_mm, 3.0);
    }

    #[test]
    fn single_report_has_zero_std() {
        let s = summarize(&[report(&[("A", 4.0)])]).unwrap();
        assert_eq!(s.rows[0].std_mm, 0.0);
        assert_eq!(summarize(&[]).unwrap_err(), EvalError::EmptyInput);
    }

    #[test]
    fn landmarks_grouped() {
        let reports: Vec<_> = (0..3).map(|i| report(&[("A", i as f64), ("B", 2.0 * i as f64)])).collect();
        let s = summarize(&reports).unwrap();
        assert_eq!(s.rows.len(), 2);
        assert!(s.rows.iter().all(|r| r.n == 3));
        assert_eq!(s.row("B").unwrap().max_mm, 4.0);
    }

    #[test]
    fn experiment_maps() {
        let base = NetConfig::default();
        let ab = vec!["A".to_string(), "B".to_string()];
        let hybrid = plan_experiment(ExperimentKind::Hybrid, &ab, &base, 5).unwrap();
        assert_eq!(hybrid[0].map.agents, vec!["A", "A", "B", "B"]);
        assert_eq!(hybrid[0].net.n_agents, 4);

        let ens = plan_experiment(ExperimentKind::EnsembleSameLandmark, &ab[..1], &base, 5).unwrap();
        assert_eq!(ens[0].map.agents, vec!["A"; 5]);

        let three = vec!["A".to_string(), "B".to_string(), "C".to_string()];
        let single = plan_experiment(ExperimentKind::SingleAgentBaseline, &three, &base, 5).unwrap();
        assert_eq!(single.len(), 3);
        assert!(single.iter().all(|r| r.net.n_agents == 1 && !r.net.comm_enabled));

        let collab = plan_experiment(ExperimentKind::CollabBaseline, &three, &base, 5).unwrap();
        assert!(!collab[0].net.comm_enabled);
        assert_eq!(collab[0].net.n_agents, 3);
        let multi = plan_experiment(ExperimentKind::MultiLandmark, &three, &base, 5).unwrap();
        assert!(multi[0].net.comm_enabled);

        assert!(plan_experiment(ExperimentKind::Hybrid, &three, &base, 5).is_err());
        for k in ExperimentKind::ALL {
            assert_eq!(ExperimentKind::parse(k.as_str()), Some(k));
        }
    }

    #[test]
    fn csv_layout() {
        let vol = empty_volume(64, &[("A", [30.2, 30.0, 29.6])]);
        let map = AgentLandmarkMap::new(["A", "A"]);
        let r = run_episode(&TowardTargetPolicy, &vol, &map, &env_cfg(), &mut Rng::seed_from_u64(1)).unwrap();
        let csv = results_csv("ens", &[r.clone()]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], RESULTS_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("ens,A,empty,ensemble,"));
        assert!(lines[3].ends_with(",ensemble"));
        let s = summary_csv("ens", &summarize(&[r]).unwrap());
        assert_eq!(s.lines().count(), 2);
        assert!(s.starts_with(SUMMARY_HEADER));
    }

    #[test]
    fn evaluation_is_reproducible() {
        let vols: Vec<Volume3D> = (0..3)
            .map(|i| {
                let mut v = empty_volume(40, &[("A", [20.0, 21.0, 19.0])]);
                v.id = format!("v{i}");
                v
            })
            .collect();
        let map = AgentLandmarkMap::new(["A"]);
        let cfg = EvalConfig { seed: 9, repeats: 2 };
        let a = evaluate(&TowardTargetPolicy, &vols, &map, &env_cfg(), &cfg).unwrap();
        let b = evaluate(&TowardTargetPolicy, &vols, &map, &env_cfg(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        assert_eq!(a[2].volume_id, "v1");
        assert_eq!(mean_agent_error(&a), Some(0.0));
    }

    proptest! {
        #[test]
        fn summarize_is_permutation_invariant(errs in proptest::collection::vec(0.0f64..50.0, 1..12), seed in any::<u64>()) {
            let reports: Vec<_> = errs.iter().map(|&e| report(&[("A", e), ("B", e / 2.0)])).collect();
            let mut shuffled = reports.clone();
            Rng::seed_from_u64(seed).shuffle(&mut shuffled);
            let a = summarize(&reports).unwrap();
            let b = summarize(&shuffled).unwrap();
            for (x, y) in a.rows.iter().zip(&b.rows) {
                prop_assert_eq!(x.n, y.n);
                prop_assert!((x.mean_mm - y.mean_mm).abs() < 1e-9);
                prop_assert!((x.std_mm - y.std_mm).abs() < 1e-9);
                prop_assert_eq!(x.median_mm, y.median_mm);
                prop_assert_eq!(x.max_mm, y.max_mm);
                prop_assert!(x.std_mm >= 0.0);
            }
        }

        #[test]
        fn ensemble_error_bounded_by_worst_member(seed in any::<u64>()) {
            // A policy that stops agents at scattered places: random greedy Q.
            struct Noisy(u64);
            impl Policy for Noisy {
                fn q_values(&self, env: &Environment<'_>) -> Result<Vec<f32>> {
                    let mut rng = Rng::seed_from_u64(mix_seed(&[self.0, env.steps() as u64]));
                    Ok((0..env.n_agents() * 6).map(|_| rng.uniform() as f32).collect())
                }
            }
            let vol = empty_volume(40, &[("A", [20.5, 18.2, 22.7])]);
            let map = AgentLandmarkMap::new(vec!["A"; 5]);
            let r = run_episode(&Noisy(seed), &vol, &map, &env_cfg(), &mut Rng::seed_from_u64(seed)).unwrap();
            let worst = r.agents.iter().map(|a| a.error_mm).fold(0.0, f64::max);
            prop_assert!(r.ensembles[0].error_mm <= worst + 1e-9);
        }
    }
}
