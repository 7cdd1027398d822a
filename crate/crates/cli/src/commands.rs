use std::io::Write;
use std::path::{Path, PathBuf};

use cmarl_core::evaluator::{evaluate, results_csv, summarize, summary_csv, NetPolicy, PlannedRun};
use cmarl_core::trainer::{log_csv, train, TrainData};
use cmarl_core::{AgentLandmarkMap, ExperimentKind, MetricsSummary, QNet, Volume3D};

use crate::checkpoint::{Checkpoint, CheckpointMeta};
use crate::config::RunConfig;
use crate::{dataset, CliError, Result};

pub const CHECKPOINT_FILE: &str = "best.ckpt";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| CliError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Console output is best effort; a closed stdout must not fail a run.
macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        let _ = writeln!($out, $($arg)*);
    };
}

/// Switch experiment kind, taking the network's agent count from the new
/// plan so the rest of the config still validates.
fn with_experiment(cfg: &RunConfig, kind: Option<ExperimentKind>) -> Result<RunConfig> {
    let mut cfg = cfg.clone();
    if let Some(kind) = kind {
        if kind != cfg.experiment.kind {
            cfg.experiment.kind = kind;
            if let Some(first) = cfg.planned_runs()?.first() {
                cfg.net.n_agents = first.map.n_agents();
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Where a planned run's artifacts go: `out` itself for single-network
/// experiments, `out/<label>` otherwise.
pub fn run_dir(out: &Path, runs: &[PlannedRun], run: &PlannedRun) -> PathBuf {
    if runs.len() == 1 {
        out.to_path_buf()
    } else {
        out.join(&run.label)
    }
}

fn check_landmarks<'a>(map: &AgentLandmarkMap, volumes: impl IntoIterator<Item = &'a Volume3D>) -> Result<()> {
    for v in volumes {
        for l in map.landmarks() {
            if v.landmark(&l).is_none() {
                return Err(CliError::ConfigMismatch(format!(
                    "landmark {l} is not annotated in volume {}",
                    v.id
                )));
            }
        }
    }
    Ok(())
}

pub fn cmd_generate(cfg: &RunConfig, out: Option<&Path>, seed: Option<u64>, log: &mut dyn Write) -> Result<Vec<PathBuf>> {
    let mut cfg = cfg.clone();
    if let Some(dir) = out {
        cfg.dataset.dir = dir.to_path_buf();
    }
    if let (Some(seed), Some(syn)) = (seed, cfg.dataset.synthetic.as_mut()) {
        syn.seed = seed;
    }
    let files = dataset::generate(&cfg)?;
    say!(log, "wrote {} files to {}", files.len(), cfg.dataset.dir.display());
    Ok(files)
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub experiment: Option<ExperimentKind>,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub label: String,
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub best_val_error: Option<f64>,
    pub env_steps: u64,
    pub updates: u64,
}

/// Train every network of the configured experiment.
pub fn cmd_train(cfg: &RunConfig, opts: &TrainOptions, log: &mut dyn Write) -> Result<Vec<TrainReport>> {
    let mut cfg = with_experiment(cfg, opts.experiment)?;
    if let Some(seed) = opts.seed {
        cfg.train.seed = seed;
    }
    if let Some(out) = &opts.out {
        cfg.out_dir = out.clone();
    }
    cfg.require_dataset()?;
    let data = dataset::load(&cfg)?;
    let runs = cfg.planned_runs()?;
    let mut reports = Vec::with_capacity(runs.len());
    for run in &runs {
        check_landmarks(&run.map, data.train.iter().chain(&data.validation))?;
        let dir = run_dir(&cfg.out_dir, &runs, run);
        say!(
            log,
            "[{}] {} agents ({}), comm {}, {} train / {} validation volumes",
            run.label,
            run.map.n_agents(),
            run.map.agents.join(","),
            if run.net.comm_enabled { "on" } else { "off" },
            data.train.len(),
            data.validation.len()
        );
        let net = QNet::new(run.net.clone()).map_err(cmarl_core::TrainError::from)?;
        let train_data = TrainData {
            train: &data.train,
            validation: &data.validation,
            map: &run.map,
        };
        let outcome = train(net, &cfg.env, &cfg.train, &cfg.eval, &train_data, |r| {
            if let Some(v) = r.val_error_mm {
                say!(log, "[{}] episode {} step {} eps {:.3} val {:.3} mm", run.label, r.episode, r.step, r.epsilon, v);
            }
        })?;
        let checkpoint = dir.join(CHECKPOINT_FILE);
        let meta = CheckpointMeta {
            label: run.label.clone(),
            training_step: outcome.env_steps,
            best_val_error: outcome.best_val_error,
            map: run.map.clone(),
            net: run.net.clone(),
            run: cfg.clone(),
        };
        write_file(&checkpoint, Checkpoint::new(meta, outcome.best_params).encode())?;
        let log_path = dir.join(TRAIN_LOG_FILE);
        write_file(&log_path, log_csv(&outcome.log))?;
        let best = outcome.best_val_error.map_or("n/a".to_string(), |e| format!("{e:.3} mm"));
        say!(
            log,
            "[{}] done: {} env steps, {} updates, {} episodes, best validation {}; wrote {}",
            run.label,
            outcome.env_steps,
            outcome.updates,
            outcome.log.len(),
            best,
            checkpoint.display()
        );
        reports.push(TrainReport {
            label: run.label.clone(),
            checkpoint,
            log: log_path,
            best_val_error: outcome.best_val_error,
            env_steps: outcome.env_steps,
            updates: outcome.updates,
        });
    }
    Ok(reports)
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Checkpoints to evaluate together; when empty, the experiment's
    /// planned runs are looked up under the output directory of `config`.
    pub checkpoints: Vec<PathBuf>,
    /// Dataset, environment and evaluation settings; defaults to the run
    /// config embedded in the first checkpoint.
    pub config: Option<RunConfig>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub experiment: Option<ExperimentKind>,
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub experiment: String,
    pub results: PathBuf,
    pub summary_path: PathBuf,
    pub summary: MetricsSummary,
}

/// Greedy evaluation on the test split; writes `results_<kind>.csv` and
/// `summary_<kind>.csv`.
pub fn cmd_eval(opts: &EvalOptions, log: &mut dyn Write) -> Result<EvalOutcome> {
    let (checkpoints, base) = if opts.checkpoints.is_empty() {
        let cfg = opts
            .config
            .as_ref()
            .ok_or_else(|| CliError::Usage("eval needs --checkpoint or --config".into()))?;
        let cfg = with_experiment(cfg, opts.experiment)?;
        let runs = cfg.planned_runs()?;
        let cks = runs
            .iter()
            .map(|r| Checkpoint::load(run_dir(&cfg.out_dir, &runs, r).join(CHECKPOINT_FILE)))
            .collect::<Result<Vec<_>, _>>()?;
        (cks, cfg)
    } else {
        let cks = opts
            .checkpoints
            .iter()
            .map(Checkpoint::load)
            .collect::<Result<Vec<_>, _>>()?;
        let base = match &opts.config {
            Some(c) => c.clone(),
            None => cks[0].meta.run.clone(),
        };
        (cks, base)
    };
    let mut cfg = base;
    if let Some(seed) = opts.seed {
        cfg.eval.seed = seed;
    }
    let kind = opts.experiment.unwrap_or(cfg.experiment.kind);
    for ck in &checkpoints {
        let net = &ck.meta.net;
        if net.in_frames != cfg.env.history_len || net.roi_size != cfg.env.roi_size {
            return Err(CliError::ConfigMismatch(format!(
                "checkpoint {} expects roi {} with {} frames, environment has roi {} with {}",
                ck.meta.label, net.roi_size, net.in_frames, cfg.env.roi_size, cfg.env.history_len
            )));
        }
    }
    cfg.require_dataset()?;
    let data = dataset::load(&cfg)?;
    let mut reports = Vec::new();
    for ck in &checkpoints {
        check_landmarks(&ck.meta.map, &data.test)?;
        let net = QNet::new(ck.meta.net.clone()).map_err(cmarl_core::EvalError::from)?;
        let policy = NetPolicy {
            net: &net,
            params: &ck.params.values,
        };
        reports.extend(evaluate(&policy, &data.test, &ck.meta.map, &cfg.env, &cfg.eval)?);
    }
    let experiment = kind.as_str().to_string();
    let summary = summarize(&reports)?;
    let out = opts.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    let results = out.join(format!("results_{experiment}.csv"));
    let summary_path = out.join(format!("summary_{experiment}.csv"));
    write_file(&results, results_csv(&experiment, &reports))?;
    write_file(&summary_path, summary_csv(&experiment, &summary))?;
    for row in &summary.rows {
        say!(
            log,
            "{:<12} n={:<4} mean {:.3} mm  std {:.3}  median {:.3}  max {:.3}",
            row.landmark,
            row.n,
            row.mean_mm,
            row.std_mm,
            row.median_mm,
            row.max_mm
        );
    }
    say!(log, "wrote {} and {}", results.display(), summary_path.display());
    Ok(EvalOutcome {
        experiment,
        results,
        summary_path,
        summary,
    })
}

/// Load, verify and describe a checkpoint.
pub fn cmd_inspect(path: &Path) -> Result<String> {
    Ok(Checkpoint::load(path)?.report())
}
