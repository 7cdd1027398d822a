//! Communicative multi-agent deep Q-learning for landmark localization in 3D
//! volumes.

pub mod environment;
pub mod evaluator;
pub mod qnet;
pub mod replay;
pub mod rng;
pub mod trainer;
pub mod volume;

pub use environment::{Action, EnvConfig, EnvError, Environment, Mode, TerminationCause};
pub use evaluator::{AgentLandmarkMap, EpisodeReport, EvalConfig, EvalError, ExperimentKind, MetricsSummary};
pub use qnet::{count_params, NetConfig, NetError, QNet, QNetParams};
pub use replay::{JointTransition, ReplayBuffer, ReplayError};
pub use rng::Rng;
pub use trainer::{TargetMode, TrainConfig, TrainError};
pub use volume::{Volume3D, VolumeError, VolumeMeta};
