//! Shared fixtures for the benchmarks.

use cmarl_core::volume::{generate_synthetic_volume, LandmarkSpec};
use cmarl_core::{EnvConfig, NetConfig, Volume3D};

pub const LANDMARKS: [&str; 3] = ["L1", "L2", "L3"];

/// The small network used for desk-scale training runs.
pub fn desk_net(n_agents: usize) -> NetConfig {
    NetConfig {
        n_agents,
        in_frames: 4,
        roi_size: 9,
        conv_channels: vec![4, 8, 8, 8],
        conv_kernels: vec![1, 3, 3, 3],
        fc_sizes: vec![32, 32, 32],
        ..NetConfig::default()
    }
}

pub fn desk_env() -> EnvConfig {
    EnvConfig {
        roi_size: 9,
        ..EnvConfig::default()
    }
}

pub fn volume(seed: u64) -> Volume3D {
    let spec: Vec<LandmarkSpec> = LANDMARKS.iter().map(|n| LandmarkSpec::new(*n, 3.0)).collect();
    generate_synthetic_volume(seed, [64; 3], &spec).expect("valid synthetic spec")
}
