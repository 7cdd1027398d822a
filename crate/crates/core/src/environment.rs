//! The landmark-search environment.
//!
//! Agents sit on integer voxel positions and see a cube of samples (the ROI)
//! around themselves, strided by the current search scale. Each step they
//! move one scale-length along one axis and are rewarded by how much closer
//! they got to their landmark. When an agent starts revisiting the same
//! position the scale shrinks; oscillating at the finest scale ends its
//! search. Volumes are expected to be 1 mm isotropic, so a scale of `s` mm is
//! a stride of `s` voxels.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::Rng;
use crate::volume::Volume3D;

pub type Position = [i64; 3];

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("unknown landmark {0:?}")]
    UnknownLandmark(String),
    #[error("volume dims {dims:?} too small for a {step} voxel step")]
    VolumeTooSmall { dims: [usize; 3], step: u32 },
    #[error("every agent is already terminal")]
    AllAgentsTerminal,
    #[error("expected {expected} actions, got {got}")]
    ActionCount { expected: usize, got: usize },
    #[error("at least one agent is required")]
    NoAgents,
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Side of the ROI cube in samples; odd so a center sample exists.
    pub roi_size: usize,
    pub history_len: usize,
    /// Search scales in mm, coarsest first.
    pub scales_mm: Vec<u32>,
    pub max_steps: usize,
    pub start_inner_fraction: f64,
    pub osc_window: usize,
    pub osc_repeat: usize,
    pub found_radius_mm: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            roi_size: 45,
            history_len: 4,
            scales_mm: vec![3, 2, 1],
            max_steps: 200,
            start_inner_fraction: 0.8,
            osc_window: 20,
            osc_repeat: 4,
            found_radius_mm: 1.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::InvalidConfig(m.to_string()));
        if self.roi_size == 0 || self.roi_size % 2 == 0 {
            return bad("roi_size must be odd and positive");
        }
        if self.history_len == 0 {
            return bad("history_len must be positive");
        }
        if self.scales_mm.is_empty()
            || self.scales_mm.windows(2).any(|w| w[0] <= w[1])
            || *self.scales_mm.last().unwrap() < 1
        {
            return bad("scales_mm must be strictly descending and end at >= 1");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        if !(self.start_inner_fraction > 0.0 && self.start_inner_fraction <= 1.0) {
            return bad("start_inner_fraction must lie in (0, 1]");
        }
        if self.osc_window == 0 || self.osc_repeat == 0 || self.osc_repeat > self.osc_window {
            return bad("need 0 < osc_repeat <= osc_window");
        }
        if !(self.found_radius_mm > 0.0) {
            return bad("found_radius_mm must be positive");
        }
        Ok(())
    }

    pub fn roi_voxels(&self) -> usize {
        self.roi_size.pow(3)
    }

    /// Length of one agent's observation: `history_len` stacked ROIs.
    pub fn observation_len(&self) -> usize {
        self.history_len * self.roi_voxels()
    }
}

/// Six axis-aligned moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    PlusX,
    MinusX,
    PlusY,
    MinusY,
    PlusZ,
    MinusZ,
}

impl Action {
    pub const COUNT: usize = 6;
    pub const ALL: [Action; 6] = [
        Action::PlusX,
        Action::MinusX,
        Action::PlusY,
        Action::MinusY,
        Action::PlusZ,
        Action::MinusZ,
    ];

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    fn delta(self) -> (usize, i64) {
        match self {
            Action::PlusX => (0, 1),
            Action::MinusX => (0, -1),
            Action::PlusY => (1, 1),
            Action::MinusY => (1, -1),
            Action::PlusZ => (2, 1),
            Action::MinusZ => (2, -1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationCause {
    Oscillation,
    Found,
    StepCap,
}

impl TerminationCause {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationCause::Oscillation => "oscillation",
            TerminationCause::Found => "found",
            TerminationCause::StepCap => "step_cap",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AgentState {
    pub position: Position,
    pub scale_index: usize,
    /// Most recent ROI last.
    pub history: VecDeque<Vec<f32>>,
    /// Positions visited at the current scale, most recent last.
    pub trace: VecDeque<Position>,
    pub terminal: bool,
    pub target: String,
    pub steps: usize,
    pub cause: Option<TerminationCause>,
    /// Reported location once terminal.
    pub final_position: Option<Position>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub terminal: bool,
    pub scale_changed: bool,
}

/// Inclusive per-axis range of start coordinates: the central `fraction` of
/// the grid, `[ceil(m (d-1)), floor((1-m) (d-1))]` with `m = (1 - fraction) / 2`.
pub fn start_box(dims: [usize; 3], fraction: f64) -> [(i64, i64); 3] {
    let m = (1.0 - fraction) / 2.0;
    dims.map(|d| {
        let e = (d - 1) as f64;
        let lo = (m * e - 1e-9).ceil() as i64;
        let hi = ((1.0 - m) * e + 1e-9).floor() as i64;
        (lo.min(hi), hi)
    })
}

/// Sample `roi_size³` values around `center` at a stride of `scale` voxels;
/// samples outside the volume are zero. Output is x-fastest.
pub fn extract_roi(volume: &Volume3D, center: Position, scale: u32, roi_size: usize, out: &mut [f32]) {
    debug_assert_eq!(out.len(), roi_size.pow(3));
    let half = (roi_size as i64 - 1) / 2;
    let s = scale as i64;
    let [dx, dy, dz] = volume.dims().map(|d| d as i64);
    let coords = |axis_center: i64| -> Vec<i64> { (-half..=half).map(|o| axis_center + o * s).collect() };
    let xs = coords(center[0]);
    let ys = coords(center[1]);
    let zs = coords(center[2]);
    let mut i = 0;
    for &z in &zs {
        for &y in &ys {
            if z < 0 || z >= dz || y < 0 || y >= dy {
                out[i..i + roi_size].fill(0.0);
                i += roi_size;
                continue;
            }
            let row = volume.index(0, y as usize, z as usize);
            for &x in &xs {
                out[i] = if x >= 0 && x < dx { volume.voxels[row + x as usize] } else { 0.0 };
                i += 1;
            }
        }
    }
}

/// Move `scale` voxels along the action's axis, clamped to the grid.
pub fn apply_action(position: Position, action: Action, scale: u32, dims: [usize; 3]) -> Position {
    let (axis, sign) = action.delta();
    let mut p = position;
    p[axis] = (p[axis] + sign * scale as i64).clamp(0, dims[axis] as i64 - 1);
    p
}

/// Distance decrease, clipped to `[-1, 1]`.
pub fn reward(d_prev: f64, d_curr: f64) -> f64 {
    (d_prev - d_curr).clamp(-1.0, 1.0)
}

/// True when the newest trace entry occurs at least `osc_repeat` times among
/// the last `osc_window` entries.
pub fn detect_oscillation(trace: &VecDeque<Position>, cfg: &EnvConfig) -> bool {
    let Some(current) = trace.back() else {
        return false;
    };
    if trace.len() < cfg.osc_repeat {
        return false;
    }
    trace.iter().rev().take(cfg.osc_window).filter(|p| *p == current).count() >= cfg.osc_repeat
}

/// Most visited trace position, ties going to the most recent.
pub fn most_visited(trace: &VecDeque<Position>) -> Option<Position> {
    let mut best: Option<(Position, usize)> = None;
    for p in trace.iter().rev() {
        let count = trace.iter().filter(|q| *q == p).count();
        if best.map_or(true, |(_, c)| count > c) {
            best = Some((*p, count));
        }
    }
    best.map(|(p, _)| p)
}

/// Euclidean distance in mm between a voxel position and a real-valued
/// voxel coordinate.
pub fn distance_mm(volume: &Volume3D, p: Position, target: [f64; 3]) -> f64 {
    let s = volume.spacing();
    (0..3)
        .map(|a| ((p[a] as f64 - target[a]) * s[a]).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// One episode over a shared, read-only volume.
#[derive(Debug, Clone)]
pub struct Environment<'v> {
    volume: &'v Volume3D,
    cfg: EnvConfig,
    mode: Mode,
    agents: Vec<AgentState>,
    targets: Vec<[f64; 3]>,
    steps: usize,
}

impl<'v> Environment<'v> {
    /// Place one agent per entry of `targets` uniformly inside the start box,
    /// at the coarsest scale, with the first ROI replicated through the
    /// history.
    pub fn reset(
        volume: &'v Volume3D,
        targets: &[String],
        cfg: &EnvConfig,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<Self, EnvError> {
        cfg.validate()?;
        if targets.is_empty() {
            return Err(EnvError::NoAgents);
        }
        let coarsest = cfg.scales_mm[0];
        if volume.dims().iter().any(|&d| d <= coarsest as usize) {
            return Err(EnvError::VolumeTooSmall {
                dims: volume.dims(),
                step: coarsest,
            });
        }
        let target_pos = targets
            .iter()
            .map(|t| volume.landmark(t).ok_or_else(|| EnvError::UnknownLandmark(t.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let bounds = start_box(volume.dims(), cfg.start_inner_fraction);
        let agents = targets
            .iter()
            .map(|t| {
                let position: Position = std::array::from_fn(|a| rng.range_inclusive(bounds[a].0, bounds[a].1));
                let mut roi = vec![0f32; cfg.roi_voxels()];
                extract_roi(volume, position, coarsest, cfg.roi_size, &mut roi);
                AgentState {
                    position,
                    scale_index: 0,
                    history: std::iter::repeat(roi).take(cfg.history_len).collect(),
                    trace: VecDeque::from([position]),
                    terminal: false,
                    target: t.clone(),
                    steps: 0,
                    cause: None,
                    final_position: None,
                }
            })
            .collect();
        Ok(Self {
            volume,
            cfg: cfg.clone(),
            mode,
            agents,
            targets: target_pos,
            steps: 0,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn volume(&self) -> &Volume3D {
        self.volume
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.agents.iter().all(|a| a.terminal)
    }

    pub fn target_position(&self, agent: usize) -> [f64; 3] {
        self.targets[agent]
    }

    pub fn distance_to_target(&self, agent: usize) -> f64 {
        distance_mm(self.volume, self.agents[agent].position, self.targets[agent])
    }

    pub fn current_scale(&self, agent: usize) -> u32 {
        self.cfg.scales_mm[self.agents[agent].scale_index]
    }

    /// Joint observation, agent-major: `[agent][frame, oldest first][roi³]`.
    pub fn observation(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.agents.len() * self.cfg.observation_len());
        for a in &self.agents {
            for frame in &a.history {
                out.extend_from_slice(frame);
            }
        }
        out
    }

    /// Advance every non-terminal agent by its action. Terminal agents are
    /// frozen and report a zero reward.
    pub fn step(&mut self, actions: &[Action]) -> Result<Vec<StepOutcome>, EnvError> {
        if actions.len() != self.agents.len() {
            return Err(EnvError::ActionCount {
                expected: self.agents.len(),
                got: actions.len(),
            });
        }
        if self.is_done() {
            return Err(EnvError::AllAgentsTerminal);
        }
        self.steps += 1;
        let finest = self.cfg.scales_mm.len() - 1;
        let dims = self.volume.dims();
        let mut outcomes = Vec::with_capacity(self.agents.len());
        for (i, agent) in self.agents.iter_mut().enumerate() {
            if agent.terminal {
                outcomes.push(StepOutcome {
                    reward: 0.0,
                    terminal: true,
                    scale_changed: false,
                });
                continue;
            }
            let target = self.targets[i];
            let scale = self.cfg.scales_mm[agent.scale_index];
            let d_prev = distance_mm(self.volume, agent.position, target);
            agent.position = apply_action(agent.position, actions[i], scale, dims);
            agent.steps += 1;
            let d_curr = distance_mm(self.volume, agent.position, target);
            let r = reward(d_prev, d_curr);

            let mut roi = agent.history.pop_front().unwrap_or_default();
            roi.resize(self.cfg.roi_voxels(), 0.0);
            extract_roi(self.volume, agent.position, scale, self.cfg.roi_size, &mut roi);
            agent.history.push_back(roi);
            agent.trace.push_back(agent.position);
            while agent.trace.len() > self.cfg.osc_window {
                agent.trace.pop_front();
            }

            let mut scale_changed = false;
            if self.mode == Mode::Train && agent.scale_index == finest && d_curr <= self.cfg.found_radius_mm {
                agent.terminal = true;
                agent.cause = Some(TerminationCause::Found);
                agent.final_position = Some(agent.position);
            } else if detect_oscillation(&agent.trace, &self.cfg) {
                if agent.scale_index < finest {
                    agent.scale_index += 1;
                    agent.trace.clear();
                    agent.trace.push_back(agent.position);
                    scale_changed = true;
                } else {
                    agent.terminal = true;
                    agent.cause = Some(TerminationCause::Oscillation);
                    agent.final_position = most_visited(&agent.trace);
                }
            }
            outcomes.push(StepOutcome {
                reward: r,
                terminal: agent.terminal,
                scale_changed,
            });
        }
        if self.steps >= self.cfg.max_steps {
            for (agent, out) in self.agents.iter_mut().zip(outcomes.iter_mut()) {
                if !agent.terminal {
                    agent.terminal = true;
                    agent.cause = Some(TerminationCause::StepCap);
                    agent.final_position = Some(agent.position);
                    out.terminal = true;
                }
            }
        }
        Ok(outcomes)
    }
}
