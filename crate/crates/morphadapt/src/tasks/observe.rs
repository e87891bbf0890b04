//! Observation encodings for the policy learner.
//!
//! State mode concatenates task keypoints with picker positions: box
//! centroids and goals for the rearrangement task, a 5×5 cloth keypoint grid
//! (plus fold-line direction where relevant) for the cloth tasks. Image mode
//! renders the task camera.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sim::{CameraSpec, Image32, ParticleState, Simulator, Topology};

use super::{box_centroids, TaskId, TaskVariant};

pub const KEYPOINT_GRID: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObservationMode {
    State,
    Image,
}

impl ObservationMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "state" => Ok(ObservationMode::State),
            "image" => Ok(ObservationMode::Image),
            other => Err(crate::error::Error::InvalidConfig(format!(
                "unknown observation mode `{other}`"
            ))),
        }
    }
}

/// Flat state-observation length for a task and picker count.
pub fn state_obs_dim(task: TaskId, num_pickers: usize) -> usize {
    let base = match task {
        TaskId::ThreeBoxes => 3 * 3 + 3 * 3,
        TaskId::ClothFold => 3 * KEYPOINT_GRID * KEYPOINT_GRID + 2,
        TaskId::DryCloth => 3 * KEYPOINT_GRID * KEYPOINT_GRID,
    };
    base + 3 * num_pickers
}

fn keypoint_indices(w: usize, h: usize) -> Vec<usize> {
    let pick = |n: usize, k: usize| ((k as f64) * (n as f64 - 1.0) / (KEYPOINT_GRID as f64 - 1.0))
        .round() as usize;
    let mut out = Vec::with_capacity(KEYPOINT_GRID * KEYPOINT_GRID);
    for kj in 0..KEYPOINT_GRID {
        for ki in 0..KEYPOINT_GRID {
            out.push(pick(h, kj) * w + pick(w, ki));
        }
    }
    out
}

/// Task keypoints + picker positions as a flat vector.
pub fn observe_state(
    sim: &Simulator,
    variant: &TaskVariant,
    state: &ParticleState,
) -> Result<Vec<f64>> {
    variant.check_task(sim.task())?;
    let mut obs = Vec::with_capacity(state_obs_dim(sim.task(), state.num_pickers()));
    match (sim.topology(), variant) {
        (Topology::Boxes { .. }, TaskVariant::ThreeBoxes { goals, .. }) => {
            for c in box_centroids(sim, state) {
                obs.extend_from_slice(c.as_slice());
            }
            for g in goals {
                obs.extend_from_slice(g);
            }
        }
        (Topology::Cloth { w, h, .. }, _) => {
            for idx in keypoint_indices(*w, *h) {
                obs.extend_from_slice(state.particles[idx].as_slice());
            }
            if let TaskVariant::ClothFold { fold_line, .. } = variant {
                obs.extend_from_slice(&fold_line.dir);
            }
        }
        _ => unreachable!("check_task verified the pairing"),
    }
    for p in &state.picker_positions {
        obs.extend_from_slice(p.as_slice());
    }
    Ok(obs)
}

/// Renders the task's fixed camera.
pub fn observe_image(
    sim: &Simulator,
    variant: &TaskVariant,
    state: &ParticleState,
) -> Result<Image32> {
    variant.check_task(sim.task())?;
    let cam = CameraSpec::for_task(sim.task());
    Ok(sim.render(state, variant, &cam))
}
