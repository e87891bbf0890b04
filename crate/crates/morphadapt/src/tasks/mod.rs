//! Task definitions: variant sampling, performance metrics, normalized
//! performance and scripted teacher policies.

mod observe;
mod teacher;

pub use observe::{observe_image, observe_state, state_obs_dim, ObservationMode};
pub use teacher::{scripted_policy, teacher_policy};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::sim::{ActionBounds, ParticleState, Simulator, Topology};

/// Cloth center x offset from the plank for the hanging task.
pub const DRY_CLOTH_CENTER_X: f64 = 0.20;

/// Variant sampling ranges. The paper does not state them; these are config
/// defaults chosen so sampled cloths stay inside the action box.
pub const CLOTH_ROTATION_RANGE: f64 = 30.0 * std::f64::consts::PI / 180.0;
pub const DRY_CLOTH_TRANSLATION_RANGE: f64 = 0.06;

/// Particles count as hanging when above this height and within the plank's
/// horizontal hanging region.
const HANG_MIN_HEIGHT: f64 = 0.05;
const HANG_REGION_MARGIN: f64 = 0.05;

/// Rigid-box segment for start/goal sampling, per-task box width and the
/// episode horizon shared by all tasks.
const BOX_SEGMENT: (f64, f64) = (0.0, 1.25);
const BOX_WIDTH: f64 = 0.1;
pub const HORIZON: usize = 3;

/// Minimum normalized performance for a teacher demonstration to be kept.
pub const TEACHER_QUALITY_FLOOR: f64 = 0.5;
const TEACHER_RETRY_CAP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskId {
    ThreeBoxes,
    ClothFold,
    DryCloth,
}

impl TaskId {
    pub const ALL: [TaskId; 3] = [TaskId::ThreeBoxes, TaskId::ClothFold, TaskId::DryCloth];

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "three_boxes" | "threeboxes" => Ok(TaskId::ThreeBoxes),
            "cloth_fold" | "clothfold" => Ok(TaskId::ClothFold),
            "dry_cloth" | "drycloth" => Ok(TaskId::DryCloth),
            other => Err(Error::UnknownTask(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TaskId::ThreeBoxes => "three_boxes",
            TaskId::ClothFold => "cloth_fold",
            TaskId::DryCloth => "dry_cloth",
        }
    }

    /// Action box per task; pick and place coordinates share it.
    pub fn action_bounds(&self) -> ActionBounds {
        match self {
            TaskId::ThreeBoxes => ActionBounds {
                lo: [-0.1, 0.0, -0.25],
                hi: [1.35, 0.7, 0.25],
            },
            TaskId::ClothFold => ActionBounds {
                lo: [-0.9, 0.0, -0.9],
                hi: [0.9, 0.7, 0.9],
            },
            TaskId::DryCloth => ActionBounds {
                lo: [-0.5, 0.0, -0.5],
                hi: [0.5, 0.7, 0.5],
            },
        }
    }

    /// Scripted teacher morphology: three pickers for boxes, two for cloth.
    pub fn teacher_morphology(&self) -> usize {
        match self {
            TaskId::ThreeBoxes => 3,
            TaskId::ClothFold | TaskId::DryCloth => 2,
        }
    }
}

/// Fold line in the ground plane (point + unit direction).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldLine {
    pub point: [f64; 2],
    pub dir: [f64; 2],
}

/// A sampled task instance. Fields irrelevant to a task are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TaskVariant {
    ThreeBoxes {
        starts: Vec<[f64; 3]>,
        goals: Vec<[f64; 3]>,
    },
    ClothFold {
        rotation: f64,
        fold_line: FoldLine,
    },
    DryCloth {
        rotation: f64,
        translation: [f64; 2],
    },
}

impl TaskVariant {
    pub fn task(&self) -> TaskId {
        match self {
            TaskVariant::ThreeBoxes { .. } => TaskId::ThreeBoxes,
            TaskVariant::ClothFold { .. } => TaskId::ClothFold,
            TaskVariant::DryCloth { .. } => TaskId::DryCloth,
        }
    }

    pub fn check_task(&self, task: TaskId) -> Result<()> {
        if self.task() == task {
            Ok(())
        } else {
            Err(Error::VariantMismatch {
                task: task.name().into(),
                detail: format!("variant belongs to {}", self.task().name()),
            })
        }
    }
}

/// Uniform variant sample within the per-task ranges. Box positions use
/// rejection sampling so pairwise spacing stays at or above the box width.
pub fn sample_variant(task: TaskId, rng: &mut Stream) -> TaskVariant {
    match task {
        TaskId::ThreeBoxes => {
            let sample_line = |rng: &mut Stream| -> Vec<[f64; 3]> {
                loop {
                    let xs: Vec<f64> = (0..3)
                        .map(|_| rng::uniform(rng, BOX_SEGMENT.0, BOX_SEGMENT.1))
                        .collect();
                    let spaced = xs
                        .iter()
                        .enumerate()
                        .all(|(i, a)| xs.iter().skip(i + 1).all(|b| (a - b).abs() >= 1.2 * BOX_WIDTH));
                    if spaced {
                        return xs.iter().map(|&x| [x, BOX_WIDTH / 2.0, 0.0]).collect();
                    }
                }
            };
            let starts = sample_line(rng);
            let goals = sample_line(rng);
            TaskVariant::ThreeBoxes { starts, goals }
        }
        TaskId::ClothFold => {
            let rotation = rng::uniform(rng, -CLOTH_ROTATION_RANGE, CLOTH_ROTATION_RANGE);
            TaskVariant::ClothFold {
                rotation,
                fold_line: FoldLine {
                    point: [0.0, 0.0],
                    dir: [-rotation.sin(), rotation.cos()],
                },
            }
        }
        TaskId::DryCloth => TaskVariant::DryCloth {
            rotation: rng::uniform(rng, -CLOTH_ROTATION_RANGE, CLOTH_ROTATION_RANGE),
            translation: [
                rng::uniform(
                    rng,
                    -DRY_CLOTH_TRANSLATION_RANGE,
                    DRY_CLOTH_TRANSLATION_RANGE,
                ),
                rng::uniform(
                    rng,
                    -DRY_CLOTH_TRANSLATION_RANGE,
                    DRY_CLOTH_TRANSLATION_RANGE,
                ),
            ],
        },
    }
}

/// Rigid-cluster centroids, in cluster order.
pub fn box_centroids(sim: &Simulator, state: &ParticleState) -> Vec<Vector3<f64>> {
    match sim.topology() {
        Topology::Boxes { clusters } => clusters
            .iter()
            .map(|c| c.iter().map(|&i| state.particles[i]).sum::<Vector3<f64>>() / c.len() as f64)
            .collect(),
        Topology::Cloth { .. } => Vec::new(),
    }
}

/// Task performance metric. Higher is better; box and fold metrics are
/// non-positive with optimum 0, the hanging metric is a fraction in [0, 1].
pub fn performance(sim: &Simulator, variant: &TaskVariant, state: &ParticleState) -> Result<f64> {
    variant.check_task(sim.task())?;
    match (sim.task(), variant) {
        (crate::tasks::TaskId::ThreeBoxes, TaskVariant::ThreeBoxes { goals, .. }) => {
            let centroids = box_centroids(sim, state);
            if centroids.len() != goals.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} clusters vs {} goals",
                    centroids.len(),
                    goals.len()
                )));
            }
            let total: f64 = centroids
                .iter()
                .zip(goals.iter())
                .map(|(c, g)| {
                    // goal attainment is judged in the ground plane
                    let dx = c.x - g[0];
                    let dz = c.z - g[2];
                    (dx * dx + dz * dz).sqrt()
                })
                .sum();
            Ok(-total)
        }
        (crate::tasks::TaskId::ClothFold, _) => {
            let (w, h) = cloth_dims(sim)?;
            let mut total = 0.0;
            let mut count = 0usize;
            for j in 0..h {
                for i in 0..w / 2 {
                    let a = state.particles[j * w + i];
                    let b = state.particles[j * w + (w - 1 - i)];
                    total += (a - b).norm();
                    count += 1;
                }
            }
            Ok(-total / count as f64)
        }
        (crate::tasks::TaskId::DryCloth, _) => {
            let plank = sim
                .config()
                .plank
                .ok_or_else(|| Error::InvalidConfig("dry_cloth requires a plank".into()))?;
            let cx = 0.5 * (plank.min[0] + plank.max[0]);
            let half_w = 0.5 * (plank.max[0] - plank.min[0]);
            let region = half_w + HANG_REGION_MARGIN;
            let hanging = state
                .particles
                .iter()
                .filter(|p| p.y > HANG_MIN_HEIGHT && (p.x - cx).abs() <= region)
                .count();
            Ok(hanging as f64 / state.particles.len() as f64)
        }
        _ => unreachable!("check_task verified the pairing"),
    }
}

fn cloth_dims(sim: &Simulator) -> Result<(usize, usize)> {
    match sim.topology() {
        Topology::Cloth { w, h, .. } => Ok((*w, *h)),
        Topology::Boxes { .. } => Err(Error::ShapeMismatch(
            "cloth metric requested for a rigid-box task".into(),
        )),
    }
}

/// Best performance achievable by the task: 0 for the distance-based metrics,
/// the hanging fraction of an analytically draped cloth for the hanging task.
pub fn p_opt(sim: &Simulator, variant: &TaskVariant) -> Result<f64> {
    match sim.task() {
        TaskId::ThreeBoxes | TaskId::ClothFold => Ok(0.0),
        TaskId::DryCloth => {
            let drape = ideal_draped_state(sim)?;
            performance(sim, variant, &drape)
        }
    }
}

/// Analytic drape: the cloth bent into a ⊓ over the plank cross-section,
/// centered so both halves hang evenly.
pub fn ideal_draped_state(sim: &Simulator) -> Result<ParticleState> {
    let cfg = sim.config();
    let plank = cfg
        .plank
        .ok_or_else(|| Error::InvalidConfig("dry_cloth requires a plank".into()))?;
    let (w, h) = cloth_dims(sim)?;
    let rest = cfg.rest_length;
    let top = plank.max[1];
    let half_w = 0.5 * (plank.max[0] - plank.min[0]);
    let cx = 0.5 * (plank.min[0] + plank.max[0]);
    let cz = 0.5 * (plank.min[2] + plank.max[2]);
    let total_len = (w as f64 - 1.0) * rest;
    let side_len = 0.5 * (total_len - 2.0 * half_w).max(0.0);
    let mut particles = Vec::with_capacity(w * h);
    for j in 0..h {
        let z = cz + (j as f64 - (h as f64 - 1.0) / 2.0) * rest;
        for i in 0..w {
            let s = i as f64 * rest;
            let (x, y) = if s < side_len {
                (cx - half_w, top - (side_len - s))
            } else if s < side_len + 2.0 * half_w {
                (cx - half_w + (s - side_len), top)
            } else {
                (cx + half_w, top - (s - side_len - 2.0 * half_w))
            };
            particles.push(Vector3::new(x, y, z));
        }
    }
    Ok(ParticleState {
        particles,
        picker_positions: Vec::new(),
        attached: Vec::new(),
        time_step: 0,
    })
}

/// Normalized performance `(p(s_t) − p(s_0)) / (p_opt − p(s_0))`: 0 at the
/// start, 1 at the task optimum, negative if the state regressed.
pub fn normalized_performance(
    sim: &Simulator,
    variant: &TaskVariant,
    state: &ParticleState,
    initial: &ParticleState,
) -> Result<f64> {
    let p_t = performance(sim, variant, state)?;
    let p_0 = performance(sim, variant, initial)?;
    let opt = p_opt(sim, variant)?;
    let denom = opt - p_0;
    if denom <= 1e-12 {
        return Err(Error::DegenerateVariant);
    }
    Ok((p_t - p_0) / denom)
}

/// A state-only demonstration: no actions are recorded.
#[derive(Debug, Clone)]
pub struct TeacherDemo {
    pub variant: TaskVariant,
    /// H+1 states, one per macro step boundary.
    pub states: Vec<ParticleState>,
    /// Picker count the demonstrating agent used.
    pub morphology: usize,
}

/// Rolls a scripted policy for the full horizon, returning the H+1 states.
pub fn rollout_scripted(
    sim: &Simulator,
    variant: &TaskVariant,
    initial: &ParticleState,
) -> Result<Vec<ParticleState>> {
    let mut states = vec![initial.clone()];
    for t in 0..HORIZON {
        let action = scripted_policy(sim, variant, states.last().unwrap(), t)?;
        let next = sim.step_pick_place(states.last().unwrap(), &action)?;
        states.push(next);
    }
    Ok(states)
}

/// Records `k_t` teacher demonstrations over freshly sampled variants. Demos
/// below the quality floor are discarded and resampled up to a retry cap.
pub fn record_teacher_dataset(
    sim: &Simulator,
    k_t: usize,
    seed: u64,
) -> Result<Vec<TeacherDemo>> {
    let morphology = sim.task().teacher_morphology();
    let mut demos = Vec::with_capacity(k_t);
    for k in 0..k_t {
        let mut accepted = None;
        for attempt in 0..TEACHER_RETRY_CAP {
            let mut stream = rng::derive(seed, &[k as u64, attempt as u64]);
            let variant = sample_variant(sim.task(), &mut stream);
            let s0 = sim.reset(&variant, morphology, seed)?;
            let states = rollout_scripted(sim, &variant, &s0)?;
            let score = normalized_performance(sim, &variant, states.last().unwrap(), &s0)?;
            if score >= TEACHER_QUALITY_FLOOR {
                accepted = Some(TeacherDemo {
                    variant,
                    states,
                    morphology,
                });
                break;
            }
        }
        demos.push(accepted.ok_or(Error::TeacherRetriesExhausted(TEACHER_RETRY_CAP))?);
    }
    Ok(demos)
}
