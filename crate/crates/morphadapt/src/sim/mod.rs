//! Deterministic particle-based environment engine.
//!
//! Executes n-picker pick-and-place macro-actions over rigid boxes and
//! mass-spring cloth with ground/plank collision, plus a tiny orthographic
//! rasterizer for image observations. The engine holds no mutable state:
//! every operation maps a [`ParticleState`] to a new one, so independent
//! simulator instances may run concurrently.

mod chamfer;
mod engine;
mod render;

pub use chamfer::{chamfer_distance, chamfer_distance_brute_force};
pub use render::{CameraSpec, Image32, IMAGE_SIZE};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tasks::{TaskId, TaskVariant};

/// One picker's pick and place positions in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PickPlace {
    pub pick: Vector3<f64>,
    pub place: Vector3<f64>,
}

/// Per-picker (pick-xyz, place-xyz) tuple; 6m-dimensional for m pickers.
#[derive(Debug, Clone, PartialEq)]
pub struct PickPlaceAction {
    pub pairs: Vec<PickPlace>,
}

impl PickPlaceAction {
    pub fn new(pairs: Vec<PickPlace>) -> Self {
        Self { pairs }
    }

    /// Action that grabs and releases in place, leaving the state unchanged
    /// up to settling.
    pub fn no_op(picker_positions: &[Vector3<f64>]) -> Self {
        Self {
            pairs: picker_positions
                .iter()
                .map(|&p| PickPlace { pick: p, place: p })
                .collect(),
        }
    }

    pub fn num_pickers(&self) -> usize {
        self.pairs.len()
    }

    pub fn dim(&self) -> usize {
        6 * self.pairs.len()
    }

    /// Flattens to `[pick0 xyz, place0 xyz, pick1 xyz, ...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for pp in &self.pairs {
            out.extend_from_slice(pp.pick.as_slice());
            out.extend_from_slice(pp.place.as_slice());
        }
        out
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.is_empty() || flat.len() % 6 != 0 {
            return Err(Error::ShapeMismatch(format!(
                "action vector length {} is not a positive multiple of 6",
                flat.len()
            )));
        }
        let pairs = flat
            .chunks_exact(6)
            .map(|c| PickPlace {
                pick: Vector3::new(c[0], c[1], c[2]),
                place: Vector3::new(c[3], c[4], c[5]),
            })
            .collect();
        Ok(Self { pairs })
    }
}

/// Axis-aligned box used for the plank obstacle and collision queries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|k| p[k] > self.min[k] && p[k] < self.max[k])
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::new(
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        )
    }
}

/// Per-dimension action box; pick and place share the same bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl ActionBounds {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|k| p[k] >= self.lo[k] && p[k] <= self.hi[k])
    }

    pub fn clamp(&self, p: Vector3<f64>) -> Vector3<f64> {
        Vector3::new(
            p[0].clamp(self.lo[0], self.hi[0]),
            p[1].clamp(self.lo[1], self.hi[1]),
            p[2].clamp(self.lo[2], self.hi[2]),
        )
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::new(
            0.5 * (self.lo[0] + self.hi[0]),
            0.5 * (self.lo[1] + self.hi[1]),
            0.5 * (self.lo[2] + self.hi[2]),
        )
    }

    pub fn half_extent(&self) -> Vector3<f64> {
        Vector3::new(
            0.5 * (self.hi[0] - self.lo[0]),
            0.5 * (self.hi[1] - self.lo[1]),
            0.5 * (self.hi[2] - self.lo[2]),
        )
    }

    /// Diagonal length of the action box, used as the dynamics output scale.
    pub fn diagonal(&self) -> f64 {
        (0..3)
            .map(|k| (self.hi[k] - self.lo[k]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Checks a flat 6m action vector, reporting the first offending entry.
    pub fn check_flat(&self, flat: &[f64]) -> Result<()> {
        for (i, &v) in flat.iter().enumerate() {
            let k = i % 3;
            if !(v >= self.lo[k] && v <= self.hi[k]) {
                return Err(Error::ActionOutOfBounds {
                    index: i,
                    value: v,
                    lo: self.lo[k],
                    hi: self.hi[k],
                });
            }
        }
        Ok(())
    }

    pub fn clamp_flat(&self, flat: &mut [f64]) {
        for (i, v) in flat.iter_mut().enumerate() {
            let k = i % 3;
            *v = v.clamp(self.lo[k], self.hi[k]);
        }
    }
}

/// Positions of all object particles plus picker positions; the environment
/// state.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    pub particles: Vec<Vector3<f64>>,
    pub picker_positions: Vec<Vector3<f64>>,
    /// Per-picker optional particle index currently held.
    pub attached: Vec<Option<usize>>,
    pub time_step: u32,
}

impl ParticleState {
    pub fn num_particles(&self) -> usize {
        self.particles.len()
    }

    pub fn num_pickers(&self) -> usize {
        self.picker_positions.len()
    }

    /// Particle positions as a flat `[x0, y0, z0, x1, ...]` vector.
    pub fn flat_particles(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.particles.len());
        for p in &self.particles {
            out.extend_from_slice(p.as_slice());
        }
        out
    }
}

/// Simulator configuration. Lengths in meters, gravity in m/s².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Cloth resolution (ignored by rigid-box tasks).
    pub grid_w: usize,
    pub grid_h: usize,
    /// Cloth spring rest length.
    pub rest_length: f64,
    /// Structural constraint projection stiffness in (0, 1].
    pub spring_stiffness: f64,
    /// Shear (diagonal) constraint projection stiffness in (0, 1].
    pub shear_stiffness: f64,
    /// Fraction of velocity removed per substep, in (0, 1).
    pub damping: f64,
    /// Gravity magnitude, downward along -y.
    pub gravity: f64,
    /// Substep duration in seconds.
    pub dt: f64,
    /// Constraint projection iterations per substep.
    pub solver_iterations: usize,
    /// Linear picker sub-moves per macro-action.
    pub substeps_per_macro_action: usize,
    /// Maximum settling substeps after release.
    pub settle_steps: usize,
    /// Settling terminates once the max per-substep displacement drops below
    /// this (meters).
    pub settle_tolerance: f64,
    /// Grasp attachment radius.
    pub pick_radius: f64,
    /// Hard strain limit: spring length ≤ stretch_cap × rest length.
    pub stretch_cap: f64,
    /// Static-friction slip threshold at ground contacts: tangential motion
    /// per substep below this sticks (meters).
    pub contact_slip: f64,
    /// Slip threshold at plank contacts; the drying rack grips harder than
    /// the ground so draped cloth stays put.
    pub plank_slip: f64,
    /// Drying-rack obstacle, if the task has one.
    pub plank: Option<Aabb>,
    /// Ground plane height.
    pub ground_height: f64,
    /// Rigid box half extents (box tasks).
    pub box_half_extents: [f64; 3],
}

impl SimConfig {
    /// Desk-scale defaults per task (the paper-scale cloth resolution is a
    /// config knob on top of these).
    pub fn default_for(task: TaskId) -> Self {
        let base = SimConfig {
            grid_w: 20,
            grid_h: 20,
            rest_length: 0.02,
            spring_stiffness: 1.0,
            shear_stiffness: 0.9,
            damping: 0.2,
            gravity: 9.81,
            dt: 1.0 / 100.0,
            solver_iterations: 8,
            substeps_per_macro_action: 40,
            settle_steps: 400,
            settle_tolerance: 1e-4,
            pick_radius: 0.05,
            stretch_cap: 1.1,
            contact_slip: 0.005,
            plank_slip: 0.02,
            plank: None,
            ground_height: 0.0,
            box_half_extents: [0.05, 0.05, 0.05],
        };
        match task {
            TaskId::ThreeBoxes => SimConfig {
                pick_radius: 0.12,
                substeps_per_macro_action: 20,
                settle_steps: 50,
                ..base
            },
            TaskId::ClothFold => base,
            TaskId::DryCloth => SimConfig {
                plank: Some(Aabb {
                    min: [-0.05, 0.30, -0.5],
                    max: [0.05, 0.35, 0.5],
                }),
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rest_length", self.rest_length),
            ("spring_stiffness", self.spring_stiffness),
            ("shear_stiffness", self.shear_stiffness),
            ("damping", self.damping),
            ("gravity", self.gravity),
            ("dt", self.dt),
            ("settle_tolerance", self.settle_tolerance),
            ("pick_radius", self.pick_radius),
            ("stretch_cap", self.stretch_cap),
            ("contact_slip", self.contact_slip),
            ("plank_slip", self.plank_slip),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        if self.solver_iterations == 0
            || self.substeps_per_macro_action == 0
            || self.settle_steps == 0
        {
            return Err(Error::InvalidConfig(
                "iteration counts must be at least 1".into(),
            ));
        }
        if self.damping >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "damping must be below 1, got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

/// Scene topology: which particles form cloth springs or rigid clusters.
#[derive(Debug, Clone)]
pub(crate) enum Topology {
    Cloth {
        w: usize,
        h: usize,
        /// (i, j, rest_length, structural?) distance constraints.
        constraints: Vec<Constraint>,
    },
    Boxes {
        /// Particle index groups, one per rigid box.
        clusters: Vec<Vec<usize>>,
    },
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Constraint {
    pub a: usize,
    pub b: usize,
    pub rest: f64,
    pub structural: bool,
}

/// A task-bound particle engine. Construction fixes topology and action
/// bounds; all stepping operations are pure functions over states.
#[derive(Debug, Clone)]
pub struct Simulator {
    task: TaskId,
    cfg: SimConfig,
    topo: Topology,
    bounds: ActionBounds,
}

impl Simulator {
    pub fn new(task: TaskId, cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let topo = match task {
            TaskId::ThreeBoxes => Topology::Boxes {
                clusters: (0..3).map(|b| (8 * b..8 * b + 8).collect()).collect(),
            },
            TaskId::ClothFold | TaskId::DryCloth => {
                engine::cloth_topology(cfg.grid_w, cfg.grid_h, cfg.rest_length)
            }
        };
        let bounds = task.action_bounds();
        Ok(Self {
            task,
            cfg,
            topo,
            bounds,
        })
    }

    pub fn with_defaults(task: TaskId) -> Result<Self> {
        Self::new(task, SimConfig::default_for(task))
    }

    pub fn task(&self) -> TaskId {
        self.task
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn bounds(&self) -> &ActionBounds {
        &self.bounds
    }

    pub fn num_particles(&self) -> usize {
        match &self.topo {
            Topology::Cloth { w, h, .. } => w * h,
            Topology::Boxes { clusters } => clusters.iter().map(Vec::len).sum(),
        }
    }

    pub(crate) fn topology(&self) -> &Topology {
        &self.topo
    }

    /// Initial state for a task variant with `num_pickers` end-effectors.
    ///
    /// Cloth starts flat on the ground in the variant's pose and is settled
    /// under gravity; boxes rest at their start positions. Deterministic for
    /// fixed (task, variant, seed); the seed is reserved for stochastic
    /// initialization and unused by the current tasks.
    pub fn reset(
        &self,
        variant: &TaskVariant,
        num_pickers: usize,
        _seed: u64,
    ) -> Result<ParticleState> {
        variant.check_task(self.task)?;
        let particles = engine::initial_particles(self.task, &self.cfg, variant)?;
        let picker_positions = engine::initial_picker_positions(&self.bounds, num_pickers);
        let state = ParticleState {
            particles,
            picker_positions,
            attached: vec![None; num_pickers],
            time_step: 0,
        };
        self.settle(&state, self.cfg.settle_steps)
    }

    /// Executes one pick-and-place macro-action: attach the nearest particle
    /// within `pick_radius` of each pick point (no attachment if none),
    /// transport linearly to the place point in fixed sub-moves, release,
    /// then settle to equilibrium. Boxes move rigidly.
    pub fn step_pick_place(
        &self,
        state: &ParticleState,
        action: &PickPlaceAction,
    ) -> Result<ParticleState> {
        if action.num_pickers() != state.num_pickers() {
            return Err(Error::MorphologyMismatch {
                expected: state.num_pickers(),
                actual: action.num_pickers(),
            });
        }
        self.bounds.check_flat(&action.to_flat())?;
        engine::step_pick_place(self, state, action)
    }

    /// Iterates position-based dynamics until the max particle displacement
    /// per substep falls below the settle tolerance or `max_substeps` is
    /// reached. Particles held by a picker (per `state.attached`) stay
    /// pinned to their picker.
    pub fn settle(&self, state: &ParticleState, max_substeps: usize) -> Result<ParticleState> {
        engine::settle(self, state, max_substeps)
    }

    /// Rasterizes the state to a 32×32 RGB observation.
    pub fn render(
        &self,
        state: &ParticleState,
        variant: &TaskVariant,
        camera: &CameraSpec,
    ) -> Image32 {
        render::render(self, state, variant, camera)
    }
}

#[cfg(test)]
mod tests;
