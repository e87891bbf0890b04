//! Tiny orthographic rasterizer producing 32×32 RGB observations.
//!
//! Each particle splats to the nearest pixel with a task-assigned color;
//! plank, ground and goal markers are drawn as static background. Rendering
//! is deterministic and clips particles outside the camera frustum.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::tasks::{TaskId, TaskVariant};

use super::{ParticleState, Simulator, Topology};

pub const IMAGE_SIZE: usize = 32;

const GROUND_COLOR: [f32; 3] = [0.15, 0.15, 0.17];
const PLANK_COLOR: [f32; 3] = [0.45, 0.30, 0.12];
const PICKER_COLOR: [f32; 3] = [1.0, 1.0, 1.0];
const CLOTH_A: [f32; 3] = [0.95, 0.55, 0.10]; // orange half
const CLOTH_B: [f32; 3] = [0.95, 0.45, 0.70]; // pink half
const BOX_COLORS: [[f32; 3]; 3] = [[0.9, 0.2, 0.2], [0.2, 0.8, 0.2], [0.25, 0.4, 0.95]];

/// 32×32×3 color intensities in [0, 1], row-major (row, col, channel).
#[derive(Debug, Clone, PartialEq)]
pub struct Image32 {
    data: Vec<f32>,
}

impl Image32 {
    pub fn filled(color: [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(IMAGE_SIZE * IMAGE_SIZE * 3);
        for _ in 0..IMAGE_SIZE * IMAGE_SIZE {
            data.extend_from_slice(&color);
        }
        Image32 { data }
    }

    pub fn set(&mut self, row: usize, col: usize, color: [f32; 3]) {
        let base = (row * IMAGE_SIZE + col) * 3;
        for c in 0..3 {
            self.data[base + c] = color[c].clamp(0.0, 1.0);
        }
    }

    pub fn get(&self, row: usize, col: usize) -> [f32; 3] {
        let base = (row * IMAGE_SIZE + col) * 3;
        [self.data[base], self.data[base + 1], self.data[base + 2]]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

/// Fixed orthographic camera: world positions project onto the (u, v) axes
/// and map onto the square window `center ± half_extent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub axis_u: [f64; 3],
    pub axis_v: [f64; 3],
    pub center_u: f64,
    pub center_v: f64,
    pub half_extent: f64,
}

impl CameraSpec {
    /// The task's fixed camera: top-down for table-plane tasks, side-on for
    /// the hanging task.
    pub fn for_task(task: TaskId) -> Self {
        match task {
            TaskId::ThreeBoxes => CameraSpec {
                axis_u: [1.0, 0.0, 0.0],
                axis_v: [0.0, 0.0, 1.0],
                center_u: 0.625,
                center_v: 0.0,
                half_extent: 0.75,
            },
            TaskId::ClothFold => CameraSpec {
                axis_u: [1.0, 0.0, 0.0],
                axis_v: [0.0, 0.0, 1.0],
                center_u: 0.0,
                center_v: 0.0,
                half_extent: 0.55,
            },
            TaskId::DryCloth => CameraSpec {
                axis_u: [1.0, 0.0, 0.0],
                axis_v: [0.0, 1.0, 0.0],
                center_u: 0.0,
                center_v: 0.35,
                half_extent: 0.55,
            },
        }
    }

    /// Nearest pixel (row, col), or None when outside the window.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(usize, usize)> {
        let u = p.x * self.axis_u[0] + p.y * self.axis_u[1] + p.z * self.axis_u[2];
        let v = p.x * self.axis_v[0] + p.y * self.axis_v[1] + p.z * self.axis_v[2];
        let fu = (u - (self.center_u - self.half_extent)) / (2.0 * self.half_extent);
        let fv = (v - (self.center_v - self.half_extent)) / (2.0 * self.half_extent);
        let col = (fu * IMAGE_SIZE as f64).floor();
        let row = ((1.0 - fv) * IMAGE_SIZE as f64).floor();
        if col < 0.0 || col >= IMAGE_SIZE as f64 || row < 0.0 || row >= IMAGE_SIZE as f64 {
            None
        } else {
            Some((row as usize, col as usize))
        }
    }
}

fn splat(img: &mut Image32, cam: &CameraSpec, p: &Vector3<f64>, color: [f32; 3]) {
    if let Some((row, col)) = cam.project(p) {
        img.set(row, col, color);
    }
}

pub(crate) fn render(
    sim: &Simulator,
    state: &ParticleState,
    variant: &TaskVariant,
    cam: &CameraSpec,
) -> Image32 {
    let mut img = Image32::filled(GROUND_COLOR);

    // goal markers for the rearrangement task
    if let TaskVariant::ThreeBoxes { goals, .. } = variant {
        for (b, g) in goals.iter().enumerate() {
            let color = BOX_COLORS[b % BOX_COLORS.len()];
            let dim = [color[0] * 0.35, color[1] * 0.35, color[2] * 0.35];
            splat(&mut img, cam, &Vector3::new(g[0], g[1], g[2]), dim);
        }
    }

    if let Some(plank) = &sim.config().plank {
        // rasterize the plank footprint in camera space
        let steps = IMAGE_SIZE * 2;
        for a in 0..=steps {
            for b in 0..=steps {
                let fa = a as f64 / steps as f64;
                let fb = b as f64 / steps as f64;
                let p = Vector3::new(
                    plank.min[0] + fa * (plank.max[0] - plank.min[0]),
                    plank.max[1],
                    plank.min[2] + fb * (plank.max[2] - plank.min[2]),
                );
                splat(&mut img, cam, &p, PLANK_COLOR);
                let side = Vector3::new(
                    plank.min[0] + fa * (plank.max[0] - plank.min[0]),
                    plank.min[1] + fb * (plank.max[1] - plank.min[1]),
                    0.0,
                );
                splat(&mut img, cam, &side, PLANK_COLOR);
            }
        }
    }

    match sim.topology() {
        Topology::Cloth { w, .. } => {
            for (i, p) in state.particles.iter().enumerate() {
                let col_index = i % w;
                let color = if col_index < w / 2 { CLOTH_A } else { CLOTH_B };
                splat(&mut img, cam, p, color);
            }
        }
        Topology::Boxes { clusters } => {
            for (b, cluster) in clusters.iter().enumerate() {
                let color = BOX_COLORS[b % BOX_COLORS.len()];
                for &i in cluster {
                    if let Some(p) = state.particles.get(i) {
                        splat(&mut img, cam, p, color);
                    }
                }
            }
        }
    }

    for p in &state.picker_positions {
        splat(&mut img, cam, p, PICKER_COLOR);
    }
    img
}
