//! Position-based dynamics internals: integration, constraint projection,
//! collision, macro-action transport and settling.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::tasks::{TaskId, TaskVariant};

use super::{
    ActionBounds, Constraint, ParticleState, PickPlaceAction, SimConfig, Simulator, Topology,
};

pub(crate) fn cloth_topology(w: usize, h: usize, rest: f64) -> Topology {
    let idx = |i: usize, j: usize| j * w + i;
    let mut constraints = Vec::new();
    for j in 0..h {
        for i in 0..w {
            // structural: right and down neighbors
            if i + 1 < w {
                constraints.push(Constraint {
                    a: idx(i, j),
                    b: idx(i + 1, j),
                    rest,
                    structural: true,
                });
            }
            if j + 1 < h {
                constraints.push(Constraint {
                    a: idx(i, j),
                    b: idx(i, j + 1),
                    rest,
                    structural: true,
                });
            }
            // shear: both diagonals
            if i + 1 < w && j + 1 < h {
                let diag = rest * std::f64::consts::SQRT_2;
                constraints.push(Constraint {
                    a: idx(i, j),
                    b: idx(i + 1, j + 1),
                    rest: diag,
                    structural: false,
                });
                constraints.push(Constraint {
                    a: idx(i + 1, j),
                    b: idx(i, j + 1),
                    rest: diag,
                    structural: false,
                });
            }
        }
    }
    Topology::Cloth { w, h, constraints }
}

/// Cloth grid position in its local (unrotated, origin-centered) frame.
pub(crate) fn cloth_local(i: usize, j: usize, w: usize, h: usize, rest: f64) -> (f64, f64) {
    let x = (i as f64 - (w as f64 - 1.0) / 2.0) * rest;
    let z = (j as f64 - (h as f64 - 1.0) / 2.0) * rest;
    (x, z)
}

fn cloth_particles(
    cfg: &SimConfig,
    rotation: f64,
    center_x: f64,
    center_z: f64,
) -> Vec<Vector3<f64>> {
    let (w, h) = (cfg.grid_w, cfg.grid_h);
    let (c, s) = (rotation.cos(), rotation.sin());
    let mut out = Vec::with_capacity(w * h);
    for j in 0..h {
        for i in 0..w {
            let (xl, zl) = cloth_local(i, j, w, h, cfg.rest_length);
            out.push(Vector3::new(
                center_x + c * xl + s * zl,
                cfg.ground_height,
                center_z - s * xl + c * zl,
            ));
        }
    }
    out
}

/// Corner offsets of a rigid box, in a fixed order.
pub(crate) fn box_corner_offsets(half: [f64; 3]) -> [Vector3<f64>; 8] {
    let mut out = [Vector3::zeros(); 8];
    for (k, item) in out.iter_mut().enumerate() {
        let sx = if k & 1 == 0 { -1.0 } else { 1.0 };
        let sy = if k & 2 == 0 { -1.0 } else { 1.0 };
        let sz = if k & 4 == 0 { -1.0 } else { 1.0 };
        *item = Vector3::new(sx * half[0], sy * half[1], sz * half[2]);
    }
    out
}

pub(crate) fn initial_particles(
    task: TaskId,
    cfg: &SimConfig,
    variant: &TaskVariant,
) -> Result<Vec<Vector3<f64>>> {
    match (task, variant) {
        (TaskId::ThreeBoxes, TaskVariant::ThreeBoxes { starts, .. }) => {
            let mut out = Vec::with_capacity(8 * starts.len());
            for start in starts {
                let center = Vector3::new(start[0], start[1], start[2]);
                for off in box_corner_offsets(cfg.box_half_extents) {
                    out.push(center + off);
                }
            }
            Ok(out)
        }
        (TaskId::ClothFold, TaskVariant::ClothFold { rotation, .. }) => {
            Ok(cloth_particles(cfg, *rotation, 0.0, 0.0))
        }
        (TaskId::DryCloth, TaskVariant::DryCloth {
            rotation,
            translation,
        }) => Ok(cloth_particles(
            cfg,
            *rotation,
            crate::tasks::DRY_CLOTH_CENTER_X + translation[0],
            translation[1],
        )),
        _ => Err(Error::VariantMismatch {
            task: task.name().into(),
            detail: "variant kind does not match task".into(),
        }),
    }
}

pub(crate) fn initial_picker_positions(bounds: &ActionBounds, m: usize) -> Vec<Vector3<f64>> {
    (0..m)
        .map(|i| {
            let frac = (i as f64 + 1.0) / (m as f64 + 1.0);
            Vector3::new(
                bounds.lo[0] + frac * (bounds.hi[0] - bounds.lo[0]),
                0.5 * (bounds.lo[1] + bounds.hi[1]),
                0.5 * (bounds.lo[2] + bounds.hi[2]),
            )
        })
        .collect()
}

/// Mutable solver workspace. `prev` holds the previous substep's positions
/// for Verlet-style velocity recovery.
struct Workspace {
    x: Vec<Vector3<f64>>,
    prev: Vec<Vector3<f64>>,
    /// Inverse-mass zero flag: pinned to a picker this substep.
    pinned: Vec<bool>,
    /// Normal axis and slip threshold of the last contact this substep.
    contact: Vec<Option<(usize, f64)>>,
}

impl Workspace {
    fn new(state: &ParticleState) -> Self {
        Workspace {
            x: state.particles.clone(),
            prev: state.particles.clone(),
            pinned: vec![false; state.particles.len()],
            contact: vec![None; state.particles.len()],
        }
    }

    fn kill_velocity(&mut self, i: usize) {
        self.prev[i] = self.x[i];
    }
}

fn project_constraint(ws: &mut Workspace, c: &Constraint, stiffness: f64, stretch_cap: f64) {
    let delta = ws.x[c.b] - ws.x[c.a];
    let len = delta.norm();
    if len <= f64::EPSILON {
        return;
    }
    // hard strain limit overrides soft stiffness when overstretched
    let k = if len > stretch_cap * c.rest {
        1.0
    } else {
        stiffness
    };
    let corr = delta * (k * (len - c.rest) / len);
    match (ws.pinned[c.a], ws.pinned[c.b]) {
        (false, false) => {
            ws.x[c.a] += corr * 0.5;
            ws.x[c.b] -= corr * 0.5;
        }
        (false, true) => ws.x[c.a] += corr,
        (true, false) => ws.x[c.b] -= corr,
        (true, true) => {}
    }
}

fn collide(ws: &mut Workspace, cfg: &SimConfig) {
    for i in 0..ws.x.len() {
        if ws.pinned[i] {
            continue;
        }
        if ws.x[i].y < cfg.ground_height {
            ws.x[i].y = cfg.ground_height;
            ws.contact[i] = Some((1, cfg.contact_slip));
        }
        if let Some(plank) = &cfg.plank {
            let p = ws.x[i];
            if plank.contains(&p) {
                // push to the nearest outside face
                let mut best_axis = 0usize;
                let mut best_push = f64::INFINITY;
                let mut best_target = 0.0;
                for k in 0..3 {
                    let to_min = p[k] - plank.min[k];
                    let to_max = plank.max[k] - p[k];
                    if to_min < best_push {
                        best_push = to_min;
                        best_axis = k;
                        best_target = plank.min[k];
                    }
                    if to_max < best_push {
                        best_push = to_max;
                        best_axis = k;
                        best_target = plank.max[k];
                    }
                }
                ws.x[i][best_axis] = best_target;
                ws.contact[i] = Some((best_axis, cfg.plank_slip));
            }
        }
    }
}

/// One cloth PBD substep. Returns the max particle displacement and the
/// total mechanical energy (kinetic + gravitational potential, unit mass);
/// with damping the latter is non-increasing unless the solver blows up.
fn cloth_substep(ws: &mut Workspace, cfg: &SimConfig, constraints: &[Constraint]) -> (f64, f64) {
    let start: Vec<Vector3<f64>> = ws.x.clone();
    let retain = 1.0 - cfg.damping;
    for i in 0..ws.x.len() {
        if ws.pinned[i] {
            ws.prev[i] = ws.x[i];
            continue;
        }
        let mut v = (ws.x[i] - ws.prev[i]) * (retain / cfg.dt);
        v.y -= cfg.gravity * cfg.dt;
        ws.prev[i] = ws.x[i];
        ws.x[i] += v * cfg.dt;
    }
    ws.contact.iter_mut().for_each(|c| *c = None);
    for _ in 0..cfg.solver_iterations {
        for c in constraints {
            let k = if c.structural {
                cfg.spring_stiffness
            } else {
                cfg.shear_stiffness
            };
            project_constraint(ws, c, k, cfg.stretch_cap);
        }
        collide(ws, cfg);
    }
    // contact friction: below the slip threshold a touching particle sticks
    // (tangential motion reverted); above it, it slides with its momentum
    // killed. Without this, draped cloth creeps off the plank indefinitely.
    for i in 0..ws.x.len() {
        if let Some((normal_axis, slip)) = ws.contact[i] {
            let mut tangential = 0.0;
            for k in 0..3 {
                if k != normal_axis {
                    tangential += (ws.x[i][k] - start[i][k]).powi(2);
                }
            }
            if tangential.sqrt() < slip {
                for k in 0..3 {
                    if k != normal_axis {
                        ws.x[i][k] = start[i][k];
                    }
                }
            }
            ws.kill_velocity(i);
        }
    }
    // energy measured from the settled-in positions and their implied
    // velocities, so the kinetic and potential terms are consistent
    let mut energy = 0.0;
    let mut max_disp: f64 = 0.0;
    for (i, (a, b)) in ws.x.iter().zip(start.iter()).enumerate() {
        max_disp = max_disp.max((a - b).norm());
        let v = (ws.x[i] - ws.prev[i]) / cfg.dt;
        energy += 0.5 * v.norm_squared() + cfg.gravity * (ws.x[i].y - cfg.ground_height);
    }
    (max_disp, energy)
}

fn strain_pass(ws: &mut Workspace, cfg: &SimConfig, constraints: &[Constraint]) -> bool {
    let mut violated = false;
    for c in constraints {
        let delta = ws.x[c.b] - ws.x[c.a];
        let len = delta.norm();
        let cap = cfg.stretch_cap * c.rest;
        if len > cap * (1.0 + 1e-12) {
            violated = true;
            // shorten exactly to the cap
            let corr = delta * ((len - cap) / len);
            match (ws.pinned[c.a], ws.pinned[c.b]) {
                (false, false) => {
                    ws.x[c.a] += corr * 0.5;
                    ws.x[c.b] -= corr * 0.5;
                }
                (false, true) => ws.x[c.a] += corr,
                (true, false) => ws.x[c.b] -= corr,
                (true, true) => {}
            }
        }
    }
    violated
}

/// Hard strain-limit cleanup: contact sticking during substeps can leave a
/// few springs over the cap, so project them out fully before returning a
/// settled state.
fn enforce_strain_limit(ws: &mut Workspace, cfg: &SimConfig, constraints: &[Constraint]) {
    for _ in 0..500 {
        let violated = strain_pass(ws, cfg, constraints);
        collide(ws, cfg);
        if !violated {
            break;
        }
    }
    for i in 0..ws.x.len() {
        ws.prev[i] = ws.x[i];
    }
}

fn check_finite(ws: &Workspace, context: &str) -> Result<()> {
    for p in &ws.x {
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            return Err(Error::SimDiverged(format!("NaN positions during {context}")));
        }
    }
    Ok(())
}

/// Drops every rigid cluster not held by a picker onto the ground plane.
fn settle_boxes(
    ws: &mut Workspace,
    clusters: &[Vec<usize>],
    held: &[bool],
    ground: f64,
) {
    for (b, cluster) in clusters.iter().enumerate() {
        if held[b] {
            continue;
        }
        let min_y = cluster
            .iter()
            .map(|&i| ws.x[i].y)
            .fold(f64::INFINITY, f64::min);
        let dy = ground - min_y;
        if dy != 0.0 {
            for &i in cluster {
                ws.x[i].y += dy;
                ws.prev[i] = ws.x[i];
            }
        }
    }
}

fn cluster_of(clusters: &[Vec<usize>], particle: usize) -> Option<usize> {
    clusters.iter().position(|c| c.contains(&particle))
}

pub(crate) fn settle(
    sim: &Simulator,
    state: &ParticleState,
    max_substeps: usize,
) -> Result<ParticleState> {
    let cfg = &sim.cfg;
    let mut ws = Workspace::new(state);
    for att in state.attached.iter().flatten() {
        if *att >= ws.x.len() {
            return Err(Error::ShapeMismatch(format!(
                "attached index {att} out of range for {} particles",
                ws.x.len()
            )));
        }
    }
    match &sim.topo {
        Topology::Boxes { clusters } => {
            // held clusters translate rigidly so the grabbed corner sits at
            // its picker; the rest drop to the ground
            let mut held = vec![false; clusters.len()];
            for (picker, att) in state.attached.iter().enumerate() {
                if let Some(p) = *att {
                    if let Some(b) = cluster_of(clusters, p) {
                        if !held[b] {
                            held[b] = true;
                            let delta = state.picker_positions[picker] - ws.x[p];
                            for &i in &clusters[b] {
                                ws.x[i] += delta;
                                ws.prev[i] = ws.x[i];
                            }
                        }
                    }
                }
            }
            settle_boxes(&mut ws, clusters, &held, cfg.ground_height);
            // rebuild corners from the centroid and canonical offsets so box
            // pairwise distances are preserved bit-for-bit across actions
            let offsets = box_corner_offsets(cfg.box_half_extents);
            for cluster in clusters {
                let center = cluster
                    .iter()
                    .map(|&i| ws.x[i])
                    .sum::<Vector3<f64>>()
                    / cluster.len() as f64;
                for (slot, &i) in cluster.iter().enumerate() {
                    ws.x[i] = center + offsets[slot % offsets.len()];
                    ws.prev[i] = ws.x[i];
                }
            }
            check_finite(&ws, "settle")?;
        }
        Topology::Cloth { constraints, .. } => {
            // particles held by pickers stay pinned at the picker position
            for (picker, att) in state.attached.iter().enumerate() {
                if let Some(p) = *att {
                    ws.pinned[p] = true;
                    ws.x[p] = state.picker_positions[picker];
                    ws.prev[p] = ws.x[p];
                }
            }
            let mut growth_streak = 0usize;
            let mut prev_energy = f64::INFINITY;
            for _ in 0..max_substeps {
                let (disp, energy) = cloth_substep(&mut ws, cfg, constraints);
                check_finite(&ws, "settle")?;
                if energy > prev_energy * 1.01 + 1e-12 {
                    growth_streak += 1;
                    if growth_streak >= 10 {
                        return Err(Error::SimDiverged(
                            "mechanical energy grew for 10 consecutive substeps".into(),
                        ));
                    }
                } else {
                    growth_streak = 0;
                }
                prev_energy = energy;
                if disp < cfg.settle_tolerance {
                    break;
                }
            }
            enforce_strain_limit(&mut ws, cfg, constraints);
        }
    }
    Ok(ParticleState {
        particles: ws.x,
        picker_positions: state.picker_positions.clone(),
        attached: state.attached.clone(),
        time_step: state.time_step,
    })
}

pub(crate) fn step_pick_place(
    sim: &Simulator,
    state: &ParticleState,
    action: &PickPlaceAction,
) -> Result<ParticleState> {
    let cfg = &sim.cfg;
    let mut ws = Workspace::new(state);
    let m = action.num_pickers();

    // attach: nearest particle within pick_radius of each pick point
    let mut attached: Vec<Option<usize>> = vec![None; m];
    for (picker, pp) in action.pairs.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in ws.x.iter().enumerate() {
            let d = (p - pp.pick).norm();
            if d <= cfg.pick_radius && best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        attached[picker] = best.map(|(i, _)| i);
    }

    // rigid clusters are owned by the first picker that grabbed them
    let (clusters, cloth_constraints): (&[Vec<usize>], &[Constraint]) = match &sim.topo {
        Topology::Boxes { clusters } => (clusters.as_slice(), &[]),
        Topology::Cloth { constraints, .. } => (&[], constraints.as_slice()),
    };
    let mut cluster_owner: Vec<Option<usize>> = vec![None; clusters.len()];
    for (picker, att) in attached.iter().enumerate() {
        if let Some(p) = *att {
            if let Some(b) = cluster_of(clusters, p) {
                cluster_owner[b].get_or_insert(picker);
            }
        }
    }

    let substeps = cfg.substeps_per_macro_action;
    let mut picker_pos: Vec<Vector3<f64>> =
        action.pairs.iter().map(|pp| pp.pick).collect();
    for s in 1..=substeps {
        let t = s as f64 / substeps as f64;
        let prev_pos = picker_pos.clone();
        for (picker, pp) in action.pairs.iter().enumerate() {
            picker_pos[picker] = pp.pick + (pp.place - pp.pick) * t;
        }
        // carried rigid clusters translate with their owner picker
        for (b, owner) in cluster_owner.iter().enumerate() {
            if let Some(picker) = *owner {
                let delta = picker_pos[picker] - prev_pos[picker];
                for &i in &clusters[b] {
                    ws.x[i] += delta;
                    ws.prev[i] = ws.x[i];
                }
                // keep carried boxes above ground
                let min_y = clusters[b]
                    .iter()
                    .map(|&i| ws.x[i].y)
                    .fold(f64::INFINITY, f64::min);
                if min_y < cfg.ground_height {
                    let dy = cfg.ground_height - min_y;
                    for &i in &clusters[b] {
                        ws.x[i].y += dy;
                        ws.prev[i] = ws.x[i];
                    }
                }
            }
        }
        if !cloth_constraints.is_empty() {
            // carried cloth particles snap to their picker
            ws.pinned.iter_mut().for_each(|p| *p = false);
            for (picker, att) in attached.iter().enumerate() {
                if let Some(p) = *att {
                    ws.pinned[p] = true;
                    ws.x[p] = picker_pos[picker];
                    ws.prev[p] = ws.x[p];
                }
            }
            cloth_substep(&mut ws, cfg, cloth_constraints);
        }
        check_finite(&ws, "transport")?;
    }

    // release and settle to equilibrium
    for i in 0..ws.x.len() {
        ws.prev[i] = ws.x[i];
        ws.pinned[i] = false;
    }
    let released = ParticleState {
        particles: ws.x,
        picker_positions: action.pairs.iter().map(|pp| pp.place).collect(),
        attached: vec![None; m],
        time_step: state.time_step + 1,
    };
    settle(sim, &released, cfg.settle_steps)
}
