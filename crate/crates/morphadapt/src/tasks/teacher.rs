//! Scripted demonstration policies.
//!
//! The canonical teacher uses three pickers for the box task and two for the
//! cloth tasks. `scripted_policy` additionally provides one- and two-picker
//! scripts used for ablation datasets and oracle baselines.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::sim::{ParticleState, PickPlace, PickPlaceAction, Simulator, Topology};

use super::{box_centroids, TaskId, TaskVariant};

/// Canonical teacher: errors unless the state's morphology matches the
/// task's teacher morphology (three pickers for boxes, two for cloth).
pub fn teacher_policy(
    sim: &Simulator,
    variant: &TaskVariant,
    state: &ParticleState,
    t: usize,
) -> Result<PickPlaceAction> {
    let expected = sim.task().teacher_morphology();
    if state.num_pickers() != expected {
        return Err(Error::MorphologyMismatch {
            expected,
            actual: state.num_pickers(),
        });
    }
    scripted_policy(sim, variant, state, t)
}

/// Scripted policy for any supported morphology (1–3 pickers for boxes,
/// 1–2 for cloth). The induced 3-step episode solves the task.
pub fn scripted_policy(
    sim: &Simulator,
    variant: &TaskVariant,
    state: &ParticleState,
    t: usize,
) -> Result<PickPlaceAction> {
    variant.check_task(sim.task())?;
    match sim.task() {
        TaskId::ThreeBoxes => boxes_script(sim, variant, state, t),
        TaskId::ClothFold => cloth_fold_script(sim, state, t),
        TaskId::DryCloth => dry_cloth_script(sim, state, t),
    }
}

fn clamp_pair(sim: &Simulator, pick: Vector3<f64>, place: Vector3<f64>) -> PickPlace {
    PickPlace {
        pick: sim.bounds().clamp(pick),
        place: sim.bounds().clamp(place),
    }
}

// A true no-op grabs nothing: the top corner of the action box is always
// empty, so pick and place there leaves the scene untouched.
fn no_op_pair(sim: &Simulator, _at: Vector3<f64>) -> PickPlace {
    let hi = sim.bounds().hi;
    let p = Vector3::new(hi[0], hi[1], hi[2]);
    PickPlace { pick: p, place: p }
}

// Boxes: move every box to its goal, splitting the work across pickers.
// With m pickers, step t handles boxes m*t .. m*t+m-1.
fn boxes_script(
    sim: &Simulator,
    variant: &TaskVariant,
    state: &ParticleState,
    t: usize,
) -> Result<PickPlaceAction> {
    let TaskVariant::ThreeBoxes { goals, .. } = variant else {
        unreachable!("check_task verified the pairing");
    };
    let centroids = box_centroids(sim, state);
    let m = state.num_pickers();
    let mut pairs = Vec::with_capacity(m);
    for picker in 0..m {
        let b = m * t + picker;
        if b < centroids.len() {
            // grab an exact corner of the intended box: boxes parked at their
            // goals may overlap another box's centroid pick radius
            let corner = state.particles[8 * b];
            let goal = Vector3::new(goals[b][0], centroids[b].y, goals[b][2]);
            pairs.push(clamp_pair(sim, corner, corner + (goal - centroids[b])));
        } else {
            pairs.push(no_op_pair(sim, state.picker_positions[picker]));
        }
    }
    Ok(PickPlaceAction::new(pairs))
}

fn cloth_grid(sim: &Simulator) -> (usize, usize) {
    match sim.topology() {
        Topology::Cloth { w, h, .. } => (*w, *h),
        Topology::Boxes { .. } => unreachable!("cloth script on a box task"),
    }
}

fn particle(state: &ParticleState, w: usize, i: usize, j: usize) -> Vector3<f64> {
    state.particles[j * w + i]
}

// Cloth fold: carry the i=0 edge onto the i=w-1 edge, which zeroes the
// mirror-pair metric. One picker folds corner by corner.
fn cloth_fold_script(
    sim: &Simulator,
    state: &ParticleState,
    t: usize,
) -> Result<PickPlaceAction> {
    let (w, h) = cloth_grid(sim);
    let m = state.num_pickers();
    let lift = Vector3::new(0.0, 0.04, 0.0);
    let targets: [((usize, usize), (usize, usize)); 3] = [
        ((0, 0), (w - 1, 0)),
        ((0, h - 1), (w - 1, h - 1)),
        ((0, h / 2), (w - 1, h / 2)),
    ];
    let pair_for = |src: (usize, usize), dst: (usize, usize)| {
        let pick = particle(state, w, src.0, src.1);
        let place = particle(state, w, dst.0, dst.1) + lift;
        clamp_pair(sim, pick, place)
    };
    let mut pairs = Vec::with_capacity(m);
    match m {
        2 => {
            // both corners simultaneously, then tighten with the edge middle
            if t == 0 {
                pairs.push(pair_for(targets[0].0, targets[0].1));
                pairs.push(pair_for(targets[1].0, targets[1].1));
            } else {
                pairs.push(no_op_pair(sim, state.picker_positions[0]));
                pairs.push(no_op_pair(sim, state.picker_positions[1]));
            }
        }
        1 => {
            let (src, dst) = targets[t.min(2)];
            pairs.push(pair_for(src, dst));
        }
        _ => {
            return Err(Error::MorphologyMismatch {
                expected: 2,
                actual: m,
            })
        }
    }
    Ok(PickPlaceAction::new(pairs))
}

/// Which cloth edge (i=0 or i=w-1) currently sits farther from the plank
/// along +x, together with the side sign of the cloth relative to the plank.
fn dry_cloth_geometry(sim: &Simulator, state: &ParticleState) -> (f64, [usize; 2], [usize; 2]) {
    let (w, h) = cloth_grid(sim);
    let plank = sim.config().plank.expect("dry_cloth has a plank");
    let cx = 0.5 * (plank.min[0] + plank.max[0]);
    let mean_x: f64 =
        state.particles.iter().map(|p| p.x).sum::<f64>() / state.particles.len() as f64;
    let dir = if mean_x >= cx { 1.0 } else { -1.0 };
    let edge0 = [0, (h - 1) * w]; // corners (0,0), (0,h-1)
    let edge1 = [w - 1, (h - 1) * w + (w - 1)];
    let edge_x = |edge: &[usize; 2]| {
        (state.particles[edge[0]].x + state.particles[edge[1]].x) / 2.0
    };
    if dir * edge_x(&edge0) >= dir * edge_x(&edge1) {
        (dir, edge0, edge1)
    } else {
        (dir, edge1, edge0)
    }
}

/// Place height that lifts a straight pick→place segment over the plank top
/// with some clearance.
fn clearance_height(sim: &Simulator, from_x: f64, to_x: f64, dir: f64) -> f64 {
    let plank = sim.config().plank.expect("dry_cloth has a plank");
    let half_w = 0.5 * (plank.max[0] - plank.min[0]);
    let cx = 0.5 * (plank.min[0] + plank.max[0]);
    let near_face = cx + dir * half_w;
    let denom = from_x - to_x;
    if denom.abs() < 1e-9 {
        return 0.65;
    }
    let t_cross = (from_x - near_face) / denom;
    if !(0.0..=1.0).contains(&t_cross) || t_cross < 1e-6 {
        return 0.5;
    }
    let needed = (plank.max[1] + 0.08) / t_cross;
    needed.clamp(0.5, 0.68)
}

// Dry cloth: step 0 carries the far edge over the plank so the hanging
// curtain straddles it on release; later steps lift any fabric still piled
// on the ground back over the top, or do nothing once the drape is clean.
// Two pickers hold corners and keep their spacing during the move; one
// picker works with midpoints instead.
fn dry_cloth_script(sim: &Simulator, state: &ParticleState, t: usize) -> Result<PickPlaceAction> {
    let (w, h) = cloth_grid(sim);
    let m = state.num_pickers();
    if !(m == 1 || m == 2) {
        return Err(Error::MorphologyMismatch {
            expected: 2,
            actual: m,
        });
    }
    let plank = sim.config().plank.expect("dry_cloth has a plank");
    let cx = 0.5 * (plank.min[0] + plank.max[0]);
    let half_w = 0.5 * (plank.max[0] - plank.min[0]);
    let top = plank.max[1];
    let cloth_len = (w as f64 - 1.0) * sim.config().rest_length;

    if t == 0 {
        if m == 1 {
            // tent drape: hold the cloth center above the plank so the fabric
            // falls evenly onto both sides
            let grab = particle(state, w, w / 2, h / 2);
            let ty = (top + 0.5 * cloth_len).min(sim.bounds().hi[1] - 0.02);
            let cz = 0.5 * (plank.min[2] + plank.max[2]);
            let place = Vector3::new(cx, ty, cz.clamp(grab.z - 0.05, grab.z + 0.05));
            return Ok(PickPlaceAction::new(vec![clamp_pair(sim, grab, place)]));
        }
        let (dir, far_edge, _) = dry_cloth_geometry(sim, state);
        let grab_points: Vec<Vector3<f64>> =
            far_edge.iter().map(|&i| state.particles[i]).collect();
        let center: Vector3<f64> =
            grab_points.iter().sum::<Vector3<f64>>() / grab_points.len() as f64;
        // hook the cloth over the plank: hold the grabbed edge past the far
        // face at a height that leaves the trailing half wrapped over the top
        let tx = cx - dir * (half_w + 0.02);
        let ty = (top + 0.45 * cloth_len).min(sim.bounds().hi[1] - 0.02);
        let delta = Vector3::new(tx, ty, center.z) - center;
        let pairs = grab_points
            .iter()
            .map(|&p| clamp_pair(sim, p, p + delta))
            .collect();
        return Ok(PickPlaceAction::new(pairs));
    }

    // corrective step: lift grounded fabric back over the plank, unless the
    // drape is already mostly hanging (a lift would drag it off)
    let hanging = state
        .particles
        .iter()
        .filter(|p| p.y > 0.05 && (p.x - cx).abs() <= half_w + 0.05)
        .count() as f64
        / state.particles.len() as f64;
    let grounded: Vec<usize> = (0..state.particles.len())
        .filter(|&i| state.particles[i].y < 0.03)
        .collect();
    if hanging > 0.75 || grounded.len() < state.particles.len() / 8 {
        let pairs = (0..m)
            .map(|p| no_op_pair(sim, state.picker_positions[p]))
            .collect();
        return Ok(PickPlaceAction::new(pairs));
    }
    let lump_x =
        grounded.iter().map(|&i| state.particles[i].x).sum::<f64>() / grounded.len() as f64;
    let dir = if lump_x >= cx { 1.0 } else { -1.0 };
    // grab the grounded particles farthest from the plank, split by z for
    // two pickers so they spread the fabric as they carry it
    let grab_idx: Vec<usize> = if m == 2 {
        let mid_z = grounded
            .iter()
            .map(|&i| state.particles[i].z)
            .sum::<f64>()
            / grounded.len() as f64;
        let extreme = |side: bool| {
            grounded
                .iter()
                .copied()
                .filter(|&i| (state.particles[i].z >= mid_z) == side)
                .max_by(|&a, &b| {
                    let ka = dir * (state.particles[a].x - cx);
                    let kb = dir * (state.particles[b].x - cx);
                    ka.partial_cmp(&kb).unwrap()
                })
        };
        match (extreme(false), extreme(true)) {
            (Some(a), Some(b)) if a != b => vec![a, b],
            _ => vec![grounded[0], *grounded.last().unwrap()],
        }
    } else {
        vec![grounded
            .iter()
            .copied()
            .max_by(|&a, &b| {
                let ka = dir * (state.particles[a].x - cx);
                let kb = dir * (state.particles[b].x - cx);
                ka.partial_cmp(&kb).unwrap()
            })
            .unwrap()]
    };
    let grab_points: Vec<Vector3<f64>> = grab_idx.iter().map(|&i| state.particles[i]).collect();
    let center: Vector3<f64> =
        grab_points.iter().sum::<Vector3<f64>>() / grab_points.len() as f64;
    let tx = cx - dir * (half_w + 0.02);
    let ty = clearance_height(sim, center.x, tx, dir);
    let delta = Vector3::new(tx, ty, center.z) - center;
    let pairs = grab_points
        .iter()
        .map(|&p| clamp_pair(sim, p, p + delta))
        .collect();
    Ok(PickPlaceAction::new(pairs))
}
