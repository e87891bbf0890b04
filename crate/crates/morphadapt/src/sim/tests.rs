use nalgebra::{Rotation3, Vector3};

use super::*;
use crate::tasks::{self, TaskId, TaskVariant};

fn boxes_variant() -> TaskVariant {
    TaskVariant::ThreeBoxes {
        starts: vec![[0.2, 0.05, 0.0], [0.6, 0.05, 0.0], [1.0, 0.05, 0.0]],
        goals: vec![[0.4, 0.05, 0.0], [0.8, 0.05, 0.0], [1.2, 0.05, 0.0]],
    }
}

fn dry_variant() -> TaskVariant {
    TaskVariant::DryCloth {
        rotation: 0.0,
        translation: [0.0, 0.0],
    }
}

#[test]
fn reset_dry_cloth_is_flat_and_settled() {
    let sim = Simulator::with_defaults(TaskId::DryCloth).unwrap();
    let s = sim.reset(&dry_variant(), 2, 7).unwrap();
    let rest = sim.config().rest_length;
    for p in &s.particles {
        assert!(p.y >= -1e-12 && p.y <= rest, "particle y {} not near ground", p.y);
    }
    assert_eq!(s.num_particles(), sim.config().grid_w * sim.config().grid_h);
}

#[test]
fn reset_rotation_matches_rotating_the_unrotated_reset() {
    let sim = Simulator::with_defaults(TaskId::ClothFold).unwrap();
    let zero = TaskVariant::ClothFold {
        rotation: 0.0,
        fold_line: tasks::FoldLine {
            point: [0.0, 0.0],
            dir: [0.0, 1.0],
        },
    };
    let angle = 15.0_f64.to_radians();
    let rotated = TaskVariant::ClothFold {
        rotation: angle,
        fold_line: tasks::FoldLine {
            point: [0.0, 0.0],
            dir: [-angle.sin(), angle.cos()],
        },
    };
    let s_zero = sim.reset(&zero, 2, 3).unwrap();
    let s_rot = sim.reset(&rotated, 2, 3).unwrap();
    // the reset rotates local cloth coordinates about +y by the variant angle
    let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), angle);
    for (a, b) in s_zero.particles.iter().zip(s_rot.particles.iter()) {
        let expected = rot * a;
        assert!((expected - b).norm() < 1e-9, "{expected:?} vs {b:?}");
    }
}

#[test]
fn reset_unknown_variant_pairing_is_rejected() {
    let sim = Simulator::with_defaults(TaskId::DryCloth).unwrap();
    assert!(sim.reset(&boxes_variant(), 2, 0).is_err());
}

#[test]
fn no_op_grasp_changes_only_time_step() {
    let sim = Simulator::with_defaults(TaskId::ThreeBoxes).unwrap();
    let s = sim.reset(&boxes_variant(), 1, 0).unwrap();
    // pick far from every particle
    let action = PickPlaceAction::new(vec![PickPlace {
        pick: Vector3::new(1.35, 0.7, 0.25),
        place: Vector3::new(1.35, 0.7, 0.25),
    }]);
    let next = sim.step_pick_place(&s, &action).unwrap();
    assert_eq!(next.particles, s.particles);
    assert_eq!(next.time_step, s.time_step + 1);
}

#[test]
fn box_pick_place_moves_centroid_to_goal() {
    let sim = Simulator::with_defaults(TaskId::ThreeBoxes).unwrap();
    let variant = boxes_variant();
    let s = sim.reset(&variant, 1, 0).unwrap();
    let centroid = tasks::box_centroids(&sim, &s)[0];
    let goal = Vector3::new(0.4, centroid.y, 0.0);
    let action = PickPlaceAction::new(vec![PickPlace {
        pick: centroid,
        place: goal,
    }]);
    let next = sim.step_pick_place(&s, &action).unwrap();
    let moved = tasks::box_centroids(&sim, &next)[0];
    assert!(
        (moved - goal).norm() <= sim.config().pick_radius,
        "centroid {moved:?} not near goal {goal:?}"
    );
}

#[test]
fn dry_cloth_corner_lift_puts_fabric_above_plank() {
    let sim = Simulator::with_defaults(TaskId::DryCloth).unwrap();
    let variant = dry_variant();
    let s = sim.reset(&variant, 1, 0).unwrap();
    let corner = s.particles[0];
    let plank_top = sim.config().plank.unwrap().max[1];
    let action = PickPlaceAction::new(vec![PickPlace {
        pick: corner,
        place: Vector3::new(-0.1, 0.55, corner.z),
    }]);
    let next = sim.step_pick_place(&s, &action).unwrap();
    assert!(
        next.particles.iter().any(|p| p.y > plank_top),
        "no particle above the plank top"
    );
}

#[test]
fn settle_is_a_fixed_point_on_settled_states() {
    let sim = Simulator::with_defaults(TaskId::DryCloth).unwrap();
    let s = sim.reset(&dry_variant(), 2, 0).unwrap();
    let again = sim.settle(&s, 200).unwrap();
    for (a, b) in s.particles.iter().zip(again.particles.iter()) {
        assert!((a - b).norm() < sim.config().settle_tolerance * 10.0);
    }
}

#[test]
fn lone_particle_free_falls_to_ground() {
    let mut cfg = SimConfig::default_for(TaskId::ClothFold);
    cfg.grid_w = 1;
    cfg.grid_h = 1;
    let sim = Simulator::new(TaskId::ClothFold, cfg).unwrap();
    let state = ParticleState {
        particles: vec![Vector3::new(0.1, 0.4, 0.1)],
        picker_positions: vec![],
        attached: vec![],
        time_step: 0,
    };
    let settled = sim.settle(&state, 2000).unwrap();
    assert!(settled.particles[0].y.abs() < 1e-6);
    assert!((settled.particles[0].x - 0.1).abs() < 1e-9);
}

#[test]
fn pendant_cloth_hangs_below_pinned_corner() {
    let mut cfg = SimConfig::default_for(TaskId::ClothFold);
    cfg.grid_w = 2;
    cfg.grid_h = 2;
    cfg.rest_length = 0.1;
    let sim = Simulator::new(TaskId::ClothFold, cfg.clone()).unwrap();
    let hold = Vector3::new(0.0, 0.5, 0.0);
    let state = ParticleState {
        particles: vec![
            hold,
            Vector3::new(0.1, 0.5, 0.0),
            Vector3::new(0.0, 0.5, 0.1),
            Vector3::new(0.1, 0.5, 0.1),
        ],
        picker_positions: vec![hold],
        attached: vec![Some(0)],
        time_step: 0,
    };
    let settled = sim.settle(&state, 3000).unwrap();
    assert_eq!(settled.particles[0], hold, "pinned corner moved");
    for i in 1..4 {
        assert!(
            settled.particles[i].y < hold.y - 0.5 * cfg.rest_length,
            "particle {i} at {:?} does not hang below the pinned corner",
            settled.particles[i]
        );
    }
    // structural springs stay below the strain cap in the pendant equilibrium
    for (a, b) in [(0usize, 1usize), (0, 2), (1, 3), (2, 3)] {
        let len = (settled.particles[a] - settled.particles[b]).norm();
        assert!(len <= cfg.stretch_cap * cfg.rest_length + 1e-9);
    }
}

#[test]
fn step_is_deterministic_bit_for_bit() {
    let sim = Simulator::with_defaults(TaskId::DryCloth).unwrap();
    let variant = dry_variant();
    let s = sim.reset(&variant, 2, 0).unwrap();
    let action = tasks::teacher_policy(&sim, &variant, &s, 0).unwrap();
    let a = sim.step_pick_place(&s, &action).unwrap();
    let b = sim.step_pick_place(&s, &action).unwrap();
    assert_eq!(a, b);
}

#[test]
fn ground_constraint_holds_after_settle() {
    let sim = Simulator::with_defaults(TaskId::DryCloth).unwrap();
    let variant = dry_variant();
    let mut s = sim.reset(&variant, 2, 0).unwrap();
    for t in 0..3 {
        let action = tasks::teacher_policy(&sim, &variant, &s, t).unwrap();
        s = sim.step_pick_place(&s, &action).unwrap();
        for p in &s.particles {
            assert!(p.y >= -1e-9, "particle below ground: {}", p.y);
        }
    }
}

#[test]
fn spring_lengths_bounded_after_settle() {
    let sim = Simulator::with_defaults(TaskId::DryCloth).unwrap();
    let variant = dry_variant();
    let mut s = sim.reset(&variant, 2, 0).unwrap();
    let cfg = sim.config().clone();
    let w = cfg.grid_w;
    for t in 0..2 {
        let action = tasks::teacher_policy(&sim, &variant, &s, t).unwrap();
        s = sim.step_pick_place(&s, &action).unwrap();
    }
    for j in 0..cfg.grid_h {
        for i in 0..w - 1 {
            let len = (s.particles[j * w + i] - s.particles[j * w + i + 1]).norm();
            assert!(
                len <= cfg.stretch_cap * cfg.rest_length + 1e-9,
                "structural spring stretched to {len}"
            );
        }
    }
}

#[test]
fn rigid_boxes_preserve_pairwise_distances_exactly() {
    let sim = Simulator::with_defaults(TaskId::ThreeBoxes).unwrap();
    let variant = boxes_variant();
    let mut s = sim.reset(&variant, 1, 0).unwrap();
    let dist = |st: &ParticleState, a: usize, b: usize| (st.particles[a] - st.particles[b]).norm();
    let before: Vec<f64> = (0..8)
        .flat_map(|a| (a + 1..8).map(move |b| (a, b)))
        .map(|(a, b)| dist(&s, a, b))
        .collect();
    for t in 0..3 {
        let action = tasks::scripted_policy(&sim, &variant, &s, t).unwrap();
        s = sim.step_pick_place(&s, &action).unwrap();
        let after: Vec<f64> = (0..8)
            .flat_map(|a| (a + 1..8).map(move |b| (a, b)))
            .map(|(a, b)| dist(&s, a, b))
            .collect();
        for (x, y) in before.iter().zip(after.iter()) {
            assert_eq!(x, y, "box corner distances changed");
        }
    }
}

#[test]
fn out_of_bounds_actions_are_rejected() {
    let sim = Simulator::with_defaults(TaskId::ThreeBoxes).unwrap();
    let s = sim.reset(&boxes_variant(), 1, 0).unwrap();
    let action = PickPlaceAction::new(vec![PickPlace {
        pick: Vector3::new(2.0, 0.1, 0.0),
        place: Vector3::new(0.4, 0.1, 0.0),
    }]);
    match sim.step_pick_place(&s, &action) {
        Err(crate::Error::ActionOutOfBounds { index, .. }) => assert_eq!(index, 0),
        other => panic!("expected out-of-bounds rejection, got {other:?}"),
    }
}

#[test]
fn pickers_stay_within_action_bounds() {
    let sim = Simulator::with_defaults(TaskId::DryCloth).unwrap();
    let variant = dry_variant();
    let mut s = sim.reset(&variant, 2, 0).unwrap();
    for t in 0..3 {
        let action = tasks::teacher_policy(&sim, &variant, &s, t).unwrap();
        s = sim.step_pick_place(&s, &action).unwrap();
        for p in &s.picker_positions {
            assert!(sim.bounds().contains(p), "picker escaped bounds: {p:?}");
        }
    }
}

#[test]
fn action_flat_round_trip() {
    let action = PickPlaceAction::new(vec![
        PickPlace {
            pick: Vector3::new(0.1, 0.2, 0.3),
            place: Vector3::new(0.4, 0.5, 0.6),
        },
        PickPlace {
            pick: Vector3::new(-0.1, 0.0, 0.1),
            place: Vector3::new(0.2, 0.3, -0.2),
        },
    ]);
    assert_eq!(action.dim(), 12);
    let flat = action.to_flat();
    assert_eq!(PickPlaceAction::from_flat(&flat).unwrap(), action);
    assert!(PickPlaceAction::from_flat(&flat[..5]).is_err());
}

mod render_tests {
    use super::*;

    #[test]
    fn empty_particle_set_renders_background_only() {
        let sim = Simulator::with_defaults(TaskId::ThreeBoxes).unwrap();
        let state = ParticleState {
            particles: vec![],
            picker_positions: vec![],
            attached: vec![],
            time_step: 0,
        };
        let variant = TaskVariant::ThreeBoxes {
            starts: vec![],
            goals: vec![],
        };
        let cam = CameraSpec::for_task(TaskId::ThreeBoxes);
        let img = sim.render(&state, &variant, &cam);
        let bg = img.get(0, 0);
        for r in 0..IMAGE_SIZE {
            for c in 0..IMAGE_SIZE {
                assert_eq!(img.get(r, c), bg);
            }
        }
    }

    #[test]
    fn particle_at_camera_center_colors_the_center_pixel() {
        let sim = Simulator::with_defaults(TaskId::ThreeBoxes).unwrap();
        let cam = CameraSpec::for_task(TaskId::ThreeBoxes);
        let state = ParticleState {
            particles: vec![Vector3::new(cam.center_u, 0.0, cam.center_v)],
            picker_positions: vec![],
            attached: vec![],
            time_step: 0,
        };
        let variant = TaskVariant::ThreeBoxes {
            starts: vec![],
            goals: vec![],
        };
        let img = sim.render(&state, &variant, &cam);
        let px = img.get(IMAGE_SIZE / 2, IMAGE_SIZE / 2);
        assert_ne!(px, img.get(0, 0), "center pixel not colored");
    }

    #[test]
    fn rendering_is_deterministic() {
        let sim = Simulator::with_defaults(TaskId::DryCloth).unwrap();
        let variant = dry_variant();
        let s = sim.reset(&variant, 2, 0).unwrap();
        let cam = CameraSpec::for_task(TaskId::DryCloth);
        assert_eq!(sim.render(&s, &variant, &cam), sim.render(&s, &variant, &cam));
    }
}
