//! Scratch: corner-lift predicate exploration.
use morphadapt::sim::{PickPlace, PickPlaceAction, Simulator};
use morphadapt::tasks::{TaskId, TaskVariant};
use nalgebra::Vector3;

fn main() {
    let sim = Simulator::with_defaults(TaskId::DryCloth).unwrap();
    let variant = TaskVariant::DryCloth { rotation: 0.0, translation: [0.0, 0.0] };
    let s = sim.reset(&variant, 1, 0).unwrap();
    let plank_top = sim.config().plank.unwrap().max[1];
    for (px, py) in [(-0.1, 0.55), (-0.09, 0.55), (-0.11, 0.56), (-0.1, 0.53), (-0.08, 0.57)] {
        let corner = s.particles[0];
        let action = PickPlaceAction::new(vec![PickPlace { pick: corner, place: Vector3::new(px, py, corner.z) }]);
        let next = sim.step_pick_place(&s, &action).unwrap();
        let above = next.particles.iter().filter(|p| p.y > plank_top).count();
        let maxy = next.particles.iter().map(|p| p.y).fold(0.0, f64::max);
        println!("place ({px},{py}): {above} above plank top, max y {maxy:.3}");
    }
}
