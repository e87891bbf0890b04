//! Scratch: inspect settle energy trace for DryCloth teacher step 0.
use morphadapt::rng;
use morphadapt::sim::Simulator;
use morphadapt::tasks::{self, TaskId};

fn main() {
    let task = TaskId::DryCloth;
    let sim = Simulator::with_defaults(task).unwrap();
    let mut stream = rng::derive(123, &[0]);
    let variant = tasks::sample_variant(task, &mut stream);
    let s0 = sim.reset(&variant, 2, 0).unwrap();
    let a = tasks::teacher_policy(&sim, &variant, &s0, 0).unwrap();
    println!("action: {:?}", a);
    match sim.step_pick_place(&s0, &a) {
        Ok(s1) => println!("step ok, perf {:.3}", tasks::normalized_performance(&sim, &variant, &s1, &s0).unwrap()),
        Err(e) => println!("step err: {e}"),
    }
}
