//! Scratch: ASCII side-view of DryCloth teacher rollouts.
use morphadapt::rng;
use morphadapt::sim::{CameraSpec, Simulator};
use morphadapt::tasks::{self, TaskId};

fn ascii(img: &morphadapt::sim::Image32) -> String {
    let mut s = String::new();
    for r in 0..32 {
        for c in 0..32 {
            let px = img.get(r, c);
            let ch = if px == [1.0, 1.0, 1.0] { '@' }
            else if px[0] > 0.9 && px[1] > 0.5 { 'o' }       // orange cloth
            else if px[0] > 0.9 && px[2] > 0.6 { 'p' }       // pink cloth
            else if px[0] > 0.4 && px[1] > 0.25 && px[2] < 0.2 { '#' } // plank
            else { '.' };
            s.push(ch);
        }
        s.push('\n');
    }
    s
}

fn main() {
    let variant_id: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let task = TaskId::DryCloth;
    let sim = Simulator::with_defaults(task).unwrap();
    let mut stream = rng::derive(123, &[variant_id]);
    let variant = tasks::sample_variant(task, &mut stream);
    println!("variant: {:?}", variant);
    let cam = CameraSpec::for_task(task);
    let mut s = sim.reset(&variant, 2, 0).unwrap();
    let s0 = s.clone();
    println!("t=0 initial:\n{}", ascii(&sim.render(&s, &variant, &cam)));
    for t in 0..3 {
        let a = tasks::teacher_policy(&sim, &variant, &s, t).unwrap();
        s = sim.step_pick_place(&s, &a).unwrap();
        let perf = tasks::normalized_performance(&sim, &variant, &s, &s0).unwrap();
        println!("after t={t} perf={perf:.3}:\n{}", ascii(&sim.render(&s, &variant, &cam)));
    }
}
