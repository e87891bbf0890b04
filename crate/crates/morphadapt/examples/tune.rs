//! Scratch experiment: teacher quality across tasks (not part of the build).
use morphadapt::rng;
use morphadapt::sim::Simulator;
use morphadapt::tasks::{self, TaskId};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let task = TaskId::parse(args.get(1).map(|s| s.as_str()).unwrap_or("three_boxes")).unwrap();
    let n = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10);
    let morph: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(task.teacher_morphology());
    let sim = Simulator::with_defaults(task).unwrap();
    let mut scores = Vec::new();
    let t0 = std::time::Instant::now();
    for k in 0..n {
        let mut stream = rng::derive(123, &[k as u64]);
        let variant = tasks::sample_variant(task, &mut stream);
        let s0 = sim.reset(&variant, morph, 0).unwrap();
        match tasks::rollout_scripted(&sim, &variant, &s0) {
            Ok(states) => {
                let per_step: Vec<f64> = states.iter().map(|s|
                    tasks::normalized_performance(&sim, &variant, s, &s0).unwrap()).collect();
                println!("variant {k}: steps {:?}", per_step.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>());
                scores.push(*per_step.last().unwrap());
            }
            Err(e) => println!("variant {k}: ERROR {e}"),
        }
    }
    let mean = scores.iter().sum::<f64>() / scores.len().max(1) as f64;
    println!("task {} morph {morph}: mean {:.3} over {} ok, {:.2}s", task.name(), mean, scores.len(), t0.elapsed().as_secs_f64());
}
