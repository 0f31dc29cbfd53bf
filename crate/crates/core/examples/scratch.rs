use dvfsched::formulations::*;
use dvfsched::power::Processor;
use dvfsched::schedule::{realize_with_stats, validate, minlp_point};
use dvfsched::taskmodel::Taskset;
use dvfsched::power::total_energy;

fn main() {
    let ts = Taskset::from_json_str(&std::fs::read_to_string("data/tasksets/d04.json").unwrap()).unwrap();
    let proc = Processor::from_json_str(&std::fs::read_to_string("data/processors/xscale.json").unwrap()).unwrap();
    let pm = proc.power_model().unwrap();
    let inst = Instance::new(ts, 2).unwrap();
    let plan = solve_lp_dvfs(&inst, &pm).unwrap();
    println!("objective: {}", plan.objective);
    for (j, per_mu) in plan.entries.iter().enumerate() {
        for (mu, list) in per_mu {
            for e in list {
                println!("job {j} mu {mu}: s={} a={}", e.speed, e.fraction);
            }
        }
    }
    let (sched, stats) = realize_with_stats(&plan, &inst).unwrap();
    println!("stats: {:?}", stats);
    let report = validate(&sched, &inst, &pm, 2);
    println!("validate: {:?}", report.violations);
    let energy = total_energy(&sched, &pm, inst.horizon, 2).unwrap();
    println!("schedule objective {} vs plan {}", energy.objective, plan.objective);
    let (_, mreport) = minlp_point(&sched, &inst, &pm);
    println!("minlp M = {}, steps {:?}, violations {:?}", mreport.max_steps, mreport.steps_per_interval, mreport.violations);
    for seg in &sched.segments {
        println!("p{} job{} s={} [{}, {})", seg.proc, seg.job_index, seg.speed, seg.start, seg.end);
    }
}
