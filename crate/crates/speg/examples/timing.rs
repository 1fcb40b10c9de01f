use nalgebra::DVector;
use std::time::{Duration, Instant};

fn main() {
    let (ladder, cfg) = speg::acc::build().unwrap();
    let u_nom = DVector::zeros(1);

    // Workload 1: the out-of-model-pulse scenario's visited states.
    let trace = speg::acc::run_scenario3(&ladder, &cfg, 100).unwrap();
    let states: Vec<DVector<f64>> = trace.steps.iter().map(|s| s.state.clone()).collect();

    let mut g_total = Duration::ZERO;
    let mut s_total = Duration::ZERO;
    for x in &states {
        let t = Instant::now();
        let _ = speg::govern(&ladder, &cfg, x, &u_nom).unwrap();
        g_total += t.elapsed();
        let r = speg::solve_series(&ladder, &cfg, x, &u_nom).unwrap();
        s_total += r.wall_time;
    }
    println!(
        "pulse-trace workload ({} states): govern {:.2e}s series {:.2e}s ratio {:.2}",
        states.len(),
        g_total.as_secs_f64() / states.len() as f64,
        s_total.as_secs_f64() / states.len() as f64,
        s_total.as_secs_f64() / g_total.as_secs_f64()
    );

    // Workload 2: hard-braking scenario states (all extension regime).
    let trace2 = speg::acc::run_scenario2(&ladder, &cfg, 8).unwrap();
    let mut g2 = Duration::ZERO;
    let mut s2 = Duration::ZERO;
    for s in &trace2.steps {
        let t = Instant::now();
        let _ = speg::govern(&ladder, &cfg, &s.state, &u_nom).unwrap();
        g2 += t.elapsed();
        let r = speg::solve_series(&ladder, &cfg, &s.state, &u_nom).unwrap();
        s2 += r.wall_time;
    }
    println!(
        "braking workload ({} states): govern {:.2e}s series {:.2e}s ratio {:.2}",
        trace2.steps.len(),
        g2.as_secs_f64() / trace2.steps.len() as f64,
        s2.as_secs_f64() / trace2.steps.len() as f64,
        s2.as_secs_f64() / g2.as_secs_f64()
    );
}
