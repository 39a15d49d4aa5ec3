//! Development probe: runs every builtin and prints the report numbers.

use regsim_core::diagnostics;
use regsim_core::integrate;
use regsim_core::scenario;

fn main() {
    for name in scenario::BUILTIN_NAMES {
        let t0 = std::time::Instant::now();
        let sc = scenario::builtin(name).unwrap();
        let traj = integrate::integrate(&sc.models, &sc.s0, &sc.integration).unwrap();
        let wall = t0.elapsed();
        let report =
            diagnostics::report(&traj, &sc.models, &sc.diagnostics, &sc.report_context()).unwrap();
        println!("== {name}: {} samples, {wall:?}, hard_pass={}", traj.len(), report.hard_pass);
        for c in &report.checks {
            println!(
                "   {:28} pass={} info={} measured={:?} threshold={:?} note={:?}",
                c.name, c.pass, c.informational, c.measured, c.threshold, c.note
            );
        }
        let last = traj.states.last().unwrap();
        println!(
            "   final: x={:?} theta={:?} theta_hat={:?} |x-xi|={:.3e}",
            last.x,
            last.theta,
            traj.derived.last().unwrap().theta_hat,
            regsim_core::num::norm(&regsim_core::num::sub(&last.x, &last.xi)),
        );
    }
}
