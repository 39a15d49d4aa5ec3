//! Development probe: reference runs at h=1e-5 vs the working step h=1e-3.

use regsim_core::integrate::{self, IntegrationConfig};
use regsim_core::num;
use regsim_core::scenario;

fn tail_max_dist(sc: &regsim_core::scenario::Scenario, traj: &regsim_core::integrate::Trajectory, frac: f64) -> f64 {
    let t1 = *traj.times.last().unwrap();
    let cut = t1 - frac * (t1 - traj.times[0]);
    traj.states
        .iter()
        .filter(|s| s.t >= cut)
        .map(|s| sc.models.target.dist(&s.x))
        .fold(0.0, f64::max)
}

fn main() {
    // scalar horizon 10
    let sc = scenario::builtin("scalar-equilibrium").unwrap();
    for h in [1e-3, 1e-5] {
        let mut cfg = IntegrationConfig::fixed(0.0, 10.0, h);
        cfg.log_stride = (1e-3 / h) as usize;
        let t0 = std::time::Instant::now();
        let traj = integrate::integrate(&sc.models, &sc.s0, &cfg).unwrap();
        let x_end = traj.states.last().unwrap().x[0];
        println!("scalar h={h:.0e}: |x(10)| = {:.6e}  ({:?})", num::abs(x_end), t0.elapsed());
    }
    // hopf horizon 40
    let sc = scenario::builtin("hopf-circle").unwrap();
    for h in [1e-3, 1e-5] {
        let mut cfg = IntegrationConfig::fixed(0.0, 40.0, h);
        cfg.log_stride = (1e-3 / h) as usize;
        let t0 = std::time::Instant::now();
        let traj = integrate::integrate(&sc.models, &sc.s0, &cfg).unwrap();
        println!(
            "hopf h={h:.0e}: max |varphi(psi)| final 25% = {:.6e}  ({:?})",
            tail_max_dist(&sc, &traj, 0.25),
            t0.elapsed()
        );
    }
}
