//! Development probe: calibrate identity-run leakage, late psi potential,
//! and on-circle Gramian deviation.

use regsim_core::diagnostics;
use regsim_core::integrate;
use regsim_core::num;
use regsim_core::scenario;

fn main() {
    // identity run eps integrals at t = 5
    for name in scenario::BUILTIN_NAMES {
        let sc = scenario::builtin(name).unwrap().identity_initialized().unwrap();
        let mut cfg = sc.integration.clone();
        cfg.t_end = cfg.t0 + 5.0;
        let traj = integrate::integrate(&sc.models, &sc.s0, &cfg).unwrap();
        let last = traj.states.last().unwrap();
        let mut worst_obs = 0.0_f64;
        let mut worst_hat = 0.0_f64;
        for (s, d) in traj.states.iter().zip(&traj.derived) {
            worst_obs = worst_obs.max(num::norm(&num::sub(&s.x, &s.xi)));
            worst_hat = worst_hat.max(num::norm(&num::sub(&s.theta, &d.theta_hat)));
        }
        println!(
            "{name}: eps0={:.3e} eps1={:.3e} eps2={:.3e} worst|x-xi|={:.3e} worst|theta-that|={:.3e}",
            last.eps0, last.eps1, last.eps2, worst_obs, worst_hat
        );
    }
    // psi potential late in the hopf run
    let sc = scenario::builtin("hopf-circle").unwrap();
    let traj = integrate::integrate(&sc.models, &sc.s0, &sc.integration).unwrap();
    let trace = diagnostics::v_psi_trace(&traj, &sc.models).unwrap();
    for t_probe in [20.0, 40.0, 60.0, 90.0, 120.0] {
        let v = trace.iter().find(|(t, _)| (*t - t_probe).abs() < 1e-9).unwrap().1;
        println!("V_psi({t_probe}) = {v:.3e}");
    }
    // Gramian deviation from pi over late windows
    let series = diagnostics::pe_min_eig(&traj, &sc.models, 2.0 * core::f64::consts::PI).unwrap();
    for lo in [30.0, 60.0, 90.0] {
        let worst = series
            .iter()
            .filter(|(t, _)| *t >= lo)
            .map(|(_, v)| (v - core::f64::consts::PI).abs())
            .fold(0.0, f64::max);
        println!("max |gramian - pi| for windows from t >= {lo}: {worst:.3e}");
    }
}
