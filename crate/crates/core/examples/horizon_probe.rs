//! Development probe: observer mismatch decay on the hopf variants.

use regsim_core::integrate::{self, IntegrationConfig};
use regsim_core::num;
use regsim_core::scenario;

fn main() {
    for name in ["hopf-circle", "hopf-circle-drift"] {
        let sc = scenario::builtin(name).unwrap();
        let mut cfg = IntegrationConfig::fixed(0.0, 130.0, 1e-3);
        cfg.log_stride = 1000;
        let traj = integrate::integrate(&sc.models, &sc.s0, &cfg).unwrap();
        println!("== {name}");
        for (t, s) in traj.times.iter().zip(&traj.states) {
            if (t.round() - t).abs() < 1e-9 && (*t as i64) % 10 == 0 {
                let e = num::norm(&num::sub(&s.x, &s.xi));
                let w = num::norm(&num::sub(&s.theta, &s.nu));
                println!("  t={t:5.1}  |x-xi|={e:10.3e}  |theta-nu|={w:10.3e}");
            }
        }
    }
}
