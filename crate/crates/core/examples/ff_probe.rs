//! Development probe: finite-form residual decay under step halving.

use regsim_core::diagnostics;
use regsim_core::integrate::{self, IntegrationConfig};
use regsim_core::scenario;

fn main() {
    for name in ["scalar-equilibrium", "hopf-circle"] {
        let sc = scenario::builtin(name).unwrap();
        let mut resid = Vec::new();
        for h in [4e-3, 2e-3, 1e-3, 5e-4] {
            let cfg = IntegrationConfig::fixed(0.0, 4.0, h);
            let traj = integrate::integrate(&sc.models, &sc.s0, &cfg).unwrap();
            resid.push(diagnostics::finite_form_consistency(&traj, &sc.models).unwrap());
        }
        println!("{name}: residuals {resid:?}");
        for w in resid.windows(2) {
            println!("   ratio {:.3}", w[0] / w[1]);
        }
    }
}
