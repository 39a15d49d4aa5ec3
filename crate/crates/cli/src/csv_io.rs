//! Trajectory CSV: locale-independent, `\n` newlines, 17 significant
//! digits so every double round-trips exactly and stored runs reproduce
//! run-time diagnostics bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use regsim_core::dynamics;
use regsim_core::integrate::{Derived, Trajectory};
use regsim_core::linalg;
use regsim_core::model::{Models, SimState};
use regsim_core::num;

use crate::CliError;

fn header(n: usize, m: usize, d: usize) -> String {
    let mut cols = vec!["t".to_string()];
    let group = |prefix: &str, count: usize, cols: &mut Vec<String>| {
        for i in 1..=count {
            cols.push(format!("{prefix}_{i}"));
        }
    };
    group("x", n, &mut cols);
    group("theta", d, &mut cols);
    group("theta_hat", d, &mut cols);
    group("xi", n, &mut cols);
    group("nu", d, &mut cols);
    cols.push("eps0".to_string());
    cols.push("eps1".to_string());
    cols.push("eps2".to_string());
    group("u", m, &mut cols);
    cols.push("psi".to_string());
    cols.push("varphi_psi".to_string());
    cols.join(",")
}

/// 17 significant digits: exact f64 round-trip.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trajectory(path: &Path, models: &Models, traj: &Trajectory) -> Result<(), CliError> {
    let (n, m, d) = (models.plant.n, models.plant.m, models.plant.d);
    let mut out = String::new();
    out.push_str(&header(n, m, d));
    out.push('\n');
    for (s, dr) in traj.states.iter().zip(&traj.derived) {
        let mut row: Vec<String> = Vec::with_capacity(1 + n + d + d + n + d + 3 + m + 2);
        row.push(fmt(s.t));
        row.extend(s.x.iter().map(|v| fmt(*v)));
        row.extend(s.theta.iter().map(|v| fmt(*v)));
        row.extend(dr.theta_hat.iter().map(|v| fmt(*v)));
        row.extend(s.xi.iter().map(|v| fmt(*v)));
        row.extend(s.nu.iter().map(|v| fmt(*v)));
        row.push(fmt(s.eps0));
        row.push(fmt(s.eps1));
        row.push(fmt(s.eps2));
        row.extend(dr.u.iter().map(|v| fmt(*v)));
        row.push(fmt(dr.psi));
        row.push(fmt(dr.varphi_psi));
        let _ = writeln!(out, "{}", row.join(","));
    }
    fs::write(path, out)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

/// Rebuilds a trajectory from a stored CSV against its scenario models.
///
/// The integral part of the estimate is back-solved from the stored
/// estimate; no diagnostic reads it, so the reconstruction is exact where
/// it matters. Malformed input reports the offending 1-based row.
pub fn read_trajectory(path: &Path, models: &Models) -> Result<Trajectory, CliError> {
    let (n, m, d) = (models.plant.n, models.plant.m, models.plant.d);
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| CliError::Config("empty CSV".to_string()))?;
    let expected = header(n, m, d);
    if head != expected {
        return Err(CliError::Config(format!(
            "CSV header does not match the scenario (expected '{expected}')"
        )));
    }
    let width = 1 + n + d + d + n + d + 3 + m + 2;
    let mut traj = Trajectory { times: Vec::new(), states: Vec::new(), derived: Vec::new() };
    for (idx, line) in lines.enumerate() {
        let row_no = idx + 2; // 1-based, after the header
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(CliError::Config(format!(
                "row {row_no}: expected {width} fields, found {}",
                fields.len()
            )));
        }
        let mut vals = Vec::with_capacity(width);
        for (col, f) in fields.iter().enumerate() {
            vals.push(f.parse::<f64>().map_err(|_| {
                CliError::Config(format!("row {row_no}, column {}: bad number '{f}'", col + 1))
            })?);
        }
        let mut at = 0usize;
        let mut take = |count: usize| {
            let slice = vals[at..at + count].to_vec();
            at += count;
            slice
        };
        let t = take(1)[0];
        let x = take(n);
        let theta = take(d);
        let theta_hat = take(d);
        let xi = take(n);
        let nu = take(d);
        let eps = take(3);
        let u = take(m);
        let psi = take(1)[0];
        let varphi_psi = take(1)[0];

        if let Some(prev) = traj.times.last() {
            if t <= *prev {
                return Err(CliError::Config(format!(
                    "row {row_no}: time {t} does not increase past {prev}"
                )));
            }
        }

        // theta_hat_I = theta_hat - H^{-1} Psi(xi) x
        let psi_x = dynamics::big_psi(&models.plant, &models.target, &models.mode, &xi)
            .and_then(|p| p.mul_vec(&x))
            .map_err(|e| CliError::Config(format!("row {row_no}: {e}")))?;
        let correction = linalg::spd_solve_vec(&models.drift.h, &psi_x)
            .map_err(|e| CliError::Config(format!("row {row_no}: {e}")))?;
        let theta_hat_i = num::sub(&theta_hat, &correction);

        let mut state = SimState::new(t, x.clone(), theta.clone(), theta_hat_i, xi.clone(), nu);
        state.eps0 = eps[0];
        state.eps1 = eps[1];
        state.eps2 = eps[2];

        let alpha_x = dynamics::alpha(&models.plant, &x)
            .map_err(|e| CliError::Config(format!("row {row_no}: {e}")))?;
        let alpha_xi = dynamics::alpha(&models.plant, &xi)
            .map_err(|e| CliError::Config(format!("row {row_no}: {e}")))?;
        let e_sig = alpha_x
            .sub(&alpha_xi)
            .and_then(|diff| diff.mul_vec(&theta))
            .map_err(|e| CliError::Config(format!("row {row_no}: {e}")))?;
        let adapt_err = alpha_xi
            .mul_vec(&num::sub(&theta, &theta_hat))
            .map_err(|e| CliError::Config(format!("row {row_no}: {e}")))?;

        traj.times.push(t);
        traj.derived.push(Derived {
            theta_hat,
            u,
            e: e_sig,
            adapt_err,
            grad_psi: (models.target.grad_psi)(&x),
            psi,
            varphi_psi,
        });
        traj.states.push(state);
    }
    if traj.times.is_empty() {
        return Err(CliError::Config("CSV holds no data rows".to_string()));
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        assert_eq!(
            header(2, 1, 2),
            "t,x_1,x_2,theta_1,theta_2,theta_hat_1,theta_hat_2,xi_1,xi_2,nu_1,nu_2,\
             eps0,eps1,eps2,u_1,psi,varphi_psi"
        );
    }

    #[test]
    fn fmt_round_trips_doubles() {
        for v in [0.1, -3.25e-17, core::f64::consts::PI, 1.0 / 3.0, 2.0_f64.powi(-1040)] {
            let back: f64 = fmt(v).parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{v}");
        }
    }
}
