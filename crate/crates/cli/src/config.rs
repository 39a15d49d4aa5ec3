//! Scenario loading: a positional CONFIG argument is either a TOML file
//! path or the bare name of a builtin benchmark.

use std::fs;
use std::path::Path;

use regsim_core::scenario::{self, Scenario, ScenarioConfig};
use regsim_core::Error;

use crate::CliError;

pub fn load_scenario(spec: &str) -> Result<Scenario, CliError> {
    let path = Path::new(spec);
    if path.exists() {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ScenarioConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        scenario::from_config(&cfg).map_err(CliError::from_build)
    } else if scenario::BUILTIN_NAMES.contains(&spec) {
        scenario::builtin(spec).map_err(CliError::from_build)
    } else {
        Err(CliError::Config(format!(
            "'{spec}' is neither a readable file nor a builtin scenario (expected one of {})",
            scenario::BUILTIN_NAMES.join(", ")
        )))
    }
}

/// Command-line overrides applied after the config is built.
pub struct Overrides {
    pub h: Option<f64>,
    pub t_end: Option<f64>,
    pub mode: Option<String>,
}

pub fn apply_overrides(sc: &mut Scenario, over: &Overrides) -> Result<(), CliError> {
    if let Some(h) = over.h {
        sc.integration.method = regsim_core::integrate::StepMethod::Fixed { h };
    }
    if let Some(t_end) = over.t_end {
        sc.integration.t_end = t_end;
    }
    match over.mode.as_deref() {
        Some("theorem1") => sc.models.mode = regsim_core::ControllerMode::theorem1(),
        Some("theorem2") | Some("theorem2-kappa-zero") => {
            sc.models.mode = regsim_core::ControllerMode::theorem2_kappa_zero()
        }
        Some(other) => {
            return Err(CliError::Config(format!(
                "--mode must be theorem1 or theorem2, got '{other}'"
            )))
        }
        None => {}
    }
    sc.integration.validate().map_err(|e| match e {
        Error::InvalidConfig { field, message } => CliError::Config(format!("{field}: {message}")),
        other => CliError::Config(other.to_string()),
    })
}
