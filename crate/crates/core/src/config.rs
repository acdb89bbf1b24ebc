//! Flat `key = value` config files.
//!
//! One assignment per line, `#` starts a comment, keys are the field names
//! of [`SimConfig`] and [`Numerics`](crate::model::Numerics) (`kT` is
//! accepted for `kt`). Missing keys keep their paper defaults; unknown or
//! repeated keys are errors.
//!
//! ```text
//! omega_c = 5
//! kt = 0.1
//! pulse_interval = 0.10053   # 1/omega0, or `none`
//! initial_rho10 = 0.5, 0     # re, im
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::model::{ConfigError, SimConfig};

const KEYS: [&str; 13] = [
    "omega0",
    "omega_c",
    "kt",
    "alpha",
    "pulse_interval",
    "t_final",
    "initial_rho11",
    "initial_rho10",
    "rel_tol",
    "omega_max_factor",
    "max_panels",
    "substeps",
    "sample_stride",
];

fn syntax(line: usize, reason: impl Into<String>) -> ConfigError {
    ConfigError::Syntax {
        line,
        reason: reason.into(),
    }
}

fn number(line: usize, key: &str, raw: &str) -> Result<f64, ConfigError> {
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| syntax(line, format!("`{key}` expects a number, got `{raw}`")))
}

fn count(line: usize, key: &str, raw: &str) -> Result<usize, ConfigError> {
    raw.parse::<usize>()
        .map_err(|_| syntax(line, format!("`{key}` expects a non-negative integer, got `{raw}`")))
}

fn is_none(raw: &str) -> bool {
    matches!(raw.to_ascii_lowercase().as_str(), "none" | "off")
}

/// Parses and validates a config.
pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let mut c = SimConfig::paper_default();
    let mut seen = HashSet::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| syntax(line, format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        // the temperature is conventionally written kT
        let key = if key == "kT" { "kt" } else { key };
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        }
        if !seen.insert(key) {
            return Err(ConfigError::Duplicate {
                line,
                key: key.to_string(),
            });
        }
        match key {
            "omega0" => c.omega0 = number(line, key, value)?,
            "omega_c" => c.omega_c = number(line, key, value)?,
            "kt" => c.kt = number(line, key, value)?,
            "alpha" => c.alpha = number(line, key, value)?,
            "pulse_interval" => {
                c.pulse_interval = if is_none(value) { None } else { Some(number(line, key, value)?) }
            }
            "t_final" => c.t_final = number(line, key, value)?,
            "initial_rho11" => c.initial_rho11 = number(line, key, value)?,
            "initial_rho10" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                c.initial_rho10 = match parts.as_slice() {
                    [re] => Complex64::new(number(line, key, re)?, 0.0),
                    [re, im] => Complex64::new(number(line, key, re)?, number(line, key, im)?),
                    _ => return Err(syntax(line, "`initial_rho10` expects `re` or `re, im`")),
                };
            }
            "rel_tol" => c.numerics.rel_tol = number(line, key, value)?,
            "omega_max_factor" => c.numerics.omega_max_factor = number(line, key, value)?,
            "max_panels" => c.numerics.max_panels = count(line, key, value)?,
            "substeps" => {
                c.numerics.substeps = if is_none(value) { None } else { Some(count(line, key, value)?) }
            }
            "sample_stride" => c.numerics.sample_stride = count(line, key, value)?,
            _ => unreachable!("key list and match arms disagree"),
        }
    }
    c.validate()?;
    Ok(c)
}

/// Writes every key of `config` in the format [`parse_config`] reads.
pub fn format_config(config: &SimConfig) -> String {
    let n = &config.numerics;
    let opt = |v: Option<String>| v.unwrap_or_else(|| "none".to_string());
    let mut out = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    put("omega0", format!("{:e}", config.omega0));
    put("omega_c", format!("{:e}", config.omega_c));
    put("kt", format!("{:e}", config.kt));
    put("alpha", format!("{:e}", config.alpha));
    put("pulse_interval", opt(config.pulse_interval.map(|v| format!("{v:e}"))));
    put("t_final", format!("{:e}", config.t_final));
    put("initial_rho11", format!("{:e}", config.initial_rho11));
    put("initial_rho10", format!("{:e}, {:e}", config.initial_rho10.re, config.initial_rho10.im));
    put("rel_tol", format!("{:e}", n.rel_tol));
    put("omega_max_factor", format!("{:e}", n.omega_max_factor));
    put("max_panels", n.max_panels.to_string());
    put("substeps", opt(n.substeps.map(|v| v.to_string())));
    put("sample_stride", n.sample_stride.to_string());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse_config("# nothing\n\n").unwrap(), SimConfig::paper_default());
    }

    #[test]
    fn reads_every_key() {
        let text = "\
omega_c = 3   # cutoff
kt=0
alpha = 0.25
pulse_interval = 0.2
t_final = 4
initial_rho11 = 1
initial_rho10 = 0, 0
rel_tol = 1e-9
omega_max_factor = 20
max_panels = 5000
substeps = 8
sample_stride = 2
";
        let c = parse_config(text).unwrap();
        assert_eq!(c.omega_c, 3.0);
        assert_eq!(c.kt, 0.0);
        assert_eq!(c.pulse_interval, Some(0.2));
        assert_eq!(c.initial_rho10, Complex64::new(0.0, 0.0));
        assert_eq!(c.numerics.substeps, Some(8));
        assert_eq!(c.numerics.max_panels, 5000);
    }

    #[test]
    fn round_trips() {
        let mut c = SimConfig::paper_default().with_pulse_interval(Some(0.1005));
        c.initial_rho10 = Complex64::new(0.3, -0.1);
        c.numerics.substeps = Some(12);
        assert_eq!(parse_config(&format_config(&c)).unwrap(), c);
        let d = SimConfig::paper_default();
        assert_eq!(parse_config(&format_config(&d)).unwrap(), d);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse_config("omega_c 5"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(parse_config("\nfoo = 1"), Err(ConfigError::UnknownKey { line: 2, .. })));
        assert!(matches!(parse_config("kt = 1\nkt = 2"), Err(ConfigError::Duplicate { line: 2, .. })));
        assert!(matches!(parse_config("kt = warm"), Err(ConfigError::Syntax { .. })));
        assert!(matches!(parse_config("kt = -1"), Err(ConfigError::Invalid { key: "kt", .. })));
        assert!(matches!(parse_config("substeps = 2.5"), Err(ConfigError::Syntax { .. })));
        assert!(parse_config("initial_rho10 = 1, 2, 3").is_err());
    }

    #[test]
    fn none_switches_pulses_off() {
        let c = parse_config("pulse_interval = none").unwrap();
        assert_eq!(c.pulse_interval, None);
        assert_eq!(parse_config("pulse_interval = OFF").unwrap().pulse_interval, None);
    }

    #[test]
    fn temperature_spellings_are_one_key() {
        assert_eq!(parse_config("kT = 0.5").unwrap().kt, 0.5);
        assert!(matches!(parse_config("kT = 0.5\nkt = 0.5"), Err(ConfigError::Duplicate { .. })));
    }
}
