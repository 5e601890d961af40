//! `key = value` parameter files. Blank lines and `#` comments are ignored;
//! unknown or repeated keys are errors.

use std::path::Path;

use optosteer::model::PhysicalParams;

use crate::CliError;

pub const KEYS: [&str; 10] = [
    "mass",
    "mech_freq",
    "mech_damping",
    "thermal_force",
    "coupling",
    "cavity_bandwidth",
    "detuning",
    "efficiency",
    "window",
    "initial_occupation",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamFile {
    pub params: PhysicalParams,
    /// `window` was given explicitly.
    pub window_set: bool,
}

pub fn read(path: &Path) -> Result<ParamFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<ParamFile, CliError> {
    let mut p = PhysicalParams::default();
    let mut seen = [false; KEYS.len()];
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| CliError::Param { line: line_no, msg };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let value = value.trim();
        let idx = KEYS
            .iter()
            .position(|k| *k == key)
            .ok_or_else(|| err(format!("unknown key `{key}`")))?;
        if seen[idx] {
            return Err(err(format!("key `{key}` given twice")));
        }
        seen[idx] = true;
        let v: f64 = value
            .parse()
            .map_err(|_| err(format!("`{value}` is not a number for `{key}`")))?;
        let slot = match key {
            "mass" => &mut p.mass,
            "mech_freq" => &mut p.mech_freq,
            "mech_damping" => &mut p.mech_damping,
            "thermal_force" => &mut p.thermal_force,
            "coupling" => &mut p.coupling,
            "cavity_bandwidth" => &mut p.cavity_bandwidth,
            "detuning" => &mut p.detuning,
            "efficiency" => &mut p.efficiency,
            "window" => &mut p.window,
            _ => &mut p.initial_occupation,
        };
        *slot = v;
    }
    Ok(ParamFile {
        params: p,
        window_set: seen[8],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_values_and_comments() {
        let f = parse("# shot noise only\ncoupling = 2\nefficiency=0.75  # detector\n\n").unwrap();
        assert_eq!(f.params.coupling, 2.0);
        assert_eq!(f.params.efficiency, 0.75);
        assert_eq!(f.params.mass, 1.0);
        assert!(!f.window_set);
        assert!(parse("window = 5").unwrap().window_set);
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        for (text, line) in [
            ("coupling = 1\nfoo = 2", 2),
            ("efficiency = 0.5\nefficiency = 0.6", 2),
            ("mass 1", 1),
            ("mass = heavy", 1),
        ] {
            match parse(text) {
                Err(CliError::Param { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }
}
