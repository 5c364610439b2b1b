//! The `--tau` mini-language.

use std::collections::HashMap;

use frame_lyapunov::{CellId, Interval, MeasureSpace, WeightFn};
use serde::Deserialize;

use crate::CliError;

/// Parses a weight specification for a frame over `space`.
///
/// `one`, `zero`, `const:<x>`, `linear` (`τ(t) = t/μ(X)`),
/// `indicator:<a>-<b>,<c>-<d>` and `file:<path>`. Files hold either a list
/// of per-cell values, `{"breaks": [...], "values": [...]}` or
/// `{"cells": {"<id>": value}}`.
pub fn parse(spec: &str, space: &MeasureSpace) -> Result<WeightFn, CliError> {
    let (head, rest) = match spec.split_once(':') {
        Some((h, r)) => (h, Some(r)),
        None => (spec, None),
    };
    let bad = |why: String| CliError::validation(format!("invalid --tau '{spec}': {why}"));
    let w = match (head, rest) {
        ("one", None) => WeightFn::constant(1.0),
        ("zero", None) => WeightFn::constant(0.0),
        ("const", Some(x)) => WeightFn::constant(x.trim().parse().map_err(|e| bad(format!("{e}")))?),
        ("linear", None) => WeightFn::linear(space.total_measure()),
        ("indicator", Some(list)) => {
            let mut intervals = Vec::new();
            for part in list.split(',').filter(|p| !p.trim().is_empty()) {
                let (a, b) = part
                    .split_once('-')
                    .ok_or_else(|| bad(format!("interval '{part}' is not of the form a-b")))?;
                let a: f64 = a.trim().parse().map_err(|e| bad(format!("{e}")))?;
                let b: f64 = b.trim().parse().map_err(|e| bad(format!("{e}")))?;
                if !(a <= b) {
                    return Err(bad(format!("interval {a}-{b} has start after end")));
                }
                intervals.push(Interval::new(a, b));
            }
            WeightFn::indicator(&intervals)
        }
        ("file", Some(path)) => return from_file(path, space).map_err(bad),
        _ => return Err(bad("expected one, zero, const:<x>, linear, indicator:<list> or file:<path>".into())),
    };
    w.map_err(|e| bad(e.to_string()))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WeightFile {
    Values(Vec<f64>),
    Steps { breaks: Vec<f64>, values: Vec<f64> },
    Cells { cells: HashMap<String, f64> },
}

fn from_file(path: &str, space: &MeasureSpace) -> Result<WeightFn, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
    let parsed: WeightFile = serde_json::from_str(&text).map_err(|e| format!("{path}: {e}"))?;
    match parsed {
        WeightFile::Values(v) => WeightFn::from_cell_values(space, &v),
        WeightFile::Steps { breaks, values } => WeightFn::steps(breaks, values),
        WeightFile::Cells { cells } => {
            let mut map = HashMap::with_capacity(cells.len());
            for (k, v) in cells {
                map.insert(CellId::parse(&k).map_err(|e| e.to_string())?, v);
            }
            WeightFn::per_cell(map)
        }
    }
    .map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_closed_forms() {
        let space = MeasureSpace::uniform(4, 2.0).unwrap();
        assert!(matches!(parse("one", &space).unwrap(), WeightFn::Constant(c) if c == 1.0));
        assert!(matches!(parse("const:0.25", &space).unwrap(), WeightFn::Constant(c) if c == 0.25));
        assert!(matches!(parse("linear", &space).unwrap(), WeightFn::Linear { length } if length == 2.0));
        let ind = parse("indicator:0-0.5,1-1.5", &space).unwrap();
        assert_eq!(ind.value_at(0.25, None).unwrap(), 1.0);
        assert_eq!(ind.value_at(0.75, None).unwrap(), 0.0);
        assert!(parse("const:2", &space).is_err());
        assert!(parse("sine", &space).is_err());
        assert!(parse("indicator:0.5-0.1", &space).is_err());
    }
}
