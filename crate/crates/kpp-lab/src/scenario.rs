//! Named problem setups: built-in scenarios and scenario files.
//!
//! A scenario file is a small TOML document (scalars, arrays and the
//! `grid` table only):
//!
//! ```toml
//! n = 2
//! d = [1.0, 1.0]
//! A = [[0.8, 0.2], [0.2, 0.8]]
//! C = [[0.1, 0.9], [0.9, 0.1]]
//!
//! [grid]
//! dimension = 1
//! extent = [1.0]
//! cells = [32]
//! ```

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::{DomainGrid, SystemSpec};
use std::path::Path;

/// A named spec plus its default grid and a provenance note (builtin
/// origin or source file path).
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub spec: SystemSpec,
    pub grid: DomainGrid,
    pub provenance: String,
}

/// Two symmetric competitors with cross-coupling strong enough to admit
/// three distinct positive constant states. The canonical refutation
/// setup: d = (1,1), A = [[0.8,0.2],[0.2,0.8]], C = [[0.1,0.9],[0.9,0.1]].
pub fn counterexample() -> Scenario {
    Scenario {
        name: "hei2004-counterexample".into(),
        spec: SystemSpec::lotka_volterra(
            vec![1.0, 1.0],
            Mat::from_rows(&[vec![0.8, 0.2], vec![0.2, 0.8]]).unwrap(),
            Mat::from_rows(&[vec![0.1, 0.9], vec![0.9, 0.1]]).unwrap(),
        ),
        grid: DomainGrid::line(1.0, 32).unwrap(),
        provenance: "builtin".into(),
    }
}

/// Same coupling as the counterexample but with diagonally dominant
/// competition, so the unique positive state (1/10.9, 1/10.9) sits inside
/// the cooperative box [0, 2/9].
pub fn diagonal_competition() -> Scenario {
    Scenario {
        name: "diagonal-competition".into(),
        spec: SystemSpec::lotka_volterra(
            vec![1.0, 1.0],
            Mat::from_rows(&[vec![0.8, 0.2], vec![0.2, 0.8]]).unwrap(),
            Mat::from_rows(&[vec![10.0, 0.9], vec![0.9, 10.0]]).unwrap(),
        ),
        grid: DomainGrid::line(1.0, 32).unwrap(),
        provenance: "builtin".into(),
    }
}

/// Scalar logistic growth: states {0, 10}, principal eigenvalue -2.
pub fn single_logistic() -> Scenario {
    Scenario {
        name: "single-logistic".into(),
        spec: SystemSpec::lotka_volterra(
            vec![1.0],
            Mat::from_rows(&[vec![2.0]]).unwrap(),
            Mat::from_rows(&[vec![0.2]]).unwrap(),
        ),
        grid: DomainGrid::line(1.0, 32).unwrap(),
        provenance: "builtin".into(),
    }
}

pub const BUILTIN_NAMES: [&str; 3] = [
    "hei2004-counterexample",
    "diagonal-competition",
    "single-logistic",
];

pub fn builtin(name: &str) -> Option<Scenario> {
    match name {
        "hei2004-counterexample" => Some(counterexample()),
        "diagonal-competition" => Some(diagonal_competition()),
        "single-logistic" => Some(single_logistic()),
        _ => None,
    }
}

/// Builtin by name, else a scenario file by path.
pub fn resolve(name_or_path: &str) -> Result<Scenario> {
    if let Some(s) = builtin(name_or_path) {
        return Ok(s);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        return load(path);
    }
    Err(Error::Scenario(format!(
        "unknown scenario '{name_or_path}' (builtins: {})",
        BUILTIN_NAMES.join(", ")
    )))
}

/// Parses a scenario file.
pub fn load(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    let scenario = parse(&text)?;
    Ok(Scenario {
        name: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into()),
        provenance: format!("file:{}", path.display()),
        ..scenario
    })
}

pub fn parse(text: &str) -> Result<Scenario> {
    let value: toml::Value = text
        .parse()
        .map_err(|e| Error::Scenario(format!("scenario parse error: {e}")))?;
    let table = value
        .as_table()
        .ok_or_else(|| Error::Scenario("scenario file must be a table".into()))?;

    let n = get_int(table, "n")? as usize;
    if n == 0 {
        return Err(Error::Scenario("n must be at least 1".into()));
    }
    let d = get_float_array(table, "d")?;
    if d.len() != n {
        return Err(Error::Scenario(format!(
            "d has {} entries, n = {n}",
            d.len()
        )));
    }
    let a = get_matrix(table, "A", n)?;
    let c = get_matrix(table, "C", n)?;

    let grid_table = table
        .get("grid")
        .and_then(|v| v.as_table())
        .ok_or_else(|| Error::Scenario("missing [grid] table".into()))?;
    let dimension = get_int(grid_table, "dimension")? as usize;
    let extent = get_float_array(grid_table, "extent")?;
    let cells: Vec<usize> = get_int_array(grid_table, "cells")?
        .into_iter()
        .map(|v| v as usize)
        .collect();
    if extent.len() != dimension || cells.len() != dimension {
        return Err(Error::Scenario(format!(
            "grid.dimension = {dimension} but extent/cells have {}/{} entries",
            extent.len(),
            cells.len()
        )));
    }
    let grid = DomainGrid::new(extent, cells)?;

    Ok(Scenario {
        name: "scenario".into(),
        spec: SystemSpec::lotka_volterra(d, a, c),
        grid,
        provenance: "inline".into(),
    })
}

fn get_int(table: &toml::value::Table, key: &str) -> Result<i64> {
    table
        .get(key)
        .and_then(|v| v.as_integer())
        .ok_or_else(|| Error::Scenario(format!("missing or non-integer key '{key}'")))
}

fn as_float(v: &toml::Value) -> Option<f64> {
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
}

fn get_float_array(table: &toml::value::Table, key: &str) -> Result<Vec<f64>> {
    let arr = table
        .get(key)
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::Scenario(format!("missing or non-array key '{key}'")))?;
    arr.iter()
        .map(|v| {
            as_float(v).ok_or_else(|| Error::Scenario(format!("non-numeric entry in '{key}'")))
        })
        .collect()
}

fn get_int_array(table: &toml::value::Table, key: &str) -> Result<Vec<i64>> {
    let arr = table
        .get(key)
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::Scenario(format!("missing or non-array key '{key}'")))?;
    arr.iter()
        .map(|v| {
            v.as_integer()
                .ok_or_else(|| Error::Scenario(format!("non-integer entry in '{key}'")))
        })
        .collect()
}

fn get_matrix(table: &toml::value::Table, key: &str, n: usize) -> Result<Mat> {
    let arr = table
        .get(key)
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::Scenario(format!("missing or non-array key '{key}'")))?;
    if arr.len() != n {
        return Err(Error::Scenario(format!(
            "{key} has {} rows, expected {n}",
            arr.len()
        )));
    }
    let mut rows = Vec::with_capacity(n);
    for row in arr {
        let row = row
            .as_array()
            .ok_or_else(|| Error::Scenario(format!("{key} rows must be arrays")))?;
        if row.len() != n {
            return Err(Error::Scenario(format!(
                "{key} row has {} entries, expected {n}",
                row.len()
            )));
        }
        rows.push(
            row.iter()
                .map(|v| {
                    as_float(v)
                        .ok_or_else(|| Error::Scenario(format!("non-numeric entry in '{key}'")))
                })
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    Mat::from_rows(&rows)
}
