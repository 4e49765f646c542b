//! CSV input and output for point sets, step functions and data sets.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::DataSet;
use crate::stepfn::StepFunction;

#[derive(Debug, Serialize, Deserialize)]
struct PointRecord {
    t: f64,
    value: f64,
}

/// Reads `t,value` records.
pub fn read_points<R: Read>(reader: R) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize::<PointRecord>()
        .map(|r| Ok(r.map(|p| (p.t, p.value))?))
        .collect()
}

/// Writes `t,value` records.
pub fn write_points<W: Write>(writer: W, points: &[(f64, f64)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for &(t, value) in points {
        wtr.serialize(PointRecord { t, value })?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes a step function as `t,value` at its knots.
pub fn write_step<W: Write>(writer: W, f: &StepFunction) -> Result<()> {
    let pts: Vec<(f64, f64)> = f.knots().iter().copied().zip(f.values().iter().copied()).collect();
    write_points(writer, &pts)
}

#[derive(Debug, Deserialize)]
struct DensityRecord {
    x: f64,
}

#[derive(Debug, Deserialize)]
struct RegressionRecord {
    t: f64,
    y: f64,
}

/// Reads a data set: a single `x` column for density draws, or `t,y`
/// columns for regression pairs.
pub fn read_dataset<R: Read>(reader: R) -> Result<DataSet> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    match headers.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["x"] => {
            let xs = rdr
                .deserialize::<DensityRecord>()
                .map(|r| Ok(r?.x))
                .collect::<Result<Vec<f64>>>()?;
            DataSet::density(xs)
        }
        ["t", "y"] => {
            let pairs = rdr
                .deserialize::<RegressionRecord>()
                .map(|r| r.map(|p| (p.t, p.y)).map_err(Error::from))
                .collect::<Result<Vec<_>>>()?;
            DataSet::regression(pairs)
        }
        other => Err(Error::InvalidInput(format!(
            "expected columns `x` or `t,y`, found {other:?}"
        ))),
    }
}
