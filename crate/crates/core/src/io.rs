//! File formats shared by the command line and the pipeline.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linking::S3Curve;
use crate::return_map::ReturnRow;

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Curves are stored as a JSON array of `[re1, im1, re2, im2]`.
pub fn write_curve(path: impl AsRef<Path>, curve: &S3Curve) -> Result<()> {
    write_json(path, &curve.points())
}

pub fn read_curve(path: impl AsRef<Path>) -> Result<S3Curve> {
    let points: Vec<[f64; 4]> = read_json(path)?;
    S3Curve::from_points(&points)
}

/// Two whitespace-separated columns, one row per line, for gnuplot.
pub fn write_columns<W: Write>(
    mut out: W,
    rows: impl IntoIterator<Item = (f64, f64)>,
) -> Result<()> {
    for (a, b) in rows {
        writeln!(out, "{a} {b}")?;
    }
    out.flush()?;
    Ok(())
}

/// Return-map table as CSV with a header row.
pub fn write_return_table<W: Write>(out: W, rows: &[ReturnRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Homology ranks keyed by degree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomologySummary {
    pub degrees: BTreeMap<i32, usize>,
}

impl HomologySummary {
    pub fn from_ranks(ranks: &[(i32, usize)]) -> Self {
        HomologySummary {
            degrees: ranks.iter().copied().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let c = S3Curve::torus(0.6, 1, 2, 32).unwrap();
        write_curve(&path, &c).unwrap();
        let back = read_curve(&path).unwrap();
        assert_eq!(back.points(), c.points());
    }

    #[test]
    fn homology_summary_shape() {
        let s = HomologySummary::from_ranks(&[(-1, 1), (0, 1)]);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"degrees":{"-1":1,"0":1}}"#);
    }
}
