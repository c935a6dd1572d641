//! CSV tables with named columns, written at 12 significant digits.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::curves::TradeoffCurve;
use crate::error::{Error, Result};
use crate::grid::GammaGrid;
use crate::profiles::PrivacyProfile;

/// `x` with 12 significant digits, in plain notation where that is short.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i32;
    if (-5..=11).contains(&e) {
        let decimals = (11 - e).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.11e}")
    }
}

pub fn write_table<W: Write>(out: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Parse(format!("row has {} fields, header has {}", row.len(), header.len())));
        }
        w.write_record(row.iter().map(|&x| fmt_sig(x)))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table whose header must equal `header`.
pub fn read_table<R: Read>(input: R, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_reader(input);
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::Parse(format!("expected header {}, found {}", header.join(","), found.join(","))));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{f:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_table_file(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    write_table(std::fs::File::create(path)?, header, rows)
}

pub fn read_table_file(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    read_table(std::fs::File::open(path)?, header)
}

pub const CURVE_HEADER: [&str; 2] = ["alpha", "value"];
pub const PROFILE_HEADER: [&str; 2] = ["gamma", "H"];
pub const EPS_DELTA_HEADER: [&str; 2] = ["epsilon", "delta"];
pub const BAND_HEADER: [&str; 3] = ["alpha", "lower", "upper"];

fn columns(rows: Vec<Vec<f64>>) -> (Vec<f64>, Vec<f64>) {
    rows.into_iter().map(|r| (r[0], r[1])).unzip()
}

pub fn write_curve<W: Write>(out: W, f: &TradeoffCurve) -> Result<()> {
    let rows: Vec<Vec<f64>> = f.points().into_iter().map(|(a, v)| vec![a, v]).collect();
    write_table(out, &CURVE_HEADER, &rows)
}

pub fn read_curve<R: Read>(input: R) -> Result<TradeoffCurve> {
    let (a, v) = columns(read_table(input, &CURVE_HEADER)?);
    TradeoffCurve::from_samples(Arc::from(a), v)
}

pub fn write_profile<W: Write>(out: W, h: &PrivacyProfile) -> Result<()> {
    let rows: Vec<Vec<f64>> = h.gammas().iter().zip(h.values()).map(|(&g, &v)| vec![g, v]).collect();
    write_table(out, &PROFILE_HEADER, &rows)
}

pub fn read_profile<R: Read>(input: R) -> Result<PrivacyProfile> {
    let (g, v) = columns(read_table(input, &PROFILE_HEADER)?);
    let grid = GammaGrid::from_values(g).ok_or_else(|| Error::Parse("not a valid γ-grid".into()))?;
    PrivacyProfile::new(grid, v)
}

/// `(ε, δ)` rows for `γ = e^ε ≥ 1` on the profile's grid.
pub fn write_epsilon_delta<W: Write>(out: W, h: &PrivacyProfile) -> Result<()> {
    let rows: Vec<Vec<f64>> = h
        .gammas()
        .iter()
        .zip(h.values())
        .filter(|(&g, _)| g >= 1.0)
        .map(|(&g, &v)| vec![g.ln(), v])
        .collect();
    write_table(out, &EPS_DELTA_HEADER, &rows)
}
