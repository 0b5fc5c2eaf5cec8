//! Profile CSV: `prosumer_id,timestamp,load_kwh,generation_kwh`.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{EnergyProfile, ProfileError};

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    prosumer_id: String,
    timestamp: String,
    load_kwh: f64,
    generation_kwh: f64,
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    s.parse::<NaiveDateTime>()
        .ok()
        .or_else(|| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M").ok())
        .or_else(|| DateTime::parse_from_rfc3339(s).ok().map(|d| d.naive_utc()))
}

pub fn load_profiles_csv(path: impl AsRef<Path>) -> Result<Vec<EnergyProfile>, ProfileError> {
    let file = std::fs::File::open(path.as_ref())?;
    read_profiles_csv(file)
}

/// Rows are grouped by prosumer in order of first appearance; each
/// prosumer's rows must be consecutive hours. Row numbers in errors are file
/// line numbers (the header is line 1).
pub fn read_profiles_csv(reader: impl Read) -> Result<Vec<EnergyProfile>, ProfileError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for required in ["prosumer_id", "timestamp", "load_kwh", "generation_kwh"] {
        if !headers.iter().any(|h| h == required) {
            return Err(ProfileError::Row { row: 1, reason: format!("missing column {required}") });
        }
    }

    let mut profiles: Vec<EnergyProfile> = Vec::new();
    let mut last_ts: Vec<NaiveDateTime> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let row_no = record.position().map_or(0, |p| p.line());
        let row: Row = record
            .deserialize(Some(&headers))
            .map_err(|e| ProfileError::Row { row: row_no, reason: format!("malformed row: {e}") })?;
        let ts = parse_timestamp(&row.timestamp)
            .ok_or_else(|| ProfileError::Row { row: row_no, reason: format!("bad timestamp {:?}", row.timestamp) })?;
        for (name, v) in [("load_kwh", row.load_kwh), ("generation_kwh", row.generation_kwh)] {
            if !v.is_finite() || v < 0.0 {
                return Err(ProfileError::Row { row: row_no, reason: format!("{name} must be a non-negative number, got {v}") });
            }
        }
        match profiles.iter().position(|p| p.prosumer_id == row.prosumer_id) {
            Some(i) => {
                let expected = last_ts[i] + Duration::hours(1);
                if ts > expected {
                    return Err(ProfileError::Row { row: row_no, reason: format!("gap: expected {expected}, found {ts}") });
                }
                if ts != expected {
                    return Err(ProfileError::Row { row: row_no, reason: format!("non-hourly cadence: expected {expected}, found {ts}") });
                }
                profiles[i].load.push(row.load_kwh);
                profiles[i].generation.push(row.generation_kwh);
                last_ts[i] = ts;
            }
            None => {
                profiles.push(EnergyProfile {
                    prosumer_id: row.prosumer_id,
                    start: ts,
                    load: vec![row.load_kwh],
                    generation: vec![row.generation_kwh],
                });
                last_ts.push(ts);
            }
        }
    }

    let first = profiles.first().ok_or(ProfileError::Empty)?;
    let (start, len) = (first.start, first.len());
    if let Some(p) = profiles.iter().find(|p| p.start != start || p.len() != len) {
        return Err(ProfileError::Misaligned(format!(
            "{} covers {} hours from {}, expected {} hours from {}",
            p.prosumer_id,
            p.len(),
            p.start,
            len,
            start
        )));
    }
    Ok(profiles)
}

pub fn write_profiles_csv(writer: impl Write, profiles: &[EnergyProfile]) -> Result<(), ProfileError> {
    let mut w = csv::Writer::from_writer(writer);
    for p in profiles {
        p.validate()?;
        for t in 0..p.len() {
            w.serialize(Row {
                prosumer_id: p.prosumer_id.clone(),
                timestamp: p.timestamp(t).format(TIMESTAMP_FORMAT).to_string(),
                load_kwh: p.load[t],
                generation_kwh: p.generation[t],
            })?;
        }
    }
    w.flush()?;
    Ok(())
}
