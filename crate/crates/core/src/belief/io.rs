//! Belief snapshots (JSON) and observation histories (CSV).

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use super::{BeliefState, ObservationRecord};
use crate::choice_model::{Equipment, LoadAttributes, RegionId, Response};
use crate::error::{Error, Result};

/// Candidates are stored separately (see `choice_model::io`); the
/// snapshot refers to that file by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefSnapshot {
    pub version: u32,
    pub candidates_file: String,
    pub q: Vec<f64>,
    pub r: u32,
    pub n: u64,
}

impl BeliefSnapshot {
    pub fn of(state: &BeliefState, candidates_file: impl Into<String>) -> Self {
        BeliefSnapshot {
            version: crate::choice_model::io::FORMAT_VERSION,
            candidates_file: candidates_file.into(),
            q: state.q().to_vec(),
            r: state.resample_count(),
            n: state.n(),
        }
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        Ok(serde_json::from_reader(r)?)
    }
}

#[derive(Serialize, Deserialize)]
struct HistoryRow {
    n: u64,
    origin: u32,
    destination: u32,
    equipment: String,
    miles: f64,
    p: f64,
    y_c: i8,
    y_s: i8,
}

pub fn write_history_csv<W: Write>(history: &[ObservationRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for o in history {
        out.serialize(HistoryRow {
            n: o.n,
            origin: o.b.origin.0,
            destination: o.b.destination.0,
            equipment: o.b.equipment.name().to_string(),
            miles: o.b.miles,
            p: o.p,
            y_c: o.y_c.as_i8(),
            y_s: o.y_s.as_i8(),
        })?;
    }
    if history.is_empty() {
        out.write_record(["n", "origin", "destination", "equipment", "miles", "p", "y_c", "y_s"])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a history back. Columns not stored in the CSV (lane statistics,
/// pickup times) come back as zero.
pub fn read_history_csv<R: Read>(r: R) -> Result<Vec<ObservationRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: HistoryRow = row?;
        let equipment: Equipment = row.equipment.parse()?;
        if !(row.p.is_finite() && row.p > 0.0) {
            return Err(Error::invalid(format!("history row {}: bad price {}", row.n, row.p)));
        }
        out.push(ObservationRecord {
            n: row.n,
            b: LoadAttributes {
                origin: RegionId(row.origin),
                destination: RegionId(row.destination),
                equipment,
                miles: row.miles,
                call_in: 0,
                pickup: 0,
                lane_daily_load: 0.0,
                dest_daily_demand: 0.0,
            },
            p: row.p,
            y_c: Response::from_sign(row.y_c as i64)?,
            y_s: Response::from_sign(row.y_s as i64)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_round_trip_and_empty_header() {
        let mut buf = Vec::new();
        write_history_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n,origin,destination,equipment,miles,p,y_c,y_s\n");

        let rec = ObservationRecord {
            n: 4,
            b: LoadAttributes {
                origin: RegionId(3),
                destination: RegionId(8),
                equipment: Equipment::Rgn,
                miles: 412.5,
                call_in: 0,
                pickup: 0,
                lane_daily_load: 0.0,
                dest_daily_demand: 0.0,
            },
            p: 2.35,
            y_c: Response::Accept,
            y_s: Response::Reject,
        };
        let mut buf = Vec::new();
        write_history_csv(std::slice::from_ref(&rec), &mut buf).unwrap();
        assert_eq!(read_history_csv(buf.as_slice()).unwrap(), vec![rec]);
    }
}
