//! Offered-load traces: `t,t_prime,origin,destination,equipment,miles`.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use super::{BookingConfig, OfferedLoad};
use crate::choice_model::{Equipment, RegionId};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct TraceRow {
    t: u32,
    t_prime: u32,
    origin: u32,
    destination: u32,
    equipment: String,
    miles: f64,
}

pub fn write_trace_csv<W: Write>(offers: &[OfferedLoad], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if offers.is_empty() {
        out.write_record(["t", "t_prime", "origin", "destination", "equipment", "miles"])?;
    }
    for o in offers {
        out.serialize(TraceRow {
            t: o.offered_at,
            t_prime: o.pickup_at,
            origin: o.attributes.origin.0,
            destination: o.attributes.destination.0,
            equipment: o.attributes.equipment.name().to_string(),
            miles: o.attributes.miles,
        })?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a trace and fills lane statistics from `config`. Errors carry the
/// 1-based data line number.
pub fn read_trace_csv<R: Read>(r: R, config: &BookingConfig) -> Result<Vec<OfferedLoad>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    let spd = config.steps_per_day();
    for (i, row) in rdr.deserialize().enumerate() {
        let line = i + 2;
        let row: TraceRow = row.map_err(|e| Error::invalid(format!("trace line {line}: {e}")))?;
        let equipment: Equipment = row.equipment.parse().map_err(|e| Error::invalid(format!("trace line {line}: {e}")))?;
        let (o, d) = (RegionId(row.origin), RegionId(row.destination));
        if !(config.network.contains(o) && config.network.contains(d)) {
            return Err(Error::invalid(format!("trace line {line}: unknown region")));
        }
        if row.t_prime <= row.t || row.t_prime - row.t > config.max_lag_steps() {
            return Err(Error::invalid(format!("trace line {line}: pickup lag outside (0, {}]", config.max_lag_steps())));
        }
        let attributes = config.attributes(o, d, equipment, row.miles, row.t, row.t_prime);
        attributes.validate(config.max_lag_steps()).map_err(|e| Error::invalid(format!("trace line {line}: {e}")))?;
        out.push(OfferedLoad { attributes, offered_at: row.t, pickup_at: row.t_prime, lag_days: (row.t_prime - row.t) / spd });
    }
    Ok(out)
}
