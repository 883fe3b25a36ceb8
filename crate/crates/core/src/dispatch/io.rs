//! `v̄` tables as CSV: `t_bucket,location,equipment,value`.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use super::{ValueFunctionApprox, VfaKey};
use crate::choice_model::RegionId;
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Row {
    t_bucket: u32,
    location: u32,
    equipment: String,
    value: f64,
}

pub fn write_vfa_csv<W: Write>(vfa: &ValueFunctionApprox, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if vfa.entries().is_empty() {
        out.write_record(["t_bucket", "location", "equipment", "value"])?;
    }
    for (k, &v) in vfa.entries() {
        out.serialize(Row { t_bucket: k.bucket, location: k.location.0, equipment: k.equipment.name().into(), value: v })?;
    }
    out.flush()?;
    Ok(())
}

/// Warm start: loads entries into a fresh table with the given shape.
pub fn read_vfa_csv<R: Read>(r: R, buckets: u32, theta_step: f64) -> Result<ValueFunctionApprox> {
    let mut vfa = ValueFunctionApprox::new(buckets, theta_step)?;
    let mut rdr = csv::Reader::from_reader(r);
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::invalid(format!("v̄ csv line {line}: {e}")))?;
        let equipment = row.equipment.parse().map_err(|e| Error::invalid(format!("v̄ csv line {line}: {e}")))?;
        vfa.set(VfaKey { bucket: row.t_bucket, location: RegionId(row.location), equipment }, row.value)
            .map_err(|e| Error::invalid(format!("v̄ csv line {line}: {e}")))?;
    }
    Ok(vfa)
}
