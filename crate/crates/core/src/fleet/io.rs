//! Driver scenarios and run logs as CSV.
//!
//! Drivers: `location,domicile,driver_type,equipment,hours_remaining,steps_since_home,count`.
//! Run log: `t,offered,accepted,served,expired,penalty,revenue`.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use super::{DriverAttributes, ResourceVector, StepReport};
use crate::choice_model::RegionId;
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct DriverRow {
    location: u32,
    domicile: u32,
    driver_type: String,
    equipment: String,
    hours_remaining: f64,
    steps_since_home: u32,
    count: u32,
}

pub fn write_drivers_csv<W: Write>(drivers: &ResourceVector, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if drivers.counts.is_empty() {
        out.write_record(["location", "domicile", "driver_type", "equipment", "hours_remaining", "steps_since_home", "count"])?;
    }
    for (a, &n) in &drivers.counts {
        out.serialize(DriverRow {
            location: a.location.0,
            domicile: a.domicile.0,
            driver_type: a.driver_type.name().into(),
            equipment: a.equipment.name().into(),
            hours_remaining: a.hours_remaining,
            steps_since_home: a.steps_since_home,
            count: n,
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_drivers_csv<R: Read>(r: R) -> Result<ResourceVector> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = ResourceVector::default();
    for (i, row) in rdr.deserialize().enumerate() {
        let line = i + 2;
        let row: DriverRow = row.map_err(|e| Error::invalid(format!("drivers line {line}: {e}")))?;
        if !(row.hours_remaining >= 0.0 && row.hours_remaining.is_finite()) {
            return Err(Error::invalid(format!("drivers line {line}: hours must be nonnegative")));
        }
        out.add(
            DriverAttributes {
                location: RegionId(row.location),
                domicile: RegionId(row.domicile),
                driver_type: row.driver_type.parse()?,
                equipment: row.equipment.parse()?,
                hours_remaining: row.hours_remaining,
                steps_since_home: row.steps_since_home,
            },
            row.count,
        );
    }
    Ok(out)
}

#[derive(Serialize)]
struct RunLogRow {
    t: u32,
    offered: u32,
    accepted: u32,
    served: u32,
    expired: u32,
    penalty: f64,
    revenue: f64,
}

pub fn write_run_log<W: Write>(reports: &[StepReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if reports.is_empty() {
        out.write_record(["t", "offered", "accepted", "served", "expired", "penalty", "revenue"])?;
    }
    for r in reports {
        out.serialize(RunLogRow {
            t: r.t,
            offered: r.offered,
            accepted: r.accepted,
            served: r.served,
            expired: r.expired,
            penalty: r.penalty,
            revenue: r.revenue,
        })?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::booking::{Network, Region};
    use crate::fleet::{DriverScenario, FleetParams};
    use crate::rng;

    #[test]
    fn drivers_round_trip() {
        let net = Network::new((0..4).map(|i| Region { id: RegionId(i), x: i as f64, y: 0.0 }).collect(), 1.0).unwrap();
        let r = DriverScenario::default().generate(&net, &FleetParams::default(), &mut rng::stream(3, &[]));
        assert_eq!(r.total(), 50);
        let mut buf = Vec::new();
        write_drivers_csv(&r, &mut buf).unwrap();
        assert_eq!(read_drivers_csv(buf.as_slice()).unwrap(), r);
    }

    #[test]
    fn empty_run_log_is_header_only() {
        let mut buf = Vec::new();
        write_run_log(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,offered,accepted,served,expired,penalty,revenue\n");
    }
}
