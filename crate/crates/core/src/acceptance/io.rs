//! Coverage maps as CSV: `t_prime,origin,destination,equipment,miles_bucket,rho_bar`.

use std::io::Write;

use super::CoverageEstimate;
use crate::error::Result;

pub fn write_coverage_csv<W: Write>(coverage: &CoverageEstimate, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t_prime", "origin", "destination", "equipment", "miles_bucket", "rho_bar"])?;
    for ((t, k), rho) in &coverage.rho_bar {
        out.write_record([
            t.to_string(),
            k.origin.0.to_string(),
            k.destination.0.to_string(),
            k.equipment.name().to_string(),
            k.miles_bucket.to_string(),
            rho.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
