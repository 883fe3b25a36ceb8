//! JSON and CSV layouts for registries and weights.
//!
//! ```text
//! registry: {"version": 1, "origin_indicators": [..], "destination_indicators": [..]}
//! weights:  {"version": 1, "side": "Carrier", "weights": [..]}
//! ```
//!
//! The weights CSV has one header row of column names (see
//! [`FeatureRegistry::column_names`]) followed by one row of values.

use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use super::{CandidateModel, FeatureRegistry, RegionId, Side, WeightVector};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct RegistryFile {
    version: u32,
    origin_indicators: Vec<RegionId>,
    destination_indicators: Vec<RegionId>,
}

#[derive(Serialize, Deserialize)]
struct WeightsFile {
    version: u32,
    side: Side,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CandidatesFile {
    version: u32,
    candidates: Vec<CandidateModel>,
}

fn check_version(v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(Error::invalid(format!("unsupported format version {v}, expected {FORMAT_VERSION}")));
    }
    Ok(())
}

pub fn write_registry<W: Write>(registry: &FeatureRegistry, w: W) -> Result<()> {
    let file = RegistryFile {
        version: FORMAT_VERSION,
        origin_indicators: registry.origin_indicators().to_vec(),
        destination_indicators: registry.destination_indicators().to_vec(),
    };
    serde_json::to_writer_pretty(w, &file)?;
    Ok(())
}

pub fn read_registry<R: Read>(r: R) -> Result<FeatureRegistry> {
    let file: RegistryFile = serde_json::from_reader(r)?;
    check_version(file.version)?;
    FeatureRegistry::new(file.origin_indicators, file.destination_indicators)
}

pub fn write_weights<W: Write>(weights: &WeightVector, w: W) -> Result<()> {
    let file = WeightsFile { version: FORMAT_VERSION, side: weights.side, weights: weights.weights.clone() };
    serde_json::to_writer_pretty(w, &file)?;
    Ok(())
}

pub fn read_weights<R: Read>(r: R) -> Result<WeightVector> {
    let file: WeightsFile = serde_json::from_reader(r)?;
    check_version(file.version)?;
    let w = WeightVector::new(file.weights, file.side);
    if !w.is_finite() {
        return Err(Error::invalid("weights file contains non-finite values"));
    }
    Ok(w)
}

pub fn write_candidates<W: Write>(candidates: &[CandidateModel], w: W) -> Result<()> {
    let file = CandidatesFile { version: FORMAT_VERSION, candidates: candidates.to_vec() };
    serde_json::to_writer_pretty(w, &file)?;
    Ok(())
}

pub fn read_candidates<R: Read>(r: R) -> Result<Vec<CandidateModel>> {
    let file: CandidatesFile = serde_json::from_reader(r)?;
    check_version(file.version)?;
    file.candidates
        .into_iter()
        .map(|c| CandidateModel::new(c.alpha, c.beta))
        .collect()
}

pub fn write_weights_csv<W: Write>(registry: &FeatureRegistry, weights: &WeightVector, w: W) -> Result<()> {
    let names = registry.column_names(weights.side);
    if names.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: names.len(), got: weights.len(), context: "weights csv" });
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(&names)?;
    out.write_record(weights.weights.iter().map(|v| v.to_string()))?;
    out.flush()?;
    Ok(())
}

pub fn read_weights_csv<R: Read>(registry: &FeatureRegistry, side: Side, r: R) -> Result<WeightVector> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != registry.column_names(side) {
        return Err(Error::invalid("weights csv header does not match the registry layout"));
    }
    let row = rdr
        .records()
        .next()
        .ok_or_else(|| Error::invalid("weights csv has no value row"))??;
    let weights = row
        .iter()
        .map(|v| v.trim().parse::<f64>().map_err(|e| Error::invalid(format!("bad weight {v:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(WeightVector::new(weights, side))
}

pub fn load_registry(path: &Path) -> Result<FeatureRegistry> {
    read_registry(BufReader::new(File::open(path)?))
}

pub fn load_weights(path: &Path) -> Result<WeightVector> {
    read_weights(BufReader::new(File::open(path)?))
}
