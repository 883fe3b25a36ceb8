//! Metric CSVs: one trace file per policy plus `summary.csv`.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::bandit::BanditResult;
use super::fleet::FleetResult;
use crate::error::Result;

/// Sample mean and standard error (0 for fewer than two values).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub policy: String,
    pub metric: String,
    pub mean: f64,
    pub se: f64,
    pub reps: usize,
}

impl SummaryRow {
    fn of(policy: &str, metric: &str, xs: &[f64]) -> Self {
        let (mean, se) = mean_se(xs);
        SummaryRow { policy: policy.into(), metric: metric.into(), mean, se, reps: xs.len() }
    }
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn write_summary(rows: &[SummaryRow], dir: &Path) -> Result<PathBuf> {
    let path = dir.join("summary.csv");
    let mut w = writer(&path)?;
    w.write_record(["policy", "metric", "mean", "se", "reps"])?;
    for r in rows {
        w.write_record([r.policy.clone(), r.metric.clone(), r.mean.to_string(), r.se.to_string(), r.reps.to_string()])?;
    }
    w.flush()?;
    Ok(path)
}

/// Bandit traces: `rep,step,context,bid,y_c,y_s,regret,cum_regret`.
/// Summary metrics: `avg_regret` (`R(N)/N`) and `cum_regret`.
pub fn emit_bandit_metrics(result: &BanditResult, dir: &Path) -> Result<(Vec<PathBuf>, Vec<SummaryRow>)> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut summary = Vec::new();
    for p in &result.policies {
        let path = dir.join(format!("{}.csv", p.policy));
        let mut w = writer(&path)?;
        w.write_record(["rep", "step", "context", "bid", "y_c", "y_s", "regret", "cum_regret"])?;
        for rep in &p.reps {
            for s in &rep.steps {
                w.write_record([
                    rep.rep.to_string(),
                    s.step.to_string(),
                    s.context.clone(),
                    s.bid.to_string(),
                    s.y_c.as_i8().to_string(),
                    s.y_s.as_i8().to_string(),
                    s.regret.to_string(),
                    s.cum_regret.to_string(),
                ])?;
            }
        }
        w.flush()?;
        files.push(path);
        let avg: Vec<f64> = p.reps.iter().map(|r| r.steps.last().map_or(0.0, |s| s.cum_regret / r.steps.len() as f64)).collect();
        let cum: Vec<f64> = p.reps.iter().map(|r| r.steps.last().map_or(0.0, |s| s.cum_regret)).collect();
        let name = p.policy.as_str();
        summary.push(SummaryRow::of(name, "avg_regret", &avg));
        summary.push(SummaryRow::of(name, "cum_regret", &cum));
    }
    files.push(write_summary(&summary, dir)?);
    Ok((files, summary))
}

/// Fleet traces: `rep,batch,index,context,bid,y_c,y_s,cum_revenue,cum_accepts`.
/// Summary metrics: `avg_revenue` (`G(n)/n`), `accept_rate`, `carrier_rate`,
/// `shipper_rate`, `served`, `expired`.
pub fn emit_fleet_metrics(result: &FleetResult, dir: &Path) -> Result<(Vec<PathBuf>, Vec<SummaryRow>)> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut summary = Vec::new();
    for p in &result.policies {
        let path = dir.join(format!("{}.csv", p.policy));
        let mut w = writer(&path)?;
        w.write_record(["rep", "batch", "index", "context", "bid", "y_c", "y_s", "cum_revenue", "cum_accepts"])?;
        for rep in &p.reps {
            for s in &rep.steps {
                w.write_record([
                    rep.rep.to_string(),
                    s.batch.to_string(),
                    s.index.to_string(),
                    s.context.clone(),
                    s.bid.to_string(),
                    s.y_c.as_i8().to_string(),
                    s.y_s.as_i8().to_string(),
                    s.cum_revenue.to_string(),
                    s.cum_accepts.to_string(),
                ])?;
            }
        }
        w.flush()?;
        files.push(path);
        let per_rep = |f: &dyn Fn(&super::fleet::FleetRep) -> f64| -> Vec<f64> { p.reps.iter().map(f).collect() };
        let n = |r: &super::fleet::FleetRep| r.steps.len().max(1) as f64;
        let name = p.policy.as_str();
        summary.push(SummaryRow::of(name, "avg_revenue", &per_rep(&|r| r.steps.last().map_or(0.0, |s| s.cum_revenue) / n(r))));
        summary.push(SummaryRow::of(name, "accept_rate", &per_rep(&|r| r.steps.last().map_or(0, |s| s.cum_accepts) as f64 / n(r))));
        summary.push(SummaryRow::of(name, "carrier_rate", &per_rep(&|r| r.steps.iter().filter(|s| s.y_c.is_accept()).count() as f64 / n(r))));
        summary.push(SummaryRow::of(name, "shipper_rate", &per_rep(&|r| r.steps.iter().filter(|s| s.y_s.is_accept()).count() as f64 / n(r))));
        summary.push(SummaryRow::of(name, "served", &per_rep(&|r| r.reports.iter().map(|x| x.served as f64).sum())));
        summary.push(SummaryRow::of(name, "expired", &per_rep(&|r| r.reports.iter().map(|x| x.expired as f64).sum())));
    }
    files.push(write_summary(&summary, dir)?);
    Ok((files, summary))
}
