use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Allocation, Instance};
use crate::oracle::mc_spread;
use crate::rng;

pub const REPORT_HEADER: &str =
    "allocator,ad,budget,revenue,stderr,budget_regret,seeds,theta,wall_ms";

/// Monte-Carlo evaluation of one ad's seed set.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub allocator: String,
    pub ad: u32,
    pub budget: f64,
    pub revenue: f64,
    pub stderr: f64,
    pub budget_regret: f64,
    pub seeds: usize,
    pub theta: u64,
    pub wall_ms: f64,
}

/// Per-ad MC revenue of `alloc`. Ads are simulated independently; ad `i`'s
/// worlds are keyed by `(seed, ad id)`. `allocator`, `theta` and `wall_ms`
/// are left for the caller.
pub fn evaluate(
    instance: &Instance,
    alloc: &Allocation,
    runs: u64,
    seed: u64,
) -> Result<Vec<ReportRow>> {
    if runs == 0 {
        return Err(Error::invalid("evaluation needs at least one run"));
    }
    if alloc.ad_count() != instance.ad_count() || alloc.node_count() != instance.node_count() {
        return Err(Error::invalid("allocation does not match the instance"));
    }
    Ok((0..instance.ad_count())
        .map(|i| {
            let id = instance.ad(i).id;
            let s = mc_spread(
                instance.view(i),
                instance.ctps(i),
                alloc.seeds(i),
                runs,
                rng::key(&[seed, id as u64]),
            );
            let cpe = instance.cpe(i);
            let revenue = cpe * s.mean;
            ReportRow {
                allocator: String::new(),
                ad: id,
                budget: instance.budget(i),
                revenue,
                stderr: cpe * s.stderr,
                budget_regret: (instance.budget(i) - revenue).abs(),
                seeds: alloc.seeds(i).len(),
                theta: 0,
                wall_ms: 0.0,
            }
        })
        .collect())
}

/// Writes rows as CSV. `extra` columns (name, per-row values) are prepended.
pub fn write_report(
    path: impl AsRef<Path>,
    rows: &[ReportRow],
    extra: &[(&str, Vec<String>)],
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = extra.iter().map(|(name, _)| *name).collect();
    header.extend(REPORT_HEADER.split(','));
    w.write_record(&header)?;
    for (k, r) in rows.iter().enumerate() {
        let mut rec: Vec<String> = extra.iter().map(|(_, vals)| vals[k].clone()).collect();
        rec.extend([
            r.allocator.clone(),
            r.ad.to_string(),
            r.budget.to_string(),
            r.revenue.to_string(),
            r.stderr.to_string(),
            r.budget_regret.to_string(),
            r.seeds.to_string(),
            r.theta.to_string(),
            format!("{:.3}", r.wall_ms),
        ]);
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
