use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    evaluate, gen, in_pool, run_allocator, worker_count, write_report, AllocOptions, AllocatorKind,
    ReportRow,
};
use crate::error::{Error, Result};
use crate::graph::{load_graph, TopicGraph};
use crate::model::{
    load_attention, load_campaign, validate_allocation, AdSpec, Attention, Instance,
};
use crate::rng;
use crate::sampling::SampleParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstancePaths {
    pub graph: PathBuf,
    pub campaign: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    WeightedCascade,
    Topical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub nodes: usize,
    pub arcs: usize,
    #[serde(default = "one")]
    pub topics: usize,
    /// Mean of the exponential arc probabilities (topical only).
    #[serde(default = "default_mean")]
    pub mean: f64,
    pub campaign: gen::CampaignSpec,
}

fn one() -> usize {
    1
}

fn default_mean() -> f64 {
    1.0 / 30.0
}

/// A sweep over allocators x attention bounds x penalties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: Option<InstancePaths>,
    pub generator: Option<GeneratorSpec>,
    pub allocators: Vec<String>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_ell")]
    pub ell: f64,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    /// Uniform attention bounds to sweep; ignored when `attention` is set.
    #[serde(default = "default_kappas")]
    pub kappas: Vec<u32>,
    /// Per-user attention file used as the only attention setting.
    pub attention: Option<PathBuf>,
    #[serde(default = "default_eval_runs")]
    pub eval_runs: u64,
    #[serde(default = "default_greedy_runs")]
    pub greedy_runs: u64,
    #[serde(default = "default_pilot")]
    pub pilot_size: u64,
    #[serde(default)]
    pub seed: u64,
    pub output: PathBuf,
    pub workers: Option<usize>,
    /// When false, `wall_ms` is written as 0 so reports are byte-reproducible.
    #[serde(default = "yes")]
    pub record_wall_time: bool,
}

fn default_epsilon() -> f64 {
    0.1
}
fn default_ell() -> f64 {
    1.0
}
fn default_lambdas() -> Vec<f64> {
    vec![0.0]
}
fn default_kappas() -> Vec<u32> {
    vec![1]
}
fn default_eval_runs() -> u64 {
    10_000
}
fn default_greedy_runs() -> u64 {
    1000
}
fn default_pilot() -> u64 {
    10_000
}
fn yes() -> bool {
    true
}

/// Reads a TOML experiment config. Relative paths inside it are taken
/// relative to the config file's directory.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg: ExperimentConfig = toml::from_str(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let fix = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    if let Some(inst) = cfg.instance.as_mut() {
        fix(&mut inst.graph);
        fix(&mut inst.campaign);
    }
    if let Some(a) = cfg.attention.as_mut() {
        fix(a);
    }
    fix(&mut cfg.output);
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(Vec<AllocatorKind>, SampleParams)> {
        if self.eval_runs < 1 {
            return Err(Error::invalid("eval_runs must be at least 1"));
        }
        if self.allocators.is_empty() {
            return Err(Error::invalid("no allocators listed"));
        }
        if self.lambdas.is_empty() || (self.attention.is_none() && self.kappas.is_empty()) {
            return Err(Error::invalid("empty lambda or kappa list"));
        }
        match (&self.instance, &self.generator) {
            (Some(_), Some(_)) => {
                return Err(Error::invalid(
                    "config sets both an instance and a generator",
                ))
            }
            (None, None) => return Err(Error::invalid("config needs an instance or a generator")),
            _ => {}
        }
        let kinds = self
            .allocators
            .iter()
            .map(|a| a.parse())
            .collect::<Result<Vec<AllocatorKind>>>()?;
        Ok((kinds, SampleParams::new(self.epsilon, self.ell)?))
    }

    /// Loads or generates the base graph and campaign.
    pub fn build(&self) -> Result<(TopicGraph, Vec<AdSpec>)> {
        if let Some(p) = &self.instance {
            return Ok((load_graph(&p.graph)?, load_campaign(&p.campaign)?));
        }
        let g = self
            .generator
            .as_ref()
            .ok_or_else(|| Error::invalid("no instance source"))?;
        let graph = match g.kind {
            GeneratorKind::WeightedCascade => {
                gen::gen_weighted_cascade(g.nodes, g.arcs, g.topics, self.seed)?
            }
            GeneratorKind::Topical => {
                gen::gen_topical(g.nodes, g.arcs, g.topics, g.mean, self.seed)?
            }
        };
        let ads = gen::gen_campaign(&g.campaign, g.topics, self.seed)?;
        Ok((graph, ads))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub allocator: AllocatorKind,
    pub kappa: String,
    pub lambda: f64,
    pub total_regret: f64,
    pub budget_regret: f64,
    pub seeds: usize,
    pub distinct_targeted: usize,
    pub allocation_file: PathBuf,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<ReportRow>,
    pub cells: Vec<CellSummary>,
    pub report: PathBuf,
    pub summary: PathBuf,
}

fn fmt_lambda(l: f64) -> String {
    format!("{l}")
}

/// Runs every allocator x kappa x lambda cell, evaluates each allocation by
/// Monte Carlo and writes `report.csv`, `summary.txt` and one allocation file
/// per cell into the output directory.
///
/// Cell `c` seeds its allocator with `(seed, c)`; every cell is evaluated on
/// the same worlds.
pub fn run_sweep(config: &ExperimentConfig, workers: Option<usize>) -> Result<SweepOutcome> {
    let (kinds, params) = config.validate()?;
    let workers = worker_count(workers, config.workers)?;
    let out = &config.output;
    std::fs::create_dir_all(out.join("allocations")).map_err(|e| Error::io(out, e))?;
    let (graph, ads) = config.build()?;
    let base = Instance::new(graph, ads, Attention::Uniform(1), 0.0)?;

    let attention: Vec<(String, Attention)> = match &config.attention {
        Some(p) => vec![("file".into(), load_attention(p, base.node_count(), 1)?)],
        None => config
            .kappas
            .iter()
            .map(|&k| (k.to_string(), Attention::Uniform(k)))
            .collect(),
    };
    let eval_seed = rng::key(&[config.seed, 0x4556_414c]);

    let mut rows = Vec::new();
    let mut cols: [Vec<String>; 3] = Default::default();
    let mut cells = Vec::new();
    let mut c = 0u64;
    for &kind in &kinds {
        for (klabel, att) in &attention {
            for &lambda in &config.lambdas {
                let inst = base.with_constraints(att.clone(), lambda)?;
                let opts = AllocOptions {
                    params,
                    seed: rng::key(&[config.seed, c]),
                    greedy_runs: config.greedy_runs,
                    pilot_size: config.pilot_size,
                };
                let (result, wall) = in_pool(workers, || run_allocator(kind, &inst, &opts))??;
                if !validate_allocation(&inst, &result.allocation).is_empty() {
                    return Err(Error::invalid(format!(
                        "{kind} produced an invalid allocation"
                    )));
                }
                let mut cell_rows = in_pool(workers, || {
                    evaluate(&inst, &result.allocation, config.eval_runs, eval_seed)
                })??;
                for (i, r) in cell_rows.iter_mut().enumerate() {
                    r.allocator = kind.name().to_string();
                    r.theta = result.theta[i];
                    r.wall_ms = if config.record_wall_time { wall } else { 0.0 };
                }
                let file = out.join("allocations").join(format!(
                    "{}_k{}_l{}.txt",
                    kind.name().replace('+', "-plus"),
                    klabel,
                    fmt_lambda(lambda)
                ));
                result.allocation.save(&inst, &file)?;
                let budget_regret: f64 = cell_rows.iter().map(|r| r.budget_regret).sum();
                let seeds = result.allocation.total_seeds();
                cells.push(CellSummary {
                    allocator: kind,
                    kappa: klabel.clone(),
                    lambda,
                    total_regret: budget_regret + lambda * seeds as f64,
                    budget_regret,
                    seeds,
                    distinct_targeted: result.allocation.distinct_targeted(),
                    allocation_file: file,
                });
                for _ in 0..cell_rows.len() {
                    cols[0].push(c.to_string());
                    cols[1].push(klabel.clone());
                    cols[2].push(fmt_lambda(lambda));
                }
                rows.extend(cell_rows);
                c += 1;
            }
        }
    }

    let report = out.join("report.csv");
    let [cell_col, kappa_col, lambda_col] = cols;
    write_report(
        &report,
        &rows,
        &[
            ("cell", cell_col),
            ("kappa", kappa_col),
            ("lambda", lambda_col),
        ],
    )?;
    let summary = out.join("summary.txt");
    std::fs::write(&summary, render_summary(config, &cells)).map_err(|e| Error::io(&summary, e))?;
    Ok(SweepOutcome {
        rows,
        cells,
        report,
        summary,
    })
}

fn render_summary(config: &ExperimentConfig, cells: &[CellSummary]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "adregret {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(
        s,
        "seed {}  epsilon {}  ell {}  eval_runs {}",
        config.seed, config.epsilon, config.ell, config.eval_runs
    );
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<5} {:<13} {:>6} {:>8} {:>14} {:>14} {:>7} {:>9}",
        "cell",
        "allocator",
        "kappa",
        "lambda",
        "total_regret",
        "budget_regret",
        "seeds",
        "distinct"
    );
    for (c, cell) in cells.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:<5} {:<13} {:>6} {:>8} {:>14.6} {:>14.6} {:>7} {:>9}",
            c,
            cell.allocator.name(),
            cell.kappa,
            fmt_lambda(cell.lambda),
            cell.total_regret,
            cell.budget_regret,
            cell.seeds,
            cell.distinct_targeted
        );
    }
    s
}
