use std::path::PathBuf;
use std::process::ExitCode;

use adregret::alloc::{check_bounds, greedy, BoundsCap};
use adregret::graph::load_graph;
use adregret::harness::{
    evaluate, gen_campaign, gen_topical, gen_weighted_cascade, in_pool, load_config, run_allocator,
    run_sweep, worker_count, write_report, AllocOptions, AllocatorKind, CampaignSpec,
};
use adregret::model::{
    load_attention, load_campaign, save_campaign, Allocation, Attention, Instance,
};
use adregret::oracle::{allocation_revenues, regret_total, SpreadOracle};
use adregret::sampling::SampleParams;
use adregret::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Seed allocation for competing advertisers on a social network.
#[derive(Parser)]
#[command(name = "adregret", version)]
struct Cli {
    /// Worker threads (falls back to ADREGRET_WORKERS, then all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random graph and, optionally, a campaign.
    Gen(GenArgs),
    /// Run one allocator and write the allocation file.
    Allocate(AllocateArgs),
    /// Monte-Carlo evaluation of an allocation, written as CSV.
    Evaluate(EvaluateArgs),
    /// Run an experiment sweep from a TOML config.
    Sweep(SweepArgs),
    /// Exact expected clicks and regret of an allocation (tiny graphs only).
    Oracle(OracleArgs),
    /// Run exact Greedy and compare its regret with the brute-force optimum.
    CheckBounds(BoundsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphKind {
    WeightedCascade,
    Topical,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GraphKind,
    #[arg(long)]
    nodes: usize,
    #[arg(long)]
    arcs: usize,
    #[arg(long, default_value_t = 1)]
    topics: usize,
    /// Mean arc probability (topical graphs).
    #[arg(long, default_value_t = 1.0 / 30.0)]
    mean: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    graph_out: PathBuf,
    #[arg(long)]
    campaign_out: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    ads: usize,
    /// Budget range as `lo,hi`.
    #[arg(long, value_parser = parse_range, default_value = "20,30")]
    budget: (f64, f64),
    #[arg(long, value_parser = parse_range, default_value = "1,1")]
    cpe: (f64, f64),
    #[arg(long, value_parser = parse_range, default_value = "0.01,0.03")]
    ctp: (f64, f64),
    #[arg(long, default_value_t = 0.7)]
    focus: f64,
    #[arg(long, default_value_t = 0.0)]
    boost_beta: f64,
}

#[derive(Args)]
struct InstanceArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    campaign: PathBuf,
    /// Uniform attention bound.
    #[arg(long, default_value_t = 1, conflicts_with = "attention")]
    kappa: u32,
    /// Per-user attention file.
    #[arg(long)]
    attention: Option<PathBuf>,
    /// Seed-count penalty.
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
}

impl InstanceArgs {
    fn load(&self) -> Result<Instance> {
        let graph = load_graph(&self.graph)?;
        let ads = load_campaign(&self.campaign)?;
        let attention = match &self.attention {
            Some(p) => load_attention(p, graph.node_count(), self.kappa)?,
            None => Attention::Uniform(self.kappa),
        };
        Instance::new(graph, ads, attention, self.lambda)
    }
}

#[derive(Args)]
struct AllocateArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, value_parser = parse_kind)]
    algo: AllocatorKind,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    ell: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte-Carlo runs per Greedy evaluation.
    #[arg(long, default_value_t = 1000)]
    greedy_runs: u64,
    /// RR sets used to estimate the spread lower bound.
    #[arg(long, default_value_t = 10_000)]
    pilot_size: u64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    allocation: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    runs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Label written in the allocator column.
    #[arg(long, default_value = "file")]
    label: String,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    allocation: PathBuf,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = 10)]
    max_nodes: usize,
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected `lo,hi`")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    if lo > hi {
        return Err(format!("empty range {lo},{hi}"));
    }
    Ok((lo, hi))
}

fn parse_kind(s: &str) -> std::result::Result<AllocatorKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn gen(a: &GenArgs) -> Result<()> {
    let graph = match a.kind {
        GraphKind::WeightedCascade => gen_weighted_cascade(a.nodes, a.arcs, a.topics, a.seed)?,
        GraphKind::Topical => gen_topical(a.nodes, a.arcs, a.topics, a.mean, a.seed)?,
    };
    graph.save(&a.graph_out)?;
    println!(
        "graph: {} nodes, {} arcs -> {}",
        graph.node_count(),
        graph.arc_count(),
        a.graph_out.display()
    );
    if let Some(path) = &a.campaign_out {
        let spec = CampaignSpec {
            ads: a.ads,
            budget: a.budget,
            cpe: a.cpe,
            ctp: a.ctp,
            focus: a.focus,
            boost_beta: a.boost_beta,
        };
        save_campaign(&gen_campaign(&spec, a.topics, a.seed)?, path)?;
        println!("campaign: {} ads -> {}", a.ads, path.display());
    }
    Ok(())
}

fn allocate(a: &AllocateArgs) -> Result<()> {
    let inst = a.instance.load()?;
    let opts = AllocOptions {
        params: SampleParams::new(a.epsilon, a.ell)?,
        seed: a.seed,
        greedy_runs: a.greedy_runs,
        pilot_size: a.pilot_size,
    };
    let (result, ms) = run_allocator(a.algo, &inst, &opts)?;
    result.allocation.save(&inst, &a.out)?;
    println!(
        "{}: {} seeds, {} users targeted, stopped on {}, {:.1} ms",
        a.algo,
        result.allocation.total_seeds(),
        result.allocation.distinct_targeted(),
        result.termination.as_str(),
        ms
    );
    for i in 0..inst.ad_count() {
        let theta = result.theta.get(i).copied().unwrap_or(0);
        println!(
            "  ad {}: {} seeds, estimated revenue {:.4} of budget {:.4}{}",
            inst.ad(i).id,
            result.allocation.seeds(i).len(),
            result.revenues[i],
            inst.budget(i),
            if theta > 0 {
                format!(", theta {theta}")
            } else {
                String::new()
            }
        );
    }
    Ok(())
}

fn evaluate_cmd(a: &EvaluateArgs) -> Result<()> {
    let inst = a.instance.load()?;
    let alloc = Allocation::load(&inst, &a.allocation)?;
    let mut rows = evaluate(&inst, &alloc, a.runs, a.seed)?;
    rows.iter_mut().for_each(|r| r.allocator = a.label.clone());
    write_report(&a.out, &rows, &[])?;
    let budget: f64 = rows.iter().map(|r| r.budget_regret).sum();
    let total = budget + inst.lambda() * alloc.total_seeds() as f64;
    println!(
        "regret {total:.6} (budget part {budget:.6}) -> {}",
        a.out.display()
    );
    Ok(())
}

fn oracle(a: &OracleArgs) -> Result<()> {
    let inst = a.instance.load()?;
    let alloc = Allocation::load(&inst, &a.allocation)?;
    let rev = allocation_revenues(&inst, &alloc, SpreadOracle::Exact)?;
    let report = regret_total(&inst, &alloc, &rev);
    let mut clicks = 0.0;
    for (i, r) in report.per_ad.iter().enumerate() {
        let c = r.revenue / inst.cpe(i);
        clicks += c;
        println!(
            "ad {}: clicks {:.6} revenue {:.6} budget {:.6} regret {:.6}",
            r.ad_id, c, r.revenue, r.budget, r.regret
        );
    }
    println!("total clicks {clicks:.6}");
    println!("total regret {:.6}", report.total);
    Ok(())
}

fn bounds(a: &BoundsArgs) -> Result<()> {
    let inst = a.instance.load()?;
    let result = greedy(&inst, SpreadOracle::Exact)?;
    let cap = BoundsCap {
        max_nodes: a.max_nodes,
        ..BoundsCap::default()
    };
    let report = check_bounds(&inst, &result, &cap)?;
    println!("greedy regret {:.6}", report.regret);
    println!("optimal regret {:.6}", report.optimal_regret);
    println!("p_max {:.6}", report.p_max);
    for (name, c) in report.checks() {
        println!("{name}: {} ({})", c.verdict.as_str(), c.note);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Command::Sweep(a) = &cli.command {
        let cfg = load_config(&a.config)?;
        let out = run_sweep(&cfg, cli.workers)?;
        for c in &out.cells {
            println!(
                "{} kappa={} lambda={}: regret {:.6}, {} seeds",
                c.allocator, c.kappa, c.lambda, c.total_regret, c.seeds
            );
        }
        println!("report -> {}", out.report.display());
        return Ok(());
    }
    let workers = worker_count(cli.workers, None)?;
    in_pool(workers, || match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Allocate(a) => allocate(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Oracle(a) => oracle(a),
        Command::CheckBounds(a) => bounds(a),
        Command::Sweep(_) => unreachable!(),
    })?
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
