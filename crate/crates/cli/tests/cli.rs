use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn adregret(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adregret"))
        .args(args)
        .env_remove("ADREGRET_WORKERS")
        .output()
        .unwrap()
}

fn toy_args<'a>(graph: &'a str, campaign: &'a str) -> Vec<&'a str> {
    vec!["--graph", graph, "--campaign", campaign]
}

#[test]
fn oracle_reports_exact_clicks() {
    let (g, c, a) = (
        fixture("toy_graph.txt"),
        fixture("toy_campaign.json"),
        fixture("toy_allocation_a.txt"),
    );
    let mut args = vec!["oracle"];
    args.extend(toy_args(g.to_str().unwrap(), c.to_str().unwrap()));
    args.extend(["--allocation", a.to_str().unwrap()]);
    let out = adregret(&args);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text
        .lines()
        .find(|l| l.starts_with("total clicks"))
        .unwrap();
    let clicks: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!((clicks - 5.544).abs() < 5e-4, "{text}");
}

#[test]
fn allocate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (g, c) = (fixture("toy_graph.txt"), fixture("toy_campaign.json"));
    let mut files = Vec::new();
    for (k, workers) in ["1", "3"].into_iter().enumerate() {
        let path = dir.path().join(format!("alloc{k}.txt"));
        let mut args = vec![
            "allocate",
            "--algo",
            "tirm",
            "--seed",
            "7",
            "--epsilon",
            "0.2",
            "--workers",
            workers,
        ];
        args.extend(toy_args(g.to_str().unwrap(), c.to_str().unwrap()));
        args.extend(["--out", path.to_str().unwrap()]);
        let out = adregret(&args);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        files.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn evaluate_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (g, c, a) = (
        fixture("toy_graph.txt"),
        fixture("toy_campaign.json"),
        fixture("toy_allocation_b.txt"),
    );
    let csv = dir.path().join("r.csv");
    let mut args = vec![
        "evaluate",
        "--runs",
        "2000",
        "--allocation",
        a.to_str().unwrap(),
    ];
    args.extend(toy_args(g.to_str().unwrap(), c.to_str().unwrap()));
    args.extend(["--out", csv.to_str().unwrap()]);
    assert!(adregret(&args).status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("allocator,ad,budget"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn gen_then_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (g, c) = (d.join("g.txt"), d.join("c.json"));
    let out = adregret(&[
        "gen",
        "--kind",
        "topical",
        "--nodes",
        "200",
        "--arcs",
        "800",
        "--topics",
        "2",
        "--ads",
        "2",
        "--budget",
        "2,4",
        "--ctp",
        "0.2,0.4",
        "--graph-out",
        g.to_str().unwrap(),
        "--campaign-out",
        c.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let cfg = d.join("sweep.toml");
    std::fs::write(
        &cfg,
        "allocators = [\"myopic\", \"tirm\"]\nepsilon = 0.3\nkappas = [1, 2]\neval_runs = 500\noutput = \"out\"\n\
         record_wall_time = false\n[instance]\ngraph = \"g.txt\"\ncampaign = \"c.json\"\n",
    )
    .unwrap();
    let out = adregret(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = std::fs::read_to_string(d.join("out/report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 2 * 2 * 2);
}

#[test]
fn missing_graph_is_a_config_error() {
    let c = fixture("toy_campaign.json");
    let out = adregret(&[
        "oracle",
        "--graph",
        "/no/such/graph.txt",
        "--campaign",
        c.to_str().unwrap(),
        "--allocation",
        "x",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/graph.txt"));
}

#[test]
fn bad_epsilon_is_a_config_error() {
    let (g, c) = (fixture("toy_graph.txt"), fixture("toy_campaign.json"));
    let mut args = vec![
        "allocate",
        "--algo",
        "tirm",
        "--epsilon",
        "1.5",
        "--out",
        "/tmp/unused",
    ];
    args.extend(toy_args(g.to_str().unwrap(), c.to_str().unwrap()));
    assert_eq!(adregret(&args).status.code(), Some(2));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(
        adregret(&["allocate", "--frobnicate"]).status.code(),
        Some(2)
    );
    assert_eq!(
        adregret(&["allocate", "--algo", "irie"]).status.code(),
        Some(2)
    );
}

#[test]
fn every_subcommand_has_help() {
    for sub in [
        "gen",
        "allocate",
        "evaluate",
        "sweep",
        "oracle",
        "check-bounds",
    ] {
        let out = adregret(&[sub, "--help"]);
        assert!(out.status.success(), "{sub}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    }
}
