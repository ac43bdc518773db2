//! `stabclust` command-line front end.
//!
//! Exit status: 0 on success, 2 on a usage error, 1 on a runtime error.

mod output;

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use stabclust::experiment::{
    run_experiment, summarize, write_records_csv, write_report_json, ExperimentGrid, ExperimentReport,
};
use stabclust::generators::sample_gmm;
use stabclust::io::{read_table, write_matrix_csv, write_points_csv, Table};
use stabclust::local_search::best_of_restarts;
use stabclust::lp::lp_string;
use stabclust::oracle::{binomial, exact_opt, OracleKind, DEFAULT_COMBINATION_CAP, DEFAULT_NODE_CAP};
use stabclust::spectral::{spectral_ls, NetMode, SpectralOptions};
use stabclust::stability::{OptBudget, OptProvenance};
use stabclust::{
    local_search, measure_beta, measure_gamma, orss_ratio, resilience_falsifier, structure_report,
    verify_local_optima, Center, Error, GmmConfig, Init, Instance, LabeledClustering, LbInstance, Point,
    SearchConfig, SearchTrace, Solution, StabilityReport, Strategy,
};

use output::{render, write_text, Format};

#[derive(Parser)]
#[command(
    name = "stabclust",
    version,
    about = "Local search clustering and stability analysis",
    arg_required_else_help = true
)]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Upper bound on worker threads.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    workers: u64,
    /// 0 prints results only; higher values add progress on stderr.
    #[arg(long, global = true, default_value_t = 0)]
    verbosity: u8,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run multi-swap local search on an instance.
    Solve(SolveArgs),
    /// Spectral pipeline for Euclidean k-means on point input.
    SpectralSolve(SpectralArgs),
    /// Measure distribution stability, spectral separation and the OPT_k/OPT_(k-1) ratio.
    Stability(StabilityArgs),
    /// Look for perturbations that change the optimal centers.
    Resilience(ResilienceArgs),
    /// Write a synthetic instance as CSV.
    Generate(GenerateArgs),
    /// Exact optimum by enumeration or branch and bound.
    Oracle(OracleArgs),
    /// Write the LP relaxation of an instance.
    LpExport(LpArgs),
    /// Run a grid of Gaussian-mixture experiments.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// CSV file with points or a distance matrix; `-` reads stdin.
    #[arg(long, default_value = "-")]
    input: PathBuf,
    /// Candidate centers as point CSV; the clients are used when absent.
    #[arg(long)]
    facilities: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    /// Cost exponent: 1 for k-median, 2 for k-means.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    First,
    Best,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Random,
    Greedy,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = 1)]
    swap_budget: usize,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = StrategyArg::First)]
    strategy: StrategyArg,
    #[arg(long, value_enum, default_value_t = InitArg::Random)]
    init: InitArg,
    /// Random restarts with seeds seed, seed+1, ...; the cheapest result wins.
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum NetModeArg {
    Grid,
    Sampled,
}

#[derive(Args)]
struct SpectralArgs {
    #[arg(long, default_value = "-")]
    input: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = NetModeArg::Sampled)]
    net_mode: NetModeArg,
    #[arg(long, default_value_t = 32)]
    net_samples: usize,
    #[arg(long, default_value_t = 1)]
    swap_budget: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct StabilityArgs {
    #[arg(long, default_value = "-")]
    input: PathBuf,
    /// Reference labels, one per line; defaults to the input's `label` column.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Number of clusters; defaults to the number of distinct labels.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Ring parameter of the structure report.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// `oracle`, `ls`, or a positive number used as OPT.
    #[arg(long, default_value = "ls")]
    opt: String,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = DEFAULT_COMBINATION_CAP)]
    oracle_cap: u64,
    /// Where to write the JSON report; stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ResilienceArgs {
    #[arg(long, default_value = "-")]
    input: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = DEFAULT_COMBINATION_CAP)]
    oracle_cap: u64,
    /// Also enumerate local optima at the exchange budget matching alpha (alpha > 3, p = 1).
    #[arg(long)]
    local_optima: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("kind").required(true).args(["gmm", "lb"])))]
struct GenerateArgs {
    /// Gaussian mixture `k,d,n,sigma,seed`.
    #[arg(long, value_name = "K,D,N,SIGMA,SEED")]
    gmm: Option<String>,
    /// Tight local-search instance, as `k eps` or `k,eps`.
    #[arg(long, num_args = 1..=2, value_name = "K EPS")]
    lb: Option<Vec<String>>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleMethod {
    Enumerate,
    Bnb,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, value_enum, default_value_t = OracleMethod::Enumerate)]
    method: OracleMethod,
    /// Combination cap for enumeration, node cap for branch and bound.
    #[arg(long)]
    cap: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct LpArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Grid description, TOML or JSON (chosen by extension, TOML otherwise).
    #[arg(long)]
    grid: PathBuf,
    /// Receives `records.csv` and `report.json`.
    #[arg(long)]
    out_dir: PathBuf,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CmdResult<T = ()> = std::result::Result<T, Failure>;

struct Globals {
    seed: u64,
    workers: usize,
    verbosity: u8,
    format: Format,
}

impl Globals {
    fn note(&self, msg: impl AsRef<str>) {
        if self.verbosity > 0 {
            eprintln!("stabclust: {}", msg.as_ref());
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let globals = Globals {
        seed: cli.seed,
        workers: cli.workers as usize,
        verbosity: cli.verbosity,
        format: cli.format,
    };
    stabclust::configure_workers(globals.workers);
    let result = match cli.command {
        Command::Solve(a) => solve(&globals, a),
        Command::SpectralSolve(a) => spectral(&globals, a),
        Command::Stability(a) => stability(&globals, a),
        Command::Resilience(a) => resilience(&globals, a),
        Command::Generate(a) => generate(&globals, a),
        Command::Oracle(a) => oracle(&globals, a),
        Command::LpExport(a) => lp_export(&globals, a),
        Command::Experiment(a) => experiment(&globals, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn read_input(path: &Path) -> CmdResult<Table> {
    if path.as_os_str() == "-" {
        let mut buf = Vec::new();
        std::io::stdin().read_to_end(&mut buf)?;
        Ok(read_table(buf.as_slice())?)
    } else {
        let file = fs::File::open(path)
            .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
        Ok(read_table(file)?)
    }
}

fn build_instance(table: Table, k: usize, p: f64) -> CmdResult<Instance> {
    Ok(match table {
        Table::Points { points, .. } => Instance::from_points(points, None, k, p)?,
        Table::Matrix { rows } => Instance::from_distance_matrix(rows, k, p)?,
    })
}

fn load(args: &InstanceArgs) -> CmdResult<Instance> {
    let table = read_input(&args.input)?;
    let Some(path) = &args.facilities else {
        return build_instance(table, args.k as usize, args.p);
    };
    let facilities = match read_input(path)? {
        Table::Points { points, .. } => points,
        Table::Matrix { .. } => {
            return Err(Failure::Usage("--facilities expects point coordinates".into()))
        }
    };
    match table {
        Table::Points { points, .. } => {
            Ok(Instance::from_points(points, Some(facilities), args.k as usize, args.p)?)
        }
        Table::Matrix { .. } => Err(Failure::Usage(
            "--facilities cannot be combined with a distance matrix input".into(),
        )),
    }
}

fn emit(g: &Globals, value: &impl Serialize, output: Option<&Path>) -> CmdResult {
    let value = serde_json::to_value(value).map_err(|e| Failure::Runtime(e.to_string()))?;
    write_text(&render(&value, g.format), output)?;
    Ok(())
}

fn solution_json(solution: &Solution) -> Value {
    json!({
        "cost": solution.cost,
        "centers": solution.centers,
        "assignment": solution.assignment,
    })
}

fn solve(g: &Globals, a: SolveArgs) -> CmdResult {
    if a.restarts == 0 {
        return Err(Failure::Usage("--restarts must be at least 1".into()));
    }
    let instance = load(&a.instance)?;
    let start = Instant::now();
    let base = SearchConfig {
        swap_budget: a.swap_budget,
        eps: a.eps,
        strategy: match a.strategy {
            StrategyArg::First => Strategy::FirstImprovement,
            StrategyArg::Best => Strategy::BestImprovement,
        },
        max_iterations: a.max_iterations,
        workers: g.workers,
        ..SearchConfig::default()
    };
    let mut best: Option<(Solution, SearchTrace)> = None;
    for r in 0..a.restarts as u64 {
        let init = match a.init {
            InitArg::Random => Init::Random { seed: g.seed.wrapping_add(r) },
            InitArg::Greedy => Init::Greedy,
        };
        let run = local_search(&instance, &SearchConfig { init, ..base.clone() })?;
        if best.as_ref().is_none_or(|(b, _)| run.0.cost < b.cost) {
            best = Some(run);
        }
        if matches!(a.init, InitArg::Greedy) {
            break;
        }
    }
    let (solution, trace) = best.expect("at least one run");
    g.note(format!(
        "solve: cost {} after {} moves in {:.1?}",
        solution.cost,
        trace.iterations,
        start.elapsed()
    ));
    let mut out = solution_json(&solution);
    out["k"] = json!(instance.k());
    out["p"] = json!(instance.p());
    out["trace"] = json!({
        "iterations": trace.iterations,
        "swap_sizes_used": trace.swap_sizes_used,
        "cost_sequence": trace.cost_sequence,
    });
    emit(g, &out, a.output.as_deref())
}

fn spectral(g: &Globals, a: SpectralArgs) -> CmdResult {
    let points = match read_input(&a.input)? {
        Table::Points { points, .. } => points,
        Table::Matrix { .. } => {
            return Err(Failure::Runtime("spectral-solve needs point coordinates".into()))
        }
    };
    let search = SearchConfig {
        swap_budget: a.swap_budget,
        workers: g.workers,
        ..SearchConfig::default()
    };
    let options = SpectralOptions {
        net_mode: match a.net_mode {
            NetModeArg::Grid => NetMode::Grid,
            NetModeArg::Sampled => NetMode::Sampled { samples: a.net_samples, seed: g.seed },
        },
        ..SpectralOptions::default()
    };
    let out = spectral_ls(&points, a.k as usize, a.eps, g.seed, &search, &options)?;
    g.note(format!("spectral-solve: {} candidates", out.diagnostics.candidates));
    let centers: Vec<Point> = out
        .clustering
        .centers
        .iter()
        .flatten()
        .filter_map(|c| match c {
            Center::Point(p) => Some(p.clone()),
            Center::Facility(_) => None,
        })
        .collect();
    let value = json!({
        "k": a.k,
        "eps": a.eps,
        "cost": out.diagnostics.stage_costs.original,
        "labels": out.clustering.labels,
        "centers": centers,
        "diagnostics": out.diagnostics,
    });
    emit(g, &value, a.output.as_deref())
}

fn read_labels(path: &Path) -> CmdResult<Vec<usize>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.split('#').next().unwrap_or("").trim();
        if t.is_empty() || (i == 0 && t == "label") {
            continue;
        }
        let v = t.parse::<usize>().map_err(|_| {
            Failure::Runtime(format!("{}: line {}: invalid label {t:?}", path.display(), i + 1))
        })?;
        labels.push(v);
    }
    Ok(labels)
}

/// Cheapest single facility for every cluster.
fn facility_centers(instance: &Instance, reference: &LabeledClustering) -> Vec<Center> {
    reference
        .members()
        .iter()
        .map(|members| {
            let best = (0..instance.n_facilities())
                .map(|f| (members.iter().map(|&x| instance.cost(x, f)).sum::<f64>(), f))
                .fold((f64::INFINITY, 0), |acc, c| if c.0 < acc.0 { c } else { acc });
            Center::Facility(best.1)
        })
        .collect()
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn stability(g: &Globals, a: StabilityArgs) -> CmdResult {
    let table = read_input(&a.input)?;
    let labels = match (&a.labels, &table) {
        (Some(path), _) => read_labels(path)?,
        (None, Table::Points { labels: Some(l), .. }) => l.clone(),
        _ => {
            return Err(Failure::Usage(
                "reference labels are required: pass --labels or add a label column".into(),
            ))
        }
    };
    let k = a.k.unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
    let points = match &table {
        Table::Points { points, .. } => Some(points.clone()),
        Table::Matrix { .. } => None,
    };
    let instance = build_instance(table, k, a.p)?;
    let reference = LabeledClustering::new(labels, k)?;
    if let Some(i) = reference.sizes().iter().position(|&s| s == 0) {
        return Err(Failure::Runtime(format!("reference cluster {i} is empty")));
    }
    let reference = match &points {
        Some(pts) if a.p == 2.0 => reference.with_centroids(pts)?,
        _ => {
            let centers = facility_centers(&instance, &reference);
            reference.with_centers(centers)?
        }
    };
    let budget = OptBudget {
        oracle_cap: a.oracle_cap,
        restarts: a.restarts,
        seed: g.seed,
        search: SearchConfig { workers: g.workers, ..SearchConfig::default() },
    };
    let oracle_feasible = binomial(instance.n_facilities(), k) <= a.oracle_cap;
    let oracle = OracleKind::Enumerate { cap: a.oracle_cap };
    let (opt_reference, provenance, local) = match a.opt.as_str() {
        "oracle" => {
            let s = exact_opt(&instance, oracle)?;
            (s.cost, OptProvenance::ExactOracle, s)
        }
        "ls" => {
            let s = best_of_restarts(&instance, &budget.search, a.restarts, g.seed)?;
            (s.cost, OptProvenance::UpperBoundLocalSearch, s)
        }
        v => {
            let value: f64 = v
                .parse()
                .map_err(|_| Failure::Usage(format!("--opt expects oracle, ls or a number, got {v:?}")))?;
            let s = best_of_restarts(&instance, &budget.search, a.restarts, g.seed)?;
            (value, OptProvenance::External, s)
        }
    };
    let beta = measure_beta(&instance, &reference, a.delta, opt_reference)?;
    let beta_estimated = match provenance {
        OptProvenance::ExactOracle => Some(beta),
        _ if oracle_feasible => {
            let exact = exact_opt(&instance, oracle)?;
            if exact.cost > 0.0 {
                Some(measure_beta(&instance, &reference, a.delta, exact.cost)?)
            } else {
                None
            }
        }
        _ => None,
    };
    let gamma = match &points {
        Some(pts) if k >= 2 && a.p == 2.0 => finite(measure_gamma(pts, &reference)?.value()),
        _ => None,
    };
    let orss = if k >= 2 {
        match orss_ratio(&instance, &budget) {
            Ok(r) => Some(r.ratio),
            Err(Error::DegenerateInstance(_)) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    let report = StabilityReport {
        beta: finite(beta),
        beta_estimated: beta_estimated.and_then(finite),
        delta: a.delta,
        gamma,
        orss_ratio: orss,
        opt_reference,
        provenance,
    };
    let structure = if beta.is_finite() && beta > 0.0 && a.eps > 0.0 {
        Some(structure_report(&instance, &local, &reference, beta, a.eps, opt_reference)?)
    } else {
        None
    };
    let value = json!({ "stability": report, "structure": structure, "local_cost": local.cost });
    emit(g, &value, a.report.as_deref())
}

fn resilience(g: &Globals, a: ResilienceArgs) -> CmdResult {
    let instance = build_instance(read_input(&a.input)?, a.k as usize, a.p)?;
    let result = resilience_falsifier(&instance, a.alpha, a.trials, g.seed, a.oracle_cap)?;
    g.note(format!("resilience: {} trials, falsified = {}", result.trials, result.falsified));
    let mut value = serde_json::to_value(&result).expect("result serializes");
    if a.local_optima {
        let check = verify_local_optima(&instance, a.alpha, a.oracle_cap)?;
        value["local_optima_check"] = serde_json::to_value(&check).expect("report serializes");
    }
    emit(g, &value, a.output.as_deref())
}

fn parse_list(raw: &str) -> Vec<&str> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn generate(g: &Globals, a: GenerateArgs) -> CmdResult {
    let mut buf = Vec::new();
    if let Some(spec) = &a.gmm {
        let parts = parse_list(spec);
        let bad = || Failure::Usage(format!("--gmm expects k,d,n,sigma,seed, got {spec:?}"));
        if parts.len() != 5 {
            return Err(bad());
        }
        let cfg = GmmConfig {
            k: parts[0].parse().map_err(|_| bad())?,
            d: parts[1].parse().map_err(|_| bad())?,
            n: parts[2].parse().map_err(|_| bad())?,
            sigma: parts[3].parse().map_err(|_| bad())?,
            seed: parts[4].parse().map_err(|_| bad())?,
        };
        let (points, truth) = sample_gmm(&cfg)?;
        write_points_csv(&mut buf, &points, Some(&truth.labels))?;
    } else if let Some(values) = &a.lb {
        let joined = values.join(",");
        let parts = parse_list(&joined);
        let bad = || Failure::Usage(format!("--lb expects k and eps, got {joined:?}"));
        if parts.len() != 2 {
            return Err(bad());
        }
        let k: usize = parts[0].parse().map_err(|_| bad())?;
        let eps: f64 = parts[1].parse().map_err(|_| bad())?;
        let lb = LbInstance::new(k, eps)?;
        write_matrix_csv(&mut buf, &lb.distance_rows())?;
    }
    g.note(format!("generate: {} bytes", buf.len()));
    write_text(&String::from_utf8(buf).expect("CSV is UTF-8"), a.output.as_deref())?;
    Ok(())
}

fn oracle(g: &Globals, a: OracleArgs) -> CmdResult {
    let instance = load(&a.instance)?;
    let kind = match a.method {
        OracleMethod::Enumerate => OracleKind::Enumerate { cap: a.cap.unwrap_or(DEFAULT_COMBINATION_CAP) },
        OracleMethod::Bnb => OracleKind::BranchAndBound { node_cap: a.cap.unwrap_or(DEFAULT_NODE_CAP) },
    };
    let solution = exact_opt(&instance, kind)?;
    let mut out = solution_json(&solution);
    out["k"] = json!(instance.k());
    out["p"] = json!(instance.p());
    emit(g, &out, a.output.as_deref())
}

fn lp_export(_g: &Globals, a: LpArgs) -> CmdResult {
    let instance = load(&a.instance)?;
    write_text(&lp_string(&instance), a.output.as_deref())?;
    Ok(())
}

fn experiment(g: &Globals, a: ExperimentArgs) -> CmdResult {
    let text = fs::read_to_string(&a.grid)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", a.grid.display())))?;
    let is_json = a.grid.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let grid: ExperimentGrid = if is_json {
        ExperimentGrid::from_json(&text)?
    } else {
        toml::from_str(&text).map_err(|e| Failure::Runtime(format!("{}: {e}", a.grid.display())))?
    };
    let start = Instant::now();
    let records = run_experiment(&grid)?;
    g.note(format!("experiment: {} cells in {:.1?}", records.len(), start.elapsed()));
    fs::create_dir_all(&a.out_dir)?;
    write_records_csv(fs::File::create(a.out_dir.join("records.csv"))?, &records)?;
    let summary = summarize(&records);
    let report = ExperimentReport { grid, records, summary };
    write_report_json(fs::File::create(a.out_dir.join("report.json"))?, &report)?;
    emit(g, &json!({ "cells": report.records.len(), "summary": report.summary }), None)
}
