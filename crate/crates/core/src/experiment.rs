//! Gaussian-mixture experiment harness.
//!
//! Every cell of the grid is a `(k, d, σ, seed)` combination. A cell generates a
//! mixture, estimates the optimal k-means cost, and compares it with the cost of
//! the generating clustering. Cells run in parallel; records come back in grid
//! order and a failing cell is recorded rather than aborting the run.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{generate_gmm, GmmConfig};
use crate::instance::{Center, LabeledClustering, Point};
use crate::lloyd::lloyd;
use crate::local_search::{best_of_restarts, SearchConfig};
use crate::oracle::{binomial, brute_force_opt_with_cap};
use crate::stability::{matching_accuracy, measure_beta, measure_gamma, OptProvenance};

/// Mean ratio below which a (k, d, σ) cell counts as relevant.
pub const RELEVANCE_THRESHOLD: f64 = 1.05;

fn default_n() -> usize {
    200
}
fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}
fn default_restarts() -> usize {
    10
}
fn default_oracle_cap() -> u64 {
    100_000
}
fn default_lloyd_iterations() -> usize {
    100
}

/// Cartesian grid of experiment cells. Unset fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    pub ks: Vec<usize>,
    pub ds: Vec<usize>,
    pub sigmas: Vec<f64>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_oracle_cap")]
    pub oracle_cap: u64,
    #[serde(default = "default_lloyd_iterations")]
    pub lloyd_iterations: usize,
    /// Record wall-clock times; off by default so repeated runs are identical.
    #[serde(default)]
    pub record_timings: bool,
}

impl ExperimentGrid {
    pub fn new(ks: Vec<usize>, ds: Vec<usize>, sigmas: Vec<f64>) -> Self {
        ExperimentGrid {
            ks,
            ds,
            sigmas,
            n: default_n(),
            seeds: default_seeds(),
            delta: 0.0,
            restarts: default_restarts(),
            oracle_cap: default_oracle_cap(),
            lloyd_iterations: default_lloyd_iterations(),
            record_timings: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() || self.ds.is_empty() || self.sigmas.is_empty() || self.seeds.is_empty() {
            return Err(Error::invalid("ks, ds, sigmas and seeds must be non-empty"));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::invalid(format!("delta = {} must lie in [0, 1)", self.delta)));
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<GmmConfig> {
        let mut out = Vec::new();
        for &k in &self.ks {
            for &d in &self.ds {
                for &sigma in &self.sigmas {
                    for &seed in &self.seeds {
                        out.push(GmmConfig { k, d, n: self.n, sigma, seed });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub k: usize,
    pub d: usize,
    pub n: usize,
    pub sigma: f64,
    pub seed: u64,
    pub ground_truth_cost: Option<f64>,
    pub opt_estimate: Option<f64>,
    pub opt_provenance: Option<OptProvenance>,
    /// `ground_truth_cost / opt_estimate`, with `0/0 = 1`.
    pub ratio: Option<f64>,
    pub beta_certified: Option<f64>,
    pub beta_estimated: Option<f64>,
    pub gamma: Option<f64>,
    pub accuracy: Option<f64>,
    pub runtime_ms: Option<f64>,
    pub error: Option<String>,
}

/// Column order of the CSV output.
pub const RECORD_COLUMNS: [&str; 15] = [
    "k",
    "d",
    "n",
    "sigma",
    "seed",
    "ground_truth_cost",
    "opt_estimate",
    "opt_provenance",
    "ratio",
    "beta_certified",
    "beta_estimated",
    "gamma",
    "accuracy",
    "runtime_ms",
    "error",
];

pub fn cost_ratio(ground_truth: f64, opt: f64) -> f64 {
    if ground_truth == 0.0 && opt == 0.0 {
        1.0
    } else if opt == 0.0 {
        f64::INFINITY
    } else {
        ground_truth / opt
    }
}

struct CellResult {
    ground_truth_cost: f64,
    opt_estimate: f64,
    provenance: OptProvenance,
    beta_certified: Option<f64>,
    beta_estimated: Option<f64>,
    gamma: Option<f64>,
    accuracy: f64,
}

fn point_centers(lc: &LabeledClustering) -> Option<Vec<Point>> {
    lc.centers.as_ref().map(|cs| {
        cs.iter()
            .filter_map(|c| match c {
                Center::Point(p) => Some(p.clone()),
                Center::Facility(_) => None,
            })
            .collect()
    })
}

fn run_cell(grid: &ExperimentGrid, cfg: &GmmConfig) -> Result<CellResult> {
    let (instance, truth) = generate_gmm(cfg)?;
    let points = instance.clients().expect("point form").to_vec();
    let ground_truth_cost = truth.cost(&instance)?;

    // discrete search over the data points, then continuous refinement
    let exact = binomial(instance.n_facilities(), cfg.k) <= grid.oracle_cap;
    let discrete = if exact {
        brute_force_opt_with_cap(&instance, grid.oracle_cap)?
    } else {
        best_of_restarts(&instance, &SearchConfig::default(), grid.restarts, cfg.seed)?
    };
    let seeds: Vec<Point> = discrete
        .centers
        .iter()
        .map(|&f| instance.facilities().expect("point form")[f].clone())
        .collect();
    let mut best = lloyd(&instance, &seeds, grid.lloyd_iterations)?;
    let truth_centroids = truth.with_centroids(&points)?;
    if let Some(init) = point_centers(&truth_centroids) {
        let alt = lloyd(&instance, &init, grid.lloyd_iterations)?;
        if alt.cost < best.cost {
            best = alt;
        }
    }
    let opt_estimate = best.cost.min(discrete.cost);
    let provenance = OptProvenance::UpperBoundLocalSearch;

    let reference = truth_centroids;
    let beta_certified = if opt_estimate > 0.0 {
        Some(measure_beta(&instance, &reference, grid.delta, opt_estimate)?)
    } else {
        None
    };
    let beta_estimated = if exact && discrete.cost > 0.0 {
        Some(measure_beta(&instance, &reference, grid.delta, discrete.cost)?)
    } else {
        None
    };
    let gamma = if cfg.k >= 2 {
        Some(measure_gamma(&points, &reference)?.value())
    } else {
        None
    };
    let estimate_labels = best.clustering.labels.clone();
    let accuracy = matching_accuracy(&estimate_labels, cfg.k, &truth.labels, cfg.k)?;
    Ok(CellResult {
        ground_truth_cost,
        opt_estimate,
        provenance,
        beta_certified,
        beta_estimated,
        gamma,
        accuracy,
    })
}

fn finite(v: Option<f64>) -> Option<f64> {
    v.filter(|x| x.is_finite())
}

/// Runs every cell of the grid; records are in [`ExperimentGrid::cells`] order.
pub fn run_experiment(grid: &ExperimentGrid) -> Result<Vec<ExperimentRecord>> {
    grid.validate()?;
    let cells = grid.cells();
    Ok(cells
        .par_iter()
        .map(|cfg| {
            let start = Instant::now();
            let outcome = run_cell(grid, cfg);
            let runtime_ms = grid
                .record_timings
                .then(|| start.elapsed().as_secs_f64() * 1e3);
            let mut rec = ExperimentRecord {
                k: cfg.k,
                d: cfg.d,
                n: cfg.n,
                sigma: cfg.sigma,
                seed: cfg.seed,
                ground_truth_cost: None,
                opt_estimate: None,
                opt_provenance: None,
                ratio: None,
                beta_certified: None,
                beta_estimated: None,
                gamma: None,
                accuracy: None,
                runtime_ms,
                error: None,
            };
            match outcome {
                Ok(r) => {
                    rec.ground_truth_cost = Some(r.ground_truth_cost);
                    rec.opt_estimate = Some(r.opt_estimate);
                    rec.opt_provenance = Some(r.provenance);
                    rec.ratio = finite(Some(cost_ratio(r.ground_truth_cost, r.opt_estimate)));
                    rec.beta_certified = finite(r.beta_certified);
                    rec.beta_estimated = finite(r.beta_estimated);
                    rec.gamma = finite(r.gamma);
                    rec.accuracy = Some(r.accuracy);
                }
                Err(e) => rec.error = Some(e.to_string()),
            }
            rec
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub k: usize,
    pub d: usize,
    pub sigma: f64,
    pub runs: usize,
    pub failures: usize,
    pub mean_ratio: Option<f64>,
    pub mean_beta_certified: Option<f64>,
    pub mean_accuracy: Option<f64>,
    /// Mean ratio below [`RELEVANCE_THRESHOLD`].
    pub relevant: bool,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Aggregates records over seeds, in first-appearance order of `(k, d, σ)`.
pub fn summarize(records: &[ExperimentRecord]) -> Vec<CellSummary> {
    let mut keys: Vec<(usize, usize, f64)> = Vec::new();
    for r in records {
        let key = (r.k, r.d, r.sigma);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(k, d, sigma)| {
            let group: Vec<&ExperimentRecord> = records
                .iter()
                .filter(|r| r.k == k && r.d == d && r.sigma == sigma)
                .collect();
            let mean_ratio = mean(group.iter().filter_map(|r| r.ratio));
            CellSummary {
                k,
                d,
                sigma,
                runs: group.len(),
                failures: group.iter().filter(|r| r.error.is_some()).count(),
                mean_ratio,
                mean_beta_certified: mean(group.iter().filter_map(|r| r.beta_certified)),
                mean_accuracy: mean(group.iter().filter_map(|r| r.accuracy)),
                relevant: mean_ratio.is_some_and(|m| m < RELEVANCE_THRESHOLD),
            }
        })
        .collect()
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn write_records_csv<W: Write>(w: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RECORD_COLUMNS).map_err(std::io::Error::from)?;
    for r in records {
        let provenance = r
            .opt_provenance
            .map(|p| serde_json::to_value(p).expect("enum serializes"))
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        out.write_record([
            r.k.to_string(),
            r.d.to_string(),
            r.n.to_string(),
            format!("{}", r.sigma),
            r.seed.to_string(),
            opt_cell(r.ground_truth_cost),
            opt_cell(r.opt_estimate),
            provenance,
            opt_cell(r.ratio),
            opt_cell(r.beta_certified),
            opt_cell(r.beta_estimated),
            opt_cell(r.gamma),
            opt_cell(r.accuracy),
            opt_cell(r.runtime_ms),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(std::io::Error::from)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub grid: ExperimentGrid,
    pub records: Vec<ExperimentRecord>,
    pub summary: Vec<CellSummary>,
}

pub fn write_report_json<W: Write>(mut w: W, report: &ExperimentReport) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, report)?;
    writeln!(w)?;
    Ok(())
}
