//! Spectral pipeline for Euclidean k-means: project onto the best rank-`m`
//! subspace, optionally embed with a Gaussian random map, discretize the center
//! space with nets around every data point, then run local search over the
//! resulting candidate centers.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{dist, sq_dist, Center, Instance, LabeledClustering, Point, Solution};
use crate::linalg::{sorted_svd, to_matrix, to_points};
use crate::local_search::{local_search, Init, SearchConfig};
use crate::stability::{measure_gamma, GammaReport};

fn check_points(points: &[Point]) -> Result<(usize, usize)> {
    let n = points.len();
    if n == 0 {
        return Err(Error::invalid("no points"));
    }
    let d = points[0].len();
    if d == 0 {
        return Err(Error::invalid("points must have dimension >= 1"));
    }
    if let Some(i) = points.iter().position(|p| p.len() != d) {
        return Err(Error::invalid(format!("point {i} has dimension {}, expected {d}", points[i].len())));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("points contain a non-finite coordinate"));
    }
    Ok((n, d))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    /// Rows of the best rank-`m` approximation, in the original coordinates.
    pub projected: Vec<Point>,
    /// The same rows expressed in the orthonormal basis (n × m).
    pub coordinates: Vec<Point>,
    pub m: usize,
    /// `‖A − A_m‖_F²`, the sum of the squared discarded singular values.
    pub residual_frobenius_sq: f64,
    /// Orthonormal basis of the subspace, one row per direction (m × d).
    pub basis: Vec<Point>,
    /// All singular values of `A`, descending.
    pub singular_values: Vec<f64>,
}

/// Best rank-`m` approximation of the point matrix by dense SVD.
pub fn rank_m_project(points: &[Point], m: usize) -> Result<ProjectionResult> {
    let (n, d) = check_points(points)?;
    if m == 0 || m > n.min(d) {
        return Err(Error::invalid(format!("m = {m} must lie in 1..={}", n.min(d))));
    }
    let a = to_matrix(points);
    let svd = sorted_svd(&a);
    let v_m = svd.v_t.rows(0, m).into_owned();
    let coords = &a * v_m.transpose();
    let projected = &coords * &v_m;
    let residual_frobenius_sq = svd.singular_values[m..].iter().fold(0.0, |acc, s| acc + s * s);
    Ok(ProjectionResult {
        projected: to_points(&projected),
        coordinates: to_points(&coords),
        m,
        residual_frobenius_sq,
        basis: to_points(&v_m),
        singular_values: svd.singular_values,
    })
}

/// Dense Gaussian map with entries `N(0, 1/m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JlEmbedding {
    /// `target_dim × d`.
    pub matrix: DMatrix<f64>,
}

impl JlEmbedding {
    pub fn new(d: usize, target_dim: usize, seed: u64) -> Result<Self> {
        if d == 0 || target_dim == 0 {
            return Err(Error::invalid("embedding dimensions must be >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (target_dim as f64).sqrt();
        let mut values = Vec::with_capacity(target_dim * d);
        for _ in 0..target_dim * d {
            let z: f64 = rng.sample(StandardNormal);
            values.push(z * scale);
        }
        Ok(JlEmbedding {
            matrix: DMatrix::from_row_slice(target_dim, d, &values),
        })
    }

    pub fn target_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, x: &[f64]) -> Point {
        let v = &self.matrix * nalgebra::DVector::from_column_slice(x);
        v.iter().copied().collect()
    }

    pub fn apply_all(&self, points: &[Point]) -> Vec<Point> {
        if points.is_empty() {
            return Vec::new();
        }
        to_points(&(to_matrix(points) * self.matrix.transpose()))
    }
}

pub const DEFAULT_C_JL: f64 = 8.0;

/// `⌈c · ε⁻² · ln n⌉`, at least 1.
pub fn jl_dimension(n: usize, eps: f64, c_jl: f64) -> usize {
    ((c_jl * (n.max(1) as f64).ln() / (eps * eps)).ceil() as usize).max(1)
}

fn check_jl_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::invalid(format!("eps = {eps} must lie in (0, 1/2)")));
    }
    Ok(())
}

/// Embeds the points into `jl_dimension(n, eps, 8)` dimensions.
pub fn jl_embed(points: &[Point], eps: f64, seed: u64) -> Result<Vec<Point>> {
    Ok(jl_embed_with(points, eps, seed, DEFAULT_C_JL)?.1)
}

pub fn jl_embed_with(
    points: &[Point],
    eps: f64,
    seed: u64,
    c_jl: f64,
) -> Result<(JlEmbedding, Vec<Point>)> {
    check_jl_eps(eps)?;
    if !(c_jl > 0.0 && c_jl.is_finite()) {
        return Err(Error::invalid(format!("c_jl = {c_jl} must be positive")));
    }
    let (n, d) = check_points(points)?;
    let map = JlEmbedding::new(d, jl_dimension(n, eps, c_jl), seed)?;
    let images = map.apply_all(points);
    Ok((map, images))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetMode {
    /// Axis-aligned lattice of spacing `ηℓ/(8√d)` inside each ball.
    Grid,
    /// `samples` uniform points per ball.
    Sampled { samples: usize, seed: u64 },
}

pub const DEFAULT_NET_SAMPLES: usize = 32;
pub const MAX_GRID_DIM: usize = 6;
pub const DEFAULT_MAX_CANDIDATES: usize = 2_000_000;

impl Default for NetMode {
    fn default() -> Self {
        NetMode::Sampled {
            samples: DEFAULT_NET_SAMPLES,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateOrigin {
    DataPoint(usize),
    Net { point: usize, ring: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    /// Data points first, in input order, then net points grouped by (point, ring).
    pub points: Vec<Point>,
    pub provenance: Vec<CandidateOrigin>,
    pub eta: f64,
    /// Ring radii actually used.
    pub radii: Vec<f64>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateParams {
    pub eta: f64,
    pub opt_hint: f64,
    /// Rings with a radius above this are skipped.
    pub max_radius: Option<f64>,
    pub max_candidates: usize,
}

impl CandidateParams {
    pub fn new(eta: f64, opt_hint: f64) -> Self {
        CandidateParams {
            eta,
            opt_hint,
            max_radius: None,
            max_candidates: DEFAULT_MAX_CANDIDATES,
        }
    }
}

/// Radii `(1+η)^i · η · opt_hint / n` for `i = 0..=⌈log_{1+η}(n²/η)⌉`, truncated
/// at `max_radius`.
pub fn ring_radii(n: usize, eta: f64, opt_hint: f64, max_radius: Option<f64>) -> Vec<f64> {
    let n = n.max(1) as f64;
    let t = ((n * n / eta).ln() / (1.0 + eta).ln()).ceil().max(0.0) as usize;
    let base = eta * opt_hint / n;
    (0..=t)
        .map(|i| base * (1.0 + eta).powi(i as i32))
        .take_while(|&r| max_radius.is_none_or(|cap| r <= cap))
        .collect()
}

/// Lattice points of spacing `ηℓ/(8√d)` centered at `center` that lie in the
/// closed ball of radius `radius`. Every point of the ball is within `ηℓ/8` of
/// one of them.
pub fn grid_net(center: &[f64], radius: f64, eta: f64) -> Vec<Point> {
    let d = center.len();
    let h = eta * radius / (8.0 * (d as f64).sqrt());
    if !(h > 0.0) {
        return vec![center.to_vec()];
    }
    let steps = (radius / h * (1.0 + 1e-12)).floor() as i64;
    let limit = radius * radius * (1.0 + 1e-12);
    let mut out = Vec::new();
    let mut z = vec![-steps; d];
    loop {
        let r2: f64 = z.iter().map(|&v| (v as f64 * h).powi(2)).sum();
        if r2 <= limit {
            out.push(center.iter().zip(&z).map(|(c, &v)| c + v as f64 * h).collect());
        }
        // odometer increment
        let mut axis = 0;
        loop {
            if axis == d {
                return out;
            }
            z[axis] += 1;
            if z[axis] <= steps {
                break;
            }
            z[axis] = -steps;
            axis += 1;
        }
    }
}

/// Number of lattice points [`grid_net`] would produce, without allocating them.
fn grid_net_size(d: usize, eta: f64) -> f64 {
    // lattice points inside a ball of `8√d/η` steps: volume bound plus boundary
    let r = 8.0 * (d as f64).sqrt() / eta + (d as f64).sqrt();
    let unit_ball = std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_fn(d as f64 / 2.0 + 1.0);
    unit_ball * r.powi(d as i32)
}

fn gamma_fn(x: f64) -> f64 {
    // x is a positive half-integer here
    if (x - 1.0).abs() < 1e-12 {
        1.0
    } else if (x - 0.5).abs() < 1e-12 {
        std::f64::consts::PI.sqrt()
    } else {
        (x - 1.0) * gamma_fn(x - 1.0)
    }
}

fn uniform_in_ball(rng: &mut ChaCha8Rng, center: &[f64], radius: f64) -> Point {
    let d = center.len();
    loop {
        let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
        return center.iter().zip(&dir).map(|(c, v)| c + v / norm * r).collect();
    }
}

/// Candidate centers with the default limits.
pub fn build_candidates(points: &[Point], eta: f64, opt_hint: f64, mode: NetMode) -> Result<CandidateSet> {
    build_candidates_with(points, &CandidateParams::new(eta, opt_hint), mode)
}

pub fn build_candidates_with(
    points: &[Point],
    params: &CandidateParams,
    mode: NetMode,
) -> Result<CandidateSet> {
    let (n, d) = check_points(points)?;
    let eta = params.eta;
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::invalid(format!("eta = {eta} must lie in (0, 1)")));
    }
    if !(params.opt_hint > 0.0 && params.opt_hint.is_finite()) {
        return Err(Error::invalid(format!("opt_hint = {} must be positive", params.opt_hint)));
    }
    let radii = ring_radii(n, eta, params.opt_hint, params.max_radius);
    let per_ring = match mode {
        NetMode::Grid => {
            if d > MAX_GRID_DIM {
                return Err(Error::limit(format!(
                    "grid nets are limited to d <= {MAX_GRID_DIM}, got d = {d}"
                )));
            }
            grid_net_size(d, eta)
        }
        NetMode::Sampled { samples, .. } => samples as f64,
    };
    let estimate = n as f64 + n as f64 * radii.len() as f64 * per_ring;
    if estimate > params.max_candidates as f64 {
        return Err(Error::limit(format!(
            "about {estimate:.0} candidates exceed the budget of {}",
            params.max_candidates
        )));
    }
    let cells: Vec<(usize, usize)> = (0..n)
        .flat_map(|p| (0..radii.len()).map(move |r| (p, r)))
        .collect();
    let nets: Vec<Vec<Point>> = cells
        .par_iter()
        .map(|&(p, r)| match mode {
            NetMode::Grid => grid_net(&points[p], radii[r], eta),
            NetMode::Sampled { samples, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream((p * radii.len() + r) as u64);
                (0..samples)
                    .map(|_| uniform_in_ball(&mut rng, &points[p], radii[r]))
                    .collect()
            }
        })
        .collect();
    let mut out_points = points.to_vec();
    let mut provenance: Vec<CandidateOrigin> = (0..n).map(CandidateOrigin::DataPoint).collect();
    for (&(p, r), net) in cells.iter().zip(nets) {
        provenance.extend(std::iter::repeat_n(CandidateOrigin::Net { point: p, ring: r }, net.len()));
        out_points.extend(net);
    }
    if out_points.len() > params.max_candidates {
        return Err(Error::limit(format!(
            "{} candidates exceed the budget of {}",
            out_points.len(),
            params.max_candidates
        )));
    }
    Ok(CandidateSet {
        points: out_points,
        provenance,
        eta,
        radii,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralOptions {
    pub net_mode: NetMode,
    /// Net accuracy; defaults to the pipeline's ε.
    pub eta: Option<f64>,
    pub c_jl: f64,
    pub max_candidates: usize,
    /// Skip the random embedding when it would not reduce the dimension.
    pub skip_useless_embedding: bool,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            net_mode: NetMode::default(),
            eta: None,
            c_jl: DEFAULT_C_JL,
            max_candidates: DEFAULT_MAX_CANDIDATES,
            skip_useless_embedding: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCosts {
    /// k-means cost of the preliminary search on data points, working space.
    pub preliminary: f64,
    /// k-means cost of the final search over candidates, working space.
    pub search: f64,
    /// `‖A − YYᵀA‖_F²` of the returned clustering in the original space.
    pub original: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDiagnostics {
    pub m: usize,
    pub jl_dim: usize,
    pub jl_applied: bool,
    pub working_dim: usize,
    pub projection_residual: f64,
    pub opt_hint: f64,
    pub rings: usize,
    pub candidates: usize,
    pub iterations: usize,
    pub stage_costs: StageCosts,
    pub gamma: Option<GammaReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralOutcome {
    /// Solution of the final search; centers index `candidates`.
    pub solution: Solution,
    pub candidates: CandidateSet,
    /// Labels over the input points with original-space centroids as centers.
    pub clustering: LabeledClustering,
    pub diagnostics: SpectralDiagnostics,
}

/// Runs the whole pipeline on Euclidean points with squared-distance cost.
///
/// The preliminary search (1-swap, data points as facilities) supplies the
/// radius scale and the starting centers of the final search. The final
/// search uses `search` with its `init` replaced by those centers.
pub fn spectral_ls(
    points: &[Point],
    k: usize,
    eps: f64,
    seed: u64,
    search: &SearchConfig,
    options: &SpectralOptions,
) -> Result<SpectralOutcome> {
    let (n, d) = check_points(points)?;
    check_jl_eps(eps)?;
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} must lie in 1..={n}")));
    }
    let eta = options.eta.unwrap_or(eps);
    let m = ((k as f64 / eps).ceil() as usize).min(n.min(d));
    let projection = rank_m_project(points, m)?;
    let jl_dim = jl_dimension(n, eps, options.c_jl);
    let jl_applied = !(options.skip_useless_embedding && jl_dim >= m);
    let working = if jl_applied {
        JlEmbedding::new(m, jl_dim, seed)?.apply_all(&projection.coordinates)
    } else {
        projection.coordinates.clone()
    };

    let pre_instance = Instance::from_points(working.clone(), None, k, 2.0)?;
    let pre_config = SearchConfig {
        swap_budget: 1,
        init: Init::Random { seed },
        ..search.clone()
    };
    let (preliminary, _) = local_search(&pre_instance, &pre_config)?;
    let opt_hint = distance_sum(&preliminary, &pre_instance);
    let diameter = diameter(&working);

    let candidates = if opt_hint > 0.0 {
        let params = CandidateParams {
            eta,
            opt_hint,
            max_radius: Some(diameter),
            max_candidates: options.max_candidates,
        };
        let mode = match options.net_mode {
            NetMode::Sampled { samples, .. } => NetMode::Sampled { samples, seed },
            grid => grid,
        };
        build_candidates_with(&working, &params, mode)?
    } else {
        CandidateSet {
            points: working.clone(),
            provenance: (0..n).map(CandidateOrigin::DataPoint).collect(),
            eta,
            radii: Vec::new(),
        }
    };

    let instance = Instance::from_points(working.clone(), Some(candidates.points.clone()), k, 2.0)?;
    // data points occupy the first n candidate slots
    let config = SearchConfig {
        init: Init::Explicit(preliminary.centers.clone()),
        ..search.clone()
    };
    let (solution, trace) = local_search(&instance, &config)?;

    let labels = solution.labels();
    let clustering = LabeledClustering::new(labels, solution.centers.len())?;
    let original = original_space_cost(points, &clustering)?;
    let clustering = if clustering.sizes().iter().all(|&s| s > 0) {
        clustering.with_centroids(points)?
    } else {
        clustering
    };
    let gamma = if clustering.k >= 2 && clustering.centers.is_some() {
        Some(measure_gamma(points, &clustering)?)
    } else {
        None
    };
    Ok(SpectralOutcome {
        diagnostics: SpectralDiagnostics {
            m,
            jl_dim,
            jl_applied,
            working_dim: working[0].len(),
            projection_residual: projection.residual_frobenius_sq,
            opt_hint,
            rings: candidates.radii.len(),
            candidates: candidates.len(),
            iterations: trace.iterations,
            stage_costs: StageCosts {
                preliminary: preliminary.cost,
                search: solution.cost,
                original,
            },
            gamma,
        },
        solution,
        candidates,
        clustering,
    })
}

/// Sum of plain distances of a squared-distance solution.
fn distance_sum(solution: &Solution, instance: &Instance) -> f64 {
    solution
        .assignment
        .iter()
        .enumerate()
        .map(|(x, &f)| instance.cost(x, f).sqrt())
        .sum()
}

fn diameter(points: &[Point]) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.max(sq_dist(&points[i], &points[j]));
        }
    }
    best.sqrt()
}

/// `Σ_x ‖a_x − μ(cluster of x)‖²`, centroids taken in the given coordinates.
pub fn original_space_cost(points: &[Point], clustering: &LabeledClustering) -> Result<f64> {
    let centroids = clustering.centroids(points)?;
    Ok(points
        .iter()
        .zip(&clustering.labels)
        .map(|(x, &l)| sq_dist(x, centroids[l].as_ref().expect("label of a member")))
        .sum())
}

/// Euclidean distance from a center to the nearest candidate.
pub fn nearest_candidate_distance(candidates: &[Point], center: &Center) -> Option<f64> {
    match center {
        Center::Point(c) => candidates.iter().map(|q| dist(q, c)).reduce(f64::min),
        Center::Facility(_) => None,
    }
}
