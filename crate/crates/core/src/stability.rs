//! Stability measurements for an instance and a reference clustering.
//!
//! - [`measure_beta`]: largest β for which the reference is (β, δ)-distribution
//!   stable, i.e. in every cluster `C_i` at least `⌈(1 − δ)|C_i|⌉` points have
//!   `cost(x, c_j) >= β · OPT / |C_j|` for every other center `c_j`.
//! - [`measure_gamma`]: spectral separation of the reference centers relative
//!   to the spectral norm of the point-to-center residual matrix.
//! - [`orss_ratio`]: `OPT_k / OPT_{k-1}`.
//! - [`structure_report`]: inner rings, cheap clusters and how a local solution
//!   captures them.
//! - [`resilience_falsifier`] and [`verify_local_optima`]: empirical checks around
//!   α-perturbation resilience. Resilience quantifies over all perturbations, so
//!   only falsification is computable.

use itertools::Itertools;
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{dist, powered, Center, Instance, LabeledClustering, Point, Solution};
use crate::linalg::{spectral_norm, to_matrix};
use crate::local_search::{best_of_restarts, locally_optimal, SearchConfig};
use crate::oracle::{binomial, brute_force_opt_with_cap, exact_opt, OracleKind, DEFAULT_COMBINATION_CAP};

/// Where an OPT value used as a reference comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptProvenance {
    ExactOracle,
    UpperBoundLocalSearch,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// β certified against `opt_reference`; `None` encodes +∞.
    pub beta: Option<f64>,
    /// β against an exact optimum or lower bound, when one is available.
    pub beta_estimated: Option<f64>,
    pub delta: f64,
    pub gamma: Option<f64>,
    pub orss_ratio: Option<f64>,
    pub opt_reference: f64,
    pub provenance: OptProvenance,
}

fn reference_centers(instance: &Instance, reference: &LabeledClustering) -> Result<Vec<Center>> {
    if reference.labels.len() != instance.n_clients() {
        return Err(Error::invalid(format!(
            "reference has {} labels for {} clients",
            reference.labels.len(),
            instance.n_clients()
        )));
    }
    if let Some(i) = reference.sizes().iter().position(|&s| s == 0) {
        return Err(Error::invalid(format!("reference cluster {i} is empty")));
    }
    match &reference.centers {
        Some(c) => Ok(c.clone()),
        None => {
            let points = instance.clients().ok_or_else(|| {
                Error::invalid("reference has no centers and the instance is not in point form")
            })?;
            Ok(reference
                .with_centroids(points)?
                .centers
                .expect("centroids were just set"))
        }
    }
}

/// `⌈(1 − δ) s⌉`, robust against rounding just above an integer.
fn kept_count(size: usize, delta: f64) -> usize {
    let raw = (1.0 - delta) * size as f64;
    ((raw - 1e-9).ceil() as usize).clamp(1, size)
}

/// Largest β such that the reference clustering is (β, δ)-distribution stable
/// with respect to `opt_reference`. Returns `f64::INFINITY` when `k = 1`.
pub fn measure_beta(
    instance: &Instance,
    reference: &LabeledClustering,
    delta: f64,
    opt_reference: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::invalid(format!("delta = {delta} must lie in [0, 1)")));
    }
    if !(opt_reference > 0.0 && opt_reference.is_finite()) {
        return Err(Error::invalid(format!(
            "opt_reference = {opt_reference} must be positive"
        )));
    }
    let centers = reference_centers(instance, reference)?;
    let k = reference.k;
    if k == 1 {
        return Ok(f64::INFINITY);
    }
    let sizes = reference.sizes();
    let mut beta = f64::INFINITY;
    for (i, members) in reference.members().iter().enumerate() {
        let mut scores = members
            .iter()
            .map(|&x| -> Result<f64> {
                let mut v = f64::INFINITY;
                for j in (0..k).filter(|&j| j != i) {
                    let c = instance.cost_to_center(x, &centers[j])?;
                    v = v.min(c * sizes[j] as f64 / opt_reference);
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>>>()?;
        scores.sort_by(|a, b| b.partial_cmp(a).expect("finite scores"));
        let keep = kept_count(members.len(), delta);
        beta = beta.min(scores[keep - 1]);
    }
    Ok(beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaReport {
    /// `None` encodes +∞ (all points sit on their centers).
    pub gamma: Option<f64>,
    pub spectral_norm: f64,
    /// The `3√k` separation threshold.
    pub threshold: f64,
    pub exceeds_threshold: bool,
}

impl GammaReport {
    pub fn value(&self) -> f64 {
        self.gamma.unwrap_or(f64::INFINITY)
    }
}

/// Spectral separation γ of the reference clustering:
/// `min_{i≠j} ‖c_i − c_j‖ / ((|C_i|^{-1/2} + |C_j|^{-1/2}) ‖A − C‖₂)` where row
/// `x` of `C` is the center of the cluster of `x`.
pub fn measure_gamma(points: &[Point], reference: &LabeledClustering) -> Result<GammaReport> {
    if reference.k < 2 {
        return Err(Error::invalid("spectral separation needs k >= 2"));
    }
    if points.len() != reference.labels.len() {
        return Err(Error::invalid("label count does not match point count"));
    }
    if let Some(i) = reference.sizes().iter().position(|&s| s == 0) {
        return Err(Error::invalid(format!("reference cluster {i} is empty")));
    }
    let centers: Vec<Point> = match &reference.centers {
        Some(cs) => cs
            .iter()
            .map(|c| match c {
                Center::Point(p) => Ok(p.clone()),
                Center::Facility(_) => Err(Error::invalid(
                    "spectral separation needs point centers",
                )),
            })
            .collect::<Result<_>>()?,
        None => reference
            .centroids(points)?
            .into_iter()
            .map(|c| c.expect("non-empty clusters"))
            .collect(),
    };
    let residual: Vec<Point> = points
        .iter()
        .zip(&reference.labels)
        .map(|(x, &l)| x.iter().zip(&centers[l]).map(|(a, b)| a - b).collect())
        .collect();
    let norm = spectral_norm(&to_matrix(&residual), 1e-13, 200_000);
    let sizes = reference.sizes();
    let mut min_ratio = f64::INFINITY;
    let mut min_sep = f64::INFINITY;
    for (i, j) in (0..reference.k).tuple_combinations() {
        let sep = dist(&centers[i], &centers[j]);
        let scale = 1.0 / (sizes[i] as f64).sqrt() + 1.0 / (sizes[j] as f64).sqrt();
        min_sep = min_sep.min(sep);
        min_ratio = min_ratio.min(sep / scale);
    }
    let gamma = if min_sep == 0.0 {
        Some(0.0)
    } else if norm == 0.0 {
        None
    } else {
        Some(min_ratio / norm)
    };
    let threshold = 3.0 * (reference.k as f64).sqrt();
    Ok(GammaReport {
        gamma,
        spectral_norm: norm,
        threshold,
        exceeds_threshold: gamma.is_none_or(|g| g > threshold),
    })
}

/// How OPT estimates are obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct OptBudget {
    /// Use the exact oracle when `C(|F|, k)` is at most this.
    pub oracle_cap: u64,
    pub restarts: usize,
    pub seed: u64,
    pub search: SearchConfig,
}

impl Default for OptBudget {
    fn default() -> Self {
        OptBudget {
            oracle_cap: DEFAULT_COMBINATION_CAP,
            restarts: 20,
            seed: 0,
            search: SearchConfig::default(),
        }
    }
}

/// Exact optimum when affordable, otherwise the best of several local searches.
pub fn estimate_opt(instance: &Instance, budget: &OptBudget) -> Result<(Solution, OptProvenance)> {
    if binomial(instance.n_facilities(), instance.k()) <= budget.oracle_cap {
        Ok((brute_force_opt_with_cap(instance, budget.oracle_cap)?, OptProvenance::ExactOracle))
    } else {
        Ok((
            best_of_restarts(instance, &budget.search, budget.restarts, budget.seed)?,
            OptProvenance::UpperBoundLocalSearch,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrssEstimate {
    pub ratio: f64,
    pub opt_k: f64,
    pub opt_k_minus_1: f64,
    pub provenance: OptProvenance,
}

/// `OPT_k / OPT_{k−1}` for the instance's `k`.
pub fn orss_ratio(instance: &Instance, budget: &OptBudget) -> Result<OrssEstimate> {
    let k = instance.k();
    if k < 2 {
        return Err(Error::invalid("the OPT_k / OPT_(k-1) ratio needs k >= 2"));
    }
    let (opt_k, p1) = estimate_opt(instance, budget)?;
    let (opt_km1, p2) = estimate_opt(&instance.with_k(k - 1)?, budget)?;
    if opt_km1.cost == 0.0 {
        return Err(Error::DegenerateInstance(format!("OPT_{} is zero", k - 1)));
    }
    let provenance = if p1 == OptProvenance::ExactOracle && p2 == OptProvenance::ExactOracle {
        OptProvenance::ExactOracle
    } else {
        OptProvenance::UpperBoundLocalSearch
    };
    Ok(OrssEstimate {
        ratio: opt_k.cost / opt_km1.cost,
        opt_k: opt_k.cost,
        opt_k_minus_1: opt_km1.cost,
        provenance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStructure {
    pub size: usize,
    /// `Σ_{x ∈ C_i} cost(x, c_i)`.
    pub cost: f64,
    /// `|IR^{ε²}_i ∩ C_i|`.
    pub inner_ring_size: usize,
    /// Local centers inside `IR^ε_i`.
    pub local_centers_in_ring: usize,
    /// The unique local center inside `IR^ε_i`, if there is exactly one.
    pub matched_center: Option<usize>,
    /// Fraction of `IR^{ε²}_i ∩ C_i` served by the matched center.
    pub captured_fraction: f64,
    /// Clients of other clusters served by the matched center.
    pub foreign_clients: usize,
    pub cheap: bool,
    pub good: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub clusters: Vec<ClusterStructure>,
    pub good_cluster_count: usize,
    /// Agreement under the best one-to-one matching of local and reference clusters.
    pub accuracy: f64,
}

/// Inner-ring diagnostics of a local solution against a reference clustering.
///
/// Ring membership compares costs: a point `x` lies in `IR^{ε₀}_i` when
/// `cost(x, c_i) <= ε₀ · β · OPT / |C_i|`. A cluster counts as good when it is
/// cheap (`Σ g_x <= ε³ β OPT`), has a matched local center, that center serves
/// at least a `1 − ε` fraction of `IR^{ε²}_i ∩ C_i`, and it serves at most
/// `ε · |IR^{ε²}_i ∩ C_i|` clients of other clusters.
pub fn structure_report(
    instance: &Instance,
    local: &Solution,
    reference: &LabeledClustering,
    beta: f64,
    eps: f64,
    opt_reference: f64,
) -> Result<StructureReport> {
    if !(beta > 0.0) || !(eps > 0.0) {
        return Err(Error::invalid("beta and eps must be positive"));
    }
    if !(opt_reference >= 0.0 && opt_reference.is_finite()) {
        return Err(Error::invalid("opt_reference must be finite and >= 0"));
    }
    if local.assignment.len() != instance.n_clients() {
        return Err(Error::invalid("local solution does not match the instance"));
    }
    let centers = reference_centers(instance, reference)?;
    let sizes = reference.sizes();
    let p = instance.p();
    let mut clusters = Vec::with_capacity(reference.k);

    for (i, members) in reference.members().iter().enumerate() {
        let scale = beta * opt_reference / sizes[i] as f64;
        let outer = eps * scale;
        let inner = eps * eps * scale;
        let g: Vec<f64> = members
            .iter()
            .map(|&x| instance.cost_to_center(x, &centers[i]))
            .collect::<Result<_>>()?;
        let cost: f64 = g.iter().sum();
        let ring: Vec<usize> = members
            .iter()
            .zip(&g)
            .filter(|(_, &gx)| gx <= inner)
            .map(|(&x, _)| x)
            .collect();
        let mut in_ring = Vec::new();
        for &f in &local.centers {
            let d = instance.facility_center_distance(f, &centers[i])?;
            if powered(d, p) <= outer {
                in_ring.push(f);
            }
        }
        let matched = (in_ring.len() == 1).then(|| in_ring[0]);
        let (captured_fraction, foreign_clients) = match matched {
            None => (0.0, 0),
            Some(f) => {
                let captured = ring.iter().filter(|&&x| local.assignment[x] == f).count();
                let fraction = if ring.is_empty() {
                    1.0
                } else {
                    captured as f64 / ring.len() as f64
                };
                let foreign = (0..instance.n_clients())
                    .filter(|&x| reference.labels[x] != i && local.assignment[x] == f)
                    .count();
                (fraction, foreign)
            }
        };
        let cheap = cost <= eps.powi(3) * beta * opt_reference;
        let good = cheap
            && matched.is_some()
            && captured_fraction >= 1.0 - eps
            && foreign_clients as f64 <= eps * ring.len() as f64;
        clusters.push(ClusterStructure {
            size: sizes[i],
            cost,
            inner_ring_size: ring.len(),
            local_centers_in_ring: in_ring.len(),
            matched_center: matched,
            captured_fraction,
            foreign_clients,
            cheap,
            good,
        });
    }

    let accuracy = matching_accuracy(&local.labels(), local.centers.len(), &reference.labels, reference.k)?;
    Ok(StructureReport {
        good_cluster_count: clusters.iter().filter(|c| c.good).count(),
        clusters,
        accuracy,
    })
}

/// Fraction of points whose labels agree under the best one-to-one matching
/// between the two label sets. Exact (Hungarian) for up to 64 clusters, greedy
/// on the contingency table beyond.
pub fn matching_accuracy(a: &[usize], ka: usize, b: &[usize], kb: usize) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid("label vectors differ in length"));
    }
    if a.is_empty() {
        return Ok(1.0);
    }
    let size = ka.max(kb);
    let mut table = vec![vec![0i64; size]; size];
    for (&x, &y) in a.iter().zip(b) {
        if x >= ka || y >= kb {
            return Err(Error::invalid("label out of range"));
        }
        table[x][y] += 1;
    }
    let agreement = if size <= 64 {
        let weights = Matrix::from_rows(table).expect("square table");
        kuhn_munkres(&weights).0
    } else {
        let mut cells: Vec<(i64, usize, usize)> = table
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &c)| (c, i, j)))
            .collect();
        cells.sort_by(|u, v| v.0.cmp(&u.0).then((u.1, u.2).cmp(&(v.1, v.2))));
        let (mut used_a, mut used_b) = (vec![false; size], vec![false; size]);
        let mut total = 0;
        for (c, i, j) in cells {
            if !used_a[i] && !used_b[j] {
                used_a[i] = true;
                used_b[j] = true;
                total += c;
            }
        }
        total
    };
    Ok(agreement as f64 / a.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationWitness {
    /// Row-major client × facility cost multipliers, each in `[1, alpha]`.
    pub multipliers: Vec<f64>,
    pub new_optimum: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationResult {
    pub falsified: bool,
    pub witness: Option<PerturbationWitness>,
    /// Number of perturbations evaluated.
    pub trials: usize,
    pub alpha: f64,
    pub base_optimum: Vec<usize>,
}

/// Optimum of the instance with costs scaled by `multipliers`.
pub fn optimum_under_perturbation(
    instance: &Instance,
    multipliers: &[f64],
    oracle: OracleKind,
) -> Result<Solution> {
    exact_opt(&instance.perturbed(multipliers)?, oracle)
}

/// Searches for an α-perturbation that changes the optimal center set.
///
/// Each trial draws an independent multiplier per (client, facility) pair,
/// log-uniform in `[1, α]`, and re-solves exactly. Returns at the first
/// perturbation whose optimum differs from the unperturbed one.
pub fn resilience_falsifier(
    instance: &Instance,
    alpha: f64,
    trials: usize,
    seed: u64,
    oracle_cap: u64,
) -> Result<PerturbationResult> {
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha = {alpha} must be >= 1")));
    }
    let combos = binomial(instance.n_facilities(), instance.k());
    if combos > oracle_cap {
        return Err(Error::limit(format!(
            "C({}, {}) = {combos} exceeds the oracle cap {oracle_cap}",
            instance.n_facilities(),
            instance.k()
        )));
    }
    let oracle = OracleKind::Enumerate { cap: oracle_cap };
    let base = exact_opt(instance, oracle)?;
    let entries = instance.n_clients() * instance.n_facilities();
    let log_alpha = alpha.ln();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..trials {
        let multipliers: Vec<f64> = (0..entries)
            .map(|_| {
                if log_alpha == 0.0 {
                    1.0
                } else {
                    (rng.random::<f64>() * log_alpha).exp().clamp(1.0, alpha)
                }
            })
            .collect();
        let perturbed = optimum_under_perturbation(instance, &multipliers, oracle)?;
        if perturbed.centers != base.centers {
            return Ok(PerturbationResult {
                falsified: true,
                witness: Some(PerturbationWitness {
                    multipliers,
                    new_optimum: perturbed.centers,
                }),
                trials: t + 1,
                alpha,
                base_optimum: base.centers,
            });
        }
    }
    Ok(PerturbationResult {
        falsified: false,
        witness: None,
        trials,
        alpha,
        base_optimum: base.centers,
    })
}

/// All k-subsets with no strictly improving move within `swap_budget` exchanges.
pub fn enumerate_local_optima(
    instance: &Instance,
    swap_budget: usize,
    cap: u64,
) -> Result<Vec<Vec<usize>>> {
    let combos = binomial(instance.n_facilities(), instance.k());
    if combos > cap {
        return Err(Error::limit(format!("{combos} center sets exceed the cap {cap}")));
    }
    let mut out = Vec::new();
    for centers in (0..instance.n_facilities()).combinations(instance.k()) {
        if locally_optimal(instance, &centers, swap_budget, 0.0)? {
            out.push(centers);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalOptimaReport {
    pub holds: bool,
    pub swap_budget: usize,
    pub optimum: Vec<usize>,
    pub local_optima: Vec<Vec<usize>>,
}

/// Checks that every locally optimal solution at swap budget `⌈2/(α − 3)⌉`
/// (threshold 0) is the optimal center set. A `false` on an instance believed
/// to be α-resilient is a red flag, not a proof of anything.
pub fn verify_local_optima(instance: &Instance, alpha: f64, cap: u64) -> Result<LocalOptimaReport> {
    if !(alpha > 3.0) {
        return Err(Error::invalid(format!("alpha = {alpha} must exceed 3")));
    }
    if instance.p() != 1.0 {
        return Err(Error::invalid("the local-optimality check is stated for k-median (p = 1)"));
    }
    let swap_budget = ((2.0 / (alpha - 3.0)).ceil() as usize).clamp(1, instance.k());
    let optimum = brute_force_opt_with_cap(instance, cap)?;
    let local_optima = enumerate_local_optima(instance, swap_budget, cap)?;
    Ok(LocalOptimaReport {
        holds: local_optima.iter().all(|c| *c == optimum.centers),
        swap_budget,
        optimum: optimum.centers,
        local_optima,
    })
}
