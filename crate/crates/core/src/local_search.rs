//! Multi-swap local search.
//!
//! Starting from an initial set of at most `k` centers, the solver repeatedly
//! looks for a move that exchanges at most `swap_budget` centers and lowers the
//! cost to at most `(1 - θ)` times the current cost, where `θ = ε/n` by default.
//! It stops when no such move exists, so the result is certified locally optimal
//! with respect to that neighborhood.
//!
//! A move `(drop, add)` removes the facilities in `drop` and opens those in
//! `add`. Moves with more drops than adds are never considered: keeping a center
//! never increases the cost. When the incumbent has fewer than `k` centers the
//! free slots are filled before anything is dropped.
//!
//! Single exchanges are evaluated for all drops at once per added facility, using
//! the nearest and second-nearest open center of each client, which makes a full
//! 1-swap scan `O(n · |F|)`. Larger exchanges recompute the affected clients
//! directly and are meant for small neighborhoods.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{evaluate_cost, Instance, Solution, REL_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Uniformly random k-subset of the facilities.
    Random { seed: u64 },
    /// Repeatedly open the facility that lowers the cost most.
    Greedy,
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Scan exchange sizes 1, 2, ... and take the first qualifying move.
    FirstImprovement,
    /// Evaluate the whole neighborhood and take the cheapest move.
    BestImprovement,
}

/// Relative gain a move must achieve to be accepted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImprovementRule {
    /// `cost' <= (1 - ε/n) cost`.
    EpsOverN,
    /// `cost' <= (1 - 1/n) cost`.
    OneOverN,
    /// `cost' <= (1 - θ) cost` for a fixed θ in `[0, 1)`; θ = 0 asks for any
    /// strict improvement.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Maximum number of centers exchanged by a single move.
    pub swap_budget: usize,
    pub eps: f64,
    pub rule: ImprovementRule,
    pub init: Init,
    pub strategy: Strategy,
    pub max_iterations: Option<usize>,
    /// Threads used to scan single exchanges.
    pub workers: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            swap_budget: 1,
            eps: 0.1,
            rule: ImprovementRule::EpsOverN,
            init: Init::Random { seed: 0 },
            strategy: Strategy::FirstImprovement,
            max_iterations: None,
            workers: 1,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self, instance: &Instance) -> Result<()> {
        if self.swap_budget == 0 {
            return Err(Error::invalid("swap budget must be >= 1"));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::invalid(format!("eps = {} must lie in (0, 1)", self.eps)));
        }
        if let ImprovementRule::Fixed(t) = self.rule {
            if !(0.0..1.0).contains(&t) {
                return Err(Error::invalid(format!("threshold {t} must lie in [0, 1)")));
            }
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers must be >= 1"));
        }
        if let Init::Explicit(c) = &self.init {
            if c.is_empty() || c.len() > instance.k() {
                return Err(Error::invalid(format!(
                    "explicit initial set has {} centers, need 1..={}",
                    c.len(),
                    instance.k()
                )));
            }
        }
        Ok(())
    }

    /// The relative gain θ for an instance with `n` clients.
    pub fn threshold(&self, n: usize) -> f64 {
        match self.rule {
            ImprovementRule::EpsOverN => self.eps / n as f64,
            ImprovementRule::OneOverN => 1.0 / n as f64,
            ImprovementRule::Fixed(t) => t,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub iterations: usize,
    /// Number of accepted moves per exchange size.
    pub swap_sizes_used: BTreeMap<usize, usize>,
    /// Cost of the incumbent after initialization and after every accepted move.
    pub cost_sequence: Vec<f64>,
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Move {
    pub drop: Vec<usize>,
    pub add: Vec<usize>,
}

impl Move {
    pub fn size(&self) -> usize {
        self.drop.len().max(self.add.len())
    }

    pub fn apply(&self, centers: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = centers
            .iter()
            .copied()
            .filter(|c| !self.drop.contains(c))
            .chain(self.add.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

#[inline]
fn improves(candidate: f64, current: f64, theta: f64) -> bool {
    candidate < current && candidate <= (1.0 - theta) * current - REL_TOL * current
}

/// Nearest and second-nearest open center per client.
struct Incumbent {
    centers: Vec<usize>,
    is_center: Vec<bool>,
    /// Position of a facility in `centers`, or `usize::MAX`.
    position: Vec<usize>,
    near1: Vec<(usize, f64)>,
    near2: Vec<f64>,
    cost: f64,
}

impl Incumbent {
    fn new(instance: &Instance, centers: &[usize]) -> Self {
        let m = instance.n_facilities();
        let mut is_center = vec![false; m];
        let mut position = vec![usize::MAX; m];
        for (i, &c) in centers.iter().enumerate() {
            is_center[c] = true;
            position[c] = i;
        }
        let mut near1 = Vec::with_capacity(instance.n_clients());
        let mut near2 = Vec::with_capacity(instance.n_clients());
        let mut cost = 0.0;
        for x in 0..instance.n_clients() {
            let mut b1 = (usize::MAX, f64::INFINITY);
            let mut b2 = f64::INFINITY;
            for &c in centers {
                let v = instance.cost(x, c);
                if v < b1.1 {
                    b2 = b1.1;
                    b1 = (c, v);
                } else if v < b2 {
                    b2 = v;
                }
            }
            cost += b1.1;
            near1.push(b1);
            near2.push(b2);
        }
        Incumbent {
            centers: centers.to_vec(),
            is_center,
            position,
            near1,
            near2,
            cost,
        }
    }

    fn room(&self, k: usize) -> usize {
        k - self.centers.len()
    }

    fn closed(&self) -> Vec<usize> {
        (0..self.is_center.len()).filter(|&f| !self.is_center[f]).collect()
    }
}

/// Best (or first) single exchange among the given closed facilities.
fn scan_single(
    instance: &Instance,
    inc: &Incumbent,
    adds: &[usize],
    theta: f64,
    strategy: Strategy,
) -> Option<(Move, f64)> {
    let room = inc.room(instance.k());
    let mut corr = vec![0.0; inc.centers.len()];
    let mut best: Option<(Move, f64)> = None;
    for &a in adds {
        let mut total = 0.0;
        corr.iter_mut().for_each(|c| *c = 0.0);
        for x in 0..instance.n_clients() {
            let ca = instance.cost(x, a);
            let (r, n1) = inc.near1[x];
            let kept = ca.min(n1);
            total += kept;
            if room == 0 {
                corr[inc.position[r]] += ca.min(inc.near2[x]) - kept;
            }
        }
        let mut consider = |mv: Move, cost: f64| -> bool {
            if !improves(cost, inc.cost, theta) {
                return false;
            }
            match strategy {
                Strategy::FirstImprovement => {
                    best = Some((mv, cost));
                    true
                }
                Strategy::BestImprovement => {
                    let better = match &best {
                        None => true,
                        Some((bm, bc)) => cost < *bc || (cost == *bc && mv < *bm),
                    };
                    if better {
                        best = Some((mv, cost));
                    }
                    false
                }
            }
        };
        if room > 0 {
            if consider(Move { drop: vec![], add: vec![a] }, total) {
                return best;
            }
        } else {
            for (i, &r) in inc.centers.iter().enumerate() {
                if consider(Move { drop: vec![r], add: vec![a] }, total + corr[i]) {
                    return best;
                }
            }
        }
    }
    best
}

fn scan_single_parallel(
    instance: &Instance,
    inc: &Incumbent,
    theta: f64,
    strategy: Strategy,
    workers: usize,
) -> Option<(Move, f64)> {
    let adds = inc.closed();
    if workers <= 1 || adds.len() < 2 * workers {
        return scan_single(instance, inc, &adds, theta, strategy);
    }
    let chunk = adds.len().div_ceil(workers);
    let proposals: Vec<Option<(Move, f64)>> = std::thread::scope(|s| {
        let handles: Vec<_> = adds
            .chunks(chunk)
            .map(|part| s.spawn(move || scan_single(instance, inc, part, theta, strategy)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    match strategy {
        // chunks are in scan order, so the earliest proposal is the sequential one
        Strategy::FirstImprovement => proposals.into_iter().flatten().next(),
        Strategy::BestImprovement => proposals.into_iter().flatten().min_by(|a, b| {
            a.1.partial_cmp(&b.1).expect("finite costs").then_with(|| a.0.cmp(&b.0))
        }),
    }
}

/// Exchanges of exactly `t` added facilities.
fn scan_size(
    instance: &Instance,
    inc: &Incumbent,
    t: usize,
    theta: f64,
    strategy: Strategy,
) -> Option<(Move, f64)> {
    let n = instance.n_clients();
    let n_drop = t.saturating_sub(inc.room(instance.k()));
    if n_drop > inc.centers.len() {
        return None;
    }
    let closed = inc.closed();
    let mut best: Option<(Move, f64)> = None;
    let mut remaining = vec![0.0; n];
    for drop in inc.centers.iter().copied().combinations(n_drop) {
        let kept: Vec<usize> = inc.centers.iter().copied().filter(|c| !drop.contains(c)).collect();
        for (x, r) in remaining.iter_mut().enumerate() {
            *r = kept
                .iter()
                .map(|&c| instance.cost(x, c))
                .fold(f64::INFINITY, f64::min);
        }
        for add in closed.iter().copied().combinations(t) {
            let cost: f64 = (0..n)
                .map(|x| {
                    add.iter()
                        .map(|&a| instance.cost(x, a))
                        .fold(remaining[x], f64::min)
                })
                .sum();
            if !improves(cost, inc.cost, theta) {
                continue;
            }
            let mv = Move { drop: drop.clone(), add };
            match strategy {
                Strategy::FirstImprovement => return Some((mv, cost)),
                Strategy::BestImprovement => {
                    let better = match &best {
                        None => true,
                        Some((bm, bc)) => cost < *bc || (cost == *bc && mv < *bm),
                    };
                    if better {
                        best = Some((mv, cost));
                    }
                }
            }
        }
    }
    best
}

fn search_neighborhood(
    instance: &Instance,
    inc: &Incumbent,
    swap_budget: usize,
    theta: f64,
    strategy: Strategy,
    workers: usize,
) -> Option<(Move, f64)> {
    let max_t = swap_budget.min(instance.n_facilities() - inc.centers.len());
    let mut best: Option<(Move, f64)> = None;
    for t in 1..=max_t {
        let found = if t == 1 {
            scan_single_parallel(instance, inc, theta, strategy, workers)
        } else {
            scan_size(instance, inc, t, theta, strategy)
        };
        match strategy {
            Strategy::FirstImprovement => {
                if found.is_some() {
                    return found;
                }
            }
            Strategy::BestImprovement => {
                if let Some((mv, c)) = found {
                    let better = match &best {
                        None => true,
                        Some((bm, bc)) => c < *bc || (c == *bc && mv < *bm),
                    };
                    if better {
                        best = Some((mv, c));
                    }
                }
            }
        }
    }
    best
}

fn checked_centers(instance: &Instance, centers: &[usize]) -> Result<Vec<usize>> {
    Ok(evaluate_cost(instance, centers)?.centers)
}

/// Returns a move within `swap_budget` exchanges whose cost is at most
/// `(1 - threshold)` times the cost of `centers`, if one exists.
pub fn find_improving_move(
    instance: &Instance,
    centers: &[usize],
    swap_budget: usize,
    threshold: f64,
    strategy: Strategy,
) -> Result<Option<(Move, f64)>> {
    let centers = checked_centers(instance, centers)?;
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::invalid(format!("threshold {threshold} must lie in [0, 1)")));
    }
    let inc = Incumbent::new(instance, &centers);
    Ok(search_neighborhood(instance, &inc, swap_budget, threshold, strategy, 1))
}

/// True iff no move exchanging at most `swap_budget` centers reaches
/// `(1 - threshold)` times the current cost. With `threshold = 0` this is plain
/// local optimality.
pub fn locally_optimal(
    instance: &Instance,
    centers: &[usize],
    swap_budget: usize,
    threshold: f64,
) -> Result<bool> {
    Ok(find_improving_move(instance, centers, swap_budget, threshold, Strategy::FirstImprovement)?
        .is_none())
}

/// Greedy initialization: open facilities one at a time, each time choosing the
/// one that lowers the cost most (lowest index on ties).
pub fn greedy_centers(instance: &Instance) -> Vec<usize> {
    let n = instance.n_clients();
    let mut current = vec![f64::INFINITY; n];
    let mut open = vec![false; instance.n_facilities()];
    let mut centers = Vec::with_capacity(instance.k());
    for _ in 0..instance.k() {
        let mut best = (usize::MAX, f64::INFINITY);
        for f in (0..instance.n_facilities()).filter(|&f| !open[f]) {
            let total: f64 = (0..n).map(|x| current[x].min(instance.cost(x, f))).sum();
            if total < best.1 {
                best = (f, total);
            }
        }
        let f = best.0;
        open[f] = true;
        centers.push(f);
        for (x, c) in current.iter_mut().enumerate() {
            *c = c.min(instance.cost(x, f));
        }
    }
    centers.sort_unstable();
    centers
}

pub fn random_centers(instance: &Instance, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = rand::seq::index::sample(&mut rng, instance.n_facilities(), instance.k()).into_vec();
    c.sort_unstable();
    c
}

/// Runs local search to a locally optimal solution.
///
/// Every accepted move lowers the cost by at least a factor `(1 - θ)`, so the
/// number of iterations is bounded by `log(cost₀ / cost_min) / log(1 / (1 - θ))`
/// in addition to `max_iterations`.
pub fn local_search(instance: &Instance, config: &SearchConfig) -> Result<(Solution, SearchTrace)> {
    config.validate(instance)?;
    let start = Instant::now();
    let initial = match &config.init {
        Init::Random { seed } => random_centers(instance, *seed),
        Init::Greedy => greedy_centers(instance),
        Init::Explicit(c) => checked_centers(instance, c)?,
    };
    let theta = config.threshold(instance.n_clients());
    let mut inc = Incumbent::new(instance, &initial);
    let mut trace = SearchTrace {
        cost_sequence: vec![inc.cost],
        ..Default::default()
    };
    while config.max_iterations.is_none_or(|cap| trace.iterations < cap) {
        let Some((mv, _)) = search_neighborhood(
            instance,
            &inc,
            config.swap_budget,
            theta,
            config.strategy,
            config.workers,
        ) else {
            break;
        };
        let next = Incumbent::new(instance, &mv.apply(&inc.centers));
        if !improves(next.cost, inc.cost, theta) {
            // the incremental estimate and the recomputed cost disagree
            break;
        }
        inc = next;
        trace.iterations += 1;
        *trace.swap_sizes_used.entry(mv.size()).or_insert(0) += 1;
        trace.cost_sequence.push(inc.cost);
    }
    trace.wall_time = start.elapsed();
    Ok((evaluate_cost(instance, &inc.centers)?, trace))
}

/// Best of `restarts` random-start local searches (seeds `seed..seed + restarts`).
pub fn best_of_restarts(
    instance: &Instance,
    base: &SearchConfig,
    restarts: usize,
    seed: u64,
) -> Result<Solution> {
    let mut best: Option<Solution> = None;
    for r in 0..restarts.max(1) as u64 {
        let cfg = SearchConfig {
            init: Init::Random { seed: seed.wrapping_add(r) },
            ..base.clone()
        };
        let (sol, _) = local_search(instance, &cfg)?;
        if best.as_ref().is_none_or(|b| sol.cost < b.cost) {
            best = Some(sol);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Point;
    use rand::Rng;

    fn line_instance(k: usize) -> Instance {
        let pts: Vec<Point> = [0.0, 1.0, 10.0, 11.0].iter().map(|&v| vec![v]).collect();
        Instance::from_points(pts, None, k, 1.0).unwrap()
    }

    fn random_instance(seed: u64, n: usize, m: usize, k: usize, p: f64) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = |c: usize| -> Vec<Point> {
            (0..c).map(|_| vec![rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)]).collect()
        };
        let clients = pts(n);
        let facilities = pts(m);
        Instance::from_points(clients, Some(facilities), k, p).unwrap()
    }

    fn exhaustive_single_swap_improves(inst: &Instance, centers: &[usize]) -> bool {
        let cur = evaluate_cost(inst, centers).unwrap().cost;
        for &r in centers {
            for a in (0..inst.n_facilities()).filter(|f| !centers.contains(f)) {
                let mv = Move { drop: vec![r], add: vec![a] };
                let c = evaluate_cost(inst, &mv.apply(centers)).unwrap().cost;
                if c < cur * (1.0 - 1e-9) {
                    return true;
                }
            }
        }
        false
    }

    #[test]
    fn single_client_single_facility() {
        let inst = Instance::from_points(vec![vec![0.0, 0.0]], Some(vec![vec![3.0, 4.0]]), 1, 2.0)
            .unwrap();
        let (sol, trace) = local_search(&inst, &SearchConfig::default()).unwrap();
        assert_eq!(sol.centers, vec![0]);
        assert_eq!(sol.cost, 25.0);
        assert_eq!(trace.iterations, 0);
    }

    #[test]
    fn line_instance_finds_two_clusters() {
        let inst = line_instance(2);
        let (sol, _) = local_search(
            &inst,
            &SearchConfig {
                init: Init::Explicit(vec![0, 1]),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(sol.cost, 2.0);
    }

    #[test]
    fn incremental_scan_agrees_with_exhaustive_check() {
        for seed in 0..30 {
            let inst = random_instance(seed, 9, 7, 3, if seed % 2 == 0 { 1.0 } else { 2.0 });
            let centers = random_centers(&inst, seed);
            let fast = !locally_optimal(&inst, &centers, 1, 0.0).unwrap();
            assert_eq!(fast, exhaustive_single_swap_improves(&inst, &centers), "seed {seed}");
        }
    }

    #[test]
    fn reported_move_really_improves() {
        let inst = random_instance(5, 10, 8, 3, 1.0);
        let (opt, _) = local_search(
            &inst,
            &SearchConfig {
                swap_budget: 3,
                rule: ImprovementRule::Fixed(0.0),
                ..Default::default()
            },
        )
        .unwrap();
        // replace one center of the local optimum by the worst facility
        let worst = (0..8)
            .filter(|f| !opt.centers.contains(f))
            .max_by(|&a, &b| {
                let ca: f64 = (0..10).map(|x| inst.cost(x, a)).sum();
                let cb: f64 = (0..10).map(|x| inst.cost(x, b)).sum();
                ca.partial_cmp(&cb).unwrap()
            })
            .unwrap();
        let mut bad = opt.centers.clone();
        bad[0] = worst;
        let (mv, cost) = find_improving_move(&inst, &bad, 1, 0.0, Strategy::BestImprovement)
            .unwrap()
            .expect("an improving swap exists");
        let recomputed = evaluate_cost(&inst, &mv.apply(&bad)).unwrap().cost;
        assert!((recomputed - cost).abs() <= 1e-9 * recomputed.max(1.0));
        assert!(recomputed < evaluate_cost(&inst, &bad).unwrap().cost);
        assert!(!locally_optimal(&inst, &bad, 1, 0.0).unwrap());
    }

    #[test]
    fn trace_is_geometrically_decreasing() {
        let inst = random_instance(9, 40, 30, 4, 2.0);
        let cfg = SearchConfig {
            eps: 0.5,
            ..Default::default()
        };
        let (_, trace) = local_search(&inst, &cfg).unwrap();
        let theta = cfg.threshold(40);
        for w in trace.cost_sequence.windows(2) {
            assert!(w[1] <= (1.0 - theta) * w[0]);
        }
        assert_eq!(trace.iterations + 1, trace.cost_sequence.len());
        assert_eq!(trace.swap_sizes_used.values().sum::<usize>(), trace.iterations);
    }

    #[test]
    fn fills_free_slots_before_swapping() {
        let inst = line_instance(2);
        let (sol, trace) = local_search(
            &inst,
            &SearchConfig {
                init: Init::Explicit(vec![0]),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(sol.centers.len(), 2);
        assert_eq!(sol.cost, 2.0);
        assert!(trace.iterations >= 1);
    }

    #[test]
    fn greedy_init_is_deterministic() {
        let inst = random_instance(2, 20, 15, 3, 1.0);
        assert_eq!(greedy_centers(&inst), greedy_centers(&inst));
        assert_eq!(greedy_centers(&inst).len(), 3);
    }

    #[test]
    fn parallel_matches_sequential() {
        for strategy in [Strategy::BestImprovement, Strategy::FirstImprovement] {
            for seed in 0..5 {
                let inst = random_instance(100 + seed, 50, 40, 4, 2.0);
                let base = SearchConfig {
                    strategy,
                    init: Init::Random { seed },
                    ..Default::default()
                };
                let seq = local_search(&inst, &base).unwrap();
                let par = local_search(&inst, &SearchConfig { workers: 4, ..base }).unwrap();
                assert_eq!(seq.0, par.0);
                assert_eq!(seq.1.cost_sequence, par.1.cost_sequence);
            }
        }
    }

    #[test]
    fn config_errors() {
        let inst = line_instance(2);
        for cfg in [
            SearchConfig { swap_budget: 0, ..Default::default() },
            SearchConfig { eps: 1.0, ..Default::default() },
            SearchConfig { init: Init::Explicit(vec![0, 1, 2]), ..Default::default() },
            SearchConfig { workers: 0, ..Default::default() },
        ] {
            assert!(matches!(local_search(&inst, &cfg), Err(Error::InvalidArgument(_))));
        }
    }

    #[test]
    fn max_iterations_caps_the_run() {
        let inst = random_instance(4, 60, 60, 5, 2.0);
        let (_, trace) = local_search(
            &inst,
            &SearchConfig {
                max_iterations: Some(1),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(trace.iterations <= 1);
    }
}
