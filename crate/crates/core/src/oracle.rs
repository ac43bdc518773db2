//! Exact solvers used as ground truth at desk scale.
//!
//! [`brute_force_opt`] enumerates every k-subset of facilities;
//! [`branch_and_bound_opt`] explores the same lexicographic order but prunes
//! subtrees whose per-client lower bound cannot beat the incumbent. Both return
//! the lexicographically smallest optimal k-subset.

use crate::error::{Error, Result};
use crate::instance::{evaluate_cost, Instance, Solution, REL_TOL};

pub const DEFAULT_COMBINATION_CAP: u64 = 1_000_000;
pub const DEFAULT_NODE_CAP: u64 = 50_000_000;

/// `C(n, k)`, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Which exact solver to run and with which limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    Enumerate { cap: u64 },
    BranchAndBound { node_cap: u64 },
}

impl Default for OracleKind {
    fn default() -> Self {
        OracleKind::Enumerate {
            cap: DEFAULT_COMBINATION_CAP,
        }
    }
}

pub fn exact_opt(instance: &Instance, kind: OracleKind) -> Result<Solution> {
    match kind {
        OracleKind::Enumerate { cap } => brute_force_opt_with_cap(instance, cap),
        OracleKind::BranchAndBound { node_cap } => branch_and_bound_opt(instance, node_cap),
    }
}

pub fn brute_force_opt(instance: &Instance) -> Result<Solution> {
    brute_force_opt_with_cap(instance, DEFAULT_COMBINATION_CAP)
}

pub fn brute_force_opt_with_cap(instance: &Instance, cap: u64) -> Result<Solution> {
    let (m, k) = (instance.n_facilities(), instance.k());
    let combos = binomial(m, k);
    if combos > cap {
        return Err(Error::limit(format!(
            "C({m}, {k}) = {combos} center sets exceed the oracle cap {cap}"
        )));
    }
    let n = instance.n_clients();
    let mut mins = vec![vec![f64::INFINITY; n]; k + 1];
    let mut chosen = Vec::with_capacity(k);
    let mut best: Option<(f64, Vec<usize>)> = None;
    enumerate(instance, 0, &mut chosen, &mut mins, &mut best);
    let (_, centers) = best.expect("at least one k-subset");
    evaluate_cost(instance, &centers)
}

fn enumerate(
    instance: &Instance,
    start: usize,
    chosen: &mut Vec<usize>,
    mins: &mut [Vec<f64>],
    best: &mut Option<(f64, Vec<usize>)>,
) {
    let depth = chosen.len();
    let k = instance.k();
    if depth == k {
        let cost: f64 = mins[depth].iter().sum();
        if best
            .as_ref()
            .is_none_or(|(b, _)| cost < *b - REL_TOL * b.abs())
        {
            *best = Some((cost, chosen.clone()));
        }
        return;
    }
    let last = instance.n_facilities() - (k - depth);
    for f in start..=last {
        let (lo, hi) = mins.split_at_mut(depth + 1);
        for (x, slot) in hi[0].iter_mut().enumerate() {
            *slot = lo[depth][x].min(instance.cost(x, f));
        }
        chosen.push(f);
        enumerate(instance, f + 1, chosen, mins, best);
        chosen.pop();
    }
}

/// Exact optimum by depth-first branch and bound. Fails with `ResourceLimit`
/// once more than `node_cap` search nodes have been expanded.
pub fn branch_and_bound_opt(instance: &Instance, node_cap: u64) -> Result<Solution> {
    let (n, m, k) = (instance.n_clients(), instance.n_facilities(), instance.k());
    // suffix[i][x] = min over facilities >= i of cost(x, f)
    let mut suffix = vec![vec![f64::INFINITY; n]; m + 1];
    for f in (0..m).rev() {
        for x in 0..n {
            suffix[f][x] = suffix[f + 1][x].min(instance.cost(x, f));
        }
    }
    let mut search = Bnb {
        instance,
        suffix,
        best: None,
        nodes: 0,
        node_cap,
    };
    let mut chosen = Vec::with_capacity(k);
    search.visit(0, &mut chosen, vec![f64::INFINITY; n])?;
    let (_, centers) = search.best.expect("at least one k-subset");
    evaluate_cost(instance, &centers)
}

struct Bnb<'a> {
    instance: &'a Instance,
    suffix: Vec<Vec<f64>>,
    best: Option<(f64, Vec<usize>)>,
    nodes: u64,
    node_cap: u64,
}

impl Bnb<'_> {
    fn visit(&mut self, next: usize, chosen: &mut Vec<usize>, current: Vec<f64>) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.node_cap {
            return Err(Error::limit(format!(
                "branch and bound expanded more than {} nodes",
                self.node_cap
            )));
        }
        let k = self.instance.k();
        if chosen.len() == k {
            let cost: f64 = current.iter().sum();
            if self
                .best
                .as_ref()
                .is_none_or(|(b, _)| cost < *b - REL_TOL * b.abs())
            {
                self.best = Some((cost, chosen.clone()));
            }
            return Ok(());
        }
        let m = self.instance.n_facilities();
        if m - next < k - chosen.len() {
            return Ok(());
        }
        if let Some((b, _)) = &self.best {
            let bound: f64 = current
                .iter()
                .zip(&self.suffix[next])
                .map(|(c, s)| c.min(*s))
                .sum();
            if bound >= *b - REL_TOL * b.abs() {
                return Ok(());
            }
        }
        let with: Vec<f64> = current
            .iter()
            .enumerate()
            .map(|(x, c)| c.min(self.instance.cost(x, next)))
            .collect();
        chosen.push(next);
        self.visit(next + 1, chosen, with)?;
        chosen.pop();
        self.visit(next + 1, chosen, current)
    }
}
