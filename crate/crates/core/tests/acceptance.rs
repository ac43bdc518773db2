//! End-to-end acceptance checks. Each check prints one PASS/FAIL line; the
//! process exits non-zero if any check fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use itertools::Itertools;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stabclust::experiment::{run_experiment, summarize, ExperimentGrid};
use stabclust::generators::{sample_gmm, LbDistance};
use stabclust::io::{read_table_path, Table};
use stabclust::local_search::best_of_restarts;
use stabclust::lp::lp_string;
use stabclust::oracle::{branch_and_bound_opt, DEFAULT_NODE_CAP};
use stabclust::spectral::{build_candidates, jl_embed, rank_m_project, spectral_ls, CandidateOrigin, NetMode, SpectralOptions};
use stabclust::{
    brute_force_opt, centroid_cost_decomposition, evaluate_cost, local_search, locally_optimal,
    measure_beta, Center, GmmConfig, ImprovementRule, Init, Instance, LabeledClustering, LbInstance,
    Point, SearchConfig, Strategy,
};

struct Check {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Check {
    Check { pass, detail: detail.into() }
}

type Rat = Ratio<i64>;

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Point> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(0.0..10.0)).collect()).collect()
}

fn lb_class_value(class: LbDistance, eps: Rat) -> Rat {
    let three = Rat::from_integer(3);
    match class {
        LbDistance::OptimalOwn => Rat::from_integer(1) + eps / three,
        LbDistance::OptimalCross => Rat::from_integer(7) + eps / three,
        LbDistance::LocalOwn => three,
        LbDistance::LocalCross => Rat::from_integer(5) + Rat::from_integer(2) * eps / three,
    }
}

fn rat_to_f64(r: Rat) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn tight_instance() -> Check {
    let mut notes = Vec::new();
    let mut ok = true;
    for k in [5usize, 10, 20] {
        for (num, den) in [(3i64, 10i64), (1, 2)] {
            let eps_r = Rat::new(num, den);
            let eps = num as f64 / den as f64;
            let lb = LbInstance::new(k, eps).unwrap();
            let inst = lb.instance(1.0).unwrap();
            let mut exact_dists = true;
            for c in 0..k * k {
                for f in 0..2 * k {
                    let want = rat_to_f64(lb_class_value(lb.distance_class(f, c), eps_r));
                    exact_dists &= (inst.cost(c, f) - want).abs() <= 1e-15 * want;
                }
            }
            let opt = evaluate_cost(&inst, &lb.optimal_centers()).unwrap();
            let loc = evaluate_cost(&inst, &lb.local_centers()).unwrap();
            let rational_cost = |assignment: &[usize]| -> Rat {
                assignment
                    .iter()
                    .enumerate()
                    .map(|(c, &f)| lb_class_value(lb.distance_class(f, c), eps_r))
                    .sum()
            };
            let kk = Rat::from_integer((k * k) as i64);
            let cost_o = rational_cost(&opt.assignment);
            let cost_l = rational_cost(&loc.assignment);
            let costs_ok = cost_o == kk * (Rat::from_integer(1) + eps_r / Rat::from_integer(3))
                && cost_l == kk * Rat::from_integer(3)
                && (opt.cost - rat_to_f64(cost_o)).abs() <= 1e-12 * opt.cost
                && (loc.cost - rat_to_f64(cost_l)).abs() <= 1e-12 * loc.cost;
            let needs_local = (k as f64) > 3.0 / eps;
            let is_local = locally_optimal(&inst, &lb.local_centers(), 1, 0.0).unwrap();
            let perturbed = inst.perturbed(&lb.diagonal_perturbation()).unwrap();
            let exact = branch_and_bound_opt(&perturbed, DEFAULT_NODE_CAP).unwrap();
            let o_kept = exact.centers == lb.optimal_centers();
            let cell_ok = exact_dists && costs_ok && (!needs_local || is_local) && o_kept;
            ok &= cell_ok;
            notes.push(format!(
                "k={k} eps={eps}: costs {} L-local {} O-after-perturbation {}",
                if costs_ok && exact_dists { "exact" } else { "WRONG" },
                if needs_local { is_local.to_string() } else { format!("{is_local} (not required)") },
                o_kept
            ));
        }
    }
    check(ok, notes.join("; "))
}

fn oracle_cost(clients: &[Point], facilities: &[Point], centers: &[usize], p: f64) -> f64 {
    clients
        .iter()
        .map(|x| {
            centers
                .iter()
                .map(|&f| sq(x, &facilities[f]).sqrt().powf(p))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

fn oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut instances, mut ratio_violations, mut moved, mut mismatches) = (0, 0, 0, 0);
    let mut worst: f64 = 1.0;
    while instances < 240 {
        let n = rng.random_range(4..=14);
        let m = rng.random_range(3..=12);
        let k = rng.random_range(1..=3usize.min(m));
        let p = if instances % 2 == 0 { 1.0 } else { 2.0 };
        let clients = random_points(&mut rng, n, 2);
        let facilities = random_points(&mut rng, m, 2);
        let inst = Instance::from_points(clients.clone(), Some(facilities.clone()), k, p).unwrap();
        // independent enumeration straight from coordinates
        let expected = (0..m)
            .combinations(k)
            .map(|c| oracle_cost(&clients, &facilities, &c, p))
            .fold(f64::INFINITY, f64::min);
        let opt = brute_force_opt(&inst).unwrap();
        if (opt.cost - expected).abs() > 1e-9 * expected.max(1e-12) {
            mismatches += 1;
        }
        let ls = best_of_restarts(&inst, &SearchConfig::default(), 20, instances as u64).unwrap();
        if ls.cost < opt.cost * (1.0 - 1e-9) {
            mismatches += 1;
        }
        if p == 1.0 {
            let r = if opt.cost > 0.0 { ls.cost / opt.cost } else { 1.0 };
            worst = worst.max(r);
            if r > 5.0 {
                ratio_violations += 1;
            }
        }
        let full = SearchConfig {
            swap_budget: k,
            rule: ImprovementRule::Fixed(0.0),
            strategy: Strategy::BestImprovement,
            init: Init::Explicit(opt.centers.clone()),
            ..SearchConfig::default()
        };
        let (sol, trace) = local_search(&inst, &full).unwrap();
        if trace.iterations != 0 || sol.centers != opt.centers {
            moved += 1;
        }
        instances += 1;
    }
    check(
        ratio_violations == 0 && moved == 0 && mismatches == 0,
        format!(
            "{instances} instances: ratio>5 violations {ratio_violations}, worst k-median ratio {worst:.4}, \
             optimum moved {moved}, oracle mismatches {mismatches}"
        ),
    )
}

fn decomposition_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(63);
    let mut worst_direct: f64 = 0.0;
    let mut worst_pairwise: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=40);
        let d = rng.random_range(1..=8);
        let scale = 10f64.powi(rng.random_range(-3..=3));
        let pts: Vec<Point> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0) * scale).collect()).collect();
        let cand: Point = (0..d).map(|_| rng.random_range(-2.0..2.0) * scale).collect();
        let (inertia, shift) = centroid_cost_decomposition(&pts, &cand).unwrap();
        let total: f64 = pts.iter().map(|x| sq(x, &cand)).sum();
        if total > 0.0 {
            worst_direct = worst_direct.max((total - (inertia + shift)).abs() / total);
        }
        let pairwise: f64 = pts
            .iter()
            .flat_map(|x| pts.iter().map(move |y| sq(x, y)))
            .sum::<f64>()
            / (2.0 * n as f64);
        if total > 0.0 {
            worst_pairwise = worst_pairwise.max((pairwise - inertia).abs() / total);
        }
    }
    check(
        worst_direct <= 1e-9 && worst_pairwise <= 1e-9,
        format!("1000 sets: worst relative error {worst_direct:.2e} (direct), {worst_pairwise:.2e} (pairwise)"),
    )
}

fn assignment_cost(points: &[Point], labels: &[usize], k: usize) -> f64 {
    let lc = LabeledClustering::new(labels.to_vec(), k).unwrap();
    let cents = lc.centroids(points).unwrap();
    points
        .iter()
        .zip(labels)
        .map(|(x, &l)| sq(x, cents[l].as_ref().unwrap()))
        .sum()
}

fn projection_sandwich() -> Check {
    let (n, d, k, eps) = (60, 30, 4, 0.25);
    let m = (k as f64 / eps).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut violations = 0;
    let mut max_upper: f64 = 0.0;
    for _ in 0..100 {
        let a: Vec<Point> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let proj = rank_m_project(&a, m).unwrap();
        // direct residual as an independent check of the reported value
        let direct: f64 = a.iter().zip(&proj.projected).map(|(x, y)| sq(x, y)).sum();
        if (direct - proj.residual_frobenius_sq).abs() > 1e-6 * direct {
            violations += 1;
        }
        let mut labels: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
        labels.rotate_left(rng.random_range(0..n));
        let full = assignment_cost(&a, &labels, k);
        let reduced = assignment_cost(&proj.projected, &labels, k) + proj.residual_frobenius_sq;
        if full > reduced * (1.0 + 1e-6) || reduced > (1.0 + eps) * full * (1.0 + 1e-6) {
            violations += 1;
        }
        max_upper = max_upper.max(reduced / full);
    }
    check(
        violations == 0,
        format!("100 trials, m = {m}: violations {violations}, max upper ratio {max_upper:.6}"),
    )
}

fn jl_contract() -> Check {
    let (n, d, eps) = (50, 100, 0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pts: Vec<Point> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let mut good = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..30 {
        let img = jl_embed(&pts, eps, seed).unwrap();
        let mut all = true;
        for i in 0..n {
            for j in i + 1..n {
                let r = (sq(&img[i], &img[j]) / sq(&pts[i], &pts[j])).sqrt();
                worst = worst.max((r - 1.0).abs());
                all &= r >= 1.0 - eps && r <= 1.0 + eps;
            }
        }
        good += usize::from(all);
    }
    check(good >= 20, format!("{good}/30 seeds preserve all distances, worst distortion {worst:.4}"))
}

/// Nearest-net lookup through a uniform hash grid whose cell side is the
/// covering bound, so any net point within the bound sits in a neighboring cell.
struct NetIndex<'a> {
    cell: f64,
    points: Vec<&'a Point>,
    map: std::collections::HashMap<[i64; 3], Vec<usize>>,
}

impl<'a> NetIndex<'a> {
    fn new(points: Vec<&'a Point>, cell: f64) -> Self {
        let mut map: std::collections::HashMap<[i64; 3], Vec<usize>> = Default::default();
        for (i, p) in points.iter().enumerate() {
            map.entry(Self::key(p, cell)).or_default().push(i);
        }
        NetIndex { cell, points, map }
    }

    fn key(p: &[f64], cell: f64) -> [i64; 3] {
        let mut k = [0; 3];
        for (slot, v) in k.iter_mut().zip(p) {
            *slot = (v / cell).floor() as i64;
        }
        k
    }

    /// Distance to the nearest net point, or infinity if none lies within one cell.
    fn nearest(&self, q: &[f64]) -> f64 {
        let base = Self::key(q, self.cell);
        let reach = |axis: usize| if axis < q.len() { -1..=1 } else { 0..=0 };
        let mut best = f64::INFINITY;
        for a in reach(0) {
            for b in reach(1) {
                for c in reach(2) {
                    let key = [base[0] + a, base[1] + b, base[2] + c];
                    if let Some(ids) = self.map.get(&key) {
                        for &i in ids {
                            best = best.min(sq(self.points[i], q));
                        }
                    }
                }
            }
        }
        best.sqrt()
    }
}

fn probe(rng: &mut ChaCha8Rng, center: &[f64], radius: f64, on_sphere: bool) -> Point {
    let d = center.len();
    let dir: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r = if on_sphere { radius } else { radius * rng.random::<f64>().powf(1.0 / d as f64) };
    center.iter().zip(&dir).map(|(c, v)| c + v / norm * r).collect()
}

fn net_covering() -> Check {
    use rayon::prelude::*;
    let eta = 0.5;
    let probes = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut notes = Vec::new();
    let mut ok = true;
    for d in 1..=3 {
        let pts = random_points(&mut rng, 2, d);
        let set = build_candidates(&pts, eta, 1.0, NetMode::Grid).unwrap();
        let rings: Vec<(usize, usize)> = (0..pts.len())
            .flat_map(|p| (0..set.radii.len()).map(move |r| (p, r)))
            .collect();
        let worst: Vec<(f64, bool)> = rings
            .par_iter()
            .map(|&(p, ring)| {
                let radius = set.radii[ring];
                let net: Vec<&Point> = set
                    .points
                    .iter()
                    .zip(&set.provenance)
                    .filter(|(_, o)| **o == CandidateOrigin::Net { point: p, ring })
                    .map(|(q, _)| q)
                    .collect();
                let bound = eta / 8.0 * radius;
                let index = NetIndex::new(net, bound);
                let mut rng = ChaCha8Rng::seed_from_u64((d * 1000 + p * 100 + ring) as u64);
                let mut worst_ratio: f64 = 0.0;
                let mut covered = true;
                for t in 0..probes {
                    let q = probe(&mut rng, &pts[p], radius, t % 4 == 0);
                    let dist = index.nearest(&q);
                    worst_ratio = worst_ratio.max(dist / bound);
                    covered &= dist <= bound + 1e-9;
                }
                (worst_ratio, covered)
            })
            .collect();
        ok &= worst.iter().all(|w| w.1);
        let worst_ratio = worst.iter().map(|w| w.0).fold(0.0, f64::max);
        notes.push(format!(
            "d={d}: {} rings x {probes} probes, |D|={}, worst probe/bound {worst_ratio:.4}",
            rings.len(),
            set.len()
        ));
    }
    check(ok, notes.join("; "))
}

fn beta_measurement() -> Check {
    let pts: Vec<Point> = [0.0, 1.0, 10.0, 11.0].iter().map(|&v| vec![v]).collect();
    let inst = Instance::from_points(pts, None, 2, 1.0).unwrap();
    let line = LabeledClustering::new(vec![0, 0, 1, 1], 2)
        .unwrap()
        .with_centers(vec![Center::Point(vec![0.5]), Center::Point(vec![10.5])])
        .unwrap();
    let beta_line = measure_beta(&inst, &line, 0.0, 2.0).unwrap();
    let single = LabeledClustering::new(vec![0; 4], 1).unwrap();
    let beta_single = measure_beta(&inst, &single, 0.0, 2.0).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = 0;
    for trial in 0..200 {
        let n = rng.random_range(6..30);
        let k = rng.random_range(2..=4);
        let p = if trial % 2 == 0 { 1.0 } else { 2.0 };
        let pts = random_points(&mut rng, n, 2);
        let inst = Instance::from_points(pts.clone(), None, k, p).unwrap();
        let mut labels: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
        labels.rotate_right(rng.random_range(0..n));
        let lc = LabeledClustering::new(labels, k).unwrap().with_centroids(&pts).unwrap();
        let opt = rng.random_range(1.0..50.0);
        let mut prev = 0.0;
        for delta in [0.0, 0.1, 0.25, 0.4, 0.6, 0.9] {
            let b = measure_beta(&inst, &lc, delta, opt).unwrap();
            if b < prev {
                violations += 1;
            }
            prev = b;
        }
        let mut prev = f64::INFINITY;
        for scale in [0.5, 1.0, 1.5, 3.0, 10.0] {
            let b = measure_beta(&inst, &lc, 0.2, opt * scale).unwrap();
            if b > prev {
                violations += 1;
            }
            prev = b;
        }
    }
    check(
        beta_line == 9.5 && beta_single == f64::INFINITY && violations == 0,
        format!("line beta {beta_line}, k=1 beta {beta_single}, monotonicity violations {violations} over 200 instances"),
    )
}

fn relevant_variance() -> Check {
    let grid = ExperimentGrid {
        n: 200,
        seeds: (0..10).collect(),
        ..ExperimentGrid::new(vec![5], vec![2], vec![0.01, 1.0])
    };
    let records = run_experiment(&grid).unwrap();
    let failures = records.iter().filter(|r| r.error.is_some()).count();
    let summary = summarize(&records);
    let small = &summary[0];
    let large = &summary[1];
    let (r_small, r_large) = (small.mean_ratio.unwrap_or(f64::NAN), large.mean_ratio.unwrap_or(f64::NAN));
    let beta = small.mean_beta_certified.unwrap_or(f64::NAN);
    check(
        failures == 0 && r_small <= 1.05 && r_large > 1.05 && beta > 0.001,
        format!(
            "mean ratio {r_small:.4} at sigma=0.01, {r_large:.4} at sigma=1; mean certified beta {beta:.4} at sigma=0.01; failed cells {failures}"
        ),
    )
}

fn spectral_end_to_end() -> Check {
    let (k, eps) = (5, 0.25);
    let threshold = 3.0 * (k as f64).sqrt();
    let mut cost_ok = 0;
    let mut gamma_ok = 0;
    let mut worst: f64 = 0.0;
    let mut min_gamma = f64::INFINITY;
    for seed in 0..10 {
        let (points, _) = sample_gmm(&GmmConfig { k, d: 50, n: 150, sigma: 0.02, seed }).unwrap();
        let raw = Instance::from_points(points.clone(), None, k, 2.0).unwrap();
        let baseline = best_of_restarts(&raw, &SearchConfig::default(), 20, seed).unwrap();
        let out = spectral_ls(&points, k, eps, seed, &SearchConfig::default(), &SpectralOptions::default()).unwrap();
        let cost = out.diagnostics.stage_costs.original;
        let r = cost / baseline.cost;
        worst = worst.max(r);
        cost_ok += usize::from(r <= 1.0 + 3.0 * eps);
        let g = out.diagnostics.gamma.as_ref().map_or(0.0, |g| g.value());
        min_gamma = min_gamma.min(g);
        gamma_ok += usize::from(g > threshold);
    }
    check(
        cost_ok == 10 && gamma_ok >= 8,
        format!(
            "cost within 1.75x on {cost_ok}/10 seeds (worst ratio {worst:.4}); gamma > {threshold:.3} on {gamma_ok}/10 (min {min_gamma:.2})"
        ),
    )
}

fn lp_export_fixtures() -> Check {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/lp");
    let objectives: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("objectives.json")).unwrap()).unwrap();
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, k, p) in [("single", 1, 1.0), ("pair", 1, 1.0), ("plane", 3, 1.0)] {
        let inst = match read_table_path(dir.join(format!("{name}.csv"))).unwrap() {
            Table::Points { points, .. } => Instance::from_points(points, None, k, p).unwrap(),
            Table::Matrix { rows } => Instance::from_distance_matrix(rows, k, p).unwrap(),
        };
        let golden = std::fs::read_to_string(dir.join(format!("{name}.lp"))).unwrap();
        let bytes_equal = lp_string(&inst) == golden;
        let lp_value = objectives[name].as_f64().unwrap();
        let opt = brute_force_opt(&inst).unwrap().cost;
        let bound_ok = lp_value <= opt * (1.0 + 1e-9) && opt - lp_value <= 0.16 * opt;
        ok &= bytes_equal && bound_ok;
        notes.push(format!("{name}: golden {bytes_equal}, LP {lp_value} vs optimum {opt}"));
    }
    check(ok, notes.join("; "))
}

fn main() {
    let checks: [(&str, Duration, fn() -> Check); 10] = [
        ("1 tight instance reproduction", Duration::from_secs(10), tight_instance),
        ("2 oracle equivalence", Duration::from_secs(60), oracle_equivalence),
        ("3 centroid decomposition identity", Duration::from_secs(5), decomposition_identity),
        ("4 projection cost sandwich", Duration::from_secs(30), projection_sandwich),
        ("5 random embedding distortion", Duration::from_secs(10), jl_contract),
        ("6 grid net covering", Duration::from_secs(30), net_covering),
        ("7 distribution stability measurement", Duration::from_secs(5), beta_measurement),
        ("8 relevant variance trend", Duration::from_secs(180), relevant_variance),
        ("9 spectral pipeline end to end", Duration::from_secs(120), spectral_end_to_end),
        ("10 LP export fixtures", Duration::from_secs(10), lp_export_fixtures),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, budget, run) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = result.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "{} criterion {name}: {} [{:.2}s of {}s]",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

