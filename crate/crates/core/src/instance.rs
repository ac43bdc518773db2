//! Clustering instances, the cost model and solution bookkeeping.
//!
//! An [`Instance`] holds a set of clients, a set of candidate facilities, the
//! budget `k` and the cost exponent `p`. The cost of serving client `x` from
//! facility `f` is `dist(x, f)^p`, where `dist` is either the Euclidean metric on
//! points or an explicit client × facility distance matrix. Costs may also be
//! given directly (used for perturbed instances, which need not be metric).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Vec<f64>;

/// Relative tolerance used when comparing costs.
pub const REL_TOL: f64 = 1e-9;

/// Default number of client × facility entries precomputed into a dense matrix.
pub const DEFAULT_MEMORY_BUDGET: usize = 100_000_000;

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// `dist^p`, with the common exponents special-cased so that `p = 2` is exact.
#[inline]
pub fn powered(d: f64, p: f64) -> f64 {
    if p == 1.0 {
        d
    } else if p == 2.0 {
        d * d
    } else {
        d.powf(p)
    }
}

#[inline]
fn point_cost(a: &[f64], b: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        sq_dist(a, b)
    } else {
        powered(dist(a, b), p)
    }
}

#[derive(Debug, Clone)]
enum Geometry {
    Points {
        clients: Vec<Point>,
        facilities: Vec<Point>,
    },
    /// Row-major client × facility distances.
    Distances { values: Vec<f64> },
    /// Row-major client × facility costs, exponent already applied.
    Costs { values: Vec<f64> },
}

/// A k-clustering instance.
#[derive(Debug, Clone)]
pub struct Instance {
    geometry: Geometry,
    n_clients: usize,
    n_facilities: usize,
    k: usize,
    p: f64,
    cache: Option<Arc<Vec<f64>>>,
}

fn check_k_p(k: usize, p: f64, n_facilities: usize) -> Result<()> {
    if k == 0 || k > n_facilities {
        return Err(Error::invalid(format!(
            "k = {k} must lie in 1..={n_facilities} (number of facilities)"
        )));
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::invalid(format!("cost exponent p = {p} must be positive")));
    }
    Ok(())
}

fn check_matrix(rows: &[Vec<f64>]) -> Result<usize> {
    let m = rows
        .first()
        .map(|r| r.len())
        .ok_or_else(|| Error::invalid("matrix has no rows"))?;
    if m == 0 {
        return Err(Error::invalid("matrix has no columns"));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != m {
            return Err(Error::invalid(format!(
                "row {i} has {} entries, expected {m}",
                r.len()
            )));
        }
        if let Some(v) = r.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!(
                "row {i} contains invalid entry {v}; entries must be finite and >= 0"
            )));
        }
    }
    Ok(m)
}

impl Instance {
    /// Point-form instance. `facilities = None` means facilities are the clients.
    pub fn from_points(
        clients: Vec<Point>,
        facilities: Option<Vec<Point>>,
        k: usize,
        p: f64,
    ) -> Result<Self> {
        Self::from_points_with_budget(clients, facilities, k, p, DEFAULT_MEMORY_BUDGET)
    }

    pub fn from_points_with_budget(
        clients: Vec<Point>,
        facilities: Option<Vec<Point>>,
        k: usize,
        p: f64,
        memory_budget: usize,
    ) -> Result<Self> {
        if clients.is_empty() {
            return Err(Error::invalid("instance has no clients"));
        }
        let facilities = facilities.unwrap_or_else(|| clients.clone());
        let d = clients[0].len();
        if d == 0 {
            return Err(Error::invalid("points must have dimension >= 1"));
        }
        for (what, set) in [("client", &clients), ("facility", &facilities)] {
            for (i, x) in set.iter().enumerate() {
                if x.len() != d {
                    return Err(Error::invalid(format!(
                        "{what} {i} has dimension {}, expected {d}",
                        x.len()
                    )));
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid(format!("{what} {i} has a non-finite coordinate")));
                }
            }
        }
        check_k_p(k, p, facilities.len())?;
        let mut inst = Instance {
            n_clients: clients.len(),
            n_facilities: facilities.len(),
            geometry: Geometry::Points { clients, facilities },
            k,
            p,
            cache: None,
        };
        inst.build_cache(memory_budget);
        Ok(inst)
    }

    /// Matrix-form instance: `rows[client][facility]` is a distance, cost = entry^p.
    pub fn from_distance_matrix(rows: Vec<Vec<f64>>, k: usize, p: f64) -> Result<Self> {
        let m = check_matrix(&rows)?;
        check_k_p(k, p, m)?;
        let n = rows.len();
        let mut inst = Instance {
            geometry: Geometry::Distances {
                values: rows.into_iter().flatten().collect(),
            },
            n_clients: n,
            n_facilities: m,
            k,
            p,
            cache: None,
        };
        inst.build_cache(DEFAULT_MEMORY_BUDGET);
        Ok(inst)
    }

    /// Instance given by explicit costs. `p` is carried along for reporting only.
    pub fn from_cost_matrix(rows: Vec<Vec<f64>>, k: usize, p: f64) -> Result<Self> {
        let m = check_matrix(&rows)?;
        check_k_p(k, p, m)?;
        let n = rows.len();
        Ok(Instance {
            geometry: Geometry::Costs {
                values: rows.into_iter().flatten().collect(),
            },
            n_clients: n,
            n_facilities: m,
            k,
            p,
            cache: None,
        })
    }

    fn build_cache(&mut self, budget: usize) {
        let entries = self.n_clients.saturating_mul(self.n_facilities);
        match &self.geometry {
            Geometry::Points { .. } if entries <= budget => {
                let mut values = Vec::with_capacity(entries);
                for x in 0..self.n_clients {
                    for f in 0..self.n_facilities {
                        values.push(self.compute_cost(x, f));
                    }
                }
                self.cache = Some(Arc::new(values));
            }
            Geometry::Distances { values } if self.p != 1.0 => {
                let p = self.p;
                self.cache = Some(Arc::new(values.iter().map(|&d| powered(d, p)).collect()));
            }
            _ => {}
        }
    }

    fn compute_cost(&self, client: usize, facility: usize) -> f64 {
        match &self.geometry {
            Geometry::Points { clients, facilities } => {
                point_cost(&clients[client], &facilities[facility], self.p)
            }
            Geometry::Distances { values } => {
                powered(values[client * self.n_facilities + facility], self.p)
            }
            Geometry::Costs { values } => values[client * self.n_facilities + facility],
        }
    }

    /// The same instance with a different number of centers.
    pub fn with_k(&self, k: usize) -> Result<Self> {
        check_k_p(k, self.p, self.n_facilities)?;
        let mut inst = self.clone();
        inst.k = k;
        Ok(inst)
    }

    /// Instance whose costs are `multipliers[x][f] * cost(x, f)`.
    pub fn perturbed(&self, multipliers: &[f64]) -> Result<Self> {
        if multipliers.len() != self.n_clients * self.n_facilities {
            return Err(Error::invalid("multiplier matrix has the wrong shape"));
        }
        let rows = (0..self.n_clients)
            .map(|x| {
                (0..self.n_facilities)
                    .map(|f| self.cost(x, f) * multipliers[x * self.n_facilities + f])
                    .collect()
            })
            .collect();
        Self::from_cost_matrix(rows, self.k, self.p)
    }

    #[inline]
    pub fn cost(&self, client: usize, facility: usize) -> f64 {
        match &self.cache {
            Some(c) => c[client * self.n_facilities + facility],
            None => self.compute_cost(client, facility),
        }
    }

    pub fn n_clients(&self) -> usize {
        self.n_clients
    }

    pub fn n_facilities(&self) -> usize {
        self.n_facilities
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn is_point_form(&self) -> bool {
        matches!(self.geometry, Geometry::Points { .. })
    }

    pub fn dim(&self) -> Option<usize> {
        self.clients().map(|c| c[0].len())
    }

    pub fn clients(&self) -> Option<&[Point]> {
        match &self.geometry {
            Geometry::Points { clients, .. } => Some(clients),
            _ => None,
        }
    }

    pub fn facilities(&self) -> Option<&[Point]> {
        match &self.geometry {
            Geometry::Points { facilities, .. } => Some(facilities),
            _ => None,
        }
    }

    /// Cost of serving `client` from an arbitrary reference center.
    pub fn cost_to_center(&self, client: usize, center: &Center) -> Result<f64> {
        match center {
            Center::Facility(f) => {
                if *f >= self.n_facilities {
                    return Err(Error::invalid(format!("facility index {f} out of range")));
                }
                Ok(self.cost(client, *f))
            }
            Center::Point(c) => match &self.geometry {
                Geometry::Points { clients, .. } => {
                    if c.len() != clients[client].len() {
                        return Err(Error::invalid("center dimension mismatch"));
                    }
                    Ok(point_cost(&clients[client], c, self.p))
                }
                _ => Err(Error::invalid(
                    "point centers require a point-form instance",
                )),
            },
        }
    }

    /// Distance (not cost) between a facility and a reference center.
    ///
    /// In matrix form only client–facility distances are known, so the distance
    /// between two facilities is taken as the shortest two-hop path through a
    /// client.
    pub fn facility_center_distance(&self, facility: usize, center: &Center) -> Result<f64> {
        match (&self.geometry, center) {
            (Geometry::Points { facilities, .. }, Center::Point(c)) => {
                Ok(dist(&facilities[facility], c))
            }
            (Geometry::Points { facilities, .. }, Center::Facility(g)) => {
                Ok(dist(&facilities[facility], &facilities[*g]))
            }
            (_, Center::Facility(g)) => {
                if facility == *g {
                    return Ok(0.0);
                }
                Ok((0..self.n_clients)
                    .map(|x| self.raw_distance(x, facility) + self.raw_distance(x, *g))
                    .fold(f64::INFINITY, f64::min))
            }
            (_, Center::Point(_)) => Err(Error::invalid(
                "point centers require a point-form instance",
            )),
        }
    }

    /// Distance between a client and a reference center.
    pub fn client_center_distance(&self, client: usize, center: &Center) -> Result<f64> {
        match center {
            Center::Facility(f) => Ok(self.raw_distance(client, *f)),
            Center::Point(c) => match &self.geometry {
                Geometry::Points { clients, .. } => Ok(dist(&clients[client], c)),
                _ => Err(Error::invalid("point centers require a point-form instance")),
            },
        }
    }

    fn raw_distance(&self, client: usize, facility: usize) -> f64 {
        match &self.geometry {
            Geometry::Points { clients, facilities } => dist(&clients[client], &facilities[facility]),
            Geometry::Distances { values } => values[client * self.n_facilities + facility],
            Geometry::Costs { values } => {
                values[client * self.n_facilities + facility].powf(1.0 / self.p)
            }
        }
    }

    /// Checks the triangle inequality on the client/facility bipartite metric:
    /// `d(x,f) <= d(x,g) + d(y,g) + d(y,f)` for all clients x, y and facilities f, g.
    /// Returns the first violating `(x, f, y, g)` if any. Point-form instances are
    /// metric by construction.
    pub fn validate_metric(&self) -> Option<(usize, usize, usize, usize)> {
        if self.is_point_form() {
            return None;
        }
        let (n, m) = (self.n_clients, self.n_facilities);
        for x in 0..n {
            for f in 0..m {
                let dxf = self.raw_distance(x, f);
                for y in 0..n {
                    for g in 0..m {
                        let path = self.raw_distance(x, g)
                            + self.raw_distance(y, g)
                            + self.raw_distance(y, f);
                        if dxf > path * (1.0 + REL_TOL) {
                            return Some((x, f, y, g));
                        }
                    }
                }
            }
        }
        None
    }
}

/// A set of selected centers with its induced assignment and cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    /// Selected facility indices, ascending.
    pub centers: Vec<usize>,
    /// Facility serving each client.
    pub assignment: Vec<usize>,
    pub cost: f64,
}

impl Solution {
    /// Cluster index (position in `centers`) of every client.
    pub fn labels(&self) -> Vec<usize> {
        self.assignment
            .iter()
            .map(|f| self.centers.binary_search(f).expect("assigned center is selected"))
            .collect()
    }
}

fn normalized_centers(instance: &Instance, centers: &[usize]) -> Result<Vec<usize>> {
    if centers.is_empty() {
        return Err(Error::invalid("center set is empty"));
    }
    if let Some(&f) = centers.iter().find(|&&f| f >= instance.n_facilities()) {
        return Err(Error::invalid(format!(
            "facility index {f} out of range (have {})",
            instance.n_facilities()
        )));
    }
    let mut sorted = centers.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() > instance.k() {
        return Err(Error::invalid(format!(
            "{} centers exceed the budget k = {}",
            sorted.len(),
            instance.k()
        )));
    }
    Ok(sorted)
}

/// Assigns every client to its cheapest selected center (lowest index on ties)
/// and sums the costs.
pub fn evaluate_cost(instance: &Instance, centers: &[usize]) -> Result<Solution> {
    let centers = normalized_centers(instance, centers)?;
    let mut assignment = Vec::with_capacity(instance.n_clients());
    let mut cost = 0.0;
    for x in 0..instance.n_clients() {
        let mut best = (centers[0], instance.cost(x, centers[0]));
        for &f in &centers[1..] {
            let c = instance.cost(x, f);
            if c < best.1 {
                best = (f, c);
            }
        }
        assignment.push(best.0);
        cost += best.1;
    }
    Ok(Solution {
        centers,
        assignment,
        cost,
    })
}

/// Reference center of a cluster: an arbitrary point or a facility of the instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Center {
    Point(Point),
    Facility(usize),
}

/// A labelled partition of the clients, optionally with one center per cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledClustering {
    pub labels: Vec<usize>,
    pub k: usize,
    pub centers: Option<Vec<Center>>,
}

impl LabeledClustering {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("clustering needs k >= 1"));
        }
        if let Some(l) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::invalid(format!("label {l} is not below k = {k}")));
        }
        Ok(LabeledClustering {
            labels,
            k,
            centers: None,
        })
    }

    pub fn with_centers(mut self, centers: Vec<Center>) -> Result<Self> {
        if centers.len() != self.k {
            return Err(Error::invalid(format!(
                "expected {} centers, got {}",
                self.k,
                centers.len()
            )));
        }
        self.centers = Some(centers);
        Ok(self)
    }

    /// Clustering induced by a solution; centers are the selected facilities.
    pub fn from_solution(solution: &Solution) -> Self {
        LabeledClustering {
            labels: solution.labels(),
            k: solution.centers.len(),
            centers: Some(solution.centers.iter().map(|&f| Center::Facility(f)).collect()),
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (x, &l) in self.labels.iter().enumerate() {
            out[l].push(x);
        }
        out
    }

    /// Centroid of every cluster (`None` for empty clusters).
    pub fn centroids(&self, points: &[Point]) -> Result<Vec<Option<Point>>> {
        if points.len() != self.labels.len() {
            return Err(Error::invalid("label count does not match point count"));
        }
        let d = points.first().map_or(0, |p| p.len());
        let mut sums = vec![vec![0.0; d]; self.k];
        let sizes = self.sizes();
        for (x, &l) in points.iter().zip(&self.labels) {
            for (s, v) in sums[l].iter_mut().zip(x) {
                *s += v;
            }
        }
        Ok(sums
            .into_iter()
            .zip(sizes)
            .map(|(s, n)| (n > 0).then(|| s.into_iter().map(|v| v / n as f64).collect()))
            .collect())
    }

    /// Copy of the clustering with centroid centers; fails on empty clusters.
    pub fn with_centroids(&self, points: &[Point]) -> Result<Self> {
        let centers = self
            .centroids(points)?
            .into_iter()
            .enumerate()
            .map(|(i, c)| c.map(Center::Point).ok_or_else(|| Error::invalid(format!("cluster {i} is empty"))))
            .collect::<Result<Vec<_>>>()?;
        self.clone().with_centers(centers)
    }

    /// Sum of client costs to their own cluster center.
    pub fn cost(&self, instance: &Instance) -> Result<f64> {
        let centers = self
            .centers
            .as_ref()
            .ok_or_else(|| Error::invalid("clustering has no centers"))?;
        if self.labels.len() != instance.n_clients() {
            return Err(Error::invalid("label count does not match client count"));
        }
        let mut total = 0.0;
        for (x, &l) in self.labels.iter().enumerate() {
            total += instance.cost_to_center(x, &centers[l])?;
        }
        Ok(total)
    }
}

/// 1-means cost split: returns `(Σ‖x − c(A)‖², |A|·‖c(A) − candidate‖²)` whose sum
/// is `Σ‖x − candidate‖²`.
pub fn centroid_cost_decomposition(points: &[Point], candidate: &[f64]) -> Result<(f64, f64)> {
    let first = points
        .first()
        .ok_or_else(|| Error::invalid("point list is empty"))?;
    let d = first.len();
    if candidate.len() != d || points.iter().any(|x| x.len() != d) {
        return Err(Error::invalid("dimension mismatch"));
    }
    let n = points.len() as f64;
    let mut centroid = vec![0.0; d];
    for x in points {
        for (c, v) in centroid.iter_mut().zip(x) {
            *c += v;
        }
    }
    centroid.iter_mut().for_each(|c| *c /= n);
    let inertia = points.iter().map(|x| sq_dist(x, &centroid)).sum();
    Ok((inertia, n * sq_dist(&centroid, candidate)))
}

/// Checks `cost(a,b) <= (1+ε)^p cost(a,c) + (1+1/ε)^p cost(c,b)` with
/// `cost = dist^p`.
pub fn powered_triangle_check(a: &[f64], b: &[f64], c: &[f64], p: f64, eps: f64) -> Result<bool> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::invalid(format!("eps = {eps} must lie in (0, 1/2)")));
    }
    if !(p >= 0.0) {
        return Err(Error::invalid(format!("p = {p} must be >= 0")));
    }
    if a.len() != b.len() || a.len() != c.len() {
        return Err(Error::invalid("dimension mismatch"));
    }
    let cost = |u: &[f64], v: &[f64]| powered(dist(u, v), p);
    let lhs = cost(a, b);
    let rhs = (1.0 + eps).powf(p) * cost(a, c) + (1.0 + 1.0 / eps).powf(p) * cost(c, b);
    Ok(lhs <= rhs * (1.0 + 1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Point> {
        (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect()
    }

    #[test]
    fn colocated_clients_cost_zero() {
        let pts: Vec<Point> = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 0.0]];
        let inst = Instance::from_points(pts, None, 2, 2.0).unwrap();
        let sol = evaluate_cost(&inst, &[0, 1]).unwrap();
        assert_eq!(sol.cost, 0.0);
        assert_eq!(sol.assignment, vec![0, 1, 0]);
    }

    #[test]
    fn cost_matches_exhaustive_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let clients = random_points(&mut rng, 5, 3);
        let facilities = random_points(&mut rng, 4, 3);
        let inst = Instance::from_points(clients.clone(), Some(facilities.clone()), 4, 2.0).unwrap();
        for centers in [vec![0], vec![1, 3], vec![0, 2, 3], vec![3, 2, 1, 0]] {
            let sol = evaluate_cost(&inst, &centers).unwrap();
            let mut expected = 0.0;
            for x in &clients {
                let mut best = f64::INFINITY;
                for &f in &centers {
                    let d2: f64 = x.iter().zip(&facilities[f]).map(|(a, b)| (a - b).powi(2)).sum();
                    best = best.min(d2);
                }
                expected += best;
            }
            assert!((sol.cost - expected).abs() <= 1e-12 * expected.max(1.0));
        }
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let inst = Instance::from_distance_matrix(vec![vec![1.0, 1.0, 1.0]], 3, 1.0).unwrap();
        let sol = evaluate_cost(&inst, &[2, 1]).unwrap();
        assert_eq!(sol.centers, vec![1, 2]);
        assert_eq!(sol.assignment, vec![1]);
    }

    #[test]
    fn evaluate_cost_errors() {
        let inst = Instance::from_distance_matrix(vec![vec![1.0, 2.0]], 1, 1.0).unwrap();
        assert!(matches!(evaluate_cost(&inst, &[]), Err(Error::InvalidArgument(_))));
        assert!(matches!(evaluate_cost(&inst, &[5]), Err(Error::InvalidArgument(_))));
        assert!(matches!(evaluate_cost(&inst, &[0, 1]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn construction_errors() {
        assert!(Instance::from_distance_matrix(vec![vec![1.0, -1.0]], 1, 1.0).is_err());
        assert!(Instance::from_distance_matrix(vec![vec![1.0], vec![1.0, 2.0]], 1, 1.0).is_err());
        assert!(Instance::from_distance_matrix(vec![vec![1.0]], 2, 1.0).is_err());
        assert!(Instance::from_points(vec![vec![0.0], vec![0.0, 1.0]], None, 1, 1.0).is_err());
        assert!(Instance::from_points(vec![vec![0.0]], None, 1, 0.0).is_err());
    }

    #[test]
    fn on_demand_costs_match_cache() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = random_points(&mut rng, 6, 2);
        let cached = Instance::from_points(pts.clone(), None, 2, 1.0).unwrap();
        let lazy = Instance::from_points_with_budget(pts, None, 2, 1.0, 0).unwrap();
        for x in 0..6 {
            for f in 0..6 {
                assert_eq!(cached.cost(x, f), lazy.cost(x, f));
            }
        }
    }

    #[test]
    fn decomposition_line_example() {
        let (inertia, shift) =
            centroid_cost_decomposition(&[vec![0.0], vec![2.0]], &[0.0]).unwrap();
        assert_eq!(inertia, 2.0);
        assert_eq!(shift, 2.0);
    }

    #[test]
    fn decomposition_at_centroid_has_no_shift() {
        let pts = vec![vec![1.0, 2.0], vec![3.0, -2.0], vec![2.0, 3.0]];
        let (_, shift) = centroid_cost_decomposition(&pts, &[2.0, 1.0]).unwrap();
        assert!(shift.abs() < 1e-24);
    }

    #[test]
    fn decomposition_pairwise_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts = random_points(&mut rng, 6, 4);
        let (inertia, _) = centroid_cost_decomposition(&pts, &pts[0]).unwrap();
        let pair_sum: f64 = pts
            .iter()
            .flat_map(|x| pts.iter().map(move |y| sq_dist(x, y)))
            .sum();
        let pairwise = pair_sum / (2.0 * pts.len() as f64);
        assert!((inertia - pairwise).abs() <= 1e-9 * pairwise);
    }

    #[test]
    fn decomposition_errors() {
        assert!(centroid_cost_decomposition(&[], &[0.0]).is_err());
        assert!(centroid_cost_decomposition(&[vec![0.0, 1.0]], &[0.0]).is_err());
    }

    #[test]
    fn triangle_check_examples() {
        let (a, b) = (vec![0.0], vec![2.0]);
        assert!(powered_triangle_check(&a, &b, &a, 2.0, 0.25).unwrap());
        // 2 <= 1.25 * 1 + 1 * 5
        assert!(powered_triangle_check(&a, &b, &[1.0], 1.0, 0.25).unwrap());
        assert!(powered_triangle_check(&a, &b, &[1.0], 1.0, 0.5).is_err());
        assert!(powered_triangle_check(&a, &b, &[1.0], 1.0, 0.0).is_err());
    }

    #[test]
    fn cost_matrix_validation_detects_non_metric() {
        let metric = Instance::from_distance_matrix(vec![vec![1.0, 2.0], vec![2.0, 1.0]], 1, 1.0)
            .unwrap();
        assert!(metric.validate_metric().is_none());
        let broken = Instance::from_distance_matrix(vec![vec![1.0, 9.0], vec![1.0, 1.0]], 1, 1.0)
            .unwrap();
        assert!(broken.validate_metric().is_some());
    }

    #[test]
    fn facility_distance_in_matrix_form_uses_client_paths() {
        let inst = Instance::from_distance_matrix(vec![vec![1.0, 2.0], vec![4.0, 0.5]], 1, 1.0)
            .unwrap();
        let d = inst.facility_center_distance(0, &Center::Facility(1)).unwrap();
        assert_eq!(d, 3.0);
        assert_eq!(inst.facility_center_distance(1, &Center::Facility(1)).unwrap(), 0.0);
    }

    #[test]
    fn clustering_centroids_and_cost() {
        let pts = vec![vec![0.0], vec![2.0], vec![10.0]];
        let lc = LabeledClustering::new(vec![0, 0, 1], 2).unwrap();
        let lc = lc.with_centroids(&pts).unwrap();
        let inst = Instance::from_points(pts, None, 2, 2.0).unwrap();
        assert_eq!(lc.cost(&inst).unwrap(), 2.0);
        assert!(LabeledClustering::new(vec![0, 2], 2).is_err());
    }
}
