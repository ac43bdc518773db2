//! Synthetic instances: Gaussian mixtures with ground-truth labels, and the
//! tripartite instance on which 1-swap local search gets stuck at three times the
//! optimum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Center, Instance, LabeledClustering, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    pub k: usize,
    pub d: usize,
    pub n: usize,
    /// Per-coordinate standard deviation shared by all components.
    pub sigma: f64,
    pub seed: u64,
}

impl GmmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.d == 0 {
            return Err(Error::invalid("k and d must be >= 1"));
        }
        if self.n < self.k {
            return Err(Error::invalid(format!("n = {} < k = {}", self.n, self.k)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma = {} must be finite and >= 0", self.sigma)));
        }
        Ok(())
    }

    /// Size of component `i`: the first `n mod k` components get one extra point.
    pub fn component_size(&self, i: usize) -> usize {
        self.n / self.k + usize::from(i < self.n % self.k)
    }
}

/// Samples `k` means uniformly in `(0,1)^d`, then `n` points split as evenly as
/// possible between the components, each mean plus isotropic Gaussian noise of
/// standard deviation `sigma`. Points are ordered component by component.
///
/// The returned instance uses the points as both clients and facilities with
/// `p = 2`; the clustering carries the generating component of every point and
/// the means as centers.
pub fn generate_gmm(config: &GmmConfig) -> Result<(Instance, LabeledClustering)> {
    let (points, clustering) = sample_gmm(config)?;
    let instance = Instance::from_points(points, None, config.k, 2.0)?;
    Ok((instance, clustering))
}

/// Points and ground truth without building an instance.
pub fn sample_gmm(config: &GmmConfig) -> Result<(Vec<Point>, LabeledClustering)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let means: Vec<Point> = (0..config.k)
        .map(|_| (0..config.d).map(|_| rng.random::<f64>()).collect())
        .collect();
    let mut points = Vec::with_capacity(config.n);
    let mut labels = Vec::with_capacity(config.n);
    for (i, mean) in means.iter().enumerate() {
        for _ in 0..config.component_size(i) {
            let x: Point = mean
                .iter()
                .map(|&m| {
                    let z: f64 = rng.sample(StandardNormal);
                    m + config.sigma * z
                })
                .collect();
            points.push(x);
            labels.push(i);
        }
    }
    let clustering = LabeledClustering::new(labels, config.k)?
        .with_centers(means.into_iter().map(Center::Point).collect())?;
    Ok((points, clustering))
}

/// Distance classes of the tripartite instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbDistance {
    /// `O_i` to its own row `C_{i,·}`: `1 + ε/3`.
    OptimalOwn,
    /// `O_i` to another row: `7 + ε/3`.
    OptimalCross,
    /// `L_i` to its own column `C_{·,i}`: `3`.
    LocalOwn,
    /// `L_i` to another column: `5 + 2ε/3`.
    LocalCross,
}

impl LbDistance {
    pub fn value(self, eps: f64) -> f64 {
        match self {
            LbDistance::OptimalOwn => 1.0 + eps / 3.0,
            LbDistance::OptimalCross => 7.0 + eps / 3.0,
            LbDistance::LocalOwn => 3.0,
            LbDistance::LocalCross => 5.0 + 2.0 * eps / 3.0,
        }
    }
}

/// Tripartite instance with optimal centers `O`, locally optimal centers `L`
/// (`|O| = |L| = k`) and `k²` clients `C_{i,j}`.
///
/// Facility `i < k` is `O_i`, facility `k + i` is `L_i`; client `i·k + j` is
/// `C_{i,j}`. The explicit edges are `O_i – C_{i,j}` of length `1 + ε/3` and
/// `L_i – C_{j,i}` of length 3; every other distance is the shortest-path
/// closure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbInstance {
    pub k: usize,
    pub eps: f64,
}

impl LbInstance {
    pub fn new(k: usize, eps: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid(format!("k = {k} must be >= 2")));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::invalid(format!("eps = {eps} must lie in (0, 1)")));
        }
        Ok(LbInstance { k, eps })
    }

    pub fn client(&self, row: usize, col: usize) -> usize {
        row * self.k + col
    }

    pub fn distance_class(&self, facility: usize, client: usize) -> LbDistance {
        let (row, col) = (client / self.k, client % self.k);
        if facility < self.k {
            if row == facility {
                LbDistance::OptimalOwn
            } else {
                LbDistance::OptimalCross
            }
        } else if col == facility - self.k {
            LbDistance::LocalOwn
        } else {
            LbDistance::LocalCross
        }
    }

    pub fn distance(&self, facility: usize, client: usize) -> f64 {
        self.distance_class(facility, client).value(self.eps)
    }

    pub fn optimal_centers(&self) -> Vec<usize> {
        (0..self.k).collect()
    }

    pub fn local_centers(&self) -> Vec<usize> {
        (self.k..2 * self.k).collect()
    }

    pub fn distance_rows(&self) -> Vec<Vec<f64>> {
        (0..self.k * self.k)
            .map(|c| (0..2 * self.k).map(|f| self.distance(f, c)).collect())
            .collect()
    }

    pub fn instance(&self, p: f64) -> Result<Instance> {
        Instance::from_distance_matrix(self.distance_rows(), self.k, p)
    }

    /// Cost multipliers that scale `dist(O_i, C_{i,i})` by `3 − ε` for every `i`.
    pub fn diagonal_perturbation(&self) -> Vec<f64> {
        let m = 2 * self.k;
        let mut mult = vec![1.0; self.k * self.k * m];
        for i in 0..self.k {
            mult[self.client(i, i) * m + i] = 3.0 - self.eps;
        }
        mult
    }

    /// Explicit weighted edges of the underlying graph. Node `i` is `O_i`, node
    /// `k + i` is `L_i`, node `2k + c` is client `c`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let k = self.k;
        let mut out = Vec::with_capacity(2 * k * k);
        for i in 0..k {
            for j in 0..k {
                out.push((i, 2 * k + self.client(i, j), 1.0 + self.eps / 3.0));
                out.push((k + i, 2 * k + self.client(j, i), 3.0));
            }
        }
        out
    }
}

/// Matrix-form tripartite instance with `p = 1`.
pub fn build_lb_instance(k: usize, eps: f64) -> Result<Instance> {
    LbInstance::new(k, eps)?.instance(1.0)
}
