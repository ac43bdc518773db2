//! Lloyd's algorithm for k-means, used as a baseline and as a refinement step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{sq_dist, Center, Instance, LabeledClustering, Point, REL_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LloydOutcome {
    pub clustering: LabeledClustering,
    pub cost: f64,
    /// Assignment steps that changed the partition or the cost.
    pub iterations: usize,
    pub converged: bool,
}

fn assign(points: &[Point], centers: &[Point]) -> (Vec<usize>, Vec<f64>) {
    points
        .iter()
        .map(|x| {
            let mut best = (0, sq_dist(x, &centers[0]));
            for (j, c) in centers.iter().enumerate().skip(1) {
                let v = sq_dist(x, c);
                if v < best.1 {
                    best = (j, v);
                }
            }
            best
        })
        .unzip()
}

/// Alternates assignment and centroid steps until the partition stops changing,
/// the relative improvement drops below `1e-9`, or `max_iter` assignment steps ran.
///
/// A center that loses all its points is moved onto the point that currently has
/// the largest cost.
pub fn lloyd(instance: &Instance, init_centers: &[Point], max_iter: usize) -> Result<LloydOutcome> {
    if instance.p() != 2.0 {
        return Err(Error::invalid("Lloyd's algorithm requires p = 2"));
    }
    let points = instance
        .clients()
        .ok_or_else(|| Error::invalid("Lloyd's algorithm requires point-form input"))?;
    if init_centers.is_empty() {
        return Err(Error::invalid("no initial centers"));
    }
    let d = points[0].len();
    if init_centers.iter().any(|c| c.len() != d) {
        return Err(Error::invalid("initial centers have the wrong dimension"));
    }
    let k = init_centers.len();
    let mut centers = init_centers.to_vec();
    let (mut labels, mut costs) = assign(points, &centers);
    let mut cost: f64 = costs.iter().sum();
    let mut iterations = 1;
    let mut converged = false;

    while iterations < max_iter {
        // centroid step
        let mut sums = vec![vec![0.0; d]; k];
        let mut sizes = vec![0usize; k];
        for (x, &l) in points.iter().zip(&labels) {
            sizes[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(x) {
                *s += v;
            }
        }
        for j in 0..k {
            if sizes[j] > 0 {
                centers[j] = sums[j].iter().map(|s| s / sizes[j] as f64).collect();
            } else {
                let far = costs
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite costs"))
                    .map(|(i, _)| i)
                    .expect("non-empty point set");
                centers[j] = points[far].clone();
                costs[far] = 0.0;
            }
        }
        let (new_labels, new_costs) = assign(points, &centers);
        let new_cost: f64 = new_costs.iter().sum();
        let unchanged = new_labels == labels;
        let small_gain = cost - new_cost <= REL_TOL * cost;
        labels = new_labels;
        costs = new_costs;
        if new_cost <= cost {
            cost = new_cost;
        }
        if unchanged || small_gain {
            converged = true;
            break;
        }
        iterations += 1;
    }

    // report centroids consistent with the final labels
    let clustering = LabeledClustering::new(labels, k)?;
    let centroids = clustering.centroids(points)?;
    let final_centers: Vec<Center> = centroids
        .into_iter()
        .zip(centers)
        .map(|(c, old)| Center::Point(c.unwrap_or(old)))
        .collect();
    let clustering = clustering.with_centers(final_centers)?;
    let cost = clustering.cost(instance)?.min(cost);
    Ok(LloydOutcome {
        clustering,
        cost,
        iterations,
        converged,
    })
}
