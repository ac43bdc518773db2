//! Fixed inputs shared by the benchmarks.

use stabclust::{generate_gmm, GmmConfig, Instance, Point};

/// Seeded k-means mixture, points used as both clients and facilities.
pub fn mixture(k: usize, d: usize, n: usize, sigma: f64) -> Instance {
    generate_gmm(&GmmConfig { k, d, n, sigma, seed: 42 })
        .expect("valid mixture parameters")
        .0
}

pub fn mixture_points(k: usize, d: usize, n: usize, sigma: f64) -> Vec<Point> {
    mixture(k, d, n, sigma)
        .clients()
        .expect("mixtures are in point form")
        .to_vec()
}
