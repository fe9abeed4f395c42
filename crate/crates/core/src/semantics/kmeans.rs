use std::collections::HashSet;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng_from_seed;

/// Result of Lloyd's algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances to assigned centroids.
    pub inertia: f64,
    /// Inertia after every assignment step, starting with the seeding.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let labels = points
        .iter()
        .map(|p| {
            let (c, d) = nearest(p, centroids);
            inertia += d;
            c
        })
        .collect();
    (labels, inertia)
}

fn means(points: &[Vec<f64>], labels: &[usize], centroids: &mut [Vec<f64>]) -> Vec<usize> {
    let dim = points[0].len();
    let mut sizes = vec![0usize; centroids.len()];
    let mut sums = vec![vec![0.0; dim]; centroids.len()];
    for (p, &c) in points.iter().zip(labels) {
        sizes[c] += 1;
        sums[c].iter_mut().zip(p).for_each(|(s, x)| *s += x);
    }
    for (c, sum) in sums.into_iter().enumerate() {
        if sizes[c] > 0 {
            centroids[c] = sum.into_iter().map(|s| s / sizes[c] as f64).collect();
        }
    }
    sizes
}

/// Moves centroids to member means. An empty cluster takes over the point
/// farthest from its current centroid.
fn update(points: &[Vec<f64>], labels: &mut [usize], centroids: &mut [Vec<f64>]) {
    let mut sizes = means(points, labels, centroids);
    while let Some(empty) = sizes.iter().position(|&s| s == 0) {
        let far = points
            .iter()
            .enumerate()
            .filter(|&(i, _)| sizes[labels[i]] > 1)
            .map(|(i, p)| (i, sq_dist(p, &centroids[labels[i]])))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        let Some((far, _)) = far else { break };
        labels[far] = empty;
        centroids[empty] = points[far].clone();
        sizes = means(points, labels, centroids);
    }
}

/// k-means++ seeding followed by Lloyd iterations with squared Euclidean
/// distance. Stops when assignments stop changing or after `max_iters`
/// updates.
pub fn cluster_topic_distributions(points: &[Vec<f64>], k: usize, max_iters: usize, seed: u64) -> Result<Clustering> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if max_iters == 0 {
        return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
    }
    if let Some(p) = points.iter().find(|p| p.len() != points[0].len()) {
        return Err(Error::DimensionMismatch(p.len(), points[0].len()));
    }
    let distinct: HashSet<Vec<u64>> = points
        .iter()
        .map(|p| p.iter().map(|x| x.to_bits()).collect())
        .collect();
    if k > distinct.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds the {} distinct points",
            distinct.len()
        )));
    }

    let mut rng = rng_from_seed(seed);
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = d2.iter().rposition(|&d| d > 0.0).expect("more distinct points remain");
        for (i, &d) in d2.iter().enumerate() {
            if d > 0.0 && u < d {
                pick = i;
                break;
            }
            u -= d;
        }
        centroids.push(points[pick].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }

    let (mut labels, inertia) = assign(points, &centroids);
    let mut history = vec![inertia];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        let mut moved = labels.clone();
        update(points, &mut moved, &mut centroids);
        let (next, inertia) = assign(points, &centroids);
        history.push(inertia);
        let same = next == labels;
        labels = next;
        if same {
            converged = true;
            break;
        }
    }
    if !converged {
        means(points, &labels, &mut centroids);
        let inertia = points
            .iter()
            .zip(&labels)
            .map(|(p, &c)| sq_dist(p, &centroids[c]))
            .sum();
        history.push(inertia);
    }
    Ok(Clustering {
        assignments: labels,
        centroids,
        inertia: *history.last().unwrap(),
        inertia_history: history,
        iterations,
    })
}
