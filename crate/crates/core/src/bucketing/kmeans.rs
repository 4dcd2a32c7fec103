//! Seeded k-means over standardized vectors: k-means++ seeding, Lloyd
//! iterations with deterministic tie breaking, empty clusters reseeded to
//! the point farthest from its centroid.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const MAX_ITERATIONS: usize = 100;
pub const SHIFT_TOLERANCE: f64 = 1e-4;

/// Per-column standardization fitted on training vectors. A column with
/// zero spread maps to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Scaler {
    pub fn fit(points: &[Vec<f64>]) -> Scaler {
        let dims = points.first().map_or(0, |p| p.len());
        let n = points.len() as f64;
        let mut means = vec![0.0; dims];
        for p in points {
            for (m, x) in means.iter_mut().zip(p) {
                *m += x;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut stds = vec![0.0; dims];
        for p in points {
            for (s, (x, m)) in stds.iter_mut().zip(p.iter().zip(&means)) {
                *s += (x - m) * (x - m);
            }
        }
        for s in &mut stds {
            *s = (*s / n).sqrt();
        }
        Scaler { means, stds }
    }

    pub fn transform(&self, point: &[f64]) -> Vec<f64> {
        point
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(x, (m, s))| if *s > 0.0 { (x - m) / s } else { 0.0 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
}

/// Diagnostics from a fit: SSE after each assignment step and whether the
/// requested k was cut down to the number of distinct points.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFitInfo {
    pub iterations: usize,
    pub sse_history: Vec<f64>,
    pub effective_k: usize,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KMeans {
    /// Index of the nearest centroid, lowest index on ties.
    pub fn assign(&self, point: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centroids.iter().enumerate() {
            let d = dist2(point, c);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn sse(&self, points: &[Vec<f64>]) -> f64 {
        points
            .iter()
            .map(|p| dist2(p, &self.centroids[self.assign(p)]))
            .sum()
    }
}

fn seed_centroids(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())].clone());
    while centroids.len() < k {
        let d2: Vec<f64> = points
            .iter()
            .map(|p| {
                centroids
                    .iter()
                    .map(|c| dist2(p, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, w) in d2.iter().enumerate() {
                if r < *w {
                    chosen = i;
                    break;
                }
                r -= w;
            }
            chosen
        } else {
            // all points coincide with a centroid; effective k prevents
            // this, but stay safe
            rng.gen_range(0..points.len())
        };
        centroids.push(points[next].clone());
    }
    centroids
}

/// Fits k-means to already standardized points. `k` is reduced to the
/// number of distinct points when it exceeds it.
pub fn fit_kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> (KMeans, KMeansFitInfo) {
    assert!(!points.is_empty() && k >= 1);
    let mut distinct: Vec<&Vec<f64>> = points.iter().collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    distinct.dedup();
    let effective_k = k.min(distinct.len());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(points, effective_k, &mut rng);
    let mut info = KMeansFitInfo {
        iterations: 0,
        sse_history: Vec::new(),
        effective_k,
    };
    let mut assignments = vec![0usize; points.len()];

    for _ in 0..MAX_ITERATIONS {
        info.iterations += 1;
        let model = KMeans {
            centroids: centroids.clone(),
        };
        let mut sse = 0.0;
        for (a, p) in assignments.iter_mut().zip(points) {
            *a = model.assign(p);
            sse += dist2(p, &model.centroids[*a]);
        }
        info.sse_history.push(sse);

        let dims = points[0].len();
        let mut sums = vec![vec![0.0; dims]; effective_k];
        let mut counts = vec![0usize; effective_k];
        for (a, p) in assignments.iter().zip(points) {
            counts[*a] += 1;
            for (s, x) in sums[*a].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut used_reseeds: Vec<usize> = Vec::new();
        let mut next = Vec::with_capacity(effective_k);
        for j in 0..effective_k {
            if counts[j] == 0 {
                // farthest point from its current centroid takes over the
                // empty cluster; lowest index on ties
                let mut far = 0;
                let mut far_d = -1.0;
                for (i, p) in points.iter().enumerate() {
                    if used_reseeds.contains(&i) {
                        continue;
                    }
                    let d = dist2(p, &centroids[assignments[i]]);
                    if d > far_d {
                        far_d = d;
                        far = i;
                    }
                }
                used_reseeds.push(far);
                next.push(points[far].clone());
            } else {
                next.push(
                    sums[j]
                        .iter()
                        .map(|s| s / counts[j] as f64)
                        .collect::<Vec<f64>>(),
                );
            }
        }
        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| dist2(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        if shift < SHIFT_TOLERANCE {
            break;
        }
    }

    (KMeans { centroids }, info)
}
