//! Deterministic k-means used by the clustering baselines.
//!
//! Seeding is farthest-point: the first center is point 0, each further
//! center is the point with the largest squared distance to its nearest
//! chosen center (lowest index on ties). Lloyd iterations run until labels
//! stop changing or [`MAX_ITERS`] is reached. A cluster that ends up empty is
//! refilled with the point farthest from its own center among clusters that
//! have more than one member, so every cluster is non-empty when `k <= n`.

pub const MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub labels: Vec<usize>,
    /// `k×dim`, row-major.
    pub centers: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist_center(point: &[f32], center: &[f64]) -> f64 {
    point
        .iter()
        .zip(center)
        .map(|(&p, &c)| {
            let diff = p as f64 - c;
            diff * diff
        })
        .sum()
}

/// Cluster `points` (`n×dim`, row-major) into `k` groups. Requires `1 <= k <= n`.
pub fn kmeans(points: &[f32], dim: usize, k: usize) -> KMeans {
    assert!(dim > 0);
    let n = points.len() / dim;
    assert!(k >= 1 && k <= n, "k={k} must be in [1, {n}]");
    let row = |i: usize| &points[i * dim..(i + 1) * dim];

    let mut centers = Vec::with_capacity(k * dim);
    let mut chosen = vec![false; n];
    centers.extend(row(0).iter().map(|&v| v as f64));
    chosen[0] = true;
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist_center(row(i), &centers[..dim])).collect();
    while centers.len() < k * dim {
        let mut best = None;
        for i in 0..n {
            if chosen[i] {
                continue;
            }
            match best {
                Some((_, d)) if nearest[i] <= d => {}
                _ => best = Some((i, nearest[i])),
            }
        }
        let (pick, _) = best.expect("k <= n leaves an unchosen point");
        chosen[pick] = true;
        let start = centers.len();
        centers.extend(row(pick).iter().map(|&v| v as f64));
        for (i, near) in nearest.iter_mut().enumerate() {
            let d = sq_dist_center(row(i), &centers[start..]);
            if d < *near {
                *near = d;
            }
        }
    }

    let assign = |centers: &[f64], labels: &mut [usize]| -> bool {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let mut best = (0, f64::INFINITY);
            for c in 0..k {
                let d = sq_dist_center(row(i), &centers[c * dim..(c + 1) * dim]);
                if d < best.1 {
                    best = (c, d);
                }
            }
            if *label != best.0 {
                *label = best.0;
                changed = true;
            }
        }
        changed
    };

    let mut labels = vec![usize::MAX; n];
    assign(&centers, &mut labels);
    let mut iterations = 0;
    loop {
        iterations += 1;
        repair_empty(points, dim, k, &centers, &mut labels);
        update_centers(points, dim, k, &labels, &mut centers);
        if iterations >= MAX_ITERS || !assign(&centers, &mut labels) {
            break;
        }
    }
    repair_empty(points, dim, k, &centers, &mut labels);
    update_centers(points, dim, k, &labels, &mut centers);

    KMeans {
        labels,
        centers,
        iterations,
    }
}

fn update_centers(points: &[f32], dim: usize, k: usize, labels: &[usize], centers: &mut [f64]) {
    let mut sums = vec![0f64; k * dim];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, &v) in sums[l * dim..(l + 1) * dim]
            .iter_mut()
            .zip(&points[i * dim..(i + 1) * dim])
        {
            *s += v as f64;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for j in 0..dim {
                centers[c * dim + j] = sums[c * dim + j] / counts[c] as f64;
            }
        }
    }
}

fn repair_empty(points: &[f32], dim: usize, k: usize, centers: &[f64], labels: &mut [usize]) {
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut best: Option<(usize, f64)> = None;
        for (i, &l) in labels.iter().enumerate() {
            if counts[l] < 2 {
                continue;
            }
            let d = sq_dist_center(&points[i * dim..(i + 1) * dim], &centers[l * dim..(l + 1) * dim]);
            match best {
                Some((_, bd)) if d <= bd => {}
                _ => best = Some((i, d)),
            }
        }
        let (steal, _) = best.expect("k <= n guarantees a cluster with two members");
        labels[steal] = empty;
    }
}
