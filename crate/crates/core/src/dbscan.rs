//! Density-based clustering (DBSCAN) with a Euclidean metric.

/// Label of points that belong to no cluster.
pub const NOISE: i64 = -1;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices within `eps` of `points[i]`, including `i` itself.
fn region(points: &[Vec<f64>], i: usize, eps2: f64) -> Vec<usize> {
    (0..points.len())
        .filter(|&j| dist2(&points[i], &points[j]) <= eps2)
        .collect()
}

/// Cluster labels `0, 1, ...` in order of discovery, [`NOISE`] for outliers.
///
/// A point is core when at least `min_points` points (itself included) lie
/// within `eps`. Points are visited in index order, so labels are
/// deterministic.
pub fn dbscan(points: &[Vec<f64>], eps: f64, min_points: usize) -> Vec<i64> {
    const UNSEEN: i64 = -2;
    let n = points.len();
    let eps2 = eps * eps;
    let mut labels = vec![UNSEEN; n];
    let mut cluster = 0;
    for i in 0..n {
        if labels[i] != UNSEEN {
            continue;
        }
        let nb = region(points, i, eps2);
        if nb.len() < min_points {
            labels[i] = NOISE;
            continue;
        }
        labels[i] = cluster;
        let mut queue = nb;
        let mut head = 0;
        while head < queue.len() {
            let j = queue[head];
            head += 1;
            if labels[j] == NOISE {
                labels[j] = cluster;
            }
            if labels[j] != UNSEEN {
                continue;
            }
            labels[j] = cluster;
            let nb_j = region(points, j, eps2);
            if nb_j.len() >= min_points {
                queue.extend(nb_j);
            }
        }
        cluster += 1;
    }
    labels
}

/// Median over points of the distance to their `k`-th nearest neighbour.
pub fn median_knn_distance(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let k = k.clamp(1, n - 1);
    let mut kth: Vec<f64> = (0..n)
        .map(|i| {
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| dist2(&points[i], &points[j]))
                .collect();
            d.select_nth_unstable_by(k - 1, f64::total_cmp);
            d[k - 1].sqrt()
        })
        .collect();
    kth.sort_by(f64::total_cmp);
    if n % 2 == 1 {
        kth[n / 2]
    } else {
        0.5 * (kth[n / 2 - 1] + kth[n / 2])
    }
}
