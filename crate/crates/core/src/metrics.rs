//! External clustering quality measures and the k-means labeler used to
//! read cluster assignments out of a latent representation.
//!
//! Accuracy aligns predicted and true labels with an optimal assignment
//! over the confusion matrix, so it is invariant to relabeling. Mutual
//! information is normalized by the geometric mean of the two entropies,
//! with the degenerate zero-entropy cases pinned: identical partitions
//! score 1 even when both collapse to a single cluster, and a zero-entropy
//! partition that differs from the other scores 0.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{AnimcError, Result};

/// The three quality scores reported together.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricBundle {
    pub acc: f64,
    pub nmi: f64,
    pub purity: f64,
}

fn check_pair(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.is_empty() {
        return Err(AnimcError::Validation("label vectors are empty".into()));
    }
    if pred.len() != truth.len() {
        return Err(AnimcError::Dimension(format!(
            "label vectors have lengths {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

/// Map arbitrary label values to compact indices 0..k.
fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut seen: Vec<usize> = Vec::new();
    let mapped = labels
        .iter()
        .map(|&l| match seen.iter().position(|&s| s == l) {
            Some(idx) => idx,
            None => {
                seen.push(l);
                seen.len() - 1
            }
        })
        .collect();
    (mapped, seen.len())
}

fn confusion(pred: &[usize], truth: &[usize]) -> (Array2<f64>, usize, usize) {
    let (p, kp) = compact(pred);
    let (t, kt) = compact(truth);
    let mut counts = Array2::zeros((kp, kt));
    for (&a, &b) in p.iter().zip(t.iter()) {
        counts[[a, b]] += 1.0;
    }
    (counts, kp, kt)
}

/// Minimum-cost perfect assignment on a square cost matrix, returning the
/// column matched to each row. Standard shortest-augmenting-path scheme
/// with row and column potentials, cubic in the matrix size.
fn assign_min_cost(cost: &Array2<f64>) -> Vec<usize> {
    let k = cost.nrows();
    let mut u = vec![0.0f64; k + 1];
    let mut v = vec![0.0f64; k + 1];
    let mut p = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=k {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; k];
    for j in 1..=k {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Clustering accuracy: the best achievable fraction of agreeing instances
/// over all one-to-one relabelings of the predicted clusters.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_pair(pred, truth)?;
    let (counts, kp, kt) = confusion(pred, truth);
    let k = kp.max(kt);
    let mut cost = Array2::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            let hit = if i < kp && j < kt { counts[[i, j]] } else { 0.0 };
            cost[[i, j]] = -hit;
        }
    }
    let matched = assign_min_cost(&cost);
    let mut total = 0.0;
    for (i, &j) in matched.iter().enumerate() {
        if i < kp && j < kt {
            total += counts[[i, j]];
        }
    }
    Ok(total / pred.len() as f64)
}

/// True when the two labelings induce the same partition of the instances.
fn identical_partitions(pred: &[usize], truth: &[usize]) -> bool {
    let (p, kp) = compact(pred);
    let (t, kt) = compact(truth);
    if kp != kt {
        return false;
    }
    // Under compact relabeling in order of first appearance, identical
    // partitions produce identical index sequences.
    p == t
}

/// Normalized mutual information with geometric-mean normalization.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_pair(pred, truth)?;
    if identical_partitions(pred, truth) {
        return Ok(1.0);
    }
    let n = pred.len() as f64;
    let (counts, kp, kt) = confusion(pred, truth);
    let row_sums: Vec<f64> = (0..kp).map(|i| counts.row(i).sum()).collect();
    let col_sums: Vec<f64> = (0..kt).map(|j| counts.column(j).sum()).collect();
    let entropy = |sums: &[f64]| -> f64 {
        sums.iter()
            .filter(|&&s| s > 0.0)
            .map(|&s| {
                let q = s / n;
                -q * q.ln()
            })
            .sum()
    };
    let hp = entropy(&row_sums);
    let ht = entropy(&col_sums);
    if hp <= 0.0 || ht <= 0.0 {
        // One side is a single cluster and the partitions differ.
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for i in 0..kp {
        for j in 0..kt {
            let nij = counts[[i, j]];
            if nij > 0.0 {
                mi += (nij / n) * ((n * nij) / (row_sums[i] * col_sums[j])).ln();
            }
        }
    }
    Ok((mi / (hp * ht).sqrt()).clamp(0.0, 1.0))
}

/// Fraction of instances belonging to the majority true class of their
/// predicted cluster.
pub fn purity(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_pair(pred, truth)?;
    let (counts, kp, _) = confusion(pred, truth);
    let total: f64 = (0..kp)
        .map(|i| counts.row(i).iter().fold(0.0f64, |m, &v| m.max(v)))
        .sum();
    Ok(total / pred.len() as f64)
}

/// All three scores at once.
pub fn evaluate(pred: &[usize], truth: &[usize]) -> Result<MetricBundle> {
    Ok(MetricBundle {
        acc: accuracy(pred, truth)?,
        nmi: nmi(pred, truth)?,
        purity: purity(pred, truth)?,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's k-means on the rows of `points`, with distance-weighted seeding,
/// several restarts, and deterministic output for a fixed seed. Returns the
/// labeling with the lowest within-cluster sum of squares.
pub fn kmeans(points: &Array2<f64>, k: usize, restarts: usize, seed: u64) -> Result<Vec<usize>> {
    let n = points.nrows();
    if k == 0 {
        return Err(AnimcError::Domain("cluster count must be at least 1".into()));
    }
    if n == 0 {
        return Err(AnimcError::Validation("no points to cluster".into()));
    }
    if k > n {
        return Err(AnimcError::Validation(format!(
            "cannot form {k} clusters from {n} points"
        )));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(AnimcError::Numeric("points contain a nonfinite value".into()));
    }
    let dim = points.ncols();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| points.row(i).to_vec()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..restarts.max(1) {
        // Distance-weighted seeding.
        let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
        centroids.push(rows[rng.random_range(0..n)].clone());
        while centroids.len() < k {
            let d2: Vec<f64> = rows
                .iter()
                .map(|p| {
                    centroids
                        .iter()
                        .map(|c| sq_dist(p, c))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            let total: f64 = d2.iter().sum();
            let idx = if total > 0.0 {
                let mut target = rng.random_range(0.0..total);
                let mut pick = n - 1;
                for (i, &w) in d2.iter().enumerate() {
                    if target < w {
                        pick = i;
                        break;
                    }
                    target -= w;
                }
                pick
            } else {
                rng.random_range(0..n)
            };
            centroids.push(rows[idx].clone());
        }
        // Lloyd iterations until assignments stabilize.
        let mut labels = vec![0usize; n];
        for _ in 0..100 {
            let mut changed = false;
            for (i, p) in rows.iter().enumerate() {
                let mut best_c = 0usize;
                let mut best_d = f64::INFINITY;
                for (cidx, c) in centroids.iter().enumerate() {
                    let d = sq_dist(p, c);
                    if d < best_d {
                        best_d = d;
                        best_c = cidx;
                    }
                }
                if labels[i] != best_c {
                    labels[i] = best_c;
                    changed = true;
                }
            }
            let mut sums = vec![vec![0.0; dim]; k];
            let mut sizes = vec![0usize; k];
            for (i, p) in rows.iter().enumerate() {
                sizes[labels[i]] += 1;
                for (s, &v) in sums[labels[i]].iter_mut().zip(p.iter()) {
                    *s += v;
                }
            }
            for cidx in 0..k {
                if sizes[cidx] == 0 {
                    // Re-seed an empty cluster with the point farthest from
                    // its current centroid.
                    let far = (0..n)
                        .max_by(|&a, &b| {
                            sq_dist(&rows[a], &centroids[labels[a]])
                                .partial_cmp(&sq_dist(&rows[b], &centroids[labels[b]]))
                                .unwrap()
                        })
                        .unwrap();
                    centroids[cidx] = rows[far].clone();
                    labels[far] = cidx;
                    changed = true;
                } else {
                    for (cdim, s) in centroids[cidx].iter_mut().zip(sums[cidx].iter()) {
                        *cdim = s / sizes[cidx] as f64;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let wcss: f64 = rows
            .iter()
            .zip(labels.iter())
            .map(|(p, &l)| sq_dist(p, &centroids[l]))
            .sum();
        if best.as_ref().map_or(true, |(b, _)| wcss < *b) {
            best = Some((wcss, labels));
        }
    }
    Ok(best.unwrap().1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::seq::SliceRandom;

    /// Exhaustive-permutation accuracy for small label sets.
    fn accuracy_brute(pred: &[usize], truth: &[usize]) -> f64 {
        let (counts, kp, kt) = confusion(pred, truth);
        let k = kp.max(kt);
        let mut perm: Vec<usize> = (0..k).collect();
        let mut best = 0.0f64;
        permute(&mut perm, 0, &mut |p| {
            let mut total = 0.0;
            for (i, &j) in p.iter().enumerate() {
                if i < kp && j < kt {
                    total += counts[[i, j]];
                }
            }
            best = best.max(total);
        });
        best / pred.len() as f64
    }

    fn permute(items: &mut Vec<usize>, at: usize, visit: &mut impl FnMut(&[usize])) {
        if at == items.len() {
            visit(items);
            return;
        }
        for i in at..items.len() {
            items.swap(at, i);
            permute(items, at + 1, visit);
            items.swap(at, i);
        }
    }

    #[test]
    fn accuracy_is_relabel_invariant() {
        let pred = vec![0, 0, 1, 1];
        let truth = vec![1, 1, 0, 0];
        assert_abs_diff_eq!(accuracy(&pred, &truth).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn purity_majority_fraction() {
        let pred = vec![0, 0, 1, 1];
        let truth = vec![0, 1, 1, 1];
        assert_abs_diff_eq!(purity(&pred, &truth).unwrap(), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn nmi_degenerate_conventions() {
        // Identical partitions score 1 even when both are one cluster.
        let a = vec![0, 0, 0];
        assert_eq!(nmi(&a, &a).unwrap(), 1.0);
        assert_eq!(nmi(&[2, 2, 2, 2], &[5, 5, 5, 5]).unwrap(), 1.0);
        // Zero entropy on one side with a differing partner scores 0.
        assert_eq!(nmi(&[0, 0, 0, 0], &[0, 1, 0, 1]).unwrap(), 0.0);
        assert_eq!(nmi(&[0, 1, 0, 1], &[3, 3, 3, 3]).unwrap(), 0.0);
        // Relabeled identical two-cluster partitions.
        assert_eq!(nmi(&[0, 1], &[1, 0]).unwrap(), 1.0);
    }

    #[test]
    fn assignment_matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..60 {
            let kp = rng.random_range(1..=6);
            let kt = rng.random_range(1..=6);
            let n = rng.random_range(4..40);
            let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..kp)).collect();
            let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..kt)).collect();
            let fast = accuracy(&pred, &truth).unwrap();
            let slow = accuracy_brute(&pred, &truth);
            assert_abs_diff_eq!(fast, slow, epsilon = 1e-12);
            let _ = trial;
        }
    }

    #[test]
    fn metrics_are_instance_order_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 50;
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let base = evaluate(&pred, &truth).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let pred_s: Vec<usize> = order.iter().map(|&i| pred[i]).collect();
        let truth_s: Vec<usize> = order.iter().map(|&i| truth[i]).collect();
        let shuffled = evaluate(&pred_s, &truth_s).unwrap();
        assert_abs_diff_eq!(base.acc, shuffled.acc, epsilon = 1e-12);
        assert_abs_diff_eq!(base.nmi, shuffled.nmi, epsilon = 1e-12);
        assert_abs_diff_eq!(base.purity, shuffled.purity, epsilon = 1e-12);
    }

    #[test]
    fn perfect_scores_exactly_when_partitions_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..40 {
            let n = rng.random_range(3..30);
            let k = rng.random_range(1..=4);
            let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let truth: Vec<usize> = if rng.random_bool(0.5) {
                // A pure relabeling of pred.
                pred.iter().map(|&l| (l + 1) % k.max(1)).collect()
            } else {
                (0..n).map(|_| rng.random_range(0..k)).collect()
            };
            let b = evaluate(&pred, &truth).unwrap();
            let identical = identical_partitions(&pred, &truth);
            let all_one = b.acc >= 1.0 - 1e-12 && b.nmi >= 1.0 - 1e-12 && b.purity >= 1.0 - 1e-12;
            assert_eq!(identical, all_one, "pred {pred:?} truth {truth:?} -> {b:?}");
        }
    }

    #[test]
    fn kmeans_rejects_more_clusters_than_points() {
        let pts = array![[0.0, 0.0], [1.0, 1.0]];
        assert!(matches!(kmeans(&pts, 3, 5, 0), Err(AnimcError::Validation(_))));
        assert!(matches!(kmeans(&pts, 0, 5, 0), Err(AnimcError::Domain(_))));
    }

    #[test]
    fn kmeans_separates_distant_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pts = Array2::zeros((60, 2));
        let mut truth = Vec::with_capacity(60);
        for i in 0..60 {
            let cl = i % 3;
            truth.push(cl);
            pts[[i, 0]] = cl as f64 * 20.0 + rng.random_range(-0.5..0.5);
            pts[[i, 1] ] = cl as f64 * -10.0 + rng.random_range(-0.5..0.5);
        }
        let labels = kmeans(&pts, 3, 10, 42).unwrap();
        assert_abs_diff_eq!(accuracy(&labels, &truth).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn kmeans_is_deterministic_for_a_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let pts = Array2::from_shape_fn((40, 3), |_| rng.random_range(-1.0..1.0));
        let a = kmeans(&pts, 4, 10, 7).unwrap();
        let b = kmeans(&pts, 4, 10, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kmeans_single_cluster_labels_everything_zero() {
        let pts = array![[1.0], [2.0], [3.0]];
        let labels = kmeans(&pts, 1, 3, 0).unwrap();
        assert_eq!(labels, vec![0, 0, 0]);
    }
}
