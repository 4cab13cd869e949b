//! Weighted K-means with Maximin initialisation.

use crate::error::{Error, Result};
use crate::model::{sq_dist, Partition};

pub const DEFAULT_MAX_ITERS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct ClusteringResult {
    pub partition: Partition,
    pub centers: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

/// Farthest-first seeding. The first center is arm 0; each further center is
/// the arm farthest from its nearest chosen center, ties to the lowest index.
/// Returns the centers and the 0-based arms they came from.
pub fn maximin_init(estimates: &[Vec<f64>], k: usize) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let m = estimates.len();
    if k == 0 || m < k {
        return Err(Error::Domain(format!(
            "maximin needs 1 ≤ K ≤ M, got K={k}, M={m}"
        )));
    }
    check_dims(estimates)?;
    let mut arms = vec![0usize];
    let mut chosen = vec![false; m];
    chosen[0] = true;
    let mut nearest: Vec<f64> = estimates
        .iter()
        .map(|x| sq_dist(x, &estimates[0]))
        .collect();
    while arms.len() < k {
        let mut best = None;
        for (i, &dist) in nearest.iter().enumerate() {
            if chosen[i] {
                continue;
            }
            if best.is_none_or(|(_, b)| dist > b) {
                best = Some((i, dist));
            }
        }
        let (next, _) = best.expect("fewer unchosen arms than requested centers");
        chosen[next] = true;
        arms.push(next);
        for (i, n) in nearest.iter_mut().enumerate() {
            *n = n.min(sq_dist(&estimates[i], &estimates[next]));
        }
    }
    let centers = arms.iter().map(|&a| estimates[a].clone()).collect();
    Ok((centers, arms))
}

/// Lloyd iterations on weighted arm estimates.
///
/// Without `warm_start` the centers are seeded by [`maximin_init`]; with it the
/// first centers are the weighted means of the warm partition. Stops when an
/// assignment repeats or after `max_iters` assignments.
pub fn weighted_kmeans(
    estimates: &[Vec<f64>],
    weights: &[f64],
    k: usize,
    warm_start: Option<&Partition>,
    max_iters: usize,
) -> Result<ClusteringResult> {
    let m = estimates.len();
    if weights.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            got: weights.len(),
        });
    }
    if let Some(index) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidWeight {
            index,
            value: weights[index],
            requirement: "K-means weights must be strictly positive",
        });
    }
    if k == 0 || k >= m {
        return Err(Error::Domain(format!(
            "K-means needs 1 ≤ K < M, got K={k}, M={m}"
        )));
    }
    if max_iters == 0 {
        return Err(Error::Domain("max_iters must be at least 1".into()));
    }
    check_dims(estimates)?;

    let mut labels: Option<Vec<usize>> = None;
    let mut centers = match warm_start {
        Some(warm) => {
            if warm.num_arms() != m || warm.num_clusters() != k {
                return Err(Error::Domain(format!(
                    "warm start has M={}, K={}; expected M={m}, K={k}",
                    warm.num_arms(),
                    warm.num_clusters()
                )));
            }
            let mut warm_labels = warm.labels().to_vec();
            let seed = weighted_means(estimates, weights, &warm_labels, k, None);
            repair_empty(estimates, &mut warm_labels, &seed, k);
            weighted_means(estimates, weights, &warm_labels, k, None)
        }
        None => maximin_init(estimates, k)?.0,
    };

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        let mut next: Vec<usize> = estimates
            .iter()
            .map(|x| nearest_center(x, &centers))
            .collect();
        repair_empty(estimates, &mut next, &centers, k);
        if labels.as_ref() == Some(&next) {
            converged = true;
            break;
        }
        centers = weighted_means(estimates, weights, &next, k, Some(&centers));
        labels = Some(next);
    }

    Ok(ClusteringResult {
        partition: Partition::new(labels.expect("at least one assignment"), k)?,
        centers,
        iterations,
        converged,
    })
}

/// `Σ_m w_m ‖x_m − center(label_m)‖²`.
pub fn weighted_objective(
    estimates: &[Vec<f64>],
    weights: &[f64],
    partition: &Partition,
    centers: &[Vec<f64>],
) -> Result<f64> {
    if weights.len() != estimates.len() || partition.num_arms() != estimates.len() {
        return Err(Error::LengthMismatch {
            expected: estimates.len(),
            got: weights.len().min(partition.num_arms()),
        });
    }
    if centers.len() != partition.num_clusters() {
        return Err(Error::ClusterCountMismatch {
            left: partition.num_clusters(),
            right: centers.len(),
        });
    }
    Ok(estimates
        .iter()
        .zip(weights)
        .zip(partition.labels())
        .map(|((x, w), &l)| w * sq_dist(x, &centers[l]))
        .sum())
}

fn nearest_center(x: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best.0
}

// Gives every empty cluster the arm farthest from its own center, taken from
// a cluster that still has at least two arms.
fn repair_empty(estimates: &[Vec<f64>], labels: &mut [usize], centers: &[Vec<f64>], k: usize) {
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, &l) in labels.iter().enumerate() {
            if sizes[l] < 2 {
                continue;
            }
            let d = sq_dist(&estimates[i], &centers[l]);
            if best.is_none_or(|(_, b)| d > b) {
                best = Some((i, d));
            }
        }
        let (arm, _) = best.expect("K < M leaves a cluster with two arms");
        sizes[labels[arm]] -= 1;
        labels[arm] = empty;
        sizes[empty] = 1;
    }
}

fn weighted_means(
    estimates: &[Vec<f64>],
    weights: &[f64],
    labels: &[usize],
    k: usize,
    fallback: Option<&[Vec<f64>]>,
) -> Vec<Vec<f64>> {
    let d = estimates[0].len();
    let mut sums = vec![vec![0.0; d]; k];
    let mut mass = vec![0.0; k];
    for ((x, &w), &l) in estimates.iter().zip(weights).zip(labels) {
        mass[l] += w;
        for (s, v) in sums[l].iter_mut().zip(x) {
            *s += w * v;
        }
    }
    for (j, s) in sums.iter_mut().enumerate() {
        if mass[j] > 0.0 {
            s.iter_mut().for_each(|v| *v /= mass[j]);
        } else if let Some(prev) = fallback {
            s.clone_from(&prev[j]);
        }
    }
    sums
}

fn check_dims(estimates: &[Vec<f64>]) -> Result<()> {
    let d = estimates.first().map_or(0, Vec::len);
    if d == 0 {
        return Err(Error::Domain("estimates must be nonempty vectors".into()));
    }
    if let Some(x) = estimates.iter().find(|x| x.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    Ok(())
}
