//! Instance hardness: the inner infimum over alternative instances, the
//! hardness parameter `D*`, and the optimal pull proportions.
//!
//! The set of alternatives is never materialised. It is reached through the
//! closed-form minimum over single-arm relabelings, and through two
//! enumerators that serve as reference implementations for small instances.

use crate::error::{Error, Result};
use crate::model::{self, sq_dist, Instance, Partition};

/// Largest `M` accepted by [`brute_force_all_partitions`].
pub const MAX_ENUMERATION_ARMS: usize = 12;

/// Centers closer than this are treated as merged.
pub const DEGENERATE_GAP: f64 = 1e-12;

/// Relative gap above which the minimax solver reports failure.
pub const MAX_SOLVER_GAP: f64 = 1e-6;

/// A point of the probability simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexWeights {
    values: Vec<f64>,
}

impl SimplexWeights {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain(
                "simplex weights need at least one entry".into(),
            ));
        }
        if let Some((i, &v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InvalidWeight {
                index: i,
                value: v,
                requirement: "simplex weights must be finite and nonnegative",
            });
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::Domain(format!(
                "simplex weights sum to {sum}, not 1"
            )));
        }
        Ok(Self { values })
    }

    /// Divides nonnegative `values` by their sum.
    pub fn normalized(values: &[f64]) -> Result<Self> {
        let sum: f64 = values.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::Domain(
                "cannot normalize weights with nonpositive sum".into(),
            ));
        }
        Self::new(values.iter().map(|v| v / sum).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            values: vec![1.0 / n as f64; n],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True iff every entry is strictly positive.
    pub fn is_interior(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }
}

/// Output of [`solve_dstar`].
#[derive(Clone, Debug)]
pub struct HardnessSolution {
    pub d_star: f64,
    /// Optimal cluster weights.
    pub w_star: SimplexWeights,
    /// Optimal pull proportions, `w*(c_m) / n(c_m)`.
    pub lambda_star: SimplexWeights,
    /// Newton steps taken.
    pub iterations: usize,
    /// Certified relative gap between `D*/2` and a dual lower bound.
    pub gap: f64,
}

/// Per-cluster arm counts, summed weights and minimum single-arm weight.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterAggregates {
    pub counts: Vec<usize>,
    pub sums: Vec<f64>,
    pub minima: Vec<f64>,
}

pub fn cluster_aggregates(partition: &Partition, weights: &[f64]) -> Result<ClusterAggregates> {
    check_len(partition.num_arms(), weights.len())?;
    let k = partition.num_clusters();
    let mut agg = ClusterAggregates {
        counts: vec![0; k],
        sums: vec![0.0; k],
        minima: vec![f64::INFINITY; k],
    };
    for (&l, &w) in partition.labels().iter().zip(weights) {
        agg.counts[l] += 1;
        agg.sums[l] += w;
        agg.minima[l] = agg.minima[l].min(w);
    }
    Ok(agg)
}

/// Minimum of the weighted squared-distance objective over all alternatives
/// to `partition`, from the single-arm relabeling closed form.
///
/// Weights need not be normalized: the value is homogeneous of degree one.
/// Any zero weight gives 0.
pub fn alt_inf_closed_form(
    partition: &Partition,
    centers: &[Vec<f64>],
    weights: &[f64],
) -> Result<f64> {
    check_centers(partition, centers)?;
    check_nonnegative(weights)?;
    let agg = cluster_aggregates(partition, weights)?;
    let mut best = f64::INFINITY;
    for a in 0..partition.num_clusters() {
        if agg.counts[a] < 2 {
            continue;
        }
        let wbar = agg.minima[a];
        for b in 0..partition.num_clusters() {
            if b == a {
                continue;
            }
            let denom = wbar + agg.sums[b];
            let v = if denom > 0.0 {
                wbar * agg.sums[b] / denom * sq_dist(&centers[a], &centers[b])
            } else {
                0.0
            };
            best = best.min(v);
        }
    }
    if best.is_infinite() {
        return Err(Error::Internal(
            "no cluster with more than one arm; the alternative set is empty".into(),
        ));
    }
    if weights.iter().any(|&w| w == 0.0) {
        return Ok(0.0);
    }
    Ok(best)
}

/// `Σ_m λ_m ‖μ(c_m) − μ'(c'_m)‖²`.
pub fn dist_objective(base: &Instance, alt: &Instance, weights: &[f64]) -> Result<f64> {
    check_len(base.num_arms(), alt.num_arms())?;
    check_len(base.num_arms(), weights.len())?;
    if base.dim() != alt.dim() {
        return Err(Error::DimensionMismatch {
            expected: base.dim(),
            got: alt.dim(),
        });
    }
    Ok((0..base.num_arms())
        .map(|m| weights[m] * sq_dist(base.arm_mean(m), alt.arm_mean(m)))
        .sum())
}

/// Enumerates every single-arm relabeling and builds its optimal alternative
/// instance explicitly. Returns the smallest objective and its witness; ties
/// go to the lexicographically smallest label vector.
pub fn brute_force_alt_inf(
    partition: &Partition,
    centers: &[Vec<f64>],
    weights: &[f64],
) -> Result<(f64, Instance)> {
    check_centers(partition, centers)?;
    check_positive(weights)?;
    let base = Instance::new(partition.clone(), centers.to_vec())?;
    let agg = cluster_aggregates(partition, weights)?;
    let k = partition.num_clusters();
    let mut best: Option<(f64, Instance)> = None;
    for m in 0..partition.num_arms() {
        let from = partition.label(m);
        if agg.counts[from] < 2 {
            continue;
        }
        for to in (0..k).filter(|&j| j != from) {
            let mut labels = partition.labels().to_vec();
            labels[m] = to;
            let mut alt_centers = centers.to_vec();
            let (lm, wk) = (weights[m], agg.sums[to]);
            alt_centers[to] = centers[from]
                .iter()
                .zip(&centers[to])
                .map(|(x, y)| (lm * x + wk * y) / (lm + wk))
                .collect();
            let alt = Instance::new(Partition::new(labels, k)?, alt_centers)?;
            let value = dist_objective(&base, &alt, weights)?;
            let better = match &best {
                None => true,
                Some((v, inst)) => {
                    value < *v
                        || (value == *v && alt.partition().labels() < inst.partition().labels())
                }
            };
            if better {
                best = Some((value, alt));
            }
        }
    }
    best.ok_or_else(|| Error::Internal("no admissible single-arm relabeling".into()))
}

/// Result of [`brute_force_all_partitions`].
#[derive(Clone, Debug)]
pub struct PartitionMinimum {
    pub value: f64,
    pub partition: Partition,
    pub centers: Vec<Vec<f64>>,
}

/// Exhaustive minimum of `Σ_m λ_m ‖x_m − μ'(c'_m)‖²` over every partition into
/// exactly `k` nonempty clusters that is not equivalent to `excluded`, with the
/// centers set to weighted cluster means of the reference vectors `x_m`.
///
/// One representative per equivalence class is visited (labels numbered by
/// first occurrence), which is also the lexicographically smallest member of
/// the class, so ties resolve to the smallest label vector.
pub fn brute_force_all_partitions(
    reference_means: &[Vec<f64>],
    weights: &[f64],
    excluded: &Partition,
    k: usize,
) -> Result<PartitionMinimum> {
    let m = reference_means.len();
    if m > MAX_ENUMERATION_ARMS {
        return Err(Error::TooManyArms {
            m,
            max: MAX_ENUMERATION_ARMS,
        });
    }
    check_len(m, weights.len())?;
    check_len(m, excluded.num_arms())?;
    check_positive(weights)?;
    if k == 0 || k > m {
        return Err(Error::Domain(format!(
            "cannot split {m} arms into {k} clusters"
        )));
    }
    let d = reference_means[0].len();
    if let Some(x) = reference_means.iter().find(|x| x.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    let excluded_canonical = excluded.canonical_labels();

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut labels = vec![0usize; m];
    let mut visit = |labels: &[usize]| {
        if labels == excluded_canonical.as_slice() {
            return;
        }
        let centers = weighted_means(reference_means, weights, labels, k);
        let value: f64 = (0..m)
            .map(|i| weights[i] * sq_dist(&reference_means[i], &centers[labels[i]]))
            .sum();
        if best.as_ref().is_none_or(|(v, _)| value < *v) {
            best = Some((value, labels.to_vec()));
        }
    };
    restricted_growth(&mut labels, 1, 1, k, &mut visit);

    let (value, labels) = best
        .ok_or_else(|| Error::Domain("no partition other than the excluded one exists".into()))?;
    let centers = weighted_means(reference_means, weights, &labels, k);
    Ok(PartitionMinimum {
        value,
        partition: Partition::new(labels, k)?,
        centers,
    })
}

// Visits, in lexicographic order, every label vector whose labels appear in
// first-occurrence order and which uses exactly `k` labels.
fn restricted_growth(
    labels: &mut [usize],
    pos: usize,
    used: usize,
    k: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    let m = labels.len();
    if pos == m {
        if used == k {
            visit(labels);
        }
        return;
    }
    if k - used > m - pos {
        return;
    }
    for l in 0..=used.min(k - 1) {
        labels[pos] = l;
        restricted_growth(labels, pos + 1, used.max(l + 1), k, visit);
    }
}

fn weighted_means(
    points: &[Vec<f64>],
    weights: &[f64],
    labels: &[usize],
    k: usize,
) -> Vec<Vec<f64>> {
    let d = points[0].len();
    let mut sums = vec![vec![0.0; d]; k];
    let mut mass = vec![0.0; k];
    for ((x, &w), &l) in points.iter().zip(weights).zip(labels) {
        mass[l] += w;
        for (s, v) in sums[l].iter_mut().zip(x) {
            *s += w * v;
        }
    }
    for (s, &w) in sums.iter_mut().zip(&mass) {
        if w > 0.0 {
            s.iter_mut().for_each(|v| *v /= w);
        }
    }
    sums
}

/// Minimax objective `F(w) = max over pairs (k, k'), n(k) > 1, k' ≠ k of
/// (n(k)/w(k) + 1/w(k'))·‖μ(k) − μ(k')‖⁻²`; `D* = 2·min F` over the simplex.
pub fn minimax_objective(partition: &Partition, centers: &[Vec<f64>], w: &[f64]) -> Result<f64> {
    check_centers(partition, centers)?;
    check_len(partition.num_clusters(), w.len())?;
    let table = PairTable::new(partition, centers)?;
    Ok(table.objective(w))
}

/// `D*`, the optimal cluster weights and the optimal pull proportions.
pub fn solve_dstar(instance: &Instance) -> Result<HardnessSolution> {
    solve_dstar_from(instance, None)
}

/// As [`solve_dstar`], optionally starting from cluster weights `warm`
/// (length `K`, strictly positive; normalisation not required).
pub fn solve_dstar_from(instance: &Instance, warm: Option<&[f64]>) -> Result<HardnessSolution> {
    model::ensure_admissible(instance)?;
    let gap = instance.min_center_gap();
    if gap < DEGENERATE_GAP {
        return Err(Error::DegenerateCenters(gap));
    }
    let partition = instance.partition();
    let k = partition.num_clusters();
    let table = PairTable::new(partition, instance.centers())?;

    let start = match warm {
        Some(w) => {
            check_len(k, w.len())?;
            if w.iter().all(|&x| x > 0.0 && x.is_finite()) {
                w.to_vec()
            } else {
                vec![1.0; k]
            }
        }
        None => vec![1.0; k],
    };
    let outcome = table.minimize(&start);
    if !(outcome.gap <= MAX_SOLVER_GAP) {
        return Err(Error::NotConverged {
            gap: outcome.gap,
            iterations: outcome.iterations,
        });
    }

    let w_star = SimplexWeights::normalized(&outcome.w)?;
    let lambda: Vec<f64> = partition
        .labels()
        .iter()
        .map(|&l| w_star.values()[l] / table.counts[l] as f64)
        .collect();
    let lambda_star = SimplexWeights::normalized(&lambda)?;
    Ok(HardnessSolution {
        d_star: 2.0 * outcome.value,
        w_star,
        lambda_star,
        iterations: outcome.iterations,
        gap: outcome.gap,
    })
}

/// Asymptotic lower bound `d_KL(δ, 1−δ)·D*` on the expected number of pulls.
pub fn lower_bound(delta: f64, d_star: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!(
            "delta must lie in (0,1), got {delta}"
        )));
    }
    // d_KL(δ, 1−δ) without forming 1−δ
    let kl = (1.0 - 2.0 * delta) * ((-delta).ln_1p() - delta.ln());
    Ok(kl.max(0.0) * d_star)
}

struct Pair {
    a: usize,
    b: usize,
    /// `1 / ‖μ(a) − μ(b)‖²`
    coef: f64,
}

struct PairTable {
    counts: Vec<usize>,
    pairs: Vec<Pair>,
}

struct MinimaxOutcome {
    w: Vec<f64>,
    value: f64,
    gap: f64,
    iterations: usize,
}

impl PairTable {
    fn new(partition: &Partition, centers: &[Vec<f64>]) -> Result<Self> {
        let counts = partition.cluster_sizes();
        let k = counts.len();
        let mut pairs = Vec::new();
        for a in (0..k).filter(|&a| counts[a] > 1) {
            for b in (0..k).filter(|&b| b != a) {
                pairs.push(Pair {
                    a,
                    b,
                    coef: 1.0 / sq_dist(&centers[a], &centers[b]),
                });
            }
        }
        if pairs.is_empty() {
            return Err(Error::Domain(
                "need at least two clusters and one cluster with two arms".into(),
            ));
        }
        Ok(Self { counts, pairs })
    }

    fn term(&self, p: &Pair, w: &[f64]) -> f64 {
        (self.counts[p.a] as f64 / w[p.a] + 1.0 / w[p.b]) * p.coef
    }

    fn objective(&self, w: &[f64]) -> f64 {
        self.pairs
            .iter()
            .map(|p| self.term(p, w))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    // Lagrangian dual of: minimise Σ w subject to every pair term ≤ 1.
    // For multipliers u ≥ 0 the inner minimum over w > 0 is separable:
    // Σ_k 2·sqrt(A_k) − Σ_p u_p. Any u gives a lower bound on min F.
    fn dual_bound(&self, u: &[f64]) -> f64 {
        let mut coeff = vec![0.0; self.counts.len()];
        for (p, &up) in self.pairs.iter().zip(u) {
            coeff[p.a] += up * p.coef * self.counts[p.a] as f64;
            coeff[p.b] += up * p.coef;
        }
        2.0 * coeff.iter().map(|c| c.sqrt()).sum::<f64>() - u.iter().sum::<f64>()
    }

    // Barrier value τ·Σw − Σ log(1 − term_p); None outside the domain.
    fn barrier(&self, w: &[f64], tau: f64) -> Option<f64> {
        if w.iter().any(|&x| !(x > 0.0)) {
            return None;
        }
        let mut acc = tau * w.iter().sum::<f64>();
        for p in &self.pairs {
            let slack = 1.0 - self.term(p, w);
            if !(slack > 0.0) {
                return None;
            }
            acc -= slack.ln();
        }
        Some(acc)
    }

    /// Minimises `F` over the simplex by solving the equivalent homogeneous
    /// program `min Σw s.t. term_p(w) ≤ 1` with a log-barrier Newton method.
    fn minimize(&self, start: &[f64]) -> MinimaxOutcome {
        const GROWTH: f64 = 16.0;
        const TARGET_GAP: f64 = 1e-10;
        const MAX_NEWTON: usize = 2000;
        const MAX_CENTERING: usize = 50;

        let k = self.counts.len();
        let np = self.pairs.len() as f64;
        // scale the start so every term is at most 1/2
        let f0 = self.objective(start);
        let mut w: Vec<f64> = start.iter().map(|x| x * 2.0 * f0).collect();
        let mut tau = np / w.iter().sum::<f64>();

        let mut best_w = w.clone();
        let mut best_value = self.objective(&normalize(&w));
        let mut best_lower = f64::NEG_INFINITY;
        let mut iterations = 0;

        let mut grad = vec![0.0; k];
        let mut hess = vec![0.0; k * k];
        let mut slack = vec![0.0; self.pairs.len()];

        'outer: loop {
            // centering
            for _ in 0..MAX_CENTERING {
                if iterations >= MAX_NEWTON {
                    break 'outer;
                }
                grad.iter_mut().for_each(|g| *g = tau);
                hess.iter_mut().for_each(|h| *h = 0.0);
                for (p, s) in self.pairs.iter().zip(slack.iter_mut()) {
                    *s = 1.0 - self.term(p, &w);
                    let na = self.counts[p.a] as f64;
                    let ga = -na * p.coef / (w[p.a] * w[p.a]);
                    let gb = -p.coef / (w[p.b] * w[p.b]);
                    let inv = 1.0 / *s;
                    grad[p.a] += ga * inv;
                    grad[p.b] += gb * inv;
                    hess[p.a * k + p.a] +=
                        2.0 * na * p.coef / w[p.a].powi(3) * inv + ga * ga * inv * inv;
                    hess[p.b * k + p.b] +=
                        2.0 * p.coef / w[p.b].powi(3) * inv + gb * gb * inv * inv;
                    hess[p.a * k + p.b] += ga * gb * inv * inv;
                    hess[p.b * k + p.a] += ga * gb * inv * inv;
                }
                let Some(step) = cholesky_solve(&hess, k, &grad) else {
                    break;
                };
                // Newton direction is −H⁻¹g
                let decrement: f64 = step.iter().zip(&grad).map(|(s, g)| s * g).sum();
                if !(decrement > 1e-20) {
                    break;
                }
                iterations += 1;
                let current = self.barrier(&w, tau).unwrap_or(f64::INFINITY);
                let mut alpha = 1.0;
                let mut moved = false;
                for _ in 0..60 {
                    let trial: Vec<f64> = w.iter().zip(&step).map(|(x, s)| x - alpha * s).collect();
                    if let Some(v) = self.barrier(&trial, tau) {
                        if v <= current - 0.01 * alpha * decrement {
                            w = trial;
                            moved = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if !moved || decrement / 2.0 <= 1e-10 {
                    break;
                }
            }

            let normalized = normalize(&w);
            let value = self.objective(&normalized);
            if value < best_value {
                best_value = value;
                best_w = normalized;
            }
            let u: Vec<f64> = self
                .pairs
                .iter()
                .map(|p| 1.0 / (tau * (1.0 - self.term(p, &w))))
                .collect();
            let lower = self.dual_bound(&u);
            if lower.is_finite() {
                best_lower = best_lower.max(lower);
            }
            if (best_value - best_lower) <= TARGET_GAP * best_value {
                break;
            }
            if np / tau < 1e-14 * best_value {
                break;
            }
            tau *= GROWTH;
        }

        let gap = ((best_value - best_lower) / best_value).max(0.0);
        MinimaxOutcome {
            w: normalize(&best_w),
            value: best_value,
            gap,
            iterations,
        }
    }
}

fn normalize(w: &[f64]) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

// Solves H x = g for a symmetric positive definite H stored row-major.
fn cholesky_solve(h: &[f64], n: usize, g: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = h[i * n + j];
            for r in 0..j {
                s -= l[i * n + r] * l[j * n + r];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|r| l[i * n + r] * y[r]).sum();
        y[i] = (g[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|r| l[r * n + i] * x[r]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}

fn check_centers(partition: &Partition, centers: &[Vec<f64>]) -> Result<()> {
    if centers.len() != partition.num_clusters() {
        return Err(Error::ClusterCountMismatch {
            left: partition.num_clusters(),
            right: centers.len(),
        });
    }
    let d = centers.first().map_or(0, Vec::len);
    if let Some(c) = centers.iter().find(|c| c.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: c.len(),
        });
    }
    Ok(())
}

fn check_nonnegative(weights: &[f64]) -> Result<()> {
    match weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
        Some(index) => Err(Error::InvalidWeight {
            index,
            value: weights[index],
            requirement: "weights must be finite and nonnegative",
        }),
        None => Ok(()),
    }
}

fn check_positive(weights: &[f64]) -> Result<()> {
    match weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
        Some(index) => Err(Error::InvalidWeight {
            index,
            value: weights[index],
            requirement: "weights must be strictly positive",
        }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{rescale_to_hardness, synthetic_instance, SyntheticKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(labels: &[usize], k: usize) -> Partition {
        Partition::from_one_based(labels, k).unwrap()
    }

    fn two_cluster() -> Instance {
        Instance::from_one_based(&[1, 1, 2], vec![vec![0.0], vec![1.0]]).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn aggregates() {
        let third = 1.0 / 3.0;
        let agg = cluster_aggregates(&p(&[1, 1, 2], 2), &[third; 3]).unwrap();
        assert_eq!(agg.counts, vec![2, 1]);
        assert_eq!(agg.sums, vec![2.0 * third, third]);
        assert_eq!(agg.minima, vec![third, third]);

        let agg = cluster_aggregates(&p(&[1, 2], 2), &[1.0, 0.0]).unwrap();
        assert_eq!(agg.minima[1], 0.0);

        let agg = cluster_aggregates(&p(&[1, 1, 2, 2], 2), &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(agg.sums, vec![3.0, 7.0]);
        assert_eq!(agg.minima, vec![1.0, 3.0]);

        assert!(cluster_aggregates(&p(&[1, 1, 2], 2), &[1.0]).is_err());
    }

    #[test]
    fn closed_form_single_pair() {
        let inst = two_cluster();
        let v = alt_inf_closed_form(inst.partition(), inst.centers(), &[1.0 / 3.0; 3]).unwrap();
        assert!((v - 1.0 / 6.0).abs() < 1e-15);
        let (bf, witness) =
            brute_force_alt_inf(inst.partition(), inst.centers(), &[1.0 / 3.0; 3]).unwrap();
        assert!((bf - 1.0 / 6.0).abs() < 1e-15);
        // arms 1 and 2 tie; the lexicographically smaller relabeling wins
        assert_eq!(witness.partition().to_one_based(), vec![1, 2, 2]);
        assert_eq!(hamming_distance_to(&witness, &inst), 1);
    }

    fn hamming_distance_to(a: &Instance, b: &Instance) -> usize {
        crate::model::hamming_distance(a.partition(), b.partition()).unwrap()
    }

    #[test]
    fn closed_form_zero_weight_and_homogeneity() {
        let inst = synthetic_instance(SyntheticKind::Moderate);
        let mut w = vec![0.1; 11];
        let v = alt_inf_closed_form(inst.partition(), inst.centers(), &w).unwrap();
        let doubled: Vec<f64> = w.iter().map(|x| 2.0 * x).collect();
        let v2 = alt_inf_closed_form(inst.partition(), inst.centers(), &doubled).unwrap();
        assert!(rel(v2, 2.0 * v) < 1e-14);
        w[0] = 0.0;
        assert_eq!(
            alt_inf_closed_form(inst.partition(), inst.centers(), &w).unwrap(),
            0.0
        );
        assert!(alt_inf_closed_form(inst.partition(), inst.centers(), &[-1.0; 11]).is_err());
    }

    #[test]
    fn dist_objective_cases() {
        let base = Instance::from_one_based(&[1, 2], vec![vec![0.0], vec![1.0]]).unwrap();
        let alt = Instance::from_one_based(&[1, 2], vec![vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(dist_objective(&base, &base, &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(dist_objective(&base, &alt, &[0.5, 0.5]).unwrap(), 0.5);
        let swapped = Instance::from_one_based(&[2, 1], vec![vec![1.0], vec![0.0]]).unwrap();
        assert_eq!(dist_objective(&base, &swapped, &[0.5, 0.5]).unwrap(), 0.0);
        assert!(dist_objective(&base, &two_cluster(), &[0.5, 0.5]).is_err());
    }

    #[test]
    fn brute_force_only_moves_arms_from_large_clusters() {
        // M = K + 1: the single size-2 cluster is the only source of moves
        let inst =
            Instance::from_one_based(&[1, 2, 2, 3], vec![vec![0.0], vec![1.0], vec![5.0]]).unwrap();
        let (v, witness) =
            brute_force_alt_inf(inst.partition(), inst.centers(), &[0.25; 4]).unwrap();
        let moved: Vec<usize> = (0..4)
            .filter(|&m| witness.partition().label(m) != inst.partition().label(m))
            .collect();
        assert_eq!(moved.len(), 1);
        assert_eq!(inst.partition().label(moved[0]), 1);
        let closed = alt_inf_closed_form(inst.partition(), inst.centers(), &[0.25; 4]).unwrap();
        assert!(rel(v, closed) < 1e-12);
        assert!(
            brute_force_alt_inf(inst.partition(), inst.centers(), &[0.0, 0.5, 0.25, 0.25]).is_err()
        );
    }

    #[test]
    fn all_partitions_matches_hamming_one_on_true_means() {
        let inst = two_cluster();
        let w = [1.0 / 3.0; 3];
        let best = brute_force_all_partitions(&inst.arm_means(), &w, inst.partition(), 2).unwrap();
        assert!((best.value - 1.0 / 6.0).abs() < 1e-15);
        assert!(!crate::model::partitions_equivalent(&best.partition, inst.partition()).unwrap());
    }

    #[test]
    fn glr_counterexample_needs_two_moves() {
        let reference = vec![
            vec![0.0, 0.0],
            vec![0.8, 0.0],
            vec![0.0, 1.0],
            vec![0.8, 1.0],
        ];
        let excluded = p(&[1, 1, 2, 2], 2);
        let best = brute_force_all_partitions(&reference, &[1.0; 4], &excluded, 2).unwrap();
        assert!((best.value - 1.0).abs() < 1e-12);
        assert_eq!(best.partition.to_one_based(), vec![1, 2, 1, 2]);
        assert_eq!(
            crate::model::hamming_distance(&best.partition, &excluded).unwrap(),
            2
        );
        // every Hamming-1 alternative costs more
        for m in 0..4 {
            let mut labels = excluded.labels().to_vec();
            labels[m] = 1 - labels[m];
            let centers = weighted_means(&reference, &[1.0; 4], &labels, 2);
            let cost: f64 = (0..4)
                .map(|i| sq_dist(&reference[i], &centers[labels[i]]))
                .sum();
            assert!((cost - 1.0933333333333333).abs() < 1e-12, "{cost}");
        }
    }

    #[test]
    fn all_partitions_guards() {
        let reference = vec![vec![0.0]; 13];
        let excluded = Partition::new((0..13).map(|m| m % 2).collect(), 2).unwrap();
        assert!(matches!(
            brute_force_all_partitions(&reference, &[1.0; 13], &excluded, 2),
            Err(Error::TooManyArms { .. })
        ));
        let inst = two_cluster();
        assert!(brute_force_all_partitions(
            &inst.arm_means(),
            &[1.0, 0.0, 1.0],
            inst.partition(),
            2
        )
        .is_err());
    }

    #[test]
    fn restricted_growth_counts_match_stirling_numbers() {
        let stirling = |m: usize, k: usize| {
            let mut count = 0;
            restricted_growth(&mut vec![0; m], 1, 1, k, &mut |_| count += 1);
            count
        };
        assert_eq!(stirling(3, 2), 3);
        assert_eq!(stirling(4, 2), 7);
        assert_eq!(stirling(5, 3), 25);
        assert_eq!(stirling(8, 3), 966);
        assert_eq!(stirling(12, 3), 86526);
    }

    #[test]
    fn analytic_dstar() {
        let sol = solve_dstar(&two_cluster()).unwrap();
        let sqrt2 = 2f64.sqrt();
        assert!(
            (sol.d_star - 2.0 * (3.0 + 2.0 * sqrt2)).abs() < 1e-9,
            "{}",
            sol.d_star
        );
        let w1 = sqrt2 / (1.0 + sqrt2);
        assert!((sol.w_star.values()[0] - w1).abs() < 1e-9);
        let lam = sol.lambda_star.values();
        assert!((lam[0] - w1 / 2.0).abs() < 1e-9);
        assert!((lam[1] - w1 / 2.0).abs() < 1e-9);
        assert!((lam[2] - (1.0 - w1)).abs() < 1e-9);
        assert!(sol.gap <= 1e-9);
    }

    #[test]
    fn analytic_dstar_agrees_with_one_dimensional_grid() {
        // F(w) = 2/w + 1/(1−w) on (0, 1)
        let best = (1..1_000_000)
            .map(|i| i as f64 * 1e-6)
            .map(|w| 2.0 / w + 1.0 / (1.0 - w))
            .fold(f64::INFINITY, f64::min);
        let sol = solve_dstar(&two_cluster()).unwrap();
        assert!(rel(sol.d_star, 2.0 * best) < 1e-9);
    }

    #[test]
    fn objective_at_optimum_is_half_dstar() {
        for kind in [
            SyntheticKind::Easy,
            SyntheticKind::Moderate,
            SyntheticKind::Challenging,
        ] {
            let inst = synthetic_instance(kind);
            let sol = solve_dstar(&inst).unwrap();
            let f =
                minimax_objective(inst.partition(), inst.centers(), sol.w_star.values()).unwrap();
            assert!(
                rel(f, sol.d_star / 2.0) <= sol.gap.max(1e-14),
                "{f} {} {}",
                sol.d_star,
                sol.gap
            );
            assert!(sol.gap <= 1e-10);
        }
    }

    #[test]
    fn lambda_star_structure() {
        let inst = synthetic_instance(SyntheticKind::Easy);
        let sol = solve_dstar(&inst).unwrap();
        let lam = sol.lambda_star.values();
        assert!((lam.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(sol.lambda_star.is_interior() && sol.w_star.is_interior());
        for m in 0..inst.num_arms() {
            for j in 0..inst.num_arms() {
                if inst.partition().label(m) == inst.partition().label(j) {
                    assert_eq!(lam[m], lam[j]);
                }
            }
            let l = inst.partition().label(m);
            let n = inst.partition().cluster_sizes()[l] as f64;
            assert!((lam[m] - sol.w_star.values()[l] / n).abs() < 1e-14);
        }
    }

    #[test]
    fn optimal_weights_achieve_the_closed_form_maximum() {
        // D*/2 is the reciprocal of the best closed-form value over the simplex
        let inst = synthetic_instance(SyntheticKind::Challenging);
        let sol = solve_dstar(&inst).unwrap();
        let at_star =
            alt_inf_closed_form(inst.partition(), inst.centers(), sol.lambda_star.values())
                .unwrap();
        assert!(rel(at_star, 2.0 / sol.d_star) < 1e-9);
        let uniform =
            alt_inf_closed_form(inst.partition(), inst.centers(), &[1.0 / 11.0; 11]).unwrap();
        assert!(uniform <= at_star);
    }

    #[test]
    fn warm_start_reaches_same_solution() {
        let inst = synthetic_instance(SyntheticKind::Moderate);
        let cold = solve_dstar(&inst).unwrap();
        let warm = solve_dstar_from(&inst, Some(cold.w_star.values())).unwrap();
        assert!(rel(warm.d_star, cold.d_star) < 1e-10);
        let odd = solve_dstar_from(&inst, Some(&[0.7, 0.1, 0.1, 0.1])).unwrap();
        assert!(rel(odd.d_star, cold.d_star) < 1e-10);
        assert!(solve_dstar_from(&inst, Some(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn solver_refuses_degenerate_and_invalid_instances() {
        let dup = Instance::from_one_based(&[1, 1, 2], vec![vec![1.0], vec![1.0]]).unwrap();
        assert!(matches!(solve_dstar(&dup), Err(Error::InvalidInstance(_))));
        let close =
            Instance::from_one_based(&[1, 1, 2], vec![vec![1.0], vec![1.0 + 1e-14]]).unwrap();
        assert!(matches!(
            solve_dstar(&close),
            Err(Error::DegenerateCenters(_))
        ));
        let empty = Instance::from_one_based(&[1, 1, 1], vec![vec![0.0], vec![1.0]]).unwrap();
        assert!(solve_dstar(&empty).is_err());
    }

    #[test]
    fn scale_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let inst = random_instance(&mut rng);
            let s: f64 = rng.random_range(0.2..5.0);
            let scaled = inst.scaled(s);
            let a = solve_dstar(&inst).unwrap();
            let b = solve_dstar(&scaled).unwrap();
            assert!(rel(b.d_star, a.d_star / (s * s)) < 1e-9);
            for (x, y) in a.lambda_star.values().iter().zip(b.lambda_star.values()) {
                assert!((x - y).abs() < 1e-6);
            }
            let w: Vec<f64> = (0..inst.num_arms())
                .map(|_| rng.random_range(0.1..1.0))
                .collect();
            let v = alt_inf_closed_form(inst.partition(), inst.centers(), &w).unwrap();
            let vs = alt_inf_closed_form(scaled.partition(), scaled.centers(), &w).unwrap();
            assert!(rel(vs, v * s * s) < 1e-12);
        }
    }

    #[test]
    fn minimax_objective_is_convex_along_segments() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inst = synthetic_instance(SyntheticKind::Moderate);
        let draw = |rng: &mut ChaCha8Rng| {
            let raw: Vec<f64> = (0..4).map(|_| rng.random_range(0.01..1.0)).collect();
            normalize(&raw)
        };
        for _ in 0..100 {
            let (x, y) = (draw(&mut rng), draw(&mut rng));
            let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
            let f = |w: &[f64]| minimax_objective(inst.partition(), inst.centers(), w).unwrap();
            assert!(f(&mid) <= 0.5 * (f(&x) + f(&y)) + 1e-12);
        }
    }

    #[test]
    fn rescaling_hits_the_target() {
        let half = (1.0 + 2f64.sqrt()) / 2.0;
        let inst = Instance::from_one_based(&[1, 1, 2], vec![vec![0.0], vec![half]]).unwrap();
        assert!(rel(solve_dstar(&inst).unwrap().d_star, 8.0) < 1e-10);
        let (out, s) = rescale_to_hardness(&inst, 2.0).unwrap();
        assert!((s - 2.0).abs() < 1e-9);
        assert!(rel(solve_dstar(&out).unwrap().d_star, 2.0) < 1e-9);

        let (again, s1) = rescale_to_hardness(&out, 2.0).unwrap();
        assert!((s1 - 1.0).abs() < 1e-9);
        assert!(crate::model::instances_equivalent(&again, &out, 1e-9).unwrap());

        assert!(rescale_to_hardness(&inst, 0.0).is_err());
        let dup = Instance::from_one_based(&[1, 1, 2], vec![vec![1.0], vec![1.0]]).unwrap();
        assert!(rescale_to_hardness(&dup, 2.0).is_err());
    }

    #[test]
    fn lower_bound_cases() {
        assert_eq!(lower_bound(0.5, 10.0).unwrap(), 0.0);
        let lb = lower_bound(1e-10, 2.0).unwrap();
        assert!((lb - 46.05170185047057).abs() < 1e-9, "{lb}");
        let mut prev = f64::INFINITY;
        for i in 1..50 {
            let delta = i as f64 / 100.0;
            let v = lower_bound(delta, 3.0).unwrap();
            assert!(v < prev);
            prev = v;
        }
        for delta in [1e-3, 0.05, 0.3] {
            let kl = crate::thresholds::binary_kl(delta, 1.0 - delta).unwrap();
            assert!((lower_bound(delta, 1.0).unwrap() - kl).abs() < 1e-12);
        }
        assert!(lower_bound(0.0, 1.0).is_err());
        assert!(lower_bound(1.0, 1.0).is_err());
    }

    fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
        let k = rng.random_range(2..=4);
        let m = rng.random_range(k + 1..=9);
        let d = rng.random_range(1..=3);
        let mut labels: Vec<usize> = (0..m)
            .map(|i| if i < k { i } else { rng.random_range(0..k) })
            .collect();
        for i in (1..m).rev() {
            let j = rng.random_range(0..=i);
            labels.swap(i, j);
        }
        let centers = (0..k)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        Instance::new(Partition::new(labels, k).unwrap(), centers).unwrap()
    }
}
