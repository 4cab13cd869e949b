//! Cluster-bandit instances and partitions.
//!
//! Labels are stored 0-based internally. Everything that crosses a file or
//! display boundary uses 1-based labels, so cluster `k` is printed as `k + 1`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardness;

/// Assignment of `M` arms to `K` clusters.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Builds a partition from 0-based labels. Only label ranges are checked
    /// here; emptiness and `K < M` are reported by [`validate_instance`].
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Domain(
                "number of clusters must be at least 1".into(),
            ));
        }
        if labels.is_empty() {
            return Err(Error::Domain("a partition needs at least one arm".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::LabelOutOfRange { label: bad + 1, k });
        }
        Ok(Self { labels, k })
    }

    pub fn from_one_based(labels: &[usize], k: usize) -> Result<Self> {
        let zero_based = labels
            .iter()
            .map(|&l| {
                if l == 0 || l > k {
                    Err(Error::LabelOutOfRange { label: l, k })
                } else {
                    Ok(l - 1)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(zero_based, k)
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|&l| l + 1).collect()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, arm: usize) -> usize {
        self.labels[arm]
    }

    pub fn num_arms(&self) -> usize {
        self.labels.len()
    }

    pub fn num_clusters(&self) -> usize {
        self.k
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Relabels clusters in order of first appearance. Two partitions are
    /// equivalent iff their canonical label vectors are equal.
    pub fn canonical_labels(&self) -> Vec<usize> {
        let mut map = vec![usize::MAX; self.k];
        let mut next = 0;
        self.labels
            .iter()
            .map(|&l| {
                if map[l] == usize::MAX {
                    map[l] = next;
                    next += 1;
                }
                map[l]
            })
            .collect()
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, l) in self.labels.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", l + 1)?;
        }
        write!(f, "]")
    }
}

/// Bijection on the cluster indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    /// `mapping[k]` is the image of cluster `k` (0-based).
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let k = mapping.len();
        let mut seen = vec![false; k];
        for &j in &mapping {
            if j >= k || seen[j] {
                return Err(Error::NotAPermutation(k));
            }
            seen[j] = true;
        }
        Ok(Self { mapping })
    }

    pub fn identity(k: usize) -> Self {
        Self {
            mapping: (0..k).collect(),
        }
    }

    pub fn from_one_based(mapping: &[usize]) -> Result<Self> {
        let k = mapping.len();
        let zero_based = mapping
            .iter()
            .map(|&j| j.checked_sub(1).ok_or(Error::NotAPermutation(k)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(zero_based)
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn apply(&self, k: usize) -> usize {
        self.mapping[k]
    }

    /// All `K!` permutations in lexicographic order of their mapping.
    pub fn all(k: usize) -> Vec<Permutation> {
        fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Permutation>) {
            if prefix.len() == used.len() {
                out.push(Permutation {
                    mapping: prefix.clone(),
                });
                return;
            }
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    prefix.push(j);
                    rec(prefix, used, out);
                    prefix.pop();
                    used[j] = false;
                }
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
        out
    }
}

/// A partition together with one center per cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    partition: Partition,
    centers: Vec<Vec<f64>>,
}

impl Instance {
    pub fn new(partition: Partition, centers: Vec<Vec<f64>>) -> Result<Self> {
        if centers.len() != partition.num_clusters() {
            return Err(Error::ClusterCountMismatch {
                left: partition.num_clusters(),
                right: centers.len(),
            });
        }
        let d = centers[0].len();
        if d == 0 {
            return Err(Error::Domain(
                "centers must have dimension at least 1".into(),
            ));
        }
        for c in &centers {
            if c.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: c.len(),
                });
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::Domain("center coordinates must be finite".into()));
            }
        }
        Ok(Self { partition, centers })
    }

    pub fn from_one_based(labels: &[usize], centers: Vec<Vec<f64>>) -> Result<Self> {
        let partition = Partition::from_one_based(labels, centers.len())?;
        Self::new(partition, centers)
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn center(&self, k: usize) -> &[f64] {
        &self.centers[k]
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    pub fn num_arms(&self) -> usize {
        self.partition.num_arms()
    }

    pub fn num_clusters(&self) -> usize {
        self.partition.num_clusters()
    }

    /// Mean vector of arm `m`, i.e. the center of its cluster.
    pub fn arm_mean(&self, m: usize) -> &[f64] {
        &self.centers[self.partition.label(m)]
    }

    pub fn arm_means(&self) -> Vec<Vec<f64>> {
        (0..self.num_arms())
            .map(|m| self.arm_mean(m).to_vec())
            .collect()
    }

    /// Smallest Euclidean distance between two distinct cluster centers
    /// (infinite when `K = 1`).
    pub fn min_center_gap(&self) -> f64 {
        min_pairwise_distance(&self.centers)
    }

    pub fn scaled(&self, s: f64) -> Instance {
        Instance {
            partition: self.partition.clone(),
            centers: self
                .centers
                .iter()
                .map(|c| c.iter().map(|x| x * s).collect())
                .collect(),
        }
    }

    pub fn is_admissible(&self) -> bool {
        validate_instance(self, true).is_empty()
    }

    pub fn to_file_format(&self) -> InstanceFile {
        InstanceFile {
            d: self.dim(),
            k: self.num_clusters(),
            labels: self.partition.to_one_based(),
            centers: self.centers.clone(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(s).map_err(|source| Error::Json {
            context: "instance".into(),
            source,
        })?;
        file.into_instance()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_file_format()).expect("instance serializes")
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: InstanceFile = serde_json::from_str(&text).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })?;
        file.into_instance()
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json_string();
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// On-disk instance document: `d`, `K`, 1-based `labels`, and `K` centers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub d: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<Instance> {
        if self.centers.len() != self.k {
            return Err(Error::ClusterCountMismatch {
                left: self.k,
                right: self.centers.len(),
            });
        }
        if let Some(c) = self.centers.iter().find(|c| c.len() != self.d) {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: c.len(),
            });
        }
        Instance::from_one_based(&self.labels, self.centers)
    }
}

/// A violated instance invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    TooFewArms {
        m: usize,
    },
    /// 1-based cluster index.
    EmptyCluster {
        cluster: usize,
    },
    TooManyClusters {
        k: usize,
        m: usize,
    },
    /// 1-based cluster indices of two coinciding centers.
    DuplicateCenters {
        first: usize,
        second: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewArms { m } => write!(f, "at least 2 arms required, got {m}"),
            Violation::EmptyCluster { cluster } => write!(f, "cluster {cluster} empty"),
            Violation::TooManyClusters { k, m } => write!(f, "K<M required (K={k}, M={m})"),
            Violation::DuplicateCenters { first, second } => {
                write!(f, "centers {first} and {second} coincide")
            }
        }
    }
}

/// Returns every violated invariant; an empty list means the instance is valid.
pub fn validate_instance(instance: &Instance, require_distinct_centers: bool) -> Vec<Violation> {
    let mut out = Vec::new();
    let m = instance.num_arms();
    let k = instance.num_clusters();
    if m < 2 {
        out.push(Violation::TooFewArms { m });
    }
    for (cluster, &n) in instance.partition.cluster_sizes().iter().enumerate() {
        if n == 0 {
            out.push(Violation::EmptyCluster {
                cluster: cluster + 1,
            });
        }
    }
    if k >= m {
        out.push(Violation::TooManyClusters { k, m });
    }
    if require_distinct_centers {
        for a in 0..k {
            for b in a + 1..k {
                if instance.centers[a] == instance.centers[b] {
                    out.push(Violation::DuplicateCenters {
                        first: a + 1,
                        second: b + 1,
                    });
                }
            }
        }
    }
    out
}

pub(crate) fn ensure_admissible(instance: &Instance) -> Result<()> {
    let violations = validate_instance(instance, true);
    if violations.is_empty() {
        Ok(())
    } else {
        let msg = violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::InvalidInstance(msg))
    }
}

fn check_same_shape(a: &Partition, b: &Partition) -> Result<()> {
    if a.num_arms() != b.num_arms() {
        return Err(Error::LengthMismatch {
            expected: a.num_arms(),
            got: b.num_arms(),
        });
    }
    Ok(())
}

pub fn partitions_equivalent(a: &Partition, b: &Partition) -> Result<bool> {
    check_same_shape(a, b)?;
    if a.num_clusters() != b.num_clusters() {
        return Err(Error::ClusterCountMismatch {
            left: a.num_clusters(),
            right: b.num_clusters(),
        });
    }
    Ok(a.canonical_labels() == b.canonical_labels())
}

/// True iff every arm has the same mean vector under both instances, up to
/// `tol` in Euclidean norm.
pub fn instances_equivalent(a: &Instance, b: &Instance, tol: f64) -> Result<bool> {
    check_same_shape(&a.partition, &b.partition)?;
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if !(tol >= 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be nonnegative, got {tol}"
        )));
    }
    Ok((0..a.num_arms()).all(|m| sq_dist(a.arm_mean(m), b.arm_mean(m)).sqrt() <= tol))
}

pub fn hamming_distance(a: &Partition, b: &Partition) -> Result<usize> {
    check_same_shape(a, b)?;
    Ok(a.labels
        .iter()
        .zip(&b.labels)
        .filter(|(x, y)| x != y)
        .count())
}

/// Relabels cluster `k` as `perm(k)` and moves its center accordingly.
pub fn apply_permutation(instance: &Instance, perm: &Permutation) -> Result<Instance> {
    let k = instance.num_clusters();
    if perm.len() != k {
        return Err(Error::NotAPermutation(k));
    }
    let labels = instance
        .partition
        .labels
        .iter()
        .map(|&l| perm.apply(l))
        .collect();
    let mut centers = vec![Vec::new(); k];
    for (old, c) in instance.centers.iter().enumerate() {
        centers[perm.apply(old)] = c.clone();
    }
    Instance::new(Partition::new(labels, k)?, centers)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticKind {
    Easy,
    Moderate,
    Challenging,
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "easy" => Ok(Self::Easy),
            "moderate" => Ok(Self::Moderate),
            "challenging" => Ok(Self::Challenging),
            other => Err(Error::Domain(format!(
                "unknown synthetic instance '{other}'"
            ))),
        }
    }
}

/// Four clusters of eleven arms in three dimensions; only the fourth center
/// differs between the difficulty levels.
pub fn synthetic_instance(kind: SyntheticKind) -> Instance {
    let fourth = match kind {
        SyntheticKind::Easy => 5.0,
        SyntheticKind::Moderate => 1.0,
        SyntheticKind::Challenging => 0.5,
    };
    Instance::from_one_based(
        &[1, 1, 2, 2, 2, 2, 3, 3, 3, 4, 4],
        vec![
            vec![0.0, 0.0, 0.0],
            vec![0.0, 10.0, 0.0],
            vec![0.0, 0.0, 10.0],
            vec![fourth, 0.0, 0.0],
        ],
    )
    .expect("synthetic instance is well formed")
}

/// Layout of a delimiter-separated dataset: one row per arm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetFormat {
    pub d: usize,
    /// 0-based column holding the class token; defaults to column `d`.
    pub label_column: Option<usize>,
    pub delimiter: u8,
    pub has_header: bool,
}

impl DatasetFormat {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            label_column: None,
            delimiter: b',',
            has_header: false,
        }
    }
}

/// Reads a labelled dataset and turns it into an instance: arms are rows,
/// classes become clusters (numbered by first occurrence), and each center is
/// the mean of its class's feature rows.
pub fn load_dataset(path: impl AsRef<Path>, format: &DatasetFormat) -> Result<Instance> {
    let path = path.as_ref();
    let dataset_err = |message: String| Error::Dataset {
        path: path.to_path_buf(),
        message,
    };
    if format.d == 0 {
        return Err(dataset_err("feature count must be at least 1".into()));
    }
    let label_col = format.label_column.unwrap_or(format.d);
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .has_headers(format.has_header)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| dataset_err(e.to_string()))?;

    let mut class_names: Vec<String> = Vec::new();
    let mut labels = Vec::new();
    let mut sums: Vec<Vec<f64>> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| dataset_err(format!("row {}: {e}", row + 1)))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let token = record
            .get(label_col)
            .ok_or_else(|| dataset_err(format!("row {}: missing label column", row + 1)))?;
        let features = record
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != label_col)
            .take(format.d)
            .map(|(_, f)| {
                f.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| {
                        dataset_err(format!("row {}: non-numeric feature '{f}'", row + 1))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        if features.len() != format.d {
            return Err(dataset_err(format!(
                "row {}: expected {} features, found {}",
                row + 1,
                format.d,
                features.len()
            )));
        }
        let cluster = match class_names.iter().position(|c| c == token) {
            Some(k) => k,
            None => {
                class_names.push(token.to_string());
                sums.push(vec![0.0; format.d]);
                counts.push(0);
                class_names.len() - 1
            }
        };
        for (s, x) in sums[cluster].iter_mut().zip(&features) {
            *s += x;
        }
        counts[cluster] += 1;
        labels.push(cluster);
    }
    let k = class_names.len();
    let m = labels.len();
    if k < 2 || k >= m {
        return Err(dataset_err(format!(
            "K ≥ M or single cluster (K={k}, M={m})"
        )));
    }
    let centers = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &n)| s.into_iter().map(|x| x / n as f64).collect())
        .collect();
    Instance::new(Partition::new(labels, k)?, centers)
}

/// Multiplies all centers by `s = sqrt(D*/target)` so the rescaled instance has
/// hardness `target`. Returns the rescaled instance and `s`.
pub fn rescale_to_hardness(instance: &Instance, target: f64) -> Result<(Instance, f64)> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::Domain(format!(
            "target hardness must be positive, got {target}"
        )));
    }
    let solution = hardness::solve_dstar(instance)?;
    let s = (solution.d_star / target).sqrt();
    Ok((instance.scaled(s), s))
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn min_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for a in 0..points.len() {
        for b in a + 1..points.len() {
            best = best.min(sq_dist(&points[a], &points[b]));
        }
    }
    best.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(labels: &[usize], k: usize) -> Partition {
        Partition::from_one_based(labels, k).unwrap()
    }

    fn example_one() -> (Instance, Instance, Instance) {
        let c = Instance::from_one_based(&[1, 1, 2], vec![vec![0.0], vec![1.0]]).unwrap();
        let c1 = Instance::from_one_based(&[2, 2, 1], vec![vec![1.0], vec![0.0]]).unwrap();
        let c2 = Instance::from_one_based(&[1, 2, 2], vec![vec![0.0], vec![0.0]]).unwrap();
        (c, c1, c2)
    }

    #[test]
    fn validate_accepts_well_formed_instance() {
        let inst = Instance::from_one_based(&[1, 1, 2], vec![vec![0.0], vec![1.0]]).unwrap();
        assert!(validate_instance(&inst, true).is_empty());
    }

    #[test]
    fn validate_reports_empty_cluster() {
        let inst = Instance::from_one_based(&[1, 1, 1], vec![vec![0.0], vec![1.0]]).unwrap();
        let v = validate_instance(&inst, false);
        assert_eq!(v, vec![Violation::EmptyCluster { cluster: 2 }]);
        assert_eq!(v[0].to_string(), "cluster 2 empty");
    }

    #[test]
    fn validate_reports_k_not_below_m() {
        let inst = Instance::from_one_based(&[1, 2], vec![vec![0.0], vec![1.0]]).unwrap();
        let v = validate_instance(&inst, true);
        assert_eq!(v, vec![Violation::TooManyClusters { k: 2, m: 2 }]);
        assert!(v[0].to_string().starts_with("K<M required"));
    }

    #[test]
    fn validate_reports_duplicate_centers_only_when_required() {
        let inst = Instance::from_one_based(&[1, 1, 2], vec![vec![0.5], vec![0.5]]).unwrap();
        assert!(validate_instance(&inst, false).is_empty());
        assert_eq!(
            validate_instance(&inst, true),
            vec![Violation::DuplicateCenters {
                first: 1,
                second: 2
            }]
        );
    }

    #[test]
    fn partition_equivalence_follows_example_one() {
        assert!(partitions_equivalent(&p(&[1, 1, 2], 2), &p(&[2, 2, 1], 2)).unwrap());
        assert!(!partitions_equivalent(&p(&[1, 1, 2], 2), &p(&[1, 2, 2], 2)).unwrap());
        assert!(partitions_equivalent(&p(&[3, 1, 2, 1], 3), &p(&[3, 1, 2, 1], 3)).unwrap());
    }

    #[test]
    fn partition_equivalence_rejects_shape_mismatch() {
        assert!(matches!(
            partitions_equivalent(&p(&[1, 1, 2], 2), &p(&[1, 2], 2)),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            partitions_equivalent(&p(&[1, 1, 2], 2), &p(&[1, 1, 2], 3)),
            Err(Error::ClusterCountMismatch { .. })
        ));
    }

    #[test]
    fn instance_equivalence_cases() {
        let (c, c1, c2) = example_one();
        let all_zero = |labels: &[usize]| {
            Instance::from_one_based(labels, vec![vec![0.0], vec![0.0]]).unwrap()
        };
        // with all centers equal, c, c' and c'' describe the same arm means
        assert!(instances_equivalent(&all_zero(&[1, 1, 2]), &c2, 0.0).unwrap());
        assert!(instances_equivalent(&all_zero(&[2, 2, 1]), &c2, 0.0).unwrap());
        assert!(instances_equivalent(&c, &c1, 0.0).unwrap());
        assert!(instances_equivalent(&c, &c, 0.0).unwrap());
        let other = Instance::from_one_based(&[1, 1, 2], vec![vec![0.0], vec![2.0]]).unwrap();
        assert!(!instances_equivalent(&c, &other, 0.0).unwrap());
        assert!(instances_equivalent(&c, &other, 1.0).unwrap());
    }

    #[test]
    fn hamming_distance_cases() {
        assert_eq!(
            hamming_distance(&p(&[1, 1, 2, 2], 2), &p(&[1, 2, 1, 2], 2)).unwrap(),
            2
        );
        assert_eq!(
            hamming_distance(&p(&[1, 1, 2], 2), &p(&[1, 1, 2], 2)).unwrap(),
            0
        );
        assert_eq!(
            hamming_distance(&p(&[1, 1, 2], 2), &p(&[1, 2, 2], 2)).unwrap(),
            1
        );
        assert!(hamming_distance(&p(&[1, 1, 2], 2), &p(&[1, 2], 2)).is_err());
    }

    #[test]
    fn swap_permutation_matches_example_one() {
        let (c, c1, _) = example_one();
        let swap = Permutation::from_one_based(&[2, 1]).unwrap();
        let out = apply_permutation(&c, &swap).unwrap();
        assert_eq!(out, c1);
        assert_eq!(apply_permutation(&out, &swap).unwrap(), c);
        assert_eq!(apply_permutation(&c, &Permutation::identity(2)).unwrap(), c);
    }

    #[test]
    fn non_bijective_mapping_is_rejected() {
        assert!(matches!(
            Permutation::from_one_based(&[1, 1]),
            Err(Error::NotAPermutation(2))
        ));
        assert!(Permutation::new(vec![0, 2]).is_err());
        let (c, _, _) = example_one();
        assert!(apply_permutation(&c, &Permutation::identity(3)).is_err());
    }

    #[test]
    fn synthetic_instances() {
        for (kind, x) in [
            (SyntheticKind::Easy, 5.0),
            (SyntheticKind::Moderate, 1.0),
            (SyntheticKind::Challenging, 0.5),
        ] {
            let inst = synthetic_instance(kind);
            assert_eq!(inst.num_arms(), 11);
            assert_eq!(inst.num_clusters(), 4);
            assert_eq!(inst.dim(), 3);
            assert_eq!(
                inst.partition().to_one_based(),
                vec![1, 1, 2, 2, 2, 2, 3, 3, 3, 4, 4]
            );
            assert_eq!(inst.center(0), &[0.0, 0.0, 0.0]);
            assert_eq!(inst.center(1), &[0.0, 10.0, 0.0]);
            assert_eq!(inst.center(2), &[0.0, 0.0, 10.0]);
            assert_eq!(inst.center(3), &[x, 0.0, 0.0]);
            assert!(inst.is_admissible());
        }
    }

    #[test]
    fn json_round_trip_uses_one_based_labels() {
        let inst = synthetic_instance(SyntheticKind::Moderate);
        let text = inst.to_json_string();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["K"], 4);
        assert_eq!(value["d"], 3);
        assert_eq!(value["labels"][0], 1);
        assert_eq!(value["labels"][10], 4);
        assert_eq!(Instance::from_json_str(&text).unwrap(), inst);
    }

    #[test]
    fn json_rejects_inconsistent_header() {
        let bad = r#"{"d": 2, "K": 2, "labels": [1,1,2], "centers": [[0.0],[1.0]]}"#;
        assert!(matches!(
            Instance::from_json_str(bad),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad_label = r#"{"d": 1, "K": 2, "labels": [1,0,2], "centers": [[0.0],[1.0]]}"#;
        assert!(Instance::from_json_str(bad_label).is_err());
    }

    #[test]
    fn dataset_loading_maps_labels_by_first_occurrence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.csv");
        std::fs::write(&path, "1.0,2.0,b\n3.0,4.0,a\n5.0,6.0,b\n").unwrap();
        let inst = load_dataset(&path, &DatasetFormat::new(2)).unwrap();
        assert_eq!(inst.partition().to_one_based(), vec![1, 2, 1]);
        assert_eq!(inst.center(0), &[3.0, 4.0]);
        assert_eq!(inst.center(1), &[3.0, 4.0]);
    }

    #[test]
    fn dataset_loading_honours_header_and_label_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.tsv");
        std::fs::write(&path, "cls\tx\ny\t0.0\nx\t1.0\ny\t2.0\n").unwrap();
        let format = DatasetFormat {
            d: 1,
            label_column: Some(0),
            delimiter: b'\t',
            has_header: true,
        };
        let inst = load_dataset(&path, &format).unwrap();
        assert_eq!(inst.partition().to_one_based(), vec![1, 2, 1]);
        assert_eq!(inst.center(0), &[1.0]);
        assert_eq!(inst.center(1), &[1.0]);
    }

    #[test]
    fn dataset_errors() {
        let dir = tempfile::tempdir().unwrap();
        let single = dir.path().join("single.csv");
        std::fs::write(&single, "1.0,a\n2.0,a\n").unwrap();
        let err = load_dataset(&single, &DatasetFormat::new(1)).unwrap_err();
        assert!(err.to_string().contains("K ≥ M or single cluster"), "{err}");

        let text = dir.path().join("text.csv");
        std::fs::write(&text, "1.0,a\nfoo,b\n2.0,a\n").unwrap();
        let err = load_dataset(&text, &DatasetFormat::new(1)).unwrap_err();
        assert!(err.to_string().contains("non-numeric"), "{err}");

        let short = dir.path().join("short.csv");
        std::fs::write(&short, "1.0,a\n2.0\n").unwrap();
        assert!(load_dataset(&short, &DatasetFormat::new(1)).is_err());

        assert!(matches!(
            load_dataset(dir.path().join("missing.csv"), &DatasetFormat::new(1)),
            Err(Error::Dataset { .. })
        ));
    }

    fn arb_partition() -> impl Strategy<Value = Partition> {
        (2usize..5).prop_flat_map(|k| {
            prop::collection::vec(0..k, (k + 1)..10).prop_filter_map(
                "surjective",
                move |mut labels| {
                    // make every cluster nonempty
                    for j in 0..k {
                        labels[j] = j;
                    }
                    Partition::new(labels, k).ok()
                },
            )
        })
    }

    proptest! {
        #[test]
        fn equivalence_is_reflexive_symmetric_transitive(
            a in arb_partition(),
            perm_seed in 0usize..24,
            perm_seed2 in 0usize..24,
        ) {
            let k = a.num_clusters();
            let perms = Permutation::all(k);
            let s1 = &perms[perm_seed % perms.len()];
            let s2 = &perms[perm_seed2 % perms.len()];
            let relabel = |p: &Partition, s: &Permutation| {
                Partition::new(p.labels().iter().map(|&l| s.apply(l)).collect(), k).unwrap()
            };
            let b = relabel(&a, s1);
            let c = relabel(&b, s2);
            prop_assert!(partitions_equivalent(&a, &a).unwrap());
            prop_assert!(partitions_equivalent(&a, &b).unwrap());
            prop_assert!(partitions_equivalent(&b, &a).unwrap());
            prop_assert!(partitions_equivalent(&b, &c).unwrap());
            prop_assert!(partitions_equivalent(&a, &c).unwrap());
        }

        #[test]
        fn zero_hamming_implies_equivalence(a in arb_partition(), b in arb_partition()) {
            if a.num_arms() == b.num_arms() && a.num_clusters() == b.num_clusters() {
                let same = hamming_distance(&a, &b).unwrap() == 0;
                let eq = partitions_equivalent(&a, &b).unwrap();
                prop_assert!(!same || eq);
                // symmetric by construction
                prop_assert_eq!(eq, partitions_equivalent(&b, &a).unwrap());
            }
        }
    }

    #[test]
    fn equivalence_does_not_imply_zero_hamming() {
        let a = p(&[1, 1, 2], 2);
        let b = p(&[2, 2, 1], 2);
        assert!(partitions_equivalent(&a, &b).unwrap());
        assert_eq!(hamming_distance(&a, &b).unwrap(), 3);
    }

    #[test]
    fn every_permutation_preserves_instance_equivalence() {
        for k in 1..=4 {
            let labels: Vec<usize> = (0..k + 3).map(|m| m % k).collect();
            let centers = (0..k)
                .map(|j| vec![j as f64, (j * j) as f64 * 0.5])
                .collect();
            let inst = Instance::new(Partition::new(labels, k).unwrap(), centers).unwrap();
            let perms = Permutation::all(k);
            assert_eq!(perms.len(), (1..=k).product::<usize>());
            for perm in &perms {
                let out = apply_permutation(&inst, perm).unwrap();
                assert!(instances_equivalent(&inst, &out, 0.0).unwrap());
                assert!(partitions_equivalent(inst.partition(), out.partition()).unwrap());
            }
        }
    }
}
