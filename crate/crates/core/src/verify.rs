//! Self-checks against independent reference computations: exhaustive
//! enumeration, simplex grid search, dense scalar grids.

use std::fmt;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::glr_gap;
use crate::clustering::{self, DEFAULT_MAX_ITERS};
use crate::hardness::{self, brute_force_all_partitions, brute_force_alt_inf};
use crate::model::{self, Instance, Partition};
use crate::thresholds;

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} ({:.2}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

fn timed(name: &'static str, body: impl FnOnce() -> (bool, String)) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = body();
    CheckOutcome {
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// A random admissible instance with `K ≤ max_k`, `K < M ≤ max_m`, `d ≤ max_d`,
/// centers uniform in `[-1, 1]^d` and pairwise at least `min_gap` apart.
pub fn random_instance(
    rng: &mut impl Rng,
    max_m: usize,
    max_k: usize,
    max_d: usize,
    min_gap: f64,
) -> Instance {
    let k = rng.random_range(2..=max_k);
    let m = rng.random_range(k + 1..=max_m);
    let d = rng.random_range(1..=max_d);
    let mut labels: Vec<usize> = (0..m)
        .map(|i| if i < k { i } else { rng.random_range(0..k) })
        .collect();
    for i in (1..m).rev() {
        labels.swap(i, rng.random_range(0..=i));
    }
    loop {
        let centers: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        if model::min_pairwise_distance(&centers) >= min_gap {
            return Instance::new(Partition::new(labels, k).expect("labels in range"), centers)
                .expect("random instance is well formed");
        }
    }
}

/// Closed form, Hamming-1 enumeration and full enumeration agree on the
/// inner infimum.
pub fn oracle_equivalence(instances: usize, seed: u64) -> CheckOutcome {
    timed("oracle equivalence", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..instances {
            let inst = random_instance(&mut rng, 8, 3, 3, 1e-3);
            let w: Vec<f64> = (0..inst.num_arms())
                .map(|_| rng.random_range(0.01..1.0))
                .collect();
            let closed = hardness::alt_inf_closed_form(inst.partition(), inst.centers(), &w);
            let hamming = brute_force_alt_inf(inst.partition(), inst.centers(), &w);
            let full = brute_force_all_partitions(
                &inst.arm_means(),
                &w,
                inst.partition(),
                inst.num_clusters(),
            );
            match (closed, hamming, full) {
                (Ok(c), Ok((h, _)), Ok(f)) => worst = worst.max(rel(c, h)).max(rel(c, f.value)),
                _ => return (false, "an oracle returned an error".into()),
            }
        }
        (
            worst <= 1e-9,
            format!("{instances} instances, worst relative gap {worst:.2e}"),
        )
    })
}

/// Minimum of `F` over the grid `{w ∈ step·ℕ³ : Σw = 1, w > 0}`.
pub fn grid_search_k3(instance: &Instance, step: f64) -> f64 {
    let n = (1.0 / step).round() as usize;
    let mut best = f64::INFINITY;
    for i in 1..n {
        for j in 1..n - i {
            let w = [i as f64 * step, j as f64 * step, (n - i - j) as f64 * step];
            if let Ok(v) = hardness::minimax_objective(instance.partition(), instance.centers(), &w)
            {
                best = best.min(v);
            }
        }
    }
    best
}

/// The analytic two-cluster instance and the K = 3 grid oracle.
pub fn analytic_dstar(grid_instances: usize, seed: u64) -> CheckOutcome {
    timed("analytic hardness", || {
        let inst = Instance::from_one_based(&[1, 1, 2], vec![vec![0.0], vec![1.0]]).expect("valid");
        let sol = match hardness::solve_dstar(&inst) {
            Ok(s) => s,
            Err(e) => return (false, e.to_string()),
        };
        let want = 2.0 * (3.0 + 2.0 * 2f64.sqrt());
        let lam = [0.292893218813452, 0.292893218813452, 0.414213562373095];
        let dstar_err = (sol.d_star - want).abs();
        let lam_err = sol
            .lambda_star
            .values()
            .iter()
            .zip(lam)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..grid_instances {
            let inst = loop {
                let candidate = random_instance(&mut rng, 8, 3, 3, 0.2);
                if candidate.num_clusters() == 3 {
                    break candidate;
                }
            };
            let grid = grid_search_k3(&inst, 1e-3);
            match hardness::solve_dstar(&inst) {
                Ok(s) => worst = worst.max(rel(s.d_star / 2.0, grid)),
                Err(e) => return (false, e.to_string()),
            }
        }
        let passed = dstar_err <= 1e-6 && lam_err <= 1e-6 && worst <= 1e-3;
        (
            passed,
            format!(
                "D* error {dstar_err:.1e}, lambda error {lam_err:.1e}, {grid_instances} grid instances worst relative gap {worst:.2e}"
            ),
        )
    })
}

/// The four-arm instance whose best alternative needs two relabelings.
pub fn two_move_example() -> CheckOutcome {
    timed("two-move alternative", || {
        let reference = vec![
            vec![0.0, 0.0],
            vec![0.8, 0.0],
            vec![0.0, 1.0],
            vec![0.8, 1.0],
        ];
        let excluded = Partition::from_one_based(&[1, 1, 2, 2], 2).expect("valid");
        let target = Partition::from_one_based(&[1, 2, 1, 2], 2).expect("valid");
        match brute_force_all_partitions(&reference, &[1.0; 4], &excluded, 2) {
            Ok(best) => {
                let equiv = model::partitions_equivalent(&best.partition, &target).unwrap_or(false);
                let hd = model::hamming_distance(&best.partition, &excluded).unwrap_or(0);
                let passed = equiv && (best.value - 1.0).abs() <= 1e-12 && hd == 2;
                (
                    passed,
                    format!(
                        "minimizer {}, value {:.15}, Hamming distance {hd}",
                        best.partition, best.value
                    ),
                )
            }
            Err(e) => (false, e.to_string()),
        }
    })
}

/// Weighted K-means recovers the partition from estimates within a quarter
/// of the minimum center gap.
pub fn kmeans_recovery(instances: usize, seed: u64) -> CheckOutcome {
    timed("k-means recovery", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut recovered = 0;
        let mut bound_ok = 0;
        for _ in 0..instances {
            let inst = random_instance(&mut rng, 12, 4, 3, 1e-2);
            let radius = inst.min_center_gap() / 4.0;
            let estimates: Vec<Vec<f64>> = (0..inst.num_arms())
                .map(|m| {
                    let dir: Vec<f64> = (0..inst.dim())
                        .map(|_| rng.random_range(-1.0..1.0))
                        .collect();
                    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
                    let r = radius * rng.random_range(0.0..0.999);
                    inst.arm_mean(m)
                        .iter()
                        .zip(&dir)
                        .map(|(a, v)| a + r * v / norm)
                        .collect()
                })
                .collect();
            let eps = (0..inst.num_arms())
                .map(|m| dist(&estimates[m], inst.arm_mean(m)))
                .fold(0.0, f64::max);
            let weights: Vec<f64> = (0..inst.num_arms())
                .map(|_| rng.random_range(1.0..100.0))
                .collect();
            let Ok(out) = clustering::weighted_kmeans(
                &estimates,
                &weights,
                inst.num_clusters(),
                None,
                DEFAULT_MAX_ITERS,
            ) else {
                continue;
            };
            if model::partitions_equivalent(&out.partition, inst.partition()).unwrap_or(false) {
                recovered += 1;
                let err = (0..inst.num_arms())
                    .map(|m| dist(&out.centers[out.partition.label(m)], inst.arm_mean(m)))
                    .fold(0.0, f64::max);
                if err <= eps + 1e-12 {
                    bound_ok += 1;
                }
            }
        }
        (
            recovered == instances && bound_ok == instances,
            format!("{recovered}/{instances} recovered, center bound held {bound_ok}/{instances}"),
        )
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// ζ(2), `Ψ(x) ≥ x` on a log grid, and `|Ψ(10⁴) − (10⁴ + log 10⁴)| ≤ 1`.
pub fn special_functions() -> CheckOutcome {
    timed("zeta and psi", || {
        let z2 = thresholds::riemann_zeta(2.0).unwrap_or(f64::NAN);
        let zeta_err = (z2 - std::f64::consts::PI.powi(2) / 6.0).abs();
        let grid: Vec<f64> = (0..=50)
            .map(|i| 10f64.powf(-1.0 + 5.0 * i as f64 / 50.0))
            .collect();
        let below = grid
            .iter()
            .filter(|&&x| thresholds::psi(x).map_or(true, |v| v < x))
            .count();
        let x = 1e4;
        let asym = thresholds::psi(x).unwrap_or(f64::NAN) - (x + x.ln());
        let passed = zeta_err <= 1e-10 && below == 0 && asym.abs() <= 1.0;
        (
            passed,
            format!(
                "zeta(2) error {zeta_err:.1e}, psi(x) < x at {below}/{} grid points, psi(1e4) - (1e4 + log 1e4) = {asym:.4}",
                grid.len()
            ),
        )
    })
}

/// Maximum of `½(−αx + α/(α+1)·y)` over `α ∈ {0} ∪ {10^(−3 + 6i/n)}`.
pub fn alpha_grid_max(z1: f64, z2: f64, points: usize) -> f64 {
    (0..=points)
        .map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / points as f64))
        .map(|a| 0.5 * (-a * z1 + a / (a + 1.0) * z2))
        .fold(0.0, f64::max)
}

/// Closed-form stopping statistic against its variational form.
pub fn variational_identity(pairs: usize, seed: u64) -> CheckOutcome {
    timed("variational identity", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let z1 = 10f64.powf(rng.random_range(-2.0..2.0));
            // optimal α = √(z2/z1) − 1; keep it inside the grid, or make z2 ≤ z1
            let z2 = if rng.random_bool(0.1) {
                z1 * rng.random_range(0.0..1.0)
            } else {
                let alpha = 10f64.powf(rng.random_range(-2.0..2.0));
                z1 * (1.0 + alpha).powi(2)
            };
            let closed = glr_gap(z1, z2);
            let grid = alpha_grid_max(z1, z2, 100_000);
            let err = if closed == 0.0 {
                grid
            } else {
                rel(closed, grid)
            };
            worst = worst.max(err);
        }
        (
            worst <= 1e-4,
            format!("{pairs} pairs, worst relative gap {worst:.2e}"),
        )
    })
}

/// All checks that need no dataset.
pub fn run_all() -> Vec<CheckOutcome> {
    vec![
        oracle_equivalence(100, 1),
        analytic_dstar(20, 2),
        two_move_example(),
        kmeans_recovery(200, 5),
        special_functions(),
        variational_identity(1000, 11),
    ]
}
