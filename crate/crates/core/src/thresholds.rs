//! Special functions and stopping thresholds.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZETA_TERMS: u32 = 20_000;
const PSI_LO: f64 = 0.5 + 1e-9;
const PSI_HI: f64 = 1.0 - 1e-9;

/// Default final bracket width of the golden-section search behind [`psi`].
pub const PSI_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdKind {
    Exact,
    #[default]
    Heuristic,
}

impl std::str::FromStr for ThresholdKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Self::Exact),
            "heuristic" => Ok(Self::Heuristic),
            other => Err(Error::Config(format!("unknown threshold kind {other:?}"))),
        }
    }
}

/// Riemann zeta for real `s > 1`: a 2·10⁴-term partial sum, added from the
/// smallest term up, and an Euler–Maclaurin tail.
pub fn riemann_zeta(s: f64) -> Result<f64> {
    if !(s > 1.0) || !s.is_finite() {
        return Err(Error::Domain(format!("zeta needs s > 1, got {s}")));
    }
    let n = ZETA_TERMS as f64;
    let head: f64 = (1..ZETA_TERMS).rev().map(|i| (i as f64).powf(-s)).sum();
    let fn_ = n.powf(-s);
    let tail = n * fn_ / (s - 1.0) + 0.5 * fn_ + s / 12.0 * fn_ / n
        - s * (s + 1.0) * (s + 2.0) / 720.0 * fn_ / (n * n * n);
    Ok(head + tail)
}

/// The function minimised in [`psi`]:
/// `2 − 2 log(4h) + log ζ(2h)/h − log(1−h)/(2h) + x/h`.
pub fn psi_objective(h: f64, x: f64) -> Result<f64> {
    if !(h > 0.5 && h < 1.0) {
        return Err(Error::Domain(format!(
            "psi objective needs h in (1/2, 1), got {h}"
        )));
    }
    let zeta = riemann_zeta(2.0 * h)?;
    Ok(2.0 - 2.0 * (4.0 * h).ln() + zeta.ln() / h - (1.0 - h).ln() / (2.0 * h) + x / h)
}

fn psi_cache() -> &'static RwLock<HashMap<u64, f64>> {
    static CACHE: OnceLock<RwLock<HashMap<u64, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// `Ψ(x)`, the minimum of [`psi_objective`] over `h ∈ (1/2, 1)`. Memoised.
pub fn psi(x: f64) -> Result<f64> {
    let key = x.to_bits();
    if let Some(&v) = psi_cache().read().expect("psi cache poisoned").get(&key) {
        return Ok(v);
    }
    let v = psi_with_tolerance(x, PSI_TOLERANCE)?.1;
    psi_cache()
        .write()
        .expect("psi cache poisoned")
        .insert(key, v);
    Ok(v)
}

/// Golden-section minimisation of [`psi_objective`] down to bracket width
/// `tol`. Returns the minimiser and the minimum. Not memoised.
pub fn psi_with_tolerance(x: f64, tol: f64) -> Result<(f64, f64)> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("psi needs x > 0, got {x}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let f = |h: f64| psi_objective(h, x);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (PSI_LO, PSI_HI);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d)?;
        }
    }
    let mid = 0.5 * (a + b);
    let fm = f(mid)?;
    let best = [(c, fc), (d, fd), (mid, fm)]
        .into_iter()
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .unwrap();
    Ok(best)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!(
            "delta must lie in (0,1), got {delta}"
        )));
    }
    Ok(())
}

/// `M·d·Ψ(log(1/δ)/(M·d))`, the part of [`beta`] that does not move with `t`.
pub fn beta_confidence_term(delta: f64, m: usize, d: usize) -> Result<f64> {
    check_delta(delta)?;
    let md = (m * d) as f64;
    Ok(md * psi((1.0 / delta).ln() / md)?)
}

/// Exact threshold `Σ_m 2d·log(4 + log N_m) + M·d·Ψ(log(1/δ)/(M·d))`.
pub fn beta(delta: f64, pull_counts: &[u64], d: usize) -> Result<f64> {
    let confidence = beta_confidence_term(delta, pull_counts.len(), d)?;
    Ok(count_term(pull_counts, d)? + confidence)
}

fn count_term(pull_counts: &[u64], d: usize) -> Result<f64> {
    if let Some(m) = pull_counts.iter().position(|&n| n == 0) {
        return Err(Error::Domain(format!(
            "arm {} has never been pulled",
            m + 1
        )));
    }
    Ok(pull_counts
        .iter()
        .map(|&n| 2.0 * d as f64 * (4.0 + (n as f64).ln()).ln())
        .sum())
}

/// Heuristic threshold `d·log(1 + log t) + log(1/δ)`.
pub fn beta_heuristic(delta: f64, t: f64, d: usize) -> Result<f64> {
    check_delta(delta)?;
    if !(t >= 1.0) {
        return Err(Error::Domain(format!("t must be at least 1, got {t}")));
    }
    Ok(d as f64 * (1.0 + t.ln()).ln() + (1.0 / delta).ln())
}

/// Binary relative entropy `a log(a/b) + (1−a) log((1−a)/(1−b))`.
pub fn binary_kl(a: f64, b: f64) -> Result<f64> {
    for v in [a, b] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Domain(format!(
                "binary KL needs arguments in (0,1), got {v}"
            )));
        }
    }
    let v = a * (a / b).ln() + (1.0 - a) * ((1.0 - a) / (1.0 - b)).ln();
    Ok(v.max(0.0))
}

/// A threshold with its `t`-independent part evaluated once.
#[derive(Clone, Debug)]
pub struct StoppingRule {
    kind: ThresholdKind,
    delta: f64,
    d: usize,
    confidence: f64,
}

impl StoppingRule {
    pub fn new(kind: ThresholdKind, delta: f64, m: usize, d: usize) -> Result<Self> {
        check_delta(delta)?;
        let confidence = match kind {
            ThresholdKind::Exact => beta_confidence_term(delta, m, d)?,
            ThresholdKind::Heuristic => (1.0 / delta).ln(),
        };
        Ok(Self {
            kind,
            delta,
            d,
            confidence,
        })
    }

    pub fn kind(&self) -> ThresholdKind {
        self.kind
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn threshold(&self, pull_counts: &[u64], t: u64) -> Result<f64> {
        match self.kind {
            ThresholdKind::Exact => Ok(count_term(pull_counts, self.d)? + self.confidence),
            ThresholdKind::Heuristic => {
                Ok(self.d as f64 * (1.0 + (t.max(1) as f64).ln()).ln() + self.confidence)
            }
        }
    }
}
