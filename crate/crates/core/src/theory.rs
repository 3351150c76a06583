//! Asymptotic error exponents for SBIC and the bound curves built from them.
//!
//! A worker contributes `L̄` other answers to its own accuracy estimate, so
//! the number `k` of correct ones is beta-binomial. Under uniform sampling
//! the per-label factor is `F = E_k[2√(p̄(1 − p̄))]` and the error decays like
//! `F^R`; under uncertainty sampling the exponent is
//! `G = E_k[log((k+α)/(L̄−k+β)) · ((k+α) − (L̄−k+β)) / (L̄+α+β)]`.
//! Fast SBIC sees every history length `0..L` equally often, so its
//! constants are averages over `h = 1..=L`.

use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::policies::Policy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Fast,
    Sorted,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fast" | "fast-sbic" => Ok(Variant::Fast),
            "sorted" | "sorted-sbic" => Ok(Variant::Sorted),
            other => Err(Error::InvalidConfig(format!("unknown variant `{other}` (expected fast or sorted)"))),
        }
    }
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `P(k | L̄, α, β) = C(L̄, k) · B(k + α, L̄ − k + β) / B(α, β)`.
pub fn beta_binomial_pmf(k: u64, l_bar: u64, alpha: f64, beta: f64) -> Result<f64> {
    if k > l_bar {
        return Err(Error::Contract(format!("k = {k} exceeds L̄ = {l_bar}")));
    }
    Ok(beta_binomial_pmf_unchecked(k, l_bar, alpha, beta))
}

fn beta_binomial_pmf_unchecked(k: u64, l_bar: u64, alpha: f64, beta: f64) -> f64 {
    (ln_choose(l_bar, k) + ln_beta(k as f64 + alpha, (l_bar - k) as f64 + beta) - ln_beta(alpha, beta)).exp()
}

fn check(l: u64, alpha: f64, beta: f64) -> Result<()> {
    if l == 0 {
        return Err(Error::InvalidConfig("labels per worker must be at least 1".into()));
    }
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::InvalidConfig(format!("alpha and beta must be positive, got {alpha}, {beta}")));
    }
    Ok(())
}

fn expect_over_k(l: u64, alpha: f64, beta: f64, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
    let l_bar = l - 1;
    let n = l_bar as f64 + alpha + beta;
    (0..=l_bar)
        .map(|k| {
            let good = k as f64 + alpha;
            let bad = (l_bar - k) as f64 + beta;
            beta_binomial_pmf_unchecked(k, l_bar, alpha, beta) * f(good, bad, n)
        })
        .sum()
}

pub fn f_sorted(l: u64, alpha: f64, beta: f64) -> Result<f64> {
    check(l, alpha, beta)?;
    Ok(expect_over_k(l, alpha, beta, |good, bad, n| 2.0 * ((good / n) * (bad / n)).sqrt()))
}

pub fn f_fast(l: u64, alpha: f64, beta: f64) -> Result<f64> {
    check(l, alpha, beta)?;
    let total: f64 = (1..=l).map(|h| f_sorted(h, alpha, beta)).sum::<Result<f64>>()?;
    Ok(total / l as f64)
}

pub fn g_sorted(l: u64, alpha: f64, beta: f64) -> Result<f64> {
    check(l, alpha, beta)?;
    Ok(expect_over_k(l, alpha, beta, |good, bad, n| (good / bad).ln() * (good - bad) / n))
}

pub fn g_fast(l: u64, alpha: f64, beta: f64) -> Result<f64> {
    check(l, alpha, beta)?;
    let total: f64 = (1..=l).map(|h| g_sorted(h, alpha, beta)).sum::<Result<f64>>()?;
    Ok(total / l as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub labels_per_worker: u64,
    pub alpha: f64,
    pub beta: f64,
    pub variant: Variant,
    pub policy: Policy,
    /// `(R₀, error₀)`: the curve is pinned to pass through this point.
    pub anchor: (f64, f64),
}

impl BoundSpec {
    /// Per-label decay rate `c` in `error ∝ exp(−c·R)`: `−log F` under UNI,
    /// `G` under US.
    pub fn decay_rate(&self) -> Result<f64> {
        let (l, a, b) = (self.labels_per_worker, self.alpha, self.beta);
        Ok(match (self.policy, self.variant) {
            (Policy::Uni, Variant::Sorted) => -f_sorted(l, a, b)?.ln(),
            (Policy::Uni, Variant::Fast) => -f_fast(l, a, b)?.ln(),
            (Policy::Us, Variant::Sorted) => g_sorted(l, a, b)?,
            (Policy::Us, Variant::Fast) => g_fast(l, a, b)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub points: Vec<(f64, f64)>,
    pub decay_rate: f64,
    /// The exponent vanished (symmetric prior); the curve is constant.
    pub flat: bool,
}

/// `error(R) = error₀ · exp(−c · (R − R₀))`.
///
/// The constants `F ≤ 1` and `G ≥ 0` make `c` non-negative, so the curve
/// decays with `R` as the empirical error does.
pub fn bound_curve(spec: &BoundSpec, r_grid: &[f64]) -> Result<BoundCurve> {
    let (r0, e0) = spec.anchor;
    if !(e0 > 0.0 && e0 < 1.0) {
        return Err(Error::InvalidConfig(format!("anchor error must lie in (0, 1), got {e0}")));
    }
    let rate = spec.decay_rate()?;
    let flat = rate.abs() < 1e-15;
    let points = r_grid
        .iter()
        .map(|&r| {
            let e = if flat { e0 } else { (e0.ln() - rate * (r - r0)).exp() };
            (r, e)
        })
        .collect();
    Ok(BoundCurve { points, decay_rate: rate, flat })
}
