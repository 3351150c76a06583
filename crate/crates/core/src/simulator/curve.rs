//! Error-rate estimation over a grid of labels-per-task values.

use std::io::Write;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{derive_seed, run_once, Stopwatch, SyntheticConfig};
use crate::error::{Error, Result};

/// When to stop repeating runs at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    /// Stop once this many runs produced at least one error.
    pub target_error_runs: usize,
    /// Give up after this many runs; the point is flagged.
    pub max_runs: usize,
    /// Give up once this much wall time was spent on the point; flagged.
    pub time_budget: Option<Duration>,
    pub confidence: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { target_error_runs: 200, max_runs: 100_000, time_budget: None, confidence: 0.99 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub r: usize,
    /// Errors over task predictions, pooled over every run.
    pub error_mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub runs: usize,
    pub error_runs: usize,
    /// Standard deviation of the per-run error fraction.
    pub run_error_std: f64,
    /// A guard stopped the point before the error-run target was reached.
    pub flagged: bool,
}

/// Agresti-Coull interval for `k` successes in `n` trials, clamped to [0, 1].
pub fn agresti_coull(k: u64, n: u64, confidence: f64) -> Result<(f64, f64)> {
    if n == 0 || k > n {
        return Err(Error::Contract(format!("need 0 ≤ k ≤ n and n ≥ 1, got k = {k}, n = {n}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Contract(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let z = Normal::standard().inverse_cdf((1.0 + confidence) / 2.0);
    let n_tilde = n as f64 + z * z;
    let p_tilde = (k as f64 + z * z / 2.0) / n_tilde;
    let half = z * (p_tilde * (1.0 - p_tilde) / n_tilde).sqrt();
    Ok(((p_tilde - half).clamp(0.0, 1.0), (p_tilde + half).clamp(0.0, 1.0)))
}

/// Repeats `cfg` with derived seeds until the stop rule fires.
pub fn estimate_error_point(cfg: &SyntheticConfig, stop: &StopRule) -> Result<CurvePoint> {
    if stop.target_error_runs == 0 {
        return Err(Error::InvalidConfig("error-run target must be at least 1".into()));
    }
    if stop.max_runs == 0 {
        return Err(Error::InvalidConfig("max runs must be at least 1".into()));
    }
    cfg.validate()?;
    let base = derive_seed(cfg.seed, cfg.labels_per_task as u64);
    let clock = Stopwatch::start();
    let (mut errors, mut tasks, mut runs, mut error_runs) = (0u64, 0u64, 0usize, 0usize);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let mut flagged = false;
    while error_runs < stop.target_error_runs {
        if runs == stop.max_runs || stop.time_budget.is_some_and(|b| clock.elapsed() >= b) {
            flagged = true;
            break;
        }
        let result = run_once(&cfg.with_seed(derive_seed(base, runs as u64)))?;
        runs += 1;
        errors += result.errors as u64;
        tasks += result.total as u64;
        error_runs += (result.errors > 0) as usize;
        let frac = result.errors as f64 / result.total as f64;
        sum += frac;
        sum_sq += frac * frac;
    }
    if runs == 0 {
        return Err(Error::InvalidConfig("time budget expired before the first run".into()));
    }
    let error_mean = errors as f64 / tasks as f64;
    let (low, high) = agresti_coull(errors, tasks, stop.confidence)?;
    let mean_frac = sum / runs as f64;
    Ok(CurvePoint {
        r: cfg.labels_per_task,
        error_mean,
        ci_low: low.min(error_mean),
        ci_high: high.max(error_mean),
        runs,
        error_runs,
        run_error_std: (sum_sq / runs as f64 - mean_frac * mean_frac).max(0.0).sqrt(),
        flagged,
    })
}

/// One point per entry of `r_grid`; `base.labels_per_task` is overridden.
pub fn estimate_error_curve(base: &SyntheticConfig, r_grid: &[usize], stop: &StopRule) -> Result<Vec<CurvePoint>> {
    r_grid.iter().map(|&r| estimate_error_point(&SyntheticConfig { labels_per_task: r, ..*base }, stop)).collect()
}

/// `R,error_mean,ci_low,ci_high,runs`.
pub fn write_curve_csv<W: Write>(out: W, points: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["R", "error_mean", "ci_low", "ci_high", "runs"])?;
    for p in points {
        w.write_record([
            p.r.to_string(),
            p.error_mean.to_string(),
            p.ci_low.to_string(),
            p.ci_high.to_string(),
            p.runs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Prior;
    use crate::policies::Policy;
    use crate::simulator::Algorithm;
    use approx::assert_abs_diff_eq;
    use statrs::distribution::{Binomial, Discrete};

    #[test]
    fn agresti_coull_reference_values() {
        let (lo, hi) = agresti_coull(50, 100, 0.99).unwrap();
        assert_abs_diff_eq!(lo, 0.3752796250448398, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 0.6247203749551602, epsilon = 1e-12);
        let (lo, hi) = agresti_coull(0, 1_000_000, 0.99).unwrap();
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 1e-5);
        let (lo, hi) = agresti_coull(7, 7, 0.99).unwrap();
        assert!(lo > 0.0 && hi == 1.0);
        let (lo, hi) = agresti_coull(30, 60, 0.9).unwrap();
        assert_abs_diff_eq!(0.5 - lo, hi - 0.5, epsilon = 1e-15);
        assert!(agresti_coull(3, 2, 0.99).is_err());
        assert!(agresti_coull(0, 0, 0.99).is_err());
        assert!(agresti_coull(1, 2, 1.0).is_err());
    }

    fn maj(m: usize, r: usize) -> SyntheticConfig {
        SyntheticConfig::new(m, r, 10.min(m), Prior::synthetic(), Policy::Uni, Algorithm::Maj, 3)
    }

    #[test]
    fn always_correct_hits_the_guard() {
        let cfg = SyntheticConfig { crowd: Prior::new(1e6, 1.0, 0.5).unwrap(), ..maj(20, 5) };
        let stop = StopRule { max_runs: 30, ..Default::default() };
        let p = estimate_error_point(&cfg, &stop).unwrap();
        assert!(p.flagged);
        assert_eq!((p.runs, p.error_runs, p.error_mean), (30, 0, 0.0));
        assert_eq!(p.ci_low, 0.0);
    }

    #[test]
    fn always_wrong_stops_after_one_run() {
        let cfg = SyntheticConfig { crowd: Prior::new(1.0, 1e6, 0.5).unwrap(), ..maj(20, 5) };
        let stop = StopRule { target_error_runs: 1, ..Default::default() };
        let p = estimate_error_point(&cfg, &stop).unwrap();
        assert_eq!((p.runs, p.flagged, p.error_mean), (1, false, 1.0));
    }

    #[test]
    fn single_label_majority_error_is_the_prior_error() {
        let stop = StopRule { target_error_runs: 400, ..Default::default() };
        let p = estimate_error_point(
            &SyntheticConfig::new(50, 1, 1, Prior::synthetic(), Policy::Uni, Algorithm::Maj, 9),
            &stop,
        )
        .unwrap();
        assert!(p.ci_low < 3.0 / 7.0 && 3.0 / 7.0 < p.ci_high, "{p:?}");
    }

    // Labels on one task come from distinct workers with independent Beta
    // accuracies, so each is correct with probability α/(α+β) independently.
    fn majority_oracle(r: u64, accuracy: f64) -> f64 {
        let b = Binomial::new(accuracy, r).unwrap();
        (0..=r)
            .map(|k| match (2 * k).cmp(&r) {
                std::cmp::Ordering::Less => b.pmf(k),
                std::cmp::Ordering::Equal => 0.5 * b.pmf(k),
                std::cmp::Ordering::Greater => 0.0,
            })
            .sum()
    }

    #[test]
    fn majority_error_matches_the_binomial_oracle() {
        let stop = StopRule { target_error_runs: 200, ..Default::default() };
        let points = estimate_error_curve(&maj(200, 1), &[4, 10], &stop).unwrap();
        for p in &points {
            let oracle = majority_oracle(p.r as u64, 4.0 / 7.0);
            assert!(p.ci_low <= oracle && oracle <= p.ci_high, "{p:?} vs {oracle}");
        }
    }

    #[test]
    fn curve_csv_layout() {
        let p = CurvePoint {
            r: 3,
            error_mean: 0.25,
            ci_low: 0.2,
            ci_high: 0.3,
            runs: 12,
            error_runs: 12,
            run_error_std: 0.0,
            flagged: false,
        };
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &[p]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "R,error_mean,ci_low,ci_high,runs\n3,0.25,0.2,0.3,12\n");
    }

    #[test]
    fn curves_are_reproducible() {
        let stop = StopRule { target_error_runs: 5, ..Default::default() };
        let cfg = SyntheticConfig { algorithm: Algorithm::FastSbic, ..maj(30, 1) };
        assert_eq!(
            estimate_error_curve(&cfg, &[2, 4], &stop).unwrap(),
            estimate_error_curve(&cfg, &[2, 4], &stop).unwrap()
        );
    }
}
