//! Wall-clock cost of complete runs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{derive_seed, run_once, SyntheticConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub mean_ms: f64,
    /// Population standard deviation over the timed runs.
    pub std_ms: f64,
    pub repeats: usize,
}

/// Times `repeats` runs of `cfg` (collection plus inference), each with its
/// own derived seed, after one untimed warm-up run.
pub fn timing_harness(cfg: &SyntheticConfig, repeats: usize) -> Result<TimingStats> {
    if repeats == 0 {
        return Err(Error::InvalidConfig("at least one timed repeat is required".into()));
    }
    run_once(&cfg.with_seed(derive_seed(cfg.seed, u64::MAX)))?;
    let times = (0..repeats)
        .map(|k| run_once(&cfg.with_seed(derive_seed(cfg.seed, k as u64))).map(|r| r.wall_time.as_secs_f64() * 1e3))
        .collect::<Result<Vec<f64>>>()?;
    let mean = times.iter().sum::<f64>() / repeats as f64;
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / repeats as f64;
    Ok(TimingStats { mean_ms: mean, std_ms: var.sqrt(), repeats })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub r: usize,
    pub algo: String,
    pub stats: TimingStats,
}

/// `R,algo,mean_ms,std_ms`.
pub fn write_timing_csv<W: Write>(out: W, rows: &[TimingRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["R", "algo", "mean_ms", "std_ms"])?;
    for row in rows {
        w.write_record([
            row.r.to_string(),
            row.algo.clone(),
            format!("{:.3}", row.stats.mean_ms),
            format!("{:.3}", row.stats.std_ms),
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

    #[test]
    fn single_repeat_has_no_spread() {
        let cfg = SyntheticConfig::new(20, 2, 5, Prior::synthetic(), Policy::Us, Algorithm::FastSbic, 0);
        let t = timing_harness(&cfg, 1).unwrap();
        assert_eq!(t.std_ms, 0.0);
        assert!(t.mean_ms >= 0.0);
        assert!(timing_harness(&cfg, 0).is_err());
    }

    #[test]
    fn timing_csv_layout() {
        let rows =
            [TimingRow { r: 5, algo: "maj".into(), stats: TimingStats { mean_ms: 1.5, std_ms: 0.25, repeats: 3 } }];
        let mut buf = Vec::new();
        write_timing_csv(&mut buf, &rows).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "R,algo,mean_ms,std_ms\n5,maj,1.500,0.250\n");
    }
}
