//! Task-assignment policies: round-robin uniform sampling (UNI) and
//! uncertainty sampling (US). Both skip tasks the arriving worker has already
//! labelled and break ties uniformly at random.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Uni,
    Us,
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uni" => Ok(Policy::Uni),
            "us" => Ok(Policy::Us),
            other => Err(Error::InvalidConfig(format!("unknown policy `{other}` (expected uni or us)"))),
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Policy::Uni => "uni",
            Policy::Us => "us",
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AssignmentContext<'a> {
    pub worker: usize,
    /// Tasks already labelled by `worker`.
    pub labeled_by_worker: &'a [usize],
    pub label_counts: &'a [usize],
    /// Max-posterior confidence per task; lower means less certain.
    pub uncertainty: Option<&'a [f64]>,
}

impl AssignmentContext<'_> {
    fn eligible(&self, task: usize) -> bool {
        !self.labeled_by_worker.contains(&task)
    }
}

/// Eligible task with the fewest labels.
pub fn uni_next<R: Rng + ?Sized>(ctx: &AssignmentContext<'_>, rng: &mut R) -> Result<usize> {
    argmin_eligible(ctx, |i| ctx.label_counts[i] as f64, rng)
}

/// Eligible task with the lowest confidence score.
pub fn us_next<R: Rng + ?Sized>(ctx: &AssignmentContext<'_>, rng: &mut R) -> Result<usize> {
    let scores = ctx.uncertainty.ok_or_else(|| Error::Contract("uncertainty sampling needs per-task scores".into()))?;
    if scores.len() != ctx.label_counts.len() {
        return Err(Error::Contract(format!("{} scores for {} tasks", scores.len(), ctx.label_counts.len())));
    }
    argmin_eligible(ctx, |i| scores[i], rng)
}

pub fn next_task<R: Rng + ?Sized>(policy: Policy, ctx: &AssignmentContext<'_>, rng: &mut R) -> Result<usize> {
    match policy {
        Policy::Uni => uni_next(ctx, rng),
        Policy::Us => us_next(ctx, rng),
    }
}

// Reservoir pick among the tied minima, one draw per extra tie.
fn argmin_eligible<R: Rng + ?Sized>(
    ctx: &AssignmentContext<'_>,
    score: impl Fn(usize) -> f64,
    rng: &mut R,
) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    let mut ties = 0u32;
    for i in 0..ctx.label_counts.len() {
        let s = score(i);
        match best {
            Some((_, b)) if s > b => continue,
            Some((_, b)) if s == b => {
                if !ctx.eligible(i) {
                    continue;
                }
                ties += 1;
                if rng.random_range(0..ties) == 0 {
                    best = Some((i, s));
                }
            }
            _ => {
                if !ctx.eligible(i) {
                    continue;
                }
                best = Some((i, s));
                ties = 1;
            }
        }
    }
    best.map(|(i, _)| i).ok_or(Error::ExhaustedWorker { worker: ctx.worker })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx<'a>(history: &'a [usize], counts: &'a [usize], scores: Option<&'a [f64]>) -> AssignmentContext<'a> {
        AssignmentContext { worker: 0, labeled_by_worker: history, label_counts: counts, uncertainty: scores }
    }

    #[test]
    fn uni_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(uni_next(&ctx(&[], &[2, 0, 1], None), &mut rng).unwrap(), 1);
        assert_eq!(uni_next(&ctx(&[0], &[0, 5], None), &mut rng).unwrap(), 1);
        let picks: Vec<usize> = (0..200).map(|_| uni_next(&ctx(&[], &[0, 0], None), &mut rng).unwrap()).collect();
        let ones = picks.iter().filter(|&&p| p == 1).count();
        assert!((70..130).contains(&ones), "{ones}");
        let again: Vec<usize> = {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            uni_next(&ctx(&[], &[2, 0, 1], None), &mut rng).unwrap();
            uni_next(&ctx(&[0], &[0, 5], None), &mut rng).unwrap();
            (0..200).map(|_| uni_next(&ctx(&[], &[0, 0], None), &mut rng).unwrap()).collect()
        };
        assert_eq!(picks, again);
    }

    #[test]
    fn us_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let counts = [0, 0, 0];
        assert_eq!(us_next(&ctx(&[], &counts, Some(&[0.99, 0.5, 0.7])), &mut rng).unwrap(), 1);
        assert_eq!(us_next(&ctx(&[0], &counts[..2], Some(&[0.5, 0.9])), &mut rng).unwrap(), 1);
        let mut seen = [0usize; 3];
        for _ in 0..300 {
            seen[us_next(&ctx(&[], &counts, Some(&[0.5; 3])), &mut rng).unwrap()] += 1;
        }
        assert!(seen.iter().all(|&c| c > 60), "{seen:?}");
    }

    #[test]
    fn errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(uni_next(&ctx(&[0, 1], &[3, 3], None), &mut rng), Err(Error::ExhaustedWorker { worker: 0 })));
        assert!(matches!(us_next(&ctx(&[], &[0], None), &mut rng), Err(Error::Contract(_))));
    }

    #[test]
    fn ineligible_minimum_is_skipped_in_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let t = uni_next(&ctx(&[0, 2], &[0, 0, 0, 1], None), &mut rng).unwrap();
            assert_eq!(t, 1);
        }
    }
}
