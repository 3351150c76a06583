//! Gibbs sampling over task classes and worker accuracies.
//!
//! Both conditionals are Beta-Bernoulli conjugate updates of the one-coin
//! model:
//!
//! ```text
//! p_j | y, X ~ Beta(α + k_j, β + |M_j| − k_j),   k_j = #{i ∈ M_j : x_ij = y_i}
//! logit P(y_i = +1 | p, X) = logit(q) + Σ_{j ∈ N_i} x_ij · logit(p_j)
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::model::{expit, logit, prior_log_odds, resolve_signs, Label, LabelMatrix, Prediction, Prior};

pub const DEFAULT_STEPS: usize = 500;

// Keeps logit(p) finite when a Beta draw lands on 0 or 1.
const P_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct GibbsChain {
    y: Vec<Label>,
    p: Vec<f64>,
    tally: Vec<u64>,
    steps: u64,
    rng: ChaCha8Rng,
}

impl GibbsChain {
    /// Draws the initial state from the prior.
    pub fn new(matrix: &LabelMatrix, prior: &Prior, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let beta =
            Beta::new(prior.alpha, prior.beta).map_err(|e| Error::InvalidConfig(format!("worker prior: {e}")))?;
        let y = (0..matrix.num_tasks())
            .map(|_| if rng.random::<f64>() < prior.q { Label::Pos } else { Label::Neg })
            .collect();
        let p = (0..matrix.num_workers()).map(|_| clamp(beta.sample(&mut rng))).collect();
        Ok(Self { y, p, tally: vec![0; matrix.num_tasks()], steps: 0, rng })
    }

    /// One sweep: all worker accuracies, then all task classes.
    pub fn step(&mut self, matrix: &LabelMatrix, prior: &Prior) -> Result<()> {
        for (j, p) in self.p.iter_mut().enumerate() {
            let labels = matrix.worker_labels(j);
            let agree = labels.iter().filter(|&&(i, x)| x == self.y[i]).count() as f64;
            let posterior = Beta::new(prior.alpha + agree, prior.beta + labels.len() as f64 - agree)
                .map_err(|e| Error::InvalidConfig(format!("worker posterior: {e}")))?;
            *p = clamp(posterior.sample(&mut self.rng));
        }
        let z0 = prior_log_odds(prior);
        for (i, y) in self.y.iter_mut().enumerate() {
            let z = matrix.task_labels(i).iter().fold(z0, |acc, &(j, x)| acc + x.sign() * logit(self.p[j]));
            *y = if self.rng.random::<f64>() < expit(z) { Label::Pos } else { Label::Neg };
        }
        for (t, y) in self.tally.iter_mut().zip(&self.y) {
            if *y == Label::Pos {
                *t += 1;
            }
        }
        self.steps += 1;
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn tally(&self) -> &[u64] {
        &self.tally
    }

    /// Fraction of samples with `y_i = +1`, over every step taken.
    pub fn marginals(&self) -> Vec<f64> {
        let n = self.steps.max(1) as f64;
        self.tally.iter().map(|&t| t as f64 / n).collect()
    }
}

fn clamp(p: f64) -> f64 {
    p.clamp(P_FLOOR, 1.0 - P_FLOOR)
}

/// Posterior marginals `P(y_i = +1 | X)` averaged over `steps` samples.
pub fn gibbs_marginals(matrix: &LabelMatrix, prior: &Prior, steps: usize, seed: u64) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::InvalidConfig("Gibbs sampling needs at least one step".into()));
    }
    let mut chain = GibbsChain::new(matrix, prior, seed)?;
    for _ in 0..steps {
        chain.step(matrix, prior)?;
    }
    Ok(chain.marginals())
}

/// `+1` where more than half of the samples were `+1`; exact halves go to a
/// coin seeded from `seed`.
pub fn gibbs_run(matrix: &LabelMatrix, prior: &Prior, steps: usize, seed: u64) -> Result<Prediction> {
    let marginals = gibbs_marginals(matrix, prior, steps, seed)?;
    Ok(prediction_from_marginals(&marginals, seed))
}

pub(crate) fn prediction_from_marginals(marginals: &[f64], tie_seed: u64) -> Prediction {
    let centred: Vec<f64> = marginals.iter().map(|m| m - 0.5).collect();
    Prediction { classes: resolve_signs(&centred, tie_seed), log_odds: None }
}

#[cfg(test)]
pub(crate) mod oracle {
    use crate::model::{Label, LabelMatrix, Prior};
    use statrs::function::beta::ln_beta;

    /// Exact `P(y_i = +1 | X)` by enumerating every class vector, with the
    /// worker accuracies integrated out.
    pub fn exact_marginals(matrix: &LabelMatrix, prior: &Prior) -> Vec<f64> {
        let n = matrix.num_tasks();
        assert!(n <= 16);
        let mut weights = Vec::with_capacity(1 << n);
        for mask in 0u32..(1 << n) {
            let y = |i: usize| if mask >> i & 1 == 1 { Label::Pos } else { Label::Neg };
            let mut lw = 0.0;
            for i in 0..n {
                lw += if y(i) == Label::Pos { prior.q.ln() } else { (1.0 - prior.q).ln() };
            }
            for j in 0..matrix.num_workers() {
                let labels = matrix.worker_labels(j);
                let k = labels.iter().filter(|&&(i, x)| x == y(i)).count() as f64;
                let m = labels.len() as f64;
                lw += ln_beta(prior.alpha + k, prior.beta + m - k) - ln_beta(prior.alpha, prior.beta);
            }
            weights.push(lw);
        }
        let max = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = weights.iter().map(|w| (w - max).exp()).sum();
        (0..n)
            .map(|i| {
                weights
                    .iter()
                    .enumerate()
                    .filter(|(mask, _)| mask >> i & 1 == 1)
                    .map(|(_, w)| (w - max).exp())
                    .sum::<f64>()
                    / total
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LabelRecord;
    use rand::seq::SliceRandom;

    fn prior() -> Prior {
        Prior::new(4.0, 3.0, 0.5).unwrap()
    }

    #[test]
    fn single_label_posterior() {
        let m = LabelMatrix::from_records([LabelRecord::new(0, 0, Label::Pos, 1)]).unwrap();
        assert!((oracle::exact_marginals(&m, &prior())[0] - 4.0 / 7.0).abs() < 1e-12);
        let marg = gibbs_marginals(&m, &prior(), 20_000, 1).unwrap();
        assert!((marg[0] - 4.0 / 7.0).abs() < 0.02, "{marg:?}");
    }

    #[test]
    fn empty_matrix_samples_prior() {
        let m = LabelMatrix::with_dims(4, 0);
        let steps = 4000;
        let marg = gibbs_marginals(&m, &prior(), steps, 3).unwrap();
        let sigma = (0.25 / steps as f64).sqrt();
        for v in marg {
            assert!((v - 0.5).abs() < 3.0 * sigma, "{v}");
        }
    }

    #[test]
    fn dense_three_by_three_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut recs = Vec::new();
        let mut pairs: Vec<(usize, usize)> = (0..3).flat_map(|t| (0..3).map(move |w| (t, w))).collect();
        pairs.shuffle(&mut rng);
        for (k, (t, w)) in pairs.into_iter().enumerate() {
            let label = if rng.random_bool(0.7) { Label::Pos } else { Label::Neg };
            recs.push(LabelRecord::new(t, w, label, k as u64 + 1));
        }
        let m = LabelMatrix::from_records(recs).unwrap();
        let exact = oracle::exact_marginals(&m, &prior());
        let marg = gibbs_marginals(&m, &prior(), 20_000, 9).unwrap();
        for (a, b) in exact.iter().zip(&marg) {
            assert!((a - b).abs() < 0.05, "{exact:?} vs {marg:?}");
        }
    }

    #[test]
    fn deterministic_and_bounded() {
        let m =
            LabelMatrix::from_records([LabelRecord::new(0, 0, Label::Pos, 1), LabelRecord::new(1, 0, Label::Neg, 2)])
                .unwrap();
        let a = gibbs_run(&m, &prior(), 50, 5).unwrap();
        let b = gibbs_run(&m, &prior(), 50, 5).unwrap();
        assert_eq!(a, b);
        let mut chain = GibbsChain::new(&m, &prior(), 0).unwrap();
        for _ in 0..30 {
            chain.step(&m, &prior()).unwrap();
        }
        assert!(chain.tally().iter().all(|&t| t <= chain.steps()));
        assert!(gibbs_run(&m, &prior(), 0, 0).is_err());
    }
}
