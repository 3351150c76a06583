//! Particle filter over task classes with worker accuracies marginalised.
//!
//! Each particle is a full class assignment. A new label multiplies a
//! particle's weight by the Beta-Bernoulli predictive of that label given the
//! worker's earlier answers scored against the particle:
//!
//! ```text
//! P(agree)    = (k_j + α) / (n_j + α + β)
//! P(disagree) = (n_j − k_j + β) / (n_j + α + β)
//! ```
//!
//! Every `move_every` labels the particles are resampled by weight, each one
//! takes a collapsed Gibbs sweep over the observed tasks, and the weights
//! are reset to 1.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::gibbs::prediction_from_marginals;
use crate::error::{Error, Result};
use crate::model::{expit, prior_log_odds, Label, LabelMatrix, LabelRecord, Prediction, Prior};

pub const DEFAULT_PARTICLES: usize = 50;
pub const DEFAULT_MOVE_EVERY: usize = 10;

#[derive(Debug, Clone)]
struct Particle {
    y: Vec<Label>,
    /// Agreements of each worker's answers with `y`.
    agree: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct ParticleFilter {
    prior: Prior,
    particles: Vec<Particle>,
    weights: Vec<f64>,
    matrix: LabelMatrix,
    move_every: usize,
    rng: ChaCha8Rng,
    degeneracy_resets: usize,
}

impl ParticleFilter {
    pub fn new(prior: Prior, num_tasks: usize, seed: u64) -> Result<Self> {
        Self::with_particles(prior, num_tasks, DEFAULT_PARTICLES, DEFAULT_MOVE_EVERY, seed)
    }

    pub fn with_particles(
        prior: Prior,
        num_tasks: usize,
        num_particles: usize,
        move_every: usize,
        seed: u64,
    ) -> Result<Self> {
        if num_particles == 0 {
            return Err(Error::InvalidConfig("particle filter needs at least one particle".into()));
        }
        if move_every == 0 {
            return Err(Error::InvalidConfig("move interval must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let particles = (0..num_particles)
            .map(|_| Particle {
                y: (0..num_tasks)
                    .map(|_| if rng.random::<f64>() < prior.q { Label::Pos } else { Label::Neg })
                    .collect(),
                agree: Vec::new(),
            })
            .collect();
        Ok(Self {
            prior,
            particles,
            weights: vec![1.0; num_particles],
            matrix: LabelMatrix::with_dims(num_tasks, 0),
            move_every,
            rng,
            degeneracy_resets: 0,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn matrix(&self) -> &LabelMatrix {
        &self.matrix
    }

    /// Times the weights collapsed to zero and were reset.
    pub fn degeneracy_resets(&self) -> usize {
        self.degeneracy_resets
    }

    pub fn observe(&mut self, record: &LabelRecord) -> Result<()> {
        let (i, j) = (record.task, record.worker);
        if i >= self.matrix.num_tasks() {
            return Err(Error::Contract(format!("task {i} out of range for {} tasks", self.matrix.num_tasks())));
        }
        let n = self.matrix.worker_labels(j).len() as f64;
        self.matrix.insert(*record)?;
        let (a, b) = (self.prior.alpha, self.prior.beta);
        for (particle, w) in self.particles.iter_mut().zip(self.weights.iter_mut()) {
            if particle.agree.len() <= j {
                particle.agree.resize(j + 1, 0);
            }
            let k = particle.agree[j] as f64;
            if particle.y[i] == record.label {
                *w *= (k + a) / (n + a + b);
                particle.agree[j] += 1;
            } else {
                *w *= (n - k + b) / (n + a + b);
            }
        }
        self.guard_weights();
        if self.matrix.len().is_multiple_of(self.move_every) {
            self.resample_move();
        }
        Ok(())
    }

    fn guard_weights(&mut self) {
        let max = self.weights.iter().cloned().fold(0.0, f64::max);
        if !(max.is_finite() && max > 0.0) {
            self.weights.iter_mut().for_each(|w| *w = 1.0);
            self.degeneracy_resets += 1;
        } else if max < 1e-200 {
            self.weights.iter_mut().for_each(|w| *w /= max);
        }
    }

    fn resample_move(&mut self) {
        let total: f64 = self.weights.iter().sum();
        let count = self.particles.len();
        // systematic resampling
        let step = total / count as f64;
        let mut u = self.rng.random::<f64>() * step;
        let mut cumulative = self.weights[0];
        let mut source = 0;
        let mut next = Vec::with_capacity(count);
        for _ in 0..count {
            while u > cumulative && source + 1 < count {
                source += 1;
                cumulative += self.weights[source];
            }
            next.push(self.particles[source].clone());
            u += step;
        }
        self.particles = next;
        for p in 0..count {
            self.gibbs_sweep(p);
        }
        self.weights.iter_mut().for_each(|w| *w = 1.0);
    }

    fn gibbs_sweep(&mut self, index: usize) {
        let (a, b) = (self.prior.alpha, self.prior.beta);
        let z0 = prior_log_odds(&self.prior);
        let particle = &mut self.particles[index];
        for i in 0..self.matrix.num_tasks() {
            let labels = self.matrix.task_labels(i);
            if labels.is_empty() {
                continue;
            }
            let mut z = z0;
            for &(j, x) in labels {
                let n = self.matrix.worker_labels(j).len() as f64 - 1.0;
                let k = particle.agree[j] as f64 - (particle.y[i] == x) as u8 as f64;
                z += x.sign() * ((k + a) / (n - k + b)).ln();
            }
            let draw = if self.rng.random::<f64>() < expit(z) { Label::Pos } else { Label::Neg };
            if draw != particle.y[i] {
                for &(j, x) in labels {
                    if x == draw {
                        particle.agree[j] += 1;
                    } else {
                        particle.agree[j] -= 1;
                    }
                }
                particle.y[i] = draw;
            }
        }
    }

    /// Weighted fraction of particles with `y_i = +1`.
    pub fn marginals(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        let mut out = vec![0.0; self.matrix.num_tasks()];
        for (particle, &w) in self.particles.iter().zip(&self.weights) {
            for (o, y) in out.iter_mut().zip(&particle.y) {
                if *y == Label::Pos {
                    *o += w;
                }
            }
        }
        out.iter_mut().for_each(|o| *o /= total);
        out
    }

    pub fn predict(&self, tie_seed: u64) -> Prediction {
        prediction_from_marginals(&self.marginals(), tie_seed)
    }
}

/// Streams the matrix through a fresh filter and returns its predictions.
pub fn particle_filter_run(matrix: &LabelMatrix, prior: Prior, seed: u64) -> Result<Prediction> {
    let mut pf = ParticleFilter::new(prior, matrix.num_tasks(), seed)?;
    for r in matrix.records() {
        pf.observe(r)?;
    }
    Ok(pf.predict(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::gibbs::oracle::exact_marginals;
    use crate::baselines::gibbs_marginals;
    use approx::assert_abs_diff_eq;

    fn prior() -> Prior {
        Prior::new(4.0, 3.0, 0.5).unwrap()
    }

    #[test]
    fn first_label_weights() {
        let mut pf = ParticleFilter::new(prior(), 2, 17).unwrap();
        let before: Vec<Label> = pf.particles.iter().map(|p| p.y[0]).collect();
        pf.observe(&LabelRecord::new(0, 0, Label::Pos, 1)).unwrap();
        for (y, &w) in before.iter().zip(pf.weights()) {
            let expected = if *y == Label::Pos { 4.0 / 7.0 } else { 3.0 / 7.0 };
            assert_abs_diff_eq!(w, expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn weights_reset_after_move() {
        let mut pf = ParticleFilter::new(prior(), 5, 3).unwrap();
        for k in 0..10 {
            pf.observe(&LabelRecord::new(k % 5, k / 5, Label::Pos, k as u64 + 1)).unwrap();
        }
        assert!(pf.weights().iter().all(|&w| w == 1.0));
        pf.observe(&LabelRecord::new(0, 7, Label::Neg, 11)).unwrap();
        assert!(pf.weights().iter().any(|&w| w != 1.0));
    }

    #[test]
    fn agreement_counts_stay_consistent() {
        let mut pf = ParticleFilter::with_particles(prior(), 4, 8, 3, 5).unwrap();
        let mut seq = 0;
        for t in 0..4 {
            for w in 0..3 {
                seq += 1;
                let label = if (t + w) % 3 == 0 { Label::Neg } else { Label::Pos };
                pf.observe(&LabelRecord::new(t, w, label, seq)).unwrap();
            }
        }
        for p in &pf.particles {
            for j in 0..3 {
                let k = pf.matrix.worker_labels(j).iter().filter(|&&(i, x)| p.y[i] == x).count();
                assert_eq!(p.agree[j] as usize, k);
            }
        }
    }

    #[test]
    fn close_to_gibbs_on_dense_instance() {
        let labels = [1, 1, -1, 1, -1, 1, 1, 1, -1];
        let recs: Vec<_> = (0..9)
            .map(|k| LabelRecord::new(k % 3, k / 3, Label::from_sign(labels[k]).unwrap(), k as u64 + 1))
            .collect();
        let m = LabelMatrix::from_records(recs).unwrap();
        let gibbs = gibbs_marginals(&m, &prior(), 20_000, 1).unwrap();
        let exact = exact_marginals(&m, &prior());
        for (g, e) in gibbs.iter().zip(&exact) {
            assert!((g - e).abs() < 0.05);
        }
        let mut pf = ParticleFilter::new(prior(), 3, 2).unwrap();
        for r in m.records() {
            pf.observe(r).unwrap();
        }
        let marg = pf.marginals();
        for (a, b) in marg.iter().zip(&gibbs) {
            assert!((a - b).abs() < 0.1, "{marg:?} vs {gibbs:?}");
        }
    }
}
