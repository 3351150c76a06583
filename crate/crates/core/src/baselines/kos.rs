//! Power iteration on the sparse ±1 label matrix.

use crate::baselines::vote_sums;
use crate::model::{LabelMatrix, Prediction};

pub const SYNTHETIC_ITERATIONS: usize = 5;
pub const REAL_DATA_ITERATIONS: usize = 100;

/// Task scores after `iterations` alternating steps `w = Xᵀz`, `z = Xw`,
/// starting from the vote sums and normalised to unit Euclidean norm after
/// each step. A zero vector is left as is.
pub fn kos_scores(matrix: &LabelMatrix, iterations: usize) -> Vec<f64> {
    let mut z = vote_sums(matrix);
    let mut w = vec![0.0; matrix.num_workers()];
    for _ in 0..iterations {
        for (j, wj) in w.iter_mut().enumerate() {
            *wj = matrix.worker_labels(j).iter().map(|&(i, x)| x.sign() * z[i]).sum();
        }
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = matrix.task_labels(i).iter().map(|&(j, x)| x.sign() * w[j]).sum();
        }
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            z.iter_mut().for_each(|v| *v /= norm);
        }
    }
    z
}

pub fn kos_run(matrix: &LabelMatrix, iterations: usize, tie_seed: u64) -> Prediction {
    Prediction::from_scores(kos_scores(matrix, iterations), tie_seed)
}
