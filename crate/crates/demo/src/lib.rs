//! Browser bindings. Every function returns a JSON string, or throws a
//! string error on bad input.

use serde_json::json;
use wasm_bindgen::prelude::*;

use sbic_core::policies::Policy;
use sbic_core::simulator::{estimate_error_point, run_once, Algorithm, StopRule, SyntheticConfig};
use sbic_core::theory::{bound_curve, BoundSpec, Variant};
use sbic_core::Prior;

fn fail(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// The four theoretical curves (UNI/US x Fast/Sorted) for `R = 1..=r_max`,
/// all pinned to `(anchor_r, anchor_error)`.
#[wasm_bindgen]
pub fn bound_curves(
    labels_per_worker: u32,
    alpha: f64,
    beta: f64,
    r_max: u32,
    anchor_r: f64,
    anchor_error: f64,
) -> Result<String, JsError> {
    let grid: Vec<f64> = (1..=r_max.max(1)).map(f64::from).collect();
    let mut curves = Vec::new();
    for policy in [Policy::Uni, Policy::Us] {
        for variant in [Variant::Fast, Variant::Sorted] {
            let spec = BoundSpec {
                labels_per_worker: labels_per_worker as u64,
                alpha,
                beta,
                variant,
                policy,
                anchor: (anchor_r, anchor_error),
            };
            let curve = bound_curve(&spec, &grid).map_err(fail)?;
            curves.push(json!({
                "policy": policy.to_string(),
                "variant": format!("{variant:?}").to_lowercase(),
                "rate": curve.decay_rate,
                "points": curve.points,
            }));
        }
    }
    Ok(json!({ "curves": curves }).to_string())
}

fn config(
    algo: &str,
    policy: &str,
    tasks: u32,
    r: u32,
    labels_per_worker: u32,
    seed: u64,
) -> Result<SyntheticConfig, JsError> {
    let policy: Policy = policy.parse().map_err(fail)?;
    let algorithm: Algorithm = algo.parse().map_err(fail)?;
    let cfg = SyntheticConfig::new(
        tasks as usize,
        r as usize,
        labels_per_worker as usize,
        Prior::synthetic(),
        policy,
        algorithm,
        seed,
    );
    cfg.validate().map_err(fail)?;
    Ok(cfg)
}

/// Monte Carlo error rate at each `R` in the comma-separated `r_grid`,
/// stopping after `target` erroneous runs or `max_runs` runs.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn error_curve(
    algo: &str,
    policy: &str,
    tasks: u32,
    labels_per_worker: u32,
    r_grid: &str,
    target: u32,
    max_runs: u32,
    seed: u64,
) -> Result<String, JsError> {
    let stop = StopRule { target_error_runs: target as usize, max_runs: max_runs as usize, ..StopRule::default() };
    let mut points = Vec::new();
    for r in r_grid.split(',').filter(|s| !s.trim().is_empty()) {
        let r: u32 = r.trim().parse().map_err(|_| fail(format!("bad R value `{r}`")))?;
        let cfg = config(algo, policy, tasks, r, labels_per_worker, seed)?;
        points.push(estimate_error_point(&cfg, &stop).map_err(fail)?);
    }
    serde_json::to_string(&json!({ "algo": algo, "policy": policy, "points": points })).map_err(fail)
}

/// One synthetic crowd and one aggregation: number of misclassified tasks.
#[wasm_bindgen]
pub fn single_run(
    algo: &str,
    policy: &str,
    tasks: u32,
    r: u32,
    labels_per_worker: u32,
    seed: u64,
) -> Result<String, JsError> {
    let cfg = config(algo, policy, tasks, r, labels_per_worker, seed)?;
    let result = run_once(&cfg).map_err(fail)?;
    Ok(json!({
        "errors": result.errors,
        "total": result.total,
        "error_rate": result.errors as f64 / result.total.max(1) as f64,
        "labels": cfg.num_labels(),
        "workers": cfg.num_workers(),
    })
    .to_string())
}
