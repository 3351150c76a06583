use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::Args;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use sbic_core::baselines::kos::REAL_DATA_ITERATIONS;
use sbic_core::io::{read_gold, read_labels, write_predictions};
use sbic_core::policies::Policy;
use sbic_core::sbic::DEFAULT_TASK_CAP;
use sbic_core::simulator::{
    aggregate, derive_seed, estimate_error_point, timing_harness, write_curve_csv, write_timing_csv, AggregatorParams,
    Algorithm, Arrival, StopRule, SyntheticConfig, TimingRow,
};
use sbic_core::theory::{bound_curve, BoundSpec, Variant};
use sbic_core::{LabelMatrix, LabelRecord, Prior};

use crate::grid::{parse_anchor, parse_usize_grid};
use crate::manifest;

pub struct Outcome {
    pub command: &'static str,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub manifest: PathBuf,
}

const OUT_DIR_VAR: &str = "SBIC_OUT_DIR";

fn default_out(name: &str) -> PathBuf {
    std::env::var_os(OUT_DIR_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".")).join(name)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn parse_algorithms(spec: &str, policy: Policy) -> Result<Vec<Algorithm>> {
    if spec.eq_ignore_ascii_case("all") {
        return Ok(Algorithm::suite(policy));
    }
    spec.split(',')
        .map(|s| {
            let a: Algorithm = s.trim().parse()?;
            Ok(if a == Algorithm::Gibbs && s.trim().eq_ignore_ascii_case("mc") {
                Algorithm::monte_carlo_for(policy)
            } else {
                a
            })
        })
        .collect()
}

fn with_iterations(mut params: AggregatorParams, algorithm: Algorithm, iters: Option<usize>) -> AggregatorParams {
    if let Some(n) = iters {
        match algorithm {
            Algorithm::Amf | Algorithm::Em => params.amf_iterations = n,
            Algorithm::Kos => params.kos_iterations = n,
            Algorithm::Gibbs => params.gibbs_steps = n,
            _ => {}
        }
    }
    params
}

#[derive(Debug, Clone, Args)]
pub struct PriorArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
}

impl PriorArgs {
    fn resolve(&self, default: Prior) -> Result<Prior> {
        Ok(Prior::new(self.alpha.unwrap_or(default.alpha), self.beta.unwrap_or(default.beta), self.q)?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long, default_value = "fast-sbic")]
    pub algo: String,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Repeats averaged when scoring against gold.
    #[arg(long, default_value_t = 100)]
    pub shuffles: usize,
    /// Iterations (AMF, EM, KOS) or sampling steps (Gibbs).
    #[arg(long)]
    pub iters: Option<usize>,
    /// Largest task count Sorted SBIC accepts.
    #[arg(long, default_value_t = DEFAULT_TASK_CAP)]
    pub sorted_cap: usize,
    /// Predictions CSV [default: $SBIC_OUT_DIR/predictions.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn shuffled(matrix: &LabelMatrix, seed: u64) -> Result<LabelMatrix> {
    let mut records = matrix.records().to_vec();
    records.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let records = records.into_iter().enumerate().map(|(t, r)| LabelRecord { seq: t as u64 + 1, ..r });
    Ok(LabelMatrix::from_records(records)?.with_min_tasks(matrix.num_tasks()))
}

pub fn infer(args: &InferArgs) -> Result<Outcome> {
    let algorithm: Algorithm = args.algo.parse()?;
    let prior = args.prior.resolve(Prior::generic())?;
    let base = AggregatorParams {
        kos_iterations: REAL_DATA_ITERATIONS,
        sorted_task_cap: args.sorted_cap,
        ..AggregatorParams::default()
    };
    let params = with_iterations(base, algorithm, args.iters);
    let out = args.out.clone().unwrap_or_else(|| default_out("predictions.csv"));
    let data = read_labels(File::open(&args.labels).with_context(|| format!("opening {}", args.labels.display()))?)
        .with_context(|| format!("reading {}", args.labels.display()))?;
    if data.matrix.is_empty() {
        eprintln!("warning: {} contains no labels", args.labels.display());
    }
    let prediction = aggregate(algorithm, &data.matrix, prior, &params, args.seed)?;
    write_predictions(create(&out)?, &data.tasks, &prediction, true)?;

    let mut inputs = vec![args.labels.clone()];
    let mut outputs = vec![out.clone()];
    if let Some(gold_path) = &args.gold {
        inputs.push(gold_path.clone());
        let gold =
            read_gold(File::open(gold_path).with_context(|| format!("opening {}", gold_path.display()))?, &data.tasks)
                .with_context(|| format!("reading {}", gold_path.display()))?;
        for task in &gold.unknown_tasks {
            eprintln!("warning: gold task `{task}` has no labels and is ignored");
        }
        let scored = gold.labelled();
        if scored == 0 {
            eprintln!("warning: no gold labels match a labelled task; nothing to score");
        } else if args.shuffles == 0 {
            bail!("--shuffles must be at least 1 when scoring against gold");
        } else {
            let reorder = matches!(algorithm, Algorithm::FastSbic | Algorithm::SortedSbic | Algorithm::Pf);
            let errors = (0..args.shuffles as u64)
                .map(|s| {
                    let seed = derive_seed(args.seed, s);
                    let matrix = if reorder { shuffled(&data.matrix, seed)? } else { data.matrix.clone() };
                    let p = aggregate(algorithm, &matrix, prior, &params, seed)?;
                    Ok(gold.errors(&p) as f64 / scored as f64)
                })
                .collect::<Result<Vec<f64>>>()?;
            let mean = errors.iter().sum::<f64>() / errors.len() as f64;
            let std = (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / errors.len() as f64).sqrt();
            println!("{algorithm}: error {mean:.4} ± {std:.4} over {} repeats on {scored} gold tasks", errors.len());
            let summary = out.with_extension("summary.csv");
            let mut w = create(&summary)?;
            writeln!(w, "algo,error_mean,error_std,repeats,gold_tasks")?;
            writeln!(w, "{algorithm},{mean},{std},{},{scored}", errors.len())?;
            w.flush()?;
            outputs.push(summary);
        }
    }
    Ok(Outcome {
        command: "infer",
        seed: args.seed,
        config: json!({
            "algorithm": algorithm,
            "prior": prior,
            "params": params,
            "shuffles": args.shuffles,
            "tasks": data.matrix.num_tasks(),
            "workers": data.matrix.num_workers(),
            "labels": data.matrix.len(),
        }),
        inputs,
        manifest: manifest::beside(&out),
        outputs,
    })
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 200)]
    pub tasks: usize,
    /// Labels per worker.
    #[arg(long = "L", default_value_t = 10)]
    pub labels_per_worker: usize,
    /// Labels per task: `a..b`, `a..b:step` or `a,b,c`.
    #[arg(long = "R", default_value = "5..60:5")]
    pub labels_per_task: String,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long, default_value = "uni")]
    pub policy: Policy,
    /// Comma-separated algorithms, or `all`.
    #[arg(long, default_value = "all")]
    pub algo: String,
    /// Runs with at least one error needed per point.
    #[arg(long, default_value_t = 200)]
    pub target: usize,
    #[arg(long, default_value_t = 100_000)]
    pub max_runs: usize,
    /// Seconds allowed per point; results then depend on machine speed.
    #[arg(long)]
    pub time_budget: Option<f64>,
    #[arg(long, default_value = "sessions")]
    pub arrival: Arrival,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Output directory [default: $SBIC_OUT_DIR/simulate].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn simulate(args: &SimulateArgs) -> Result<Outcome> {
    let prior = args.prior.resolve(Prior::synthetic())?;
    let grid = parse_usize_grid(&args.labels_per_task)?;
    let algorithms = parse_algorithms(&args.algo, args.policy)?;
    let dir = args.out.clone().unwrap_or_else(|| default_out("simulate"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    if args.time_budget.is_some() {
        eprintln!("warning: a time budget makes the output depend on machine speed");
    }
    let stop = StopRule {
        target_error_runs: args.target,
        max_runs: args.max_runs,
        time_budget: args.time_budget.map(Duration::from_secs_f64),
        ..StopRule::default()
    };
    for &r in &grid {
        SyntheticConfig::new(args.tasks, r, args.labels_per_worker, prior, args.policy, Algorithm::Maj, 0)
            .validate()?;
    }
    let mut outputs = Vec::new();
    for &algorithm in &algorithms {
        let mut cfg =
            SyntheticConfig::new(args.tasks, grid[0], args.labels_per_worker, prior, args.policy, algorithm, args.seed);
        cfg.arrival = args.arrival;
        cfg.params = with_iterations(cfg.params, algorithm, args.iters);
        let mut points = Vec::with_capacity(grid.len());
        for &r in &grid {
            let p = estimate_error_point(&SyntheticConfig { labels_per_task: r, ..cfg }, &stop)?;
            eprintln!(
                "{algorithm} R={r}: error {:.3e} [{:.3e}, {:.3e}] from {} runs ({} with errors){}",
                p.error_mean,
                p.ci_low,
                p.ci_high,
                p.runs,
                p.error_runs,
                if p.flagged { ", stopped by guard" } else { "" }
            );
            points.push(p);
        }
        let path = dir.join(format!("{}_{}.csv", args.policy, algorithm));
        write_curve_csv(create(&path)?, &points)?;
        outputs.push(path);
    }
    Ok(Outcome {
        command: "simulate",
        seed: args.seed,
        config: json!({
            "tasks": args.tasks,
            "labels_per_worker": args.labels_per_worker,
            "labels_per_task": grid,
            "prior": prior,
            "policy": args.policy,
            "algorithms": algorithms,
            "arrival": args.arrival,
            "stop": stop,
            "iters": args.iters,
        }),
        inputs: Vec::new(),
        manifest: dir.join("manifest.json"),
        outputs,
    })
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    #[arg(long = "L", default_value_t = 10)]
    pub labels_per_worker: u64,
    #[arg(long, default_value_t = 4.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 3.0)]
    pub beta: f64,
    #[arg(long, default_value = "sorted")]
    pub variant: Variant,
    #[arg(long, default_value = "uni")]
    pub policy: Policy,
    /// `R0,error0`, a point the curve passes through.
    #[arg(long, default_value = "1,0.5")]
    pub anchor: String,
    #[arg(long = "R", default_value = "1..80")]
    pub labels_per_task: String,
    /// Bound CSV [default: $SBIC_OUT_DIR/bounds.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn bounds(args: &BoundsArgs) -> Result<Outcome> {
    let spec = BoundSpec {
        labels_per_worker: args.labels_per_worker,
        alpha: args.alpha,
        beta: args.beta,
        variant: args.variant,
        policy: args.policy,
        anchor: parse_anchor(&args.anchor)?,
    };
    let grid: Vec<f64> = parse_usize_grid(&args.labels_per_task)?.into_iter().map(|r| r as f64).collect();
    let curve = bound_curve(&spec, &grid)?;
    if curve.flat {
        eprintln!("warning: the decay rate vanishes for this prior; the bound is flat");
    }
    let out = args.out.clone().unwrap_or_else(|| default_out("bounds.csv"));
    let mut w = create(&out)?;
    writeln!(w, "R,bound")?;
    for (r, e) in &curve.points {
        writeln!(w, "{r},{e}")?;
    }
    w.flush()?;
    Ok(Outcome {
        command: "bounds",
        seed: 0,
        config: json!({ "spec": spec, "decay_rate": curve.decay_rate, "flat": curve.flat }),
        inputs: Vec::new(),
        manifest: manifest::beside(&out),
        outputs: vec![out],
    })
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 1000)]
    pub tasks: usize,
    #[arg(long = "L", default_value_t = 10)]
    pub labels_per_worker: usize,
    #[arg(long = "R", default_value = "10..40:10")]
    pub labels_per_task: String,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long, default_value = "us")]
    pub policy: Policy,
    /// Comma-separated algorithms, or `all`.
    #[arg(long, default_value = "all")]
    pub algo: String,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Timing CSV [default: $SBIC_OUT_DIR/timing.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn bench(args: &BenchArgs) -> Result<Outcome> {
    let prior = args.prior.resolve(Prior::synthetic())?;
    let grid = parse_usize_grid(&args.labels_per_task)?;
    let mut algorithms = parse_algorithms(&args.algo, args.policy)?;
    // EM and AMF share one implementation and one row.
    let shared = algorithms.contains(&Algorithm::Em) && algorithms.contains(&Algorithm::Amf);
    if shared {
        algorithms.retain(|&a| a != Algorithm::Em);
    }
    let mut rows = Vec::new();
    for &r in &grid {
        for &algorithm in &algorithms {
            let mut cfg =
                SyntheticConfig::new(args.tasks, r, args.labels_per_worker, prior, args.policy, algorithm, args.seed);
            cfg.params = with_iterations(cfg.params, algorithm, args.iters);
            let stats = timing_harness(&cfg, args.repeats)?;
            let name = if shared && algorithm == Algorithm::Amf { "em/amf".to_owned() } else { algorithm.to_string() };
            eprintln!("R={r} {name}: {:.3} ± {:.3} ms", stats.mean_ms, stats.std_ms);
            rows.push(TimingRow { r, algo: name, stats });
        }
    }
    let out = args.out.clone().unwrap_or_else(|| default_out("timing.csv"));
    write_timing_csv(create(&out)?, &rows)?;
    Ok(Outcome {
        command: "bench",
        seed: args.seed,
        config: json!({
            "tasks": args.tasks,
            "labels_per_worker": args.labels_per_worker,
            "labels_per_task": grid,
            "prior": prior,
            "policy": args.policy,
            "algorithms": algorithms,
            "repeats": args.repeats,
        }),
        inputs: Vec::new(),
        manifest: manifest::beside(&out),
        outputs: vec![out],
    })
}
