//! Seeded replication studies and their summaries.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{warm_start_pipeline, EstimatorKind, PipelineConfig, PipelineOutput};
use crate::model::{generate_sample, ModelSpec};
use crate::rng::derive_seed;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub spec: ModelSpec,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    /// Estimator selection and tuning; its `seed` is replaced per replication.
    pub pipeline: PipelineConfig,
    pub workers: usize,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.reps < 1 {
            return Err(Error::InvalidArgument("reps must be at least 1".into()));
        }
        if self.n < self.spec.d() + 1 {
            return Err(Error::InvalidArgument(format!("n must be at least d + 1 = {}", self.spec.d() + 1)));
        }
        if self.pipeline.estimators.is_empty() {
            return Err(Error::InvalidArgument("no estimators selected".into()));
        }
        Ok(())
    }
}

/// Seed of replication `rep` (1-based) in a study seeded with `seed`.
pub fn replication_seed(seed: u64, rep: usize) -> u64 {
    derive_seed(seed, rep as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepEstimate {
    pub alpha_hat: Vec<f64>,
    pub criterion: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub rep: usize,
    pub estimator: EstimatorKind,
    /// Failure reason when the estimator errored or its search did not converge.
    pub outcome: std::result::Result<RepEstimate, String>,
}

#[derive(Debug, Clone)]
pub struct ReplicationTable {
    pub d: usize,
    pub n: usize,
    pub records: Vec<RepRecord>,
    pub wall_time: Duration,
}

fn records_for(rep: usize, out: PipelineOutput) -> Vec<RepRecord> {
    out.into_iter()
        .map(|(estimator, r)| {
            let outcome = match r {
                Ok(e) if e.converged => {
                    Ok(RepEstimate { alpha_hat: e.alpha_hat, criterion: e.criterion, evals: e.evals })
                }
                Ok(e) => Err(format!("search did not converge within {} evaluations", e.evals)),
                Err(e) => Err(e.to_string()),
            };
            RepRecord { rep, estimator, outcome }
        })
        .collect()
}

/// Runs one replication: sample from the replication seed, then the
/// warm-start pipeline with LSE starts drawn from the same seed.
pub fn run_replication(config: &SimConfig, rep: usize) -> Vec<RepRecord> {
    let seed = replication_seed(config.seed, rep);
    match generate_sample(&config.spec, config.n, seed) {
        Ok(sample) => {
            let pipeline = PipelineConfig { seed, ..config.pipeline.clone() };
            records_for(rep, warm_start_pipeline(&sample, &pipeline))
        }
        Err(e) => config
            .pipeline
            .estimators
            .iter()
            .map(|&estimator| RepRecord { rep, estimator, outcome: Err(e.to_string()) })
            .collect(),
    }
}

/// Runs replications `1..=reps` on `workers` threads. Records come back in
/// replication order whatever the worker count.
pub fn run_replications(config: &SimConfig) -> Result<ReplicationTable> {
    config.validate()?;
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let per_rep: Vec<Vec<RepRecord>> =
        pool.install(|| (1..=config.reps).into_par_iter().map(|rep| run_replication(config, rep)).collect());
    Ok(ReplicationTable {
        d: config.spec.d(),
        n: config.n,
        records: per_rep.into_iter().flatten().collect(),
        wall_time: started.elapsed(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxplotStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Most extreme values inside the 1.5 IQR fences.
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let pos = p * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Five-number summary with linearly interpolated quartiles and 1.5 IQR outliers.
pub fn boxplot_stats(values: &[f64]) -> Result<BoxplotStats> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("boxplot of an empty sample".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&v, 0.25);
    let q3 = quantile_sorted(&v, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v.iter().copied().filter(|x| *x >= lo_fence && *x <= hi_fence).collect();
    Ok(BoxplotStats {
        min: v[0],
        q1,
        median: quantile_sorted(&v, 0.5),
        q3,
        max: v[v.len() - 1],
        whisker_low: inside.first().copied().unwrap_or(v[0]),
        whisker_high: inside.last().copied().unwrap_or(v[v.len() - 1]),
        outliers: v.iter().copied().filter(|x| *x < lo_fence || *x > hi_fence).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSummary {
    pub estimator: EstimatorKind,
    pub successes: usize,
    pub failures: usize,
    pub means: Vec<f64>,
    /// `n` times the sample covariance (denominator `reps - 1`).
    pub scaled_cov: Vec<Vec<f64>>,
    /// `sqrt(n/d) |alpha_hat - alpha0|` per successful replication, in replication order.
    pub scaled_errors: Vec<f64>,
    /// Replication index of each entry of `scaled_errors`.
    pub success_reps: Vec<usize>,
    pub boxplot: BoxplotStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub n: usize,
    pub d: usize,
    pub estimators: BTreeMap<EstimatorKind, EstimatorSummary>,
}

/// Per-estimator means, scaled covariances and scaled errors over the
/// successful replications. Record order does not matter.
pub fn summarize(table: &ReplicationTable, alpha0: &[f64], n: usize) -> Result<SimulationSummary> {
    let d = alpha0.len();
    // successes with their replication index, and the failure count
    type Group<'a> = (Vec<(usize, &'a RepEstimate)>, usize);
    let mut grouped: BTreeMap<EstimatorKind, Group> = BTreeMap::new();
    for r in &table.records {
        let entry = grouped.entry(r.estimator).or_default();
        match &r.outcome {
            Ok(e) => entry.0.push((r.rep, e)),
            Err(_) => entry.1 += 1,
        }
    }
    let mut estimators = BTreeMap::new();
    for (kind, (mut ok, failures)) in grouped {
        ok.sort_by_key(|(rep, _)| *rep);
        let m = ok.len();
        if m < 2 {
            return Err(Error::TooFewReplications(format!("{kind}: {m} successful replications, need at least 2")));
        }
        if let Some((rep, _)) = ok.iter().find(|(_, e)| e.alpha_hat.len() != d) {
            return Err(Error::InvalidArgument(format!("{kind}: replication {rep} has the wrong dimension")));
        }
        let mf = m as f64;
        let means: Vec<f64> = (0..d).map(|j| ok.iter().map(|(_, e)| e.alpha_hat[j]).sum::<f64>() / mf).collect();
        let mut scaled_cov = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..=i {
                let c = ok.iter().map(|(_, e)| (e.alpha_hat[i] - means[i]) * (e.alpha_hat[j] - means[j])).sum::<f64>()
                    / (mf - 1.0);
                scaled_cov[i][j] = n as f64 * c;
                scaled_cov[j][i] = n as f64 * c;
            }
        }
        let factor = (n as f64 / d as f64).sqrt();
        let scaled_errors: Vec<f64> = ok
            .iter()
            .map(|(_, e)| factor * e.alpha_hat.iter().zip(alpha0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .collect();
        let boxplot = boxplot_stats(&scaled_errors)?;
        let success_reps = ok.iter().map(|(rep, _)| *rep).collect();
        estimators.insert(
            kind,
            EstimatorSummary {
                estimator: kind,
                successes: m,
                failures,
                means,
                scaled_cov,
                scaled_errors,
                success_reps,
                boxplot,
            },
        );
    }
    if estimators.is_empty() {
        return Err(Error::TooFewReplications("table is empty".into()));
    }
    Ok(SimulationSummary { n, d, estimators })
}
