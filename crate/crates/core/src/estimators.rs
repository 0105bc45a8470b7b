//! The six index estimators and the warm-start protocol.
//!
//! The profile least squares estimate (LSE) is found by Nelder-Mead from a
//! set of random unit starts; its output is the starting value for the
//! score estimators (SSE, ESE, PLSE) and the rank correlation estimator.
//! The linear estimator is closed form.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::isotonic::{fit_monotone, StepFunction};
use crate::kernel::{default_bandwidth, BandwidthRule};
use crate::model::{project_sample, Sample};
use crate::score::{merged_spline_fit, score_norm_objective, ScoreKind};
use crate::search::{hooke_jeeves, nelder_mead, random_unit_starts, SearchOptions, SearchResult};
use crate::spline::SplineFit;

/// Estimators in the order they are usually tabulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EstimatorKind {
    Sse,
    Ese,
    Lse,
    Mre,
    Linear,
    Plse,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 6] = [
        EstimatorKind::Sse,
        EstimatorKind::Ese,
        EstimatorKind::Lse,
        EstimatorKind::Mre,
        EstimatorKind::Linear,
        EstimatorKind::Plse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Sse => "sse",
            EstimatorKind::Ese => "ese",
            EstimatorKind::Lse => "lse",
            EstimatorKind::Mre => "mre",
            EstimatorKind::Linear => "linear",
            EstimatorKind::Plse => "plse",
        }
    }

    /// Whether the estimator searches from the LSE.
    pub fn needs_warm_start(self) -> bool {
        !matches!(self, EstimatorKind::Lse | EstimatorKind::Linear)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown estimator '{s}'")))
    }
}

/// Link estimate attached to an index estimate.
#[derive(Debug, Clone, PartialEq)]
pub enum LinkFit {
    Step(StepFunction),
    Spline(SplineFit),
    /// `psi(u) = intercept + slope * u` with `u = alpha_hat' x`.
    Linear {
        intercept: f64,
        slope: f64,
    },
    /// The rank correlation estimator does not estimate the link.
    None,
}

impl LinkFit {
    /// Human-readable size of the link fit.
    pub fn summary(&self) -> String {
        match self {
            LinkFit::Step(s) => format!("step function with {} jumps", s.jump_count()),
            LinkFit::Spline(s) => format!("natural cubic spline with {} knots", s.knots().len()),
            LinkFit::Linear { .. } => "straight line".to_string(),
            LinkFit::None => "none".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub estimator: EstimatorKind,
    /// Unit-norm index estimate.
    pub alpha_hat: Vec<f64>,
    pub link: LinkFit,
    /// Final objective: mean squared residual (LSE, linear), score norm
    /// (SSE, ESE, PLSE) or rank correlation (MRE).
    pub criterion: f64,
    pub evals: usize,
    pub start_used: Option<Vec<f64>>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolveDiagnostics {
    pub raw_alpha: Vec<f64>,
    /// Ratio of extreme eigenvalues of the covariate covariance matrix.
    pub condition_estimate: f64,
}

/// Condition numbers above this make the linear estimator fail.
pub const MAX_CONDITION: f64 = 1e12;

fn unit_start(start: &[f64], d: usize) -> Result<Vec<f64>> {
    if start.len() != d {
        return Err(Error::InvalidArgument(format!("start has {} coordinates, expected {d}", start.len())));
    }
    let nrm = crate::norm2(start);
    if !nrm.is_finite() || (nrm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!("start must have unit norm, got {nrm}")));
    }
    Ok(start.to_vec())
}

fn unit_argmin(r: &SearchResult) -> Result<Vec<f64>> {
    crate::normalize(&r.argmin).ok_or_else(|| Error::NonFinite("search ended at a zero vector".into()))
}

/// `alpha -> (1/n) sum (y_i - psi_hat(alpha' x_i))^2`, `+inf` near zero.
pub fn lse_criterion(sample: &Sample) -> impl Fn(&[f64]) -> f64 + '_ {
    move |alpha: &[f64]| {
        let nrm = crate::norm2(alpha);
        if !(nrm >= 1e-8 && nrm.is_finite()) {
            return f64::INFINITY;
        }
        match fit_monotone(sample, alpha) {
            Ok(fit) => fit.mean_squared_residual(),
            Err(_) => f64::INFINITY,
        }
    }
}

pub fn estimate_lse(sample: &Sample, n_starts: usize, seed: u64, opts: &SearchOptions) -> Result<EstimateResult> {
    if n_starts == 0 {
        return Err(Error::InvalidArgument("need at least one start".into()));
    }
    let starts = random_unit_starts(sample.d(), n_starts, seed);
    estimate_lse_from(sample, &starts, opts)
}

/// Profile least squares from the given starts; the best criterion wins
/// (first start on ties).
pub fn estimate_lse_from(sample: &Sample, starts: &[Vec<f64>], opts: &SearchOptions) -> Result<EstimateResult> {
    let objective = lse_criterion(sample);
    let mut best: Option<(Vec<f64>, f64, &Vec<f64>, bool)> = None;
    let mut evals = 0;
    for start in starts {
        let r = nelder_mead(&objective, start, opts)?;
        evals += r.evals;
        let alpha = unit_argmin(&r)?;
        let value = objective(&alpha);
        if best.as_ref().is_none_or(|b| value < b.1) {
            best = Some((alpha, value, start, r.converged));
        }
    }
    let (alpha_hat, criterion, start, converged) =
        best.ok_or_else(|| Error::InvalidArgument("need at least one start".into()))?;
    let link = LinkFit::Step(fit_monotone(sample, &alpha_hat)?.step);
    Ok(EstimateResult {
        estimator: EstimatorKind::Lse,
        alpha_hat,
        link,
        criterion,
        evals,
        start_used: Some(start.clone()),
        converged,
    })
}

fn score_estimate(
    sample: &Sample,
    start: &[f64],
    kind: ScoreKind,
    estimator: EstimatorKind,
    opts: &SearchOptions,
) -> Result<EstimateResult> {
    let start = unit_start(start, sample.d())?;
    let objective = score_norm_objective(kind, sample);
    let r = match estimator {
        EstimatorKind::Plse => hooke_jeeves(&objective, &start, opts)?,
        _ => nelder_mead(&objective, &start, opts)?,
    };
    let alpha_hat = unit_argmin(&r)?;
    let criterion = objective(&alpha_hat);
    let link = match kind {
        ScoreKind::Plse { mu } => {
            let proj = project_sample(sample, &alpha_hat)?;
            LinkFit::Spline(merged_spline_fit(&proj.ts, &proj.ys_ordered, mu)?.1)
        }
        _ => LinkFit::Step(fit_monotone(sample, &alpha_hat)?.step),
    };
    Ok(EstimateResult {
        estimator,
        alpha_hat,
        link,
        criterion,
        evals: r.evals,
        start_used: Some(start),
        converged: r.converged,
    })
}

/// Simple score estimator: zero crossing of the isotonic score.
pub fn estimate_sse(sample: &Sample, start: &[f64], opts: &SearchOptions) -> Result<EstimateResult> {
    score_estimate(sample, start, ScoreKind::Sse, EstimatorKind::Sse, opts)
}

/// Bandwidth used by the ESE started at `start`: the rule applied to the
/// range of the projections on the start direction.
pub fn ese_bandwidth(sample: &Sample, start: &[f64], rule: BandwidthRule) -> Result<f64> {
    let proj = project_sample(sample, start)?;
    let range = proj.ts[proj.ts.len() - 1] - proj.ts[0];
    if range.is_nan() || range <= 0.0 {
        return Err(Error::InvalidArgument("projected data have zero range".into()));
    }
    Ok(default_bandwidth(sample.n(), range, rule))
}

/// Efficient score estimator: the isotonic score weighted by a kernel
/// estimate of the link derivative. The bandwidth is fixed at the start.
pub fn estimate_ese(
    sample: &Sample,
    start: &[f64],
    rule: BandwidthRule,
    opts: &SearchOptions,
) -> Result<EstimateResult> {
    let start = unit_start(start, sample.d())?;
    let h = ese_bandwidth(sample, &start, rule)?;
    score_estimate(sample, &start, ScoreKind::Ese { h }, EstimatorKind::Ese, opts)
}

/// Penalized least squares estimator: spline score, Hooke-Jeeves search.
pub fn estimate_plse(sample: &Sample, start: &[f64], mu: f64, opts: &SearchOptions) -> Result<EstimateResult> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!("penalty must be positive, got {mu}")));
    }
    score_estimate(sample, start, ScoreKind::Plse { mu }, EstimatorKind::Plse, opts)
}

/// Least squares regression of `y` on centered covariates, normalized.
pub fn estimate_linear(sample: &Sample) -> Result<(EstimateResult, LinearSolveDiagnostics)> {
    let n = sample.n();
    let d = sample.d();
    let nf = n as f64;
    let mut mean = vec![0.0; d];
    for row in sample.rows() {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x / nf;
        }
    }
    let ybar = sample.ys().iter().sum::<f64>() / nf;
    let mut s = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    for (row, y) in sample.rows().zip(sample.ys()) {
        let c = DVector::from_iterator(d, row.iter().zip(&mean).map(|(x, m)| x - m));
        s += &c * c.transpose() / nf;
        rhs += &c * (*y / nf);
    }
    let eig = s.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    if condition.is_nan() || condition > MAX_CONDITION {
        return Err(Error::Singular(format!(
            "covariate covariance matrix is rank deficient or ill-conditioned (condition estimate {condition:.3e})"
        )));
    }
    let raw = s
        .cholesky()
        .ok_or_else(|| Error::Singular("covariate covariance matrix is not positive definite".into()))?
        .solve(&rhs);
    let raw_alpha: Vec<f64> = raw.iter().copied().collect();
    let slope = crate::norm2(&raw_alpha);
    let alpha_hat =
        crate::normalize(&raw_alpha).ok_or_else(|| Error::Singular("least squares solution is zero".into()))?;
    let intercept = ybar - slope * crate::dot(&alpha_hat, &mean);
    let criterion = sample
        .rows()
        .zip(sample.ys())
        .map(|(row, y)| {
            let fit = ybar + row.iter().zip(&mean).zip(&raw_alpha).map(|((x, m), a)| a * (x - m)).sum::<f64>();
            (y - fit).powi(2)
        })
        .sum::<f64>()
        / nf;
    let result = EstimateResult {
        estimator: EstimatorKind::Linear,
        alpha_hat,
        link: LinkFit::Linear { intercept, slope },
        criterion,
        evals: 0,
        start_used: None,
        converged: true,
    };
    Ok((result, LinearSolveDiagnostics { raw_alpha, condition_estimate: condition }))
}

/// Counts pairs `i < j` with `seq[i] < seq[j]` strictly, by merge sort.
fn count_ascending_pairs(seq: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = seq.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (l, r) = seq.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        count_ascending_pairs(l, bl) + count_ascending_pairs(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if seq[i] < seq[j] {
            buf[k] = seq[i];
            i += 1;
        } else {
            // left elements already taken are strictly below seq[j]
            count += i as u64;
            buf[k] = seq[j];
            j += 1;
        }
        k += 1;
    }
    while j < n {
        count += mid as u64;
        buf[k] = seq[j];
        j += 1;
        k += 1;
    }
    while i < mid {
        buf[k] = seq[i];
        i += 1;
        k += 1;
    }
    seq.copy_from_slice(&buf[..n]);
    count
}

/// Rank correlation `(2/(n(n-1))) #{i < j : (y_i - y_j)(t_i - t_j) > 0}`
/// with `t = alpha' x`; ties in either coordinate count as discordant.
pub fn rank_correlation(sample: &Sample, alpha: &[f64]) -> f64 {
    let ts = sample.project_values(alpha);
    let ys = sample.ys();
    let n = ys.len();
    let mut idx: Vec<usize> = (0..n).collect();
    // within a tie in t, descending y so tied pairs never count
    idx.sort_by(|&a, &b| ts[a].total_cmp(&ts[b]).then(ys[b].total_cmp(&ys[a])));
    let mut seq: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
    let mut buf = vec![0.0; n];
    let concordant = count_ascending_pairs(&mut seq, &mut buf);
    2.0 * concordant as f64 / (n as f64 * (n as f64 - 1.0))
}

/// Maximum rank correlation estimator, Nelder-Mead on the negated objective.
pub fn estimate_mre(sample: &Sample, start: &[f64], opts: &SearchOptions) -> Result<EstimateResult> {
    let start = unit_start(start, sample.d())?;
    let objective = |alpha: &[f64]| {
        let nrm = crate::norm2(alpha);
        if !(nrm >= 1e-8 && nrm.is_finite()) {
            return f64::INFINITY;
        }
        -rank_correlation(sample, alpha)
    };
    let r = nelder_mead(objective, &start, opts)?;
    let alpha_hat = unit_argmin(&r)?;
    let criterion = rank_correlation(sample, &alpha_hat);
    Ok(EstimateResult {
        estimator: EstimatorKind::Mre,
        alpha_hat,
        link: LinkFit::None,
        criterion,
        evals: r.evals,
        start_used: Some(start),
        converged: r.converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub estimators: BTreeSet<EstimatorKind>,
    pub n_starts: usize,
    /// Seed of the LSE start directions.
    pub seed: u64,
    pub mu: f64,
    pub bandwidth: BandwidthRule,
    pub search: SearchOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            estimators: EstimatorKind::ALL.into_iter().collect(),
            n_starts: 20,
            seed: 0,
            mu: 0.1,
            bandwidth: BandwidthRule::default(),
            search: SearchOptions::default(),
        }
    }
}

pub type PipelineOutput = BTreeMap<EstimatorKind, Result<EstimateResult>>;

/// Runs the selected estimators, starting every search-based one at the LSE.
/// The LSE is computed whenever a selected estimator needs it, but only
/// reported when selected itself.
pub fn warm_start_pipeline(sample: &Sample, config: &PipelineConfig) -> PipelineOutput {
    let mut out = BTreeMap::new();
    let wanted = &config.estimators;
    let need_lse = wanted.iter().any(|k| *k == EstimatorKind::Lse || k.needs_warm_start());
    let lse = need_lse.then(|| estimate_lse(sample, config.n_starts, config.seed, &config.search));
    for &kind in wanted {
        let result = match kind {
            EstimatorKind::Linear => estimate_linear(sample).map(|(r, _)| r),
            EstimatorKind::Lse => lse.clone().expect("lse computed"),
            _ => match lse.as_ref().expect("lse computed") {
                Err(e) => Err(e.clone()),
                Ok(l) => {
                    let start = &l.alpha_hat;
                    match kind {
                        EstimatorKind::Sse => estimate_sse(sample, start, &config.search),
                        EstimatorKind::Ese => estimate_ese(sample, start, config.bandwidth, &config.search),
                        EstimatorKind::Plse => estimate_plse(sample, start, config.mu, &config.search),
                        EstimatorKind::Mre => estimate_mre(sample, start, &config.search),
                        EstimatorKind::Lse | EstimatorKind::Linear => unreachable!(),
                    }
                }
            },
        };
        out.insert(kind, result);
    }
    out
}
