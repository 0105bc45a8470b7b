//! Weighted isotonic least squares and the monotone link fit.

use crate::error::{Error, Result};
use crate::model::{project_sample, IndexProjection, Sample};

/// Nondecreasing, right-continuous step function.
///
/// `levels[0]` applies below `taus[0]`, `levels[k]` on `[taus[k-1], taus[k])`,
/// and the last level from the last jump on. Outside the data range the
/// function is constant.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    taus: Vec<f64>,
    levels: Vec<f64>,
}

impl StepFunction {
    pub fn new(taus: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if levels.len() != taus.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "{} jumps need {} levels, got {}",
                taus.len(),
                taus.len() + 1,
                levels.len()
            )));
        }
        if taus.iter().chain(&levels).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("step function entries must be finite".into()));
        }
        if taus.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("jump locations must be strictly increasing".into()));
        }
        if levels.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("levels must be nondecreasing".into()));
        }
        Ok(StepFunction { taus, levels })
    }

    pub fn constant(level: f64) -> Self {
        StepFunction { taus: Vec::new(), levels: vec![level] }
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn jump_count(&self) -> usize {
        self.taus.len()
    }

    /// `(location, size)` of each jump.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.taus.iter().zip(self.levels.windows(2)).map(|(&t, w)| (t, w[1] - w[0]))
    }

    pub fn total_jump(&self) -> f64 {
        self.levels[self.levels.len() - 1] - self.levels[0]
    }

    pub fn eval(&self, u: f64) -> f64 {
        eval_step(self, u)
    }
}

pub fn eval_step(f: &StepFunction, u: f64) -> f64 {
    // number of jumps at or below u
    let k = f.taus.partition_point(|&t| t <= u);
    f.levels[k]
}

struct Block {
    wsum: f64,
    mean: f64,
    len: usize,
}

/// Blocks are pooled only on strict violations, so monotone input passes
/// through bit for bit.
fn pool(values: &[f64], weights: &[f64]) -> Vec<Block> {
    let mut blocks: Vec<Block> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        let mut cur = Block { wsum: w, mean: v, len: 1 };
        while let Some(prev) = blocks.last() {
            if prev.mean <= cur.mean {
                break;
            }
            let prev = blocks.pop().unwrap();
            let wsum = prev.wsum + cur.wsum;
            let mean = (prev.wsum * prev.mean + cur.wsum * cur.mean) / wsum;
            cur = Block { wsum, mean, len: prev.len + cur.len };
        }
        blocks.push(cur);
    }
    blocks
}

fn check_weights(values: &[f64], weights: &[f64]) -> Result<()> {
    if values.len() != weights.len() {
        return Err(Error::InvalidArgument(format!("{} values but {} weights", values.len(), weights.len())));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidArgument(format!("weights must be positive, got {w}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("values must be finite".into()));
    }
    Ok(())
}

/// Pool-adjacent-violators: the nondecreasing vector minimizing
/// `sum w_i (v_i - out_i)^2`. Linear time.
pub fn pava(values: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    check_weights(values, weights)?;
    let mut out = Vec::with_capacity(values.len());
    for b in pool(values, weights) {
        let m = b.mean;
        out.extend(std::iter::repeat_n(m, b.len));
    }
    Ok(out)
}

/// Isotonic fit along an index direction together with the projection it was built on.
#[derive(Debug, Clone)]
pub struct MonotoneFit {
    pub projection: IndexProjection,
    /// Fitted values in projection order (`fitted[k]` belongs to row `projection.order[k]`).
    pub fitted: Vec<f64>,
    pub step: StepFunction,
}

impl MonotoneFit {
    /// `(1/n) sum (y_i - fit_i)^2`.
    pub fn mean_squared_residual(&self) -> f64 {
        let ys = &self.projection.ys_ordered;
        ys.iter().zip(&self.fitted).map(|(y, f)| (y - f).powi(2)).sum::<f64>() / ys.len() as f64
    }
}

/// Isotonic regression of the ordered responses on the ordered projections.
/// Equal projections form a single unit with weight equal to its multiplicity.
pub fn fit_projection(projection: IndexProjection) -> MonotoneFit {
    let ts = &projection.ts;
    let ys = &projection.ys_ordered;
    let n = ts.len();

    // group exact ties
    let mut starts = Vec::with_capacity(n);
    let mut gy = Vec::with_capacity(n);
    let mut gw = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && ts[j] == ts[i] {
            j += 1;
        }
        starts.push(i);
        gy.push(ys[i..j].iter().sum::<f64>() / (j - i) as f64);
        gw.push((j - i) as f64);
        i = j;
    }
    starts.push(n);

    let blocks = pool(&gy, &gw);
    let mut fitted = Vec::with_capacity(n);
    let mut taus = Vec::with_capacity(blocks.len().saturating_sub(1));
    let mut levels = Vec::with_capacity(blocks.len());
    let mut g = 0;
    for (k, b) in blocks.iter().enumerate() {
        let m = b.mean;
        let first = starts[g];
        let last = starts[g + b.len];
        // adjacent blocks with equal means share one level
        if k == 0 || m > levels[levels.len() - 1] {
            if k > 0 {
                taus.push(ts[first]);
            }
            levels.push(m);
        }
        fitted.extend(std::iter::repeat_n(m, last - first));
        g += b.len;
    }
    MonotoneFit { projection, fitted, step: StepFunction { taus, levels } }
}

pub fn fit_monotone(sample: &Sample, alpha: &[f64]) -> Result<MonotoneFit> {
    Ok(fit_projection(project_sample(sample, alpha)?))
}

/// Nondecreasing least squares link estimate for the index `alpha' x`.
pub fn fit_monotone_ls(sample: &Sample, alpha: &[f64]) -> Result<StepFunction> {
    Ok(fit_monotone(sample, alpha)?.step)
}
