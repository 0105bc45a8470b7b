//! Projected score vectors.
//!
//! Each score has the form
//!
//! ```text
//! (1/n) (I - alpha alpha') sum_i {psi(alpha' x_i) - y_i} w_i x_i
//! ```
//!
//! with `psi` the isotonic fit (SSE, `w_i = 1`), the isotonic fit with a
//! kernel estimate of its derivative (ESE), or a smoothing spline with its
//! exact derivative (PLSE). Estimators look for a zero crossing by
//! minimizing the Euclidean norm over `alpha`.

use crate::error::{Error, Result};
use crate::isotonic::{fit_projection, MonotoneFit};
use crate::kernel::derivative_estimates_sorted;
use crate::model::{project_sample, Sample};
use crate::spline::{fit_smoothing_spline, merge_knots, MergedKnots, SplineFit, KNOT_MERGE_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreValue {
    pub vector: Vec<f64>,
    pub norm: f64,
}

impl ScoreValue {
    fn new(vector: Vec<f64>) -> Self {
        let norm = crate::norm2(&vector);
        ScoreValue { vector, norm }
    }
}

/// Which score equation to solve, with its tuning parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreKind {
    Sse,
    /// Kernel bandwidth `h`.
    Ese {
        h: f64,
    },
    /// Spline penalty `mu`.
    Plse {
        mu: f64,
    },
}

fn unit(alpha: &[f64]) -> Result<Vec<f64>> {
    let nrm = crate::norm2(alpha);
    if !nrm.is_finite() || (nrm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!("alpha must have unit norm, got norm {nrm}")));
    }
    Ok(alpha.iter().map(|a| a / nrm).collect())
}

/// `v - (alpha' v) alpha`.
pub fn project_orthogonal(alpha: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if alpha.len() != v.len() {
        return Err(Error::InvalidArgument("alpha and v differ in length".into()));
    }
    let a = unit(alpha)?;
    Ok(project_unit(&a, v))
}

fn project_unit(a: &[f64], v: &[f64]) -> Vec<f64> {
    let c = crate::dot(a, v);
    let mut out: Vec<f64> = v.iter().zip(a).map(|(vi, ai)| vi - c * ai).collect();
    // second pass removes the rounding left by the first
    let c2 = crate::dot(a, &out);
    for (o, ai) in out.iter_mut().zip(a) {
        *o -= c2 * ai;
    }
    out
}

/// `(1/n) (I - aa') sum_k r_k w_k x_{order[k]}` over the projection order.
fn assemble(sample: &Sample, a: &[f64], order: &[usize], terms: impl Iterator<Item = f64>) -> ScoreValue {
    let d = sample.d();
    let mut acc = vec![0.0; d];
    for (&i, c) in order.iter().zip(terms) {
        if c != 0.0 {
            for (s, x) in acc.iter_mut().zip(sample.row(i)) {
                *s += c * x;
            }
        }
    }
    let n = sample.n() as f64;
    for s in acc.iter_mut() {
        *s /= n;
    }
    ScoreValue::new(project_unit(a, &acc))
}

fn monotone_at(sample: &Sample, a: &[f64]) -> Result<MonotoneFit> {
    Ok(fit_projection(project_sample(sample, a)?))
}

pub fn sse_score(sample: &Sample, alpha: &[f64]) -> Result<ScoreValue> {
    let a = unit(alpha)?;
    let fit = monotone_at(sample, &a)?;
    let ys = &fit.projection.ys_ordered;
    let terms = fit.fitted.iter().zip(ys).map(|(f, y)| f - y);
    Ok(assemble(sample, &a, &fit.projection.order, terms))
}

pub fn ese_score(sample: &Sample, alpha: &[f64], h: f64) -> Result<ScoreValue> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")));
    }
    let a = unit(alpha)?;
    let fit = monotone_at(sample, &a)?;
    let deriv = derivative_estimates_sorted(&fit.step, &fit.projection.ts, h);
    let ys = &fit.projection.ys_ordered;
    let terms = fit.fitted.iter().zip(ys).zip(&deriv).map(|((f, y), dv)| (f - y) * dv);
    Ok(assemble(sample, &a, &fit.projection.order, terms))
}

pub fn plse_score(sample: &Sample, alpha: &[f64], mu: f64) -> Result<ScoreValue> {
    let a = unit(alpha)?;
    let proj = project_sample(sample, &a)?;
    let (merged, spline) = merged_spline_fit(&proj.ts, &proj.ys_ordered, mu)?;
    let slopes: Vec<f64> = (0..merged.knots.len()).map(|k| spline.derivative_at_knot(k)).collect();
    let g = spline.values();
    let terms = merged.group.iter().zip(&proj.ys_ordered).map(|(&k, y)| (g[k] - y) * slopes[k]);
    Ok(assemble(sample, &a, &proj.order, terms))
}

/// Merge tolerances tried in turn: near-coincident knots (gaps of order
/// 1e-9 of the range) can make the band system numerically indefinite.
const MERGE_ESCALATION: [f64; 3] = [KNOT_MERGE_TOL, 1e-8, 1e-6];

pub(crate) fn merged_spline_fit(ts: &[f64], ys: &[f64], mu: f64) -> Result<(MergedKnots, SplineFit)> {
    let mut last = None;
    for tol in MERGE_ESCALATION {
        let merged = merge_knots(ts, ys, tol);
        if merged.knots.len() < 2 {
            return Err(Error::InvalidArgument("all projected values coincide".into()));
        }
        match fit_smoothing_spline(&merged.knots, &merged.means, &merged.weights, mu) {
            Ok(spline) => return Ok((merged, spline)),
            Err(e @ Error::Singular(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one tolerance tried"))
}

pub fn score(kind: ScoreKind, sample: &Sample, alpha: &[f64]) -> Result<ScoreValue> {
    match kind {
        ScoreKind::Sse => sse_score(sample, alpha),
        ScoreKind::Ese { h } => ese_score(sample, alpha, h),
        ScoreKind::Plse { mu } => plse_score(sample, alpha, mu),
    }
}

/// `alpha -> |score(alpha / |alpha|)|`; `+inf` for (near-)zero or invalid `alpha`.
pub fn score_norm_objective(kind: ScoreKind, sample: &Sample) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
    move |alpha: &[f64]| {
        let nrm = crate::norm2(alpha);
        if !(nrm > 1e-8 && nrm.is_finite()) {
            return f64::INFINITY;
        }
        let a: Vec<f64> = alpha.iter().map(|x| x / nrm).collect();
        match score(kind, sample, &a) {
            Ok(s) if s.norm.is_finite() => s.norm,
            _ => f64::INFINITY,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_sample, ModelSpec};

    fn model_sample(n: usize, seed: u64) -> Sample {
        generate_sample(&ModelSpec::cubic_normal(3).unwrap(), n, seed).unwrap()
    }

    fn all_kinds() -> [ScoreKind; 3] {
        [ScoreKind::Sse, ScoreKind::Ese { h: 0.6 }, ScoreKind::Plse { mu: 0.1 }]
    }

    #[test]
    fn projection_cases() {
        let a = [0.6, 0.8];
        let p = project_orthogonal(&a, &a).unwrap();
        assert!(p.iter().all(|x| x.abs() < 1e-15));
        let perp = project_orthogonal(&a, &[-0.8, 0.6]).unwrap();
        assert!((perp[0] + 0.8).abs() < 1e-15 && (perp[1] - 0.6).abs() < 1e-15);
        assert_eq!(project_orthogonal(&[1.0, 0.0], &[1.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        assert!(project_orthogonal(&[1.0, 1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn constant_response_gives_zero() {
        let s = model_sample(100, 1);
        let c = s.with_responses(vec![2.5; 100]).unwrap();
        let a = crate::normalize(&[1.0, 2.0, -0.5]).unwrap();
        for kind in all_kinds() {
            let sc = score(kind, &c, &a).unwrap();
            assert!(sc.norm < 1e-12, "{kind:?}: {}", sc.norm);
        }
    }

    #[test]
    fn constant_isotonic_fit_annihilates_ese() {
        // responses decreasing along the index pool into one block: no jumps, no derivative mass
        let s = model_sample(80, 2);
        let a = crate::normalize(&[1.0, 0.0, 0.0]).unwrap();
        let ys: Vec<f64> = s.rows().map(|r| -r[0]).collect();
        let s = s.with_responses(ys).unwrap();
        assert!(sse_score(&s, &a).unwrap().norm > 1e-3);
        assert_eq!(ese_score(&s, &a, 0.5).unwrap().norm, 0.0);
    }

    #[test]
    fn orthogonal_to_alpha() {
        let s = model_sample(150, 3);
        for (k, raw) in [[0.3, 0.9, -0.2], [1.0, 1.0, 1.0], [-0.7, 0.1, 0.4]].iter().enumerate() {
            let a = crate::normalize(raw).unwrap();
            for kind in all_kinds() {
                let sc = score(kind, &s, &a).unwrap();
                assert!(crate::dot(&a, &sc.vector).abs() <= 1e-12, "case {k} {kind:?}");
            }
        }
    }

    #[test]
    fn sse_ignores_response_shift() {
        let s = model_sample(120, 4);
        let shifted = s.with_responses(s.ys().iter().map(|y| y + 7.0).collect()).unwrap();
        let a = crate::normalize(&[0.5, 0.6, 0.7]).unwrap();
        let x = sse_score(&s, &a).unwrap();
        let y = sse_score(&shifted, &a).unwrap();
        for (u, v) in x.vector.iter().zip(&y.vector) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn row_permutation_invariance() {
        let s = model_sample(90, 5);
        let n = s.n();
        let perm: Vec<usize> = (0..n).map(|i| (i * 37 + 11) % n).collect();
        let rows: Vec<Vec<f64>> = perm.iter().map(|&i| s.row(i).to_vec()).collect();
        let ys: Vec<f64> = perm.iter().map(|&i| s.ys()[i]).collect();
        let p = Sample::from_rows(&rows, ys).unwrap();
        let a = crate::normalize(&[0.2, 0.3, 0.9]).unwrap();
        for kind in all_kinds() {
            let u = score(kind, &s, &a).unwrap();
            let v = score(kind, &p, &a).unwrap();
            for (x, y) in u.vector.iter().zip(&v.vector) {
                assert!((x - y).abs() < 1e-12, "{kind:?}");
            }
        }
    }

    #[test]
    fn objective_scale_free_and_nonnegative() {
        let s = model_sample(100, 6);
        for kind in all_kinds() {
            let f = score_norm_objective(kind, &s);
            let a = [0.4, -0.1, 0.8];
            let a2: Vec<f64> = a.iter().map(|x| 2.0 * x).collect();
            assert!(f(&a) >= 0.0);
            assert!((f(&a) - f(&a2)).abs() <= 1e-13 * (1.0 + f(&a)));
            assert_eq!(f(&[0.0, 0.0, 0.0]), f64::INFINITY);
        }
    }

    #[test]
    fn rejects_non_unit_alpha() {
        let s = model_sample(50, 7);
        assert!(sse_score(&s, &[1.0, 1.0, 1.0]).is_err());
        assert!(ese_score(&s, &[1.0, 0.0, 0.0], 0.0).is_err());
        assert!(plse_score(&s, &[1.0, 0.0, 0.0], 0.0).is_err());
    }
}
