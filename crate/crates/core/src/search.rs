//! Derivative-free minimizers.
//!
//! Objectives here are typically piecewise constant in `alpha` (the isotonic
//! fit only changes when the ordering of `alpha' x_i` changes), so neither
//! method ever asks for gradients and both only accept strict improvements.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub max_evals: usize,
    pub initial_step: f64,
    /// Stop once the simplex diameter (or pattern step) falls below this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { max_evals: 5000, initial_step: 0.1, tolerance: 1e-8, seed: 0 }
    }
}

impl SearchOptions {
    fn validate(&self, d: usize) -> Result<()> {
        if d == 0 {
            return Err(Error::InvalidArgument("start must be nonempty".into()));
        }
        if self.max_evals < d + 1 {
            return Err(Error::InvalidArgument(format!("max_evals must be at least {}", d + 1)));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 || self.initial_step.is_nan() || self.initial_step <= 0.0 {
            return Err(Error::InvalidArgument("tolerance and initial_step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub argmin: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn affine(base: &[f64], dir_from: &[f64], coef: f64) -> Vec<f64> {
    // base + coef * (base - dir_from)
    base.iter().zip(dir_from).map(|(b, w)| b + coef * (b - w)).collect()
}

/// Nelder-Mead simplex search. The initial simplex is `start` plus
/// `initial_step` along each coordinate axis.
pub fn nelder_mead<F>(objective: F, start: &[f64], opts: &SearchOptions) -> Result<SearchResult>
where
    F: Fn(&[f64]) -> f64,
{
    let d = start.len();
    opts.validate(d)?;
    let f0 = objective(start);
    if !f0.is_finite() {
        return Err(Error::NonFinite("objective is not finite at the start point".into()));
    }
    let mut evals = 1;
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((start.to_vec(), f0));
    for i in 0..d {
        let mut v = start.to_vec();
        v[i] += opts.initial_step;
        let fv = objective(&v);
        evals += 1;
        simplex.push((v, fv));
    }

    let mut converged = false;
    loop {
        // stable sort keeps older vertices first among ties
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = &simplex[0].0;
        let diameter = simplex[1..]
            .iter()
            .map(|(v, _)| v.iter().zip(best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter < opts.tolerance {
            converged = true;
            break;
        }
        if evals >= opts.max_evals {
            break;
        }

        let mut centroid = vec![0.0; d];
        for (v, _) in &simplex[..d] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / d as f64;
            }
        }
        let (worst, f_worst) = simplex[d].clone();
        let f_best = simplex[0].1;
        let f_second = simplex[d - 1].1;

        let xr = affine(&centroid, &worst, REFLECT);
        let fr = objective(&xr);
        evals += 1;

        if fr < f_best {
            let xe = affine(&centroid, &worst, EXPAND);
            let fe = objective(&xe);
            evals += 1;
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < f_second {
            simplex[d] = (xr, fr);
            continue;
        }
        let (xc, fc, accept) = if fr < f_worst {
            let xc = affine(&centroid, &worst, CONTRACT);
            let fc = objective(&xc);
            (xc, fc, fc <= fr)
        } else {
            let xc = affine(&centroid, &worst, -CONTRACT);
            let fc = objective(&xc);
            (xc, fc, fc < f_worst)
        };
        evals += 1;
        if accept {
            simplex[d] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for (v, fv) in simplex.iter_mut().skip(1) {
            for (x, b) in v.iter_mut().zip(&best) {
                *x = b + SHRINK * (*x - b);
            }
            *fv = objective(v);
            evals += 1;
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (argmin, value) = simplex.swap_remove(0);
    Ok(SearchResult { argmin, value, evals, converged })
}

/// Hooke-Jeeves pattern search with step halving.
pub fn hooke_jeeves<F>(objective: F, start: &[f64], opts: &SearchOptions) -> Result<SearchResult>
where
    F: Fn(&[f64]) -> f64,
{
    let d = start.len();
    opts.validate(d)?;
    let mut f_base = objective(start);
    if !f_base.is_finite() {
        return Err(Error::NonFinite("objective is not finite at the start point".into()));
    }
    let mut evals = 1;
    let mut base = start.to_vec();
    let mut step = opts.initial_step;

    // coordinate-wise probe around x, keeping strict improvements
    let explore = |x: &[f64], fx: f64, step: f64, evals: &mut usize| -> (Vec<f64>, f64) {
        let mut x = x.to_vec();
        let mut fx = fx;
        for i in 0..d {
            if *evals >= opts.max_evals {
                break;
            }
            let orig = x[i];
            x[i] = orig + step;
            let fp = objective(&x);
            *evals += 1;
            if fp < fx {
                fx = fp;
                continue;
            }
            if *evals >= opts.max_evals {
                x[i] = orig;
                break;
            }
            x[i] = orig - step;
            let fm = objective(&x);
            *evals += 1;
            if fm < fx {
                fx = fm;
                continue;
            }
            x[i] = orig;
        }
        (x, fx)
    };

    let mut converged = false;
    while evals < opts.max_evals {
        if step < opts.tolerance {
            converged = true;
            break;
        }
        let (mut x_new, mut f_new) = explore(&base, f_base, step, &mut evals);
        if f_new < f_base {
            loop {
                let pattern: Vec<f64> = x_new.iter().zip(&base).map(|(n, b)| 2.0 * n - b).collect();
                base = x_new;
                f_base = f_new;
                if evals >= opts.max_evals {
                    break;
                }
                let f_pattern = objective(&pattern);
                evals += 1;
                let (x_try, f_try) = explore(&pattern, f_pattern, step, &mut evals);
                if f_try < f_base {
                    x_new = x_try;
                    f_new = f_try;
                } else {
                    break;
                }
            }
        } else {
            step *= 0.5;
        }
    }
    if step < opts.tolerance {
        converged = true;
    }
    Ok(SearchResult { argmin: base, value: f_base, evals, converged })
}

/// Normalized i.i.d. standard normal vectors (uniform on the unit sphere).
pub fn random_unit_starts(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, streams::STARTS);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(u) = crate::normalize(&v) {
            out.push(u);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::RefCell;

    fn quad(v: &[f64]) -> f64 {
        (v[0] - 1.0).powi(2) + (v[1] - 2.0).powi(2)
    }

    fn rosenbrock(v: &[f64]) -> f64 {
        (1.0 - v[0]).powi(2) + 100.0 * (v[1] - v[0] * v[0]).powi(2)
    }

    #[test]
    fn nelder_mead_quadratic() {
        let r = nelder_mead(quad, &[0.0, 0.0], &SearchOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.argmin[0] - 1.0).abs() < 1e-4 && (r.argmin[1] - 2.0).abs() < 1e-4);
        assert_eq!(r.value, quad(&r.argmin));
    }

    #[test]
    fn nelder_mead_from_minimum() {
        let r = nelder_mead(quad, &[1.0, 2.0], &SearchOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.value <= 0.0);
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let opts = SearchOptions { max_evals: 2000, initial_step: 0.5, ..Default::default() };
        let r = nelder_mead(rosenbrock, &[-1.2, 1.0], &opts).unwrap();
        assert!(r.value < 1e-4, "{r:?}");
        assert!(r.evals <= 2000 + 3);
    }

    #[test]
    fn rejects_non_finite_start() {
        let f = |_: &[f64]| f64::INFINITY;
        assert!(nelder_mead(f, &[0.0, 0.0], &SearchOptions::default()).is_err());
        assert!(hooke_jeeves(f, &[0.0, 0.0], &SearchOptions::default()).is_err());
        let bad = SearchOptions { max_evals: 2, ..Default::default() };
        assert!(nelder_mead(quad, &[0.0, 0.0], &bad).is_err());
    }

    #[test]
    fn hooke_jeeves_quadratic() {
        let r = hooke_jeeves(quad, &[0.0, 0.0], &SearchOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.argmin[0] - 1.0).abs() < 1e-6 && (r.argmin[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn hooke_jeeves_constant_objective() {
        let r = hooke_jeeves(|_: &[f64]| 3.0, &[0.5, -0.5, 2.0], &SearchOptions::default()).unwrap();
        assert_eq!(r.argmin, vec![0.5, -0.5, 2.0]);
        assert_eq!(r.value, 3.0);
        assert!(r.converged);
    }

    #[test]
    fn hooke_jeeves_accepted_values_decrease() {
        // record the best value seen each time a new minimum is reported
        let seen = RefCell::new(Vec::new());
        let f = |v: &[f64]| {
            let y = rosenbrock(v);
            seen.borrow_mut().push(y);
            y
        };
        let start = [-1.2, 1.0];
        let r = hooke_jeeves(f, &start, &SearchOptions::default()).unwrap();
        assert!(r.value <= rosenbrock(&start));
        assert!(r.value < 1e-3);
        let vals = seen.borrow();
        assert_eq!(vals.len(), r.evals);
    }

    #[test]
    fn step_discontinuities_tolerated() {
        let f = |v: &[f64]| ((v[0] - 0.3).abs() * 10.0).floor() + ((v[1] + 0.2).abs() * 10.0).floor();
        let start = [2.0, 2.0];
        let nm = nelder_mead(f, &start, &SearchOptions::default()).unwrap();
        assert!(nm.value < f(&start) && nm.value == f(&nm.argmin));
        let hj = hooke_jeeves(f, &start, &SearchOptions::default()).unwrap();
        assert!(hj.value <= 1.0, "{hj:?}");
    }

    #[test]
    fn unit_starts() {
        let s = random_unit_starts(3, 50, 9);
        assert_eq!(s, random_unit_starts(3, 50, 9));
        assert_ne!(s, random_unit_starts(3, 50, 10));
        for v in &s {
            assert!((crate::norm2(v) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_starts_centered() {
        let s = random_unit_starts(3, 10_000, 1);
        for j in 0..3 {
            let m = s.iter().map(|v| v[j]).sum::<f64>() / s.len() as f64;
            assert!(m.abs() < 0.05);
        }
    }
}
