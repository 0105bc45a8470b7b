//! Samples, the simulation model, and projections onto an index direction.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};

/// Covariates (row-major `n x d`) and responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    d: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Sample {
    /// Builds a sample from a flat row-major covariate buffer.
    pub fn from_flat(d: usize, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidSample(format!("dimension must be at least 2, got {d}")));
        }
        let n = ys.len();
        if n < 2 {
            return Err(Error::InvalidSample(format!("need at least 2 observations, got {n}")));
        }
        if xs.len() != n * d {
            return Err(Error::InvalidSample(format!("covariate buffer has {} entries, expected {n} x {d}", xs.len())));
        }
        if let Some(i) = xs.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidSample(format!("non-finite covariate in row {}", i / d)));
        }
        if let Some(i) = ys.iter().position(|y| !y.is_finite()) {
            return Err(Error::InvalidSample(format!("non-finite response in row {i}")));
        }
        Ok(Sample { d, xs, ys })
    }

    pub fn from_rows(rows: &[Vec<f64>], ys: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.len() != ys.len() {
            return Err(Error::InvalidSample(format!("{} covariate rows but {} responses", rows.len(), ys.len())));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::InvalidSample(format!("row {i} has inconsistent length")));
        }
        Self::from_flat(d, rows.concat(), ys)
    }

    pub fn n(&self) -> usize {
        self.ys.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.xs[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.xs.chunks_exact(self.d)
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    /// Same covariates, responses replaced.
    pub fn with_responses(&self, ys: Vec<f64>) -> Result<Self> {
        Self::from_flat(self.d, self.xs.clone(), ys)
    }

    /// Projected values `alpha' x_i` in sample order.
    pub fn project_values(&self, alpha: &[f64]) -> Vec<f64> {
        self.rows().map(|r| crate::dot(r, alpha)).collect()
    }
}

/// Link functions available for simulated data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Cubic,
    Identity,
}

impl Link {
    pub fn value(self, u: f64) -> f64 {
        match self {
            Link::Cubic => u * u * u,
            Link::Identity => u,
        }
    }

    pub fn derivative(self, u: f64) -> f64 {
        match self {
            Link::Cubic => 3.0 * u * u,
            Link::Identity => 1.0,
        }
    }
}

/// Fills one covariate row.
pub type CovariateSampler = Arc<dyn Fn(&mut dyn RngCore, &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub enum CovariateLaw {
    /// I.i.d. standard normal coordinates.
    StandardNormal,
    Custom(CovariateSampler),
}

impl CovariateLaw {
    pub fn fill(&self, rng: &mut dyn RngCore, row: &mut [f64]) {
        match self {
            CovariateLaw::StandardNormal => {
                for x in row.iter_mut() {
                    *x = rng.sample(StandardNormal);
                }
            }
            CovariateLaw::Custom(f) => f(rng, row),
        }
    }
}

impl fmt::Debug for CovariateLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovariateLaw::StandardNormal => f.write_str("StandardNormal"),
            CovariateLaw::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// `Y = link(alpha0' X) + noise_sd * eps`, `eps ~ N(0, 1)` independent of `X`.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    alpha0: Vec<f64>,
    pub link: Link,
    pub noise_sd: f64,
    pub covariate_law: CovariateLaw,
}

impl ModelSpec {
    pub fn new(alpha0: Vec<f64>, link: Link, noise_sd: f64, covariate_law: CovariateLaw) -> Result<Self> {
        if alpha0.len() < 2 {
            return Err(Error::InvalidModel("alpha0 needs at least 2 coordinates".into()));
        }
        let nrm = crate::norm2(&alpha0);
        if !nrm.is_finite() || (nrm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("alpha0 must have unit norm, got {nrm}")));
        }
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(Error::InvalidModel(format!("noise_sd must be nonnegative, got {noise_sd}")));
        }
        Ok(ModelSpec { alpha0, link, noise_sd, covariate_law })
    }

    /// Cubic link, standard normal covariates and noise, `alpha0 = (1, ..., 1) / sqrt(d)`.
    pub fn cubic_normal(d: usize) -> Result<Self> {
        let a = 1.0 / (d as f64).sqrt();
        Self::new(vec![a; d], Link::Cubic, 1.0, CovariateLaw::StandardNormal)
    }

    pub fn alpha0(&self) -> &[f64] {
        &self.alpha0
    }

    pub fn d(&self) -> usize {
        self.alpha0.len()
    }
}

/// Draws `n` observations from `spec`. Row `i` consumes `d` covariate draws
/// followed by one noise draw from the sample stream of `seed`.
pub fn generate_sample(spec: &ModelSpec, n: usize, seed: u64) -> Result<Sample> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("n must be at least 2, got {n}")));
    }
    let d = spec.d();
    let mut rng = stream_rng(seed, streams::SAMPLE);
    let mut xs = vec![0.0; n * d];
    let mut ys = Vec::with_capacity(n);
    for row in xs.chunks_exact_mut(d) {
        spec.covariate_law.fill(&mut rng, row);
        let eps: f64 = rng.sample(StandardNormal);
        ys.push(spec.link.value(crate::dot(row, &spec.alpha0)) + spec.noise_sd * eps);
    }
    Sample::from_flat(d, xs, ys)
}

/// Closed form of `E{alpha0' X | alpha' X = u}` for the three-dimensional
/// cubic-normal model with `alpha0 = (1, 1, 1) / sqrt(3)`; the cubic link
/// turns this into `E{psi0(alpha0' X) | alpha' X = u}`.
pub fn psi_alpha_oracle(alpha: &[f64], u: f64) -> Result<f64> {
    if alpha.len() != 3 {
        return Err(Error::InvalidArgument(format!("closed form exists only for d = 3, got d = {}", alpha.len())));
    }
    let sum: f64 = alpha.iter().sum();
    let sq: f64 = alpha.iter().map(|a| a * a).sum();
    if (sq.sqrt() - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument("alpha must have unit norm".into()));
    }
    let cross = alpha[0] * alpha[1] + alpha[0] * alpha[2] + alpha[1] * alpha[2];
    let num = sum * u * (6.0 * sq * (sq - cross) + sum * sum * u * u);
    Ok(num / (3.0 * 3f64.sqrt() * sq.powi(3)))
}

/// Sample sorted along an index direction.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexProjection {
    /// `order[k]` is the sample row with the `k`-th smallest projection.
    pub order: Vec<usize>,
    pub ts: Vec<f64>,
    pub ys_ordered: Vec<f64>,
}

/// Sorts `alpha' x_i` ascending; ties keep sample order.
pub fn project_sample(sample: &Sample, alpha: &[f64]) -> Result<IndexProjection> {
    if alpha.len() != sample.d() {
        return Err(Error::InvalidArgument(format!(
            "alpha has {} coordinates, sample has d = {}",
            alpha.len(),
            sample.d()
        )));
    }
    let nrm = crate::norm2(alpha);
    if !(nrm > 0.0 && nrm.is_finite()) {
        return Err(Error::InvalidArgument("alpha must be a nonzero finite vector".into()));
    }
    let values = sample.project_values(alpha);
    let mut order: Vec<usize> = (0..sample.n()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let ts = order.iter().map(|&i| values[i]).collect();
    let ys_ordered = order.iter().map(|&i| sample.ys()[i]).collect();
    Ok(IndexProjection { order, ts, ys_ordered })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn sample_var(v: &[f64]) -> f64 {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        v.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1.0)
    }

    #[test]
    fn sample_validation() {
        assert!(Sample::from_flat(1, vec![1.0, 2.0], vec![1.0, 2.0]).is_err());
        assert!(Sample::from_flat(2, vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(Sample::from_flat(2, vec![1.0; 3], vec![1.0, 2.0]).is_err());
        assert!(Sample::from_flat(2, vec![1.0, f64::NAN, 0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(Sample::from_flat(2, vec![1.0; 4], vec![1.0, f64::INFINITY]).is_err());
        let s = Sample::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]], vec![0.5, 0.6]).unwrap();
        assert_eq!(s.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn spec_rejects_non_unit_alpha() {
        assert!(ModelSpec::new(vec![1.0, 1.0], Link::Cubic, 1.0, CovariateLaw::StandardNormal).is_err());
        assert!(ModelSpec::new(vec![1.0, 0.0], Link::Cubic, -1.0, CovariateLaw::StandardNormal).is_err());
        assert!(ModelSpec::cubic_normal(3).is_ok());
    }

    #[test]
    fn noiseless_identity_link_is_exact() {
        let spec = ModelSpec::new(vec![0.6, 0.8], Link::Identity, 0.0, CovariateLaw::StandardNormal).unwrap();
        let s = generate_sample(&spec, 50, 11).unwrap();
        for (row, y) in s.rows().zip(s.ys()) {
            assert_eq!(*y, 0.6 * row[0] + 0.8 * row[1]);
        }
    }

    #[test]
    fn same_seed_same_sample() {
        let spec = ModelSpec::cubic_normal(3).unwrap();
        assert_eq!(generate_sample(&spec, 100, 5).unwrap(), generate_sample(&spec, 100, 5).unwrap());
        assert_ne!(generate_sample(&spec, 100, 5).unwrap(), generate_sample(&spec, 100, 6).unwrap());
    }

    #[test]
    fn response_variance_matches_moment_identity() {
        // Var(Z^3) + 1 = E Z^6 + 1 = 16; sd of the sample variance at this n is about 0.23.
        let spec = ModelSpec::cubic_normal(3).unwrap();
        let s = generate_sample(&spec, 200_000, 1).unwrap();
        assert!((sample_var(s.ys()) - 16.0).abs() < 1.0, "{}", sample_var(s.ys()));
        let small = generate_sample(&spec, 200, 1).unwrap();
        assert_eq!(small.n(), 200);
    }

    #[test]
    fn custom_covariate_law() {
        let law = CovariateLaw::Custom(Arc::new(|rng: &mut dyn RngCore, row: &mut [f64]| {
            for x in row.iter_mut() {
                *x = rng.random_range(-1.0..1.0);
            }
        }));
        let spec = ModelSpec::new(vec![1.0, 0.0], Link::Identity, 0.0, law).unwrap();
        let s = generate_sample(&spec, 30, 2).unwrap();
        assert!(s.rows().all(|r| r.iter().all(|x| x.abs() <= 1.0)));
        assert_eq!(s.ys()[3], s.row(3)[0]);
    }

    #[test]
    fn oracle_collapses_to_cube_at_alpha0() {
        let a = 1.0 / 3f64.sqrt();
        for k in 0..=100 {
            let u = -3.0 + 6.0 * k as f64 / 100.0;
            let v = psi_alpha_oracle(&[a, a, a], u).unwrap();
            assert!((v - u * u * u).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_is_odd_and_checks_dimension() {
        assert_eq!(psi_alpha_oracle(&[0.6, 0.8, 0.0], 0.0).unwrap(), 0.0);
        let a = [0.48, 0.6, 0.64];
        assert!((psi_alpha_oracle(&a, 1.3).unwrap() + psi_alpha_oracle(&a, -1.3).unwrap()).abs() < 1e-14);
        assert!(psi_alpha_oracle(&[0.6, 0.8], 1.0).is_err());
        assert!(psi_alpha_oracle(&[1.0, 1.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn oracle_matches_conditional_monte_carlo() {
        // alpha = e1, u = 1: E{((1 + X2 + X3) / sqrt 3)^3}.
        let mut rng = stream_rng(99, 0);
        let m = 400_000;
        let draws: Vec<f64> = (0..m)
            .map(|_| {
                let x2: f64 = rng.sample(StandardNormal);
                let x3: f64 = rng.sample(StandardNormal);
                ((1.0 + x2 + x3) / 3f64.sqrt()).powi(3)
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / m as f64;
        let se = (sample_var(&draws) / m as f64).sqrt();
        let exact = psi_alpha_oracle(&[1.0, 0.0, 0.0], 1.0).unwrap();
        assert!((exact - mean).abs() < 3.0 * se, "exact {exact} mc {mean} se {se}");
    }

    #[test]
    fn projection_orders_and_breaks_ties_by_index() {
        let s = Sample::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![5.0, 6.0]).unwrap();
        let p = project_sample(&s, &[1.0, 0.0]).unwrap();
        assert_eq!(p.order, vec![1, 0]);
        assert_eq!(p.ts, vec![0.0, 1.0]);
        assert_eq!(p.ys_ordered, vec![6.0, 5.0]);
        let h = 1.0 / 2f64.sqrt();
        let tie = project_sample(&s, &[h, h]).unwrap();
        assert_eq!(tie.order, vec![0, 1]);
        assert!(project_sample(&s, &[0.0, 0.0]).is_err());
        assert!(project_sample(&s, &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn positive_scaling_keeps_order() {
        let spec = ModelSpec::cubic_normal(3).unwrap();
        let s = generate_sample(&spec, 300, 4).unwrap();
        let a = [0.3, -0.2, 0.9];
        let base = project_sample(&s, &a).unwrap().order;
        for c in [1e-6, 0.5, 2.0, 1e6] {
            let scaled: Vec<f64> = a.iter().map(|x| c * x).collect();
            assert_eq!(project_sample(&s, &scaled).unwrap().order, base);
        }
    }
}
