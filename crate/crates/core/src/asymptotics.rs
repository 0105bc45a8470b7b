//! Limiting covariance matrices of `sqrt(n) (alpha_hat - alpha0)`.
//!
//! - SSE: `A^- S A^-` with `A = E[psi0'(U) Cov(X|U)]` and
//!   `S = E[(Y - psi0(U))^2 (X - E(X|U))(X - E(X|U))']`,
//! - ESE / PLSE: the same with `psi0'(U)^2` inside both matrices,
//! - linear: `c^-2 (I - P) Sigma^-1 G Sigma^-1 (I - P)` with `P = alpha0 alpha0'`,
//!
//! where `U = alpha0' X` and `^-` is the Moore-Penrose inverse. For
//! standard normal covariates `E(X|U) = alpha0 U` and `Cov(X|U) = I - P`
//! exactly, so only scalar expectations over `U` are simulated. Other
//! covariate laws fall back to conditional moments estimated in
//! equal-count bins of `U`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{CovariateLaw, ModelSpec};
use crate::rng::{derive_seed, stream_rng, streams};

/// Symmetric real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

/// Largest asymmetry accepted by [`SymMatrix::new`], relative to the largest entry.
pub const SYMMETRY_TOL: f64 = 1e-10;

impl SymMatrix {
    /// Accepts square finite matrices with `|m - m'| <= 1e-10 max|m|`, storing
    /// the exactly symmetric part.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidArgument("matrix must be square".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("matrix entries must be finite".into()));
        }
        let scale = m.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let asym = (&m - m.transpose()).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::InvalidArgument(format!("matrix is not symmetric (asymmetry {asym:.3e})")));
        }
        Ok(SymMatrix((&m + m.transpose()) * 0.5))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidArgument("matrix must be square".into()));
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|i| self.0.row(i).iter().copied().collect()).collect()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.0.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Number of eigenvalues above `tol` times the largest absolute eigenvalue.
    pub fn rank(&self, tol: f64) -> usize {
        let ev = self.eigenvalues();
        let top = ev.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if top == 0.0 {
            return 0;
        }
        ev.iter().filter(|v| v.abs() > tol * top).count()
    }
}

/// Default relative eigenvalue cutoff of [`moore_penrose_psd`].
pub const PINV_TOL: f64 = 1e-10;

/// Moore-Penrose inverse via the spectral decomposition; eigenvalues at or
/// below `tol` times the largest absolute eigenvalue are treated as zero.
pub fn moore_penrose_psd(m: &SymMatrix, tol: f64) -> SymMatrix {
    let eig = m.0.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let inv = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| if top > 0.0 && l.abs() > tol * top { 1.0 / l } else { 0.0 }),
    );
    let q = &eig.eigenvectors;
    let out = q * DMatrix::from_diagonal(&inv) * q.transpose();
    SymMatrix((&out + out.transpose()) * 0.5)
}

fn sandwich(a: &SymMatrix, s: &SymMatrix) -> SymMatrix {
    let ai = moore_penrose_psd(a, PINV_TOL);
    let out = &ai.0 * &s.0 * &ai.0;
    SymMatrix((&out + out.transpose()) * 0.5)
}

fn projector_complement(alpha0: &[f64]) -> DMatrix<f64> {
    let d = alpha0.len();
    DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { 0.0 } - alpha0[i] * alpha0[j])
}

const CHUNK: usize = 1 << 16;

/// Power sums of `U ~ N(0,1)` draws pushed through the link.
#[derive(Debug, Clone, Copy, Default)]
struct IndexMoments {
    count: f64,
    dpsi: f64,
    dpsi2: f64,
    u: f64,
    u2: f64,
    u3: f64,
    u4: f64,
    psi: f64,
    psi2: f64,
    psi_u: f64,
    psi_u2: f64,
    psi_u3: f64,
    psi2_u2: f64,
}

impl IndexMoments {
    fn add(&mut self, o: &IndexMoments) {
        self.count += o.count;
        self.dpsi += o.dpsi;
        self.dpsi2 += o.dpsi2;
        self.u += o.u;
        self.u2 += o.u2;
        self.u3 += o.u3;
        self.u4 += o.u4;
        self.psi += o.psi;
        self.psi2 += o.psi2;
        self.psi_u += o.psi_u;
        self.psi_u2 += o.psi_u2;
        self.psi_u3 += o.psi_u3;
        self.psi2_u2 += o.psi2_u2;
    }

    fn mean(self) -> IndexMoments {
        let c = self.count;
        IndexMoments {
            count: 1.0,
            dpsi: self.dpsi / c,
            dpsi2: self.dpsi2 / c,
            u: self.u / c,
            u2: self.u2 / c,
            u3: self.u3 / c,
            u4: self.u4 / c,
            psi: self.psi / c,
            psi2: self.psi2 / c,
            psi_u: self.psi_u / c,
            psi_u2: self.psi_u2 / c,
            psi_u3: self.psi_u3 / c,
            psi2_u2: self.psi2_u2 / c,
        }
    }
}

/// Chunked Monte Carlo over `U ~ N(0,1)`; chunk `k` uses its own stream, and
/// chunk sums are added in index order, so the result does not depend on
/// how chunks are scheduled.
fn index_moments(spec: &ModelSpec, mc: usize, seed: u64) -> IndexMoments {
    let chunks = mc.div_ceil(CHUNK);
    let link = spec.link;
    let parts: Vec<IndexMoments> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(derive_seed(seed, k as u64), streams::ASYMPTOTICS);
            let len = CHUNK.min(mc - k * CHUNK);
            let mut m = IndexMoments::default();
            for _ in 0..len {
                let u: f64 = rng.sample(StandardNormal);
                let p = link.value(u);
                let dp = link.derivative(u);
                let u2 = u * u;
                m.count += 1.0;
                m.dpsi += dp;
                m.dpsi2 += dp * dp;
                m.u += u;
                m.u2 += u2;
                m.u3 += u2 * u;
                m.u4 += u2 * u2;
                m.psi += p;
                m.psi2 += p * p;
                m.psi_u += p * u;
                m.psi_u2 += p * u2;
                m.psi_u3 += p * u2 * u;
                m.psi2_u2 += p * p * u2;
            }
            m
        })
        .collect();
    let mut total = IndexMoments::default();
    for p in &parts {
        total.add(p);
    }
    total.mean()
}

/// Conditional moments of `X` given `U = alpha0' X`, estimated in
/// equal-count bins of `U` from covariate draws of a generic law.
struct BinnedDraws {
    xs: Vec<Vec<f64>>,
    us: Vec<f64>,
    eps: Vec<f64>,
    /// Residual `X - E(X | bin)` for each draw.
    resid: Vec<Vec<f64>>,
}

pub const CONDITIONAL_BINS: usize = 200;

fn binned_draws(spec: &ModelSpec, mc: usize, seed: u64) -> BinnedDraws {
    let d = spec.d();
    let mut rng = stream_rng(seed, streams::ASYMPTOTICS);
    let mut xs = Vec::with_capacity(mc);
    let mut eps = Vec::with_capacity(mc);
    for _ in 0..mc {
        let mut row = vec![0.0; d];
        spec.covariate_law.fill(&mut rng, &mut row);
        xs.push(row);
        eps.push(rng.sample::<f64, _>(StandardNormal));
    }
    let us: Vec<f64> = xs.iter().map(|x| crate::dot(x, spec.alpha0())).collect();
    let mut order: Vec<usize> = (0..mc).collect();
    order.sort_by(|&a, &b| us[a].total_cmp(&us[b]));
    let bins = CONDITIONAL_BINS.min(mc);
    let mut resid = vec![vec![0.0; d]; mc];
    for b in 0..bins {
        let lo = b * mc / bins;
        let hi = (b + 1) * mc / bins;
        let mut mean = vec![0.0; d];
        for &i in &order[lo..hi] {
            for (m, x) in mean.iter_mut().zip(&xs[i]) {
                *m += x / (hi - lo) as f64;
            }
        }
        for &i in &order[lo..hi] {
            resid[i] = xs[i].iter().zip(&mean).map(|(x, m)| x - m).collect();
        }
    }
    BinnedDraws { xs, us, eps, resid }
}

fn outer_mean<'a>(vs: impl Iterator<Item = (&'a Vec<f64>, f64)>, d: usize, count: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    for (v, w) in vs {
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] += w * v[i] * v[j];
            }
        }
    }
    m / count as f64
}

fn check_mc(mc: usize) -> Result<()> {
    if mc < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 Monte Carlo draws, got {mc}")));
    }
    Ok(())
}

fn score_matrices(spec: &ModelSpec, mc: usize, seed: u64, power: i32) -> Result<(SymMatrix, SymMatrix)> {
    check_mc(mc)?;
    let d = spec.d();
    let sigma2 = spec.noise_sd * spec.noise_sd;
    let (a, s) = match spec.covariate_law {
        CovariateLaw::StandardNormal => {
            let m = index_moments(spec, mc, seed);
            // SSE: A weighted by psi0', S unweighted; ESE: psi0'^2 in both
            let (wa, ws) = if power == 1 { (m.dpsi, 1.0) } else { (m.dpsi2, m.dpsi2) };
            let q = projector_complement(spec.alpha0());
            (&q * wa, &q * (ws * sigma2))
        }
        CovariateLaw::Custom(_) => {
            let b = binned_draws(spec, mc, seed);
            let link = spec.link;
            let weight = |u: f64| link.derivative(u).powi(power);
            let s_weight = |u: f64| link.derivative(u).powi(2 * (power - 1));
            let a = outer_mean(b.resid.iter().zip(&b.us).map(|(r, &u)| (r, weight(u))), d, mc);
            let s = outer_mean(
                b.resid.iter().zip(&b.us).zip(&b.eps).map(|((r, &u), e)| (r, sigma2 * e * e * s_weight(u))),
                d,
                mc,
            );
            // binning leaves a spurious alpha0 component that the pseudo-inverse would amplify
            let q = projector_complement(spec.alpha0());
            (&q * a * &q, &q * s * &q)
        }
    };
    let a = SymMatrix::new(a)?;
    let rank = a.rank(PINV_TOL);
    if rank < d - 1 {
        return Err(Error::RankDeficient(format!("information matrix has rank {rank}, need at least {}", d - 1)));
    }
    Ok((a, SymMatrix::new(s)?))
}

/// Limiting covariance of the simple score estimator.
pub fn asymptotic_cov_sse(spec: &ModelSpec, mc_samples: usize, seed: u64) -> Result<SymMatrix> {
    let (a, s) = score_matrices(spec, mc_samples, seed, 1)?;
    Ok(sandwich(&a, &s))
}

/// Limiting covariance of the efficient score and penalized least squares estimators.
pub fn asymptotic_cov_ese(spec: &ModelSpec, mc_samples: usize, seed: u64) -> Result<SymMatrix> {
    let (a, s) = score_matrices(spec, mc_samples, seed, 2)?;
    Ok(sandwich(&a, &s))
}

/// The two candidate expressions for the linear estimator's limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearVariant {
    /// `c^-2 (I-P) Sigma^-1 G Sigma^-1 (I-P)` with
    /// `G = E(Y^2 X X') - (E Y X)(E Y X)'`.
    PaperFormula,
    /// Least squares sandwich with the population regression residual
    /// `Y - E Y - c alpha0'(X - mu)` in place of `Y`.
    Sandwich,
}

impl std::str::FromStr for LinearVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper_formula" | "paper-formula" => Ok(LinearVariant::PaperFormula),
            "sandwich" => Ok(LinearVariant::Sandwich),
            _ => Err(Error::InvalidArgument(format!("unknown variant '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearAsymptotics {
    pub cov: SymMatrix,
    /// `Cov(psi0(U), U) / (alpha0' Sigma alpha0)`.
    pub c: f64,
}

pub fn asymptotic_cov_linear(
    spec: &ModelSpec,
    mc_samples: usize,
    seed: u64,
    variant: LinearVariant,
) -> Result<LinearAsymptotics> {
    check_mc(mc_samples)?;
    let d = spec.d();
    let alpha0 = DVector::from_column_slice(spec.alpha0());
    let p = &alpha0 * alpha0.transpose();
    let q = projector_complement(spec.alpha0());
    let sigma2 = spec.noise_sd * spec.noise_sd;

    // (Sigma, c, middle matrix)
    let (cov_x, c, middle) = match spec.covariate_law {
        CovariateLaw::StandardNormal => {
            // X = alpha0 U + W with W ~ N(0, I - P) independent of (U, eps)
            let m = index_moments(spec, mc_samples, seed);
            let c = m.psi_u - m.psi * m.u;
            let ey2 = m.psi2 + sigma2;
            let middle = match variant {
                LinearVariant::PaperFormula => {
                    let ey2u2 = m.psi2_u2 + sigma2 * m.u2;
                    let eyu = m.psi_u;
                    &p * (ey2u2 - eyu * eyu) + &q * ey2
                }
                LinearVariant::Sandwich => {
                    // r = psi(U) - E psi - c U, plus independent noise
                    let e = m.psi;
                    let r2 = m.psi2 - 2.0 * e * m.psi + e * e - 2.0 * c * m.psi_u + 2.0 * c * e * m.u + c * c * m.u2;
                    let r2u2 = m.psi2_u2 - 2.0 * e * m.psi_u2 - 2.0 * c * m.psi_u3
                        + e * e * m.u2
                        + 2.0 * c * e * m.u3
                        + c * c * m.u4;
                    &p * (r2u2 + sigma2 * m.u2) + &q * (r2 + sigma2)
                }
            };
            (DMatrix::identity(d, d), c, middle)
        }
        CovariateLaw::Custom(_) => {
            let b = binned_draws(spec, mc_samples, seed);
            let n = mc_samples as f64;
            let mu: Vec<f64> = (0..d).map(|j| b.xs.iter().map(|x| x[j]).sum::<f64>() / n).collect();
            let centered: Vec<Vec<f64>> =
                b.xs.iter().map(|x| x.iter().zip(&mu).map(|(a, m)| a - m).collect()).collect();
            let cov_x = outer_mean(centered.iter().map(|v| (v, 1.0)), d, mc_samples);
            let ys: Vec<f64> = b.us.iter().zip(&b.eps).map(|(&u, e)| spec.link.value(u) + spec.noise_sd * e).collect();
            let psis: Vec<f64> = b.us.iter().map(|&u| spec.link.value(u)).collect();
            let ubar = b.us.iter().sum::<f64>() / n;
            let pbar = psis.iter().sum::<f64>() / n;
            let cov_pu = psis.iter().zip(&b.us).map(|(p, u)| (p - pbar) * (u - ubar)).sum::<f64>() / n;
            let var_u = (alpha0.transpose() * &cov_x * &alpha0)[(0, 0)];
            let c = cov_pu / var_u;
            let middle = match variant {
                LinearVariant::PaperFormula => {
                    let exy: Vec<f64> =
                        (0..d).map(|j| b.xs.iter().zip(&ys).map(|(x, y)| y * x[j]).sum::<f64>() / n).collect();
                    let e = DVector::from_vec(exy);
                    outer_mean(b.xs.iter().zip(&ys).map(|(x, y)| (x, y * y)), d, mc_samples) - &e * e.transpose()
                }
                LinearVariant::Sandwich => {
                    let ybar = ys.iter().sum::<f64>() / n;
                    let w: Vec<f64> = ys.iter().zip(&b.us).map(|(y, u)| (y - ybar - c * (u - ubar)).powi(2)).collect();
                    outer_mean(centered.iter().zip(w), d, mc_samples)
                }
            };
            (cov_x, c, middle)
        }
    };
    if c.is_nan() || c <= 0.0 {
        return Err(Error::InvalidModel(format!(
            "covariance constant c = {c} is not positive; the link must be nondecreasing and non-constant"
        )));
    }
    let sinv =
        cov_x.clone().try_inverse().ok_or_else(|| Error::Singular("covariate covariance matrix is singular".into()))?;
    let v = &q * &sinv * middle * &sinv * &q / (c * c);
    Ok(LinearAsymptotics { cov: SymMatrix::new((&v + v.transpose()) * 0.5)?, c })
}
