//! Natural cubic smoothing splines.
//!
//! The fit minimizes `sum w_i (y_i - f(t_i))^2 + mu * int f''^2` and is
//! computed in the value / second-derivative representation `(g, gamma)`:
//!
//! ```text
//! (R + mu Q' W^-1 Q) gamma = Q' y,    g = y - mu W^-1 Q gamma
//! ```
//!
//! where `Q` (second divided differences, `m x (m-2)`) and `R` (tridiagonal,
//! `(m-2) x (m-2)`) depend only on the knot spacings. The system matrix is
//! symmetric positive definite with bandwidth 2 and is factored as `L D L'`
//! in `O(m)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SplineFit {
    knots: Vec<f64>,
    g: Vec<f64>,
    gamma: Vec<f64>,
    mu: f64,
    weights: Vec<f64>,
}

impl SplineFit {
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Fitted values at the knots.
    pub fn values(&self) -> &[f64] {
        &self.g
    }

    /// Second derivatives at the knots; zero at both ends.
    pub fn second_derivatives(&self) -> &[f64] {
        &self.gamma
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eval(&self, u: f64) -> f64 {
        eval_spline(self, u)
    }

    pub fn derivative(&self, u: f64) -> f64 {
        eval_spline_derivative(self, u)
    }

    /// Exact first derivative at knot `k`.
    pub fn derivative_at_knot(&self, k: usize) -> f64 {
        let m = self.knots.len();
        if k + 1 < m {
            self.right_slope(k)
        } else {
            self.left_slope(m - 2)
        }
    }

    // slope at the left end of interval i
    fn right_slope(&self, i: usize) -> f64 {
        let h = self.knots[i + 1] - self.knots[i];
        (self.g[i + 1] - self.g[i]) / h - h * (2.0 * self.gamma[i] + self.gamma[i + 1]) / 6.0
    }

    // slope at the right end of interval i
    fn left_slope(&self, i: usize) -> f64 {
        let h = self.knots[i + 1] - self.knots[i];
        (self.g[i + 1] - self.g[i]) / h + h * (self.gamma[i] + 2.0 * self.gamma[i + 1]) / 6.0
    }

    fn interval(&self, u: f64) -> usize {
        let m = self.knots.len();
        self.knots.partition_point(|&t| t <= u).clamp(1, m - 1) - 1
    }
}

/// Fits the natural cubic smoothing spline with knots `ts`.
pub fn fit_smoothing_spline(ts: &[f64], ys: &[f64], weights: &[f64], mu: f64) -> Result<SplineFit> {
    let m = ts.len();
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 knots, got {m}")));
    }
    if ys.len() != m || weights.len() != m {
        return Err(Error::InvalidArgument("knots, values and weights must have equal length".into()));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!("penalty must be positive, got {mu}")));
    }
    if ts.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("knots and values must be finite".into()));
    }
    if ts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("knots must be strictly increasing".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidArgument(format!("weights must be positive, got {w}")));
    }

    let h: Vec<f64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
    let k = m - 2;
    let mut gamma = vec![0.0; m];
    let mut g = ys.to_vec();
    if k > 0 {
        // Column j of Q (interior knot j + 1) has entries at knots j, j + 1, j + 2.
        let q = |j: usize| -> [f64; 3] {
            let a = 1.0 / h[j];
            let c = 1.0 / h[j + 1];
            [a, -a - c, c]
        };
        let winv: Vec<f64> = weights.iter().map(|w| 1.0 / w).collect();
        let mut b0 = vec![0.0; k];
        let mut b1 = vec![0.0; k];
        let mut b2 = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for j in 0..k {
            let qj = q(j);
            b0[j] = (h[j] + h[j + 1]) / 3.0
                + mu * (qj[0] * qj[0] * winv[j] + qj[1] * qj[1] * winv[j + 1] + qj[2] * qj[2] * winv[j + 2]);
            if j + 1 < k {
                let qn = q(j + 1);
                b1[j] = h[j + 1] / 6.0 + mu * (qj[1] * qn[0] * winv[j + 1] + qj[2] * qn[1] * winv[j + 2]);
            }
            if j + 2 < k {
                let qnn = q(j + 2);
                b2[j] = mu * qj[2] * qnn[0] * winv[j + 2];
            }
            rhs[j] = qj[0] * ys[j] + qj[1] * ys[j + 1] + qj[2] * ys[j + 2];
        }
        let interior = solve_pentadiagonal(&b0, &b1, &b2, &rhs)?;
        gamma[1..=k].copy_from_slice(&interior);
        // g = y - mu W^-1 Q gamma
        for j in 0..k {
            let qj = q(j);
            let gj = interior[j];
            for (r, qv) in qj.iter().enumerate() {
                g[j + r] -= mu * winv[j + r] * qv * gj;
            }
        }
    }
    Ok(SplineFit { knots: ts.to_vec(), g, gamma, mu, weights: weights.to_vec() })
}

/// Solves a symmetric positive definite system with diagonal `b0` and
/// off-diagonals `b1` (`B[i][i+1]`) and `b2` (`B[i][i+2]`).
fn solve_pentadiagonal(b0: &[f64], b1: &[f64], b2: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let k = b0.len();
    let mut d = vec![0.0; k];
    let mut l1 = vec![0.0; k];
    let mut l2 = vec![0.0; k];
    for i in 0..k {
        let mut di = b0[i];
        if i >= 1 {
            di -= l1[i - 1] * l1[i - 1] * d[i - 1];
        }
        if i >= 2 {
            di -= l2[i - 2] * l2[i - 2] * d[i - 2];
        }
        if di.is_nan() || di <= 0.0 {
            return Err(Error::Singular("smoothing spline system is not positive definite".into()));
        }
        d[i] = di;
        let mut off = b1[i];
        if i >= 1 {
            off -= l1[i - 1] * d[i - 1] * l2[i - 1];
        }
        l1[i] = off / di;
        l2[i] = b2[i] / di;
    }
    let mut z = rhs.to_vec();
    for i in 0..k {
        if i >= 1 {
            z[i] -= l1[i - 1] * z[i - 1];
        }
        if i >= 2 {
            z[i] -= l2[i - 2] * z[i - 2];
        }
    }
    for i in 0..k {
        z[i] /= d[i];
    }
    for i in (0..k).rev() {
        if i + 1 < k {
            z[i] -= l1[i] * z[i + 1];
        }
        if i + 2 < k {
            z[i] -= l2[i] * z[i + 2];
        }
    }
    Ok(z)
}

/// Spline value; linear beyond the boundary knots.
pub fn eval_spline(fit: &SplineFit, u: f64) -> f64 {
    let m = fit.knots.len();
    let (t0, tm) = (fit.knots[0], fit.knots[m - 1]);
    if u < t0 {
        return fit.g[0] + (u - t0) * fit.right_slope(0);
    }
    if u > tm {
        return fit.g[m - 1] + (u - tm) * fit.left_slope(m - 2);
    }
    let i = fit.interval(u);
    let h = fit.knots[i + 1] - fit.knots[i];
    let a = u - fit.knots[i];
    let b = fit.knots[i + 1] - u;
    (a * fit.g[i + 1] + b * fit.g[i]) / h
        + ((b * b * b - h * h * b) * fit.gamma[i] + (a * a * a - h * h * a) * fit.gamma[i + 1]) / (6.0 * h)
}

/// Exact first derivative; constant beyond the boundary knots.
pub fn eval_spline_derivative(fit: &SplineFit, u: f64) -> f64 {
    let m = fit.knots.len();
    if u <= fit.knots[0] {
        return fit.right_slope(0);
    }
    if u >= fit.knots[m - 1] {
        return fit.left_slope(m - 2);
    }
    let i = fit.interval(u);
    let h = fit.knots[i + 1] - fit.knots[i];
    let a = u - fit.knots[i];
    let b = fit.knots[i + 1] - u;
    (fit.g[i + 1] - fit.g[i]) / h
        + ((h * h - 3.0 * b * b) * fit.gamma[i] + (3.0 * a * a - h * h) * fit.gamma[i + 1]) / (6.0 * h)
}

/// `int f''^2` over the knot range (`f''` is piecewise linear).
pub fn roughness(fit: &SplineFit) -> f64 {
    fit.knots
        .windows(2)
        .zip(fit.gamma.windows(2))
        .map(|(t, g)| (t[1] - t[0]) * (g[0] * g[0] + g[0] * g[1] + g[1] * g[1]) / 3.0)
        .sum()
}

/// Knots obtained by merging sorted abscissae closer than `rel_tol * range`.
#[derive(Debug, Clone)]
pub struct MergedKnots {
    pub knots: Vec<f64>,
    pub means: Vec<f64>,
    pub weights: Vec<f64>,
    /// Knot index of each input point.
    pub group: Vec<usize>,
}

/// Merges near-duplicate sorted abscissae; a merged knot sits at the mean
/// abscissa of its group with the mean response and weight equal to the
/// group size.
pub fn merge_knots(ts: &[f64], ys: &[f64], rel_tol: f64) -> MergedKnots {
    let n = ts.len();
    let range = if n > 0 { ts[n - 1] - ts[0] } else { 0.0 };
    let tol = rel_tol * range;
    let mut out =
        MergedKnots { knots: Vec::new(), means: Vec::new(), weights: Vec::new(), group: Vec::with_capacity(n) };
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && ts[j] - ts[j - 1] <= tol {
            j += 1;
        }
        let c = (j - i) as f64;
        out.knots.push(ts[i..j].iter().sum::<f64>() / c);
        out.means.push(ys[i..j].iter().sum::<f64>() / c);
        out.weights.push(c);
        out.group.extend(std::iter::repeat_n(out.knots.len() - 1, j - i));
        i = j;
    }
    out
}

/// Relative knot-merging tolerance used by the score functions.
pub const KNOT_MERGE_TOL: f64 = 1e-10;
