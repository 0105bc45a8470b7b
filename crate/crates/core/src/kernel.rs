//! Kernel-smoothed derivative of a monotone step function.
//!
//! The derivative estimate at `u` is the Stieltjes integral
//! `(1/h) int K((u - x)/h) dpsi(x)`, which for a step function reduces to a
//! kernel-weighted sum of its jump sizes.

use crate::error::{Error, Result};
use crate::isotonic::StepFunction;

/// Symmetric kernels supported on `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    /// `(35/32) (1 - u^2)^3`
    #[default]
    Triweight,
}

impl Kernel {
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Triweight => {
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    let v = 1.0 - u * u;
                    35.0 / 32.0 * v * v * v
                }
            }
        }
    }
}

pub fn kernel_eval(u: f64) -> f64 {
    Kernel::Triweight.eval(u)
}

/// `h = constant * range * n^(-1/7)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthRule {
    constant: f64,
}

impl BandwidthRule {
    pub const EXPONENT: f64 = -1.0 / 7.0;

    pub fn new(constant: f64) -> Result<Self> {
        if !(constant > 0.0 && constant.is_finite()) {
            return Err(Error::InvalidArgument(format!("bandwidth constant must be positive, got {constant}")));
        }
        Ok(BandwidthRule { constant })
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }
}

impl Default for BandwidthRule {
    fn default() -> Self {
        BandwidthRule { constant: 0.5 }
    }
}

pub fn default_bandwidth(n: usize, data_range: f64, rule: BandwidthRule) -> f64 {
    rule.constant * data_range * (n as f64).powf(BandwidthRule::EXPONENT)
}

pub fn derivative_estimate(step: &StepFunction, u: f64, h: f64) -> f64 {
    derivative_estimate_with(Kernel::Triweight, step, u, h)
}

pub fn derivative_estimate_with(kernel: Kernel, step: &StepFunction, u: f64, h: f64) -> f64 {
    let taus = step.taus();
    let lo = taus.partition_point(|&t| t <= u - h);
    let hi = taus.partition_point(|&t| t < u + h);
    let levels = step.levels();
    (lo..hi).map(|j| kernel.eval((u - taus[j]) / h) * (levels[j + 1] - levels[j])).sum::<f64>() / h
}

/// Derivative estimates at every point of a nondecreasing sequence `us`,
/// sweeping a window over the jumps.
pub fn derivative_estimates_sorted(step: &StepFunction, us: &[f64], h: f64) -> Vec<f64> {
    let taus = step.taus();
    let levels = step.levels();
    let mut lo = 0;
    let mut hi = 0;
    us.iter()
        .map(|&u| {
            while lo < taus.len() && taus[lo] <= u - h {
                lo += 1;
            }
            while hi < taus.len() && taus[hi] < u + h {
                hi += 1;
            }
            let mut s = 0.0;
            for j in lo..hi.max(lo) {
                s += kernel_eval((u - taus[j]) / h) * (levels[j + 1] - levels[j]);
            }
            s / h
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn kernel_shape() {
        assert_eq!(kernel_eval(0.0), 35.0 / 32.0);
        assert_eq!(kernel_eval(1.5), 0.0);
        assert_eq!(kernel_eval(-1.5), 0.0);
        assert_eq!(kernel_eval(0.3), kernel_eval(-0.3));
        assert!(kernel_eval(0.2) > kernel_eval(0.4));
    }

    #[test]
    fn kernel_integrates_to_one() {
        // polynomial of degree 6: Simpson with many panels is essentially exact
        let total = simpson(kernel_eval, -1.0, 1.0, 2000);
        assert!((total - 1.0).abs() < 1e-8);
    }

    #[test]
    fn single_jump() {
        let f = StepFunction::new(vec![0.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(derivative_estimate(&f, 0.0, 1.0), 35.0 / 32.0);
        assert_eq!(derivative_estimate(&f, 1.0, 1.0), 0.0);
        assert_eq!(derivative_estimate(&f, -2.5, 1.0), 0.0);
    }

    #[test]
    fn mass_equals_total_jump() {
        let f = StepFunction::new(vec![-1.0, 0.2, 0.25, 1.7], vec![0.0, 0.5, 1.5, 1.75, 4.0]).unwrap();
        let h = 0.4;
        let mass = simpson(|u| derivative_estimate(&f, u, h), -3.0, 4.0, 7000);
        assert!((mass - f.total_jump()).abs() < 1e-6, "{mass}");
    }

    #[test]
    fn depends_only_on_jumps() {
        let f = StepFunction::new(vec![0.0, 1.0], vec![0.0, 1.0, 3.0]).unwrap();
        let g = StepFunction::new(vec![0.0, 1.0], vec![10.0, 11.0, 13.0]).unwrap();
        let two = StepFunction::new(vec![0.0, 1.0], vec![0.0, 2.0, 6.0]).unwrap();
        for u in [-0.5, 0.0, 0.3, 0.9, 1.4] {
            assert_eq!(derivative_estimate(&f, u, 0.7), derivative_estimate(&g, u, 0.7));
            assert!((derivative_estimate(&two, u, 0.7) - 2.0 * derivative_estimate(&f, u, 0.7)).abs() < 1e-14);
            assert!(derivative_estimate(&f, u, 0.7) >= 0.0);
        }
    }

    #[test]
    fn sweep_matches_pointwise() {
        let f = StepFunction::new(vec![-1.0, -0.5, 0.2, 0.25, 1.7], vec![0.0, 0.1, 0.5, 1.5, 1.75, 4.0]).unwrap();
        let us: Vec<f64> = (0..60).map(|i| -2.0 + i as f64 * 0.07).collect();
        let fast = derivative_estimates_sorted(&f, &us, 0.45);
        for (u, v) in us.iter().zip(&fast) {
            assert!((derivative_estimate(&f, *u, 0.45) - v).abs() < 1e-14);
        }
    }

    #[test]
    fn bandwidth_rule() {
        let rule = BandwidthRule::new(0.5).unwrap();
        assert!((default_bandwidth(128, 2.0, rule) - 0.5).abs() < 1e-14);
        assert_eq!(default_bandwidth(1, 1.0, BandwidthRule::new(1.0).unwrap()), 1.0);
        let h1 = default_bandwidth(300, 1.5, rule);
        assert!((default_bandwidth(300, 3.0, rule) - 2.0 * h1).abs() < 1e-15);
        assert!(BandwidthRule::new(0.0).is_err());
        assert_eq!(BandwidthRule::default().constant(), 0.5);
    }
}
