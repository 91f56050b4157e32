//! Pairwise MAP error probabilities, union-bound and nearest-neighbour
//! SER/BER expressions for shaped M-PAM, and their derivatives.

use crate::channel::LinkBudget;
use crate::constellation::PamConstellation;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::special::erfc;

/// Lowest probability at which gradients are evaluated.
pub const DEFAULT_P_FLOOR: f64 = 1e-9;

/// Received distance `d = h gamma eta (a_m - a_n)` between two symbols and the
/// receiver noise standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseGeometry<S> {
    pub distance: S,
    pub sigma: S,
}

impl<S: Scalar> PairwiseGeometry<S> {
    pub fn new(distance: S, sigma: S) -> Result<Self> {
        if !(sigma.is_finite() && sigma > S::zero()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be finite and > 0, got {}",
                sigma.as_f64()
            )));
        }
        if !(distance.is_finite() && distance != S::zero()) {
            return Err(Error::InvalidArgument(format!(
                "pairwise distance must be finite and nonzero, got {}",
                distance.as_f64()
            )));
        }
        Ok(Self { distance, sigma })
    }

    pub fn for_symbols(c: &PamConstellation<S>, link: &LinkBudget<S>, m: usize, n: usize) -> Result<Self> {
        let a = c.amplitudes();
        Self::new(link.composite_gain * (a[m] - a[n]), link.sigma)
    }

    /// Coefficient of the log-prior ratio in the erfc argument.
    fn alpha(&self) -> S {
        self.sigma / (S::SQRT_2() * self.distance.abs())
    }

    fn beta(&self) -> S {
        self.distance.abs() / (S::lit(2.0) * S::SQRT_2() * self.sigma)
    }
}

/// Probability that the MAP detector prefers `n` over the transmitted `m`.
///
/// `p_n = 0` gives 0 and `p_m = 0` gives 1 (the limits of the erfc argument).
pub fn pairwise_error_prob<S: Scalar>(p_m: S, p_n: S, geom: &PairwiseGeometry<S>) -> S {
    if p_n <= S::zero() {
        return S::zero();
    }
    if p_m <= S::zero() {
        return S::one();
    }
    let theta = geom.alpha() * (p_m.ln() - p_n.ln()) + geom.beta();
    S::lit(0.5) * erfc(theta)
}

/// Per-distance coefficients of a constellation seen through one link.
///
/// Pair `(m, n)` only depends on `|m - n|`, so the erfc argument coefficients
/// are tabulated once per separation.
#[derive(Debug, Clone)]
pub struct ErrorRateModel<S> {
    order: usize,
    bits: S,
    alpha: Vec<S>,
    beta: Vec<S>,
}

impl<S: Scalar> ErrorRateModel<S> {
    pub fn new(c: &PamConstellation<S>, link: &LinkBudget<S>) -> Result<Self> {
        let m = c.order();
        if !(link.composite_gain > S::zero()) {
            return Err(Error::InvalidArgument(
                "error rates need a link with positive composite gain".into(),
            ));
        }
        let step = link.composite_gain * (c.amplitudes()[1] - c.amplitudes()[0]);
        let mut alpha = vec![S::zero(); m];
        let mut beta = vec![S::zero(); m];
        for k in 1..m {
            let g = PairwiseGeometry::new(step * S::from_usize_lossy(k), link.sigma)?;
            alpha[k] = g.alpha();
            beta[k] = g.beta();
        }
        Ok(Self {
            order: m,
            bits: S::from_usize_lossy(m.trailing_zeros() as usize),
            alpha,
            beta,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn check(&self, p: &[S]) -> Result<()> {
        if p.len() == self.order {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.order,
                got: p.len(),
            })
        }
    }

    fn competitors(&self, m: usize, adjacent_only: bool) -> std::ops::Range<usize> {
        if adjacent_only {
            m.saturating_sub(1)..(m + 2).min(self.order)
        } else {
            0..self.order
        }
    }

    /// `sum_m p_m sum_{n != m} erfc(theta_mn)` over the selected competitors.
    fn erfc_sum(&self, p: &[S], adjacent_only: bool) -> S {
        let mut total = S::zero();
        for m in 0..self.order {
            let pm = p[m];
            if pm <= S::zero() {
                continue;
            }
            let ln_pm = pm.ln();
            for n in self.competitors(m, adjacent_only) {
                if n == m || p[n] <= S::zero() {
                    continue;
                }
                let k = m.abs_diff(n);
                let theta = self.alpha[k] * (ln_pm - p[n].ln()) + self.beta[k];
                total += pm * erfc(theta);
            }
        }
        total
    }

    pub fn ser_upper(&self, p: &[S]) -> Result<S> {
        self.check(p)?;
        Ok(S::lit(0.5) * self.erfc_sum(p, false))
    }

    pub fn ber_upper(&self, p: &[S]) -> Result<S> {
        Ok(self.ser_upper(p)? / self.bits)
    }

    pub fn ser_approx(&self, p: &[S]) -> Result<S> {
        self.check(p)?;
        Ok(S::lit(0.5) * self.erfc_sum(p, true))
    }

    pub fn ber_approx(&self, p: &[S]) -> Result<S> {
        Ok(self.ser_approx(p)? / self.bits)
    }

    fn grad(&self, p: &[S], floor: S, adjacent_only: bool) -> Result<Vec<S>> {
        self.check(p)?;
        for (index, &v) in p.iter().enumerate() {
            if !(v >= floor) {
                return Err(Error::BelowSupportFloor {
                    index,
                    value: v.as_f64(),
                    floor: floor.as_f64(),
                });
            }
        }
        let two_over_sqrt_pi = S::FRAC_2_SQRT_PI();
        let scale = S::one() / (S::lit(2.0) * self.bits);
        let logs: Vec<S> = p.iter().map(|v| v.ln()).collect();
        let mut g = vec![S::zero(); self.order];
        for m in 0..self.order {
            for n in self.competitors(m, adjacent_only) {
                if n == m {
                    continue;
                }
                let k = m.abs_diff(n);
                let (alpha, beta) = (self.alpha[k], self.beta[k]);
                let lr = logs[m] - logs[n];
                let theta = alpha * lr + beta;
                let kernel = two_over_sqrt_pi * alpha;
                g[m] += erfc(theta) - kernel * (-theta * theta).exp();
                g[n] += kernel * (lr - theta * theta).exp();
            }
        }
        g.iter_mut().for_each(|v| *v *= scale);
        Ok(g)
    }

    /// Gradient of [`Self::ber_upper`]; every `p_m` must be at least `floor`.
    pub fn grad_ber_upper(&self, p: &[S], floor: S) -> Result<Vec<S>> {
        self.grad(p, floor, false)
    }

    /// Gradient of [`Self::ber_approx`]; every `p_m` must be at least `floor`.
    pub fn grad_ber_approx(&self, p: &[S], floor: S) -> Result<Vec<S>> {
        self.grad(p, floor, true)
    }
}

pub fn ser_upper_bound<S: Scalar>(c: &PamConstellation<S>, p: &[S], link: &LinkBudget<S>) -> Result<S> {
    ErrorRateModel::new(c, link)?.ser_upper(p)
}

pub fn ber_upper_bound<S: Scalar>(c: &PamConstellation<S>, p: &[S], link: &LinkBudget<S>) -> Result<S> {
    ErrorRateModel::new(c, link)?.ber_upper(p)
}

pub fn ser_approx<S: Scalar>(c: &PamConstellation<S>, p: &[S], link: &LinkBudget<S>) -> Result<S> {
    ErrorRateModel::new(c, link)?.ser_approx(p)
}

pub fn ber_approx<S: Scalar>(c: &PamConstellation<S>, p: &[S], link: &LinkBudget<S>) -> Result<S> {
    ErrorRateModel::new(c, link)?.ber_approx(p)
}

pub fn grad_ber_upper<S: Scalar>(c: &PamConstellation<S>, p: &[S], link: &LinkBudget<S>) -> Result<Vec<S>> {
    ErrorRateModel::new(c, link)?.grad_ber_upper(p, S::lit(DEFAULT_P_FLOOR))
}

pub fn grad_ber_approx<S: Scalar>(c: &PamConstellation<S>, p: &[S], link: &LinkBudget<S>) -> Result<Vec<S>> {
    ErrorRateModel::new(c, link)?.grad_ber_approx(p, S::lit(DEFAULT_P_FLOOR))
}

/// `p_m erfc(theta_mn) + p_n erfc(theta_nm)`: the part of the BER sum that
/// involves symbols `m` and `n` against each other.
pub fn pair_term<S: Scalar>(p_m: S, p_n: S, geom: &PairwiseGeometry<S>) -> S {
    let two = S::lit(2.0);
    two * (p_m * pairwise_error_prob(p_m, p_n, geom) + p_n * pairwise_error_prob(p_n, p_m, geom))
}

/// Closed-form Hessian of [`pair_term`] with respect to `(p_m, p_n)`.
pub fn pair_hessian<S: Scalar>(p_m: S, p_n: S, geom: &PairwiseGeometry<S>) -> [[S; 2]; 2] {
    let (alpha, beta) = (geom.alpha(), geom.beta());
    let lr = p_m.ln() - p_n.ln();
    let t_mn = alpha * lr + beta;
    let t_nm = -alpha * lr + beta;
    let e_mn = (-t_mn * t_mn).exp();
    let e_nm = (-t_nm * t_nm).exp();
    let two = S::lit(2.0);
    let a2 = two * alpha * alpha;
    let core = p_m * e_mn * (a2 * t_mn - alpha) + p_n * e_nm * (a2 * t_nm - alpha);
    let c = two / S::PI().sqrt();
    [
        [c / (p_m * p_m) * core, -c / (p_m * p_n) * core],
        [-c / (p_m * p_n) * core, c / (p_n * p_n) * core],
    ]
}
