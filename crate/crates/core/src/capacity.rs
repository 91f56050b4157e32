//! Output entropy of the Gaussian-mixture channel, modulation-constrained
//! capacity and secrecy capacity, and the Bhatia–Davis lower bound used when
//! the eavesdropper's channel is unknown.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::LinkBudget;
use crate::constellation::PamConstellation;
use crate::error::{Error, Result};
use crate::quadrature::{integrate_vec, QuadratureSettings};
use crate::scalar::Scalar;

/// Half-width of the integration window beyond the outermost means, in units
/// of sigma. The Gaussian tail mass outside it is below 1e-22.
const WINDOW: f64 = 10.0;
/// Initial panel width in units of sigma.
const PANEL: f64 = 2.0;
const ENTROPY_ABS_TOL: f64 = 1e-11;

/// Received-signal distribution `sum_m p_m N(r_m, sigma^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel<S> {
    pub means: Vec<S>,
    pub sigma: S,
    pub weights: Vec<S>,
}

impl<S: Scalar> MixtureModel<S> {
    pub fn new(means: Vec<S>, sigma: S, weights: Vec<S>) -> Result<Self> {
        if means.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: means.len(),
                got: weights.len(),
            });
        }
        if !(sigma.is_finite() && sigma > S::zero()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be finite and > 0, got {}",
                sigma.as_f64()
            )));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidArgument("mixture means must be finite".into()));
        }
        if weights.iter().any(|w| !(*w >= S::zero() && w.is_finite())) {
            return Err(Error::InvalidArgument("mixture weights must be finite and >= 0".into()));
        }
        if !weights.iter().any(|w| *w > S::zero()) {
            return Err(Error::InvalidArgument("mixture needs a positive weight".into()));
        }
        Ok(Self { means, sigma, weights })
    }

    /// Output of `link` for the constellation `c` driven with probabilities `p`.
    pub fn from_link(c: &PamConstellation<S>, link: &LinkBudget<S>, p: &[S]) -> Result<Self> {
        if p.len() != c.order() {
            return Err(Error::DimensionMismatch {
                expected: c.order(),
                got: p.len(),
            });
        }
        let means = c.amplitudes().iter().map(|&a| link.composite_gain * a).collect();
        Self::new(means, link.sigma, p.to_vec())
    }

    /// Density of the received signal at `y`.
    pub fn density(&self, y: S) -> S {
        let u = y / self.sigma;
        let std: Vec<S> = self.means.iter().map(|&r| r / self.sigma).collect();
        log_density_std(&std, &self.log_weights(), u).exp() / self.sigma
    }

    fn log_weights(&self) -> Vec<S> {
        self.weights
            .iter()
            .map(|&w| if w > S::zero() { w.ln() } else { S::neg_infinity() })
            .collect()
    }
}

/// `ln f(u)` for the unit-variance mixture with means `u_m`.
pub(crate) fn log_density_std<S: Scalar>(means: &[S], log_w: &[S], u: S) -> S {
    let half = S::lit(0.5);
    let mut peak = S::neg_infinity();
    for (&mu, &lw) in means.iter().zip(log_w) {
        if lw > S::neg_infinity() {
            let d = u - mu;
            peak = peak.max(lw - half * d * d);
        }
    }
    let mut acc = S::zero();
    for (&mu, &lw) in means.iter().zip(log_w) {
        if lw > S::neg_infinity() {
            let d = u - mu;
            acc += (lw - half * d * d - peak).exp();
        }
    }
    peak + acc.ln() - half * (S::lit(2.0) * S::PI()).ln()
}

fn quadrature_setup<S: Scalar>(std_means: &[S], weights: &[S]) -> (S, S, QuadratureSettings<S>) {
    let active = std_means.iter().zip(weights).filter(|(_, &w)| w > S::zero());
    let (lo, hi) = active.fold((S::infinity(), S::neg_infinity()), |(lo, hi), (&m, _)| {
        (lo.min(m), hi.max(m))
    });
    let lo = lo - S::lit(WINDOW);
    let hi = hi + S::lit(WINDOW);
    let pieces = ((hi - lo) / S::lit(PANEL)).ceil().to_usize().unwrap_or(1).max(1);
    let settings = QuadratureSettings {
        abs_tol: S::lit(ENTROPY_ABS_TOL).max(S::epsilon() * S::lit(1e3)),
        rel_tol: S::zero(),
        initial_pieces: pieces,
        max_intervals: pieces * 64 + 4000,
    };
    (lo, hi, settings)
}

/// Entropy in bits of the unit-variance mixture, and optionally
/// `-int phi_m log2 f` for every component.
fn standardized_entropy<S: Scalar>(mm: &MixtureModel<S>, with_grad: bool) -> Result<(S, Vec<S>)> {
    let std: Vec<S> = mm.means.iter().map(|&r| r / mm.sigma).collect();
    let log_w = mm.log_weights();
    let (lo, hi, settings) = quadrature_setup(&std, &mm.weights);
    let m = std.len();
    let dim = if with_grad { m + 1 } else { 1 };
    let log2e = S::LOG2_E();
    let half = S::lit(0.5);
    let norm = (S::lit(2.0) * S::PI()).sqrt().recip();
    let v = integrate_vec(
        |u, out: &mut [S]| {
            let lf = log_density_std(&std, &log_w, u);
            let log2f = lf * log2e;
            out[0] = -lf.exp() * log2f;
            if with_grad {
                for k in 0..m {
                    let d = u - std[k];
                    out[k + 1] = -norm * (-half * d * d).exp() * log2f;
                }
            }
        },
        lo,
        hi,
        dim,
        &settings,
    )?;
    Ok((v[0], v[1..].to_vec()))
}

/// Differential entropy `-int f log2 f` of the mixture, in bits.
pub fn mixture_entropy<S: Scalar>(mm: &MixtureModel<S>) -> Result<S> {
    Ok(standardized_entropy(mm, false)?.0 + mm.sigma.log2())
}

/// Entropy and its partial derivatives with respect to the weights.
///
/// The derivatives treat the weights as free variables (no simplex
/// constraint), so they carry a common `-1/ln 2` offset.
pub fn mixture_entropy_with_grad<S: Scalar>(mm: &MixtureModel<S>) -> Result<(S, Vec<S>)> {
    let (h, mut g) = standardized_entropy(mm, true)?;
    let offset = S::LOG2_E();
    g.iter_mut().for_each(|v| *v -= offset);
    Ok((h + mm.sigma.log2(), g))
}

/// Entropy of `N(0, sigma^2)` in bits.
pub fn gaussian_entropy<S: Scalar>(sigma: S) -> S {
    S::lit(0.5) * (S::lit(2.0) * S::PI() * S::E() * sigma * sigma).log2()
}

/// Mutual information between the constellation input and the channel output.
pub fn channel_capacity<S: Scalar>(mm: &MixtureModel<S>) -> Result<S> {
    Ok(standardized_entropy(mm, false)?.0 - gaussian_entropy(S::one()))
}

pub fn channel_capacity_with_grad<S: Scalar>(mm: &MixtureModel<S>) -> Result<(S, Vec<S>)> {
    let (h, g) = mixture_entropy_with_grad(mm)?;
    Ok((h - gaussian_entropy(mm.sigma), g))
}

fn check_degraded<S: Scalar>(bob: &LinkBudget<S>, eve: &LinkBudget<S>) -> Result<()> {
    let (b, e) = (bob.gain_to_noise(), eve.gain_to_noise());
    if b < e {
        Err(Error::NotDegraded {
            bob: b.as_f64(),
            eve: e.as_f64(),
        })
    } else {
        Ok(())
    }
}

/// `C_B(p) - C_E(p)` for an eavesdropper whose gain-to-noise ratio does not
/// exceed Bob's.
pub fn secrecy_capacity<S: Scalar>(
    p: &[S],
    bob: &LinkBudget<S>,
    eve: &LinkBudget<S>,
    c: &PamConstellation<S>,
) -> Result<S> {
    check_degraded(bob, eve)?;
    let cb = channel_capacity(&MixtureModel::from_link(c, bob, p)?)?;
    let ce = channel_capacity(&MixtureModel::from_link(c, eve, p)?)?;
    Ok(cb - ce)
}

pub fn secrecy_capacity_with_grad<S: Scalar>(
    p: &[S],
    bob: &LinkBudget<S>,
    eve: &LinkBudget<S>,
    c: &PamConstellation<S>,
) -> Result<(S, Vec<S>)> {
    check_degraded(bob, eve)?;
    let (cb, gb) = channel_capacity_with_grad(&MixtureModel::from_link(c, bob, p)?)?;
    let (ce, ge) = channel_capacity_with_grad(&MixtureModel::from_link(c, eve, p)?)?;
    Ok((cb - ce, gb.iter().zip(&ge).map(|(&x, &y)| x - y).collect()))
}

/// Coefficient `c = (h gamma eta / sigma)^2` of an eavesdropper link in the
/// Bhatia–Davis bound `C_E <= 1/2 log2(1 + c (A^2 - t))`.
pub fn eve_snr_coefficient<S: Scalar>(eve: &LinkBudget<S>) -> S {
    eve.gain_to_noise().powi(2)
}

/// Upper bound on Eve's capacity from the Bhatia–Davis variance bound, with
/// `t` standing in for `(a^T p)^2`.
pub fn eve_capacity_bound<S: Scalar>(eve: &LinkBudget<S>, peak: S, t: S) -> Result<S> {
    let a2 = peak * peak;
    if t > a2 {
        return Err(Error::InvalidArgument(format!(
            "t = {} exceeds A^2 = {}",
            t.as_f64(),
            a2.as_f64()
        )));
    }
    Ok(S::lit(0.5) * (S::one() + eve_snr_coefficient(eve) * (a2 - t)).log2())
}

/// Secrecy lower bound against the average eavesdropper `eve_avg`:
/// `C_B(p) - 1/2 log2(1 + c (A^2 - t))`, with `t = (a^T p)^2` when not given.
pub fn secrecy_lb_estimate<S: Scalar>(
    p: &[S],
    t: Option<S>,
    bob: &LinkBudget<S>,
    eve_avg: &LinkBudget<S>,
    c: &PamConstellation<S>,
) -> Result<S> {
    let cb = channel_capacity(&MixtureModel::from_link(c, bob, p)?)?;
    let t = t.unwrap_or_else(|| c.mean_amplitude(p).powi(2));
    Ok(cb - eve_capacity_bound(eve_avg, c.peak(), t)?)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate<S> {
    pub mean: S,
    pub stderr: S,
}

impl<S: Scalar> Estimate<S> {
    pub fn from_samples(xs: &[S]) -> Self {
        let n = S::from_usize_lossy(xs.len());
        let mean = xs.iter().copied().sum::<S>() / n;
        let stderr = if xs.len() > 1 {
            let var = xs.iter().map(|&x| (x - mean).powi(2)).sum::<S>() / (n - S::one());
            (var / n).sqrt()
        } else {
            S::zero()
        };
        Self { mean, stderr }
    }
}

fn check_samples<S>(eves: &[LinkBudget<S>]) -> Result<()> {
    if eves.is_empty() {
        Err(Error::InvalidArgument("need at least one eavesdropper sample".into()))
    } else {
        Ok(())
    }
}

/// Average of `C_B - C_E` over sampled eavesdropper links.
pub fn avg_secrecy_capacity_mc<S: Scalar>(
    p: &[S],
    bob: &LinkBudget<S>,
    eves: &[LinkBudget<S>],
    c: &PamConstellation<S>,
) -> Result<Estimate<S>> {
    check_samples(eves)?;
    let cb = channel_capacity(&MixtureModel::from_link(c, bob, p)?)?;
    let samples = eves
        .par_iter()
        .map(|eve| {
            if eve.composite_gain > S::zero() {
                Ok(cb - channel_capacity(&MixtureModel::from_link(c, eve, p)?)?)
            } else {
                Ok(cb)
            }
        })
        .collect::<Result<Vec<S>>>()?;
    Ok(Estimate::from_samples(&samples))
}

/// Average over sampled eavesdropper links of the per-link Bhatia–Davis lower
/// bound `C_B - 1/2 log2(1 + c_E (A^2 - (a^T p)^2))`.
pub fn avg_secrecy_lb_mc<S: Scalar>(
    p: &[S],
    bob: &LinkBudget<S>,
    eves: &[LinkBudget<S>],
    c: &PamConstellation<S>,
) -> Result<Estimate<S>> {
    check_samples(eves)?;
    let cb = channel_capacity(&MixtureModel::from_link(c, bob, p)?)?;
    let t = c.mean_amplitude(p).powi(2);
    let samples = eves
        .iter()
        .map(|eve| Ok(cb - eve_capacity_bound(eve, c.peak(), t)?))
        .collect::<Result<Vec<S>>>()?;
    Ok(Estimate::from_samples(&samples))
}
