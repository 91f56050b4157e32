//! Shaped M-PAM constellations, probability vectors on the simplex, and the
//! flickering / symmetry constraint machinery.

use serde::{Deserialize, Serialize};

use crate::channel::LambertianLed;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Tolerance on `sum(p) = 1` accepted by [`Distribution::new`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Equally spaced bipolar M-PAM amplitudes with binary-reflected Gray labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PamConstellation<S> {
    order: usize,
    peak: S,
    amplitudes: Vec<S>,
    gray_labels: Vec<u32>,
}

/// Builds an M-PAM constellation with peak amplitude `peak`.
pub fn build_constellation<S: Scalar>(order: usize, peak: S) -> Result<PamConstellation<S>> {
    if order < 2 || !order.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "modulation order must be a power of two >= 2, got {order}"
        )));
    }
    if !(peak.is_finite() && peak > S::zero()) {
        return Err(Error::InvalidArgument(format!(
            "peak amplitude must be finite and > 0, got {}",
            peak.as_f64()
        )));
    }
    let denom = S::from_usize_lossy(order - 1);
    let mut amplitudes = vec![S::zero(); order];
    // fill the upper half and mirror it so the set is exactly antisymmetric
    for m in order / 2..order {
        let k = 2 * m + 1 - order; // 2m - M - 1 with m 1-based
        amplitudes[m] = if m == order - 1 {
            peak
        } else {
            S::from_usize_lossy(k) * peak / denom
        };
        amplitudes[order - 1 - m] = -amplitudes[m];
    }
    let gray_labels = (0..order as u32).map(|m| m ^ (m >> 1)).collect();
    Ok(PamConstellation {
        order,
        peak,
        amplitudes,
        gray_labels,
    })
}

impl<S: Scalar> PamConstellation<S> {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn peak(&self) -> S {
        self.peak
    }

    /// Amplitudes in increasing order (index 0 is the lowest symbol).
    pub fn amplitudes(&self) -> &[S] {
        &self.amplitudes
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.order.trailing_zeros()
    }

    pub fn gray_labels(&self) -> &[u32] {
        &self.gray_labels
    }

    /// Gray label of symbol `m` as a bit string, most significant bit first.
    pub fn label_string(&self, m: usize) -> String {
        let bits = self.bits_per_symbol() as usize;
        format!("{:0width$b}", self.gray_labels[m], width = bits)
    }

    /// Mean amplitude `a^T p`.
    ///
    /// Evaluated over mirrored pairs, so it is exactly zero for any
    /// symmetric distribution.
    pub fn mean_amplitude(&self, p: &[S]) -> S {
        let m = self.order;
        (0..m / 2)
            .map(|i| self.amplitudes[m - 1 - i] * (p[m - 1 - i] - p[i]))
            .sum()
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len == self.order {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.order,
                got: len,
            })
        }
    }
}

/// A probability vector over the constellation symbols, lowest amplitude first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<S>", into = "Vec<S>", bound = "S: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct Distribution<S: Scalar> {
    probs: Vec<S>,
}

impl<S: Scalar> Distribution<S> {
    /// Validates `0 <= p_m <= 1` and `|sum(p) - 1| <= 1e-12`.
    pub fn new(probs: Vec<S>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidArgument("distribution must be non-empty".into()));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !(p >= S::zero() && p <= S::one()) {
                return Err(Error::InvalidArgument(format!(
                    "probability {} at index {i} outside [0, 1]",
                    p.as_f64()
                )));
            }
        }
        let total: S = probs.iter().copied().sum();
        let tol = S::lit(SIMPLEX_TOLERANCE).max(S::epsilon() * S::from_usize_lossy(4 * probs.len()));
        if (total - S::one()).abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {}, not 1",
                total.as_f64()
            )));
        }
        Ok(Self { probs })
    }

    /// Clips negatives to zero and renormalizes. Fails on an all-zero input.
    pub fn normalized(mut probs: Vec<S>) -> Result<Self> {
        for p in probs.iter_mut() {
            if !p.is_finite() {
                return Err(Error::InvalidArgument("non-finite probability".into()));
            }
            *p = p.max(S::zero());
        }
        let total: S = probs.iter().copied().sum();
        if total <= S::zero() {
            return Err(Error::InvalidArgument("distribution has no mass".into()));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Self::new(probs)
    }

    pub fn uniform(order: usize) -> Self {
        let v = S::one() / S::from_usize_lossy(order);
        Self {
            probs: vec![v; order],
        }
    }

    /// All mass on symbol `k`.
    pub fn point_mass(order: usize, k: usize) -> Result<Self> {
        if k >= order {
            return Err(Error::InvalidArgument(format!("symbol {k} out of range for order {order}")));
        }
        let mut probs = vec![S::zero(); order];
        probs[k] = S::one();
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Probabilities with entries below `threshold` shown as exact zeros.
    pub fn rendered(&self, threshold: S) -> Vec<S> {
        self.probs
            .iter()
            .map(|&p| if p < threshold { S::zero() } else { p })
            .collect()
    }

    /// Number of symbols with probability below `threshold`.
    pub fn inactive_count(&self, threshold: S) -> usize {
        self.probs.iter().filter(|&&p| p < threshold).count()
    }

    pub fn into_vec(self) -> Vec<S> {
        self.probs
    }
}

impl<S: Scalar> AsRef<[S]> for Distribution<S> {
    fn as_ref(&self) -> &[S] {
        &self.probs
    }
}

impl<S: Scalar> TryFrom<Vec<S>> for Distribution<S> {
    type Error = Error;

    fn try_from(v: Vec<S>) -> Result<Self> {
        Self::new(v)
    }
}

impl<S: Scalar> From<Distribution<S>> for Vec<S> {
    fn from(d: Distribution<S>) -> Self {
        d.probs
    }
}

/// The `M/2 x M` matrix with `S[i,i] = 1`, `S[i, M-1-i] = -1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymmetryMatrix {
    order: usize,
}

impl SymmetryMatrix {
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 || !order.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "symmetry matrix needs an even order, got {order}"
            )));
        }
        Ok(Self { order })
    }

    pub fn rows(&self) -> usize {
        self.order / 2
    }

    pub fn cols(&self) -> usize {
        self.order
    }

    pub fn entry(&self, i: usize, j: usize) -> i8 {
        if i == j {
            1
        } else if j == self.order - 1 - i {
            -1
        } else {
            0
        }
    }

    pub fn apply<S: Scalar>(&self, p: &[S]) -> Vec<S> {
        (0..self.rows()).map(|i| p[i] - p[self.order - 1 - i]).collect()
    }
}

/// Which linear shaping constraint accompanies the reliability constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    /// `|a^T p| <= alpha * I_DC`
    Flicker,
    /// `S p = 0`
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSet<S> {
    /// Upper limit on Bob's pre-FEC BER.
    pub pre_fec_threshold: S,
    pub flicker_alpha: S,
    pub mode: ConstraintMode,
}

impl<S: Scalar> ConstraintSet<S> {
    pub fn new(pre_fec_threshold: S, flicker_alpha: S, mode: ConstraintMode) -> Result<Self> {
        if !(pre_fec_threshold > S::zero() && pre_fec_threshold < S::lit(0.5)) {
            return Err(Error::InvalidArgument(format!(
                "pre-FEC threshold must lie in (0, 0.5), got {}",
                pre_fec_threshold.as_f64()
            )));
        }
        if !(flicker_alpha >= S::zero() && flicker_alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "flicker alpha must be finite and >= 0, got {}",
                flicker_alpha.as_f64()
            )));
        }
        Ok(Self {
            pre_fec_threshold,
            flicker_alpha,
            mode,
        })
    }
}

impl<S: Scalar> Default for ConstraintSet<S> {
    fn default() -> Self {
        Self {
            pre_fec_threshold: S::lit(3.8e-3),
            flicker_alpha: S::lit(0.01),
            mode: ConstraintMode::Flicker,
        }
    }
}

/// `|a^T p| - alpha * I_DC`; the flicker constraint holds iff this is `<= 0`.
pub fn flicker_violation<S: Scalar>(
    c: &PamConstellation<S>,
    p: &Distribution<S>,
    led: &LambertianLed<S>,
    alpha: S,
) -> Result<S> {
    c.check_len(p.len())?;
    Ok(c.mean_amplitude(p.probs()).abs() - alpha * led.dc_bias)
}

/// `S p`; the zero vector iff `p_m = p_{M+1-m}` for all `m`.
pub fn symmetry_residual<S: Scalar>(p: &Distribution<S>) -> Result<Vec<S>> {
    Ok(SymmetryMatrix::new(p.len())?.apply(p.probs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn led(dc: f64) -> LambertianLed<f64> {
        LambertianLed::new(1.0, 0.44, 3.0, dc, 0.0, f64::INFINITY).unwrap()
    }

    #[test]
    fn small_constellations() {
        assert_eq!(build_constellation(2, 1.0).unwrap().amplitudes(), &[-1.0, 1.0]);
        assert_eq!(build_constellation(4, 3.0).unwrap().amplitudes(), &[-3.0, -1.0, 1.0, 3.0]);
        let c8 = build_constellation(8, 1.0).unwrap();
        let want = [-1.0, -5.0 / 7.0, -3.0 / 7.0, -1.0 / 7.0, 1.0 / 7.0, 3.0 / 7.0, 5.0 / 7.0, 1.0];
        for (a, w) in c8.amplitudes().iter().zip(want) {
            assert_relative_eq!(*a, w, max_relative = 1e-15);
        }
    }

    #[test]
    fn rejects_bad_orders() {
        for m in [0, 1, 3, 6, 12] {
            assert!(build_constellation(m, 1.0).is_err());
        }
        assert!(build_constellation(4, 0.0).is_err());
        assert!(build_constellation(4, f64::NAN).is_err());
    }

    #[test]
    fn structural_invariants_up_to_64() {
        for bits in 1..=6 {
            let m = 1usize << bits;
            let c = build_constellation(m, 0.7).unwrap();
            let a = c.amplitudes();
            assert_eq!(a[0], -0.7);
            assert_eq!(a[m - 1], 0.7);
            assert!(a.windows(2).all(|w| w[0] < w[1]));
            for i in 0..m {
                assert_eq!(a[i] + a[m - 1 - i], 0.0);
            }
            assert_eq!(c.mean_amplitude(&vec![1.0; m]), 0.0);
            assert!(a.iter().sum::<f64>().abs() < 1e-14);
            let labels = c.gray_labels();
            for w in labels.windows(2) {
                assert_eq!((w[0] ^ w[1]).count_ones(), 1);
            }
            let mut sorted = labels.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), m);
            assert_eq!(c.label_string(m - 1).len(), bits);
        }
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(vec![0.5, 0.5]).is_ok());
        assert!(Distribution::new(vec![0.5, 0.5 + 1e-9]).is_err());
        assert!(Distribution::new(vec![-0.1, 1.1]).is_err());
        assert!(Distribution::<f64>::new(vec![]).is_err());
        let n = Distribution::normalized(vec![2.0, -1.0, 2.0]).unwrap();
        assert_eq!(n.probs(), &[0.5, 0.0, 0.5]);
        assert!(Distribution::normalized(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn distribution_serializes_as_plain_array() {
        let d = Distribution::new(vec![0.25, 0.75]).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, "[0.25,0.75]");
        let back: Distribution<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
        assert!(serde_json::from_str::<Distribution<f64>>("[0.3,0.3]").is_err());
    }

    #[test]
    fn flicker_examples() {
        let c = build_constellation(8, 1.0).unwrap();
        let l = led(0.8);
        let v = flicker_violation(&c, &Distribution::uniform(8), &l, 0.01).unwrap();
        assert_eq!(v, -0.01 * 0.8);
        let sym = Distribution::new(vec![0.05, 0.1, 0.15, 0.2, 0.2, 0.15, 0.1, 0.05]).unwrap();
        assert_eq!(flicker_violation(&c, &sym, &l, 0.01).unwrap(), -0.01 * 0.8);
        let top = Distribution::point_mass(8, 7).unwrap();
        assert_eq!(flicker_violation(&c, &top, &led(123.0), 0.0).unwrap(), 1.0);
        assert!(flicker_violation(&c, &Distribution::uniform(4), &l, 0.0).is_err());
    }

    #[test]
    fn symmetry_examples() {
        let zero = symmetry_residual(&Distribution::<f64>::uniform(8)).unwrap();
        assert!(zero.iter().all(|&r| r == 0.0));
        let r = symmetry_residual(&Distribution::new(vec![0.4, 0.1, 0.1, 0.4]).unwrap()).unwrap();
        assert_eq!(r, vec![0.0, 0.0]);
        let r = symmetry_residual(&Distribution::new(vec![0.5, 0.1, 0.1, 0.3]).unwrap()).unwrap();
        assert_relative_eq!(r[0], 0.2, max_relative = 1e-14);
        assert_eq!(r[1], 0.0);
    }

    #[test]
    fn symmetry_matrix_entries() {
        let s = SymmetryMatrix::new(6).unwrap();
        assert_eq!((s.rows(), s.cols()), (3, 6));
        for i in 0..3 {
            let row: Vec<i8> = (0..6).map(|j| s.entry(i, j)).collect();
            assert_eq!(row.iter().filter(|&&x| x == 1).count(), 1);
            assert_eq!(row.iter().filter(|&&x| x == -1).count(), 1);
            assert_eq!(row[i], 1);
            assert_eq!(row[5 - i], -1);
        }
        assert!(SymmetryMatrix::new(5).is_err());
    }

    #[test]
    fn constraint_set_validation() {
        assert!(ConstraintSet::new(0.0, 0.01, ConstraintMode::Flicker).is_err());
        assert!(ConstraintSet::new(0.5, 0.01, ConstraintMode::Flicker).is_err());
        assert!(ConstraintSet::new(3.8e-3, -0.1, ConstraintMode::Flicker).is_err());
        let d = ConstraintSet::<f64>::default();
        assert_eq!(d.pre_fec_threshold, 3.8e-3);
        assert_eq!(d.flicker_alpha, 0.01);
    }

    fn symmetric_dist(half: Vec<f64>) -> Distribution<f64> {
        let mut p = half.clone();
        p.extend(half.iter().rev());
        Distribution::normalized(p).unwrap()
    }

    proptest! {
        #[test]
        fn symmetric_implies_flicker_free(half in prop::collection::vec(0.0f64..1.0, 4), dc in 0.01f64..5.0) {
            prop_assume!(half.iter().sum::<f64>() > 1e-3);
            let p = symmetric_dist(half);
            let c = build_constellation(8, dc).unwrap();
            prop_assert!(symmetry_residual(&p).unwrap().iter().all(|&r| r == 0.0));
            prop_assert!(flicker_violation(&c, &p, &led(dc), 0.0).unwrap() <= 0.0);
        }
    }
}
