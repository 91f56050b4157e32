//! Globally adaptive Gauss–Kronrod (7/15) quadrature for scalar and
//! vector-valued integrands on finite intervals.

#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Stopping rule and work limits for [`integrate_vec`].
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSettings<S> {
    pub abs_tol: S,
    pub rel_tol: S,
    /// Number of equal pieces the interval is split into before adapting.
    pub initial_pieces: usize,
    pub max_intervals: usize,
}

impl<S: Scalar> Default for QuadratureSettings<S> {
    fn default() -> Self {
        Self {
            abs_tol: S::lit(1e-12),
            rel_tol: S::zero(),
            initial_pieces: 1,
            max_intervals: 4000,
        }
    }
}

struct Piece<S> {
    lo: S,
    hi: S,
    value: Vec<S>,
    err: Vec<S>,
    worst: S,
}

fn gk15<S, F>(f: &mut F, lo: S, hi: S, dim: usize, buf: &mut [S]) -> Piece<S>
where
    S: Scalar,
    F: FnMut(S, &mut [S]),
{
    let half = (hi - lo) * S::lit(0.5);
    let mid = lo + half;
    let mut kronrod = vec![S::zero(); dim];
    let mut gauss = vec![S::zero(); dim];
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let offsets: &[S] = if i == 7 {
            &[S::zero()]
        } else {
            &[-S::lit(x), S::lit(x)]
        };
        for &dx in offsets {
            f(mid + half * dx, buf);
            for k in 0..dim {
                kronrod[k] += S::lit(wk) * buf[k];
                if i % 2 == 1 {
                    gauss[k] += S::lit(WG[i / 2]) * buf[k];
                }
            }
        }
    }
    let mut worst = S::zero();
    let err: Vec<S> = kronrod
        .iter()
        .zip(&gauss)
        .map(|(&k, &g)| {
            let e = ((k - g) * half).abs();
            worst = worst.max(e);
            e
        })
        .collect();
    let value = kronrod.into_iter().map(|k| k * half).collect();
    Piece {
        lo,
        hi,
        value,
        err,
        worst,
    }
}

/// Integrates a vector-valued function over `[lo, hi]`.
///
/// `f(x, out)` writes the `dim` integrand components at `x` into `out`. The
/// integration stops when, for every component, the summed error estimate is
/// below `max(abs_tol, rel_tol * |integral|)`.
pub fn integrate_vec<S, F>(
    mut f: F,
    lo: S,
    hi: S,
    dim: usize,
    settings: &QuadratureSettings<S>,
) -> Result<Vec<S>>
where
    S: Scalar,
    F: FnMut(S, &mut [S]),
{
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(Error::InvalidArgument(format!(
            "integration bounds must be finite with lo <= hi, got [{}, {}]",
            lo.as_f64(),
            hi.as_f64()
        )));
    }
    if hi == lo {
        return Ok(vec![S::zero(); dim]);
    }
    let mut buf = vec![S::zero(); dim];
    let n0 = settings.initial_pieces.max(1);
    let width = (hi - lo) / S::from_usize_lossy(n0);
    let mut pieces: Vec<Piece<S>> = (0..n0)
        .map(|i| {
            let a = lo + width * S::from_usize_lossy(i);
            let b = if i + 1 == n0 { hi } else { a + width };
            gk15(&mut f, a, b, dim, &mut buf)
        })
        .collect();

    loop {
        let mut total = vec![S::zero(); dim];
        let mut err = vec![S::zero(); dim];
        for p in &pieces {
            for k in 0..dim {
                total[k] += p.value[k];
                err[k] += p.err[k];
            }
        }
        let done = (0..dim).all(|k| err[k] <= settings.abs_tol.max(settings.rel_tol * total[k].abs()));
        if done {
            return Ok(total);
        }
        if pieces.len() >= settings.max_intervals {
            let worst = err.iter().fold(S::zero(), |m, &e| m.max(e));
            return Err(Error::NonConvergence {
                routine: "integrate_vec",
                detail: format!(
                    "error estimate {:e} after {} intervals",
                    worst.as_f64(),
                    pieces.len()
                ),
            });
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .fold((0, S::neg_infinity()), |(bi, bw), (i, p)| {
                if p.worst > bw {
                    (i, p.worst)
                } else {
                    (bi, bw)
                }
            });
        let piece = pieces.swap_remove(idx);
        let mid = piece.lo + (piece.hi - piece.lo) * S::lit(0.5);
        if !(mid > piece.lo && mid < piece.hi) {
            return Err(Error::NonConvergence {
                routine: "integrate_vec",
                detail: "interval can no longer be bisected".into(),
            });
        }
        pieces.push(gk15(&mut f, piece.lo, mid, dim, &mut buf));
        pieces.push(gk15(&mut f, mid, piece.hi, dim, &mut buf));
    }
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<S, F>(mut f: F, lo: S, hi: S, settings: &QuadratureSettings<S>) -> Result<S>
where
    S: Scalar,
    F: FnMut(S) -> S,
{
    integrate_vec(|x, out: &mut [S]| out[0] = f(x), lo, hi, 1, settings).map(|v| v[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomials_are_exact() {
        let s = QuadratureSettings::default();
        let v = integrate(|x: f64| 3.0 * x * x - x + 2.0, -1.0, 2.0, &s).unwrap();
        assert_relative_eq!(v, 9.0 - 1.5 + 6.0, max_relative = 1e-14);
    }

    #[test]
    fn gaussian_mass() {
        let s = QuadratureSettings {
            abs_tol: 1e-13,
            initial_pieces: 8,
            ..Default::default()
        };
        let v = integrate(
            |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            -12.0,
            12.0,
            &s,
        )
        .unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn peaked_integrand_needs_refinement() {
        let s = QuadratureSettings {
            abs_tol: 1e-10,
            ..Default::default()
        };
        let eps = 1e-3f64;
        let v = integrate(|x: f64| eps / (x * x + eps * eps), -1.0, 1.0, &s).unwrap();
        assert_relative_eq!(v, 2.0 * (1.0 / eps).atan(), max_relative = 1e-9);
    }

    #[test]
    fn vector_components_share_nodes() {
        let s = QuadratureSettings::default();
        let v = integrate_vec(
            |x: f64, out: &mut [f64]| {
                out[0] = x.sin();
                out[1] = x.cos();
            },
            0.0,
            std::f64::consts::PI,
            2,
            &s,
        )
        .unwrap();
        assert_relative_eq!(v[0], 2.0, max_relative = 1e-13);
        assert!(v[1].abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity_is_reported_or_resolved() {
        let s = QuadratureSettings {
            abs_tol: 1e-12,
            max_intervals: 50,
            ..Default::default()
        };
        assert!(integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &s).is_err());
    }

    #[test]
    fn rejects_bad_bounds() {
        let s = QuadratureSettings::<f64>::default();
        assert!(integrate(|x| x, 1.0, 0.0, &s).is_err());
        assert!(integrate(|x| x, 0.0, f64::INFINITY, &s).is_err());
        assert_eq!(integrate(|x| x, 2.0, 2.0, &s).unwrap(), 0.0);
    }
}
