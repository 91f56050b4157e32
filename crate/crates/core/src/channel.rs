//! Line-of-sight Lambertian channel, receiver noise, and the spatially
//! averaged eavesdropper gain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureSettings};
use crate::scalar::Scalar;
use crate::special::hyp2f1;

/// Elementary charge in coulombs.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

fn check_positive<S: Scalar>(name: &str, v: S) -> Result<()> {
    if v.is_finite() && v > S::zero() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be finite and > 0, got {}",
            v.as_f64()
        )))
    }
}

/// LED transmitter with a Lambertian emission pattern and a linear drive range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambertianLed<S> {
    /// Semi-angle at half power, radians.
    pub semi_angle_half_power: S,
    lambert_order: S,
    /// Electrical-to-optical conversion factor, W/A.
    pub conversion_eta: S,
    /// Height above the receiver plane, m.
    pub height: S,
    pub dc_bias: S,
    pub i_min: S,
    pub i_max: S,
}

impl<S: Scalar> LambertianLed<S> {
    pub fn new(
        semi_angle_half_power: S,
        conversion_eta: S,
        height: S,
        dc_bias: S,
        i_min: S,
        i_max: S,
    ) -> Result<Self> {
        if !(semi_angle_half_power > S::zero() && semi_angle_half_power < S::FRAC_PI_2()) {
            return Err(Error::InvalidArgument(format!(
                "semi-angle at half power must lie in (0, pi/2), got {}",
                semi_angle_half_power.as_f64()
            )));
        }
        check_positive("conversion_eta", conversion_eta)?;
        check_positive("height", height)?;
        if !(i_min <= dc_bias && dc_bias <= i_max) {
            return Err(Error::InvalidArgument(format!(
                "DC bias {} outside the linear range [{}, {}]",
                dc_bias.as_f64(),
                i_min.as_f64(),
                i_max.as_f64()
            )));
        }
        let lambert_order = -S::LN_2() / semi_angle_half_power.cos().ln();
        Ok(Self {
            semi_angle_half_power,
            lambert_order,
            conversion_eta,
            height,
            dc_bias,
            i_min,
            i_max,
        })
    }

    /// Order `l` of the Lambertian emission, `-ln 2 / ln cos(semi-angle)`.
    pub fn lambert_order(&self) -> S {
        self.lambert_order
    }

    /// Radiant intensity pattern `(l + 1) / (2 pi) * cos^l(phi)`.
    pub fn radiant_intensity(&self, irradiance_angle: S) -> S {
        let l = self.lambert_order;
        (l + S::one()) / (S::lit(2.0) * S::PI()) * irradiance_angle.cos().powf(l)
    }

    /// Peak symbol amplitude allowed by the linear range around the bias.
    pub fn peak_amplitude(&self) -> S {
        (self.i_max - self.dc_bias).min(self.dc_bias - self.i_min)
    }

    /// Average emitted optical power for zero-mean symbols, `eta * I_DC`.
    pub fn dc_optical_power(&self) -> S {
        self.conversion_eta * self.dc_bias
    }

    /// Copy of this LED re-biased so that `eta * I_DC` equals `power_watts`,
    /// keeping `I_min = 0` and an unbounded `I_max`.
    pub fn with_dc_optical_power(&self, power_watts: S) -> Result<Self> {
        check_positive("optical power", power_watts)?;
        let dc = power_watts / self.conversion_eta;
        Self::new(
            self.semi_angle_half_power,
            self.conversion_eta,
            self.height,
            dc,
            S::zero(),
            S::infinity(),
        )
    }
}

/// Photodiode receiver with optical filter and concentrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverPd<S> {
    /// Active area, m^2.
    pub area: S,
    /// Responsivity, A/W.
    pub responsivity: S,
    /// Field of view, radians.
    pub fov: S,
    pub filter_gain: S,
    pub refractive_index: S,
}

impl<S: Scalar> ReceiverPd<S> {
    pub fn new(area: S, responsivity: S, fov: S, filter_gain: S, refractive_index: S) -> Result<Self> {
        check_positive("area", area)?;
        check_positive("responsivity", responsivity)?;
        check_positive("filter_gain", filter_gain)?;
        check_positive("refractive_index", refractive_index)?;
        if !(fov > S::zero() && fov < S::FRAC_PI_2()) {
            return Err(Error::InvalidArgument(format!(
                "field of view must lie in (0, pi/2), got {}",
                fov.as_f64()
            )));
        }
        Ok(Self {
            area,
            responsivity,
            fov,
            filter_gain,
            refractive_index,
        })
    }

    /// Concentrator gain `kappa^2 / sin^2(FoV)` inside the field of view, else 0.
    pub fn concentrator_gain(&self, incidence_angle: S) -> S {
        if incidence_angle >= S::zero() && incidence_angle <= self.fov {
            self.refractive_index.powi(2) / self.fov.sin().powi(2)
        } else {
            S::zero()
        }
    }
}

/// Position of a receiver relative to the LED.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry<S> {
    pub distance: S,
    pub irradiance_angle: S,
    pub incidence_angle: S,
}

impl<S: Scalar> LinkGeometry<S> {
    pub fn new(distance: S, irradiance_angle: S, incidence_angle: S) -> Result<Self> {
        check_positive("distance", distance)?;
        for (name, v) in [("irradiance angle", irradiance_angle), ("incidence angle", incidence_angle)] {
            if !(v >= S::zero() && v <= S::FRAC_PI_2()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must lie in [0, pi/2], got {}",
                    v.as_f64()
                )));
            }
        }
        Ok(Self {
            distance,
            irradiance_angle,
            incidence_angle,
        })
    }

    /// Upward-facing receiver at horizontal distance `offset` from the point
    /// directly below a downward-facing LED mounted at `height`.
    pub fn from_horizontal_offset(height: S, offset: S) -> Result<Self> {
        check_positive("height", height)?;
        if !(offset >= S::zero() && offset.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "horizontal offset must be finite and >= 0, got {}",
                offset.as_f64()
            )));
        }
        let angle = offset.atan2(height);
        Self::new(height.hypot(offset), angle, angle)
    }
}

/// Receiver noise parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams<S> {
    /// Modulation bandwidth, Hz.
    pub bandwidth: S,
    /// Ambient light photocurrent, A/(m^2 sr).
    pub ambient_photocurrent: S,
    /// Pre-amplifier noise current density, A/sqrt(Hz).
    pub preamp_density: S,
    pub elementary_charge: S,
}

impl<S: Scalar> NoiseParams<S> {
    pub fn new(bandwidth: S, ambient_photocurrent: S, preamp_density: S) -> Result<Self> {
        check_positive("bandwidth", bandwidth)?;
        check_positive("ambient photocurrent", ambient_photocurrent)?;
        check_positive("pre-amplifier density", preamp_density)?;
        Ok(Self {
            bandwidth,
            ambient_photocurrent,
            preamp_density,
            elementary_charge: S::lit(ELEMENTARY_CHARGE),
        })
    }
}

/// Electrical-domain summary of one receiver: composite gain `h * gamma * eta`
/// and noise standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget<S> {
    pub composite_gain: S,
    pub sigma: S,
}

impl<S: Scalar> LinkBudget<S> {
    pub fn new(composite_gain: S, sigma: S) -> Result<Self> {
        if !(composite_gain.is_finite() && composite_gain >= S::zero()) {
            return Err(Error::InvalidArgument(format!(
                "composite gain must be finite and >= 0, got {}",
                composite_gain.as_f64()
            )));
        }
        check_positive("sigma", sigma)?;
        Ok(Self {
            composite_gain,
            sigma,
        })
    }

    /// Amplitude signal-to-noise ratio per unit symbol amplitude.
    pub fn gain_to_noise(&self) -> S {
        self.composite_gain / self.sigma
    }
}

/// Line-of-sight DC channel gain; exactly zero outside the receiver FoV.
pub fn channel_gain<S: Scalar>(led: &LambertianLed<S>, pd: &ReceiverPd<S>, geom: &LinkGeometry<S>) -> S {
    let psi = geom.incidence_angle;
    if psi > pd.fov {
        return S::zero();
    }
    pd.area / geom.distance.powi(2)
        * led.radiant_intensity(geom.irradiance_angle)
        * pd.filter_gain
        * pd.concentrator_gain(psi)
        * psi.cos()
}

/// Noise variance (A^2) from shot noise of the received signal, ambient light,
/// and pre-amplifier thermal noise.
pub fn noise_variance<S: Scalar>(pd: &ReceiverPd<S>, noise: &NoiseParams<S>, gain: S, optical_power: S) -> Result<S> {
    if !(optical_power >= S::zero() && optical_power.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "optical power must be finite and >= 0, got {}",
            optical_power.as_f64()
        )));
    }
    if !(gain >= S::zero() && gain.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "channel gain must be finite and >= 0, got {}",
            gain.as_f64()
        )));
    }
    let e = noise.elementary_charge;
    let two = S::lit(2.0);
    let shot = two * e * pd.responsivity * gain * optical_power;
    let ambient = S::lit(4.0) * S::PI() * e * pd.responsivity * pd.area * noise.ambient_photocurrent
        * (S::one() - pd.fov.cos());
    let thermal = noise.preamp_density.powi(2);
    Ok(noise.bandwidth * (shot + ambient + thermal))
}

/// Link budget for a receiver with DC channel gain `gain` under the LED's
/// DC optical power.
pub fn link_budget_for_gain<S: Scalar>(
    led: &LambertianLed<S>,
    pd: &ReceiverPd<S>,
    noise: &NoiseParams<S>,
    gain: S,
) -> Result<LinkBudget<S>> {
    let var = noise_variance(pd, noise, gain, led.dc_optical_power())?;
    LinkBudget::new(gain * pd.responsivity * led.conversion_eta, var.sqrt())
}

pub fn link_budget<S: Scalar>(
    led: &LambertianLed<S>,
    pd: &ReceiverPd<S>,
    noise: &NoiseParams<S>,
    geom: &LinkGeometry<S>,
) -> Result<LinkBudget<S>> {
    link_budget_for_gain(led, pd, noise, channel_gain(led, pd, geom))
}

/// Gain prefactor `A_r (l + 1) T g / (2 pi)` shared by the position-averaged
/// gain expressions.
pub fn average_gain_prefactor<S: Scalar>(led: &LambertianLed<S>, pd: &ReceiverPd<S>) -> S {
    pd.area * (led.lambert_order() + S::one()) * pd.filter_gain * pd.concentrator_gain(S::zero())
        / (S::lit(2.0) * S::PI())
}

/// Eavesdropper gain averaged over a radius drawn uniformly from
/// `[0, L tan(FoV)]`, in closed form through `2F1(1/2, (l+3)/2; 3/2; -tan^2 FoV)`.
pub fn average_eve_gain<S: Scalar>(led: &LambertianLed<S>, pd: &ReceiverPd<S>) -> Result<S> {
    let l = led.lambert_order();
    let half = S::lit(0.5);
    let z = -pd.fov.tan().powi(2);
    let f = hyp2f1(half, (l + S::lit(3.0)) * half, S::lit(1.5), z)?;
    Ok(average_gain_prefactor(led, pd) / led.height.powi(2) * f)
}

/// The radial average of the gain evaluated by quadrature instead of `2F1`.
pub fn average_eve_gain_by_quadrature<S: Scalar>(led: &LambertianLed<S>, pd: &ReceiverPd<S>) -> Result<S> {
    let l = led.lambert_order();
    let height = led.height;
    let tan_fov = pd.fov.tan();
    let exponent = -(l + S::lit(3.0)) * S::lit(0.5);
    let settings = QuadratureSettings {
        abs_tol: S::zero(),
        rel_tol: S::lit(1e-13).max(S::epsilon() * S::lit(16.0)),
        initial_pieces: 8,
        max_intervals: 4000,
    };
    // integrate in units of L so the integrand is O(1)
    let integral = integrate(|x: S| (S::one() + x * x).powf(exponent), S::zero(), tan_fov, &settings)?;
    Ok(average_gain_prefactor(led, pd) / (height.powi(2) * tan_fov) * integral)
}

/// Link budget of the "average eavesdropper": gain from [`average_eve_gain`],
/// noise evaluated at that gain.
pub fn average_eve_link<S: Scalar>(
    led: &LambertianLed<S>,
    pd: &ReceiverPd<S>,
    noise: &NoiseParams<S>,
) -> Result<LinkBudget<S>> {
    link_budget_for_gain(led, pd, noise, average_eve_gain(led, pd)?)
}

/// Eavesdropper link whose gain-to-noise ratio is `bob / ratio`, with the
/// noise variance computed from the same receiver model at the solved gain.
pub fn eve_link_for_ratio<S: Scalar>(
    bob: &LinkBudget<S>,
    ratio: S,
    led: &LambertianLed<S>,
    pd: &ReceiverPd<S>,
    noise: &NoiseParams<S>,
) -> Result<LinkBudget<S>> {
    check_positive("link ratio", ratio)?;
    let target = bob.gain_to_noise() / ratio;
    let to_noise = |gain: S| -> Result<S> { Ok(link_budget_for_gain(led, pd, noise, gain)?.gain_to_noise()) };
    // gain/sigma(gain) is increasing in gain (sigma^2 is affine in gain)
    let mut lo = S::zero();
    let mut hi = S::one();
    while to_noise(hi)? < target {
        hi *= S::lit(2.0);
        if !hi.is_finite() {
            return Err(Error::InvalidArgument("link ratio target unreachable".into()));
        }
    }
    for _ in 0..200 {
        let mid = (lo + hi) * S::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if to_noise(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    link_budget_for_gain(led, pd, noise, (lo + hi) * S::lit(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn led(dc: f64) -> LambertianLed<f64> {
        LambertianLed::new(60f64.to_radians(), 0.44, 3.0, dc, 0.0, f64::INFINITY).unwrap()
    }

    fn pd() -> ReceiverPd<f64> {
        ReceiverPd::new(1e-4, 0.54, 70f64.to_radians(), 1.0, 1.5).unwrap()
    }

    fn noise() -> NoiseParams<f64> {
        NoiseParams::new(20e6, 10.93, 5e-12).unwrap()
    }

    #[test]
    fn sixty_degree_semi_angle_is_order_one() {
        assert_relative_eq!(led(1.0).lambert_order(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn gain_is_zero_outside_fov() {
        let g = LinkGeometry::new(4.0, 0.2, 71f64.to_radians()).unwrap();
        assert_eq!(channel_gain(&led(1.0), &pd(), &g), 0.0);
    }

    #[test]
    fn nadir_gain_matches_hand_evaluation() {
        // (1e-4 / 9) * (2 / 2pi) * 1 * (2.25 / sin^2 70deg) * 1
        let want = 1e-4 / 9.0 / std::f64::consts::PI * 2.25 / 70f64.to_radians().sin().powi(2);
        let g = LinkGeometry::from_horizontal_offset(3.0, 0.0).unwrap();
        let got = channel_gain(&led(1.0), &pd(), &g);
        assert_relative_eq!(got, want, max_relative = 1e-14);
        assert_relative_eq!(got, 9.011_944_388_602_973e-6, max_relative = 1e-12);
    }

    #[test]
    fn thermal_term_alone() {
        let mut n = noise();
        n.ambient_photocurrent = 0.0;
        let v = noise_variance(&pd(), &n, 0.0, 1.0).unwrap();
        assert_relative_eq!(v, 20e6 * 25e-24, max_relative = 1e-14);
    }

    #[test]
    fn variance_scales_with_bandwidth_and_is_affine_in_power() {
        let mut n2 = noise();
        n2.bandwidth *= 2.0;
        let v1 = noise_variance(&pd(), &noise(), 1e-5, 0.3).unwrap();
        let v2 = noise_variance(&pd(), &n2, 1e-5, 0.3).unwrap();
        assert_relative_eq!(v2, 2.0 * v1, max_relative = 1e-14);

        let f = |p: f64| noise_variance(&pd(), &noise(), 1e-5, p).unwrap();
        let slope = f(1.0) - f(0.0);
        assert!(slope > 0.0);
        assert_relative_eq!(f(0.37), f(0.0) + 0.37 * slope, max_relative = 1e-13);
        assert!(noise_variance(&pd(), &noise(), 1e-5, -1.0).is_err());
    }

    #[test]
    fn golden_noise_variance_at_25_dbm() {
        // independent evaluation: B (2 e gamma h P + 4 pi e gamma A chi (1 - cos Psi) + i^2)
        let p = 10f64.powf(-0.5);
        let g = LinkGeometry::from_horizontal_offset(3.0, 0.0).unwrap();
        let h = channel_gain(&led(p / 0.44), &pd(), &g);
        let v = noise_variance(&pd(), &noise(), h, p).unwrap();
        assert_relative_eq!(v, 1.614_770_269_870_214e-14, max_relative = 1e-12);
    }

    #[test]
    fn gain_monotone_in_offset() {
        let l = led(1.0);
        let mut prev = f64::INFINITY;
        for i in 0..60 {
            let g = LinkGeometry::from_horizontal_offset(3.0, i as f64 * 0.15).unwrap();
            let h = channel_gain(&l, &pd(), &g);
            assert!(h <= prev);
            prev = h;
        }
    }

    #[test]
    fn average_gain_l1_closed_form() {
        let l = led(1.0);
        let psi = pd().fov;
        let xi = average_gain_prefactor(&l, &pd());
        let want = xi * ((2.0 * psi).sin() + 2.0 * psi) / (4.0 * 9.0 * psi.tan());
        assert_relative_eq!(average_eve_gain(&l, &pd()).unwrap(), want, max_relative = 1e-12);
    }

    #[test]
    fn narrow_fov_pins_gain_to_nadir() {
        let mut narrow = pd();
        narrow.fov = 1e-4;
        let l = led(1.0);
        let xi = average_gain_prefactor(&l, &narrow);
        assert_relative_eq!(average_eve_gain(&l, &narrow).unwrap(), xi / 9.0, max_relative = 1e-7);
    }

    #[test]
    fn ratio_link_hits_target() {
        let l = led(1.0);
        let bob = link_budget(&l, &pd(), &noise(), &LinkGeometry::from_horizontal_offset(3.0, 0.0).unwrap()).unwrap();
        let eve = eve_link_for_ratio(&bob, 10.0, &l, &pd(), &noise()).unwrap();
        assert_relative_eq!(eve.gain_to_noise() * 10.0, bob.gain_to_noise(), max_relative = 1e-10);
    }

    #[test]
    fn constructors_validate() {
        assert!(LambertianLed::new(0.0, 0.44, 3.0, 1.0, 0.0, 2.0).is_err());
        assert!(LambertianLed::new(1.0, 0.44, 3.0, 3.0, 0.0, 2.0).is_err());
        assert!(ReceiverPd::new(1e-4, 0.54, 2.0, 1.0, 1.5).is_err());
        assert!(LinkGeometry::new(0.0, 0.0, 0.0).is_err());
        assert!(LinkBudget::new(1.0, 0.0).is_err());
        assert!(NoiseParams::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn f32_instantiation() {
        let l = LambertianLed::<f32>::new(std::f32::consts::FRAC_PI_3, 0.44, 3.0, 1.0, 0.0, f32::INFINITY).unwrap();
        let p = ReceiverPd::<f32>::new(1e-4, 0.54, 1.2217305, 1.0, 1.5).unwrap();
        let g = average_eve_gain(&l, &p).unwrap();
        let g64 = average_eve_gain(&led(1.0), &pd()).unwrap();
        assert_relative_eq!(g as f64, g64, max_relative = 1e-5);
    }
}
