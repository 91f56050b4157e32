#![allow(dead_code)]

use pcs_core::channel::*;
use pcs_core::constellation::{build_constellation, PamConstellation};
use rand::Rng;

pub struct Scene {
    pub led: LambertianLed<f64>,
    pub pd: ReceiverPd<f64>,
    pub noise: NoiseParams<f64>,
    pub bob: LinkBudget<f64>,
    pub eve: LinkBudget<f64>,
    pub constellation: PamConstellation<f64>,
}

/// Indoor scene with Bob under the LED and an eavesdropper ten times weaker
/// in gain-to-noise ratio.
pub fn scene(dbm: f64, order: usize) -> Scene {
    let led = LambertianLed::new(60f64.to_radians(), 0.44, 3.0, 1.0, 0.0, f64::INFINITY)
        .unwrap()
        .with_dc_optical_power(10f64.powf((dbm - 30.0) / 10.0))
        .unwrap();
    let pd = ReceiverPd::new(1e-4, 0.54, 70f64.to_radians(), 1.0, 1.5).unwrap();
    let noise = NoiseParams::new(20e6, 10.93, 5e-12).unwrap();
    let bob = link_budget(&led, &pd, &noise, &LinkGeometry::new(3.0, 0.0, 0.0).unwrap()).unwrap();
    let eve = eve_link_for_ratio(&bob, 10.0, &led, &pd, &noise).unwrap();
    let constellation = build_constellation(order, led.peak_amplitude()).unwrap();
    Scene {
        led,
        pd,
        noise,
        bob,
        eve,
        constellation,
    }
}

/// Uniform draw on the simplex, every entry at least `floor`.
pub fn interior_point<R: Rng>(rng: &mut R, n: usize, floor: f64) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = e.iter().sum();
    let scale = 1.0 - floor * n as f64;
    e.iter().map(|v| floor + scale * v / s).collect()
}
