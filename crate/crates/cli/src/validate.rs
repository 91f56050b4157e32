//! Oracle suites checking the closed-form expressions against sampling,
//! finite differences and independent quadrature.

use pcs_core::channel::{
    average_eve_gain, average_eve_gain_by_quadrature, average_gain_prefactor, LambertianLed, LinkBudget, ReceiverPd,
};
use pcs_core::constellation::{build_constellation, Distribution};
use pcs_core::error_rate::{
    pair_hessian, pair_term, pairwise_error_prob, ErrorRateModel, PairwiseGeometry, DEFAULT_P_FLOOR,
};
use pcs_core::montecarlo::{pairwise_event_mc, simulate_error_rates, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ValidationConfig;

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn unit_link() -> LinkBudget<f64> {
    LinkBudget::new(1.0, 1.0).expect("unit link")
}

fn dirichlet(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn sub_seed(seed: u64, a: u64, b: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (a << 32) ^ b
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseRow {
    pub order: usize,
    pub peak: f64,
    pub m: usize,
    pub n: usize,
    pub p_m: f64,
    pub p_n: f64,
    pub closed_form: f64,
    pub estimate: f64,
    /// Deviation in standard errors of a binomial proportion at the closed-form value.
    pub z: f64,
}

/// Closed-form pairwise probabilities against sampled likelihood-ratio events,
/// one random pair per random configuration.
pub fn pairwise_oracle(configs: usize, samples: u64, seed: u64) -> (Check, Vec<PairwiseRow>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(configs);
    for k in 0..configs {
        let order = if rng.random_bool(0.5) { 4 } else { 8 };
        let peak = rng.random_range(1.0..order as f64);
        let c = build_constellation(order, peak).expect("valid constellation");
        let p = dirichlet(&mut rng, order);
        let m = rng.random_range(0..order);
        let n = (m + rng.random_range(1..order)) % order;
        let geom = PairwiseGeometry::for_symbols(&c, &unit_link(), m, n).expect("distinct symbols");
        let closed_form = pairwise_error_prob(p[m], p[n], &geom);
        let est = pairwise_event_mc(p[m], p[n], &geom, samples, sub_seed(seed, 1, k as u64));
        let se = (closed_form * (1.0 - closed_form) / samples as f64).sqrt();
        let dev = (est.estimate - closed_form).abs();
        let z = if se > 0.0 { dev / se } else if dev == 0.0 { 0.0 } else { f64::INFINITY };
        rows.push(PairwiseRow {
            order,
            peak,
            m,
            n,
            p_m: p[m],
            p_n: p[n],
            closed_form,
            estimate: est.estimate,
            z,
        });
    }
    let worst = rows.iter().map(|r| r.z).fold(0.0, f64::max);
    let check = Check {
        name: "pairwise_oracle",
        passed: worst <= 4.0,
        detail: format!("{configs} configurations, {samples} samples each, largest deviation {worst:.2} stderr"),
    };
    (check, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub distribution: usize,
    pub order: usize,
    pub peak: f64,
    pub low_half: bool,
    pub ser_mc: f64,
    pub ser_stderr: f64,
    pub ser_upper: f64,
    pub ser_approx: f64,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Sampled MAP symbol error rate against the union bound and the
/// nearest-neighbour approximation over a sweep of the peak amplitude.
pub fn bound_ordering(distributions: usize, samples: u64, seed: u64) -> (Check, Vec<SweepPoint>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jobs: Vec<(usize, usize, Vec<f64>)> = (0..distributions)
        .map(|i| {
            let order = if i % 2 == 0 { 4 } else { 8 };
            (i, order, dirichlet(&mut rng, order))
        })
        .collect();
    let points: Vec<SweepPoint> = jobs
        .par_iter()
        .flat_map_iter(|(i, order, p)| {
            let grid = if *order == 4 { linspace(1.0, 10.0, 10) } else { linspace(2.0, 24.0, 12) };
            let half = grid.len() / 2;
            grid.into_iter().enumerate().map(move |(j, peak)| {
                let c = build_constellation(*order, peak).expect("valid constellation");
                let model = ErrorRateModel::new(&c, &unit_link()).expect("valid model");
                let stats = simulate_error_rates(&SimConfig {
                    n_symbols: samples,
                    seed: sub_seed(seed, 2 + *i as u64, j as u64),
                    link: unit_link(),
                    constellation: c,
                    distribution: Distribution::new(p.clone()).expect("sampled distribution"),
                })
                .expect("valid simulation");
                SweepPoint {
                    distribution: *i,
                    order: *order,
                    peak,
                    low_half: j < half,
                    ser_mc: stats.ser.estimate,
                    ser_stderr: stats.ser.stderr,
                    ser_upper: model.ser_upper(p).expect("valid p"),
                    ser_approx: model.ser_approx(p).expect("valid p"),
                }
            })
        })
        .collect();
    let violations = points
        .iter()
        .filter(|q| q.ser_mc > q.ser_upper + 4.0 * q.ser_stderr)
        .count();
    let low: Vec<&SweepPoint> = points.iter().filter(|q| q.low_half).collect();
    let mad = |f: fn(&SweepPoint) -> f64| low.iter().map(|q| (f(q) - q.ser_mc).abs()).sum::<f64>() / low.len() as f64;
    let mad_upper = mad(|q| q.ser_upper);
    let mad_approx = mad(|q| q.ser_approx);
    let check = Check {
        name: "bound_ordering",
        passed: violations == 0 && mad_approx < mad_upper,
        detail: format!(
            "{} points, {violations} above bound + 4 stderr; low-amplitude mean abs deviation: approx {mad_approx:.3e}, bound {mad_upper:.3e}",
            points.len()
        ),
    };
    (check, points)
}

fn random_model(rng: &mut ChaCha8Rng) -> ErrorRateModel<f64> {
    let order = if rng.random_bool(0.5) { 4 } else { 8 };
    let c = build_constellation(order, rng.random_range(0.5..12.0)).expect("valid constellation");
    ErrorRateModel::new(&c, &unit_link()).expect("valid model")
}

/// Midpoint concavity of both BER expressions, then negative semidefiniteness
/// and finite-difference agreement of the pairwise Hessian blocks.
pub fn concavity_suite(points: usize, blocks: usize, directions: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_gap = f64::INFINITY;
    for _ in 0..points {
        let model = random_model(&mut rng);
        let x = dirichlet(&mut rng, model.order());
        let y = dirichlet(&mut rng, model.order());
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        for f in [ErrorRateModel::ber_upper, ErrorRateModel::ber_approx] {
            let (fm, fx, fy) = (f(&model, &mid), f(&model, &x), f(&model, &y));
            let gap = fm.expect("valid p") - 0.5 * (fx.expect("valid p") + fy.expect("valid p"));
            worst_gap = worst_gap.min(gap);
        }
    }
    let mut worst_curvature = f64::NEG_INFINITY;
    let mut worst_fd = 0.0f64;
    for _ in 0..blocks {
        let g = PairwiseGeometry::new(rng.random_range(0.5..4.0), 1.0).expect("valid geometry");
        let (pm, pn) = (rng.random_range(0.05..0.6), rng.random_range(0.05..0.6));
        let h: [[f64; 2]; 2] = pair_hessian(pm, pn, &g);
        let scale = h[0][0].abs() + h[1][1].abs();
        for _ in 0..directions {
            let (u, v) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let q = h[0][0] * u * u + 2.0 * h[0][1] * u * v + h[1][1] * v * v;
            worst_curvature = worst_curvature.max(q / scale);
        }
        let f = |a: f64, b: f64| pair_term(a, b, &g);
        let (hm, hn) = (1e-4 * pm, 1e-4 * pn);
        let f0 = f(pm, pn);
        let fd = [
            [
                (f(pm + hm, pn) - 2.0 * f0 + f(pm - hm, pn)) / (hm * hm),
                (f(pm + hm, pn + hn) - f(pm + hm, pn - hn) - f(pm - hm, pn + hn) + f(pm - hm, pn - hn)) / (4.0 * hm * hn),
            ],
            [0.0, (f(pm, pn + hn) - 2.0 * f0 + f(pm, pn - hn)) / (hn * hn)],
        ];
        let fd_scale = fd.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            worst_fd = worst_fd.max((h[i][j] - fd[i][j]).abs() / fd_scale);
        }
    }
    Check {
        name: "concavity",
        passed: worst_gap >= -1e-12 && worst_curvature <= 1e-12 && worst_fd <= 1e-4,
        detail: format!(
            "{points} midpoints (worst gap {worst_gap:.2e}); {blocks} Hessian blocks x {directions} directions (largest relative curvature {worst_curvature:.2e}, finite-difference mismatch {worst_fd:.2e})"
        ),
    }
}

/// Analytic BER-bound gradient against central differences at interior points.
pub fn gradient_suite(points: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let model = random_model(&mut rng);
        let n = model.order();
        let p: Vec<f64> = dirichlet(&mut rng, n).iter().map(|v| 0.01 + (1.0 - 0.01 * n as f64) * v).collect();
        let g = model.grad_ber_upper(&p, DEFAULT_P_FLOOR).expect("interior point");
        let gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for k in 0..n {
            let h = 1e-6;
            let (mut up, mut dn) = (p.clone(), p.clone());
            up[k] += h;
            dn[k] -= h;
            let fd = (model.ber_upper(&up).expect("valid p") - model.ber_upper(&dn).expect("valid p")) / (2.0 * h);
            worst = worst.max((g[k] - fd).abs() / gmax);
        }
    }
    Check {
        name: "gradient",
        passed: worst <= 1e-5,
        detail: format!("{points} points, largest relative mismatch {worst:.2e}"),
    }
}

/// The averaged eavesdropper gain in closed form against the `l = 1`
/// elementary form and against direct quadrature.
pub fn hypergeometric_suite() -> Check {
    let pd = ReceiverPd::new(1e-4, 0.54, 70f64.to_radians(), 1.0, 1.5).expect("valid receiver");
    let psi = pd.fov;
    let mut worst_l1 = 0.0f64;
    let mut worst_quad = 0.0f64;
    for l in [1.0f64, 2.0, 5.0] {
        let semi = 0.5f64.powf(1.0 / l).acos();
        let led = LambertianLed::new(semi, 0.44, 3.0, 0.5, 0.0, 1.0).expect("valid LED");
        let general = average_eve_gain(&led, &pd).expect("convergent series");
        let quad = average_eve_gain_by_quadrature(&led, &pd).expect("convergent quadrature");
        worst_quad = worst_quad.max(((general - quad) / quad).abs());
        if l == 1.0 {
            let elementary =
                average_gain_prefactor(&led, &pd) * ((2.0 * psi).sin() + 2.0 * psi) / (4.0 * led.height.powi(2) * psi.tan());
            worst_l1 = worst_l1.max(((general - elementary) / elementary).abs());
        }
    }
    Check {
        name: "hypergeometric",
        passed: worst_l1 <= 1e-10 && worst_quad <= 1e-8,
        detail: format!("l = 1 elementary form {worst_l1:.2e}, quadrature for l in {{1, 2, 5}} {worst_quad:.2e}"),
    }
}

/// Every suite at the sizes in `cfg`.
pub fn run_all(cfg: &ValidationConfig) -> Vec<Check> {
    vec![
        pairwise_oracle(cfg.pairwise_configs, cfg.pairwise_samples, cfg.seed).0,
        bound_ordering(cfg.ser_distributions, cfg.ser_samples, cfg.seed).0,
        concavity_suite(1000, 100, 100, cfg.seed),
        gradient_suite(200, cfg.seed),
        hypergeometric_suite(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        assert!(pairwise_oracle(6, 200_000, 1).0.passed);
        assert!(concavity_suite(50, 5, 10, 2).passed);
        assert!(gradient_suite(10, 3).passed);
        assert!(hypergeometric_suite().passed);
    }

    #[test]
    fn suites_are_deterministic() {
        assert_eq!(pairwise_oracle(3, 50_000, 4).1, pairwise_oracle(3, 50_000, 4).1);
    }
}
