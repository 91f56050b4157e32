//! Monte-Carlo ground truth: MAP detection of shaped PAM symbols, empirical
//! error rates, sampling oracles for closed-form expressions, and
//! eavesdropper position sampling.
//!
//! Every simulation is split into fixed-size chunks. Chunk `k` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` on stream `k`, so results do not depend on
//! how chunks are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::{log_density_std, Estimate, MixtureModel};
use crate::channel::{channel_gain, link_budget_for_gain, LambertianLed, LinkBudget, LinkGeometry, NoiseParams, ReceiverPd};
use crate::constellation::{Distribution, PamConstellation};
use crate::error::{Error, Result};
use crate::error_rate::PairwiseGeometry;
use crate::scalar::Scalar;

const CHUNK: u64 = 1 << 16;

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

fn chunks(n: u64) -> impl IndexedParallelIterator<Item = (u64, u64)> {
    let count = n.div_ceil(CHUNK) as usize;
    (0..count).into_par_iter().map(move |k| {
        let k = k as u64;
        (k, CHUNK.min(n - k * CHUNK))
    })
}

fn inverse_cdf(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = p
        .iter()
        .map(|&v| {
            acc += v;
            acc
        })
        .collect();
    // the last active symbol absorbs any rounding shortfall below 1
    if let Some(top) = p.iter().rposition(|&v| v > 0.0) {
        cdf[top..].iter_mut().for_each(|c| *c = f64::INFINITY);
    }
    cdf
}

/// MAP detector for a constellation seen through one link.
#[derive(Debug, Clone)]
pub struct MapDetector {
    means: Vec<f64>,
    log_prior: Vec<f64>,
    inv_two_var: f64,
}

impl MapDetector {
    pub fn new<S: Scalar>(c: &PamConstellation<S>, p: &[S], link: &LinkBudget<S>) -> Result<Self> {
        if p.len() != c.order() {
            return Err(Error::DimensionMismatch {
                expected: c.order(),
                got: p.len(),
            });
        }
        if !p.iter().any(|&v| v > S::zero()) {
            return Err(Error::InvalidArgument("detector needs a positive prior".into()));
        }
        let g = link.composite_gain.as_f64();
        let sigma = link.sigma.as_f64();
        Ok(Self {
            means: c.amplitudes().iter().map(|a| g * a.as_f64()).collect(),
            log_prior: p
                .iter()
                .map(|&v| if v > S::zero() { v.as_f64().ln() } else { f64::NEG_INFINITY })
                .collect(),
            inv_two_var: 0.5 / (sigma * sigma),
        })
    }

    /// Index maximizing `ln p_m - (y - r_m)^2 / (2 sigma^2)`; ties go to the lower index.
    pub fn detect(&self, y: f64) -> usize {
        let mut best = 0;
        let mut best_metric = f64::NEG_INFINITY;
        for (m, (&r, &lp)) in self.means.iter().zip(&self.log_prior).enumerate() {
            if lp == f64::NEG_INFINITY {
                continue;
            }
            let metric = lp - (y - r) * (y - r) * self.inv_two_var;
            if metric > best_metric {
                best = m;
                best_metric = metric;
            }
        }
        best
    }
}

pub fn map_detect<S: Scalar>(y: S, c: &PamConstellation<S>, p: &[S], link: &LinkBudget<S>) -> Result<usize> {
    Ok(MapDetector::new(c, p, link)?.detect(y.as_f64()))
}

#[derive(Debug, Clone)]
pub struct SimConfig<S: Scalar> {
    pub n_symbols: u64,
    pub seed: u64,
    pub link: LinkBudget<S>,
    pub constellation: PamConstellation<S>,
    pub distribution: Distribution<S>,
}

/// Binomial proportion with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub estimate: f64,
    pub stderr: f64,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64) -> Self {
        if trials == 0 {
            return Self {
                estimate: 0.0,
                stderr: 0.0,
            };
        }
        let n = trials as f64;
        let p = successes as f64 / n;
        Self {
            estimate: p,
            stderr: (p * (1.0 - p) / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub n_symbols: u64,
    pub ser: Proportion,
    pub ber: Proportion,
    /// `confusion[m][n]` counts transmissions of `m` detected as `n`.
    pub confusion: Vec<Vec<u64>>,
}

impl ErrorStats {
    pub fn transmitted(&self, m: usize) -> u64 {
        self.confusion[m].iter().sum()
    }
}

/// Transmits `n_symbols` symbols drawn from the distribution through the
/// Gaussian channel and counts MAP symbol errors and Gray-label bit errors.
pub fn simulate_error_rates<S: Scalar>(cfg: &SimConfig<S>) -> Result<ErrorStats> {
    let c = &cfg.constellation;
    let p = cfg.distribution.probs();
    let det = MapDetector::new(c, p, &cfg.link)?;
    let m = c.order();
    let pf: Vec<f64> = p.iter().map(|v| v.as_f64()).collect();
    let cdf = cumulative(&pf);
    let sigma = cfg.link.sigma.as_f64();
    let labels = c.gray_labels().to_vec();

    let (confusion, bit_errors) = chunks(cfg.n_symbols)
        .map(|(k, len)| {
            let mut rng = chunk_rng(cfg.seed, k);
            let mut counts = vec![0u64; m * m];
            let mut bits = 0u64;
            for _ in 0..len {
                let tx = inverse_cdf(&cdf, rng.random::<f64>());
                let z: f64 = rng.sample(StandardNormal);
                let rx = det.detect(det.means[tx] + sigma * z);
                counts[tx * m + rx] += 1;
                bits += u64::from((labels[tx] ^ labels[rx]).count_ones());
            }
            (counts, bits)
        })
        .reduce(
            || (vec![0u64; m * m], 0u64),
            |(mut a, ab), (b, bb)| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                (a, ab + bb)
            },
        );

    let symbol_errors: u64 = (0..m)
        .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| confusion[i * m + j])
        .sum();
    let bits_per_symbol = u64::from(c.bits_per_symbol());
    Ok(ErrorStats {
        n_symbols: cfg.n_symbols,
        ser: Proportion::new(symbol_errors, cfg.n_symbols),
        ber: Proportion::new(bit_errors, cfg.n_symbols * bits_per_symbol),
        confusion: confusion.chunks(m).map(|r| r.to_vec()).collect(),
    })
}

/// Sampling estimate of `Pr(p_m f(y|m) <= p_n f(y|n))` for `y ~ N(r_m, sigma^2)`,
/// where `r_m - r_n = geom.distance`.
pub fn pairwise_event_mc<S: Scalar>(p_m: S, p_n: S, geom: &PairwiseGeometry<S>, n: u64, seed: u64) -> Proportion {
    let (pm, pn) = (p_m.as_f64(), p_n.as_f64());
    let d = geom.distance.as_f64();
    let sigma = geom.sigma.as_f64();
    let (rm, rn) = (0.0, -d);
    let (lpm, lpn) = (pm.ln(), pn.ln());
    let inv = 0.5 / (sigma * sigma);
    let hits: u64 = chunks(n)
        .map(|(k, len)| {
            let mut rng = chunk_rng(seed, k);
            let mut hits = 0u64;
            for _ in 0..len {
                let z: f64 = rng.sample(StandardNormal);
                let y = rm + sigma * z;
                let lm = lpm - (y - rm) * (y - rm) * inv;
                let ln = lpn - (y - rn) * (y - rn) * inv;
                hits += u64::from(lm <= ln);
            }
            hits
        })
        .sum();
    Proportion::new(hits, n)
}

/// Sampling estimate of the mixture's differential entropy in bits.
pub fn mixture_entropy_mc<S: Scalar>(mm: &MixtureModel<S>, n: u64, seed: u64) -> Result<Estimate<f64>> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let sigma = mm.sigma.as_f64();
    let std: Vec<f64> = mm.means.iter().map(|r| r.as_f64() / sigma).collect();
    let w: Vec<f64> = mm.weights.iter().map(|v| v.as_f64()).collect();
    let total: f64 = w.iter().sum();
    let w: Vec<f64> = w.iter().map(|v| v / total).collect();
    let log_w: Vec<f64> = w.iter().map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY }).collect();
    let cdf = cumulative(&w);
    let (sum, sum_sq) = chunks(n)
        .map(|(k, len)| {
            let mut rng = chunk_rng(seed, k);
            let (mut s, mut s2) = (0.0f64, 0.0f64);
            for _ in 0..len {
                let m = inverse_cdf(&cdf, rng.random::<f64>());
                let z: f64 = rng.sample(StandardNormal);
                let v = -log_density_std(&std, &log_w, std[m] + z) * std::f64::consts::LOG2_E;
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let nf = n as f64;
    let mean = sum / nf;
    let var = (sum_sq - nf * mean * mean) / (nf - 1.0);
    Ok(Estimate {
        mean: mean + sigma.log2(),
        stderr: (var.max(0.0) / nf).sqrt(),
    })
}

/// How the eavesdropper's horizontal distance from the LED axis is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvePositionMode {
    /// Radius uniform on `[0, L tan FoV)`, the weighting of the averaged gain.
    RadialUniform,
    /// Position uniform over the disc of radius `L tan FoV`.
    AreaUniform,
}

/// Horizontal offsets from the LED axis inside the region where the
/// eavesdropper's gain is nonzero.
pub fn sample_eve_offsets<S: Scalar>(
    n: usize,
    mode: EvePositionMode,
    led: &LambertianLed<S>,
    pd: &ReceiverPd<S>,
    seed: u64,
) -> Result<Vec<S>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one position".into()));
    }
    let radius = (led.height * pd.fov.tan()).as_f64();
    let mut out = Vec::with_capacity(n);
    let per_chunk = CHUNK as usize;
    for k in 0..n.div_ceil(per_chunk) {
        let mut rng = chunk_rng(seed, k as u64);
        for _ in 0..per_chunk.min(n - k * per_chunk) {
            let u: f64 = rng.random();
            let r = match mode {
                EvePositionMode::RadialUniform => radius * u,
                EvePositionMode::AreaUniform => radius * u.sqrt(),
            };
            out.push(S::lit(r));
        }
    }
    Ok(out)
}

/// Link budgets of eavesdroppers at sampled positions.
pub fn sample_eve_positions<S: Scalar>(
    n: usize,
    mode: EvePositionMode,
    led: &LambertianLed<S>,
    pd: &ReceiverPd<S>,
    noise: &NoiseParams<S>,
    seed: u64,
) -> Result<Vec<LinkBudget<S>>> {
    sample_eve_offsets(n, mode, led, pd, seed)?
        .into_iter()
        .map(|r| {
            let geom = LinkGeometry::from_horizontal_offset(led.height, r)?;
            link_budget_for_gain(led, pd, noise, channel_gain(led, pd, &geom))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::build_constellation;
    use crate::error_rate::pairwise_error_prob;
    use crate::special::erfc;

    #[test]
    fn uniform_prior_is_nearest_neighbour() {
        let c = build_constellation(4, 3.0).unwrap();
        let link = LinkBudget::new(1.0, 0.8).unwrap();
        let det = MapDetector::new(&c, &[0.25; 4], &link).unwrap();
        for (y, want) in [(-10.0, 0), (-2.01, 0), (-1.99, 1), (0.01, 2), (1.99, 2), (2.01, 3), (50.0, 3)] {
            assert_eq!(det.detect(y), want, "y = {y}");
        }
        // midpoint tie goes to the lower index
        assert_eq!(det.detect(0.0), 1);
    }

    #[test]
    fn point_mass_always_detected() {
        let c = build_constellation(8, 1.0).unwrap();
        let mut p = vec![0.0; 8];
        p[5] = 1.0;
        let link = LinkBudget::new(1.0, 0.1).unwrap();
        for y in [-100.0, -1.0, 0.0, 0.3, 7.0] {
            assert_eq!(map_detect(y, &c, &p, &link).unwrap(), 5);
        }
    }

    #[test]
    fn decisions_respect_pairwise_regions() {
        let c = build_constellation(8, 2.0).unwrap();
        let link = LinkBudget::new(1.0, 0.7).unwrap();
        let p = [0.02, 0.1, 0.2, 0.05, 0.3, 0.13, 0.1, 0.1];
        let det = MapDetector::new(&c, &p, &link).unwrap();
        let mut rng = chunk_rng(9, 0);
        for _ in 0..10_000 {
            let y: f64 = rng.random_range(-4.0..4.0);
            let k = det.detect(y);
            let f = |m: usize| p[m] * (-(y - det.means[m]).powi(2) * det.inv_two_var).exp();
            assert!((0..8).all(|n| f(k) >= f(n)));
        }
    }

    fn cfg(m: usize, a: f64, sigma: f64, p: Vec<f64>, n: u64) -> SimConfig<f64> {
        SimConfig {
            n_symbols: n,
            seed: 42,
            link: LinkBudget::new(1.0, sigma).unwrap(),
            constellation: build_constellation(m, a).unwrap(),
            distribution: Distribution::new(p).unwrap(),
        }
    }

    #[test]
    fn noiseless_channel_has_no_errors() {
        let stats = simulate_error_rates(&cfg(8, 1.0, 1e-6, vec![0.125; 8], 100_000)).unwrap();
        assert_eq!(stats.ser.estimate, 0.0);
        assert_eq!(stats.ber.estimate, 0.0);
    }

    #[test]
    fn binary_antipodal_matches_closed_form() {
        let (a, sigma) = (1.0, 0.9);
        let stats = simulate_error_rates(&cfg(2, a, sigma, vec![0.5, 0.5], 1_000_000)).unwrap();
        let exact = 0.5 * erfc(2.0 * a / (2.0 * 2f64.sqrt() * sigma));
        assert!((stats.ser.estimate - exact).abs() <= 4.0 * stats.ser.stderr);
        assert_eq!(stats.ser, stats.ber);
    }

    #[test]
    fn symbol_frequencies_and_bookkeeping() {
        let p = vec![0.05, 0.25, 0.4, 0.3];
        let n = 400_000;
        let stats = simulate_error_rates(&cfg(4, 2.0, 0.6, p.clone(), n)).unwrap();
        let total: u64 = (0..4).map(|m| stats.transmitted(m)).sum();
        assert_eq!(total, n);
        for (m, &pm) in p.iter().enumerate() {
            let freq = Proportion::new(stats.transmitted(m), n);
            assert!((freq.estimate - pm).abs() <= 4.0 * (pm * (1.0 - pm) / n as f64).sqrt());
        }
        let off: u64 = (0..4).map(|m| stats.transmitted(m) - stats.confusion[m][m]).sum();
        assert_eq!(stats.ser.estimate, off as f64 / n as f64);
    }

    #[test]
    fn results_are_reproducible_and_thread_independent() {
        let config = cfg(8, 1.5, 0.3, vec![0.05, 0.1, 0.15, 0.2, 0.2, 0.15, 0.1, 0.05], 300_000);
        let a = simulate_error_rates(&config).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| simulate_error_rates(&config).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn likelihood_event_matches_closed_form() {
        let g = PairwiseGeometry::new(-1.3, 0.8).unwrap();
        let est = pairwise_event_mc(0.3, 0.5, &g, 1_000_000, 7);
        let exact = pairwise_error_prob(0.3, 0.5, &g);
        assert!((est.estimate - exact).abs() <= 4.0 * est.stderr, "{est:?} vs {exact}");
    }

    #[test]
    fn entropy_sampler_agrees_with_quadrature() {
        let mm = MixtureModel::new(vec![-2.0, 0.5, 1.0, 4.0], 0.7, vec![0.1, 0.4, 0.3, 0.2]).unwrap();
        let est = mixture_entropy_mc(&mm, 500_000, 3).unwrap();
        let quad = crate::capacity::mixture_entropy(&mm).unwrap();
        assert!((est.mean - quad).abs() <= 4.0 * est.stderr, "{est:?} vs {quad}");
    }

    #[test]
    fn eve_offsets_stay_inside_fov() {
        let led = LambertianLed::new(60f64.to_radians(), 0.44, 3.0, 1.0, 0.0, 2.0).unwrap();
        let pd = ReceiverPd::new(1e-4, 0.54, 70f64.to_radians(), 1.0, 1.5).unwrap();
        let noise = NoiseParams::new(20e6, 10.93, 5e-12).unwrap();
        let radius = 3.0 * 70f64.to_radians().tan();
        for mode in [EvePositionMode::RadialUniform, EvePositionMode::AreaUniform] {
            let r = sample_eve_offsets(5000, mode, &led, &pd, 1).unwrap();
            assert!(r.iter().all(|&x| (0.0..radius).contains(&x)));
            let links = sample_eve_positions(100, mode, &led, &pd, &noise, 1).unwrap();
            assert!(links.iter().all(|l| l.composite_gain > 0.0));
        }
        assert!(sample_eve_offsets(0, EvePositionMode::AreaUniform, &led, &pd, 1).is_err());
    }
}
