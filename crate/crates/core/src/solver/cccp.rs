//! Convex-concave procedure for the shaping design problems.
//!
//! The Bob BER upper bound is concave in `p`, so the reliability constraint
//! `ber(p) <= threshold` is replaced at every outer iteration by its tangent
//! plane, which over-estimates it. The unknown-CSI objective contains a convex
//! term in `a^T p` that is replaced by its tangent line. Each outer step is
//! then a concave maximization over a polytope, handed to [`inner_solve`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::inner::{inner_solve, InnerSettings, Objective};
use super::qp::Polytope;
use crate::capacity::{
    channel_capacity, channel_capacity_with_grad, eve_capacity_bound, eve_snr_coefficient, secrecy_capacity,
    secrecy_capacity_with_grad, MixtureModel,
};
use crate::channel::LinkBudget;
use crate::constellation::{ConstraintMode, ConstraintSet, Distribution, PamConstellation, SymmetryMatrix};
use crate::error::{Error, Result};
use crate::error_rate::{ErrorRateModel, DEFAULT_P_FLOOR};
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Maximize `C_B - C_E` with Eve's link known.
    KnownCsi,
    /// Maximize the Bhatia–Davis secrecy lower bound against the average Eve.
    UnknownCsi,
    /// The unknown-CSI problem restricted to symmetric distributions, where it
    /// reduces to maximizing Bob's output entropy.
    UnknownCsiSymmetric,
    /// Maximize Eve's approximate BER subject to Bob's reliability.
    QosMaxEveBer,
}

/// What the designer knows about the eavesdropper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EveChannel<S> {
    Known(LinkBudget<S>),
    /// Link of the position-averaged eavesdropper.
    Average(LinkBudget<S>),
}

impl<S: Copy> EveChannel<S> {
    pub fn link(&self) -> LinkBudget<S> {
        match *self {
            Self::Known(l) | Self::Average(l) => l,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DesignProblem<S: Scalar> {
    pub variant: Variant,
    pub constellation: PamConstellation<S>,
    pub bob: LinkBudget<S>,
    pub eve: EveChannel<S>,
    pub constraints: ConstraintSet<S>,
    /// LED bias current `I_DC`, which scales the flicker allowance.
    pub dc_bias: S,
}

impl<S: Scalar> DesignProblem<S> {
    pub fn new(
        variant: Variant,
        constellation: PamConstellation<S>,
        bob: LinkBudget<S>,
        eve: EveChannel<S>,
        constraints: ConstraintSet<S>,
        dc_bias: S,
    ) -> Result<Self> {
        match (variant, &eve) {
            (Variant::KnownCsi | Variant::QosMaxEveBer, EveChannel::Known(_)) => {}
            (Variant::UnknownCsi | Variant::UnknownCsiSymmetric, EveChannel::Average(_)) => {}
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "{variant:?} needs {} eavesdropper link",
                    if matches!(variant, Variant::KnownCsi | Variant::QosMaxEveBer) {
                        "a known"
                    } else {
                        "an averaged"
                    }
                )))
            }
        }
        if variant == Variant::KnownCsi {
            let (b, e) = (bob.gain_to_noise(), eve.link().gain_to_noise());
            if b < e {
                return Err(Error::NotDegraded {
                    bob: b.as_f64(),
                    eve: e.as_f64(),
                });
            }
        }
        if !(bob.composite_gain > S::zero()) {
            return Err(Error::InvalidArgument("Bob's link needs a positive gain".into()));
        }
        if !(dc_bias >= S::zero() && dc_bias.is_finite()) {
            return Err(Error::InvalidArgument("DC bias must be finite and >= 0".into()));
        }
        Ok(Self {
            variant,
            constellation,
            bob,
            eve,
            constraints,
            dc_bias,
        })
    }

    pub fn mode(&self) -> ConstraintMode {
        if self.variant == Variant::UnknownCsiSymmetric {
            ConstraintMode::Symmetric
        } else {
            self.constraints.mode
        }
    }

    pub fn order(&self) -> usize {
        self.constellation.order()
    }

    /// Simplex together with the flicker or symmetry rows.
    pub fn base_polytope(&self) -> Result<Polytope<S>> {
        let m = self.order();
        let mut poly = Polytope::simplex(m, S::one());
        match self.mode() {
            ConstraintMode::Symmetric => {
                let s = SymmetryMatrix::new(m)?;
                for i in 0..s.rows() {
                    let row = (0..m).map(|j| S::lit(f64::from(s.entry(i, j)))).collect();
                    poly.add_equality(row, S::zero())?;
                }
            }
            ConstraintMode::Flicker => {
                let a = self.constellation.amplitudes().to_vec();
                let allowance = self.constraints.flicker_alpha * self.dc_bias;
                if allowance > S::zero() {
                    poly.add_inequality(a.clone(), allowance)?;
                    poly.add_inequality(a.iter().map(|&v| -v).collect(), allowance)?;
                } else {
                    poly.add_equality(a, S::zero())?;
                }
            }
        }
        Ok(poly)
    }

    /// Design objective at `p` (the quantity the trace records).
    pub fn objective(&self, p: &[S]) -> Result<S> {
        let c = &self.constellation;
        match self.variant {
            Variant::KnownCsi => secrecy_capacity(p, &self.bob, &self.eve.link(), c),
            Variant::UnknownCsi | Variant::UnknownCsiSymmetric => {
                let cb = channel_capacity(&MixtureModel::from_link(c, &self.bob, p)?)?;
                let t = c.mean_amplitude(p).powi(2);
                Ok(cb - eve_capacity_bound(&self.eve.link(), c.peak(), t)?)
            }
            Variant::QosMaxEveBer => ErrorRateModel::new(c, &self.eve.link())?.ber_approx(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CccpSettings<S> {
    /// Outer iteration limit `L_max`.
    pub max_iters: usize,
    /// Stop when the relative objective change falls to `rel_tol`.
    pub rel_tol: S,
    pub n_starts: usize,
    pub seed: u64,
    /// Probabilities are raised to at least this value before the BER
    /// gradient is evaluated.
    pub p_floor: S,
    pub inner: InnerSettings<S>,
}

impl<S: Scalar> Default for CccpSettings<S> {
    fn default() -> Self {
        Self {
            max_iters: 50,
            rel_tol: S::lit(1e-2),
            n_starts: 32,
            seed: 0,
            p_floor: S::lit(DEFAULT_P_FLOOR),
            inner: InnerSettings::default(),
        }
    }
}

impl<S: Scalar> CccpSettings<S> {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.n_starts == 0 {
            return Err(Error::InvalidArgument("max_iters and n_starts must be >= 1".into()));
        }
        if !(self.rel_tol > S::zero()) {
            return Err(Error::InvalidArgument("rel_tol must be > 0".into()));
        }
        if !(self.p_floor > S::zero() && self.p_floor < S::one()) {
            return Err(Error::InvalidArgument("p_floor must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Constraint residuals at a returned distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport<S> {
    pub mode: ConstraintMode,
    pub ber_upper: S,
    pub ber_threshold: S,
    /// `|a^T p| - alpha I_DC`
    pub flicker_violation: S,
    /// `max |S p|`
    pub symmetry_residual: S,
    /// `|sum(p) - 1|`
    pub simplex_residual: S,
}

impl<S: Scalar> FeasibilityReport<S> {
    pub fn is_feasible(&self, tol: S) -> bool {
        let shaping = match self.mode {
            ConstraintMode::Flicker => self.flicker_violation <= tol,
            ConstraintMode::Symmetric => self.symmetry_residual <= tol,
        };
        shaping && self.ber_upper <= self.ber_threshold + tol && self.simplex_residual <= tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "S: Scalar + Serialize + serde::de::DeserializeOwned"))]
pub struct SolveResult<S: Scalar> {
    pub p_opt: Distribution<S>,
    pub objective: S,
    /// Objective at the starting point followed by one entry per outer iteration.
    pub objective_trace: Vec<S>,
    pub iterations: usize,
    pub converged: bool,
    pub feasibility: FeasibilityReport<S>,
    pub start_index: usize,
    /// Final value of the auxiliary variable `t` standing in for `(a^T p)^2`
    /// in the unknown-CSI problems.
    pub aux_t: Option<S>,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, Error)]
pub enum SolveError<S: Scalar> {
    #[error("infeasible design: {0}")]
    Infeasible(String),
    #[error("no convergence within {} outer iterations", .0.iterations)]
    MaxIters(Box<SolveResult<S>>),
    #[error(transparent)]
    Numeric(Error),
}

impl<S: Scalar> From<Error> for SolveError<S> {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible(msg) => Self::Infeasible(msg),
            other => Self::Numeric(other),
        }
    }
}

/// `p -> offset + gradient^T p`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineFunction<S> {
    pub gradient: Vec<S>,
    pub offset: S,
}

impl<S: Scalar> AffineFunction<S> {
    pub fn eval(&self, p: &[S]) -> S {
        self.offset + dot(&self.gradient, p)
    }
}

/// Tangent plane of Bob's BER upper bound at `p_k`; every `p_k[m]` must be
/// at least `floor`.
pub fn linearized_ber_constraint<S: Scalar>(
    p_k: &[S],
    link: &LinkBudget<S>,
    c: &PamConstellation<S>,
    floor: S,
) -> Result<AffineFunction<S>> {
    let model = ErrorRateModel::new(c, link)?;
    tangent(&model, p_k, floor)
}

fn tangent<S: Scalar>(model: &ErrorRateModel<S>, p_k: &[S], floor: S) -> Result<AffineFunction<S>> {
    let gradient = model.grad_ber_upper(p_k, floor)?;
    let offset = model.ber_upper(p_k)? - dot(&gradient, p_k);
    Ok(AffineFunction { gradient, offset })
}

struct KnownCsiObjective<'a, S: Scalar> {
    c: &'a PamConstellation<S>,
    bob: LinkBudget<S>,
    eve: LinkBudget<S>,
}

impl<S: Scalar> Objective<S> for KnownCsiObjective<'_, S> {
    fn value(&self, x: &[S]) -> Result<S> {
        secrecy_capacity(x, &self.bob, &self.eve, self.c)
    }

    fn value_grad(&self, x: &[S]) -> Result<(S, Vec<S>)> {
        secrecy_capacity_with_grad(x, &self.bob, &self.eve, self.c)
    }
}

/// `C_B(p) + w^T p`: Bob's capacity plus the tangent of the convex Eve term.
struct BobPlusLinear<'a, S: Scalar> {
    c: &'a PamConstellation<S>,
    bob: LinkBudget<S>,
    w: Vec<S>,
}

impl<S: Scalar> Objective<S> for BobPlusLinear<'_, S> {
    fn value(&self, x: &[S]) -> Result<S> {
        Ok(channel_capacity(&MixtureModel::from_link(self.c, &self.bob, x)?)? + dot(&self.w, x))
    }

    fn value_grad(&self, x: &[S]) -> Result<(S, Vec<S>)> {
        let (v, mut g) = channel_capacity_with_grad(&MixtureModel::from_link(self.c, &self.bob, x)?)?;
        g.iter_mut().zip(&self.w).for_each(|(gi, &wi)| *gi += wi);
        Ok((v + dot(&self.w, x), g))
    }
}

struct EveBerObjective<S> {
    model: ErrorRateModel<S>,
    floor: S,
}

impl<S: Scalar> Objective<S> for EveBerObjective<S> {
    fn value(&self, x: &[S]) -> Result<S> {
        self.model.ber_approx(x)
    }

    fn value_grad(&self, x: &[S]) -> Result<(S, Vec<S>)> {
        let clamped: Vec<S> = x.iter().map(|&v| v.max(self.floor)).collect();
        Ok((self.model.ber_approx(x)?, self.model.grad_ber_approx(&clamped, self.floor)?))
    }
}

fn clamp_floor<S: Scalar>(p: &[S], floor: S) -> Vec<S> {
    p.iter().map(|&v| v.max(floor)).collect()
}

/// Pushes `p` towards lower Bob BER inside `base` until the threshold holds.
///
/// Each step re-linearizes the bound and moves along the projected negative
/// gradient, halving the step length after a step that does not lower the
/// bound. Descent on a concave function can stall short of the threshold, in
/// which case `None` is returned.
fn restore<S: Scalar>(
    model: &ErrorRateModel<S>,
    base: &Polytope<S>,
    mut p: Vec<S>,
    threshold: S,
    floor: S,
) -> Result<Option<Vec<S>>> {
    let mut ber = model.ber_upper(&p)?;
    // displacement length of the trial step, on the scale of the simplex
    let mut reach = S::one();
    for _ in 0..200 {
        if ber <= threshold || reach < S::lit(1e-12) {
            break;
        }
        let g = model.grad_ber_upper(&clamp_floor(&p, floor), floor)?;
        let gn = dot(&g, &g).sqrt();
        if !(gn > S::zero()) {
            break;
        }
        let eta = reach / gn;
        let trial: Vec<S> = p.iter().zip(&g).map(|(&a, &b)| a - eta * b).collect();
        let next = base.project(&trial)?;
        let nb = model.ber_upper(&next)?;
        if nb < ber {
            p = next;
            ber = nb;
            reach = (reach * S::lit(2.0)).min(S::one());
        } else {
            reach *= S::lit(0.5);
        }
    }
    Ok(if ber <= threshold { Some(p) } else { None })
}

fn finalize<S: Scalar>(prob: &DesignProblem<S>, p: &[S]) -> Result<Distribution<S>> {
    let m = p.len();
    let mut q: Vec<S> = p.iter().map(|&v| v.max(S::zero())).collect();
    if prob.mode() == ConstraintMode::Symmetric {
        for i in 0..m / 2 {
            let v = (q[i] + q[m - 1 - i]) * S::lit(0.5);
            q[i] = v;
            q[m - 1 - i] = v;
        }
    }
    Distribution::normalized(q)
}

fn report<S: Scalar>(prob: &DesignProblem<S>, model: &ErrorRateModel<S>, p: &Distribution<S>) -> Result<FeasibilityReport<S>> {
    let probs = p.probs();
    let sym = SymmetryMatrix::new(prob.order())?
        .apply(probs)
        .into_iter()
        .fold(S::zero(), |a, v| a.max(v.abs()));
    Ok(FeasibilityReport {
        mode: prob.mode(),
        ber_upper: model.ber_upper(probs)?,
        ber_threshold: prob.constraints.pre_fec_threshold,
        flicker_violation: prob.constellation.mean_amplitude(probs).abs()
            - prob.constraints.flicker_alpha * prob.dc_bias,
        symmetry_residual: sym,
        simplex_residual: (probs.iter().copied().sum::<S>() - S::one()).abs(),
    })
}

/// Runs the CCCP from one starting point.
///
/// The start is first projected onto the simplex and shaping constraints and,
/// if it violates the BER threshold, moved by the restoration phase. Hitting
/// `max_iters` is reported through `converged = false`.
pub fn solve_from_start<S: Scalar>(
    prob: &DesignProblem<S>,
    settings: &CccpSettings<S>,
    start: &[S],
    start_index: usize,
) -> std::result::Result<SolveResult<S>, SolveError<S>> {
    settings.validate()?;
    if start.len() != prob.order() {
        return Err(Error::DimensionMismatch {
            expected: prob.order(),
            got: start.len(),
        }
        .into());
    }
    let c = &prob.constellation;
    let floor = settings.p_floor;
    let threshold = prob.constraints.pre_fec_threshold;
    let model = ErrorRateModel::new(c, &prob.bob)?;
    let base = prob.base_polytope()?;
    let p0 = base.project(start)?;
    let mut restored = restore(&model, &base, p0, threshold, floor)?;
    if restored.is_none() {
        // descent on a concave rate can stall; retry from the widest-spaced pair
        let m = prob.order();
        let mut outer = vec![S::zero(); m];
        outer[0] = S::lit(0.5);
        outer[m - 1] = S::lit(0.5);
        restored = restore(&model, &base, base.project(&outer)?, threshold, floor)?;
    }
    let Some(mut p) = restored else {
        return Err(SolveError::Infeasible(format!(
            "start {start_index} cannot reach BER <= {}",
            threshold.as_f64()
        )));
    };

    let mut value = prob.objective(&p)?;
    let mut trace = vec![value];
    let mut converged = false;
    let mut iterations = 0;
    let mut inner_iterations = 0;
    let mut aux_t = match prob.variant {
        Variant::UnknownCsi | Variant::UnknownCsiSymmetric => Some(c.mean_amplitude(&p).powi(2)),
        _ => None,
    };
    let eve = prob.eve.link();
    let amplitudes = c.amplitudes().to_vec();

    for k in 1..=settings.max_iters {
        let lin = tangent(&model, &clamp_floor(&p, floor), floor)?;
        let mut poly = base.clone();
        poly.add_inequality(lin.gradient.clone(), threshold - lin.offset)?;

        let s_k = c.mean_amplitude(&p);
        let inner = match prob.variant {
            Variant::KnownCsi => inner_solve(&KnownCsiObjective { c, bob: prob.bob, eve }, &poly, &p, &settings.inner)?,
            Variant::UnknownCsi | Variant::UnknownCsiSymmetric => {
                // slope of -1/2 log2(1 + c (A^2 - t)) in t, times d(s^2)/ds
                let coef = eve_snr_coefficient(&eve);
                let a2 = c.peak() * c.peak();
                let slope = coef / (S::lit(2.0) * S::LN_2() * (S::one() + coef * (a2 - s_k * s_k)));
                let w = amplitudes.iter().map(|&a| slope * S::lit(2.0) * s_k * a).collect();
                inner_solve(&BobPlusLinear { c, bob: prob.bob, w }, &poly, &p, &settings.inner)?
            }
            Variant::QosMaxEveBer => {
                let obj = EveBerObjective {
                    model: ErrorRateModel::new(c, &eve)?,
                    floor,
                };
                inner_solve(&obj, &poly, &p, &settings.inner)?
            }
        };
        inner_iterations += inner.iterations;
        p = inner.x;
        if aux_t.is_some() {
            let s = c.mean_amplitude(&p);
            aux_t = Some(S::lit(2.0) * s_k * s - s_k * s_k);
        }
        let next = prob.objective(&p)?;
        trace.push(next);
        iterations = k;
        let change = (next - value).abs() / value.abs().max(S::lit(1e-12));
        value = next;
        if change <= settings.rel_tol {
            converged = true;
            break;
        }
    }

    let p_opt = finalize(prob, &p)?;
    let feasibility = report(prob, &model, &p_opt)?;
    Ok(SolveResult {
        objective: prob.objective(p_opt.probs())?,
        p_opt,
        objective_trace: trace,
        iterations,
        converged,
        feasibility,
        start_index,
        aux_t,
        inner_iterations,
    })
}

/// Start 0 is the uniform distribution; start `i > 0` is a Dirichlet(1, ..., 1)
/// draw from `ChaCha8Rng::seed_from_u64(seed)` on stream `i`.
pub fn starting_point<S: Scalar>(order: usize, seed: u64, index: usize) -> Vec<S> {
    if index == 0 {
        return vec![S::one() / S::from_usize_lossy(order); order];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let draws: Vec<f64> = (0..order).map(|_| Exp1.sample(&mut rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|v| S::lit(v / total)).collect()
}

/// Runs every start in parallel, returning the per-start outcomes in start order.
pub fn solve_all_starts<S: Scalar>(
    prob: &DesignProblem<S>,
    settings: &CccpSettings<S>,
) -> Vec<std::result::Result<SolveResult<S>, SolveError<S>>> {
    (0..settings.n_starts)
        .into_par_iter()
        .map(|i| solve_from_start(prob, settings, &starting_point(prob.order(), settings.seed, i), i))
        .collect()
}

/// Multi-start CCCP: the best objective over all starts wins, ties going to
/// the lowest start index.
pub fn solve<S: Scalar>(
    prob: &DesignProblem<S>,
    settings: &CccpSettings<S>,
) -> std::result::Result<SolveResult<S>, SolveError<S>> {
    settings.validate()?;
    let mut best: Option<SolveResult<S>> = None;
    let mut first_error = None;
    for outcome in solve_all_starts(prob, settings) {
        match outcome {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.objective > b.objective) {
                    best = Some(r);
                }
            }
            Err(SolveError::Infeasible(_)) => {}
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    match (best, first_error) {
        (Some(b), _) if b.converged => Ok(b),
        (Some(b), _) => Err(SolveError::MaxIters(Box::new(b))),
        (None, Some(e)) => Err(e),
        (None, None) => Err(SolveError::Infeasible(format!(
            "none of {} starts reaches the BER threshold",
            settings.n_starts
        ))),
    }
}

fn check_variant<S: Scalar>(prob: &DesignProblem<S>, want: &[Variant]) -> std::result::Result<(), SolveError<S>> {
    if want.contains(&prob.variant) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("expected one of {want:?}, got {:?}", prob.variant)).into())
    }
}

pub fn solve_known_csi<S: Scalar>(
    prob: &DesignProblem<S>,
    settings: &CccpSettings<S>,
) -> std::result::Result<SolveResult<S>, SolveError<S>> {
    check_variant(prob, &[Variant::KnownCsi])?;
    solve(prob, settings)
}

pub fn solve_unknown_csi<S: Scalar>(
    prob: &DesignProblem<S>,
    settings: &CccpSettings<S>,
) -> std::result::Result<SolveResult<S>, SolveError<S>> {
    check_variant(prob, &[Variant::UnknownCsi])?;
    solve(prob, settings)
}

pub fn solve_symmetric<S: Scalar>(
    prob: &DesignProblem<S>,
    settings: &CccpSettings<S>,
) -> std::result::Result<SolveResult<S>, SolveError<S>> {
    check_variant(prob, &[Variant::UnknownCsiSymmetric])?;
    solve(prob, settings)
}

pub fn solve_qos<S: Scalar>(
    prob: &DesignProblem<S>,
    settings: &CccpSettings<S>,
) -> std::result::Result<SolveResult<S>, SolveError<S>> {
    check_variant(prob, &[Variant::QosMaxEveBer])?;
    solve(prob, settings)
}
