//! Projected-gradient ascent for concave objectives over a polytope.

use serde::{Deserialize, Serialize};

use super::qp::Polytope;
use crate::error::Result;
use crate::scalar::{dot, Scalar};

/// A concave objective to maximize.
pub trait Objective<S> {
    fn value(&self, x: &[S]) -> Result<S>;
    fn value_grad(&self, x: &[S]) -> Result<(S, Vec<S>)>;
}

/// Adapter turning a closure `x -> (f(x), grad f(x))` into an [`Objective`].
pub struct FnObjective<F>(pub F);

impl<S, F> Objective<S> for FnObjective<F>
where
    F: Fn(&[S]) -> Result<(S, Vec<S>)>,
{
    fn value(&self, x: &[S]) -> Result<S> {
        Ok((self.0)(x)?.0)
    }

    fn value_grad(&self, x: &[S]) -> Result<(S, Vec<S>)> {
        (self.0)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnerSettings<S> {
    /// Stop once `||x - P(x + grad f(x))|| <= kkt_tol`.
    pub kkt_tol: S,
    pub max_iters: usize,
}

impl<S: Scalar> Default for InnerSettings<S> {
    fn default() -> Self {
        Self {
            kkt_tol: S::lit(1e-8),
            max_iters: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult<S> {
    pub x: Vec<S>,
    pub value: S,
    pub kkt_residual: S,
    pub iterations: usize,
    pub converged: bool,
}

fn kkt_residual<S: Scalar>(poly: &Polytope<S>, x: &[S], g: &[S]) -> Result<S> {
    let y: Vec<S> = x.iter().zip(g).map(|(&a, &b)| a + b).collect();
    let p = poly.project(&y)?;
    Ok(x.iter().zip(&p).map(|(&a, &b)| (a - b) * (a - b)).sum::<S>().sqrt())
}

/// Maximizes `obj` over `poly`, starting from the projection of `x0`.
///
/// Steps follow the Barzilai–Borwein rule, safeguarded by backtracking on the
/// sufficient-increase condition `f(x+) >= f(x) + g.d - |d|^2 / (2 eta)`.
/// An empty polytope yields [`crate::Error::Infeasible`]; running out of
/// iterations is reported through `converged = false`.
pub fn inner_solve<S: Scalar, O: Objective<S> + ?Sized>(
    obj: &O,
    poly: &Polytope<S>,
    x0: &[S],
    settings: &InnerSettings<S>,
) -> Result<InnerResult<S>> {
    let mut x = poly.project(x0)?;
    let (mut f, mut g) = obj.value_grad(&x)?;
    let gnorm = dot(&g, &g).sqrt();
    let mut eta = if gnorm > S::zero() { S::one() / gnorm } else { S::one() };
    let eta_min = S::lit(1e-14);
    let eta_max = S::lit(1e14);
    // absorbs rounding in objectives evaluated by quadrature
    let slack = |f: S| S::lit(1e-13) * (S::one() + f.abs());

    for iter in 0..settings.max_iters {
        let r = kkt_residual(poly, &x, &g)?;
        if r <= settings.kkt_tol {
            return Ok(InnerResult {
                x,
                value: f,
                kkt_residual: r,
                iterations: iter,
                converged: true,
            });
        }
        // a trial point far outside the set costs the projection its accuracy
        let reach = S::lit(1e3) * (S::one() + dot(&x, &x).sqrt());
        let gn2 = dot(&g, &g).sqrt();
        if gn2 > S::zero() {
            eta = eta.min(reach / gn2);
        }
        let mut accepted = None;
        while eta >= eta_min {
            let trial: Vec<S> = x.iter().zip(&g).map(|(&a, &b)| a + eta * b).collect();
            let xn = poly.project(&trial)?;
            let d: Vec<S> = xn.iter().zip(&x).map(|(&a, &b)| a - b).collect();
            let dd = dot(&d, &d);
            if dd == S::zero() {
                break;
            }
            let (fn_, gn) = obj.value_grad(&xn)?;
            if fn_ >= f + dot(&g, &d) - dd / (S::lit(2.0) * eta) - slack(f) {
                accepted = Some((xn, d, fn_, gn));
                break;
            }
            eta *= S::lit(0.5);
        }
        let Some((xn, d, fn_, gn)) = accepted else {
            // no step makes progress at this resolution
            let r = kkt_residual(poly, &x, &g)?;
            return Ok(InnerResult {
                x,
                value: f,
                kkt_residual: r,
                iterations: iter,
                converged: r <= settings.kkt_tol,
            });
        };
        let y: Vec<S> = gn.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&d, &y);
        eta = if sy < S::zero() {
            (dot(&d, &d) / -sy).min(eta_max).max(eta_min)
        } else {
            (eta * S::lit(2.0)).min(eta_max)
        };
        x = xn;
        f = fn_;
        g = gn;
    }
    let r = kkt_residual(poly, &x, &g)?;
    Ok(InnerResult {
        x,
        value: f,
        kkt_residual: r,
        iterations: settings.max_iters,
        converged: r <= settings.kkt_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn max_entropy_is_uniform() {
        let obj = FnObjective(|p: &[f64]| {
            let f = -p.iter().map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 }).sum::<f64>();
            let g = p.iter().map(|&v| -(v.max(1e-300).ln()) - 1.0).collect();
            Ok((f, g))
        });
        let poly = Polytope::simplex(6, 1.0);
        let r = inner_solve(&obj, &poly, &[0.5, 0.1, 0.1, 0.1, 0.1, 0.1], &InnerSettings::default()).unwrap();
        assert!(r.converged);
        for v in r.x {
            assert_relative_eq!(v, 1.0 / 6.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn recovers_interior_target() {
        let q = [0.05, 0.3, 0.25, 0.4];
        let obj = FnObjective(|p: &[f64]| {
            let f = -p.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            let g = p.iter().zip(&q).map(|(a, b)| -2.0 * (a - b)).collect();
            Ok((f, g))
        });
        let r = inner_solve(&obj, &Polytope::simplex(4, 1.0), &[0.25; 4], &InnerSettings::default()).unwrap();
        for (a, b) in r.x.iter().zip(q) {
            assert_relative_eq!(*a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn infeasible_set_is_distinct_from_nonconvergence() {
        let obj = FnObjective(|p: &[f64]| Ok((0.0, vec![0.0; p.len()])));
        let mut poly = Polytope::simplex(3, 1.0);
        poly.add_inequality(vec![1.0, 1.0, 0.0], -0.1).unwrap();
        assert!(matches!(
            inner_solve(&obj, &poly, &[0.3, 0.3, 0.4], &InnerSettings::default()),
            Err(Error::Infeasible(_))
        ));
        let slow = InnerSettings { kkt_tol: 1e-8, max_iters: 1 };
        let obj = FnObjective(|p: &[f64]| Ok((p[0].ln(), vec![1.0 / p[0], 0.0, 0.0])));
        let r = inner_solve(&obj, &Polytope::simplex(3, 1.0), &[0.3, 0.3, 0.4], &slow).unwrap();
        assert!(!r.converged);
    }

    /// Gaussian elimination with partial pivoting; `None` when singular.
    fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
        let n = b.len();
        for c in 0..n {
            let piv = (c..n).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())?;
            if a[piv][c].abs() < 1e-12 {
                return None;
            }
            a.swap(c, piv);
            b.swap(c, piv);
            for r in c + 1..n {
                let m = a[r][c] / a[c][c];
                let pivot_row = a[c].clone();
                for (x, y) in a[r][c..].iter_mut().zip(&pivot_row[c..]) {
                    *x -= m * *y;
                }
                b[r] -= m * b[c];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            x[r] = (b[r] - (r + 1..n).map(|k| a[r][k] * x[k]).sum::<f64>()) / a[r][r];
        }
        Some(x)
    }

    /// Exact maximizer of `-sum w_i (p_i - c_i)^2` over the simplex cut by
    /// `rows`, found by enumerating every candidate active set.
    fn active_set_oracle(w: &[f64], c: &[f64], rows: &[(Vec<f64>, f64)]) -> Option<(f64, Vec<f64>)> {
        let n = w.len();
        let mut all: Vec<(Vec<f64>, f64)> = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = -1.0;
                (e, 0.0)
            })
            .collect();
        all.extend(rows.iter().cloned());
        let f = |p: &[f64]| -(0..n).map(|i| w[i] * (p[i] - c[i]).powi(2)).sum::<f64>();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 0u32..(1 << all.len()) {
            let mut eqs = vec![(vec![1.0; n], 1.0)];
            eqs.extend((0..all.len()).filter(|k| mask >> k & 1 == 1).map(|k| all[k].clone()));
            // stationarity: 2 w_i (p_i - c_i) = -sum_j lambda_j a_ji
            // p = c - D a^T lambda with D = diag(1 / (2 w)); substitute into a p = b
            let m = eqs.len();
            let mat: Vec<Vec<f64>> = (0..m)
                .map(|r| (0..m).map(|s| (0..n).map(|i| eqs[r].0[i] * eqs[s].0[i] / (2.0 * w[i])).sum()).collect())
                .collect();
            let rhs: Vec<f64> = (0..m).map(|r| (0..n).map(|i| eqs[r].0[i] * c[i]).sum::<f64>() - eqs[r].1).collect();
            let Some(lambda) = solve_dense(mat, rhs) else { continue };
            let p: Vec<f64> = (0..n)
                .map(|i| c[i] - (0..m).map(|r| eqs[r].0[i] * lambda[r]).sum::<f64>() / (2.0 * w[i]))
                .collect();
            if all.iter().any(|(a, b)| (0..n).map(|i| a[i] * p[i]).sum::<f64>() > b + 1e-12) {
                continue;
            }
            let v = f(&p);
            if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                best = Some((v, p));
            }
        }
        best
    }

    #[test]
    fn concave_quadratic_with_cut_matches_active_set_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut checked = 0;
        for _ in 0..40 {
            let centre: Vec<f64> = (0..4).map(|_| rng.random_range(-0.2..0.8)).collect();
            let w: Vec<f64> = (0..4).map(|_| rng.random_range(0.5..3.0)).collect();
            let cut: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let bound = rng.random_range(-0.1..0.3);
            let obj = FnObjective(|p: &[f64]| {
                let f = -(0..4).map(|i| w[i] * (p[i] - centre[i]).powi(2)).sum::<f64>();
                Ok((f, (0..4).map(|i| -2.0 * w[i] * (p[i] - centre[i])).collect()))
            });
            let mut poly = Polytope::simplex(4, 1.0);
            poly.add_inequality(cut.clone(), bound).unwrap();
            let oracle = active_set_oracle(&w, &centre, &[(cut, bound)]);
            match inner_solve(&obj, &poly, &[0.25; 4], &InnerSettings::default()) {
                Ok(r) => {
                    let (v, p) = oracle.expect("oracle finds a feasible point");
                    assert!(r.converged);
                    assert_relative_eq!(r.value, v, epsilon = 1e-9);
                    for (a, b) in r.x.iter().zip(&p) {
                        assert_relative_eq!(*a, *b, epsilon = 1e-5);
                    }
                    checked += 1;
                }
                Err(Error::Infeasible(_)) => assert!(oracle.is_none()),
                Err(e) => panic!("{e}"),
            }
        }
        assert!(checked >= 20);
    }
}
