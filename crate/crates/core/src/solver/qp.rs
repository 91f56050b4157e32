//! Euclidean projection onto a polytope `{x : E x = e, G x <= g, x >= 0}`
//! by the dual active-set method of Goldfarb and Idnani, specialised to the
//! identity Hessian.

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, PartialEq)]
struct Row<S> {
    normal: Vec<S>,
    rhs: S,
    equality: bool,
}

/// Closed polytope in `R^n` that always includes `x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope<S> {
    dim: usize,
    rows: Vec<Row<S>>,
}

impl<S: Scalar> Polytope<S> {
    /// `{x >= 0}` with no other constraints.
    pub fn nonnegative(dim: usize) -> Self {
        let rows = (0..dim)
            .map(|i| {
                let mut normal = vec![S::zero(); dim];
                normal[i] = -S::one();
                Row {
                    normal,
                    rhs: S::zero(),
                    equality: false,
                }
            })
            .collect();
        Self { dim, rows }
    }

    /// `{x >= 0, sum(x) = total}`.
    pub fn simplex(dim: usize, total: S) -> Self {
        let mut p = Self::nonnegative(dim);
        p.add_equality(vec![S::one(); dim], total)
            .expect("simplex row is valid");
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn push(&mut self, normal: Vec<S>, rhs: S, equality: bool) -> Result<()> {
        if normal.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: normal.len(),
            });
        }
        if normal.iter().any(|v| !v.is_finite()) || !rhs.is_finite() {
            return Err(Error::InvalidArgument("constraint row must be finite".into()));
        }
        let scale = dot(&normal, &normal).sqrt();
        if scale == S::zero() {
            // 0 = rhs or 0 <= rhs: either vacuous or empty
            let ok = if equality { rhs == S::zero() } else { rhs >= S::zero() };
            return if ok {
                Ok(())
            } else {
                Err(Error::Infeasible("constraint 0 <= negative".into()))
            };
        }
        self.rows.push(Row {
            normal: normal.into_iter().map(|v| v / scale).collect(),
            rhs: rhs / scale,
            equality,
        });
        Ok(())
    }

    /// Adds `normal^T x = rhs`.
    pub fn add_equality(&mut self, normal: Vec<S>, rhs: S) -> Result<()> {
        self.push(normal, rhs, true)
    }

    /// Adds `normal^T x <= rhs`.
    pub fn add_inequality(&mut self, normal: Vec<S>, rhs: S) -> Result<()> {
        self.push(normal, rhs, false)
    }

    /// Largest constraint violation at `x` (zero when feasible), measured on
    /// unit-norm rows.
    pub fn max_violation(&self, x: &[S]) -> S {
        self.rows.iter().fold(S::zero(), |worst, r| {
            let s = dot(&r.normal, x) - r.rhs;
            let v = if r.equality { s.abs() } else { s.max(S::zero()) };
            worst.max(v)
        })
    }

    /// The point of the polytope closest to `v`.
    pub fn project(&self, v: &[S]) -> Result<Vec<S>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Projector::new(self, v).run()
    }
}

struct Projector<'a, S> {
    rows: &'a [Row<S>],
    x: Vec<S>,
    /// Active constraints: row index, orientation sign, multiplier.
    active: Vec<(usize, S, S)>,
    tol: S,
    dependence_tol: S,
}

impl<'a, S: Scalar> Projector<'a, S> {
    fn new(poly: &'a Polytope<S>, v: &[S]) -> Self {
        Self {
            rows: &poly.rows,
            x: v.to_vec(),
            active: Vec::new(),
            tol: S::epsilon() * S::lit(64.0),
            dependence_tol: S::epsilon() * S::lit(1e3),
        }
    }

    fn normal(&self, idx: usize, sign: S) -> Vec<S> {
        self.rows[idx].normal.iter().map(|&v| v * sign).collect()
    }

    /// Least-squares coefficients `r` of `n` on the active normals `N`, and
    /// the residual `P n = n - N r`, via a QR factorization of `N` by
    /// modified Gram–Schmidt with re-orthogonalization.
    fn decompose(&self, n: &[S]) -> (Vec<S>, Vec<S>) {
        let k = self.active.len();
        let mut q: Vec<Vec<S>> = Vec::with_capacity(k);
        let mut r_mat = vec![S::zero(); k * k];
        for (j, &(idx, sign, _)) in self.active.iter().enumerate() {
            let mut v = self.normal(idx, sign);
            for _ in 0..2 {
                for (i, qi) in q.iter().enumerate() {
                    let c = dot(qi, &v);
                    r_mat[i * k + j] += c;
                    v.iter_mut().zip(qi).for_each(|(vv, &qq)| *vv -= c * qq);
                }
            }
            let norm = dot(&v, &v).sqrt();
            r_mat[j * k + j] = norm;
            let inv = if norm > S::zero() { norm.recip() } else { S::zero() };
            q.push(v.into_iter().map(|x| x * inv).collect());
        }
        let mut resid = n.to_vec();
        let mut qtn = vec![S::zero(); k];
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = dot(qi, &resid);
                qtn[i] += c;
                resid.iter_mut().zip(qi).for_each(|(vv, &qq)| *vv -= c * qq);
            }
        }
        // back substitution R r = Q^T n
        let mut r = qtn;
        for i in (0..k).rev() {
            let mut v = r[i];
            for j in i + 1..k {
                v -= r_mat[i * k + j] * r[j];
            }
            let d = r_mat[i * k + i];
            r[i] = if d > S::zero() { v / d } else { S::zero() };
        }
        (r, resid)
    }

    /// Adds constraint `idx` (oriented by `sign`) whose current slack
    /// `sign * (n^T x - b)` is `slack > 0`.
    fn add(&mut self, idx: usize, sign: S, mut slack: S) -> Result<()> {
        let normal = self.normal(idx, sign);
        let mut u_new = S::zero();
        let mut guard = 0usize;
        loop {
            guard += 1;
            if guard > 4 * self.rows.len() + 16 {
                return Err(Error::NonConvergence {
                    routine: "polytope projection",
                    detail: "active-set cycling".into(),
                });
            }
            let (r, pn) = self.decompose(&normal);
            let pn2 = dot(&pn, &pn);
            // unit normals: pn2 is the squared distance of n from the active span
            let independent = self.active.len() < normal.len() && pn2 > self.dependence_tol;
            let full = if independent { Some(slack / pn2) } else { None };
            let mut partial: Option<(S, usize)> = None;
            for (pos, (&(i, _, u), &ri)) in self.active.iter().zip(&r).enumerate() {
                if self.rows[i].equality || ri <= S::zero() {
                    continue;
                }
                let t = u / ri;
                if partial.is_none_or(|(best, _)| t < best) {
                    partial = Some((t, pos));
                }
            }
            let (t, drop) = match (full, partial) {
                (None, None) => {
                    if self.rows[idx].equality && slack <= self.tol {
                        return Ok(());
                    }
                    return Err(Error::Infeasible("constraints admit no common point".into()));
                }
                (Some(f), Some((p, pos))) if p < f => (p, Some(pos)),
                (Some(f), _) => (f, None),
                (None, Some((p, pos))) => (p, Some(pos)),
            };
            if full.is_some() {
                for (xi, &zi) in self.x.iter_mut().zip(&pn) {
                    *xi -= t * zi;
                }
                slack -= t * pn2;
            }
            for ((_, _, u), &ri) in self.active.iter_mut().zip(&r) {
                *u -= t * ri;
            }
            u_new += t;
            match drop {
                None => {
                    self.active.push((idx, sign, u_new));
                    return Ok(());
                }
                Some(pos) => {
                    self.active.remove(pos);
                }
            }
        }
    }

    fn run(mut self) -> Result<Vec<S>> {
        for idx in 0..self.rows.len() {
            let row = &self.rows[idx];
            if !row.equality {
                continue;
            }
            let s = dot(&row.normal, &self.x) - row.rhs;
            let sign = if s >= S::zero() { S::one() } else { -S::one() };
            if s.abs() > S::zero() {
                self.add(idx, sign, s.abs())?;
            } else {
                // already satisfied; keep it active so later steps preserve it
                self.add_satisfied_equality(idx)?;
            }
        }
        let cap = 8 * self.rows.len() + 64;
        for _ in 0..cap {
            let mut worst: Option<(usize, S)> = None;
            for (idx, row) in self.rows.iter().enumerate() {
                if row.equality || self.active.iter().any(|&(i, _, _)| i == idx) {
                    continue;
                }
                let s = dot(&row.normal, &self.x) - row.rhs;
                if s > self.tol && worst.is_none_or(|(_, w)| s > w) {
                    worst = Some((idx, s));
                }
            }
            match worst {
                None => {
                    // active bounds can land a rounding error below zero
                    self.x.iter_mut().for_each(|v| *v = v.max(S::zero()));
                    return Ok(self.x);
                }
                Some((idx, s)) => self.add(idx, S::one(), s)?,
            }
        }
        Err(Error::NonConvergence {
            routine: "polytope projection",
            detail: format!("no convergence after {cap} constraint additions"),
        })
    }

    fn add_satisfied_equality(&mut self, idx: usize) -> Result<()> {
        let normal = self.normal(idx, S::one());
        let (_, pn) = self.decompose(&normal);
        if dot(&pn, &pn) > self.tol * self.tol {
            self.active.push((idx, S::one(), S::zero()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn interior_points_are_fixed() {
        let poly = Polytope::simplex(4, 1.0);
        let q = [0.1, 0.2, 0.3, 0.4];
        let x = poly.project(&q).unwrap();
        for (a, b) in x.iter().zip(q) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
    }

    /// Sort-based simplex projection as an independent reference.
    fn simplex_reference(v: &[f64]) -> Vec<f64> {
        let mut u = v.to_vec();
        u.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut css = 0.0;
        let mut theta = 0.0;
        for (j, &uj) in u.iter().enumerate() {
            css += uj;
            let t = (css - 1.0) / (j as f64 + 1.0);
            if uj - t > 0.0 {
                theta = t;
            }
        }
        v.iter().map(|&x| (x - theta).max(0.0)).collect()
    }

    #[test]
    fn matches_sort_based_simplex_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let n = rng.random_range(2..20);
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let x = Polytope::simplex(n, 1.0).project(&v).unwrap();
            let want = simplex_reference(&v);
            for (a, b) in x.iter().zip(&want) {
                assert_relative_eq!(*a, *b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn projection_satisfies_variational_inequality() {
        // <v - x, y - x> <= 0 for every feasible y
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let n = 6;
            let mut poly = Polytope::simplex(n, 1.0);
            let a: Vec<f64> = (0..n).map(|i| i as f64 - 2.5).collect();
            poly.add_inequality(a.clone(), 0.3).unwrap();
            poly.add_inequality(a.iter().map(|v| -v).collect(), 0.3).unwrap();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            poly.add_inequality(w, 0.45).unwrap();
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.5)).collect();
            let x = match poly.project(&v) {
                Ok(x) => x,
                Err(Error::Infeasible(_)) => continue,
                Err(e) => panic!("{e}"),
            };
            assert!(poly.max_violation(&x) < 1e-12);
            for _ in 0..50 {
                let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
                let s: f64 = y.iter().sum();
                let y: Vec<f64> = y.iter().map(|v| v / s).collect();
                if poly.max_violation(&y) > 0.0 {
                    continue;
                }
                let ip: f64 = (0..n).map(|i| (v[i] - x[i]) * (y[i] - x[i])).sum();
                assert!(ip <= 1e-12, "{ip}");
            }
        }
    }

    #[test]
    fn near_parallel_rows_stay_accurate() {
        // cuts nearly parallel to the simplex facets and to each other
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let n = rng.random_range(3..12);
            let mut poly = Polytope::simplex(n, 1.0);
            let base: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            for _ in 0..4 {
                let eps = 10f64.powi(-rng.random_range(0..12));
                let row: Vec<f64> = base.iter().map(|&b| b + eps * rng.random_range(-1.0..1.0)).collect();
                poly.add_inequality(row, rng.random_range(0.0..0.5)).unwrap();
            }
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
            let x = match poly.project(&v) {
                Ok(x) => x,
                Err(Error::Infeasible(_)) => continue,
                Err(e) => panic!("{e}"),
            };
            assert!(poly.max_violation(&x) < 1e-10, "{}", poly.max_violation(&x));
            for _ in 0..30 {
                let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
                let s: f64 = y.iter().sum();
                let y: Vec<f64> = y.iter().map(|v| v / s).collect();
                if poly.max_violation(&y) > 0.0 {
                    continue;
                }
                let ip: f64 = (0..n).map(|i| (v[i] - x[i]) * (y[i] - x[i])).sum();
                assert!(ip <= 1e-9, "{ip}");
            }
        }
    }

    #[test]
    fn equality_rows_are_honoured() {
        let mut poly = Polytope::<f64>::simplex(4, 1.0);
        poly.add_equality(vec![1.0, 0.0, 0.0, -1.0], 0.0).unwrap();
        poly.add_equality(vec![0.0, 1.0, -1.0, 0.0], 0.0).unwrap();
        let x = poly.project(&[0.9, -0.2, 0.4, 0.1]).unwrap();
        assert!((x[0] - x[3]).abs() < 1e-15 && (x[1] - x[2]).abs() < 1e-15);
        assert_relative_eq!(x.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        assert!(x.iter().all(|&v| v >= -1e-15));
        // redundant copy of an active equality
        poly.add_equality(vec![2.0, 0.0, 0.0, -2.0], 0.0).unwrap();
        assert!(poly.project(&[0.9, -0.2, 0.4, 0.1]).is_ok());
    }

    #[test]
    fn empty_sets_are_infeasible() {
        let mut poly = Polytope::simplex(3, 1.0);
        poly.add_inequality(vec![1.0, 1.0, 1.0], 0.5).unwrap();
        assert!(matches!(poly.project(&[0.2, 0.3, 0.5]), Err(Error::Infeasible(_))));
        let mut poly = Polytope::simplex(3, 1.0);
        poly.add_equality(vec![1.0, 0.0, 0.0], 2.0).unwrap();
        assert!(matches!(poly.project(&[0.2, 0.3, 0.5]), Err(Error::Infeasible(_))));
        let mut poly = Polytope::<f64>::simplex(3, 1.0);
        assert!(poly.add_inequality(vec![0.0; 3], -1.0).is_err());
    }
}
