//! Reference orthogonal polynomials built straight from the weighted inner
//! product on `L_1`.
//!
//! Two independent constructions are offered. [`monic_orthogonal`] solves the
//! Gram normal equations in the monomial basis by Cholesky factorization.
//! [`ArnoldiOracle`] runs Gram–Schmidt on `z q_k` over the quadrature nodes
//! (Vandermonde with Arnoldi), which avoids the monomial basis entirely and
//! stays accurate for larger degrees; its Hessenberg matrix evaluates `P_n`
//! anywhere in the plane and yields the zeros as eigenvalues.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complex::{self, C64};
use crate::curve::CurveSpec;
use crate::error::{Error, Result};
use crate::szego::WeightSpec;

/// Gram condition estimate above which a warning is emitted.
pub const WARN_CONDITION: f64 = 1e12;
/// Condition estimate at which the Cholesky route gives up.
pub const MAX_CONDITION: f64 = 1e15;

/// Monic polynomial `sum coeffs[k] z^k` with `coeffs[n] = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyCoeffs {
    pub n: usize,
    #[serde(with = "complex::pairs")]
    pub coeffs: Vec<C64>,
    #[serde(skip)]
    pub norm: f64,
    pub gamma: f64,
}

impl PolyCoeffs {
    /// Wraps monic coefficients (low to high) with their norm.
    pub fn monic(mut coeffs: Vec<C64>, norm: f64) -> Self {
        let n = coeffs.len() - 1;
        coeffs[n] = C64::new(1.0, 0.0);
        PolyCoeffs { n, coeffs, norm, gamma: 1.0 / norm }
    }

    /// `P_n(z)` by Horner's scheme.
    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, a| acc * z + a)
    }

    /// Restores `norm` after deserialization.
    pub fn with_norm_from_gamma(mut self) -> Self {
        self.norm = 1.0 / self.gamma;
        self
    }
}

/// `gamma_n P_n(z)`.
pub fn orthonormal_eval(poly: &PolyCoeffs, z: C64) -> C64 {
    poly.eval(z) * poly.gamma
}

/// Quadrature nodes on `L_1` with the weights `h |psi'| / N` of the inner product.
#[derive(Clone, Debug)]
pub struct Quadrature {
    pub z: Vec<C64>,
    pub wt: Vec<f64>,
}

impl Quadrature {
    pub fn new(curve: &CurveSpec, weight: &WeightSpec, nodes: usize) -> Result<Self> {
        if nodes < 4 {
            return Err(Error::Resolution(format!("{nodes} quadrature nodes")));
        }
        let mut z = Vec::with_capacity(nodes);
        let mut wt = Vec::with_capacity(nodes);
        for j in 0..nodes {
            let w = C64::from_polar(1.0, TAU * j as f64 / nodes as f64);
            let zj = curve.psi_unchecked(w);
            let h = weight.h_unchecked(zj);
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Domain(format!("weight is not positive at {zj}")));
            }
            z.push(zj);
            wt.push(h * curve.dpsi_unchecked(w).norm() / nodes as f64);
        }
        Ok(Quadrature { z, wt })
    }

    /// `<p, q>` for sample vectors at the nodes.
    pub fn inner(&self, p: &[C64], q: &[C64]) -> C64 {
        p.iter().zip(q).zip(&self.wt).map(|((a, b), w)| a * b.conj() * *w).sum()
    }
}

/// Default node count for degree `n`.
pub fn default_nodes(n: usize) -> usize {
    (16 * n).max(512).next_power_of_two()
}

/// `<p, q>` for two polynomials, with node doubling until the value is stable.
pub fn inner_product(p: &PolyCoeffs, q: &PolyCoeffs, curve: &CurveSpec, weight: &WeightSpec, nodes: usize) -> Result<C64> {
    let once = |n: usize| -> Result<C64> {
        let quad = Quadrature::new(curve, weight, n)?;
        let ps: Vec<C64> = quad.z.iter().map(|&z| p.eval(z)).collect();
        let qs: Vec<C64> = quad.z.iter().map(|&z| q.eval(z)).collect();
        Ok(quad.inner(&ps, &qs))
    };
    let mut n = nodes.max(8);
    let mut prev = once(n)?;
    for _ in 0..6 {
        n *= 2;
        let cur = once(n)?;
        let scale = cur.norm().max((p.norm * q.norm).max(f64::MIN_POSITIVE));
        if (cur - prev).norm() <= 1e-13 * scale.max(1e-300) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Resolution("inner product did not stabilize under node doubling".into()))
}

/// Result of the Cholesky solve, with the condition estimate.
#[derive(Clone, Debug)]
pub struct GramSolution {
    pub poly: PolyCoeffs,
    pub condition: f64,
}

/// Monic orthogonal polynomial of degree `n` by the Gram normal equations.
pub fn monic_orthogonal(curve: &CurveSpec, weight: &WeightSpec, n: usize, nodes: Option<usize>) -> Result<PolyCoeffs> {
    let sol = monic_orthogonal_report(curve, weight, n, nodes)?;
    if sol.condition > WARN_CONDITION {
        eprintln!("warning: Gram condition estimate {:.2e} at n = {n}; results may be inaccurate", sol.condition);
    }
    Ok(sol.poly)
}

pub fn monic_orthogonal_report(curve: &CurveSpec, weight: &WeightSpec, n: usize, nodes: Option<usize>) -> Result<GramSolution> {
    let quad = Quadrature::new(curve, weight, nodes.unwrap_or_else(|| default_nodes(n)))?;
    // Monomials scaled by capacity so that the Gram matrix stays O(1).
    let scale = curve.c1;
    let powers: Vec<Vec<C64>> = (0..=n)
        .map(|k| quad.z.iter().map(|z| (z / scale).powu(k as u32)).collect())
        .collect();
    if n == 0 {
        let m0 = quad.inner(&powers[0], &powers[0]).re;
        return Ok(GramSolution { poly: PolyCoeffs::monic(vec![C64::new(1.0, 0.0)], m0.sqrt()), condition: 1.0 });
    }
    // a[m][k] = <z^k, z^m>, Hermitian positive definite
    let entries: Vec<C64> = (0..n * n).into_par_iter().map(|idx| quad.inner(&powers[idx % n], &powers[idx / n])).collect();
    let a = DMatrix::from_fn(n, n, |m, k| entries[m * n + k]);
    let b = DVector::from_fn(n, |m, _| -quad.inner(&powers[n], &powers[m]));
    let chol = a.clone().cholesky().ok_or(Error::Conditioning(f64::INFINITY))?;
    let diag: Vec<f64> = (0..n).map(|i| chol.l_dirty()[(i, i)].re).collect();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = (dmax / dmin).powi(2);
    if condition > MAX_CONDITION {
        return Err(Error::Conditioning(condition));
    }
    let mut x = chol.solve(&b);
    // one step of iterative refinement
    let resid = &b - &a * &x;
    x += chol.solve(&resid);
    let mut coeffs: Vec<C64> = (0..n).map(|k| x[k] * scale.powi((n - k) as i32)).collect();
    coeffs.push(C64::new(1.0, 0.0));
    let mut poly = PolyCoeffs::monic(coeffs, 1.0);
    let samples: Vec<C64> = quad.z.iter().map(|&z| poly.eval(z)).collect();
    let norm = quad.inner(&samples, &samples).re.sqrt();
    poly.norm = norm;
    poly.gamma = 1.0 / norm;
    Ok(GramSolution { poly, condition })
}

/// Orthonormal recurrence from Arnoldi on the quadrature nodes.
///
/// Column `k` of `h` holds the coefficients of `z q_k` in `q_0, ..., q_{k+1}`,
/// with `h[k][k+1]` real and positive.
#[derive(Clone, Debug)]
pub struct ArnoldiOracle {
    pub n_max: usize,
    pub nodes: usize,
    h: Vec<Vec<C64>>,
    inv_sqrt_m0: f64,
}

impl ArnoldiOracle {
    pub fn new(curve: &CurveSpec, weight: &WeightSpec, n_max: usize, nodes: Option<usize>) -> Result<Self> {
        let nodes = nodes.unwrap_or_else(|| default_nodes(n_max));
        if nodes <= 2 * n_max + 2 {
            return Err(Error::Resolution(format!("{nodes} nodes cannot resolve degree {n_max}")));
        }
        let quad = Quadrature::new(curve, weight, nodes)?;
        let m0: f64 = quad.wt.iter().sum();
        let q0: Vec<C64> = vec![C64::new(1.0 / m0.sqrt(), 0.0); nodes];
        let mut qs = vec![q0];
        let mut h = Vec::with_capacity(n_max);
        for k in 0..n_max {
            let mut v: Vec<C64> = qs[k].iter().zip(&quad.z).map(|(q, z)| q * z).collect();
            let mut col = vec![C64::new(0.0, 0.0); k + 2];
            // classical Gram–Schmidt applied twice
            for _ in 0..2 {
                let proj: Vec<C64> = qs.par_iter().map(|q| quad.inner(&v, q)).collect();
                for (j, p) in proj.iter().enumerate() {
                    col[j] += p;
                    for (vi, qi) in v.iter_mut().zip(&qs[j]) {
                        *vi -= p * qi;
                    }
                }
            }
            let nrm = quad.inner(&v, &v).re.sqrt();
            if !(nrm > 0.0) {
                return Err(Error::Conditioning(f64::INFINITY));
            }
            col[k + 1] = C64::new(nrm, 0.0);
            v.iter_mut().for_each(|x| *x /= nrm);
            qs.push(v);
            h.push(col);
        }
        Ok(ArnoldiOracle { n_max, nodes, h, inv_sqrt_m0: 1.0 / m0.sqrt() })
    }

    /// Builds at the default node count and at twice that, checking that the
    /// leading coefficients agree.
    pub fn converged(curve: &CurveSpec, weight: &WeightSpec, n_max: usize) -> Result<Self> {
        let mut nodes = default_nodes(n_max);
        let mut prev = Self::new(curve, weight, n_max, Some(nodes))?;
        for _ in 0..4 {
            nodes *= 2;
            let cur = Self::new(curve, weight, n_max, Some(nodes))?;
            let drift = (0..=n_max).map(|n| (cur.gamma(n) / prev.gamma(n)).ln().abs()).fold(0.0, f64::max);
            if drift < 1e-12 {
                return Ok(cur);
            }
            prev = cur;
        }
        Err(Error::Resolution("Arnoldi oracle did not stabilize under node doubling".into()))
    }

    /// Leading coefficient `gamma_n` of the orthonormal `p_n`.
    pub fn gamma(&self, n: usize) -> f64 {
        assert!(n <= self.n_max, "degree {n} above {}", self.n_max);
        self.h.iter().take(n).fold(self.inv_sqrt_m0, |g, col| g / col[col.len() - 1].re)
    }

    /// `q_0(z), ..., q_n(z)`; these are the orthonormal polynomials up to unimodular phases
    /// that are 1 by construction, so `q_k = p_k`.
    pub fn orthonormal_all(&self, n: usize, z: C64) -> Vec<C64> {
        assert!(n <= self.n_max, "degree {n} above {}", self.n_max);
        let mut q = Vec::with_capacity(n + 1);
        q.push(C64::new(self.inv_sqrt_m0, 0.0));
        for k in 0..n {
            let col = &self.h[k];
            let mut v = z * q[k];
            for j in 0..=k {
                v -= col[j] * q[j];
            }
            q.push(v / col[k + 1].re);
        }
        q
    }

    /// Monic `P_n(z)`.
    pub fn eval(&self, n: usize, z: C64) -> C64 {
        self.orthonormal_all(n, z)[n] / self.gamma(n)
    }

    /// Monic power-basis coefficients of `P_n` from the recurrence.
    pub fn coeffs(&self, n: usize) -> PolyCoeffs {
        let mut polys: Vec<Vec<C64>> = vec![vec![C64::new(1.0, 0.0)]];
        for k in 0..n {
            // monic form: P_{k+1} = z P_k - sum_j col[j] (gamma_j / gamma_k) P_j
            let col = &self.h[k];
            let mut next = vec![C64::new(0.0, 0.0); k + 2];
            for (i, a) in polys[k].iter().enumerate() {
                next[i + 1] += a;
            }
            let gk = self.gamma(k);
            for j in 0..=k {
                let f = col[j] * (self.gamma(j) / gk);
                for (i, a) in polys[j].iter().enumerate() {
                    next[i] -= f * a;
                }
            }
            polys.push(next);
        }
        PolyCoeffs::monic(polys.pop().unwrap(), 1.0 / self.gamma(n))
    }

    /// Zeros of `P_n`: eigenvalues of the leading `n x n` Hessenberg block.
    pub fn zeros(&self, n: usize) -> Result<Vec<C64>> {
        if n == 0 {
            return Ok(vec![]);
        }
        let m = DMatrix::from_fn(n, n, |i, j| if i < self.h[j].len() { self.h[j][i] } else { C64::new(0.0, 0.0) });
        let schur = nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 100_000)
            .ok_or_else(|| Error::Eigen("Hessenberg Schur iteration did not converge".into()))?;
        let (_, t) = schur.unpack();
        Ok((0..n).map(|i| t[(i, i)]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::c;

    fn shifted() -> WeightSpec {
        WeightSpec::generic(vec![c(-0.5, 0.0), c(1.0, 0.0)], None)
    }

    fn z_pow(k: usize) -> PolyCoeffs {
        let mut v = vec![c(0.0, 0.0); k + 1];
        v[k] = c(1.0, 0.0);
        PolyCoeffs::monic(v, 1.0)
    }

    #[test]
    fn hand_moments() {
        let circ = CurveSpec::unit_circle();
        let w = shifted();
        assert!((inner_product(&z_pow(0), &z_pow(0), &circ, &w, 64).unwrap() - 1.25).norm() < 1e-14);
        assert!((inner_product(&z_pow(1), &z_pow(0), &circ, &w, 64).unwrap() + 0.5).norm() < 1e-14);
        let one = WeightSpec::unit();
        for j in 0..4 {
            for k in 0..4 {
                let v = inner_product(&z_pow(j), &z_pow(k), &circ, &one, 64).unwrap();
                assert!((v - if j == k { 1.0 } else { 0.0 }).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn conjugate_symmetry() {
        let curve = CurveSpec::joukowski(0.25).unwrap();
        let w = WeightSpec::generic(vec![c(1.0, 0.2), c(0.3, -0.1)], None);
        let p = PolyCoeffs::monic(vec![c(0.1, 0.3), c(-0.2, 0.0), c(1.0, 0.0)], 1.0);
        let q = PolyCoeffs::monic(vec![c(0.7, -0.1), c(1.0, 0.0)], 1.0);
        let a = inner_product(&p, &q, &curve, &w, 64).unwrap();
        let b = inner_product(&q, &p, &curve, &w, 64).unwrap();
        assert!((a - b.conj()).norm() < 1e-14);
        assert!(inner_product(&p, &p, &curve, &w, 64).unwrap().re > 0.0);
    }

    #[test]
    fn circle_examples() {
        let circ = CurveSpec::unit_circle();
        let p7 = monic_orthogonal(&circ, &WeightSpec::unit(), 7, None).unwrap();
        assert!((p7.gamma - 1.0).abs() < 1e-13);
        for k in 0..7 {
            assert!(p7.coeffs[k].norm() < 1e-13);
        }
        let p1 = monic_orthogonal(&circ, &shifted(), 1, None).unwrap();
        assert!((p1.coeffs[0] - 0.4).norm() < 1e-14);
        assert!((p1.gamma - 1.0 / 1.05f64.sqrt()).abs() < 1e-14);
        assert!((orthonormal_eval(&p1, c(0.0, 0.0)) - 0.4 / 1.05f64.sqrt()).norm() < 1e-14);
        let p0 = monic_orthogonal(&circ, &shifted(), 0, None).unwrap();
        assert!((orthonormal_eval(&p0, c(0.3, 0.3)) - 1.0 / 1.25f64.sqrt()).norm() < 1e-14);
        let p3 = monic_orthogonal(&circ, &WeightSpec::unit(), 3, None).unwrap();
        assert!((orthonormal_eval(&p3, c(2.0, 0.0)) - 8.0).norm() < 1e-12);
    }

    #[test]
    fn ellipse_linear_term_vanishes() {
        let e = CurveSpec::joukowski(0.25).unwrap();
        let p1 = monic_orthogonal(&e, &WeightSpec::unit(), 1, None).unwrap();
        assert!(p1.coeffs[0].norm() < 1e-14);
    }

    #[test]
    fn orthonormality_matrix() {
        let e = CurveSpec::joukowski(0.25).unwrap();
        let w = WeightSpec::generic(vec![c(1.5, 0.0), c(0.4, 0.2)], None);
        let polys: Vec<PolyCoeffs> = (0..=15).map(|n| monic_orthogonal(&e, &w, n, None).unwrap()).collect();
        let quad = Quadrature::new(&e, &w, 1024).unwrap();
        let samples: Vec<Vec<C64>> = polys.iter().map(|p| quad.z.iter().map(|&z| orthonormal_eval(p, z)).collect()).collect();
        for j in 0..=15 {
            for k in 0..=15 {
                let v = quad.inner(&samples[j], &samples[k]);
                let target = if j == k { 1.0 } else { 0.0 };
                assert!((v - target).norm() < 1e-8, "({j},{k}) {v}");
            }
        }
    }

    #[test]
    fn node_doubling_is_stable() {
        let e = CurveSpec::joukowski(0.25).unwrap();
        let a = monic_orthogonal(&e, &WeightSpec::unit(), 12, Some(512)).unwrap();
        let b = monic_orthogonal(&e, &WeightSpec::unit(), 12, Some(1024)).unwrap();
        for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn gamma_ratio_approaches_capacity() {
        let e = CurveSpec::joukowski(0.25).unwrap();
        let o = ArnoldiOracle::new(&e, &shifted(), 25, None).unwrap();
        for n in 15..25 {
            assert!((o.gamma(n + 1) / o.gamma(n) - e.dphi_inf()).abs() <= 0.05);
        }
    }

    #[test]
    fn arnoldi_matches_gram() {
        let e = CurveSpec::joukowski(0.25).unwrap();
        let w = WeightSpec::generic(vec![c(1.5, 0.0), c(0.4, 0.2)], None);
        let o = ArnoldiOracle::converged(&e, &w, 12).unwrap();
        for n in [1usize, 5, 12] {
            let g = monic_orthogonal(&e, &w, n, None).unwrap();
            assert!((o.gamma(n) / g.gamma - 1.0).abs() < 1e-10);
            for z in [c(0.3, 0.2), c(1.5, -0.4), c(-0.9, 0.0)] {
                assert!((o.eval(n, z) - g.eval(z)).norm() < 1e-9 * g.eval(z).norm().max(1.0));
            }
            let ac = o.coeffs(n);
            for (x, y) in ac.coeffs.iter().zip(&g.coeffs) {
                assert!((x - y).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn hessenberg_zeros_are_roots() {
        let e = CurveSpec::joukowski(0.25).unwrap();
        let o = ArnoldiOracle::new(&e, &WeightSpec::unit(), 10, None).unwrap();
        let zs = o.zeros(10).unwrap();
        assert_eq!(zs.len(), 10);
        let scale = o.eval(10, c(0.0, 0.0)).norm().max(1e-3);
        for z in zs {
            assert!(o.eval(10, z).norm() < 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn json_shape() {
        let p = PolyCoeffs::monic(vec![c(0.4, 0.0), c(1.0, 0.0)], 1.05f64.sqrt());
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.starts_with(r#"{"n":1,"coeffs":[[0.4,0.0],[1.0,0.0]],"gamma":0.97"#));
        let back: PolyCoeffs = serde_json::from_str(&s).unwrap();
        assert!((back.with_norm_from_gamma().norm - 1.05f64.sqrt()).abs() < 1e-15);
    }
}
