//! Double-double Arnoldi oracle.
//!
//! Inside the curve the monic `P_n` decays geometrically; for the singular
//! weights near degree 50 its values there drop to `1e-17` or below, under
//! the rounding floor of any double-precision construction, and eigenvalue
//! solvers then report spurious zeros deep inside. This oracle repeats the
//! Vandermonde-with-Arnoldi construction in double-double arithmetic
//! (about 32 significant digits): nodes, weights, the Gram–Schmidt sweep and
//! the recurrence evaluation all run in [`TwoFloat`]. Zeros are found by
//! Aberth–Ehrlich iteration on the double-double recurrence, seeded from any
//! approximate zero set.

use num_complex::Complex;
use rayon::prelude::*;
use twofloat::TwoFloat;

use crate::complex::C64;
use crate::curve::CurveSpec;
use crate::error::{Error, Result};
use crate::oracle::default_nodes;
use crate::szego::WeightSpec;

type Dd = TwoFloat;
type Cdd = Complex<TwoFloat>;

const ABERTH_MAX_ITER: usize = 200;
const ABERTH_TOL: f64 = 1e-14;

fn dd(x: f64) -> Dd {
    Dd::from(x)
}

// The `TwoFloat / TwoFloat` operator in twofloat 0.8 drops the residual of
// its reciprocal step and is only double-accurate, so quotients go through
// long division with exact `TwoFloat * f64` products instead.
fn ddiv(a: Dd, b: Dd) -> Dd {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    Dd::new_add(q1, q2) + q3
}

fn cinv(z: Cdd) -> Cdd {
    let d = ddiv(dd(1.0), norm_sqr(&z));
    Cdd::new(z.re * d, -(z.im * d))
}

fn cdiv(a: Cdd, b: Cdd) -> Cdd {
    a * cinv(b)
}

fn cscale(a: Cdd, b: Dd) -> Cdd {
    Cdd::new(ddiv(a.re, b), ddiv(a.im, b))
}

/// `x^lambda` for `x > 0`. Rational exponents `p/q` with small `q` use a
/// Newton root of `x^p`; other exponents fall back to the library power.
fn dd_pow(x: Dd, lambda: f64) -> Dd {
    let Some(q) = (1..=64u32).find(|&q| (lambda * q as f64 - (lambda * q as f64).round()).abs() < 1e-12) else {
        return x.powf(dd(lambda));
    };
    let p = (lambda * q as f64).round() as i32;
    let a = if p >= 0 { x.powi(p) } else { ddiv(dd(1.0), x.powi(-p)) };
    if q == 1 {
        return a;
    }
    let mut y = dd(a.hi().powf(1.0 / q as f64));
    for _ in 0..3 {
        let yq1 = y.powi(q as i32 - 1);
        y -= ddiv(yq1 * y - a, yq1 * q as f64);
    }
    y
}

fn cdd(z: C64) -> Cdd {
    Cdd::new(dd(z.re), dd(z.im))
}

fn to_c64(z: Cdd) -> C64 {
    C64::new(z.re.hi() + z.re.lo(), z.im.hi() + z.im.lo())
}

fn norm_sqr(z: &Cdd) -> Dd {
    z.re * z.re + z.im * z.im
}

/// `sin x` and `cos x` for `0 <= x <= pi/4` by Taylor series.
fn sin_cos_small(x: Dd) -> (Dd, Dd) {
    let x2 = x * x;
    let (mut s, mut c) = (dd(0.0), dd(0.0));
    let (mut ts, mut tc) = (x, dd(1.0));
    for k in 0..24 {
        s += ts;
        c += tc;
        let k = k as f64;
        ts = -(ts * x2) / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
        tc = -(tc * x2) / ((2.0 * k + 1.0) * (2.0 * k + 2.0));
    }
    (s, c)
}

/// `exp(2 pi i j / n)` to double-double accuracy, using exact integer
/// reduction to the first octant.
fn unit_root(j: usize, n: usize) -> Cdd {
    let k = j % n;
    let quadrant = 4 * k / n;
    // angle within the quadrant is (pi/2) * rem / n
    let rem = 4 * k - quadrant * n;
    let (s, c) = if 2 * rem <= n {
        sin_cos_small(twofloat::consts::FRAC_PI_2 * (rem as f64) / n as f64)
    } else {
        let (s, c) = sin_cos_small(twofloat::consts::FRAC_PI_2 * ((n - rem) as f64) / n as f64);
        (c, s)
    };
    match quadrant {
        0 => Cdd::new(c, s),
        1 => Cdd::new(-s, c),
        2 => Cdd::new(-c, -s),
        _ => Cdd::new(s, -c),
    }
}

fn psi(curve: &CurveSpec, w: Cdd) -> Cdd {
    let s = cinv(w);
    let mut tail = Cdd::new(dd(0.0), dd(0.0));
    for a in curve.cneg.iter().rev() {
        tail = (tail + cdd(*a)) * s;
    }
    w * dd(curve.c1) + cdd(curve.c0) + tail
}

fn dpsi(curve: &CurveSpec, w: Cdd) -> Cdd {
    let s = cinv(w);
    let mut acc = Cdd::new(dd(0.0), dd(0.0));
    for (k, a) in curve.cneg.iter().enumerate().rev() {
        acc = (acc + cdd(*a) * dd((k + 1) as f64)) * s;
    }
    Cdd::new(dd(curve.c1), dd(0.0)) - acc * s
}

fn weight_at(weight: &WeightSpec, z: Cdd) -> Dd {
    match weight {
        WeightSpec::Generic { v, v_low, .. } => {
            let mut acc = Cdd::new(dd(0.0), dd(0.0));
            for a in v.iter().rev() {
                acc = acc * z + cdd(*a);
            }
            let zl = if *v_low >= 0 { z.powi(*v_low) } else { cinv(z).powi(-*v_low) };
            norm_sqr(&(acc * zl))
        }
        WeightSpec::Singular { omega, sing, .. } => {
            let s = cinv(z);
            let mut om = Cdd::new(dd(0.0), dd(0.0));
            for a in omega.iter().rev() {
                om = om * s + cdd(*a);
            }
            let mut h = ddiv(dd(1.0), norm_sqr(&om));
            for sg in sing {
                let d2 = norm_sqr(&(z - cdd(sg.a)));
                h *= if sg.lambda == 0.5 { d2.sqrt() } else { dd_pow(d2, sg.lambda) };
            }
            h
        }
    }
}

/// Orthonormal recurrence coefficients in double-double precision.
#[derive(Clone, Debug)]
pub struct ExtendedOracle {
    pub n_max: usize,
    pub nodes: usize,
    h: Vec<Vec<Cdd>>,
    inv_sqrt_m0: Dd,
}

impl ExtendedOracle {
    pub fn new(curve: &CurveSpec, weight: &WeightSpec, n_max: usize, nodes: Option<usize>) -> Result<Self> {
        let nodes = nodes.unwrap_or_else(|| default_nodes(n_max));
        if nodes <= 2 * n_max + 2 {
            return Err(Error::Resolution(format!("{nodes} nodes cannot resolve degree {n_max}")));
        }
        let samples: Vec<(Cdd, Dd)> = (0..nodes)
            .into_par_iter()
            .map(|j| {
                let w = unit_root(j, nodes);
                let z = psi(curve, w);
                let d = dpsi(curve, w);
                (z, weight_at(weight, z) * norm_sqr(&d).sqrt() / nodes as f64)
            })
            .collect();
        if let Some((z, _)) = samples.iter().find(|(_, h)| !(h.hi() > 0.0 && h.hi().is_finite())) {
            return Err(Error::Domain(format!("weight is not positive at {}", to_c64(*z))));
        }
        let (z, wt): (Vec<Cdd>, Vec<Dd>) = samples.into_iter().unzip();
        let inner = |p: &[Cdd], q: &[Cdd]| -> Cdd {
            p.par_iter()
                .zip(q)
                .zip(&wt)
                .map(|((a, b), w)| a * b.conj() * *w)
                .reduce(|| Cdd::new(dd(0.0), dd(0.0)), |x, y| x + y)
        };
        let m0 = wt.iter().fold(dd(0.0), |acc, w| acc + *w);
        let inv_sqrt_m0 = ddiv(dd(1.0), m0.sqrt());
        let mut qs: Vec<Vec<Cdd>> = vec![vec![Cdd::new(inv_sqrt_m0, dd(0.0)); nodes]];
        let mut h = Vec::with_capacity(n_max);
        for k in 0..n_max {
            let mut v: Vec<Cdd> = qs[k].iter().zip(&z).map(|(q, zj)| q * zj).collect();
            let mut col = vec![Cdd::new(dd(0.0), dd(0.0)); k + 2];
            for _ in 0..2 {
                let proj: Vec<Cdd> = qs.iter().map(|q| inner(&v, q)).collect();
                for (j, p) in proj.iter().enumerate() {
                    col[j] = col[j] + p;
                    v.par_iter_mut().zip(&qs[j]).for_each(|(vi, qi)| *vi = *vi - p * qi);
                }
            }
            let nrm = inner(&v, &v).re.sqrt();
            if !(nrm.hi() > 0.0) {
                return Err(Error::Conditioning(f64::INFINITY));
            }
            col[k + 1] = Cdd::new(nrm, dd(0.0));
            v.iter_mut().for_each(|x| *x = cscale(*x, nrm));
            qs.push(v);
            h.push(col);
        }
        Ok(ExtendedOracle { n_max, nodes, h, inv_sqrt_m0 })
    }

    /// Builds at the default node count and at twice that, requiring the
    /// leading coefficients to agree to double-double accuracy.
    pub fn converged(curve: &CurveSpec, weight: &WeightSpec, n_max: usize) -> Result<Self> {
        let mut nodes = default_nodes(n_max);
        let mut prev = Self::new(curve, weight, n_max, Some(nodes))?;
        for _ in 0..3 {
            nodes *= 2;
            let cur = Self::new(curve, weight, n_max, Some(nodes))?;
            let drift = (0..=n_max)
                .map(|n| (ddiv(cur.gamma_dd(n), prev.gamma_dd(n)) - dd(1.0)).hi().abs())
                .fold(0.0, f64::max);
            if drift < 1e-26 {
                return Ok(cur);
            }
            prev = cur;
        }
        Err(Error::Resolution("extended oracle did not stabilize under node doubling".into()))
    }

    fn gamma_dd(&self, n: usize) -> Dd {
        self.h.iter().take(n).fold(self.inv_sqrt_m0, |g, col| ddiv(g, col[col.len() - 1].re))
    }

    /// Leading coefficient `gamma_n` of the orthonormal `p_n`.
    pub fn gamma(&self, n: usize) -> f64 {
        assert!(n <= self.n_max, "degree {n} above {}", self.n_max);
        self.gamma_dd(n).hi()
    }

    /// `p_n(z)` and `p_n'(z)` by the recurrence and its derivative.
    fn value_and_slope(&self, n: usize, z: Cdd) -> (Cdd, Cdd) {
        let zero = Cdd::new(dd(0.0), dd(0.0));
        let mut q = Vec::with_capacity(n + 1);
        let mut dq = Vec::with_capacity(n + 1);
        q.push(Cdd::new(self.inv_sqrt_m0, dd(0.0)));
        dq.push(zero);
        for k in 0..n {
            let col = &self.h[k];
            let mut v = z * q[k];
            let mut dv = q[k] + z * dq[k];
            for j in 0..=k {
                v = v - col[j] * q[j];
                dv = dv - col[j] * dq[j];
            }
            q.push(cscale(v, col[k + 1].re));
            dq.push(cscale(dv, col[k + 1].re));
        }
        (q[n], dq[n])
    }

    /// Monic `P_n(z)`.
    pub fn eval(&self, n: usize, z: C64) -> C64 {
        assert!(n <= self.n_max, "degree {n} above {}", self.n_max);
        let (p, _) = self.value_and_slope(n, cdd(z));
        to_c64(cscale(p, self.gamma_dd(n)))
    }

    /// Zeros of `P_n` by Aberth–Ehrlich iteration started from `seeds`
    /// (typically the double-precision Hessenberg eigenvalues).
    pub fn zeros(&self, n: usize, seeds: &[C64]) -> Result<Vec<C64>> {
        assert!(n <= self.n_max, "degree {n} above {}", self.n_max);
        if seeds.len() != n {
            return Err(Error::Index { index: seeds.len(), len: n });
        }
        let mut zs: Vec<C64> = seeds.to_vec();
        for _ in 0..ABERTH_MAX_ITER {
            let newton: Vec<C64> = zs
                .par_iter()
                .map(|&z| {
                    let (p, dp) = self.value_and_slope(n, cdd(z));
                    to_c64(cdiv(p, dp))
                })
                .collect();
            let mut moved: f64 = 0.0;
            for i in 0..n {
                let repulse: C64 = (0..n).filter(|&j| j != i).map(|j| (zs[i] - zs[j]).inv()).sum();
                let step = newton[i] / (C64::new(1.0, 0.0) - newton[i] * repulse);
                if !step.is_finite() {
                    return Err(Error::Eigen(format!("Aberth step is not finite at {}", zs[i])));
                }
                zs[i] -= step;
                moved = moved.max(step.norm() / zs[i].norm().max(1.0));
            }
            if moved < ABERTH_TOL {
                return Ok(zs);
            }
        }
        Err(Error::Eigen("Aberth iteration did not converge".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::c;
    use crate::oracle::ArnoldiOracle;

    #[test]
    fn matches_double_oracle_where_both_are_accurate() {
        let circ = CurveSpec::unit_circle();
        let w = WeightSpec::generic(vec![c(-0.5, 0.0), c(1.0, 0.0)], None);
        let ext = ExtendedOracle::new(&circ, &w, 12, Some(128)).unwrap();
        let dbl = ArnoldiOracle::new(&circ, &w, 12, Some(128)).unwrap();
        for n in [1, 5, 12] {
            assert!((ext.gamma(n) / dbl.gamma(n) - 1.0).abs() < 1e-13);
            for z in [c(1.3, 0.2), c(0.2, -0.9)] {
                assert!((ext.eval(n, z) - dbl.eval(n, z)).norm() < 1e-13 * dbl.eval(n, z).norm().max(1.0));
            }
        }
        // P_1 = z + 0.4 for h = |z - 1/2|^2 on the unit circle.
        assert!((ext.eval(1, c(0.0, 0.0)) - c(0.4, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn unit_roots_are_exact_to_double_double() {
        for (j, n) in [(1, 8), (3, 12), (5, 1024), (700, 1024), (1023, 1024)] {
            let w = unit_root(j, n);
            let err = (norm_sqr(&w) - dd(1.0)).hi().abs();
            assert!(err < 1e-30, "{j}/{n}: {err}");
            let z = C64::from_polar(1.0, std::f64::consts::TAU * j as f64 / n as f64);
            assert!((to_c64(w) - z).norm() < 1e-15);
            // w^n = 1
            assert!((to_c64(w.powi(n as i32)) - C64::new(1.0, 0.0)).norm() < 1e-28);
        }
        let (s, c) = sin_cos_small(twofloat::consts::FRAC_PI_4);
        assert!(((s - c).hi()).abs() < 1e-31);
    }

    #[test]
    fn division_and_powers_are_double_double() {
        let third = ddiv(dd(1.0), dd(3.0));
        assert!((third * 3.0 - dd(1.0)).hi().abs() < 1e-31);
        let x = Dd::new_add(0.7, 1e-20);
        let y = dd_pow(x, 0.375);
        assert!((ddiv(y.powi(8), x.powi(3)) - dd(1.0)).hi().abs() < 1e-30);
        let y = dd_pow(x, -4.0 / 3.0);
        assert!((y.powi(3) * x.powi(4) - dd(1.0)).hi().abs() < 1e-30);
        let z = Cdd::new(dd(0.3), dd(-1.7));
        let one = cdiv(z, z) - Cdd::new(dd(1.0), dd(0.0));
        assert!(norm_sqr(&one).hi().sqrt() < 1e-31);
    }

    #[test]
    fn resolves_values_below_the_double_floor() {
        // h = 1 on the circle: P_n = z^n exactly, so interior values far below
        // 1e-16 must come out with full relative accuracy.
        let circ = CurveSpec::unit_circle();
        let ext = ExtendedOracle::new(&circ, &WeightSpec::unit(), 40, Some(128)).unwrap();
        let z = c(0.3, 0.1);
        let exact = z.powu(40);
        assert!((ext.eval(40, z) / exact - 1.0).norm() < 1e-10, "{}", ext.eval(40, z));
    }

    #[test]
    fn aberth_recovers_known_zeros() {
        let circ = CurveSpec::unit_circle();
        let w = WeightSpec::generic(vec![c(-0.5, 0.0), c(1.0, 0.0)], None);
        let ext = ExtendedOracle::new(&circ, &w, 10, Some(128)).unwrap();
        let z = ext.zeros(1, &[c(0.0, 0.3)]).unwrap();
        assert!((z[0] + c(0.4, 0.0)).norm() < 1e-14);
        // at degree 10 the double Hessenberg eigenvalues are accurate; start
        // from perturbed copies and land back on them
        let dbl = ArnoldiOracle::new(&circ, &w, 10, Some(128)).unwrap().zeros(10).unwrap();
        let seeds: Vec<C64> = dbl.iter().map(|z| z * 1.05 + c(0.01, -0.02)).collect();
        let zs = ext.zeros(10, &seeds).unwrap();
        for r in &dbl {
            let best = zs.iter().map(|z| (z - r).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-10, "{r}: {best}");
        }
    }
}
