//! Analytic Jordan curves given by a finite-Laurent exterior conformal map
//!
//! `psi(w) = c1*w + c0 + sum_k cneg[k] * w^-(k+1)` maps `|w| > 1` onto the
//! exterior of the curve `L_1 = psi(|w| = 1)`. Level curves `L_r`, the
//! inverse map `phi`, and the Schwarz reflection across `L_1` are all
//! expressed through this one series.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::complex::{self, c, continue_log, C64};
use crate::error::{Error, Result};
use crate::zeros;

const NEWTON_MAX_ITER: usize = 50;
const RHO_HAT_MARGIN: f64 = 1.02;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub c1: f64,
    #[serde(with = "complex::pair", default)]
    pub c0: C64,
    #[serde(with = "complex::pairs", default)]
    pub cneg: Vec<C64>,
    /// Univalence radius estimate; recomputed by [`CurveSpec::validated`].
    #[serde(default, skip_serializing)]
    pub rho_hat_estimate: f64,
}

impl CurveSpec {
    /// Builds a curve and estimates its univalence radius.
    pub fn new(c1: f64, c0: C64, cneg: Vec<C64>) -> Result<Self> {
        CurveSpec { c1, c0, cneg, rho_hat_estimate: 0.0 }.validated()
    }

    /// Unit circle.
    pub fn unit_circle() -> Self {
        CurveSpec { c1: 1.0, c0: C64::new(0.0, 0.0), cneg: vec![], rho_hat_estimate: 0.0 }
    }

    /// Ellipse `w + c/w` with semi-axes `1 + c` and `1 - c`.
    pub fn joukowski(cc: f64) -> Result<Self> {
        Self::new(1.0, C64::new(0.0, 0.0), vec![C64::new(cc, 0.0)])
    }

    /// Checks `c1 > 0` and fills in `rho_hat_estimate`.
    pub fn validated(mut self) -> Result<Self> {
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            return Err(Error::Config(format!("c1 must be positive, got {}", self.c1)));
        }
        self.rho_hat_estimate = 0.0;
        self.rho_hat_estimate = self.estimate_rho_hat()?;
        Ok(self)
    }

    pub fn rho_hat(&self) -> f64 {
        self.rho_hat_estimate
    }

    /// `phi'(infinity) = 1 / c1`.
    pub fn dphi_inf(&self) -> f64 {
        1.0 / self.c1
    }

    /// Series evaluation without the domain check.
    pub fn psi_unchecked(&self, w: C64) -> C64 {
        let s = w.inv();
        let mut tail = C64::new(0.0, 0.0);
        for a in self.cneg.iter().rev() {
            tail = (tail + a) * s;
        }
        w * self.c1 + self.c0 + tail
    }

    pub fn dpsi_unchecked(&self, w: C64) -> C64 {
        let s = w.inv();
        let mut acc = C64::new(0.0, 0.0);
        // sum_k k a_k s^(k+1), Horner in s
        for (k, a) in self.cneg.iter().enumerate().rev() {
            acc = (acc + a * (k + 1) as f64) * s;
        }
        C64::new(self.c1, 0.0) - acc * s
    }

    fn check_w(&self, w: C64) -> Result<()> {
        if w.norm() <= self.rho_hat_estimate {
            return Err(Error::Domain(format!(
                "|w| = {} is not above the univalence radius {}",
                w.norm(),
                self.rho_hat_estimate
            )));
        }
        Ok(())
    }

    /// Exterior map `psi(w)`.
    pub fn psi(&self, w: C64) -> Result<C64> {
        self.check_w(w)?;
        Ok(self.psi_unchecked(w))
    }

    pub fn dpsi(&self, w: C64) -> Result<C64> {
        self.check_w(w)?;
        Ok(self.dpsi_unchecked(w))
    }

    /// Logarithm of `psi'(w)` on the branch that is real at infinity.
    pub fn log_dpsi(&self, w: C64) -> C64 {
        if self.cneg.is_empty() {
            return C64::new(self.c1.ln(), 0.0);
        }
        let g = |s: C64| {
            if s.norm() == 0.0 {
                C64::new(self.c1, 0.0)
            } else {
                self.dpsi_unchecked(s.inv())
            }
        };
        continue_log(g, C64::new(0.0, 0.0), w.inv(), C64::new(self.c1.ln(), 0.0), 12)
    }

    /// `sqrt(psi'(w))`, positive at infinity.
    pub fn sqrt_dpsi(&self, w: C64) -> C64 {
        (self.log_dpsi(w) * 0.5).exp()
    }

    /// Inverse map `phi(z)`, by damped Newton iteration seeded at `(z - c0)/c1`.
    pub fn phi(&self, z: C64) -> Result<C64> {
        let mut w = (z - self.c0) / self.c1;
        if self.cneg.is_empty() {
            self.check_w(w)?;
            return Ok(w);
        }
        let scale = z.norm().max(1.0);
        let mut f = self.psi_unchecked(w) - z;
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            if f.norm() <= 1e-15 * scale {
                converged = true;
                break;
            }
            let mut step = f / self.dpsi_unchecked(w);
            let mut accepted = false;
            for _ in 0..30 {
                let cand = w - step;
                let fc = self.psi_unchecked(cand) - z;
                if fc.norm() < f.norm() {
                    w = cand;
                    f = fc;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                // stagnated at the rounding floor
                converged = f.norm() <= 1e-13 * scale;
                break;
            }
            if step.norm() <= 1e-16 * w.norm() {
                converged = f.norm() <= 1e-13 * scale;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence { what: "phi Newton inversion", residual: f.norm() / scale });
        }
        self.check_w(w)?;
        Ok(w)
    }

    /// `phi'(z)` given `w = phi(z)`.
    pub fn dphi_at(&self, w: C64) -> C64 {
        self.dpsi_unchecked(w).inv()
    }

    /// Schwarz reflection `z* = psi(1 / conj(phi(z)))` across `L_1`.
    pub fn schwarz_reflect(&self, z: C64) -> Result<C64> {
        let w = self.phi(z)?;
        let m = w.norm();
        let rh = self.rho_hat_estimate;
        if rh > 0.0 && m >= 1.0 / rh {
            return Err(Error::Domain(format!("|phi(z)| = {m} outside the reflection band")));
        }
        self.psi(w.conj().inv())
    }

    /// Equispaced trapezoid nodes on `|w| = r` and their images.
    pub fn level_contour(&self, r: f64, n: usize) -> Result<Contour> {
        if !n.is_power_of_two() || n < 4 {
            return Err(Error::Domain(format!("node count {n} must be a power of two >= 4")));
        }
        if r <= self.rho_hat_estimate {
            return Err(Error::Domain(format!("radius {r} not above rho_hat {}", self.rho_hat_estimate)));
        }
        let nodes_w: Vec<C64> = (0..n).map(|j| C64::from_polar(r, TAU * j as f64 / n as f64)).collect();
        let nodes_z = nodes_w.iter().map(|&w| self.psi_unchecked(w)).collect();
        let dpsi = nodes_w.iter().map(|&w| self.dpsi_unchecked(w)).collect();
        Ok(Contour { r, nodes_w, nodes_z, dpsi })
    }

    /// Largest distance between two points of `L_1` (sampled).
    pub fn diameter(&self) -> f64 {
        let pts: Vec<C64> = (0..256).map(|j| self.psi_unchecked(C64::from_polar(1.0, TAU * j as f64 / 256.0))).collect();
        let mut d: f64 = 0.0;
        for a in &pts {
            for b in &pts {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    /// Winding-number test for `z` inside `L_1`.
    pub fn encloses(&self, z: C64) -> bool {
        let m = 1024;
        let mut total = 0.0;
        let mut prev = self.psi_unchecked(c(1.0, 0.0)) - z;
        for j in 1..=m {
            let cur = self.psi_unchecked(C64::from_polar(1.0, TAU * j as f64 / m as f64)) - z;
            total += (cur / prev).arg();
            prev = cur;
        }
        total.abs() > 1.0
    }

    /// Smallest radius on which `psi` is zero-derivative free and injective,
    /// inflated by a 2% margin.
    ///
    /// Heuristic: derivative roots come from the companion matrix of
    /// `w^(m+1) psi'(w)`; injectivity is a polygon self-intersection test
    /// on `psi(|w| = r)`, bisected in `r`.
    pub fn estimate_rho_hat(&self) -> Result<f64> {
        if self.cneg.is_empty() {
            return Ok(0.0);
        }
        let m = self.cneg.len();
        // w^(m+1) psi'(w) = c1 w^(m+1) - sum_k k a_k w^(m-k), made monic
        let mut coeffs = vec![C64::new(0.0, 0.0); m + 2];
        coeffs[m + 1] = C64::new(1.0, 0.0);
        for k in 1..=m {
            coeffs[m - k] -= self.cneg[k - 1] * k as f64 / self.c1;
        }
        let r_deriv = zeros::poly_roots(&coeffs)?.into_iter().map(|z| z.norm()).fold(0.0, f64::max);

        let samples = 384;
        if !self.level_curve_is_simple(1.0, samples) || r_deriv >= 1.0 {
            return Err(Error::Config("exterior map is not univalent on |w| >= 1; curve rejected".into()));
        }
        let lo_start = r_deriv * (1.0 + 1e-9);
        let r_simple = if self.level_curve_is_simple(lo_start.max(1e-6), samples) {
            lo_start
        } else {
            let (mut lo, mut hi) = (lo_start.max(1e-6), 1.0);
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if self.level_curve_is_simple(mid, samples) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            // refine on a denser polygon
            let mut r = hi;
            while !self.level_curve_is_simple(r, 4 * samples) && r < 1.0 {
                r = (r * 1.001).min(1.0);
            }
            r
        };
        let r = r_deriv.max(r_simple) * RHO_HAT_MARGIN;
        if r >= 1.0 {
            return Err(Error::Config("univalence radius estimate is not below 1; curve rejected".into()));
        }
        Ok(r)
    }

    fn level_curve_is_simple(&self, r: f64, samples: usize) -> bool {
        let pts: Vec<C64> = (0..samples).map(|j| self.psi_unchecked(C64::from_polar(r, TAU * j as f64 / samples as f64))).collect();
        // positively oriented (psi' != 0 and no fold-over)
        let area: f64 = (0..samples).map(|j| { let a = pts[j]; let b = pts[(j + 1) % samples]; a.re * b.im - a.im * b.re }).sum();
        if area <= 0.0 {
            return false;
        }
        for i in 0..samples {
            let (a, b) = (pts[i], pts[(i + 1) % samples]);
            for j in (i + 2)..samples {
                if i == 0 && j == samples - 1 {
                    continue;
                }
                let (p, q) = (pts[j], pts[(j + 1) % samples]);
                if segments_cross(a, b, p, q) {
                    return false;
                }
            }
        }
        true
    }
}

fn segments_cross(a: C64, b: C64, p: C64, q: C64) -> bool {
    let cross = |o: C64, u: C64, v: C64| (u.re - o.re) * (v.im - o.im) - (u.im - o.im) * (v.re - o.re);
    let d1 = cross(p, q, a);
    let d2 = cross(p, q, b);
    let d3 = cross(a, b, p);
    let d4 = cross(a, b, q);
    (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0)
}

/// Trapezoid discretization of a level curve `L_r`, pulled back to `|w| = r`.
#[derive(Clone, Debug)]
pub struct Contour {
    pub r: f64,
    pub nodes_w: Vec<C64>,
    pub nodes_z: Vec<C64>,
    pub dpsi: Vec<C64>,
}

impl Contour {
    pub fn len(&self) -> usize {
        self.nodes_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes_w.is_empty()
    }

    /// `(1/2πi) ∮_{L_r} F(ζ) dζ` from samples `F(ζ_j)` given by index.
    pub fn integrate<F: Fn(usize) -> C64>(&self, f: F) -> C64 {
        let n = self.len() as f64;
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..self.len() {
            acc += f(j) * self.dpsi[j] * self.nodes_w[j];
        }
        acc / n
    }
}
