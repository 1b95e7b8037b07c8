//! Interior Riemann map of `G_1` onto the unit disk and the kernel `W`.
//!
//! The map is represented as `varphi(z) = (z - z0) * exp(g(z))` with `g` a
//! polynomial in `(z - z0)/R`. Fitting `Re g = -log|z - z0|` on `L_1` is a
//! linear least-squares problem, `varphi(z0) = 0` holds by construction and
//! `varphi'(z0) = exp(g(z0)) > 0` once `Im g(z0) = 0` is imposed. Outside
//! `L_1` the map is continued by reflection, `varphi(z) = 1/conj(varphi(z*))`.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};

use crate::complex::{continue_log, C64};
use crate::curve::CurveSpec;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct InteriorFitOptions {
    pub degree: usize,
    pub boundary_nodes: usize,
    pub tol: f64,
    /// The map only needs to be zero-free on `Omega_c ∩ G_1` for
    /// `c = max(rho_hat, band_floor)`; callers that never continue `W`
    /// beyond `L_{1/rho}` may raise this to `rho`.
    pub band_floor: f64,
}

impl Default for InteriorFitOptions {
    fn default() -> Self {
        InteriorFitOptions { degree: 48, boundary_nodes: 512, tol: 1e-10, band_floor: 0.0 }
    }
}

#[derive(Clone, Debug)]
pub struct InteriorMap {
    curve: CurveSpec,
    pub z0: C64,
    scale: f64,
    /// Taylor coefficients of `g` in the variable `(z - z0)/scale`.
    pub log_coeffs: Vec<C64>,
    /// Largest `| |varphi| - 1 |` on a boundary grid offset from the collocation nodes.
    pub residual: f64,
    pole_guard: f64,
    sqrt_dphi_z0: f64,
}

/// A point prepared for repeated kernel evaluations.
#[derive(Clone, Copy, Debug)]
pub struct KernelPoint {
    pub z: C64,
    pub phi: C64,
    pub sqrt_dphi: C64,
}

impl InteriorMap {
    /// Fits the map about `z0`, trying the curve center and the centroid of
    /// `L_1` if `z0` lies in the band where the map must not vanish.
    pub fn fit(curve: &CurveSpec, z0: C64, opts: InteriorFitOptions) -> Result<Self> {
        if opts.degree < 8 {
            return Err(Error::Config(format!("interior map degree {} must be at least 8", opts.degree)));
        }
        let centroid = {
            let m = 256;
            (0..m).map(|j| curve.psi_unchecked(C64::from_polar(1.0, TAU * j as f64 / m as f64))).sum::<C64>() / m as f64
        };
        for cand in [z0, curve.c0, centroid] {
            if !curve.encloses(cand) || in_band(curve, cand, opts.band_floor) {
                continue;
            }
            return Self::fit_at(curve, cand, opts);
        }
        Err(Error::Config(format!(
            "no admissible interior center: {z0} lies outside L_1 or inside the band between L_rho_hat and L_1; \
             set interior_center to a point deep inside the curve"
        )))
    }

    fn fit_at(curve: &CurveSpec, z0: C64, opts: InteriorFitOptions) -> Result<Self> {
        let m = opts.degree;
        let nb = opts.boundary_nodes.max(4 * m);
        let pts: Vec<C64> = (0..nb).map(|j| curve.psi_unchecked(C64::from_polar(1.0, TAU * j as f64 / nb as f64))).collect();
        let scale = pts.iter().map(|p| (p - z0).norm()).fold(0.0, f64::max);
        let cols = 2 * m + 1;
        let mut a = DMatrix::<f64>::zeros(nb, cols);
        let mut b = DVector::<f64>::zeros(nb);
        for (i, p) in pts.iter().enumerate() {
            let t = (p - z0) / scale;
            a[(i, 0)] = 1.0;
            let mut tp = C64::new(1.0, 0.0);
            for j in 1..=m {
                tp *= t;
                a[(i, 2 * j - 1)] = tp.re;
                a[(i, 2 * j)] = -tp.im;
            }
            b[i] = -(p - z0).norm().ln();
        }
        let x = a
            .svd(true, true)
            .solve(&b, 1e-14)
            .map_err(|e| Error::Domain(format!("interior least-squares solve failed: {e}")))?;
        let mut log_coeffs = vec![C64::new(x[0], 0.0)];
        for j in 1..=m {
            log_coeffs.push(C64::new(x[2 * j - 1], x[2 * j]));
        }
        let mut map = InteriorMap {
            curve: curve.clone(),
            z0,
            scale,
            log_coeffs,
            residual: 0.0,
            pole_guard: 1e-8 * curve.diameter(),
            sqrt_dphi_z0: 0.0,
        };
        map.sqrt_dphi_z0 = map.inner(z0).1.re.sqrt();
        let check = 2 * nb;
        map.residual = (0..check)
            .map(|j| {
                let p = curve.psi_unchecked(C64::from_polar(1.0, TAU * (j as f64 + 0.5) / check as f64));
                (map.inner(p).0.norm() - 1.0).abs()
            })
            .fold(0.0, f64::max);
        if map.residual > opts.tol {
            return Err(Error::FitFailure { residual: map.residual, tol: opts.tol });
        }
        Ok(map)
    }

    /// Polynomial representation, valid on and inside `L_1`.
    fn inner(&self, z: C64) -> (C64, C64) {
        let d = z - self.z0;
        let t = d / self.scale;
        let mut g = C64::new(0.0, 0.0);
        let mut dg = C64::new(0.0, 0.0);
        for (j, b) in self.log_coeffs.iter().enumerate().rev() {
            g = g * t + b;
            if j > 0 {
                dg = dg * t + b * j as f64;
            }
        }
        dg /= self.scale;
        let e = g.exp();
        (d * e, e * (C64::new(1.0, 0.0) + d * dg))
    }

    /// `(varphi(z), varphi'(z))` on `G_{1/rho_hat}`.
    pub fn eval(&self, z: C64) -> Result<(C64, C64)> {
        let w = match self.curve.phi(z) {
            Ok(w) if w.norm() > 1.0 => w,
            _ => return Ok(self.inner(z)),
        };
        let rh = self.curve.rho_hat();
        if rh > 0.0 && w.norm() >= 1.0 / rh {
            return Err(Error::Domain(format!("|phi(z)| = {} beyond the reflection band", w.norm())));
        }
        let wr = w.conj().inv();
        let zs = self.curve.psi_unchecked(wr);
        let (p, dp) = self.inner(zs);
        let q = p.conj();
        let dq = (dp * self.curve.dpsi_unchecked(wr) * (-wr * wr)).conj() / self.curve.dpsi_unchecked(w);
        Ok((q.inv(), -dq / (q * q)))
    }

    pub fn phi(&self, z: C64) -> Result<C64> {
        Ok(self.eval(z)?.0)
    }

    /// `sqrt(varphi'(z))` on the single branch positive at `z0`.
    pub fn sqrt_dphi(&self, z: C64) -> Result<C64> {
        // validate the endpoint first so the path continuation never leaves the domain
        let (_, d_end) = self.eval(z)?;
        if d_end.norm() == 0.0 {
            return Err(Error::Domain("varphi' vanishes".into()));
        }
        let f = |s: C64| self.eval(s).map(|v| v.1).unwrap_or(d_end);
        let l = continue_log(f, self.z0, z, C64::new(2.0 * self.sqrt_dphi_z0.ln(), 0.0), 16);
        Ok((l * 0.5).exp())
    }

    pub fn point(&self, z: C64) -> Result<KernelPoint> {
        Ok(KernelPoint { z, phi: self.phi(z)?, sqrt_dphi: self.sqrt_dphi(z)? })
    }

    /// `W(zeta, z) = sqrt(varphi'(z)) sqrt(varphi'(zeta)) / (varphi(zeta) - varphi(z))`.
    pub fn kernel_points(&self, zeta: &KernelPoint, z: &KernelPoint) -> Result<C64> {
        let d = (zeta.z - z.z).norm();
        if d < self.pole_guard {
            return Err(Error::Coincidence(d));
        }
        Ok(z.sqrt_dphi * zeta.sqrt_dphi / (zeta.phi - z.phi))
    }

    pub fn kernel(&self, zeta: C64, z: C64) -> Result<C64> {
        self.kernel_points(&self.point(zeta)?, &self.point(z)?)
    }

    pub fn curve(&self) -> &CurveSpec {
        &self.curve
    }
}

fn in_band(curve: &CurveSpec, z: C64, floor: f64) -> bool {
    matches!(curve.phi(z), Ok(w) if w.norm() > curve.rho_hat().max(floor))
}
