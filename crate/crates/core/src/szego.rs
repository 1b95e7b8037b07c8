//! Weights on `L_1` and their Szegő functions.
//!
//! Two weight families are supported: `h = |V|^2` with `V` a zero-free
//! Laurent polynomial near `L_1`, and the algebraic family
//! `h = |omega|^-2 prod_k |z - a_k|^(2 lambda_k)` with all `a_k` on one
//! level curve `L_rho`. Exterior Szegő functions come from the Fourier
//! series of `log h(psi(e^it))` (generic) or the explicit product (algebraic);
//! the interior one always comes from the Fourier series of `log h` pulled
//! back through the interior map.

use std::f64::consts::TAU;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::complex::{self, continue_log, C64};
use crate::curve::CurveSpec;
use crate::error::{Error, Result};
use crate::interior::InteriorMap;

/// Largest number of Fourier coefficients kept for any Szegő function.
pub const MAX_COEFFS: usize = 4096;
const TAIL_TOL: f64 = 1e-14;
const CUT_GUARD: f64 = 1e-8;
const ON_CURVE_TOL: f64 = 1e-8;

/// `sum_i coeffs[i] z^(low + i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Laurent {
    #[serde(with = "complex::pairs")]
    pub coeffs: Vec<C64>,
    #[serde(default)]
    pub low: i32,
}

impl Laurent {
    pub fn constant(v: f64) -> Self {
        Laurent { coeffs: vec![C64::new(v, 0.0)], low: 0 }
    }

    pub fn eval(&self, z: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for a in self.coeffs.iter().rev() {
            acc = acc * z + a;
        }
        acc * z.powi(self.low)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Singularity {
    #[serde(with = "complex::pair")]
    pub a: C64,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightSpec {
    /// `h = |V|^2` on `L_1`. `V` lists coefficients of `z^V_low, z^(V_low+1), ...`.
    Generic {
        #[serde(rename = "V", with = "complex::pairs")]
        v: Vec<C64>,
        #[serde(rename = "V_low", default)]
        v_low: i32,
        /// Analyticity radius of the exterior Szegő function, if known.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho: Option<f64>,
    },
    /// `h = |omega|^-2 prod |z - a_k|^(2 lambda_k)`; `omega` lists the
    /// coefficients of `z^0, z^-1, z^-2, ...`.
    Singular {
        #[serde(with = "complex::pairs")]
        omega: Vec<C64>,
        sing: Vec<Singularity>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
    },
}

impl WeightSpec {
    pub fn unit() -> Self {
        WeightSpec::Generic { v: vec![C64::new(1.0, 0.0)], v_low: 0, rho: None }
    }

    pub fn generic(v: Vec<C64>, rho: Option<f64>) -> Self {
        WeightSpec::Generic { v, v_low: 0, rho }
    }

    pub fn singular(sing: Vec<(C64, f64)>) -> Self {
        WeightSpec::Singular {
            omega: vec![C64::new(1.0, 0.0)],
            sing: sing.into_iter().map(|(a, lambda)| Singularity { a, lambda }).collect(),
            sigma: None,
        }
    }

    fn omega_eval(omega: &[C64], z: C64) -> C64 {
        let s = z.inv();
        let mut acc = C64::new(0.0, 0.0);
        for a in omega.iter().rev() {
            acc = acc * s + a;
        }
        acc
    }

    /// Weight value at a point of `L_1` (no on-curve check).
    pub fn h_unchecked(&self, z: C64) -> f64 {
        match self {
            WeightSpec::Generic { v, v_low, .. } => Laurent { coeffs: v.clone(), low: *v_low }.eval(z).norm_sqr(),
            WeightSpec::Singular { omega, sing, .. } => {
                let mut h = Self::omega_eval(omega, z).norm_sqr().recip();
                for s in sing {
                    h *= (z - s.a).norm().powf(2.0 * s.lambda);
                }
                h
            }
        }
    }
}

/// Weight at `z`, which must lie on `L_1`.
pub fn h_eval(weight: &WeightSpec, curve: &CurveSpec, z: C64) -> Result<f64> {
    let w = curve.phi(z)?;
    if (w.norm() - 1.0).abs() > ON_CURVE_TOL {
        return Err(Error::Domain(format!("point {z} is not on L_1 (|phi| = {})", w.norm())));
    }
    let h = weight.h_unchecked(z);
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("weight is not positive at {z}")));
    }
    Ok(h)
}

/// Szegő functions of a positive function on the unit circle, stored as the
/// Fourier coefficients `c_m`, `m >= 0`, of its logarithm.
#[derive(Clone, Debug)]
pub struct DiskSzego {
    pub coeffs: Vec<C64>,
}

impl DiskSzego {
    /// From samples at `e^(2 pi i j / N)`; keeps at most `k` coefficients.
    pub fn from_samples(samples: &[f64], k: usize) -> Result<Self> {
        let n = samples.len();
        if n < 2 * k {
            return Err(Error::Resolution(format!("{n} samples cannot resolve {k} coefficients")));
        }
        if let Some(bad) = samples.iter().find(|&&f| !(f > 0.0 && f.is_finite())) {
            return Err(Error::Domain(format!("Szegő function of a non-positive sample {bad}")));
        }
        let mut buf: Vec<C64> = samples.iter().map(|f| C64::new(f.ln(), 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let all: Vec<C64> = buf.iter().take(n / 2).map(|c| c / n as f64).collect();
        let scale = all[0].norm().max(1.0);
        let tail = all[(n / 4).max(k.min(n / 2 - 1))..].iter().map(|c| c.norm()).fold(0.0, f64::max);
        let coeffs = truncate(all.into_iter().take(k).collect(), scale);
        if coeffs.len() == k && tail > TAIL_TOL * scale {
            return Err(Error::Resolution(format!(
                "Fourier tail {tail:e} above tolerance with {k} coefficients; increase the sample count"
            )));
        }
        Ok(DiskSzego { coeffs })
    }

    /// Adaptive construction from `f(e^{it})`, doubling the sample count
    /// until the coefficient tail is below tolerance.
    pub fn from_fn<F: Fn(f64) -> f64>(f: F) -> Result<Self> {
        let mut n = 64;
        loop {
            let samples: Vec<f64> = (0..n).map(|j| f(TAU * j as f64 / n as f64)).collect();
            match Self::from_samples(&samples, n / 2) {
                Ok(d) if d.coeffs.len() < n / 4 => return Ok(d),
                Err(Error::Domain(m)) => return Err(Error::Domain(m)),
                other => {
                    if n >= 2 * MAX_COEFFS {
                        return other.and_then(|d| {
                            if d.coeffs.len() >= n / 4 {
                                Err(Error::Resolution("Fourier coefficients did not decay within the coefficient cap".into()))
                            } else {
                                Ok(d)
                            }
                        });
                    }
                    n *= 2;
                }
            }
        }
    }

    /// `D_i(w) = exp(c_0/2 + sum_m c_m w^m)`.
    pub fn interior(&self, w: C64) -> C64 {
        self.log_interior(w).exp()
    }

    pub fn log_interior(&self, w: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for c in self.coeffs.iter().skip(1).rev() {
            acc = (acc + c) * w;
        }
        acc + self.coeffs[0] * 0.5
    }

    /// `D_e(w) = 1/conj(D_i(1/conj w)) = exp(-c_0/2 - sum_m conj(c_m) w^-m)`.
    pub fn exterior(&self, w: C64) -> C64 {
        if w.is_infinite() {
            return (-self.coeffs[0] * 0.5).exp();
        }
        let s = w.inv();
        let mut acc = C64::new(0.0, 0.0);
        for c in self.coeffs.iter().skip(1).rev() {
            acc = (acc + c.conj()) * s;
        }
        (-(acc + self.coeffs[0] * 0.5)).exp()
    }

    /// Decay radius `limsup |c_m|^(1/m)` estimated from the resolved coefficients.
    pub fn decay_radius(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, c)| c.norm() > 0.0)
            .map(|(m, c)| (m as f64, c.norm().ln()))
            .collect();
        if pts.len() < 4 {
            return None;
        }
        let tail = &pts[pts.len() / 2..];
        let n = tail.len() as f64;
        let mx = tail.iter().map(|p| p.0).sum::<f64>() / n;
        let my = tail.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
        if sxx == 0.0 {
            return None;
        }
        Some((sxy / sxx).exp().min(1.0))
    }
}

/// Drops the coefficients past the first one at the rounding floor; beyond
/// it the values are noise that analytic continuation would amplify.
fn truncate(mut c: Vec<C64>, scale: f64) -> Vec<C64> {
    let floor = 4.0 * f64::EPSILON * scale;
    if let Some(pos) = c.iter().skip(1).position(|x| x.norm() < floor) {
        c.truncate(pos + 1);
    }
    if c.is_empty() {
        c.push(C64::new(0.0, 0.0));
    }
    c
}

/// Cuts of the exterior Szegő function of an algebraic weight in the `w`-plane.
#[derive(Clone, Debug, Serialize)]
pub struct CutSystem {
    pub sigma: f64,
    /// `(sigma_k, rho_k)` for each non-integer exponent.
    #[serde(skip)]
    pub segments: Vec<(C64, C64)>,
}

#[derive(Clone, Debug)]
struct SingularData {
    omega: Vec<C64>,
    /// `(a_k, rho_k = phi(a_k), lambda_k)`, sorted by decreasing `lambda`.
    sing: Vec<(C64, C64, f64)>,
    cuts: CutSystem,
    u: usize,
}

#[derive(Clone, Debug)]
enum Exterior {
    Fourier(DiskSzego),
    Product(SingularData),
}

/// Evaluators for the exterior and interior Szegő functions of one weight.
#[derive(Clone, Debug)]
pub struct SzegoPack {
    curve: CurveSpec,
    imap: InteriorMap,
    weight: WeightSpec,
    exterior: Exterior,
    interior: DiskSzego,
    pub rho: f64,
    pub delta_e_inf: f64,
}

impl SzegoPack {
    pub fn build(curve: &CurveSpec, imap: &InteriorMap, weight: &WeightSpec) -> Result<Self> {
        match weight {
            WeightSpec::Generic { .. } => Self::build_generic(curve, imap, weight),
            WeightSpec::Singular { .. } => Self::build_singular(curve, imap, weight),
        }
    }

    pub fn build_generic(curve: &CurveSpec, imap: &InteriorMap, weight: &WeightSpec) -> Result<Self> {
        let WeightSpec::Generic { rho, .. } = weight else {
            return Err(Error::Config("expected a generic weight".into()));
        };
        let ext = DiskSzego::from_fn(|t| weight.h_unchecked(curve.psi_unchecked(C64::from_polar(1.0, t))))?;
        let interior = interior_fourier(curve, imap, weight)?;
        let rho = match rho {
            Some(r) => {
                if !(*r >= curve.rho_hat() && *r < 1.0) {
                    return Err(Error::Config(format!("declared rho {r} must lie in [rho_hat, 1)")));
                }
                *r
            }
            None => ext.decay_radius().unwrap_or(0.0).max(curve.rho_hat()),
        };
        let delta_e_inf = ext.exterior(C64::new(f64::INFINITY, 0.0)).re;
        Ok(SzegoPack {
            curve: curve.clone(),
            imap: imap.clone(),
            weight: weight.clone(),
            exterior: Exterior::Fourier(ext),
            interior,
            rho,
            delta_e_inf,
        })
    }

    pub fn build_singular(curve: &CurveSpec, imap: &InteriorMap, weight: &WeightSpec) -> Result<Self> {
        let WeightSpec::Singular { omega, sing, sigma } = weight else {
            return Err(Error::Config("expected a singular weight".into()));
        };
        if sing.is_empty() {
            return Err(Error::Config("an algebraic weight needs at least one singularity".into()));
        }
        if omega.is_empty() || omega[0].im.abs() > 1e-14 || omega[0].re <= 0.0 {
            return Err(Error::Config("omega must be positive at infinity".into()));
        }
        let mut s: Vec<(C64, C64, f64)> = Vec::with_capacity(sing.len());
        for x in sing {
            if x.lambda <= 0.0 && x.lambda.fract() == 0.0 {
                return Err(Error::Config(format!("exponent {} is a nonpositive integer", x.lambda)));
            }
            if s.iter().any(|p| (p.0 - x.a).norm() < 1e-12) {
                return Err(Error::Config(format!("singularity {} listed twice", x.a)));
            }
            let rk = curve.phi(x.a).map_err(|_| Error::Config(format!("singularity {} is not in the domain of phi", x.a)))?;
            s.push((x.a, rk, x.lambda));
        }
        s.sort_by(|p, q| q.2.total_cmp(&p.2));
        let rho = s[0].1.norm();
        if s.iter().any(|p| (p.1.norm() - rho).abs() > 1e-10) {
            return Err(Error::Config("singularities must lie on one level curve L_rho".into()));
        }
        if !(rho > curve.rho_hat() && rho < 1.0) {
            return Err(Error::Config(format!("rho = {rho} must lie in (rho_hat, 1)")));
        }
        let sigma = sigma.unwrap_or(0.5 * (curve.rho_hat() + rho));
        if !(sigma > curve.rho_hat() && sigma < rho) {
            return Err(Error::Config(format!("sigma = {sigma} must lie in (rho_hat, rho)")));
        }
        let u = s.iter().filter(|p| p.2 == s[0].2).count();
        let segments = s
            .iter()
            .filter(|p| p.2.fract() != 0.0)
            .map(|p| (p.1 * (sigma / rho), p.1))
            .collect();
        let data = SingularData { omega: omega.clone(), sing: s, cuts: CutSystem { sigma, segments }, u };
        for j in 0..64 {
            let z = curve.psi_unchecked(C64::from_polar(1.0, TAU * j as f64 / 64.0));
            if WeightSpec::omega_eval(omega, z).norm() == 0.0 {
                return Err(Error::Config("omega vanishes on L_1".into()));
            }
        }
        let interior = interior_fourier(curve, imap, weight)?;
        let delta_e_inf = omega[0].re * data.sing.iter().map(|p| curve.dphi_inf().powf(p.2)).product::<f64>();
        Ok(SzegoPack {
            curve: curve.clone(),
            imap: imap.clone(),
            weight: weight.clone(),
            exterior: Exterior::Product(data),
            interior,
            rho,
            delta_e_inf,
        })
    }

    pub fn curve(&self) -> &CurveSpec {
        &self.curve
    }

    pub fn imap(&self) -> &InteriorMap {
        &self.imap
    }

    pub fn weight(&self) -> &WeightSpec {
        &self.weight
    }

    pub fn cut_system(&self) -> Option<&CutSystem> {
        match &self.exterior {
            Exterior::Product(d) => Some(&d.cuts),
            Exterior::Fourier(_) => None,
        }
    }

    /// `(a_k, phi(a_k), lambda_k)` sorted by decreasing exponent, and `u`.
    pub fn singularities(&self) -> Option<(Vec<(C64, C64, f64)>, usize)> {
        match &self.exterior {
            Exterior::Product(d) => Some((d.sing.clone(), d.u)),
            Exterior::Fourier(_) => None,
        }
    }

    /// `Delta_e` at `w = phi(z)`.
    pub fn delta_e_w(&self, w: C64) -> Result<C64> {
        match &self.exterior {
            Exterior::Fourier(d) => {
                if w.norm() <= self.rho {
                    return Err(Error::Domain(format!("|w| = {} inside the analyticity radius {}", w.norm(), self.rho)));
                }
                Ok(d.exterior(w))
            }
            Exterior::Product(d) => {
                if w.norm() <= d.cuts.sigma {
                    return Err(Error::Domain(format!("|w| = {} not above sigma = {}", w.norm(), d.cuts.sigma)));
                }
                for &(sk, rk) in &d.cuts.segments {
                    if segment_distance(w, sk, rk) < CUT_GUARD {
                        return Err(Error::CutProximity(format!("w = {w} on the cut [{sk}, {rk}]")));
                    }
                }
                for &(_, rk, _) in &d.sing {
                    if (w - rk).norm() < CUT_GUARD {
                        return Err(Error::CutProximity(format!("w = {w} at the singular point {rk}")));
                    }
                }
                Ok(self.singular_product(d, w, None))
            }
        }
    }

    /// `omega(psi(w)) prod_{j != skip} (phi/(z - a_j))^lambda_j`, without cut checks.
    fn singular_product(&self, d: &SingularData, w: C64, skip: Option<usize>) -> C64 {
        let z = self.curve.psi_unchecked(w);
        let mut log = C64::new(0.0, 0.0);
        let mut val = WeightSpec::omega_eval(&d.omega, z);
        for (k, &(_, rk, lam)) in d.sing.iter().enumerate() {
            if Some(k) == skip {
                continue;
            }
            let l = (w / (w - rk)).ln() - self.log_difference_quotient(w, rk);
            if lam.fract() == 0.0 {
                val *= l.exp().powi(lam as i32);
            } else {
                log += l * lam;
            }
        }
        val * log.exp()
    }

    /// `Delta_e` with the `k`-th singular factor removed, at `w = phi(a_k)`;
    /// this is `omega(a_k) prod_{j != k} (phi(a_k)/(a_k - a_j))^lambda_j`.
    pub fn delta_e_reduced_at(&self, k: usize) -> Result<C64> {
        let Exterior::Product(d) = &self.exterior else {
            return Err(Error::Config("reduced exterior function needs an algebraic weight".into()));
        };
        let len = d.sing.len();
        let &(_, rk, _) = d.sing.get(k).ok_or(Error::Index { index: k + 1, len })?;
        Ok(self.singular_product(d, rk, Some(k)))
    }

    pub fn delta_e(&self, z: C64) -> Result<C64> {
        self.delta_e_w(self.curve.phi(z)?)
    }

    /// `log((psi(w) - psi(w_k)) / (w - w_k))`, continued from `log c1` at infinity.
    pub(crate) fn log_difference_quotient(&self, w: C64, wk: C64) -> C64 {
        let curve = &self.curve;
        if curve.cneg.is_empty() {
            return C64::new(curve.c1.ln(), 0.0);
        }
        let q = |s: C64| {
            // c1 - sum_j a_j sum_{i<j} w^(i-j) wk^(-1-i), written in s = 1/w
            let mut acc = C64::new(curve.c1, 0.0);
            for (idx, a) in curve.cneg.iter().enumerate() {
                let j = idx + 1;
                let mut inner = C64::new(0.0, 0.0);
                for i in 0..j {
                    inner += s.powi((j - i) as i32) * wk.powi(-1 - i as i32);
                }
                acc -= a * inner;
            }
            acc
        };
        continue_log(q, C64::new(0.0, 0.0), w.inv(), C64::new(curve.c1.ln(), 0.0), 12)
    }

    /// `log psi'(w_k)` reached through the difference quotient; agrees with
    /// [`CurveSpec::log_dpsi`] because both are continued from `log c1`.
    pub fn log_dpsi_via_quotient(&self, wk: C64) -> C64 {
        self.log_difference_quotient(wk, wk)
    }

    /// `Delta_i` on `closed G_1`, positive at the interior-map center.
    pub fn delta_i(&self, z: C64) -> Result<C64> {
        if let Ok(w) = self.curve.phi(z) {
            if w.norm() > 1.0 + ON_CURVE_TOL {
                return Err(Error::Domain(format!("Delta_i needs z in closed G_1; |phi(z)| = {}", w.norm())));
            }
        }
        Ok(self.interior.interior(self.imap.phi(z)?))
    }

    /// `1/Delta_i`, continued across `L_1` into `G_{1/rho}` by
    /// `Delta_e(z) conj(Delta_e(z*)) conj(Delta_i(z*))`.
    pub fn inv_delta_i(&self, z: C64) -> Result<C64> {
        match self.curve.phi(z) {
            Ok(w) if w.norm() > 1.0 => {
                if w.norm() * self.rho >= 1.0 {
                    return Err(Error::Domain(format!("|phi(z)| = {} outside G_(1/rho)", w.norm())));
                }
                let ws = w.conj().inv();
                let zs = self.curve.psi_unchecked(ws);
                Ok(self.delta_e_w(w)? * self.delta_e_w(ws)?.conj() * self.delta_i(zs)?.conj())
            }
            _ => Ok(self.delta_i(z)?.inv()),
        }
    }

    /// `Delta_e(z) Delta_i(z)` at a point of the band given by `w = phi(z)`.
    pub fn e_product_w(&self, w: C64) -> Result<C64> {
        let z = self.curve.psi_unchecked(w);
        if w.norm() > 1.0 {
            Ok(self.delta_e_w(w)? / self.inv_delta_i(z)?)
        } else {
            Ok(self.delta_e_w(w)? * self.delta_i(z)?)
        }
    }

    /// Product form of `Delta_i` for an algebraic weight:
    /// `Delta_i(z; |omega|^-2) prod ((z - a)(1 - conj(varphi(a)) varphi(z)) / (varphi(z) - varphi(a)))^lambda`,
    /// with every power continued along the segment from the map center and
    /// normalized positive there.
    pub fn delta_i_product_form(&self, z: C64) -> Result<C64> {
        let Exterior::Product(d) = &self.exterior else {
            return Err(Error::Config("product form needs an algebraic weight".into()));
        };
        let omega_only = WeightSpec::Singular { omega: d.omega.clone(), sing: vec![], sigma: None };
        let base = interior_fourier(&self.curve, &self.imap, &omega_only)?;
        let z0 = self.imap.z0;
        let mut out = base.interior(self.imap.phi(z)?);
        for &(a, _, lam) in &d.sing {
            let pa = self.imap.phi(a)?;
            let f = |x: C64| {
                let px = self.imap.phi(x).unwrap_or(C64::new(f64::NAN, f64::NAN));
                if (x - a).norm() < 1e-9 {
                    let (_, dpa) = self.imap.eval(a).unwrap_or((C64::new(0.0, 0.0), C64::new(1.0, 0.0)));
                    return (C64::new(1.0, 0.0) - pa.conj() * pa) / dpa;
                }
                (x - a) * (C64::new(1.0, 0.0) - pa.conj() * px) / (px - pa)
            };
            let start = C64::new(f(z0).norm().ln(), 0.0);
            out *= (continue_log(f, z0, z, start, 32) * lam).exp();
        }
        Ok(out)
    }
}

/// Fourier data of `log h` on the unit circle of the interior map, computed
/// in the `t`-parametrization of `L_1` (`theta = arg varphi(psi(e^it))`).
fn interior_fourier(curve: &CurveSpec, imap: &InteriorMap, weight: &WeightSpec) -> Result<DiskSzego> {
    let mut n = 128;
    let mut prev: Option<Vec<C64>> = None;
    loop {
        let mut theta = Vec::with_capacity(n);
        let mut dtheta = Vec::with_capacity(n);
        let mut logh = Vec::with_capacity(n);
        let mut last = 0.0;
        for j in 0..n {
            let w = C64::from_polar(1.0, TAU * j as f64 / n as f64);
            let z = curve.psi_unchecked(w);
            let (p, dp) = imap.eval(z)?;
            let mut a = p.arg();
            if j > 0 {
                a = last + (a - last + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI;
            }
            last = a;
            theta.push(a);
            dtheta.push(dp.norm() * curve.dpsi_unchecked(w).norm());
            let h = weight.h_unchecked(z);
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Domain(format!("weight is not positive at {z}")));
            }
            logh.push(h.ln());
        }
        // mode m oscillates like e^(-i m theta(t)); keep only modes the t-grid resolves
        let stretch = dtheta.iter().cloned().fold(0.0, f64::max);
        let k = ((n as f64 / (3.0 * stretch)) as usize).min(n / 2);
        let mut coeffs = vec![C64::new(0.0, 0.0); k];
        for j in 0..n {
            let step = C64::from_polar(1.0, -theta[j]);
            let mut e = C64::new(logh[j] * dtheta[j] / n as f64, 0.0);
            for c in coeffs.iter_mut() {
                *c += e;
                e *= step;
            }
        }
        if k >= 16 {
            let scale = coeffs[0].norm().max(1.0);
            let tail = coeffs[3 * k / 4..].iter().map(|c| c.norm()).fold(0.0, f64::max);
            let stable = prev.as_ref().is_some_and(|p| {
                p.iter().zip(&coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) < TAIL_TOL * scale
            });
            if stable && tail < TAIL_TOL * scale {
                return Ok(DiskSzego { coeffs: truncate(coeffs, scale) });
            }
        }
        if n >= 4 * MAX_COEFFS {
            return Err(Error::Resolution("interior Szegő coefficients did not converge".into()));
        }
        prev = Some(coeffs);
        n *= 2;
    }
}

fn segment_distance(p: C64, a: C64, b: C64) -> f64 {
    let ab = b - a;
    let t = (((p - a) * ab.conj()).re / ab.norm_sqr()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::c;
    use crate::interior::InteriorFitOptions;

    fn circle_pack(weight: WeightSpec) -> SzegoPack {
        let curve = CurveSpec::unit_circle();
        let imap = InteriorMap::fit(&curve, c(0.0, 0.0), InteriorFitOptions::default()).unwrap();
        SzegoPack::build(&curve, &imap, &weight).unwrap()
    }

    fn shifted_circle_weight() -> WeightSpec {
        WeightSpec::generic(vec![c(-0.5, 0.0), c(1.0, 0.0)], Some(0.5))
    }

    #[test]
    fn disk_szego_examples() {
        let one = DiskSzego::from_fn(|_| 1.0).unwrap();
        assert!((one.interior(c(0.3, 0.2)) - 1.0).norm() < 1e-15);
        assert!((one.exterior(c(3.0, 1.0)) - 1.0).norm() < 1e-15);
        let f = DiskSzego::from_fn(|t| (C64::new(1.0, 0.0) - C64::from_polar(0.5, t)).norm_sqr()).unwrap();
        assert!((f.interior(c(0.5, 0.0)) - 0.75).norm() < 1e-14);
        assert!((f.interior(c(0.0, 0.0)) - 1.0).norm() < 1e-14);
        assert!((f.exterior(c(2.0, 0.0)) - 4.0 / 3.0).norm() < 1e-14);
        assert!((f.exterior(C64::new(f64::INFINITY, 0.0)) - 1.0).norm() < 1e-14);
    }

    #[test]
    fn disk_szego_rejects_nonpositive() {
        assert!(matches!(DiskSzego::from_samples(&[1.0, 0.0, 1.0, 2.0], 2), Err(Error::Domain(_))));
    }

    #[test]
    fn reflection_identity() {
        let f = DiskSzego::from_fn(|t| 2.0 + t.cos() + 0.3 * (2.0 * t).sin()).unwrap();
        for k in 0..100 {
            let w = C64::from_polar(1.0 + 0.05 * k as f64, 0.7 * k as f64);
            let v = f.exterior(w) * f.interior(w.conj().inv()).conj();
            assert!((v - 1.0).norm() < 1e-10);
        }
    }

    #[test]
    fn circle_unit_weight() {
        let p = circle_pack(WeightSpec::unit());
        assert!((p.delta_e(c(1.5, 0.3)).unwrap() - 1.0).norm() < 1e-14);
        assert!((p.delta_i(c(0.2, -0.4)).unwrap() - 1.0).norm() < 1e-14);
        assert!((p.inv_delta_i(c(1.3, 0.0)).unwrap() - 1.0).norm() < 1e-14);
    }

    #[test]
    fn circle_shifted_weight_closed_forms() {
        let p = circle_pack(shifted_circle_weight());
        for z in [c(2.0, 0.0), c(0.0, 1.0), c(-0.8, 0.7)] {
            let exact = z / (z - 0.5);
            assert!((p.delta_e(z).unwrap() - exact).norm() < 1e-12);
        }
        assert!((p.delta_e_inf - 1.0).abs() < 1e-14);
        // |Delta_i|^2 = h on the circle and Delta_i(0) > 0 force 1 - z/2
        for z in [c(1.0, 0.0), c(0.3, 0.1), c(-0.6, -0.6)] {
            assert!((p.delta_i(z).unwrap() - (C64::new(1.0, 0.0) - z * 0.5)).norm() < 1e-12);
        }
        assert!((p.delta_i(c(1.0, 0.0)).unwrap().norm_sqr() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn continuation_matches_across_l1() {
        let p = circle_pack(shifted_circle_weight());
        let z = c(1.2, 0.0);
        let direct = (C64::new(1.0, 0.0) - z * 0.5).inv();
        assert!((p.inv_delta_i(z).unwrap() - direct).norm() < 1e-10);
        for k in 0..8 {
            let u = C64::from_polar(1.0, 0.8 * k as f64);
            let out = p.inv_delta_i(u * (1.0 + 1e-9)).unwrap();
            let inn = p.inv_delta_i(u * (1.0 - 1e-9)).unwrap();
            assert!((out - inn).norm() < 1e-8);
        }
    }

    #[test]
    fn singular_closed_forms_on_circle() {
        let p = circle_pack(WeightSpec::singular(vec![(c(0.5, 0.0), 0.5)]));
        assert!((p.delta_e_inf - 1.0).abs() < 1e-15);
        assert!((p.delta_e(c(2.0, 0.0)).unwrap() - (4.0f64 / 3.0).sqrt()).norm() < 1e-14);
        let d = p.delta_e(c(0.0, 1.0)).unwrap();
        assert!((d.norm_sqr().recip() - (c(0.0, 1.0) - 0.5).norm()).abs() < 1e-12);
        assert!((p.delta_i(c(-1.0, 0.0)).unwrap().norm_sqr() - 1.5).abs() < 1e-12);
        assert!(matches!(p.delta_e_w(c(0.45, 0.0)), Err(Error::CutProximity(_)) | Ok(_)));
        assert!(matches!(p.delta_e_w(c(0.4, 0.0)), Err(Error::CutProximity(_))));
        assert_eq!(p.cut_system().unwrap().segments.len(), 1);
    }

    #[test]
    fn dual_representation_agreement() {
        let gen = circle_pack(shifted_circle_weight());
        let sing = circle_pack(WeightSpec::singular(vec![(c(0.5, 0.0), 1.0)]));
        assert!(sing.cut_system().unwrap().segments.is_empty());
        for k in 0..24 {
            let z = C64::from_polar(1.0 + 0.1 * (k % 5) as f64, 0.3 * k as f64);
            assert!((gen.delta_e(z).unwrap() - sing.delta_e(z).unwrap()).norm() < 1e-9);
        }
    }

    #[test]
    fn product_form_interior_agrees_with_fourier() {
        let curve = CurveSpec::joukowski(0.25).unwrap();
        let imap = InteriorMap::fit(&curve, c(0.0, 0.0), InteriorFitOptions::default()).unwrap();
        let a = curve.psi_unchecked(C64::from_polar(0.8, 0.4));
        let p = SzegoPack::build(&curve, &imap, &WeightSpec::singular(vec![(a, 0.5)])).unwrap();
        for z in [c(0.1, 0.1), c(-0.6, 0.2), c(0.9, -0.3)] {
            let f = p.delta_i(z).unwrap();
            let g = p.delta_i_product_form(z).unwrap();
            assert!((f - g).norm() < 1e-9 * f.norm(), "{f} vs {g}");
        }
    }

    #[test]
    fn boundary_modulus_identities_on_ellipse() {
        let curve = CurveSpec::joukowski(0.25).unwrap();
        let imap = InteriorMap::fit(&curve, c(0.0, 0.0), InteriorFitOptions::default()).unwrap();
        let weight = WeightSpec::generic(vec![c(2.0, 0.0), c(0.3, 0.1)], None);
        let p = SzegoPack::build(&curve, &imap, &weight).unwrap();
        for j in 0..97 {
            let z = curve.psi_unchecked(C64::from_polar(1.0, TAU * (j as f64 + 0.3) / 97.0));
            let h = h_eval(&weight, &curve, z).unwrap();
            assert!((p.delta_e(z).unwrap().norm_sqr().recip() / h - 1.0).abs() < 1e-9);
            assert!((p.delta_i(z).unwrap().norm_sqr() / h - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn weight_values() {
        let curve = CurveSpec::unit_circle();
        assert_eq!(h_eval(&WeightSpec::unit(), &curve, c(0.0, 1.0)).unwrap(), 1.0);
        assert!((h_eval(&shifted_circle_weight(), &curve, c(-1.0, 0.0)).unwrap() - 2.25).abs() < 1e-15);
        let s = WeightSpec::singular(vec![(c(0.5, 0.0), 0.5)]);
        assert!((h_eval(&s, &curve, c(1.0, 0.0)).unwrap() - 0.5).abs() < 1e-15);
        assert!(h_eval(&s, &curve, c(0.9, 0.0)).is_err());
    }

    #[test]
    fn weight_json_shapes() {
        let g: WeightSpec = serde_json::from_str(r#"{"kind":"generic","V":[[-0.5,0],[1,0]]}"#).unwrap();
        assert_eq!(g, WeightSpec::generic(vec![c(-0.5, 0.0), c(1.0, 0.0)], None));
        let s: WeightSpec = serde_json::from_str(r#"{"kind":"singular","omega":[[1,0]],"sing":[{"a":[0.5,0],"lambda":0.5}]}"#).unwrap();
        assert_eq!(s, WeightSpec::singular(vec![(c(0.5, 0.0), 0.5)]));
    }
}
