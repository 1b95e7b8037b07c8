//! Strong asymptotics: the exterior Szegő main term, the leading-coefficient
//! main term, the interior contour representation, the main terms for
//! weights with algebraic singularities on an interior level curve, and the
//! singular contour integral that drives them.

use std::f64::consts::{PI, TAU};

use gauss_quad::GaussLegendre;
use serde::Serialize;

use crate::complex::{continue_log, C64};
use crate::error::{Error, Result};
use crate::special::binom_general;
use crate::szego::SzegoPack;

/// Relative disagreement between the two `alpha_k` evaluations that counts as
/// a branch-tracking failure.
pub const ALPHA_AUDIT_TOL: f64 = 1e-6;
/// Guard from the cut system, as a fraction of `rho`, in the `w`-plane.
pub const CUT_GUARD_FRACTION: f64 = 0.02;

/// `c1^(n+1/2) / Delta_e(infinity)`: converts the unnormalized right-hand
/// sides into monic values.
fn monic_scale(pack: &SzegoPack, n: usize) -> f64 {
    pack.curve().c1.powf(n as f64 + 0.5) / pack.delta_e_inf
}

/// Main term of `P_n(z)` on `|phi(z)| > rho`:
/// `Delta_e(z) sqrt(phi'(z)) phi(z)^n c1^(n+1/2) / Delta_e(inf)`.
pub fn szego_exterior_formula(pack: &SzegoPack, n: usize, z: C64) -> Result<C64> {
    let curve = pack.curve();
    let w = curve.phi(z)?;
    if w.norm() <= pack.rho {
        return Err(Error::Domain(format!("|phi(z)| = {} is not above rho = {}", w.norm(), pack.rho)));
    }
    Ok(pack.delta_e_w(w)? / curve.sqrt_dpsi(w) * w.powi(n as i32) * monic_scale(pack, n))
}

/// Main term of the leading coefficient: `Delta_e(inf) c1^-(n+1/2)`.
pub fn gamma_asymptotic(pack: &SzegoPack, n: usize) -> f64 {
    pack.delta_e_inf / pack.curve().c1.powf(n as f64 + 0.5)
}

/// Monic interior representation
/// `(Delta_i(z)^-1 / 2 pi i) oint_{L_1} Delta_e Delta_i W(., z) sqrt(phi') phi^n`,
/// with node doubling until the value settles.
pub fn interior_integral_rep(pack: &SzegoPack, n: usize, z: C64) -> Result<C64> {
    let curve = pack.curve();
    let imap = pack.imap();
    if let Ok(w) = curve.phi(z) {
        if w.norm() >= 1.0 {
            return Err(Error::Domain(format!("interior representation needs z inside L_1; |phi(z)| = {}", w.norm())));
        }
    }
    let kz = imap.point(z)?;
    let once = |nodes: usize| -> Result<C64> {
        let contour = curve.level_contour(1.0, nodes)?;
        let mut acc = C64::new(0.0, 0.0);
        for (j, &w) in contour.nodes_w.iter().enumerate() {
            let kp = imap.point(contour.nodes_z[j])?;
            let wk = imap.kernel_points(&kp, &kz)?;
            acc += pack.e_product_w(w)? * wk * curve.sqrt_dpsi(w) * w.powi(n as i32 + 1);
        }
        Ok(acc / nodes as f64)
    };
    let mut nodes = 64.max((4 * n).next_power_of_two());
    let mut prev = once(nodes)?;
    for _ in 0..8 {
        nodes *= 2;
        let cur = once(nodes)?;
        if (cur - prev).norm() <= 1e-13 * cur.norm().max(1e-300) {
            return Ok(cur / pack.delta_i(z)? * monic_scale(pack, n));
        }
        prev = cur;
    }
    Err(Error::Resolution("interior representation did not settle under node doubling".into()))
}

/// One algebraic singularity with its derived constants.
#[derive(Clone, Debug, Serialize)]
pub struct SingularityInfo {
    #[serde(with = "crate::complex::pair")]
    pub a: C64,
    pub lambda: f64,
    /// `arg phi(a)` in `[0, 2 pi)`.
    pub theta: f64,
    #[serde(with = "crate::complex::pair")]
    pub rho_k: C64,
    #[serde(with = "crate::complex::pair")]
    pub alpha: C64,
    #[serde(with = "crate::complex::pair")]
    pub delta_i_a: C64,
    /// Relative gap between the closed form and the limit evaluation of `alpha`.
    pub audit: f64,
}

/// Singularities sorted by decreasing exponent; the first `u` share the largest one.
#[derive(Clone, Debug, Serialize)]
pub struct SingularityData {
    pub rho: f64,
    pub sigma: f64,
    pub u: usize,
    pub sing: Vec<SingularityInfo>,
}

impl SingularityData {
    pub fn build(pack: &SzegoPack) -> Result<Self> {
        let (sing, u) = pack
            .singularities()
            .ok_or_else(|| Error::Config("singularity constants need an algebraic weight".into()))?;
        let sigma = pack.cut_system().map(|c| c.sigma).unwrap_or(0.0);
        let mut out = Vec::with_capacity(sing.len());
        for (k, &(a, rk, lam)) in sing.iter().enumerate() {
            let closed = alpha_closed_form(pack, k, rk, lam)?;
            let limit = alpha_by_limit(pack, a, rk, lam)?;
            let audit = (closed - limit).norm() / closed.norm();
            if audit > ALPHA_AUDIT_TOL {
                return Err(Error::Branch(format!("alpha_{} closed form {closed} vs limit {limit}", k + 1)));
            }
            out.push(SingularityInfo {
                a,
                lambda: lam,
                theta: rk.arg().rem_euclid(TAU),
                rho_k: rk,
                alpha: closed,
                delta_i_a: pack.delta_i(a)?,
                audit,
            });
        }
        Ok(SingularityData { rho: pack.rho, sigma, u, sing: out })
    }

    pub fn lambda1(&self) -> f64 {
        self.sing[0].lambda
    }
}

/// `[phi'(a)]^(lambda - 1/2) omega(a) prod_{j != k} (phi(a)/(a - a_j))^lambda_j`.
fn alpha_closed_form(pack: &SzegoPack, k: usize, rk: C64, lam: f64) -> Result<C64> {
    let log_dphi = -pack.curve().log_dpsi(rk);
    Ok((log_dphi * (lam - 0.5)).exp() * pack.delta_e_reduced_at(k)?)
}

/// The defining limit, evaluated on the outward ray `w = rho_k (1 + t)` with
/// Richardson extrapolation in `t`. The power `(phi(z)/(z - a))^-lambda` is
/// continued from infinity independently of the exterior-function code.
fn alpha_by_limit(pack: &SzegoPack, a: C64, rk: C64, lam: f64) -> Result<C64> {
    let curve = pack.curve();
    let bracket = |t: f64| -> Result<C64> {
        let w = rk * (1.0 + t);
        // phi(z)/(z - a) = 1 / (s psi(1/s) - s a) in s = 1/w, equal to 1/c1 at s = 0
        let f = |s: C64| {
            if s.norm() == 0.0 {
                C64::new(1.0 / curve.c1, 0.0)
            } else {
                (s * curve.psi_unchecked(s.inv()) - s * a).inv()
            }
        };
        let log = continue_log(f, C64::new(0.0, 0.0), w.inv(), C64::new(-curve.c1.ln(), 0.0), 24);
        Ok(pack.delta_e_w(w)? * (-log * lam).exp())
    };
    let h0 = 0.05;
    let levels = 6;
    let mut table: Vec<C64> = (0..levels).map(|i| bracket(h0 / (1u32 << i) as f64)).collect::<Result<_>>()?;
    for m in 1..levels {
        let f = (1u64 << m) as f64;
        for i in (m..levels).rev() {
            table[i] = (table[i] * f - table[i - 1]) / (f - 1.0);
        }
    }
    let log_dphi = -curve.log_dpsi(rk);
    Ok((log_dphi * (lam - 0.5)).exp() * table[levels - 1])
}

/// Where a target sits relative to the cut system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Zone {
    /// `z` in `G_1 ∩ Sigma_sigma`: the exterior term is present.
    Band,
    /// `z` in `G_sigma`: no exterior term.
    Inner,
}

fn segment_distance(p: C64, a: C64, b: C64) -> f64 {
    let ab = b - a;
    let t = (((p - a) * ab.conj()).re / ab.norm_sqr()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Classifies `z` inside `L_1`, rejecting points within the guard of the cuts.
pub fn zone(pack: &SzegoPack, sdata: &SingularityData, z: C64) -> Result<Zone> {
    let guard = CUT_GUARD_FRACTION * sdata.rho;
    let w = match pack.curve().phi(z) {
        Ok(w) => w,
        Err(_) => return Ok(Zone::Inner),
    };
    if w.norm() >= 1.0 {
        return Err(Error::Domain(format!("z = {z} is not inside L_1")));
    }
    if (w.norm() - sdata.sigma).abs() < guard {
        return Err(Error::CutProximity(format!("|phi(z)| = {} within {guard} of sigma", w.norm())));
    }
    if w.norm() < sdata.sigma {
        return Ok(Zone::Inner);
    }
    for s in &sdata.sing {
        let d = if s.lambda.fract() == 0.0 {
            (w - s.rho_k).norm()
        } else {
            segment_distance(w, s.rho_k * (sdata.sigma / sdata.rho), s.rho_k)
        };
        if d < guard {
            return Err(Error::CutProximity(format!("phi(z) = {w} within {guard} of the cut at {}", s.rho_k)));
        }
    }
    Ok(Zone::Band)
}

/// Monic main terms inside `L_1` for an algebraic weight.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Thm3Value {
    #[serde(with = "crate::complex::pair")]
    pub value: C64,
    /// Exterior term (zero in the inner zone).
    #[serde(with = "crate::complex::pair")]
    pub region_term: C64,
    /// Singular-sum term.
    #[serde(with = "crate::complex::pair")]
    pub singular_term: C64,
    pub zone: Zone,
}

/// Region term plus
/// `binom(n, lambda_1 - 1) Delta_i(z)^-1 sum_{k<=u} alpha_k Delta_i(a_k) W(a_k, z) phi(a_k)^(n+1)`,
/// scaled to monic.
pub fn thm3_interior(pack: &SzegoPack, sdata: &SingularityData, n: usize, z: C64) -> Result<Thm3Value> {
    let zone = zone(pack, sdata, z)?;
    let scale = monic_scale(pack, n);
    let region_term = match zone {
        Zone::Band => {
            let curve = pack.curve();
            let w = curve.phi(z)?;
            pack.delta_e_w(w)? / curve.sqrt_dpsi(w) * w.powi(n as i32) * scale
        }
        Zone::Inner => C64::new(0.0, 0.0),
    };
    let imap = pack.imap();
    let mut sum = C64::new(0.0, 0.0);
    for s in sdata.sing.iter().take(sdata.u) {
        sum += s.alpha * s.delta_i_a * imap.kernel(s.a, z)? * s.rho_k.powi(n as i32 + 1);
    }
    let singular_term = binom_general(n as f64, sdata.lambda1() - 1.0)? * sum / pack.delta_i(z)? * scale;
    Ok(Thm3Value { value: region_term + singular_term, region_term, singular_term, zone })
}

/// `|binom(n, lambda_1 - 1)| rho^n`, monic-scaled: the size of the singular
/// contribution, used to normalize interior errors.
pub fn thm3_reference(pack: &SzegoPack, sdata: &SingularityData, n: usize) -> Result<f64> {
    Ok(binom_general(n as f64, sdata.lambda1() - 1.0)?.abs() * sdata.rho.powi(n as i32) * monic_scale(pack, n))
}

/// Monic main terms of `P_n(a_j)` (`j` counted from 1).
pub fn thm3_at_singularity(pack: &SzegoPack, sdata: &SingularityData, n: usize, j: usize) -> Result<C64> {
    let len = sdata.sing.len();
    if j == 0 || j > len {
        return Err(Error::Index { index: j, len });
    }
    let sj = &sdata.sing[j - 1];
    let dphi = (-pack.curve().log_dpsi(sj.rho_k)).exp();
    let own = binom_general(n as f64, sj.lambda)? * sj.alpha * dphi * sj.rho_k.powi(n as i32);
    let imap = pack.imap();
    let mut cross = C64::new(0.0, 0.0);
    for (k, s) in sdata.sing.iter().enumerate().take(sdata.u) {
        if k + 1 == j {
            continue;
        }
        cross += s.alpha * s.delta_i_a * imap.kernel(s.a, sj.a)? * s.rho_k.powi(n as i32 + 1);
    }
    let cross = binom_general(n as f64, sdata.lambda1() - 1.0)? * cross / sj.delta_i_a;
    Ok((own + cross) * monic_scale(pack, n))
}

/// Evaluation mode for the singular contour integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PropositionMode {
    Quadrature,
    Asymptotic,
}

/// `(1/2 pi i) oint_{|t - rho| = delta} (t - rho)^-beta t^n v(t) dt` with the
/// cut of the power along `(-inf, rho]`, or its leading term
/// `binom(n, beta - 1) v(rho) rho^(n - beta + 1)`.
///
/// The quadrature runs Gauss–Legendre in the angle over `(-pi, pi)`, whose
/// endpoints sit on the cut, so the jump of the integrand never enters a
/// periodic rule. The circle is first contracted to radius `rho / (n + 1)`
/// and the part of the annulus along the cut added back as a real integral;
/// on the full circle `t^n` would vary by a factor `((rho + delta) /
/// (rho - delta))^n` and the sum would lose most of its digits.
pub fn proposition_integral<V: Fn(C64) -> C64>(
    v: V,
    beta: f64,
    rho: f64,
    delta: f64,
    n: usize,
    mode: PropositionMode,
) -> Result<C64> {
    if beta <= 0.0 && beta.fract() == 0.0 {
        return Err(Error::Domain(format!("beta = {beta} is a nonpositive integer")));
    }
    if !(delta > 0.0 && rho > 0.0) {
        return Err(Error::Domain("rho and delta must be positive".into()));
    }
    match mode {
        PropositionMode::Asymptotic => {
            Ok(v(C64::new(rho, 0.0)) * binom_general(n as f64, beta - 1.0)? * rho.powf(n as f64 - beta + 1.0))
        }
        PropositionMode::Quadrature => {
            // Shrinking the circle to radius delta_s keeps |t^n| within a
            // factor e around it, so the circle quadrature has no cancellation.
            // For nonintegral beta the annulus between the two circles
            // contributes the jump across the cut:
            //   I(delta) = I(delta_s) + (sin(pi beta) / pi) J,
            //   J = int_{delta_s}^{delta} s^-beta (rho - s)^n v(rho - s) ds,
            // which is computed with s = delta_s (delta / delta_s)^u.
            let delta_s = delta.min(rho / (n as f64 + 1.0));
            let cut_factor = if beta.fract() == 0.0 { 0.0 } else { (PI * beta).sin() / PI };
            let eval = |deg: usize| -> Result<(C64, f64)> {
                let rule = GaussLegendre::new(deg).map_err(|e| Error::Domain(format!("Gauss-Legendre rule: {e}")))?;
                let mut circle = C64::new(0.0, 0.0);
                let mut circle_mass = 0.0;
                for (x, wt) in rule.iter() {
                    let th = PI * x;
                    let t = C64::new(rho, 0.0) + C64::from_polar(delta_s, th);
                    let term = C64::from_polar(1.0, (1.0 - beta) * th) * t.powi(n as i32) * v(t) * *wt;
                    circle += term;
                    circle_mass += term.norm();
                }
                // dtheta = pi dx, and the prefactor is delta_s^(1-beta) / 2 pi
                let scale = 0.5 * delta_s.powf(1.0 - beta);
                let mut total = circle * scale;
                let mut mass = circle_mass * scale;
                if cut_factor != 0.0 && delta > delta_s {
                    let span = (delta / delta_s).ln();
                    let mut cut = C64::new(0.0, 0.0);
                    let mut cut_mass = 0.0;
                    for (x, wt) in rule.iter() {
                        // u = (x + 1) / 2 on [0, 1], ds = s span du
                        let sv = delta_s * (0.5 * (x + 1.0) * span).exp();
                        let term = v(C64::new(rho - sv, 0.0)) * ((rho - sv).powi(n as i32) * sv.powf(1.0 - beta) * span * 0.5 * *wt);
                        cut += term;
                        cut_mass += term.norm();
                    }
                    total += cut * cut_factor;
                    mass += cut_mass * cut_factor.abs();
                }
                Ok((total, mass))
            };
            let mut deg = 64;
            let (mut prev, _) = eval(deg)?;
            for _ in 0..6 {
                deg *= 2;
                let (cur, mass) = eval(deg)?;
                if (cur - prev).norm() <= 1e-14 * mass.max(f64::MIN_POSITIVE) {
                    return Ok(cur);
                }
                prev = cur;
            }
            Err(Error::Resolution("singular contour integral did not settle".into()))
        }
    }
}
