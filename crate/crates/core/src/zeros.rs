//! Zeros of the monic orthogonal polynomials and the checks on their
//! location and distribution: zero-free exterior compacts, the interior
//! count bound `u - 1`, angular equidistribution against the equilibrium
//! measure of `L_rho`, and the limit-angle probe for interior attractors.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::complex::{c, C64};
use crate::curve::CurveSpec;
use crate::error::{Error, Result};
use crate::asymptotics::SingularityData;
use crate::oracle::PolyCoeffs;
use crate::szego::SzegoPack;

/// Roots of the monic polynomial `sum_k coeffs[k] z^k` (`coeffs.last() == 1`).
///
/// Eigenvalues of the balanced companion matrix, each polished by one
/// Newton step on the polynomial.
pub fn poly_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let n = coeffs.len().saturating_sub(1);
    if n == 0 {
        return Ok(vec![]);
    }
    let lead = coeffs[n];
    if lead.norm() == 0.0 {
        return Err(Error::Domain("leading coefficient is zero".into()));
    }
    let a: Vec<C64> = coeffs.iter().map(|x| x / lead).collect();
    if n == 1 {
        return Ok(vec![-a[0]]);
    }
    let mut m = DMatrix::<C64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for i in 0..n {
        m[(i, n - 1)] = -a[i];
    }
    balance(&mut m);
    let schur = nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    let mut roots: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    for z in roots.iter_mut() {
        let (p, dp) = horner_with_derivative(&a, *z);
        if dp.norm() > 0.0 {
            let step = p / dp;
            let cand = *z - step;
            if horner_with_derivative(&a, cand).0.norm() <= p.norm() {
                *z = cand;
            }
        }
    }
    Ok(roots)
}

/// Parlett–Reinsch diagonal balancing with power-of-two scalings.
fn balance(m: &mut DMatrix<C64>) {
    let n = m.nrows();
    let radix = 2.0f64;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut col = 0.0;
            let mut row = 0.0;
            for j in 0..n {
                if j != i {
                    col += m[(j, i)].l1_norm();
                    row += m[(i, j)].l1_norm();
                }
            }
            if col == 0.0 || row == 0.0 {
                continue;
            }
            let s = col + row;
            let mut f = 1.0;
            let mut cc = col;
            let mut rr = row;
            while cc < rr / radix {
                cc *= radix;
                rr /= radix;
                f *= radix;
            }
            while cc >= rr * radix {
                cc /= radix;
                rr *= radix;
                f /= radix;
            }
            if (cc + rr) < 0.95 * s {
                done = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

pub(crate) fn horner_with_derivative(coeffs: &[C64], z: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for a in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + a;
    }
    (p, dp)
}

/// Zeros of one `P_n` together with their images under `phi`.
#[derive(Clone, Debug, Serialize)]
pub struct ZeroSet {
    pub n: usize,
    pub zeros: Vec<C64>,
    /// `phi(z)` for zeros in the domain of `phi`, `None` otherwise.
    pub phi_images: Vec<Option<C64>>,
    pub moduli_stats: ModuliStats,
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct ModuliStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Zeros outside the domain of `phi` (deep inside the curve).
    pub unmapped: usize,
}

pub fn roots(poly: &PolyCoeffs, curve: &CurveSpec) -> Result<ZeroSet> {
    if poly.n == 0 {
        return Err(Error::Domain("degree must be at least 1".into()));
    }
    Ok(zero_set(poly.n, poly_roots(&poly.coeffs)?, curve))
}

/// Packages zeros obtained elsewhere (e.g. from a Hessenberg eigenproblem).
pub fn zero_set(n: usize, zeros: Vec<C64>, curve: &CurveSpec) -> ZeroSet {
    let phi_images: Vec<Option<C64>> = zeros.iter().map(|&z| curve.phi(z).ok()).collect();
    let mapped: Vec<f64> = phi_images.iter().flatten().map(|w| w.norm()).collect();
    let moduli_stats = if mapped.is_empty() {
        ModuliStats { unmapped: zeros.len(), ..Default::default() }
    } else {
        ModuliStats {
            min: mapped.iter().cloned().fold(f64::INFINITY, f64::min),
            max: mapped.iter().cloned().fold(0.0, f64::max),
            mean: mapped.iter().sum::<f64>() / mapped.len() as f64,
            unmapped: zeros.len() - mapped.len(),
        }
    };
    ZeroSet { n, zeros, phi_images, moduli_stats }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EquilibriumStat {
    /// Kolmogorov–Smirnov distance of the angles of `phi(zeros)` to uniform.
    pub ks: f64,
    pub used: usize,
    pub dropped: usize,
}

/// Compares the angular distribution of `phi(zeros)` with the uniform law,
/// which is the `phi`-pushforward of the equilibrium measure of `L_rho`.
pub fn equilibrium_compare(zset: &ZeroSet) -> EquilibriumStat {
    let mut angles: Vec<f64> = zset
        .phi_images
        .iter()
        .flatten()
        .map(|w| w.arg().rem_euclid(TAU) / TAU)
        .collect();
    let dropped = zset.zeros.len() - angles.len();
    EquilibriumStat { ks: ks_uniform(&mut angles), used: angles.len(), dropped }
}

/// KS distance of samples in `[0, 1)` to the uniform distribution.
pub fn ks_uniform(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return 1.0;
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Buffer in `|phi|` applied to region counts.
pub const REGION_BUFFER: f64 = 1e-3;

#[derive(Clone, Copy, Debug, Serialize)]
pub enum Region {
    /// `{ z : |phi(z)| >= c }`
    Exterior(f64),
    /// `{ z : z in G_c }`, i.e. `|phi(z)| <= c` or deeper than `phi` reaches.
    Interior(f64),
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RegionReport {
    pub region: Region,
    pub count: usize,
    pub allowed: usize,
    pub pass: bool,
}

/// Counts zeros in an exterior compact (allowed: none) or an interior
/// compact (allowed: `u - 1`).
pub fn zero_free_region_check(zset: &ZeroSet, region: Region, u: usize) -> RegionReport {
    let count = zset
        .phi_images
        .iter()
        .filter(|w| match (region, w) {
            (Region::Exterior(cc), Some(w)) => w.norm() >= cc - REGION_BUFFER,
            (Region::Exterior(_), None) => false,
            (Region::Interior(cc), Some(w)) => w.norm() <= cc + REGION_BUFFER,
            (Region::Interior(_), None) => true,
        })
        .count();
    let allowed = match region {
        Region::Exterior(_) => 0,
        Region::Interior(_) => u.saturating_sub(1),
    };
    RegionReport { region, count, allowed, pass: count <= allowed }
}

/// Largest deviation of the discrete logarithmic potential of the zeros from
/// `log|phi'(inf)/phi(z)|` at the exterior probes.
pub fn potential_mismatch(zset: &ZeroSet, curve: &CurveSpec, probes: &[C64]) -> Result<f64> {
    let n = zset.zeros.len() as f64;
    let mut worst: f64 = 0.0;
    for &z in probes {
        let discrete: f64 = zset.zeros.iter().map(|zk| -(z - zk).norm().ln()).sum::<f64>() / n;
        let w = curve.phi(z)?;
        let target = (curve.dphi_inf() / w.norm()).ln();
        worst = worst.max((discrete - target).abs());
    }
    Ok(worst)
}

/// CSV rows `n,k,re,im,abs_phi,angle_phi`.
pub fn zeros_csv(sets: &[ZeroSet]) -> String {
    let mut out = String::from("n,k,re,im,abs_phi,angle_phi\n");
    for s in sets {
        for (k, (z, w)) in s.zeros.iter().zip(&s.phi_images).enumerate() {
            let (a, t) = w.map(|w| (w.norm(), w.arg())).unwrap_or((f64::NAN, f64::NAN));
            let _ = writeln!(out, "{},{},{:.17e},{:.17e},{:.17e},{:.17e}", s.n, k, z.re, z.im, a, t);
        }
    }
    out
}

/// Scatter plot of the zeros over the outlines of `L_1` and `L_rho`.
pub fn zeros_svg(zset: &ZeroSet, curve: &CurveSpec, rho: Option<f64>) -> String {
    let mut outlines = vec![(1.0, "#1f77b4")];
    if let Some(r) = rho {
        if r > curve.rho_hat() {
            outlines.push((r, "#d62728"));
        }
    }
    let mut pts: Vec<C64> = zset.zeros.clone();
    let curves: Vec<(Vec<C64>, &str)> = outlines
        .iter()
        .map(|&(r, col)| ((0..=256).map(|j| curve.psi_unchecked(C64::from_polar(r, TAU * j as f64 / 256.0))).collect(), col))
        .collect();
    for (cv, _) in &curves {
        pts.extend(cv.iter().cloned());
    }
    let ext = pts.iter().map(|z| z.re.abs().max(z.im.abs())).fold(1e-3, f64::max) * 1.1;
    let size = 600.0;
    let map = |z: C64| c((z.re + ext) / (2.0 * ext) * size, (ext - z.im) / (2.0 * ext) * size);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#);
    let _ = writeln!(s, r#"<rect width="{size}" height="{size}" fill="white"/>"#);
    for (cv, col) in &curves {
        let path: Vec<String> = cv.iter().map(|&z| { let p = map(z); format!("{:.3},{:.3}", p.re, p.im) }).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{col}" stroke-width="1" points="{}"/>"#, path.join(" "));
    }
    for &z in &zset.zeros {
        let p = map(z);
        let _ = writeln!(s, r#"<circle cx="{:.3}" cy="{:.3}" r="2.5" fill="black"/>"#, p.re, p.im);
    }
    let _ = writeln!(s, r#"<text x="8" y="18" font-family="sans-serif" font-size="14">n = {}</text>"#, zset.n);
    s.push_str("</svg>\n");
    s
}

/// One accumulation class of the phase tuples `e^{i(n+1) Theta_k}`, `k <= u`.
#[derive(Clone, Debug, Serialize)]
pub struct AngleCluster {
    /// Representative tuple, as angles in `[0, 2 pi)`.
    pub angles: Vec<f64>,
    /// Degrees whose tuple falls in this class.
    pub degrees: Vec<usize>,
    /// Approximate solutions `t` in `G_rho` of
    /// `sum_k alpha_k Delta_i(a_k) W(a_k, t) e^{i theta_k} = 0`.
    #[serde(with = "crate::complex::pairs")]
    pub attractors: Vec<C64>,
}

/// Tuples closer than this (max over components of `|e^{ia} - e^{ib}|`) share a class.
pub const ANGLE_CLUSTER_TOL: f64 = 0.1;

/// Exploratory probe of interior zero attractors for an algebraic weight.
///
/// Groups the phase tuples along `degrees`, then for each class scans a grid
/// over `G_rho` for near-zeros of the limiting singular sum and polishes them
/// with Newton steps. Grid points where the kernel is unavailable are skipped.
pub fn limit_angle_probe(pack: &SzegoPack, sdata: &SingularityData, degrees: &[usize], grid: usize) -> Vec<AngleCluster> {
    let lead = &sdata.sing[..sdata.u];
    let mut clusters: Vec<(Vec<C64>, AngleCluster)> = Vec::new();
    for &n in degrees {
        let phases: Vec<C64> = lead.iter().map(|s| C64::from_polar(1.0, (n as f64 + 1.0) * s.theta)).collect();
        let hit = clusters.iter_mut().find(|(rep, _)| {
            rep.iter().zip(&phases).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) < ANGLE_CLUSTER_TOL
        });
        match hit {
            Some((_, cl)) => cl.degrees.push(n),
            None => {
                let angles = phases.iter().map(|p| p.arg().rem_euclid(TAU)).collect();
                clusters.push((phases, AngleCluster { angles, degrees: vec![n], attractors: Vec::new() }));
            }
        }
    }
    let points = interior_grid(pack, sdata.rho, grid);
    for (phases, cl) in clusters.iter_mut() {
        let weights: Vec<C64> = lead.iter().zip(phases.iter()).map(|(s, p)| s.alpha * s.delta_i_a * p).collect();
        let f = |t: C64| -> Option<C64> {
            let mut acc = C64::new(0.0, 0.0);
            for (s, w) in lead.iter().zip(&weights) {
                acc += w * pack.imap().kernel(s.a, t).ok()?;
            }
            Some(acc)
        };
        cl.attractors = attractors(&f, &points, pack, sdata.rho);
    }
    clusters.into_iter().map(|(_, cl)| cl).collect()
}

/// Points of a square grid over the bounding box of `L_rho` lying in `G_rho`.
fn interior_grid(pack: &SzegoPack, rho: f64, grid: usize) -> Vec<C64> {
    let curve = pack.curve();
    let Ok(contour) = curve.level_contour(rho, 256) else {
        return Vec::new();
    };
    let (mut lo, mut hi) = (contour.nodes_z[0], contour.nodes_z[0]);
    for z in &contour.nodes_z {
        lo = c(lo.re.min(z.re), lo.im.min(z.im));
        hi = c(hi.re.max(z.re), hi.im.max(z.im));
    }
    let m = grid.max(2);
    let mut pts = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let z = c(
                lo.re + (hi.re - lo.re) * (i as f64 + 0.5) / m as f64,
                lo.im + (hi.im - lo.im) * (j as f64 + 0.5) / m as f64,
            );
            if in_g(pack, rho, z) {
                pts.push(z);
            }
        }
    }
    pts
}

fn in_g(pack: &SzegoPack, rho: f64, z: C64) -> bool {
    match pack.curve().phi(z) {
        Ok(w) => w.norm() < rho,
        Err(_) => pack.imap().point(z).is_ok(),
    }
}

/// Local minima of `|f|` on the grid, relatively small, polished by Newton
/// with a difference quotient; duplicates are merged.
fn attractors<F: Fn(C64) -> Option<C64>>(f: &F, points: &[C64], pack: &SzegoPack, rho: f64) -> Vec<C64> {
    let vals: Vec<Option<f64>> = points.iter().map(|&t| f(t).map(|v| v.norm())).collect();
    let scale = vals.iter().flatten().cloned().fold(0.0, f64::max);
    if scale == 0.0 {
        return Vec::new();
    }
    let spacing = points
        .windows(2)
        .map(|p| (p[1] - p[0]).norm())
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let mut found: Vec<C64> = Vec::new();
    for (i, &t) in points.iter().enumerate() {
        let Some(v) = vals[i] else { continue };
        if v > 0.05 * scale {
            continue;
        }
        let local_min = points.iter().zip(&vals).all(|(p, pv)| {
            (p - t).norm() > 1.5 * spacing || pv.is_none_or(|pv| pv >= v)
        });
        if !local_min {
            continue;
        }
        let mut x = t;
        let mut ok = false;
        for _ in 0..40 {
            let (Some(fx), Some(fh)) = (f(x), f(x + 1e-7)) else { break };
            let step = fx * 1e-7 / (fh - fx);
            x -= step;
            if !step.is_finite() {
                break;
            }
            if step.norm() < 1e-12 {
                ok = true;
                break;
            }
        }
        if ok && in_g(pack, rho, x) && !found.iter().any(|y| (y - x).norm() < 1e-6) {
            found.push(x);
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monic(coeffs: Vec<C64>) -> PolyCoeffs {
        PolyCoeffs::monic(coeffs, 1.0)
    }

    #[test]
    fn roots_of_z5() {
        let mut co = vec![C64::new(0.0, 0.0); 6];
        co[5] = C64::new(1.0, 0.0);
        let r = poly_roots(&co).unwrap();
        assert_eq!(r.len(), 5);
        // a 5-fold root is only resolved to eps^(1/5)
        assert!(r.iter().all(|z| z.norm() < 1e-2));
    }

    #[test]
    fn root_of_linear() {
        let p = monic(vec![c(0.4, 0.0), c(1.0, 0.0)]);
        let zs = roots(&p, &CurveSpec::unit_circle()).unwrap();
        assert!((zs.zeros[0] - c(-0.4, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn companion_accuracy_on_random_roots() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let truth: Vec<C64> = (0..25).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let mut co = vec![c(1.0, 0.0)];
        for r in &truth {
            let mut next = vec![C64::new(0.0, 0.0); co.len() + 1];
            for (k, a) in co.iter().enumerate() {
                next[k + 1] += a;
                next[k] -= a * r;
            }
            co = next;
        }
        let found = poly_roots(&co).unwrap();
        let norm: f64 = co.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for z in &found {
            assert!(horner_with_derivative(&co, *z).0.norm() <= 1e-8 * norm);
        }
    }

    #[test]
    fn ks_examples() {
        let n = 40;
        let curve = CurveSpec::unit_circle();
        let zeros: Vec<C64> = (0..n).map(|k| C64::from_polar(0.5, TAU * (k as f64 + 0.5) / n as f64)).collect();
        let zs = ZeroSet { n, phi_images: zeros.iter().map(|&z| curve.phi(z).ok()).collect(), zeros, moduli_stats: Default::default() };
        assert!(equilibrium_compare(&zs).ks <= 1.0 / n as f64 + 1e-12);
        let zeros = vec![c(0.5, 0.0); n];
        let zs = ZeroSet { n, phi_images: zeros.iter().map(|&z| curve.phi(z).ok()).collect(), zeros, moduli_stats: Default::default() };
        assert!(equilibrium_compare(&zs).ks > 0.95);
    }

    #[test]
    fn region_check_for_zn() {
        let mut co = vec![C64::new(0.0, 0.0); 9];
        co[8] = c(1.0, 0.0);
        let curve = CurveSpec::unit_circle();
        let zs = roots(&monic(co), &curve).unwrap();
        let rep = zero_free_region_check(&zs, Region::Exterior(0.5), 1);
        assert!(rep.pass && rep.count == 0);
        let rep = zero_free_region_check(&zs, Region::Interior(0.2), 1);
        assert!(!rep.pass);
    }

    #[test]
    fn svg_is_wellformed() {
        let p = monic(vec![c(-0.25, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let curve = CurveSpec::unit_circle();
        let zs = roots(&p, &curve).unwrap();
        let s = zeros_svg(&zs, &curve, Some(0.5));
        assert!(s.starts_with("<?xml") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<circle").count(), 2);
    }

    fn circle_singular(sing: Vec<(C64, f64)>) -> (SzegoPack, SingularityData) {
        use crate::interior::{InteriorFitOptions, InteriorMap};
        use crate::szego::WeightSpec;
        let curve = CurveSpec::unit_circle();
        let imap = InteriorMap::fit(&curve, c(0.0, 0.0), InteriorFitOptions::default()).unwrap();
        let pack = SzegoPack::build(&curve, &imap, &WeightSpec::singular(sing)).unwrap();
        let sdata = SingularityData::build(&pack).unwrap();
        (pack, sdata)
    }

    #[test]
    fn probe_single_singularity_has_one_class_and_no_attractor() {
        let (pack, sdata) = circle_singular(vec![(c(0.5, 0.0), 0.5)]);
        let cl = limit_angle_probe(&pack, &sdata, &(30..=40).collect::<Vec<_>>(), 40);
        assert_eq!(cl.len(), 1);
        assert_eq!(cl[0].degrees.len(), 11);
        assert!(cl[0].attractors.is_empty());
    }

    #[test]
    fn probe_two_symmetric_singularities() {
        let (pack, sdata) = circle_singular(vec![(c(0.5, 0.0), 0.5), (c(-0.5, 0.0), 0.5)]);
        let cl = limit_angle_probe(&pack, &sdata, &(30..=41).collect::<Vec<_>>(), 40);
        assert_eq!(cl.len(), 2);
        let with: Vec<_> = cl.iter().filter(|k| !k.attractors.is_empty()).collect();
        assert_eq!(with.len(), 1);
        assert_eq!(with[0].attractors.len(), 1);
        assert!(with[0].attractors[0].norm() < 1e-8, "{:?}", with[0].attractors);
    }
}
