//! Recursive integral-transform expansions of the monic orthogonal
//! polynomials.
//!
//! The odd transforms integrate over `L_r` against the interior kernel `W`;
//! the even transforms integrate over `L_{1/r}` against a Cauchy kernel in the
//! exterior coordinate. Every contour is pulled back to a circle `|w| = t`
//! and discretized with the trapezoid rule, so one step is a dense
//! matrix-vector product between node sets. Because each step is linear, only
//! the running sums of the odd terms (on `L_{1/r}`) and of the even terms (on
//! `L_r`) are needed to evaluate the series anywhere else.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complex::C64;
use crate::curve::Contour;
use crate::error::{Error, Result};
use crate::interior::KernelPoint;
use crate::szego::SzegoPack;

/// Largest node count reached by node doubling.
pub const MAX_NODES: usize = 1 << 14;
const GAMMA_STABLE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpansionConfig {
    /// Radius of the inner contour; `(1 + rho)/2` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    pub tol: f64,
    pub k_max: usize,
    /// Initial node count on each contour (a power of two).
    #[serde(rename = "N")]
    pub nodes: usize,
    /// Double the node count until `gamma_n` is stable.
    pub adapt: bool,
    /// Refuse degrees below the contraction threshold. When off, the series
    /// are summed anyway and truncated once the computed terms fall below
    /// `tol`.
    pub strict: bool,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig { r: None, tol: 1e-14, k_max: 200, nodes: 128, adapt: true, strict: true }
    }
}

impl ExpansionConfig {
    pub fn radius(&self, pack: &SzegoPack) -> Result<f64> {
        let r = self.r.unwrap_or(0.5 * (1.0 + pack.rho));
        if !(r > pack.rho && r < 1.0) {
            return Err(Error::Config(format!("r = {r} violates rho < r < 1 (rho = {})", pack.rho)));
        }
        if !(self.tol > 0.0) || self.k_max == 0 {
            return Err(Error::Config("expansion needs tol > 0 and k_max >= 1".into()));
        }
        if !self.nodes.is_power_of_two() || self.nodes < 4 {
            return Err(Error::Config(format!("N = {} must be a power of two >= 4", self.nodes)));
        }
        Ok(r)
    }
}

/// Which of the two transform sequences is summed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sequence {
    /// `f`-sequence; `gamma_n` from the odd terms integrated over `L_{1/r}`.
    F,
    /// `g`-sequence; `gamma_n` from the even terms at infinity.
    G,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bounds {
    /// `max_{L_r} |Delta_e Delta_i / sqrt(phi')|`.
    pub lambda: f64,
    /// `max_{L_{1/r}} |sqrt(phi') Delta_e Delta_i|^-1`.
    pub lambda_prime: f64,
    /// `max_{L_r x L_{1/r}} |W|`.
    pub m: f64,
}

impl Bounds {
    /// Contraction factor `Lambda Lambda' M r^(2n) / (1/r - r)`.
    pub fn contraction(&self, r: f64, n: usize) -> f64 {
        self.lambda * self.lambda_prime * self.m * r.powi(2 * n as i32) / (1.0 / r - r)
    }

    /// Whether the series converge at degree `n`, with the factor.
    pub fn check_contraction(&self, r: f64, n: usize) -> (bool, f64) {
        let q = self.contraction(r, n);
        (q < 1.0, q)
    }

    /// Smallest degree at which the contraction factor drops below 1.
    pub fn n_min(&self, r: f64) -> usize {
        let q0 = self.contraction(r, 0);
        if q0 < 1.0 {
            0
        } else {
            (q0.ln() / (-2.0 * r.ln())).floor() as usize + 1
        }
    }
}

/// Samples on one contour `|w| = t` that the transforms need.
#[derive(Clone, Debug)]
struct Side {
    w: Vec<C64>,
    kp: Vec<KernelPoint>,
    /// `Delta_e Delta_i`
    e: Vec<C64>,
    sqrt_dpsi: Vec<C64>,
}

impl Side {
    fn new(pack: &SzegoPack, t: f64, nodes: usize) -> Result<Self> {
        let curve = pack.curve();
        let contour = curve.level_contour(t, nodes)?;
        let mut out = Side { w: contour.nodes_w.clone(), kp: vec![], e: vec![], sqrt_dpsi: vec![] };
        let rows: Vec<Result<(KernelPoint, C64, C64)>> = contour
            .nodes_w
            .par_iter()
            .zip(&contour.nodes_z)
            .map(|(&w, &z)| Ok((pack.imap().point(z)?, pack.e_product_w(w)?, curve.sqrt_dpsi(w))))
            .collect();
        for row in rows {
            let (kp, e, s) = row?;
            out.kp.push(kp);
            out.e.push(e);
            out.sqrt_dpsi.push(s);
        }
        Ok(out)
    }
}

/// Node data on `L_r` and `L_{1/r}`, independent of the degree.
#[derive(Clone, Debug)]
pub struct Engine<'a> {
    pack: &'a SzegoPack,
    pub r: f64,
    pub nodes: usize,
    inner: Side,
    outer: Side,
}

impl<'a> Engine<'a> {
    pub fn new(pack: &'a SzegoPack, r: f64, nodes: usize) -> Result<Self> {
        if !(r > pack.rho && r < 1.0) {
            return Err(Error::Config(format!("r = {r} must lie in (rho, 1)")));
        }
        Ok(Engine { pack, r, nodes, inner: Side::new(pack, r, nodes)?, outer: Side::new(pack, 1.0 / r, nodes)? })
    }

    pub fn pack(&self) -> &SzegoPack {
        self.pack
    }

    /// Sampled maxima on grids `density` times finer than the quadrature grid.
    pub fn bounds(&self, density: usize) -> Result<Bounds> {
        compute_bounds(self.pack, self.r, self.nodes * density)
    }

    /// `a_j` with `f^(odd)(z) = sqrt(varphi'(z)) sum_j a_j F_j / (varphi(zeta_j) - varphi(z))`.
    fn odd_weights(&self, n: usize) -> Vec<C64> {
        let inv = 1.0 / self.nodes as f64;
        (0..self.nodes)
            .map(|j| {
                let s = &self.inner;
                -s.e[j] * s.sqrt_dpsi[j] * s.w[j].powi(n as i32 + 1) * s.kp[j].sqrt_dphi * inv
            })
            .collect()
    }

    /// `b_j` with `f^(even)(z) = sum_j b_j F_j / (v_j - phi(z))`.
    fn even_weights(&self, n: usize) -> Vec<C64> {
        let inv = 1.0 / self.nodes as f64;
        (0..self.nodes)
            .map(|j| {
                let s = &self.outer;
                s.sqrt_dpsi[j] * s.w[j].powi(1 - n as i32) / s.e[j] * inv
            })
            .collect()
    }

    fn odd_at(&self, a: &[C64], f: &[C64], z: &KernelPoint) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..self.nodes {
            acc += a[j] * f[j] / (self.inner.kp[j].phi - z.phi);
        }
        acc * z.sqrt_dphi
    }

    fn even_at(&self, b: &[C64], f: &[C64], w: C64, seq: Sequence) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        match seq {
            Sequence::F => {
                for j in 0..self.nodes {
                    acc += b[j] * f[j] / (self.outer.w[j] - w);
                }
            }
            Sequence::G => {
                for j in 0..self.nodes {
                    acc += b[j] * f[j] / (self.outer.w[j] * (self.outer.w[j] - w));
                }
                acc *= w;
            }
        }
        acc
    }

    /// Even term at infinity (`0` for the `f`-sequence).
    fn even_at_infinity(&self, b: &[C64], f: &[C64], seq: Sequence) -> C64 {
        match seq {
            Sequence::F => C64::new(0.0, 0.0),
            Sequence::G => -(0..self.nodes).map(|j| b[j] * f[j] / self.outer.w[j]).sum::<C64>(),
        }
    }

    /// `(1/2 pi i) oint_{L_{1/r}} f sqrt(phi') phi^(-n-1) / (Delta_e Delta_i) dzeta`.
    fn gamma_functional(&self, b: &[C64], f: &[C64]) -> C64 {
        (0..self.nodes).map(|j| b[j] * f[j] / self.outer.w[j]).sum()
    }

    /// Sums the series at degree `n` for a fixed node count.
    pub fn expand(&self, n: usize, seq: Sequence, cfg: &ExpansionConfig, bounds: &Bounds) -> Result<Expansion<'_>> {
        let (tol, k_max) = (cfg.tol, cfg.k_max);
        let (ok, q) = bounds.check_contraction(self.r, n);
        if !ok && cfg.strict {
            return Err(Error::Contraction { n, q, n_min: bounds.n_min(self.r) });
        }
        let q = match seq {
            Sequence::F => q,
            Sequence::G => q * self.r * self.r,
        };
        let a = self.odd_weights(n);
        let b = self.even_weights(n);
        let nn = self.nodes;
        let rn = self.r.powi(n as i32);
        let odd_bound0 = bounds.lambda * rn * self.r * bounds.m;
        let mut even_term = vec![C64::new(1.0, 0.0); nn];
        let mut sum_even = even_term.clone();
        let mut sum_odd = vec![C64::new(0.0, 0.0); nn];
        let mut gamma_terms = Vec::new();
        let mut records = Vec::new();
        let mut bound_residual = f64::INFINITY;
        let mut terms_used = 0;
        for k in 0..k_max {
            let odd_term: Vec<C64> =
                self.outer.kp.par_iter().map(|z| self.odd_at(&a, &even_term, z)).collect();
            let next_even: Vec<C64> =
                self.inner.w.par_iter().map(|&w| self.even_at(&b, &odd_term, w, seq)).collect();
            gamma_terms.push(match seq {
                Sequence::F => self.gamma_functional(&b, &odd_term),
                Sequence::G => self.even_at_infinity(&b, &odd_term, seq),
            });
            for j in 0..nn {
                sum_odd[j] += odd_term[j];
                sum_even[j] += next_even[j];
            }
            records.push(TermRecord {
                k,
                odd_max: odd_term.iter().map(|x| x.norm()).fold(0.0, f64::max),
                even_max: next_even.iter().map(|x| x.norm()).fold(0.0, f64::max),
                odd_bound: odd_bound0 * q.powi(k as i32),
                even_bound: even_bound(bounds, self.r, n, seq) * q.powi(k as i32),
            });
            even_term = next_even;
            terms_used = k + 1;
            if ok {
                let next_odd = odd_bound0 * q.powi(k as i32 + 1);
                let next_even = even_bound(bounds, self.r, n, seq) * q.powi(k as i32 + 1);
                bound_residual = next_odd.max(next_even) / (1.0 - q);
                if next_odd.max(next_even) < tol {
                    break;
                }
            } else {
                let last = records[k].odd_max.max(records[k].even_max);
                bound_residual = last;
                if last < tol {
                    break;
                }
                if !last.is_finite() || k + 1 == k_max {
                    return Err(Error::NoConvergence { what: "transform series below the contraction threshold", residual: last });
                }
            }
        }
        let correction: C64 = gamma_terms.iter().sum();
        let pack = self.pack;
        let c1 = pack.curve().c1;
        let dinf = pack.delta_e_inf;
        let base = 1.0 + correction;
        if base.re <= 0.0 {
            return Err(Error::Domain(format!("gamma correction 1 + {correction} is not positive")));
        }
        let log_gamma = match seq {
            Sequence::F => dinf.ln() - (n as f64 + 0.5) * c1.ln() - 0.5 * base.re.ln(),
            Sequence::G => dinf.ln() - (n as f64 + 0.5) * c1.ln() + 0.5 * base.re.ln(),
        };
        Ok(Expansion {
            engine: self,
            n,
            seq,
            q,
            sum_even,
            sum_odd,
            a,
            b,
            gamma: log_gamma.exp(),
            gamma_terms,
            records,
            terms_used,
            bound_residual,
            cauchy_inner: OnceLock::new(),
            cauchy_outer: OnceLock::new(),
        })
    }
}

fn even_bound(bounds: &Bounds, r: f64, n: usize, seq: Sequence) -> f64 {
    let base = bounds.lambda * bounds.lambda_prime * bounds.m / (1.0 / r - r);
    match seq {
        Sequence::F => base * r.powi(2 * n as i32),
        // at the L_r nodes, |phi(z)| = r
        Sequence::G => base * r.powi(2 * n as i32 + 2),
    }
}

/// Maxima of the three bound quantities on `L_r`, `L_{1/r}` sampled with `nodes` points.
pub fn compute_bounds(pack: &SzegoPack, r: f64, nodes: usize) -> Result<Bounds> {
    let nodes = nodes.next_power_of_two();
    let inner = Side::new(pack, r, nodes)?;
    let outer = Side::new(pack, 1.0 / r, nodes)?;
    let lambda = (0..nodes).map(|j| (inner.e[j] * inner.sqrt_dpsi[j]).norm()).fold(0.0, f64::max);
    let lambda_prime = (0..nodes).map(|j| (outer.sqrt_dpsi[j] / outer.e[j]).norm()).fold(0.0, f64::max);
    let m = outer
        .kp
        .par_iter()
        .map(|z| inner.kp.iter().map(|zeta| (z.sqrt_dphi * zeta.sqrt_dphi / (zeta.phi - z.phi)).norm()).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max);
    Ok(Bounds { lambda, lambda_prime, m })
}

/// Size of one computed term next to its a-priori majorant.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TermRecord {
    pub k: usize,
    /// `max |f^(2k+1)|` over the `L_{1/r}` nodes.
    pub odd_max: f64,
    /// `max |f^(2k+2)|` over the `L_r` nodes.
    pub even_max: f64,
    pub odd_bound: f64,
    pub even_bound: f64,
}

/// Region of the plane that decides which closed form evaluates a target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `|phi(z)| > 1/r`: even series only.
    Exterior,
    /// `r < |phi(z)| < 1/r`: both series.
    Annulus,
    /// Inside `L_r`: odd series only.
    Interior,
    /// Within the quadrature guard of `L_r` or `L_{1/r}`: Cauchy integral of
    /// the polynomial over a farther level curve.
    Cauchy,
}

/// Summed expansion at one degree.
#[derive(Debug)]
pub struct Expansion<'a> {
    engine: &'a Engine<'a>,
    pub n: usize,
    pub seq: Sequence,
    /// Contraction factor of the summed sequence.
    pub q: f64,
    sum_even: Vec<C64>,
    sum_odd: Vec<C64>,
    a: Vec<C64>,
    b: Vec<C64>,
    pub gamma: f64,
    /// Per-term contributions to the `gamma_n` correction sum.
    pub gamma_terms: Vec<C64>,
    pub records: Vec<TermRecord>,
    pub terms_used: usize,
    pub bound_residual: f64,
    cauchy_inner: OnceLock<Result<(Contour, Vec<C64>)>>,
    cauchy_outer: OnceLock<Result<(Contour, Vec<C64>)>>,
}

impl<'a> Expansion<'a> {
    pub fn engine(&self) -> &Engine<'a> {
        self.engine
    }

    /// Relative distance from `L_r` and `L_{1/r}` below which targets are rerouted.
    pub fn guard(&self) -> f64 {
        (36.0 / self.engine.nodes as f64).max(1e-6)
    }

    /// Sum of the `gamma_n` correction terms.
    pub fn gamma_correction(&self) -> C64 {
        self.gamma_terms.iter().sum()
    }

    fn scale(&self) -> f64 {
        let pack = self.engine.pack;
        let c1 = pack.curve().c1;
        let mut s = c1.powf(self.n as f64 + 0.5) / pack.delta_e_inf;
        if self.seq == Sequence::G {
            s /= 1.0 + self.gamma_correction().re;
        }
        s
    }

    /// Sum of the odd terms at `z`.
    pub fn odd_sum(&self, z: C64) -> Result<C64> {
        let kp = self.engine.pack.imap().point(z)?;
        Ok(self.engine.odd_at(&self.a, &self.sum_even, &kp))
    }

    /// Sum of the even terms at `z` (including the leading 1).
    pub fn even_sum(&self, z: C64) -> Result<C64> {
        let w = self.engine.pack.curve().phi(z)?;
        Ok(C64::new(1.0, 0.0) + self.engine.even_at(&self.b, &self.sum_odd, w, self.seq))
    }

    /// Sum of the even terms at infinity.
    pub fn even_sum_at_infinity(&self) -> C64 {
        C64::new(1.0, 0.0) + self.engine.even_at_infinity(&self.b, &self.sum_odd, self.seq)
    }

    /// `Delta_e(z) sqrt(phi'(z)) phi(z)^n * (even sum)`.
    fn exterior_part(&self, z: C64) -> Result<C64> {
        let pack = self.engine.pack;
        let curve = pack.curve();
        let w = curve.phi(z)?;
        Ok(pack.delta_e_w(w)? / curve.sqrt_dpsi(w) * w.powi(self.n as i32) * self.even_sum(z)?)
    }

    /// `-(1/Delta_i(z)) * (odd sum)`.
    fn interior_part(&self, z: C64) -> Result<C64> {
        Ok(-self.engine.pack.inv_delta_i(z)? * self.odd_sum(z)?)
    }

    /// Unnormalized right-hand side evaluated with a prescribed branch.
    pub fn h_branch(&self, z: C64, branch: Branch) -> Result<C64> {
        match branch {
            Branch::Exterior => self.exterior_part(z),
            Branch::Annulus => Ok(self.exterior_part(z)? + self.interior_part(z)?),
            Branch::Interior => self.interior_part(z),
            Branch::Cauchy => Err(Error::Domain("Cauchy reroute is not a closed-form branch".into())),
        }
    }

    /// Monic `P_n(z)` with a prescribed branch.
    pub fn eval_branch(&self, z: C64, branch: Branch) -> Result<C64> {
        Ok(self.h_branch(z, branch)? * self.scale())
    }

    /// Branch that [`Expansion::eval`] uses for `z`.
    pub fn branch_of(&self, z: C64) -> Branch {
        let r = self.engine.r;
        let g = self.guard();
        match self.engine.pack.curve().phi(z) {
            Err(_) => Branch::Interior,
            Ok(w) => {
                let m = w.norm();
                if (m - r).abs() <= g * r || (m - 1.0 / r).abs() <= g / r {
                    Branch::Cauchy
                } else if m > 1.0 / r {
                    Branch::Exterior
                } else if m > r {
                    Branch::Annulus
                } else {
                    Branch::Interior
                }
            }
        }
    }

    /// Monic `P_n(z)` and the branch used.
    pub fn eval(&self, z: C64) -> Result<(C64, Branch)> {
        let branch = self.branch_of(z);
        if branch != Branch::Cauchy {
            return Ok((self.eval_branch(z, branch)?, branch));
        }
        let r = self.engine.r;
        let m = self.engine.pack.curve().phi(z)?.norm();
        let cell = if m < 1.0 { &self.cauchy_inner } else { &self.cauchy_outer };
        let samples = cell.get_or_init(|| {
            let (t, br) = if m < 1.0 { (1.0, Branch::Annulus) } else { (1.0 / r * (1.0 + 3.0 * self.guard()), Branch::Exterior) };
            self.branch_samples(t, br)
        });
        let (contour, vals) = samples.as_ref().map_err(|e| Error::Domain(format!("Cauchy reroute failed: {e}")))?;
        Ok((contour.integrate(|j| vals[j] / (contour.nodes_z[j] - z)), Branch::Cauchy))
    }

    fn branch_samples(&self, t: f64, branch: Branch) -> Result<(Contour, Vec<C64>)> {
        let nc = (2 * self.engine.nodes).max(512);
        let contour = self.engine.pack.curve().level_contour(t, nc)?;
        let vals: Result<Vec<C64>> = contour.nodes_z.par_iter().map(|&x| self.eval_branch(x, branch)).collect();
        Ok((contour, vals?))
    }

    /// Values of `branch` on `L_t`, continued to `z` (inside `L_t`) by
    /// Cauchy's formula.
    pub fn continue_branch(&self, z: C64, t: f64, branch: Branch) -> Result<C64> {
        let (contour, vals) = self.branch_samples(t, branch)?;
        Ok(contour.integrate(|j| vals[j] / (contour.nodes_z[j] - z)))
    }
}

/// Builds engines with doubling node counts until `gamma_n` settles and
/// returns the last engine together with the bounds used.
pub fn converged_engine<'a>(pack: &'a SzegoPack, cfg: &ExpansionConfig, n: usize, seq: Sequence) -> Result<(Engine<'a>, Bounds)> {
    let r = cfg.radius(pack)?;
    let bounds = compute_bounds(pack, r, 4 * cfg.nodes)?;
    let mut nodes = cfg.nodes;
    let mut engine = Engine::new(pack, r, nodes)?;
    if !cfg.adapt {
        return Ok((engine, bounds));
    }
    let mut prev = engine.expand(n, seq, cfg, &bounds)?.gamma;
    while nodes < MAX_NODES {
        nodes *= 2;
        let next = Engine::new(pack, r, nodes)?;
        let g = next.expand(n, seq, cfg, &bounds)?.gamma;
        engine = next;
        if (g / prev - 1.0).abs() < GAMMA_STABLE {
            return Ok((engine, bounds));
        }
        prev = g;
    }
    Err(Error::Resolution(format!("gamma_{n} not stable to {GAMMA_STABLE:e} with {MAX_NODES} nodes")))
}

/// Expands at degree `n`, evaluates `P_n` at the targets, and reports both
/// `gamma_n` values (from the `f`- and `g`-sequences).
pub fn expand_report(pack: &SzegoPack, cfg: &ExpansionConfig, n: usize, targets: &[C64]) -> Result<ExpansionReport> {
    let (engine, bounds) = converged_engine(pack, cfg, n, Sequence::F)?;
    let f = engine.expand(n, Sequence::F, cfg, &bounds)?;
    let g = engine.expand(n, Sequence::G, cfg, &bounds)?;
    let mut points = Vec::with_capacity(targets.len());
    for &z in targets {
        let (v, branch) = f.eval(z)?;
        points.push(TargetValue { z, value: v, branch });
    }
    Ok(ExpansionReport {
        n,
        gamma_n: f.gamma,
        gamma_n_g: g.gamma,
        terms_used: f.terms_used,
        bound_residual: f.bound_residual,
        q: bounds.contraction(engine.r, n),
        nodes: engine.nodes,
        r: engine.r,
        targets: points,
        records: f.records.clone(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TargetValue {
    #[serde(with = "crate::complex::pair")]
    pub z: C64,
    #[serde(with = "crate::complex::pair")]
    pub value: C64,
    pub branch: Branch,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionReport {
    pub n: usize,
    pub gamma_n: f64,
    /// `gamma_n` from the `g`-sequence.
    pub gamma_n_g: f64,
    pub terms_used: usize,
    pub bound_residual: f64,
    pub q: f64,
    pub nodes: usize,
    pub r: f64,
    pub targets: Vec<TargetValue>,
    /// Per-term sizes and majorants of the `f`-sequence.
    pub records: Vec<TermRecord>,
}
