//! Experiment configuration and the batch driver behind the `curveortho`
//! binary.
//!
//! A run builds the curve, weight and Szegő data once, then executes the
//! requested tasks over the degree list. Degrees are processed in parallel
//! but results are gathered in order, so every artifact is byte-identical
//! regardless of the thread count.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    gamma_asymptotic, proposition_integral, szego_exterior_formula, thm3_at_singularity, thm3_interior, thm3_reference,
    PropositionMode, SingularityData,
};
use crate::complex::{self, c, C64};
use crate::curve::CurveSpec;
use crate::error::{Error, Result};
use crate::interior::{InteriorFitOptions, InteriorMap};
use crate::extended::ExtendedOracle;
use crate::oracle::{ArnoldiOracle, PolyCoeffs};
use crate::szego::{SzegoPack, WeightSpec};
use crate::transforms::{expand_report, ExpansionConfig, ExpansionReport};
use crate::zeros::{
    equilibrium_compare, limit_angle_probe, potential_mismatch, zero_free_region_check, zero_set, zeros_csv, zeros_svg,
    AngleCluster, Region, ZeroSet,
};

/// Thresholds applied by `--check`.
pub mod thresholds {
    /// Expansion vs oracle, relative to `max |P_n|` over the targets.
    pub const COMPARE_REL: f64 = 1e-7;
    pub const GAMMA_REL: f64 = 1e-7;
    pub const KS: f64 = 0.15;
    pub const POTENTIAL: f64 = 0.05;
    /// Exterior/interior compacts sit this far from `L_rho` in `|phi|`.
    pub const COMPACT_OFFSET: f64 = 0.1;
    /// Terminal over initial normalized interior error.
    pub const THM3_DECAY: f64 = 0.5;
    pub const THM3_AT_SINGULARITY: f64 = 0.1;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Expand,
    Oracle,
    Compare,
    Asymptotics,
    Thm3,
    Zeros,
    Proposition,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Degrees {
    List(Vec<usize>),
    Range { from: usize, to: usize },
}

impl Degrees {
    pub fn resolve(&self) -> Vec<usize> {
        match self {
            Degrees::List(v) => v.clone(),
            Degrees::Range { from, to } => (*from..=*to).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Point(#[serde(with = "complex::pair")] C64),
    /// `"L_1"`, `"annulus"` or `"interior_grid"`.
    Named(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Amplitude {
    /// `v = 1`
    One,
    /// `v = 1 + t`
    Linear,
}

impl Amplitude {
    fn eval(self, t: C64) -> C64 {
        match self {
            Amplitude::One => c(1.0, 0.0),
            Amplitude::Linear => t + 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropositionConfig {
    pub betas: Vec<f64>,
    pub rho: f64,
    pub delta: f64,
    pub v: Vec<Amplitude>,
}

impl Default for PropositionConfig {
    fn default() -> Self {
        PropositionConfig { betas: vec![0.5, 1.0, 1.5, 2.0], rho: 0.5, delta: 0.1, v: vec![Amplitude::One, Amplitude::Linear] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub curve: CurveSpec,
    pub weight: WeightSpec,
    #[serde(default)]
    pub expansion: ExpansionConfig,
    pub degrees: Degrees,
    #[serde(default)]
    pub targets: Vec<Target>,
    pub tasks: Vec<Task>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Base point of the interior Riemann map; the curve's `c0` by default.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_pair")]
    pub interior_center: Option<C64>,
    #[serde(default)]
    pub proposition: PropositionConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

mod opt_pair {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &Option<C64>, s: S) -> Result<S::Ok, S::Error> {
        z.map(|z| [z.re, z.im]).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<C64>, D::Error> {
        Ok(Option::<[f64; 2]>::deserialize(d)?.map(|[re, im]| C64::new(re, im)))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validated()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks everything that can be checked without numerics and fills in
    /// the curve's univalence radius.
    pub fn validated(mut self) -> Result<Self> {
        self.curve = self.curve.validated().map_err(|e| Error::Config(format!("curve: {e}")))?;
        let degrees = self.degrees.resolve();
        if degrees.is_empty() {
            return Err(Error::Config("degrees must be nonempty".into()));
        }
        if self.tasks.is_empty() {
            return Err(Error::Config("no tasks requested".into()));
        }
        let needs_poly = self.tasks.iter().any(|t| !matches!(t, Task::Proposition));
        if needs_poly && degrees.contains(&0) {
            return Err(Error::Config("polynomial tasks need degrees >= 1".into()));
        }
        let singular = matches!(self.weight, WeightSpec::Singular { .. });
        if self.tasks.contains(&Task::Thm3) && !singular {
            return Err(Error::Config("task thm3 needs a singular weight".into()));
        }
        for t in [Task::Expand, Task::Compare, Task::Asymptotics, Task::Thm3] {
            if self.tasks.contains(&t) && self.targets.is_empty() {
                return Err(Error::Config(format!("task {t:?} needs targets").to_lowercase()));
            }
        }
        for t in &self.targets {
            if let Target::Named(name) = t {
                if !matches!(name.as_str(), "L_1" | "annulus" | "interior_grid") {
                    return Err(Error::Config(format!("unknown target grid {name:?}")));
                }
            }
        }
        if let Some(r) = self.expansion.r {
            if !(r < 1.0) {
                return Err(Error::Config(format!("r = {r} violates rho < r < 1")));
            }
        }
        let p = &self.proposition;
        if self.tasks.contains(&Task::Proposition) && (p.betas.is_empty() || p.v.is_empty() || !(p.delta > 0.0 && p.delta < p.rho)) {
            return Err(Error::Config("proposition needs betas, amplitudes and 0 < delta < rho".into()));
        }
        Ok(self)
    }
}

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub check: bool,
    pub nodes: Option<usize>,
    pub svg: bool,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub verbose: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, threshold, pass: value <= threshold }
    }

    fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, threshold, pass: value < threshold }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub rho: f64,
    pub artifacts: Vec<String>,
    pub checks: Vec<Check>,
    /// Largest `|P_n^expansion - P_n^oracle|` over degrees and targets.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_compare_error: Option<f64>,
    pub passed: bool,
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const NUMERICAL: i32 = 2;
    pub const CHECK: i32 = 3;
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        exit::NUMERICAL
    } else {
        exit::CONFIG
    }
}

struct Ctx {
    cfg: ExperimentConfig,
    pack: SzegoPack,
    degrees: Vec<usize>,
    targets: Vec<C64>,
    out: PathBuf,
    opts: RunOptions,
    artifacts: Vec<String>,
    checks: Vec<Check>,
}

impl Ctx {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.out.join(name), contents)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.write(name, &(text + "\n"))
    }

    fn curve(&self) -> &CurveSpec {
        self.pack.curve()
    }

    fn weight(&self) -> &WeightSpec {
        &self.cfg.weight
    }

    fn n_max(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0)
    }
}

/// Executes a validated config and writes all artifacts plus `summary.json`.
pub fn run(cfg: ExperimentConfig, opts: RunOptions) -> Result<RunSummary> {
    let mut cfg = cfg.validated()?;
    if let Some(n) = opts.nodes {
        cfg.expansion.nodes = n;
    }
    if let Some(dir) = &opts.out {
        cfg.output_dir = dir.clone();
    }
    let jobs = opts.jobs.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_in_pool(cfg, opts))
}

fn run_in_pool(mut cfg: ExperimentConfig, opts: RunOptions) -> Result<RunSummary> {
    let center = cfg.interior_center.unwrap_or(cfg.curve.c0);
    let imap = InteriorMap::fit(&cfg.curve, center, InteriorFitOptions::default())?;
    let pack = SzegoPack::build(&cfg.curve, &imap, &cfg.weight)?;
    let uses_expansion = cfg.tasks.iter().any(|t| matches!(t, Task::Expand | Task::Compare | Task::Asymptotics));
    if uses_expansion || cfg.expansion.r.is_some() {
        cfg.expansion.r = Some(cfg.expansion.radius(&pack)?);
    }
    let targets = resolve_targets(&cfg.targets, &pack)?;
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out)?;
    let mut ctx = Ctx {
        degrees: cfg.degrees.resolve(),
        cfg,
        pack,
        targets,
        out,
        opts,
        artifacts: Vec::new(),
        checks: Vec::new(),
    };
    let tasks = ctx.cfg.tasks.clone();
    let has = |t: Task| tasks.contains(&t);

    let needs_oracle = has(Task::Oracle) || has(Task::Compare) || has(Task::Asymptotics) || has(Task::Thm3) || has(Task::Zeros);
    let oracle = if needs_oracle { Some(ArnoldiOracle::converged(ctx.curve(), ctx.weight(), ctx.n_max())?) } else { None };
    // interior values of P_n fall below the double rounding floor for the larger degrees
    let extended = if has(Task::Thm3) || has(Task::Zeros) {
        Some(ExtendedOracle::converged(ctx.curve(), ctx.weight(), ctx.n_max())?)
    } else {
        None
    };
    let expansions = if has(Task::Expand) || has(Task::Compare) { Some(expand_all(&ctx)?) } else { None };

    if let Some(reps) = &expansions {
        if ctx.opts.verbose {
            log_terms(reps);
        }
        if has(Task::Expand) {
            ctx.write_json("expand.json", reps)?;
        }
    }
    if has(Task::Oracle) {
        let o = oracle.as_ref().expect("oracle built");
        let rows: Vec<OracleRecord> = ctx.degrees.iter().map(|&n| oracle_record(o, n, &ctx.targets)).collect();
        ctx.write_json("oracle.json", &rows)?;
    }
    let mut max_compare_error = None;
    if has(Task::Compare) {
        max_compare_error = Some(compare(&mut ctx, expansions.as_deref().expect("expansions built"), oracle.as_ref().expect("oracle built"))?);
    }
    if has(Task::Asymptotics) {
        asymptotics(&mut ctx, oracle.as_ref().expect("oracle built"))?;
    }
    if has(Task::Thm3) {
        thm3(&mut ctx, extended.as_ref().expect("extended oracle built"))?;
    }
    if has(Task::Zeros) {
        zeros(&mut ctx, oracle.as_ref().expect("oracle built"), extended.as_ref().expect("extended oracle built"))?;
    }
    if has(Task::Proposition) {
        proposition(&mut ctx)?;
    }

    let passed = ctx.checks.iter().all(|c| c.pass);
    let mut summary = RunSummary {
        config: ctx.cfg.clone(),
        rho: ctx.pack.rho,
        artifacts: ctx.artifacts.clone(),
        checks: ctx.checks.clone(),
        max_compare_error,
        passed,
    };
    summary.artifacts.push("summary.json".into());
    ctx.write_json("summary.json", &summary)?;
    Ok(summary)
}

/// Points on `L_1`, in the annulus `rho < |phi| < 1`, or on a grid inside the curve.
pub fn resolve_targets(targets: &[Target], pack: &SzegoPack) -> Result<Vec<C64>> {
    let curve = pack.curve();
    let mut out = Vec::new();
    for t in targets {
        match t {
            Target::Point(z) => out.push(*z),
            Target::Named(name) => match name.as_str() {
                "L_1" => {
                    out.extend((0..50).map(|k| curve.psi_unchecked(C64::from_polar(1.0, TAU * (k as f64 + 0.25) / 50.0))));
                }
                "annulus" => {
                    for i in 1..=3 {
                        let r = pack.rho + (1.0 - pack.rho) * i as f64 / 4.0;
                        out.extend((0..16).map(|k| curve.psi_unchecked(C64::from_polar(r, TAU * (k as f64 + 0.5 * i as f64) / 16.0))));
                    }
                }
                "interior_grid" => {
                    let contour = curve.level_contour(1.0, 256)?;
                    let (mut lo, mut hi) = (contour.nodes_z[0], contour.nodes_z[0]);
                    for z in &contour.nodes_z {
                        lo = c(lo.re.min(z.re), lo.im.min(z.im));
                        hi = c(hi.re.max(z.re), hi.im.max(z.im));
                    }
                    let m = 9;
                    for i in 0..m {
                        for j in 0..m {
                            let z = c(
                                lo.re + (hi.re - lo.re) * (i as f64 + 0.5) / m as f64,
                                lo.im + (hi.im - lo.im) * (j as f64 + 0.5) / m as f64,
                            );
                            let inside = match curve.phi(z) {
                                Ok(w) => w.norm() < 0.95,
                                Err(_) => curve.encloses(z),
                            };
                            if inside {
                                out.push(z);
                            }
                        }
                    }
                }
                other => return Err(Error::Config(format!("unknown target grid {other:?}"))),
            },
        }
    }
    Ok(out)
}

fn expand_all(ctx: &Ctx) -> Result<Vec<ExpansionReport>> {
    ctx.degrees
        .par_iter()
        .map(|&n| expand_report(&ctx.pack, &ctx.cfg.expansion, n, &ctx.targets))
        .collect()
}

fn log_terms(reports: &[ExpansionReport]) {
    for rep in reports {
        eprintln!("n = {}: q = {:.3e}, {} terms, residual bound {:.3e}", rep.n, rep.q, rep.terms_used, rep.bound_residual);
        for t in &rep.records {
            eprintln!(
                "  k = {:3}  odd {:.3e} (bound {:.3e})  even {:.3e} (bound {:.3e})",
                t.k, t.odd_max, t.odd_bound, t.even_max, t.even_bound
            );
        }
    }
}

#[derive(Serialize)]
struct OracleRecord {
    n: usize,
    gamma: f64,
    poly: PolyCoeffs,
    #[serde(with = "complex::pairs")]
    targets: Vec<C64>,
    #[serde(with = "complex::pairs")]
    values: Vec<C64>,
}

fn oracle_record(o: &ArnoldiOracle, n: usize, targets: &[C64]) -> OracleRecord {
    OracleRecord {
        n,
        gamma: o.gamma(n),
        poly: o.coeffs(n),
        targets: targets.to_vec(),
        values: targets.iter().map(|&z| o.eval(n, z)).collect(),
    }
}

fn compare(ctx: &mut Ctx, reps: &[ExpansionReport], o: &ArnoldiOracle) -> Result<f64> {
    let mut csv = String::from("n,max_abs_diff,max_oracle,rel_diff,gamma_expansion,gamma_expansion_g,gamma_oracle,gamma_rel\n");
    let (mut worst_abs, mut worst_rel, mut worst_gamma) = (0.0f64, 0.0f64, 0.0f64);
    for rep in reps {
        let (mut diff, mut scale) = (0.0f64, 0.0f64);
        for t in &rep.targets {
            let p = o.eval(rep.n, t.z);
            diff = diff.max((t.value - p).norm());
            scale = scale.max(p.norm());
        }
        let g = o.gamma(rep.n);
        let grel = ((rep.gamma_n - g).abs()).max((rep.gamma_n_g - g).abs()) / g;
        let rel = diff / scale;
        writeln!(csv, "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}", rep.n, diff, scale, rel, rep.gamma_n, rep.gamma_n_g, g, grel).unwrap();
        worst_abs = worst_abs.max(diff);
        worst_rel = worst_rel.max(rel);
        worst_gamma = worst_gamma.max(grel);
    }
    ctx.write("compare.csv", &csv)?;
    ctx.checks.push(Check::at_most("compare_rel_diff", worst_rel, thresholds::COMPARE_REL));
    ctx.checks.push(Check::at_most("compare_gamma_rel", worst_gamma, thresholds::GAMMA_REL));
    Ok(worst_abs)
}

const SWEEP_HEADER: &str = "kind,n,z_re,z_im,value_re,value_im,oracle_re,oracle_im,abs_err,rel_err,modeled_rate\n";

fn sweep_row(csv: &mut String, kind: &str, n: usize, z: C64, value: C64, oracle: C64, rel: f64, rate: f64) {
    writeln!(
        csv,
        "{kind},{n},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
        z.re,
        z.im,
        value.re,
        value.im,
        oracle.re,
        oracle.im,
        (value - oracle).norm(),
        rel,
        rate
    )
    .unwrap();
}

/// First and last error of each series; `None` for series of fewer than two points.
fn endpoints(errs: &[f64]) -> Option<(f64, f64)> {
    (errs.len() >= 2).then(|| (errs[0], errs[errs.len() - 1]))
}

fn asymptotics(ctx: &mut Ctx, o: &ArnoldiOracle) -> Result<()> {
    let r = ctx.cfg.expansion.r.unwrap_or(0.5 * (1.0 + ctx.pack.rho));
    let pts: Vec<(C64, f64)> = ctx
        .targets
        .iter()
        .filter_map(|&z| ctx.curve().phi(z).ok().filter(|w| w.norm() > ctx.pack.rho).map(|w| (z, w.norm())))
        .collect();
    if pts.is_empty() {
        return Err(Error::Config("asymptotics needs targets with |phi(z)| > rho".into()));
    }
    let rows: Vec<Vec<(C64, C64, C64)>> = ctx
        .degrees
        .par_iter()
        .map(|&n| pts.iter().map(|&(z, _)| Ok((z, szego_exterior_formula(&ctx.pack, n, z)?, o.eval(n, z)))).collect())
        .collect::<Result<_>>()?;
    let mut csv = String::from(SWEEP_HEADER);
    let mut series = vec![Vec::new(); pts.len()];
    for (&n, row) in ctx.degrees.iter().zip(&rows) {
        for (i, &(z, v, p)) in row.iter().enumerate() {
            let rel = (v - p).norm() / p.norm();
            series[i].push(rel);
            sweep_row(&mut csv, "szego", n, z, v, p, rel, (r / pts[i].1).powi(n as i32));
        }
        let gm = gamma_asymptotic(&ctx.pack, n);
        let go = o.gamma(n);
        let g = c(gm, 0.0);
        sweep_row(&mut csv, "gamma", n, c(f64::INFINITY, 0.0), g, c(go, 0.0), (gm / go - 1.0).abs(), r.powi(2 * n as i32));
    }
    ctx.write("asymptotics.csv", &csv)?;
    let worst = series.iter().filter_map(|s| endpoints(s)).map(|(a, b)| b / a).fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
    if let Some(ratio) = worst {
        ctx.checks.push(Check::below("asymptotics_error_ratio_last_over_first", ratio, 1.0));
    }
    Ok(())
}

fn thm3(ctx: &mut Ctx, o: &ExtendedOracle) -> Result<()> {
    let sdata = SingularityData::build(&ctx.pack)?;
    // Targets on or near the cut system are skipped; keep those usable at every degree.
    let probe_n = ctx.degrees[0];
    let pts: Vec<C64> = ctx.targets.iter().copied().filter(|&z| thm3_interior(&ctx.pack, &sdata, probe_n, z).is_ok()).collect();
    type Row = (Vec<(C64, C64, f64)>, Vec<(C64, C64)>);
    let rows: Vec<Row> = ctx
        .degrees
        .par_iter()
        .map(|&n| -> Result<Row> {
            let scale = thm3_reference(&ctx.pack, &sdata, n)?;
            let inner = pts.iter().map(|&z| Ok((thm3_interior(&ctx.pack, &sdata, n, z)?.value, o.eval(n, z), scale))).collect::<Result<_>>()?;
            let at = (1..=sdata.sing.len())
                .map(|j| Ok((thm3_at_singularity(&ctx.pack, &sdata, n, j)?, o.eval(n, sdata.sing[j - 1].a))))
                .collect::<Result<_>>()?;
            Ok((inner, at))
        })
        .collect::<Result<_>>()?;
    let mut csv = String::from(SWEEP_HEADER);
    let mut series = vec![Vec::new(); pts.len()];
    let mut at_last = Vec::new();
    for (&n, (inner, at)) in ctx.degrees.iter().zip(&rows) {
        for (i, &(v, p, scale)) in inner.iter().enumerate() {
            let rel = (v - p).norm() / scale;
            series[i].push(rel);
            sweep_row(&mut csv, "interior", n, pts[i], v, p, rel, 1.0 / n as f64);
        }
        at_last.clear();
        for (j, &(v, p)) in at.iter().enumerate() {
            let rel = (v - p).norm() / p.norm();
            at_last.push(rel);
            sweep_row(&mut csv, &format!("a{}", j + 1), n, sdata.sing[j].a, v, p, rel, 1.0 / n as f64);
        }
    }
    ctx.write("thm3.csv", &csv)?;
    ctx.write_json("singularities.json", &sdata)?;
    let decay = series.iter().filter_map(|s| endpoints(s)).map(|(a, b)| b / a).fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
    if let Some(ratio) = decay {
        ctx.checks.push(Check::at_most("thm3_interior_last_over_first", ratio, thresholds::THM3_DECAY));
    }
    let worst_at = at_last.iter().cloned().fold(0.0, f64::max);
    ctx.checks.push(Check::at_most("thm3_at_singularity_rel_err", worst_at, thresholds::THM3_AT_SINGULARITY));
    Ok(())
}

/// Hessenberg eigenvalues in double precision, polished against the
/// double-double recurrence so interior zeros are not rounding artifacts.
fn zeros(ctx: &mut Ctx, o: &ArnoldiOracle, ext: &ExtendedOracle) -> Result<()> {
    let sets: Vec<ZeroSet> = ctx
        .degrees
        .par_iter()
        .map(|&n| Ok(zero_set(n, ext.zeros(n, &o.zeros(n)?)?, ctx.curve())))
        .collect::<Result<_>>()?;
    ctx.write("zeros.csv", &zeros_csv(&sets))?;
    if ctx.opts.svg {
        for z in &sets {
            let svg = zeros_svg(z, ctx.curve(), Some(ctx.pack.rho));
            ctx.write(&format!("zeros_n{}.svg", z.n), &svg)?;
        }
    }
    let singular = SingularityData::build(&ctx.pack).ok();
    if let Some(sdata) = singular {
        let last = sets.last().expect("degrees nonempty");
        let rho = ctx.pack.rho;
        let ks = equilibrium_compare(last).ks;
        let ext = zero_free_region_check(last, Region::Exterior(rho + thresholds::COMPACT_OFFSET), sdata.u);
        let int = zero_free_region_check(last, Region::Interior(rho - thresholds::COMPACT_OFFSET), sdata.u);
        let probes: Vec<C64> = (0..5).map(|k| ctx.curve().psi_unchecked(C64::from_polar(1.5, TAU * k as f64 / 5.0 + 0.3))).collect();
        let pot = potential_mismatch(last, ctx.curve(), &probes)?;
        ctx.checks.push(Check::below("zeros_ks", ks, thresholds::KS));
        ctx.checks.push(Check::at_most("zeros_exterior_count", ext.count as f64, ext.allowed as f64));
        ctx.checks.push(Check::at_most("zeros_interior_count", int.count as f64, int.allowed as f64));
        ctx.checks.push(Check::at_most("zeros_potential", pot, thresholds::POTENTIAL));
        let clusters: Vec<AngleCluster> = limit_angle_probe(&ctx.pack, &sdata, &ctx.degrees, 40);
        ctx.write_json("limit_angles.json", &clusters)?;
    }
    Ok(())
}

/// Errors below this are rounding noise (the exact cases), not a trend.
const PROPOSITION_FLOOR: f64 = 1e-12;

fn proposition(ctx: &mut Ctx) -> Result<()> {
    let p = ctx.cfg.proposition.clone();
    let mut csv = String::from("beta,v,n,value_re,value_im,oracle_re,oracle_im,abs_err,rel_err,modeled_rate\n");
    let mut worst_increase: f64 = 0.0;
    for &beta in &p.betas {
        for &v in &p.v {
            let vals: Vec<(C64, C64)> = ctx
                .degrees
                .par_iter()
                .map(|&n| {
                    let f = |t: C64| v.eval(t);
                    Ok((
                        proposition_integral(f, beta, p.rho, p.delta, n, PropositionMode::Asymptotic)?,
                        proposition_integral(f, beta, p.rho, p.delta, n, PropositionMode::Quadrature)?,
                    ))
                })
                .collect::<Result<_>>()?;
            let mut prev: Option<f64> = None;
            for (&n, &(asym, quad)) in ctx.degrees.iter().zip(&vals) {
                let rel = (asym - quad).norm() / quad.norm();
                let name = match v {
                    Amplitude::One => "one",
                    Amplitude::Linear => "linear",
                };
                writeln!(
                    csv,
                    "{beta},{name},{n},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                    asym.re,
                    asym.im,
                    quad.re,
                    quad.im,
                    (asym - quad).norm(),
                    rel,
                    1.0 / n as f64
                )
                .unwrap();
                if let Some(pr) = prev {
                    if rel > PROPOSITION_FLOOR && pr > PROPOSITION_FLOOR {
                        worst_increase = worst_increase.max(rel / pr);
                    }
                }
                prev = Some(rel);
            }
        }
    }
    ctx.write("proposition.csv", &csv)?;
    if ctx.degrees.len() >= 2 {
        ctx.checks.push(Check::below("proposition_error_step_ratio", worst_increase, 1.0));
    }
    Ok(())
}
