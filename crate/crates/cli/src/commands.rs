use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use wcc_core::flagmetric::{dist_d, dist_delta, gromov_product, hopf};
use wcc_core::lattice::{
    census_counts, default_cache_root, enumerate, enumerate_cached, load_cache, read_manifest, spec_hash, EnumOptions,
    Enumeration, FeasibilityCaps, LatticeSpec,
};
use wcc_core::loxodromy::{certify_with, cx_constant, FittedConstants, DEFAULT_T0_FACTOR};
use wcc_core::projections::{jordan_project, BasePoint, TAU_LOX};
use wcc_core::rootsys::{killing_norm_of, wall_distance_of, RootSystem};
use wcc_core::survey::{
    angular_statistics, angular_sweep, conjugacy_classes_sl2, conjugacy_growth, torus_census_sample,
    torus_census_sl2, trace_bound_for,
};
use wcc_core::volume::{self, Domain, Integrand, QUAD_TOL};
use wcc_core::{check, Result, WccError};

use crate::input::{self, group_dim};
use crate::output::{self, num, Table};

#[derive(Parser, Debug)]
#[command(name = "wcc", version, about = "Weyl chamber counting toolkit for SL(2,R) and SL(3,R)")]
pub struct Cli {
    /// Worker threads (defaults to the available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output format for tabular commands.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Cartan and Jordan projections of a matrix.
    Project(ProjectArgs),
    /// Flag metrics, Gromov products and Hopf coordinates.
    Flag(FlagArgs),
    /// Loxodromy certificate of a matrix.
    Loxo(LoxoArgs),
    /// Harish-Chandra volume of a ball or parallelotope, or a slab integral.
    Volume(VolumeArgs),
    /// Enumerate lattice elements into a sharded cache.
    Enumerate(EnumerateArgs),
    /// Angular statistics of a census.
    Angular(AngularArgs),
    /// Torus sums over a T sweep.
    Tori(ToriArgs),
    /// Conjugacy-class growth over a T sweep.
    Growth(GrowthArgs),
    /// Run the invariant suite and print a pass/fail table.
    Check(CheckArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct MatrixArg {
    /// Matrix as a JSON array of rows, e.g. "[[2,1],[1,1]]".
    #[arg(long)]
    pub matrix: Option<String>,
    /// File holding the JSON matrix.
    #[arg(long)]
    pub matrix_file: Option<PathBuf>,
}

impl MatrixArg {
    fn text(&self) -> Result<String> {
        input::matrix_text(self.matrix.as_deref(), self.matrix_file.as_deref())
    }
}

#[derive(Args, Debug, Serialize)]
pub struct ProjectArgs {
    #[arg(long, default_value = "sl2")]
    pub group: String,
    #[command(flatten)]
    pub matrix: MatrixArg,
    /// Jordan gap below which an element is not called loxodromic.
    #[arg(long, default_value_t = TAU_LOX)]
    pub tau: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FlagOp {
    Dist,
    Delta,
    Gromov,
    Hopf,
}

#[derive(Args, Debug, Serialize)]
pub struct FlagArgs {
    #[arg(long, value_enum)]
    pub op: FlagOp,
    #[arg(long, default_value = "sl2")]
    pub group: String,
    /// Frame of ξ: its first k columns span the k-th subspace.
    #[arg(long)]
    pub xi: Option<String>,
    /// Frame of η.
    #[arg(long)]
    pub eta: Option<String>,
    /// Group element for `hopf`, or the base point representative for `gromov`.
    #[command(flatten)]
    pub matrix: MatrixArg,
}

#[derive(Args, Debug, Serialize)]
pub struct LoxoArgs {
    #[arg(long, default_value = "sl2")]
    pub group: String,
    #[command(flatten)]
    pub matrix: MatrixArg,
    /// Flat-distance radius; defaults to r₀/2.
    #[arg(long)]
    pub r: Option<f64>,
    /// Localization accuracy; defaults to half the admissible bound.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Base point representative (JSON matrix); defaults to the origin.
    #[arg(long)]
    pub base: Option<String>,
    #[arg(long, default_value_t = DEFAULT_T0_FACTOR)]
    pub t0_factor: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainArg {
    Ball,
    Box,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Auto,
    Quadrature,
    MonteCarlo,
}

#[derive(Args, Debug, Serialize)]
pub struct DomainArgs {
    #[arg(long, default_value = "sl2")]
    pub group: String,
    #[arg(long, value_enum, default_value_t = DomainArg::Ball)]
    pub domain: DomainArg,
    #[arg(long)]
    pub t: f64,
    /// Edge lengths per simple root for `--domain box`, e.g. "1,1".
    #[arg(long)]
    pub edges: Option<String>,
    /// Keep only Cartan projections with wall distance above this.
    #[arg(long)]
    pub margin: Option<f64>,
}

impl DomainArgs {
    fn domain(&self) -> Result<Domain> {
        let d = group_dim(&self.group)?;
        let mut dom = match self.domain {
            DomainArg::Ball => {
                if self.edges.is_some() {
                    return Err(WccError::Parameter("--edges only applies to --domain box".into()));
                }
                Domain::ball(d, self.t)
            }
            DomainArg::Box => {
                let edges = match &self.edges {
                    Some(e) => input::number_list(e)?,
                    None => vec![1.0; d - 1],
                };
                Domain::parallelotope(d, self.t, edges)
            }
        };
        if let Some(m) = self.margin {
            dom = dom.with_margin(m);
        }
        dom.validate()?;
        Ok(dom)
    }
}

#[derive(Args, Debug, Serialize)]
pub struct VolumeArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    /// Integrate e^{2ρ} over the slab of wall distance at most this.
    #[arg(long)]
    pub slab: Option<f64>,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 200_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct EnumerateArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    /// Base point representative (JSON matrix); defaults to the origin.
    #[arg(long)]
    pub base: Option<String>,
    #[arg(long, default_value_t = 8)]
    pub shards: usize,
    /// Word-ball radius for groups without exact enumeration.
    #[arg(long)]
    pub word_radius: Option<usize>,
    /// Largest t accepted for exact SL(2,Z) enumeration.
    #[arg(long)]
    pub max_t: Option<f64>,
    /// Cache directory; defaults to $WCC_CACHE/<spec hash>.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Also report counts on this t grid, e.g. "4,6,8".
    #[arg(long)]
    pub census: Option<String>,
    /// Slab fractions ε for the census.
    #[arg(long, default_value = "0.05,0.1,0.2")]
    pub slabs: String,
}

#[derive(Args, Debug, Serialize)]
pub struct CensusSource {
    /// Cache directory written by `wcc enumerate`.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Without a cache, enumerate SL(2,Z) in memory up to this t.
    #[arg(long)]
    pub t_max: Option<f64>,
}

impl CensusSource {
    fn load(&self) -> Result<Option<Enumeration>> {
        match (&self.cache, self.t_max) {
            (Some(dir), _) => Ok(Some(load_cache(dir)?)),
            (None, Some(t)) => Ok(Some(enumerate(&LatticeSpec::sl2(), &Domain::ball(2, t), &EnumOptions::default())?)),
            (None, None) => Ok(None),
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct AngularArgs {
    #[command(flatten)]
    pub source: CensusSource,
    /// t values to evaluate; defaults to the census t.
    #[arg(long)]
    pub t: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub margin: f64,
    #[arg(long, default_value_t = 8)]
    pub bins: usize,
    /// Samples of μ_o ⊗ μ_o for the reference bins; 0 uses exact uniform bins.
    #[arg(long, default_value_t = 0)]
    pub reference_samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Directory for the CSV tables and JSON summary.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ToriArgs {
    /// Census to sample tori from; without it SL(2,Z) classes are enumerated exactly.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// T values, e.g. "4,6,8,10".
    #[arg(long, default_value = "4,5,6,7,8,9,10,11,12")]
    pub t: String,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct GrowthArgs {
    /// Census to read Jordan norms from; without it SL(2,Z) classes are enumerated exactly.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long, default_value = "8,9,10,11,12,13,14,15,16")]
    pub t: String,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct CheckArgs {
    /// Small sample sizes.
    #[arg(long)]
    pub quick: bool,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Project(_) => "project",
            Command::Flag(_) => "flag",
            Command::Loxo(_) => "loxo",
            Command::Volume(_) => "volume",
            Command::Enumerate(_) => "enumerate",
            Command::Angular(_) => "angular",
            Command::Tori(_) => "tori",
            Command::Growth(_) => "growth",
            Command::Check(_) => "check",
        }
    }
}

/// Runs the command and returns the process exit code.
pub fn run(cli: &Cli) -> Result<u8> {
    let config = serde_json::to_value(&cli.command)?;
    let config = config.get(cli.command.name()).cloned().unwrap_or(config);
    let emit = |complete: Option<bool>, result: &Value| -> Result<()> {
        let doc = output::document(cli.command.name(), &config, complete, result)?;
        print!("{}", output::json_text(&doc)?);
        Ok(())
    };
    match &cli.command {
        Command::Project(a) => {
            let d = group_dim(&a.group)?;
            let g = input::element(&a.matrix.text()?, d)?;
            let cartan = g.cartan().a.clone();
            let (jordan, lox) = jordan_project(&g, a.tau);
            emit(
                None,
                &json!({
                    "cartan": cartan,
                    "jordan": jordan,
                    "loxodromic": lox,
                    "wall_distance": wall_distance_of(&cartan),
                    "cartan_norm": killing_norm_of(&cartan),
                    "jordan_norm": killing_norm_of(&jordan),
                }),
            )?;
        }
        Command::Flag(a) => {
            let d = group_dim(&a.group)?;
            fn need<'a>(s: &'a Option<String>, name: &str) -> Result<&'a str> {
                s.as_deref().ok_or_else(|| WccError::Parameter(format!("this --op needs --{name}")))
            }
            let value = match a.op {
                FlagOp::Dist | FlagOp::Delta | FlagOp::Gromov => {
                    let xi = input::flag(need(&a.xi, "xi")?, d)?;
                    let eta = input::flag(need(&a.eta, "eta")?, d)?;
                    match a.op {
                        FlagOp::Dist => json!({ "dist": dist_d(&xi, &eta) }),
                        FlagOp::Delta => json!({ "delta": dist_delta(&xi, &eta) }),
                        _ => {
                            let x = match (&a.matrix.matrix, &a.matrix.matrix_file) {
                                (None, None) => BasePoint::origin(d),
                                _ => BasePoint::new(input::element(&a.matrix.text()?, d)?),
                            };
                            json!({ "gromov": gromov_product(&xi, &eta, &x)? })
                        }
                    }
                }
                FlagOp::Hopf => {
                    let g = input::element(&a.matrix.text()?, d)?;
                    serde_json::to_value(hopf(&g))?
                }
            };
            emit(None, &value)?;
        }
        Command::Loxo(a) => {
            let d = group_dim(&a.group)?;
            let g = input::element(&a.matrix.text()?, d)?;
            let x = match &a.base {
                Some(b) => BasePoint::new(input::element(b, d)?),
                None => BasePoint::origin(d),
            };
            let c = FittedConstants::cached(d)?;
            let r = a.r.unwrap_or(0.5 * c.r0);
            let eps = a.eps.unwrap_or_else(|| 0.5 * (r / cx_constant(&x, c)).min(c.eps0));
            let cert = certify_with(&g, &x, r, eps, c, a.t0_factor)?;
            emit(None, &json!({ "certificate": cert, "constants": c }))?;
        }
        Command::Volume(a) => {
            let dom = a.domain.domain()?;
            let rs = RootSystem::cached(dom.d);
            let mut out = json!({ "delta0": rs.delta0() });
            if let Some(s) = a.slab {
                if a.domain.margin.is_some() {
                    return Err(WccError::Parameter("--slab and --margin are mutually exclusive".into()));
                }
                let res = volume::slab_volume(&dom, s)?;
                out["slab"] = serde_json::to_value(&res)?;
                out["value_log"] = json!(res.slab_log);
                out["value"] = json!(res.slab_log.exp());
                out["method"] = json!("quadrature");
            } else {
                let res = match (a.method, &dom.kind) {
                    (MethodArg::Auto, _) => volume::volume(&dom)?,
                    (MethodArg::Quadrature, volume::DomainKind::Ball) => {
                        volume::polar_volume(&dom, Integrand::HarishChandra, QUAD_TOL)?
                    }
                    (MethodArg::Quadrature, volume::DomainKind::Parallelotope { .. }) => {
                        volume::box_quadrature(&dom, Integrand::HarishChandra, QUAD_TOL)?
                    }
                    (MethodArg::MonteCarlo, _) => volume::monte_carlo(&dom, Integrand::HarishChandra, a.samples, a.seed)?,
                };
                out["value"] = json!(res.value);
                out["value_log"] = json!(res.value_log);
                out["method"] = serde_json::to_value(res.method)?;
                out["error"] = json!(res.error_estimate);
                if let volume::DomainKind::Parallelotope { edges } = &dom.kind {
                    let (c_g, delta_p, delta_minus) = volume::box_constants(dom.d, edges)?;
                    out["C_G"] = json!(c_g);
                    out["delta_p"] = json!(delta_p);
                    out["delta_minus"] = json!(delta_minus);
                }
                if let Some(x) = &res.exponent_data {
                    out["exponent_data"] = serde_json::to_value(x)?;
                }
            }
            emit(None, &out)?;
        }
        Command::Enumerate(a) => {
            let dom = a.domain.domain()?;
            let d = dom.d;
            let mut spec = if d == 2 { LatticeSpec::sl2() } else { LatticeSpec::sl3() };
            if let Some(b) = &a.base {
                spec = spec.at(&input::element(b, d)?);
            }
            let defaults = FeasibilityCaps::default();
            let caps = FeasibilityCaps {
                sl2_max_t: a.max_t.unwrap_or(defaults.sl2_max_t),
                word_radius: a.word_radius.unwrap_or(defaults.word_radius),
                ..defaults
            };
            let opts = EnumOptions { shards: a.shards, caps };
            let dir = match &a.out {
                Some(p) => p.clone(),
                None => default_cache_root().join(spec_hash(&spec, &dom, &opts.caps)),
            };
            let e = enumerate_cached(&spec, &dom, &opts, &dir)?;
            let manifest = read_manifest(&dir)?;
            let mut out = json!({
                "cache": dir,
                "records": e.len(),
                "mode": e.mode(),
                "candidates": e.candidates,
                "manifest": manifest,
            });
            if let Some(grid) = &a.census {
                let table = census_counts(&e, &input::number_list(grid)?, &input::number_list(&a.slabs)?, 1e-9)?;
                out["census"] = serde_json::to_value(&table)?;
            }
            emit(Some(e.complete), &out)?;
        }
        Command::Angular(a) => {
            let e = a.source.load()?.ok_or_else(|| WccError::Parameter("angular needs --cache or --t-max".into()))?;
            let grid = match &a.t {
                Some(t) => input::number_list(t)?,
                None => vec![e.domain.t],
            };
            let rows = grid
                .iter()
                .map(|&t| angular_statistics(&e, t, a.margin, a.bins, a.reference_samples, a.seed))
                .collect::<Result<Vec<_>>>()?;
            let sweep = if grid.len() >= 2 { Some(angular_sweep(&e, &grid, a.margin, a.seed)?) } else { None };
            let mut bins = Table::new(&["t", "bin_plus", "bin_minus", "empirical", "reference"]);
            let mut plot = Table::new(&["t", "ks"]);
            for r in &rows {
                for (i, (emp, re)) in r.empirical.iter().zip(&r.reference).enumerate() {
                    bins.push(vec![num(r.t), (i / r.bins).to_string(), (i % r.bins).to_string(), num(*emp), num(*re)]);
                }
                plot.push(vec![num(r.t), num(r.ks)]);
            }
            let summary = json!({
                "rows": rows,
                "kappa": sweep.as_ref().map(|s| s.kappa),
                "non_increasing_top3": sweep.as_ref().map(|s| s.non_increasing_top3),
                "mode": e.mode(),
            });
            finish(cli, &config, "angular", Some(e.complete), &summary, &[("bins.csv", &bins), ("ks.csv", &plot)], a.out.as_deref())?;
        }
        Command::Tori(a) => {
            let grid = input::number_list(&a.t)?;
            match &a.cache {
                None => {
                    let rep = torus_census_sl2(&grid)?;
                    let mut rows = Table::new(&["t", "classes", "primitive_classes", "class_side", "torus_side", "volume_log", "ratio"]);
                    let mut plot = Table::new(&["t", "ratio"]);
                    for r in &rep.rows {
                        rows.push(vec![
                            num(r.t),
                            r.classes.to_string(),
                            r.primitive_classes.to_string(),
                            num(r.class_side),
                            num(r.torus_side),
                            num(r.volume_log),
                            num(r.ratio),
                        ]);
                        plot.push(vec![num(r.t), num(r.ratio)]);
                    }
                    let t_max = grid.iter().copied().fold(0.0, f64::max);
                    let classes = conjugacy_classes_sl2(trace_bound_for(t_max).max(3))?;
                    let mut per_class = Table::new(&["class_id", "trace", "primitive", "power", "primitive_id", "norm", "period_volume"]);
                    for c in classes.iter().filter(|c| c.norm <= t_max) {
                        per_class.push(vec![
                            c.class_id.clone(),
                            c.trace.to_string(),
                            c.primitive.to_string(),
                            c.power.to_string(),
                            c.primitive_id.clone(),
                            num(c.norm),
                            num(c.period_volume),
                        ]);
                    }
                    let tables = [("tori.csv", &rows), ("ratio.csv", &plot), ("classes.csv", &per_class)];
                    finish(cli, &config, "tori", Some(rep.exhaustive), &rep, &tables, a.out.as_deref())?;
                }
                Some(dir) => {
                    let e = load_cache(dir)?;
                    let reps = grid.iter().map(|&t| torus_census_sample(&e, t)).collect::<Result<Vec<_>>>()?;
                    let mut rows = Table::new(&["t", "tori", "balanced", "unbalanced", "threshold"]);
                    for r in &reps {
                        rows.push(vec![
                            num(r.t),
                            r.tori.len().to_string(),
                            r.balanced.to_string(),
                            r.unbalanced.to_string(),
                            num(r.threshold),
                        ]);
                    }
                    let complete = reps.iter().all(|r| r.exhaustive);
                    finish(cli, &config, "tori", Some(complete), &reps, &[("tori.csv", &rows)], a.out.as_deref())?;
                }
            }
        }
        Command::Growth(a) => {
            let grid = input::number_list(&a.t)?;
            let t_max = grid.iter().copied().fold(0.0, f64::max);
            let (norms, d, complete) = match &a.cache {
                None => {
                    let classes = conjugacy_classes_sl2(trace_bound_for(t_max).max(3))?;
                    (classes.iter().map(|c| c.norm).collect::<Vec<_>>(), 2, true)
                }
                Some(dir) => {
                    let e = load_cache(dir)?;
                    let rep = torus_census_sample(&e, t_max)?;
                    (rep.tori.iter().map(|t| t.norm).collect(), e.spec.d, rep.exhaustive)
                }
            };
            let rep = conjugacy_growth(&norms, d, &grid)?;
            let mut rows = Table::new(&["t", "count", "model", "ratio"]);
            let mut plot = Table::new(&["t", "count"]);
            for r in &rep.rows {
                rows.push(vec![num(r.t), r.count.to_string(), num(r.model), num(r.ratio)]);
                plot.push(vec![num(r.t), r.count.to_string()]);
            }
            finish(cli, &config, "growth", Some(complete), &rep, &[("growth.csv", &rows), ("count.csv", &plot)], a.out.as_deref())?;
        }
        Command::Check(a) => {
            let rows = check::run(a.quick);
            let ok = rows.iter().all(|r| r.passed);
            match cli.format {
                Format::Json => emit(None, &serde_json::to_value(&rows)?)?,
                Format::Csv => {
                    let mut t = Table::new(&["name", "passed", "seconds", "detail"]);
                    for r in &rows {
                        t.push(vec![r.name.clone(), r.passed.to_string(), num(r.seconds), r.detail.clone()]);
                    }
                    print!("{}", t.render());
                }
            }
            eprint!("{}", check::render(&rows));
            return Ok(if ok { 0 } else { 1 });
        }
    }
    Ok(0)
}

/// Prints the summary (JSON) or the first table (CSV), and writes every
/// table plus `summary.json` into `out` when given.
fn finish<T: Serialize>(
    cli: &Cli,
    config: &Value,
    command: &str,
    complete: Option<bool>,
    summary: &T,
    tables: &[(&str, &Table)],
    out: Option<&Path>,
) -> Result<()> {
    let doc = output::document(command, config, complete, summary)?;
    if let Some(dir) = out {
        output::write(dir, "summary.json", &output::json_text(&doc)?)?;
        for (name, t) in tables {
            output::write(dir, name, &t.render())?;
        }
    }
    match cli.format {
        Format::Json => print!("{}", output::json_text(&doc)?),
        Format::Csv => print!("{}", tables[0].1.render()),
    }
    Ok(())
}
