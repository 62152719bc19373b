//! Enumeration of `Γ ∩ D_t(x)` for integer lattices, with sharding and a
//! resumable on-disk cache.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, WccError};
use crate::projections::{int_adjugate, int_det, int_mul, BasePoint, GroupElement, TAU_LOX};
use crate::rootsys::{killing_norm_of, wall_distance_of, CartanVector};
use crate::volume::{Domain, DomainKind};

pub const CACHE_VERSION: u32 = 1;
pub const CACHE_ENV: &str = "WCC_CACHE";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Presentation {
    /// All of SL(d, Z).
    FullInteger,
    /// The subgroup generated by the listed row-major integer matrices.
    Generated { generators: Vec<Vec<i64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub d: usize,
    pub presentation: Presentation,
    /// Rows of `h_x`; `None` is the origin.
    pub base_point: Option<Vec<Vec<f64>>>,
}

impl LatticeSpec {
    pub fn sl2() -> Self {
        LatticeSpec { d: 2, presentation: Presentation::FullInteger, base_point: None }
    }

    pub fn sl3() -> Self {
        LatticeSpec { d: 3, presentation: Presentation::FullInteger, base_point: None }
    }

    pub fn generated(d: usize, generators: Vec<Vec<i64>>) -> Self {
        LatticeSpec { d, presentation: Presentation::Generated { generators }, base_point: None }
    }

    pub fn at(mut self, h: &GroupElement) -> Self {
        let m = h.matrix();
        self.base_point = Some((0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.d) {
            return Err(WccError::Parameter(format!("lattices are implemented for d = 2, 3 (got {})", self.d)));
        }
        if let Presentation::Generated { generators } = &self.presentation {
            if generators.is_empty() {
                return Err(WccError::Parameter("empty generator list".into()));
            }
            for g in generators {
                if g.len() != self.d * self.d || int_det(self.d, g) != 1 {
                    return Err(WccError::Parameter(format!("generator {g:?} is not in SL({}, Z)", self.d)));
                }
            }
        }
        if let Some(rows) = &self.base_point {
            GroupElement::from_rows(rows)?;
        }
        Ok(())
    }

    pub fn base(&self) -> Result<BasePoint> {
        Ok(match &self.base_point {
            None => BasePoint::origin(self.d),
            Some(rows) => BasePoint::new(self.integral_base().map_or_else(|| GroupElement::from_rows(rows), Ok)?),
        })
    }

    /// `h_x` as an integer matrix, when it is one.
    fn integral_base(&self) -> Option<GroupElement> {
        let rows = self.base_point.as_ref()?;
        let ints: Vec<i64> = rows.iter().flatten().map(|&v| v as i64).collect();
        let exact = rows.iter().flatten().zip(&ints).all(|(&v, &i)| v == i as f64);
        exact.then(|| GroupElement::from_integer(self.d, &ints).ok()).flatten()
    }

    pub fn is_exact(&self) -> bool {
        self.d == 2 && self.presentation == Presentation::FullInteger
    }

    /// Elementary generators of SL(d, Z).
    pub fn elementary_generators(d: usize) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    let mut m: Vec<i64> = (0..d * d).map(|k| i64::from(k % (d + 1) == 0)).collect();
                    m[i * d + j] = 1;
                    out.push(m);
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityCaps {
    /// Largest `t` accepted for exact SL(2, Z) enumeration.
    pub sl2_max_t: f64,
    /// Largest candidate count accepted for exact enumeration.
    pub max_candidates: f64,
    pub word_radius: usize,
    /// Word balls stop growing past this many elements.
    pub max_ball: usize,
}

impl Default for FeasibilityCaps {
    fn default() -> Self {
        FeasibilityCaps { sl2_max_t: 14.0, max_candidates: 2e9, word_radius: 6, max_ball: 2_000_000 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ElementRecord {
    /// Row-major integer entries.
    pub matrix: Vec<i64>,
    /// `a_x(γ)`.
    pub cartan: CartanVector,
    pub norm: f64,
    pub wall_margin: f64,
    pub loxodromic: bool,
    pub jordan: Option<CartanVector>,
}

impl ElementRecord {
    pub fn element(&self) -> GroupElement {
        let d = self.cartan.dim();
        GroupElement::from_integer(d, &self.matrix).expect("records are unimodular")
    }

    pub fn trace(&self) -> i64 {
        let d = self.cartan.dim();
        (0..d).map(|i| self.matrix[i * d + i]).sum()
    }
}

/// `a(γ)` for an integer matrix; exact Frobenius formula when `d = 2`.
pub fn integer_cartan(d: usize, m: &[i64]) -> CartanVector {
    if d == 2 {
        let f2: i64 = m.iter().map(|v| v * v).sum();
        // ‖γ‖_F² = 2 cosh(2s) for a(γ) = (s, −s)
        let s = 0.5 * (f2 as f64 / 2.0).acosh();
        return CartanVector(vec![s, -s]);
    }
    GroupElement::from_integer(d, m).expect("unimodular").cartan().a.clone()
}

fn jordan_of(d: usize, m: &[i64]) -> (bool, Option<CartanVector>) {
    if d == 2 {
        let tr = (m[0] + m[3]).abs();
        if tr <= 2 {
            return (false, None);
        }
        let t = tr as f64;
        let l = ((t + (t * t - 4.0).sqrt()) / 2.0).ln();
        return (true, Some(CartanVector(vec![l, -l])));
    }
    let g = GroupElement::from_integer(d, m).expect("unimodular");
    let j = g.jordan();
    let lox = j.is_loxodromic(TAU_LOX);
    (lox, lox.then(|| j.lambda.clone()))
}

/// How `a_x` is evaluated for candidate matrices.
enum Gauge {
    Origin,
    Integer { h: Vec<i64>, h_inv: Vec<i64> },
    Real(BasePoint),
}

impl Gauge {
    fn new(spec: &LatticeSpec) -> Result<Self> {
        Ok(match (&spec.base_point, spec.integral_base()) {
            (None, _) => Gauge::Origin,
            (Some(_), Some(h)) => {
                let e = h.integer_entries().expect("integral").to_vec();
                Gauge::Integer { h_inv: int_adjugate(spec.d, &e), h: e }
            }
            (Some(_), None) => Gauge::Real(spec.base()?),
        })
    }

    fn cartan(&self, d: usize, m: &[i64]) -> CartanVector {
        match self {
            Gauge::Origin => integer_cartan(d, m),
            Gauge::Integer { h, h_inv } => integer_cartan(d, &int_mul(d, &int_mul(d, h_inv, m), h)),
            Gauge::Real(x) => {
                let g = GroupElement::from_integer(d, m).expect("unimodular");
                x.pull_back(&g).cartan().a.clone()
            }
        }
    }

    /// `σ₁(h_x)·σ₁(h_x⁻¹)`.
    fn distortion(&self) -> f64 {
        match self {
            Gauge::Origin => 1.0,
            Gauge::Integer { h, .. } => {
                let d = (h.len() as f64).sqrt() as usize;
                let a = integer_cartan(d, h);
                (a.0[0] - a.0[d - 1]).exp()
            }
            Gauge::Real(x) => {
                let a = &x.representative().cartan().a;
                (a.0[0] - a.0[a.dim() - 1]).exp()
            }
        }
    }
}

fn record(d: usize, gauge: &Gauge, m: Vec<i64>) -> ElementRecord {
    let cartan = gauge.cartan(d, &m);
    let (loxodromic, jordan) = jordan_of(d, &m);
    ElementRecord {
        norm: killing_norm_of(&cartan),
        wall_margin: wall_distance_of(&cartan),
        cartan,
        matrix: m,
        loxodromic,
        jordan,
    }
}

fn sort_records(v: &mut [ElementRecord]) {
    v.sort_by(|a, b| a.norm.total_cmp(&b.norm).then_with(|| a.matrix.cmp(&b.matrix)));
}

/// Largest first coordinate `y₁` over the domain.
pub fn max_top_exponent(domain: &Domain) -> f64 {
    let d = domain.d as f64;
    match &domain.kind {
        DomainKind::Ball => domain.t * ((d - 1.0) / (2.0 * d * d)).sqrt(),
        DomainKind::Parallelotope { edges } => {
            // y₁ is increasing along every coweight, so the far vertex wins
            let rs = crate::rootsys::RootSystem::cached(domain.d);
            rs.coweights().iter().zip(edges).map(|(w, e)| w.0[0] * domain.t * e).sum()
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EnumOptions {
    pub shards: usize,
    pub caps: FeasibilityCaps,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions { shards: 8, caps: FeasibilityCaps::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ShardInfo {
    pub index: usize,
    /// Inclusive key range: first entry (exact) or first letter (word ball).
    pub range: (i64, i64),
    pub records: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub version: u32,
    pub spec_hash: String,
    pub spec: LatticeSpec,
    pub domain: Domain,
    pub mode: String,
    pub complete: bool,
    pub word_radius: Option<usize>,
    pub shard_count: usize,
    pub shards: Vec<ShardInfo>,
}

#[derive(Clone, Debug)]
pub struct Enumeration {
    pub spec: LatticeSpec,
    pub domain: Domain,
    pub shards: Vec<Vec<ElementRecord>>,
    pub ranges: Vec<(i64, i64)>,
    pub complete: bool,
    pub word_radius: Option<usize>,
    pub candidates: f64,
}

impl Enumeration {
    pub fn iter(&self) -> impl Iterator<Item = &ElementRecord> {
        self.shards.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.shards.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All records in the canonical order `(‖a‖, entries)`.
    pub fn merged(&self) -> Vec<ElementRecord> {
        let mut v: Vec<ElementRecord> = self.iter().cloned().collect();
        sort_records(&mut v);
        v
    }

    /// Little-endian entries of [`Self::merged`], for byte comparisons.
    pub fn merged_bytes(&self) -> Vec<u8> {
        shard_bytes(&self.merged())
    }

    pub fn mode(&self) -> &'static str {
        if self.spec.is_exact() {
            "exact"
        } else {
            "word_ball"
        }
    }
}

fn shard_bytes(records: &[ElementRecord]) -> Vec<u8> {
    records.iter().flat_map(|r| r.matrix.iter().flat_map(|v| v.to_le_bytes())).collect()
}

fn split_range(lo: i64, hi: i64, n: usize) -> Vec<(i64, i64)> {
    let len = (hi - lo + 1) as usize;
    let n = n.clamp(1, len);
    let mut out = Vec::with_capacity(n);
    let mut start = lo;
    for k in 0..n {
        let size = len / n + usize::from(k < len % n);
        out.push((start, start + size as i64 - 1));
        start += size as i64;
    }
    out
}

/// Entry bound and candidate estimate for exact SL(2, Z) enumeration.
pub fn sl2_entry_bound(spec: &LatticeSpec, domain: &Domain) -> Result<(i64, f64)> {
    let gauge = Gauge::new(spec)?;
    let smax = max_top_exponent(domain);
    let bound = (gauge.distortion() * smax.exp() * (1.0 + 1e-12)).floor();
    Ok((bound as i64, (2.0 * bound + 1.0).powi(3)))
}

/// Enumerates `Γ ∩ D_t(x)` with the domain's margin or slab filter.
pub fn enumerate(spec: &LatticeSpec, domain: &Domain, opts: &EnumOptions) -> Result<Enumeration> {
    spec.validate()?;
    domain.validate()?;
    if domain.d != spec.d {
        return Err(WccError::Parameter(format!("domain is for d = {} but lattice has d = {}", domain.d, spec.d)));
    }
    let shard_ids: Vec<usize> = (0..opts.shards.max(1)).collect();
    let (shards, ranges, candidates, word_radius) = if spec.is_exact() {
        let (b, est) = sl2_entry_bound(spec, domain)?;
        if domain.t > opts.caps.sl2_max_t || est > opts.caps.max_candidates {
            return Err(WccError::Feasibility {
                reason: format!(
                    "exact SL(2,Z) enumeration at t = {} (cap t <= {}, entry bound {b})",
                    domain.t, opts.caps.sl2_max_t
                ),
                estimated: est,
            });
        }
        let ranges = split_range(-b, b, shard_ids.len());
        let shards = ranges.par_iter().map(|&(lo, hi)| sl2_shard(spec, domain, b, lo, hi)).collect::<Result<Vec<_>>>()?;
        (shards, ranges, est, None)
    } else {
        let (by_letter, radius, visited) = word_ball(spec, &opts.caps);
        let gauge = Gauge::new(spec)?;
        let letters = by_letter.len() as i64;
        let ranges = split_range(0, letters.max(1) - 1, shard_ids.len());
        let shards: Vec<Vec<ElementRecord>> = ranges
            .par_iter()
            .map(|&(lo, hi)| {
                let mut v: Vec<ElementRecord> = (lo..=hi)
                    .flat_map(|l| by_letter.get(l as usize).cloned().unwrap_or_default())
                    .map(|m| record(spec.d, &gauge, m))
                    .filter(|r| domain.contains(&r.cartan))
                    .collect();
                sort_records(&mut v);
                v
            })
            .collect();
        (shards, ranges, visited as f64, Some(radius))
    };
    Ok(Enumeration {
        spec: spec.clone(),
        domain: domain.clone(),
        shards,
        ranges,
        complete: spec.is_exact(),
        word_radius,
        candidates,
    })
}

fn sl2_shard(spec: &LatticeSpec, domain: &Domain, b: i64, lo: i64, hi: i64) -> Result<Vec<ElementRecord>> {
    let gauge = Gauge::new(spec)?;
    let mut out = Vec::new();
    let mut push = |m: [i64; 4]| {
        let r = record(2, &gauge, m.to_vec());
        if domain.contains(&r.cartan) {
            out.push(r);
        }
    };
    for a in lo..=hi {
        if a == 0 {
            // ad − bc = 1 forces bc = −1; d is free
            for (bb, cc) in [(1, -1), (-1, 1)] {
                for dd in -b..=b {
                    push([0, bb, cc, dd]);
                }
            }
            continue;
        }
        for bb in -b..=b {
            for cc in -b..=b {
                let num = 1 + bb * cc;
                if num % a == 0 {
                    let dd = num / a;
                    if dd.abs() <= b {
                        push([a, bb, cc, dd]);
                    }
                }
            }
        }
    }
    sort_records(&mut out);
    Ok(out)
}

/// Breadth-first word ball. Returns the elements grouped by the first
/// letter of a shortest word (identity under letter 0), the radius that
/// was completed, and the ball size.
fn word_ball(spec: &LatticeSpec, caps: &FeasibilityCaps) -> (Vec<Vec<Vec<i64>>>, usize, usize) {
    let d = spec.d;
    let base = match &spec.presentation {
        Presentation::FullInteger => LatticeSpec::elementary_generators(d),
        Presentation::Generated { generators } => generators.clone(),
    };
    let mut letters: Vec<Vec<i64>> = Vec::new();
    for g in base {
        for m in [int_adjugate(d, &g), g] {
            if !letters.contains(&m) {
                letters.push(m);
            }
        }
    }
    let id: Vec<i64> = (0..d * d).map(|k| i64::from(k % (d + 1) == 0)).collect();
    let mut seen: HashMap<Vec<i64>, usize> = HashMap::new();
    seen.insert(id.clone(), 0);
    let mut frontier: Vec<(Vec<i64>, usize)> = vec![(id, 0)];
    let mut radius = 0;
    while radius < caps.word_radius && !frontier.is_empty() {
        let mut next = Vec::new();
        let mut overflow = false;
        for (m, first) in &frontier {
            for (li, l) in letters.iter().enumerate() {
                let Some(p) = checked_mul(d, m, l) else { continue };
                if !seen.contains_key(&p) {
                    let tag = if radius == 0 { li } else { *first };
                    seen.insert(p.clone(), tag);
                    next.push((p, tag));
                }
            }
            if seen.len() > caps.max_ball {
                overflow = true;
                break;
            }
        }
        if overflow {
            // drop the partial sphere so the ball stays a ball
            for (m, _) in &next {
                seen.remove(m);
            }
            break;
        }
        frontier = next;
        radius += 1;
    }
    let mut by_letter = vec![Vec::new(); letters.len().max(1)];
    for (m, l) in seen {
        by_letter[l].push(m);
    }
    for v in &mut by_letter {
        v.sort();
    }
    let size = by_letter.iter().map(Vec::len).sum();
    (by_letter, radius, size)
}

fn checked_mul(d: usize, a: &[i64], b: &[i64]) -> Option<Vec<i64>> {
    let mut out = vec![0i64; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut s: i64 = 0;
            for k in 0..d {
                s = s.checked_add(a[i * d + k].checked_mul(b[k * d + j])?)?;
            }
            out[i * d + j] = s;
        }
    }
    Some(out)
}

/// Hash of everything that determines the enumeration content.
pub fn spec_hash(spec: &LatticeSpec, domain: &Domain, caps: &FeasibilityCaps) -> String {
    let doc = serde_json::json!({
        "version": CACHE_VERSION,
        "spec": spec,
        "domain": domain,
        "word_radius": if spec.is_exact() { None } else { Some(caps.word_radius) },
        "max_ball": if spec.is_exact() { None } else { Some(caps.max_ball) },
    });
    hex::encode(Sha256::digest(doc.to_string().as_bytes()))
}

/// Default cache root: `$WCC_CACHE`, else `./wcc-cache`.
pub fn default_cache_root() -> PathBuf {
    std::env::var_os(CACHE_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("wcc-cache"))
}

fn shard_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("shard_{i:05}.bin"))
}

/// Enumerates into `dir`, reusing any shard already present with a
/// matching manifest and checksum.
pub fn enumerate_cached(spec: &LatticeSpec, domain: &Domain, opts: &EnumOptions, dir: &Path) -> Result<Enumeration> {
    let hash = spec_hash(spec, domain, &opts.caps);
    if let Ok(m) = read_manifest(dir) {
        if m.spec_hash == hash && m.shard_count == opts.shards.max(1) && m.shards.len() == m.shard_count {
            if let Ok(e) = load_cache(dir) {
                return Ok(e);
            }
        }
    }
    fs::create_dir_all(dir)?;
    let e = enumerate(spec, domain, opts)?;
    let mut shards = Vec::new();
    for (i, (recs, range)) in e.shards.iter().zip(&e.ranges).enumerate() {
        let bytes = shard_bytes(recs);
        fs::write(shard_path(dir, i), &bytes)?;
        shards.push(ShardInfo {
            index: i,
            range: *range,
            records: recs.len(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
    }
    let manifest = Manifest {
        version: CACHE_VERSION,
        spec_hash: hash,
        spec: spec.clone(),
        domain: domain.clone(),
        mode: e.mode().into(),
        complete: e.complete,
        word_radius: e.word_radius,
        shard_count: e.shards.len(),
        shards,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(e)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(dir.join("manifest.json"))
        .map_err(|e| WccError::Cache(format!("cannot read manifest in {}: {e}", dir.display())))?;
    let m: Manifest = serde_json::from_str(&text)?;
    if m.version != CACHE_VERSION {
        return Err(WccError::Cache(format!("cache version {} is not {}", m.version, CACHE_VERSION)));
    }
    Ok(m)
}

/// Loads a cache, verifying each shard's length and checksum.
pub fn load_cache(dir: &Path) -> Result<Enumeration> {
    let m = read_manifest(dir)?;
    let d = m.spec.d;
    let gauge = Gauge::new(&m.spec)?;
    let row = d * d * 8;
    let mut shards = Vec::new();
    for info in &m.shards {
        let bytes = fs::read(shard_path(dir, info.index))
            .map_err(|e| WccError::Cache(format!("missing shard {}: {e}", info.index)))?;
        if bytes.len() != info.records * row {
            return Err(WccError::Cache(format!(
                "shard {} has {} bytes, expected {}",
                info.index,
                bytes.len(),
                info.records * row
            )));
        }
        if hex::encode(Sha256::digest(&bytes)) != info.sha256 {
            return Err(WccError::Cache(format!("shard {} fails its checksum", info.index)));
        }
        let recs: Vec<ElementRecord> = bytes
            .chunks_exact(row)
            .map(|c| {
                let m: Vec<i64> = c.chunks_exact(8).map(|b| i64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
                record(d, &gauge, m)
            })
            .collect();
        shards.push(recs);
    }
    let complete = m.complete && m.shards.len() == m.shard_count;
    Ok(Enumeration {
        ranges: m.shards.iter().map(|s| s.range).collect(),
        spec: m.spec,
        domain: m.domain,
        shards,
        complete,
        word_radius: m.word_radius,
        candidates: f64::NAN,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CensusRow {
    pub t: f64,
    pub total: usize,
    pub regular: usize,
    /// `(ε, |Γ ∩ D_t^{εt}|)`.
    pub slabs: Vec<(f64, usize)>,
    pub volume_log: f64,
    pub total_ratio: f64,
    pub regular_ratio: f64,
    pub slab_ratios: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CensusTable {
    pub margin: f64,
    pub rows: Vec<CensusRow>,
    /// `(ε, slope of log(slab count / vol) against log vol)`.
    pub slab_decay: Vec<(f64, f64)>,
    pub complete: bool,
    pub mode: String,
}

/// Counts of `Γ ∩ D_t`, its regular part and its slabs over a `t` grid,
/// using a single enumeration at the largest `t`.
pub fn census_counts(e: &Enumeration, t_grid: &[f64], eps: &[f64], margin: f64) -> Result<CensusTable> {
    if e.spec.is_exact() && !e.complete {
        return Err(WccError::Completeness("exact enumeration is missing shards".into()));
    }
    let base = Domain { regular_margin: None, slab: None, ..e.domain.clone() };
    if e.domain.regular_margin.is_some() || e.domain.slab.is_some() {
        return Err(WccError::Completeness("census needs an unfiltered enumeration".into()));
    }
    if let Some(&t) = t_grid.iter().find(|&&t| t > e.domain.t) {
        return Err(WccError::Completeness(format!("t = {t} exceeds the enumerated t = {}", e.domain.t)));
    }
    let mut rows = Vec::new();
    for &t in t_grid {
        let dom = base.with_t(t);
        let inside: Vec<&ElementRecord> = e.iter().filter(|r| dom.contains(&r.cartan)).collect();
        let total = inside.len();
        let regular = inside.iter().filter(|r| r.wall_margin > margin).count();
        let slabs: Vec<(f64, usize)> =
            eps.iter().map(|&ep| (ep, inside.iter().filter(|r| r.wall_margin <= ep * t).count())).collect();
        let volume_log = crate::volume::volume(&dom)?.value_log;
        let v = volume_log.exp();
        rows.push(CensusRow {
            t,
            total,
            regular,
            slab_ratios: slabs.iter().map(|s| s.1 as f64 / v).collect(),
            slabs,
            volume_log,
            total_ratio: total as f64 / v,
            regular_ratio: regular as f64 / v,
        });
    }
    let slab_decay = eps
        .iter()
        .enumerate()
        .map(|(k, &ep)| {
            let pts: Vec<(f64, f64)> =
                rows.iter().filter(|r| r.slabs[k].1 > 0).map(|r| (r.volume_log, r.slab_ratios[k].ln())).collect();
            let slope = if pts.len() >= 2 {
                let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
                crate::stats::linear_fit(&xs, &ys).0
            } else {
                f64::NAN
            };
            (ep, slope)
        })
        .collect();
    Ok(CensusTable { margin, rows, slab_decay, complete: e.complete, mode: e.mode().into() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_ball_holds_the_integer_rotations() {
        let e = enumerate(&LatticeSpec::sl2(), &Domain::ball(2, 1e-9), &EnumOptions::default()).unwrap();
        let mut got: Vec<Vec<i64>> = e.iter().map(|r| r.matrix.clone()).collect();
        got.sort();
        assert_eq!(got, vec![vec![-1, 0, 0, -1], vec![0, -1, 1, 0], vec![0, 1, -1, 0], vec![1, 0, 0, 1]]);
    }

    #[test]
    fn records_match_svd() {
        let e = enumerate(&LatticeSpec::sl2(), &Domain::ball(2, 5.0), &EnumOptions::default()).unwrap();
        for r in e.iter() {
            let g = r.element();
            let a = &g.cartan().a;
            assert!((a.0[0] - r.cartan.0[0]).abs() < 1e-9);
            assert!(r.norm <= 5.0);
        }
    }

    #[test]
    fn margin_filter_is_a_subset() {
        let opts = EnumOptions::default();
        let all = enumerate(&LatticeSpec::sl2(), &Domain::ball(2, 6.0), &opts).unwrap().merged();
        let reg = enumerate(&LatticeSpec::sl2(), &Domain::ball(2, 6.0).with_margin(2.0), &opts).unwrap().merged();
        assert!(!reg.is_empty() && reg.len() < all.len());
        assert!(reg.iter().all(|r| r.wall_margin > 2.0 && all.contains(r)));
    }

    #[test]
    fn infeasible_t_is_rejected() {
        let err = enumerate(&LatticeSpec::sl2(), &Domain::ball(2, 40.0), &EnumOptions::default()).unwrap_err();
        assert!(matches!(err, WccError::Feasibility { .. }));
    }

    #[test]
    fn word_ball_of_sl2_is_inside_the_exact_census() {
        let caps = FeasibilityCaps { word_radius: 5, ..Default::default() };
        let opts = EnumOptions { shards: 3, caps };
        let dom = Domain::ball(2, 4.0);
        let spec = LatticeSpec::generated(2, vec![vec![1, 1, 0, 1], vec![1, 0, 1, 1]]);
        let w = enumerate(&spec, &dom, &opts).unwrap();
        assert!(!w.complete && w.word_radius == Some(5));
        let exact = enumerate(&LatticeSpec::sl2(), &dom, &opts).unwrap().merged();
        let words = w.merged();
        assert!(!words.is_empty());
        assert!(words.iter().all(|r| exact.iter().any(|s| s.matrix == r.matrix)));
    }

    #[test]
    fn cache_roundtrip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let opts = EnumOptions { shards: 4, ..Default::default() };
        let dom = Domain::ball(2, 5.0);
        let e = enumerate_cached(&LatticeSpec::sl2(), &dom, &opts, dir.path()).unwrap();
        let back = load_cache(dir.path()).unwrap();
        assert_eq!(e.merged(), back.merged());
        assert!(back.complete);
        let p = shard_path(dir.path(), 1);
        let mut bytes = fs::read(&p).unwrap();
        bytes[0] ^= 1;
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_cache(dir.path()), Err(WccError::Cache(_))));
        bytes.truncate(bytes.len() - 3);
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_cache(dir.path()), Err(WccError::Cache(_))));
        // a corrupt cache is rebuilt on the next cached run
        let again = enumerate_cached(&LatticeSpec::sl2(), &dom, &opts, dir.path()).unwrap();
        assert_eq!(again.merged(), e.merged());
        assert!(load_cache(dir.path()).is_ok());
    }

    #[test]
    fn census_counts_are_monotone() {
        let e = enumerate(&LatticeSpec::sl2(), &Domain::ball(2, 8.0), &EnumOptions::default()).unwrap();
        let c = census_counts(&e, &[4.0, 5.0, 6.0, 7.0, 8.0], &[0.1], 0.5).unwrap();
        assert!(c.rows.windows(2).all(|w| w[1].total >= w[0].total && w[1].regular >= w[0].regular));
        assert_eq!(c.rows.last().unwrap().total, e.len());
        assert!(census_counts(&e, &[9.0], &[0.1], 0.5).is_err());
    }
}
