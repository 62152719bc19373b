//! Statistics over lattice censuses: angular equidistribution, conjugacy
//! classes and periodic tori, conjugacy growth and Jordan–Cartan gaps.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, WccError};
use crate::lattice::{integer_cartan, ElementRecord, Enumeration};
use crate::loxodromy::jordan_cartan_gap;
use crate::projections::{angular_points, int_adjugate, int_mul};
use crate::rootsys::{killing_norm_of, wall_distance_of, CartanVector, RootSystem};
use crate::sampling;
use crate::stats;
use crate::volume::{self, Domain};

/// Integral binary quadratic form `A x² + B xy + C y²`.
pub type Form = (i64, i64, i64);

fn isqrt(n: i64) -> i64 {
    let mut s = (n as f64).sqrt() as i64;
    while s * s > n {
        s -= 1;
    }
    while (s + 1) * (s + 1) <= n {
        s += 1;
    }
    s
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Reduced in Gauss's sense, for a non-square discriminant with `s = ⌊√D⌋`.
fn is_reduced(f: Form, s: i64) -> bool {
    let (a, b, _) = f;
    0 < b && b <= s && 2 * a.abs() + b > s && 2 * a.abs() <= s + b
}

/// One step of the reduction operator `(A, B, C) ↦ (C, B', C')`, a proper
/// equivalence.
fn rho(f: Form, disc: i64, s: i64) -> Form {
    let (_, b, c) = f;
    let c2 = 2 * c.abs();
    let r = (-b).rem_euclid(c2);
    let bp = if c.abs() > s {
        if r > c.abs() {
            r - c2
        } else {
            r
        }
    } else {
        s - (s - r).rem_euclid(c2)
    };
    (c, bp, (bp * bp - disc) / (4 * c))
}

fn reduce(mut f: Form, disc: i64, s: i64) -> Form {
    while !is_reduced(f, s) {
        f = rho(f, disc, s);
    }
    f
}

/// The cycle of reduced forms through a reduced form.
fn cycle(f: Form, disc: i64, s: i64) -> Vec<Form> {
    let mut out = vec![f];
    let mut g = rho(f, disc, s);
    while g != f {
        out.push(g);
        g = rho(g, disc, s);
    }
    out
}

/// Smallest form in the reduction cycle of `f`: a complete invariant of the
/// proper equivalence class.
pub fn canonical_form(f: Form) -> Form {
    let disc = f.1 * f.1 - 4 * f.0 * f.2;
    let s = isqrt(disc);
    let r = reduce(f, disc, s);
    cycle(r, disc, s).into_iter().min().expect("cycles are non-empty")
}

/// Fixed-point form `c x² + (d − a) xy − b y²` of `[[a, b], [c, d]]`.
pub fn fixed_point_form(m: &[i64]) -> Form {
    (m[2], m[3] - m[0], -m[1])
}

/// `[[(t − B)/2, −C], [A, (t + B)/2]]`, the element with trace `t` and
/// fixed-point form `(A, B, C)`.
pub fn element_from_form(t: i64, f: Form) -> [i64; 4] {
    [(t - f.1) / 2, -f.2, f.0, (t + f.1) / 2]
}

/// Conjugacy-class identifier of a hyperbolic element of SL(2, Z).
pub fn class_id(m: &[i64]) -> Result<String> {
    let tr = m[0] + m[3];
    if tr.abs() <= 2 {
        return Err(WccError::Precondition(format!("trace {tr} is not hyperbolic")));
    }
    let (a, b, c) = canonical_form(fixed_point_form(m));
    Ok(format!("{tr}:{a},{b},{c}"))
}

#[derive(Clone, Debug, Serialize)]
pub struct TorusRecord {
    pub class_id: String,
    pub trace: i64,
    pub form: Form,
    pub representative: [i64; 4],
    pub primitive: bool,
    /// `k` with `γ = γ₀^k`.
    pub power: u32,
    pub primitive_id: String,
    pub primitive_trace: i64,
    pub jordan: CartanVector,
    /// `‖λ(γ)‖`.
    pub norm: f64,
    /// `‖λ(γ₀)‖`.
    pub period_volume: f64,
    pub multiplicity_in_domain: Option<u64>,
}

fn sl2_lambda(trace: i64) -> CartanVector {
    let t = trace.abs() as f64;
    let l = ((t + (t * t - 4.0).sqrt()) / 2.0).ln();
    CartanVector(vec![l, -l])
}

fn is_square(n: i64) -> Option<i64> {
    let s = isqrt(n);
    (s * s == n).then_some(s)
}

/// Hyperbolic conjugacy classes of SL(2, Z) with `3 ≤ trace ≤ bound`.
///
/// Negating an element gives a bijection onto the classes of negative trace,
/// so these are also the hyperbolic classes of PSL(2, Z).
pub fn conjugacy_classes_sl2(trace_bound: i64) -> Result<Vec<TorusRecord>> {
    if trace_bound < 3 {
        return Err(WccError::Parameter(format!("trace bound must be at least 3, got {trace_bound}")));
    }
    let per_trace: Vec<Vec<TorusRecord>> = (3..=trace_bound).into_par_iter().map(classes_of_trace).collect();
    Ok(per_trace.into_iter().flatten().collect())
}

fn classes_of_trace(t: i64) -> Vec<TorusRecord> {
    let disc = t * t - 4;
    let s = isqrt(disc);
    let mut reduced = Vec::new();
    for b in 1..=s {
        if (disc - b * b) % 4 != 0 {
            continue;
        }
        let n = (disc - b * b) / 4;
        // reduced forms have 2|A| ≤ s + B ≤ 2s
        for a in 1..=n.min(s) {
            if n % a != 0 {
                continue;
            }
            for f in [(a, b, -n / a), (-a, b, n / a)] {
                if is_reduced(f, s) {
                    reduced.push(f);
                }
            }
        }
    }
    reduced.sort();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for &f in &reduced {
        if seen.contains(&f) {
            continue;
        }
        let cyc = cycle(f, disc, s);
        seen.extend(cyc.iter().copied());
        let form = *cyc.iter().min().expect("non-empty");
        out.push(torus_record(t, form));
    }
    out
}

fn torus_record(t: i64, form: Form) -> TorusRecord {
    let f = gcd(gcd(form.0, form.1), form.2);
    let delta = (t * t - 4) / (f * f);
    // fundamental solution of T² − ΔU² = 4; γ itself is (t, f)
    let u1 = (1..=f).find(|&u| is_square(delta * u * u + 4).is_some()).expect("(t, f) is a solution");
    let t1 = is_square(delta * u1 * u1 + 4).expect("square");
    let (mut tk, mut uk, mut k) = (t1, u1, 1u32);
    while uk < f {
        let (tn, un) = ((t1 * tk + delta * u1 * uk) / 2, (t1 * uk + u1 * tk) / 2);
        tk = tn;
        uk = un;
        k += 1;
    }
    debug_assert!(tk == t && uk == f);
    let prim_form = canonical_form((form.0 / (f / u1), form.1 / (f / u1), form.2 / (f / u1)));
    let rs = RootSystem::cached(2);
    let jordan = sl2_lambda(t);
    TorusRecord {
        class_id: format!("{t}:{},{},{}", form.0, form.1, form.2),
        trace: t,
        form,
        representative: element_from_form(t, form),
        primitive: k == 1,
        power: k,
        primitive_id: format!("{t1}:{},{},{}", prim_form.0, prim_form.1, prim_form.2),
        primitive_trace: t1,
        norm: rs.norm(&jordan),
        jordan,
        period_volume: rs.norm(&sl2_lambda(t1)),
        multiplicity_in_domain: None,
    }
}

/// Largest trace with `‖λ‖ ≤ T` in SL(2, R).
pub fn trace_bound_for(t_max: f64) -> i64 {
    // ‖λ‖ = 2√2·arccosh(tr/2)
    (2.0 * (t_max / (2.0 * std::f64::consts::SQRT_2)).cosh() + 1e-9).floor() as i64
}

#[derive(Clone, Debug, Serialize)]
pub struct TorusRow {
    pub t: f64,
    pub classes: usize,
    pub primitive_classes: usize,
    /// `Σ_{[γ]} L_{[γ]}` over classes with `‖λ‖ ≤ T`.
    pub class_side: f64,
    /// `Σ_F |Λ(F) ∩ 𝔇_T|·vol(F)` over primitive tori.
    pub torus_side: f64,
    /// Per-torus period counts agree on both sides.
    pub identity_exact: bool,
    pub volume_log: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TorusReport {
    pub rows: Vec<TorusRow>,
    pub identity_exact: bool,
    /// Relative change of the ratio over the last two steps.
    pub stabilization: f64,
    pub monotone: bool,
    pub exhaustive: bool,
}

/// Weighted torus sums over a `T` sweep for SL(2, Z), counting by `‖λ‖`.
pub fn torus_census_sl2(t_grid: &[f64]) -> Result<TorusReport> {
    let t_max = t_grid.iter().copied().fold(0.0, f64::max);
    let classes = conjugacy_classes_sl2(trace_bound_for(t_max).max(3))?;
    let mut rows = Vec::new();
    for &t in t_grid {
        let inside: Vec<&TorusRecord> = classes.iter().filter(|c| c.norm <= t).collect();
        let mut by_prim: BTreeMap<&str, (u64, f64)> = BTreeMap::new();
        for c in &inside {
            by_prim.entry(c.primitive_id.as_str()).or_insert((0, c.period_volume)).0 += 1;
        }
        let prims: Vec<&TorusRecord> = classes.iter().filter(|c| c.primitive && c.norm <= t).collect();
        // both sides are accumulated torus by torus, so only the period
        // counts can differ
        let mut exact = prims.len() == by_prim.len();
        let mut torus_side = 0.0;
        let mut class_side = 0.0;
        let mut period_total = 0u64;
        for p in &prims {
            let mult = (t / p.period_volume).floor() as u64;
            let from_classes = by_prim.get(p.class_id.as_str()).map_or(0, |v| v.0);
            exact &= from_classes == mult;
            period_total += mult;
            torus_side += mult as f64 * p.period_volume;
            class_side += from_classes as f64 * p.period_volume;
        }
        exact &= period_total == inside.len() as u64;
        let volume_log = volume::ball_volume(2, t)?.value_log;
        rows.push(TorusRow {
            t,
            classes: inside.len(),
            primitive_classes: prims.len(),
            class_side,
            torus_side,
            identity_exact: exact && class_side == torus_side,
            volume_log,
            ratio: torus_side / volume_log.exp(),
        });
    }
    let stabilization = match rows.as_slice() {
        [.., a, b] => (b.ratio / a.ratio - 1.0).abs(),
        _ => f64::NAN,
    };
    Ok(TorusReport {
        identity_exact: rows.iter().all(|r| r.identity_exact),
        monotone: rows.windows(2).all(|w| w[1].torus_side >= w[0].torus_side),
        stabilization,
        rows,
        exhaustive: true,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SampledTorus {
    /// `(trace, second coefficient)` of the characteristic polynomial.
    pub invariant: (i64, i64),
    pub representative: Vec<i64>,
    pub jordan: CartanVector,
    pub norm: f64,
    pub balanced: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SampledTorusReport {
    pub t: f64,
    pub kappa: f64,
    pub threshold: f64,
    pub tori: Vec<SampledTorus>,
    pub balanced: usize,
    pub unbalanced: usize,
    pub exhaustive: bool,
}

/// Jordan data of loxodromic census elements grouped by characteristic
/// polynomial, split at wall distance `T/κ`.
pub fn torus_census_sample(e: &Enumeration, t: f64) -> Result<SampledTorusReport> {
    let d = e.spec.d;
    let rs = RootSystem::cached(d);
    let kappa = rs.kappa_balance();
    let threshold = t / kappa;
    let mut groups: BTreeMap<(i64, i64), &ElementRecord> = BTreeMap::new();
    for r in e.iter().filter(|r| r.loxodromic) {
        let Some(j) = &r.jordan else { continue };
        if killing_norm_of(j) > t {
            continue;
        }
        let m = &r.matrix;
        let tr: i64 = (0..d).map(|i| m[i * d + i]).sum();
        let c1: i64 = if d == 3 {
            let adj = int_adjugate(3, m);
            (0..3).map(|i| adj[i * 3 + i]).sum()
        } else {
            1
        };
        groups.entry((tr, c1)).or_insert(r);
    }
    let tori: Vec<SampledTorus> = groups
        .into_iter()
        .map(|(inv, r)| {
            let j = r.jordan.clone().expect("loxodromic");
            SampledTorus {
                invariant: inv,
                representative: r.matrix.clone(),
                norm: killing_norm_of(&j),
                balanced: wall_distance_of(&j) > threshold,
                jordan: j,
            }
        })
        .collect();
    let balanced = tori.iter().filter(|x| x.balanced).count();
    Ok(SampledTorusReport {
        t,
        kappa,
        threshold,
        unbalanced: tori.len() - balanced,
        balanced,
        tori,
        exhaustive: e.complete,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthRow {
    pub t: f64,
    pub count: usize,
    /// `e^{δ₀T}/T^{(r+1)/2}`.
    pub model: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub rows: Vec<GrowthRow>,
    pub delta0: f64,
    /// Slope of `log count + ((r+1)/2)·log T` against `T`.
    pub rate: f64,
    pub rate_relative_error: f64,
    /// Slope of `log count − δ₀T` against `log T`, with a 95% half-width.
    pub poly_exponent: f64,
    pub poly_exponent_ci: f64,
    pub monotone: bool,
}

/// Growth of `|[Γ](T)|` from a list of Jordan norms.
pub fn conjugacy_growth(norms: &[f64], d: usize, t_grid: &[f64]) -> Result<GrowthReport> {
    let rs = RootSystem::cached(d);
    let r = rs.rank() as f64;
    let delta0 = rs.delta0();
    let mut sorted = norms.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rows: Vec<GrowthRow> = t_grid
        .iter()
        .map(|&t| {
            let count = sorted.partition_point(|&n| n <= t);
            let model = (delta0 * t - 0.5 * (r + 1.0) * t.ln()).exp();
            GrowthRow { t, count, model, ratio: count as f64 / model }
        })
        .collect();
    let pts: Vec<&GrowthRow> = rows.iter().filter(|r| r.count > 0).collect();
    if pts.len() < 3 {
        return Err(WccError::Parameter("need at least three non-empty T values".into()));
    }
    let ts: Vec<f64> = pts.iter().map(|p| p.t).collect();
    let corrected: Vec<f64> = pts.iter().map(|p| (p.count as f64).ln() + 0.5 * (r + 1.0) * p.t.ln()).collect();
    let (rate, _) = stats::linear_fit(&ts, &corrected);
    let lx: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| (p.count as f64).ln() - delta0 * p.t).collect();
    let (p, b) = stats::linear_fit(&lx, &ly);
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sse: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - p * x - b).powi(2)).sum();
    let se = (sse / (n - 2.0) / sxx).sqrt();
    Ok(GrowthReport {
        monotone: rows.windows(2).all(|w| w[1].count >= w[0].count),
        rows,
        delta0,
        rate,
        rate_relative_error: (rate - delta0).abs() / delta0,
        poly_exponent: p,
        poly_exponent_ci: 1.96 * se,
    })
}

/// Every element of the word ball of the given radius, grouped by sphere.
pub fn word_spheres(d: usize, generators: &[Vec<i64>], radius: usize) -> Vec<Vec<Vec<i64>>> {
    let mut letters: Vec<Vec<i64>> = Vec::new();
    for g in generators {
        for m in [g.clone(), int_adjugate(d, g)] {
            if !letters.contains(&m) {
                letters.push(m);
            }
        }
    }
    let id: Vec<i64> = (0..d * d).map(|k| i64::from(k % (d + 1) == 0)).collect();
    let mut seen: HashSet<Vec<i64>> = HashSet::from([id.clone()]);
    let mut spheres = vec![vec![id]];
    for _ in 0..radius {
        let mut next = Vec::new();
        for m in spheres.last().expect("non-empty") {
            for l in &letters {
                let p = int_mul(d, m, l);
                if seen.insert(p.clone()) {
                    next.push(p);
                }
            }
        }
        next.sort();
        spheres.push(next);
    }
    spheres
}

/// `S = [[0, −1], [1, 0]]` and `T = [[1, 1], [0, 1]]`.
pub fn sl2_generators() -> Vec<Vec<i64>> {
    vec![vec![0, -1, 1, 0], vec![1, 1, 0, 1]]
}

#[derive(Clone, Debug, Serialize)]
pub struct GapRow {
    pub label: String,
    pub matrix: Vec<i64>,
    pub lambda_norm: f64,
    /// Smallest `‖λ − a_o(βγβ⁻¹)‖` over the ball of each radius.
    pub gaps: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct JordanCartanReport {
    pub radii: Vec<usize>,
    pub rows: Vec<GapRow>,
    /// Empirical `C_Γ` per radius.
    pub c_gamma: Vec<f64>,
    pub non_increasing: bool,
    pub finite: bool,
}

/// Minimises the Jordan–Cartan gap over conjugators in growing word balls.
pub fn jordan_cartan_survey(
    d: usize,
    elements: &[(String, Vec<i64>)],
    generators: &[Vec<i64>],
    radius: usize,
) -> Result<JordanCartanReport> {
    let spheres = word_spheres(d, generators, radius);
    let inverses: Vec<Vec<Vec<i64>>> =
        spheres.iter().map(|s| s.iter().map(|b| int_adjugate(d, b)).collect()).collect();
    let rows: Vec<GapRow> = elements
        .par_iter()
        .map(|(label, m)| {
            let g = crate::projections::GroupElement::from_integer(d, m)?;
            let lambda = if d == 2 { sl2_lambda(m[0] + m[3]) } else { g.jordan().lambda.clone() };
            let mut best = f64::INFINITY;
            let mut gaps = Vec::with_capacity(spheres.len());
            for (sphere, inv) in spheres.iter().zip(&inverses) {
                for (b, bi) in sphere.iter().zip(inv) {
                    let c = int_mul(d, &int_mul(d, b, m), bi);
                    let a = integer_cartan(d, &c);
                    best = best.min(killing_norm_of(&(&lambda - &a)));
                }
                gaps.push(best);
            }
            Ok(GapRow { label: label.clone(), matrix: m.clone(), lambda_norm: killing_norm_of(&lambda), gaps })
        })
        .collect::<Result<Vec<_>>>()?;
    let c_gamma: Vec<f64> =
        (0..=radius).map(|k| rows.iter().map(|r| r.gaps[k]).fold(0.0, f64::max)).collect();
    Ok(JordanCartanReport {
        radii: (0..=radius).collect(),
        non_increasing: c_gamma.windows(2).all(|w| w[1] <= w[0]),
        finite: c_gamma.iter().all(|c| c.is_finite()),
        c_gamma,
        rows,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FlatBoundReport {
    pub loxodromic: usize,
    pub holds: usize,
    pub failures: Vec<Vec<i64>>,
    /// Largest `gap / (2·flat distance)`.
    pub worst_ratio: f64,
}

/// Checks `‖λ(γ) − a_x(γ)‖ ≤ 2·d_X(x, flat(γ⁺, γ⁻))` on every loxodromic record.
pub fn flat_bound_survey(e: &Enumeration) -> Result<FlatBoundReport> {
    let x = e.spec.base()?;
    let lox: Vec<&ElementRecord> = e.iter().filter(|r| r.loxodromic).collect();
    let results = lox
        .par_iter()
        .map(|r| Ok((r.matrix.clone(), jordan_cartan_gap(&r.element(), &x)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for (m, g) in &results {
        if !g.holds {
            failures.push(m.clone());
        }
        if g.flat_distance > 0.0 {
            worst = worst.max(g.gap / (2.0 * g.flat_distance));
        }
    }
    Ok(FlatBoundReport { loxodromic: lox.len(), holds: lox.len() - failures.len(), failures, worst_ratio: worst })
}

/// Coordinate in `[0, 1)` that is uniform under the K-invariant measure:
/// the angle of the line over π for d = 2, `|x₁|` of the line for d = 3.
pub fn flag_coordinate(xi: &crate::flagmetric::Flag) -> f64 {
    let v = xi.frame().column(0).clone_owned();
    if v.len() == 2 {
        v[1].atan2(v[0]).rem_euclid(std::f64::consts::PI) / std::f64::consts::PI
    } else {
        v[0].abs() / v.norm()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AngularReport {
    pub t: f64,
    pub margin: f64,
    pub regular: usize,
    /// `|Γ ∩ D_t^{reg}| / vol(D_t)`, the empirical measure of ψ = 1.
    pub normalized_count: f64,
    pub ks_plus: f64,
    pub ks_minus: f64,
    pub ks: f64,
    pub ks_critical_05: f64,
    /// KS distance of the reference samples to uniform.
    pub reference_ks: f64,
    pub bins: usize,
    /// `(1/vol(D_t))·count` per `(γ⁺, γ⁻)` bin, row-major.
    pub empirical: Vec<f64>,
    /// Reference bin frequencies of `μ_x ⊗ μ_x`.
    pub reference: Vec<f64>,
    pub max_bin_discrepancy: f64,
}

/// Angular points of the regular census elements against `μ_x ⊗ μ_x`.
pub fn angular_statistics(
    e: &Enumeration,
    t: f64,
    margin: f64,
    bins: usize,
    reference_samples: usize,
    seed: u64,
) -> Result<AngularReport> {
    if !(margin > 0.0) {
        return Err(WccError::Parameter("angular statistics need a positive regular margin".into()));
    }
    if t > e.domain.t {
        return Err(WccError::Completeness(format!("t = {t} exceeds the enumerated t = {}", e.domain.t)));
    }
    let d = e.spec.d;
    let x = e.spec.base()?;
    let dom = Domain { regular_margin: None, slab: None, ..e.domain.clone() }.with_t(t);
    let recs: Vec<&ElementRecord> = e.iter().filter(|r| r.wall_margin > margin && dom.contains(&r.cartan)).collect();
    let coords: Vec<(f64, f64)> = recs
        .par_iter()
        .map(|r| {
            let (p, m) = angular_points(&r.element(), &x, margin)?;
            Ok((flag_coordinate(&x.pull_back_flag(&p)), flag_coordinate(&x.pull_back_flag(&m))))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = coords.len();
    let plus: Vec<f64> = coords.iter().map(|c| c.0).collect();
    let minus: Vec<f64> = coords.iter().map(|c| c.1).collect();
    let uniform = |u: f64| u.clamp(0.0, 1.0);
    let (ks_plus, ks_minus) =
        if n == 0 { (1.0, 1.0) } else { (stats::ks_statistic(&plus, uniform), stats::ks_statistic(&minus, uniform)) };

    let mut rng = sampling::rng(seed);
    let mut ref_plus = Vec::with_capacity(reference_samples);
    let mut reference = vec![0.0; bins * bins];
    for _ in 0..reference_samples {
        let a = flag_coordinate(&sampling::uniform_flag(&mut rng, d));
        let b = flag_coordinate(&sampling::uniform_flag(&mut rng, d));
        reference[bin(a, bins) * bins + bin(b, bins)] += 1.0 / reference_samples as f64;
        ref_plus.push(a);
    }
    let reference_ks = if reference_samples == 0 { f64::NAN } else { stats::ks_statistic(&ref_plus, uniform) };

    let vol = volume::volume(&dom)?.value;
    let mut empirical = vec![0.0; bins * bins];
    for &(a, b) in &coords {
        empirical[bin(a, bins) * bins + bin(b, bins)] += 1.0 / vol;
    }
    let normalized_count = n as f64 / vol;
    let max_bin_discrepancy = if n == 0 || reference_samples == 0 {
        f64::NAN
    } else {
        empirical.iter().zip(&reference).map(|(e, r)| (e / normalized_count - r).abs()).fold(0.0, f64::max)
    };
    Ok(AngularReport {
        t,
        margin,
        regular: n,
        normalized_count,
        ks_plus,
        ks_minus,
        ks: ks_plus.max(ks_minus),
        ks_critical_05: if n > 0 { stats::ks_critical(n, 0.05) } else { f64::NAN },
        reference_ks,
        bins,
        empirical,
        reference,
        max_bin_discrepancy,
    })
}

fn bin(u: f64, bins: usize) -> usize {
    ((u * bins as f64) as usize).min(bins - 1)
}

#[derive(Clone, Debug, Serialize)]
pub struct AngularSweep {
    pub rows: Vec<AngularReport>,
    /// `−slope` of `log KS` against `log vol(D_t)`.
    pub kappa: f64,
    pub non_increasing_top3: bool,
}

pub fn angular_sweep(e: &Enumeration, t_grid: &[f64], margin: f64, seed: u64) -> Result<AngularSweep> {
    let rows = t_grid.iter().map(|&t| angular_statistics(e, t, margin, 8, 0, seed)).collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.regular > 0 && r.ks > 0.0)
        .map(|r| ((r.regular as f64 / r.normalized_count).ln(), r.ks.ln()))
        .collect();
    let kappa = if pts.len() >= 2 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        -stats::linear_fit(&xs, &ys).0
    } else {
        f64::NAN
    };
    let k = rows.len();
    let non_increasing_top3 = k >= 3 && rows[k - 2].ks <= rows[k - 3].ks && rows[k - 1].ks <= rows[k - 2].ks;
    Ok(AngularSweep { rows, kappa, non_increasing_top3 })
}
