//! Projective contraction and the geometric loxodromy certificate.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::Serialize;

use crate::error::{Result, WccError};
use crate::flagmetric::{
    self, dist_d, dist_delta, fixed_points, flat_distance, gromov_product, hopf, hopf_distance, mat_rows, Flag,
    TransversePair,
};
use crate::linalg;
use crate::projections::{angular_points, cartan_at, iwasawa_cocycle, BasePoint, GroupElement, TAU_LOX};
use crate::rootsys::{killing_norm_of, wall_distance_of, CartanVector, RootSystem};
use crate::sampling::{self, near_identity, random_element, uniform_flag};

/// Safety factor applied to the wall-root comparison constant in `t₀`.
pub const DEFAULT_T0_FACTOR: f64 = 1.05;

/// Seed used for every constant fit, so fitted values are reproducible.
pub const FIT_SEED: u64 = 0x5eed_c057;

/// Empirically fitted stand-ins for the existential constants of the
/// loxodromy configuration. `c0 = 4C_𝔞` is exact; the rest are measured.
#[derive(Clone, Debug, Serialize)]
pub struct FittedConstants {
    pub d: usize,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub eps0: f64,
    pub c3: f64,
    pub c_prime: f64,
    pub r0: f64,
    pub samples: usize,
    pub seed: u64,
    pub label: &'static str,
}

impl FittedConstants {
    pub fn fit(d: usize, samples: usize, seed: u64) -> Result<Self> {
        let rs = RootSystem::new(d)?;
        let c0 = 4.0 * rs.c_a();
        let mut rng = sampling::rng(seed);

        // C₁: distortion of d, δ and σ against e^{C₀ d_X(o, go)}
        let mut c1 = 1.0f64;
        for i in 0..samples {
            let g = random_element(&mut rng, d, 0.6);
            let xi = uniform_flag(&mut rng, d);
            let eta = if i % 2 == 0 {
                uniform_flag(&mut rng, d)
            } else {
                xi.act(near_identity(&mut rng, d, 1e-3).0.matrix())
            };
            let growth = (c0 * killing_norm_of(&g.cartan().a)).exp();
            let dd = dist_d(&xi, &eta);
            if dd > 0.0 {
                c1 = c1.max(dist_d(&g.act(&xi), &g.act(&eta)) / (growth * dd));
                let ds = killing_norm_of(&(&iwasawa_cocycle(&g, &xi) - &iwasawa_cocycle(&g, &eta)));
                c1 = c1.max(ds / (growth * dd));
            }
            let dl = dist_delta(&xi, &eta);
            if dl > 0.0 {
                c1 = c1.max(dist_delta(&g.act(&xi), &g.act(&eta)) / (growth * dl));
            }
        }
        let c1 = c1 * 1.05;

        // C₂ and ε₀: local comparison of d₁ and d₂ on a radius ladder
        let ladder = [0.4, 0.2, 0.1, 0.05, 0.025];
        let per_rung = (samples / ladder.len()).max(20);
        let origin = hopf(&GroupElement::identity(d));
        let scale = (2.0 * d as f64).sqrt();
        let mut worst = Vec::with_capacity(ladder.len());
        for &radius in &ladder {
            let mut w = 1.0f64;
            for _ in 0..per_rung {
                let rad = radius * (0.2 + 0.8 * rng_unit(&mut rng));
                let (g, x) = near_identity(&mut rng, d, rad);
                let d1 = scale * x.norm();
                let d2 = hopf_distance(&hopf(&g), &origin);
                w = w.max(d1 / d2).max(d2 / d1);
            }
            worst.push(w);
        }
        let base = *worst.last().unwrap_or(&1.0);
        let rung = ladder.iter().zip(&worst).position(|(_, &w)| w <= 1.25 * base).unwrap_or(ladder.len() - 1);
        let c2 = 1.05 * worst[rung..].iter().copied().fold(1.0, f64::max);
        let eps0 = scale * ladder[rung] * 0.2;

        // C₃, C′: Gromov product against flat distance
        let mut ratios = Vec::new();
        let mut pairs = Vec::new();
        let fit_pairs = (samples / 10).max(50);
        for _ in 0..fit_pairs {
            let x = BasePoint::new(random_element(&mut rng, d, 0.5));
            let xi = uniform_flag(&mut rng, d);
            let eta = uniform_flag(&mut rng, d);
            let Ok(pair) = TransversePair::new(xi.clone(), eta.clone()) else { continue };
            let gp = killing_norm_of(&gromov_product(&xi, &eta, &x)?);
            let fd = flat_distance(&x, &pair)?;
            if fd > 1e-6 {
                ratios.push(gp / fd);
            }
            pairs.push((gp, fd));
        }
        let c3 = 1.05 * ratios.iter().copied().fold(1.01, f64::max);
        let c_prime = 1.05 * pairs.iter().map(|(g, f)| f - c3 * g).fold(0.0, f64::max) + 1e-9;
        let r0 = solve_r0(c3);

        Ok(FittedConstants {
            d,
            c0,
            c1,
            c2,
            eps0,
            c3,
            c_prime,
            r0,
            samples,
            seed,
            label: "empirical fit (engineering stand-in, not derived)",
        })
    }

    /// Fit with the default sample budget, computed once per dimension.
    pub fn cached(d: usize) -> Result<&'static FittedConstants> {
        static CACHE: Mutex<Option<HashMap<usize, &'static FittedConstants>>> = Mutex::new(None);
        let mut guard = CACHE.lock().unwrap_or_else(|e| e.into_inner());
        let map = guard.get_or_insert_with(HashMap::new);
        if let Some(c) = map.get(&d) {
            return Ok(c);
        }
        let fitted: &'static FittedConstants = Box::leak(Box::new(FittedConstants::fit(d, 2000, FIT_SEED)?));
        map.insert(d, fitted);
        Ok(fitted)
    }
}

fn rng_unit(rng: &mut sampling::SeededRng) -> f64 {
    use rand::Rng;
    rng.random::<f64>()
}

/// Zero in `(0, 1)` of `r ↦ −log r − max(C₃, 2)·r`, by bisection.
pub fn solve_r0(c3: f64) -> f64 {
    let c = c3.max(2.0);
    let f = |r: f64| -r.ln() - c * r;
    let (mut lo, mut hi) = (1e-300f64, 1.0f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `C_x = 8·C₂·C₁·exp(C₀·d_X(o, x))`.
pub fn cx_constant(x: &BasePoint, c: &FittedConstants) -> f64 {
    8.0 * c.c2 * c.c1 * (c.c0 * killing_norm_of(&x.representative().cartan().a)).exp()
}

/// `t₀(x, ε) = factor · c_wall · (2 log C_x − 2 log ε)`.
pub fn t0(x: &BasePoint, epsilon: f64, c: &FittedConstants, factor: f64) -> f64 {
    let rs = RootSystem::cached(x.dim());
    factor * rs.wall_root_constant() * (2.0 * cx_constant(x, c).ln() - 2.0 * epsilon.ln())
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionReport {
    pub analytic: bool,
    /// `γ_{1,2}(ρ_α(e^a)) = e^{−α(a)}` per simple root, from compound singular values.
    pub gap_ratios: Vec<f64>,
    pub sampled: usize,
    pub contracted: usize,
    pub all_contracted: bool,
}

/// Whether `α(a) ≥ −2 log ε` for every simple root, together with a sampled
/// check that `e^a` maps `{δ(·, ζ₀) ≥ ε}` into `B(η₀, ε)`.
pub fn contraction_check(a: &CartanVector, epsilon: f64, samples: usize, seed: u64) -> Result<ContractionReport> {
    let d = a.dim();
    let rs = RootSystem::cached(d);
    if !rs.in_closed_chamber(a) {
        return Err(WccError::Precondition("contraction check needs a in the closed chamber".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(WccError::Parameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let bound = -2.0 * epsilon.ln();
    let analytic = rs.simple_roots().iter().all(|r| r.eval(a.as_slice()) >= bound);
    let ea = linalg::exp_diag(a.as_slice());
    let gap_ratios = (1..d)
        .map(|k| {
            let s = linalg::compound(&ea, k).singular_values();
            let mut s: Vec<f64> = s.iter().copied().collect();
            s.sort_by(|x, y| y.total_cmp(x));
            // ‖∧²ρ‖ = s₁s₂ and ‖ρ‖ = s₁
            s[1] / s[0]
        })
        .collect();
    let mut rng = sampling::rng(seed);
    let g = GroupElement::exp_cartan(a);
    let eta0 = Flag::standard(d);
    let zeta0 = Flag::opposite_standard(d);
    let (mut sampled, mut contracted) = (0, 0);
    let mut tries = 0;
    while sampled < samples && tries < 1000 * samples.max(1) {
        tries += 1;
        let xi = uniform_flag(&mut rng, d);
        if dist_delta(&xi, &zeta0) < epsilon {
            continue;
        }
        sampled += 1;
        if dist_d(&g.act(&xi), &eta0) < epsilon {
            contracted += 1;
        }
    }
    Ok(ContractionReport { analytic, gap_ratios, sampled, contracted, all_contracted: sampled == contracted })
}

#[derive(Clone, Debug, Serialize)]
pub struct Conditions {
    pub wall_distance: f64,
    pub t0: f64,
    pub wall_margin_ok: bool,
    pub transverse_ok: bool,
    pub delta: Option<f64>,
    pub flat_dist: Option<f64>,
    pub flat_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LoxodromyCertificate {
    pub element: Vec<Vec<f64>>,
    pub base: Vec<Vec<f64>>,
    pub r: f64,
    pub epsilon: f64,
    pub cx: f64,
    pub conditions: Conditions,
    pub certified: bool,
    /// First failing condition when not certified.
    pub failure: Option<String>,
    /// `(d(γ⁺, γ_x⁺), d(γ⁻, γ_x⁻))`, present when certified.
    pub fixed_point_errors: Option<(f64, f64)>,
    /// `‖λ(γ) − a_x(γ)‖`, present when certified.
    pub jordan_cartan_gap: Option<f64>,
    /// Independent check: loxodromic by Jordan data, both errors below ε, `λ ∈ B(a_x, 4r)`.
    pub verified: bool,
}

/// Admissible ranges `r ∈ (0, r₀)` and `ε ∈ (0, min(r/C_x, ε₀))`.
pub fn check_parameters(x: &BasePoint, r: f64, epsilon: f64, c: &FittedConstants) -> Result<()> {
    if !(r > 0.0 && r < c.r0) {
        return Err(WccError::Parameter(format!("r = {r} outside (0, r0 = {:.6})", c.r0)));
    }
    let cap = (r / cx_constant(x, c)).min(c.eps0);
    if !(epsilon > 0.0 && epsilon < cap) {
        return Err(WccError::Parameter(format!("epsilon = {epsilon} outside (0, {cap:.6e})")));
    }
    Ok(())
}

pub fn certify(gamma: &GroupElement, x: &BasePoint, r: f64, epsilon: f64) -> Result<LoxodromyCertificate> {
    let c = FittedConstants::cached(gamma.dim())?;
    certify_with(gamma, x, r, epsilon, c, DEFAULT_T0_FACTOR)
}

pub fn certify_with(
    gamma: &GroupElement,
    x: &BasePoint,
    r: f64,
    epsilon: f64,
    c: &FittedConstants,
    t0_factor: f64,
) -> Result<LoxodromyCertificate> {
    if gamma.dim() != x.dim() || gamma.dim() != c.d {
        return Err(WccError::Parameter("dimension mismatch between element, base point and constants".into()));
    }
    check_parameters(x, r, epsilon, c)?;
    let a_x = cartan_at(gamma, x);
    let wall = wall_distance_of(&a_x);
    let t0v = t0(x, epsilon, c, t0_factor);
    let mut cond = Conditions {
        wall_distance: wall,
        t0: t0v,
        wall_margin_ok: wall >= t0v && wall > 0.0,
        transverse_ok: false,
        delta: None,
        flat_dist: None,
        flat_ok: false,
    };
    let mut failure = None;
    let mut angular = None;
    if !cond.wall_margin_ok {
        failure = Some("condition (i): wall distance below t0".to_string());
    } else {
        let (plus, minus) = angular_points(gamma, x, 0.0)?;
        let delta = dist_delta(&plus, &minus);
        cond.delta = Some(delta);
        cond.transverse_ok = delta > flagmetric::TRANSVERSE_TOL;
        if !cond.transverse_ok {
            failure = Some("condition (ii): angular points not transverse".to_string());
        } else {
            let pair = TransversePair::new(plus.clone(), minus.clone())?;
            let fd = flat_distance(x, &pair)?;
            cond.flat_dist = Some(fd);
            cond.flat_ok = fd < r;
            if !cond.flat_ok {
                failure = Some("condition (ii): flat distance not below r".to_string());
            }
        }
        angular = Some((plus, minus));
    }
    let certified = failure.is_none();
    let mut fixed_point_errors = None;
    let mut jordan_cartan_gap = None;
    let mut verified = false;
    if certified {
        let (plus, minus) = angular.expect("angular points computed for certified element");
        let j = gamma.jordan();
        if let Ok((gp, gm)) = fixed_points(gamma, TAU_LOX) {
            let errs = (dist_d(&gp, &plus), dist_d(&gm, &minus));
            let gap = killing_norm_of(&(&j.lambda - &a_x));
            verified = j.is_loxodromic(TAU_LOX) && errs.0 < epsilon && errs.1 < epsilon && gap < 4.0 * r;
            fixed_point_errors = Some(errs);
            jordan_cartan_gap = Some(gap);
        }
    }
    Ok(LoxodromyCertificate {
        element: mat_rows(gamma.matrix()),
        base: mat_rows(x.representative().matrix()),
        r,
        epsilon,
        cx: cx_constant(x, c),
        conditions: cond,
        certified,
        failure,
        fixed_point_errors,
        jordan_cartan_gap,
        verified,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct JordanCartanGap {
    pub gap: f64,
    pub flat_distance: f64,
    pub holds: bool,
}

/// `‖λ(γ) − a_x(γ)‖` against the bound `2·d_X(x, (γ⁺γ⁻)_X)`.
pub fn jordan_cartan_gap(gamma: &GroupElement, x: &BasePoint) -> Result<JordanCartanGap> {
    let (plus, minus) = fixed_points(gamma, TAU_LOX)?;
    let pair = TransversePair::new(plus, minus)?;
    let fd = flat_distance(x, &pair)?;
    let gap = killing_norm_of(&(&gamma.jordan().lambda - &cartan_at(gamma, x)));
    Ok(JordanCartanGap { gap, flat_distance: fd, holds: gap <= 2.0 * fd + 1e-6 })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub factor: f64,
    pub certified: usize,
    pub false_positives: usize,
}

/// Certification counts over a range of `t₀` safety factors.
pub fn t0_sweep(
    elements: &[GroupElement],
    x: &BasePoint,
    r: f64,
    epsilon: f64,
    factors: &[f64],
) -> Result<Vec<SweepRow>> {
    let c = FittedConstants::cached(x.dim())?;
    factors
        .iter()
        .map(|&factor| {
            let mut row = SweepRow { factor, certified: 0, false_positives: 0 };
            for g in elements {
                let cert = certify_with(g, x, r, epsilon, c, factor)?;
                if cert.certified {
                    row.certified += 1;
                    if !cert.verified {
                        row.false_positives += 1;
                    }
                }
            }
            Ok(row)
        })
        .collect()
}

/// `h·exp(Y)·m·h⁻¹` with an explicit inverse.
pub fn conjugated_diagonal(h: &GroupElement, y: &CartanVector, signs: &[f64]) -> GroupElement {
    let d = y.dim();
    let core: Vec<f64> = y.0.iter().zip(signs).map(|(v, s)| s * v.exp()).collect();
    let inv_core: Vec<f64> = y.0.iter().zip(signs).map(|(v, s)| s * (-v).exp()).collect();
    let m = linalg::Mat::from_diagonal(&linalg::Vector::from_vec(core));
    let mi = linalg::Mat::from_diagonal(&linalg::Vector::from_vec(inv_core));
    let g = h.matrix() * m * h.inverse_matrix();
    let gi = h.matrix() * mi * h.inverse_matrix();
    debug_assert_eq!(g.nrows(), d);
    GroupElement::with_inverse(g, gi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r0_solves_its_equation() {
        for c3 in [1.5, 2.0, 3.7] {
            let r = solve_r0(c3);
            assert!((-r.ln() - c3.max(2.0) * r).abs() < 1e-10);
            assert!(r > 0.0 && r < 1.0);
        }
    }

    #[test]
    fn contraction_deep_diagonal() {
        let rep = contraction_check(&CartanVector(vec![10.0, 0.0, -10.0]), 0.1, 1000, 1).unwrap();
        assert!(rep.analytic);
        assert_eq!(rep.sampled, 1000);
        assert!(rep.all_contracted);
        let rep = contraction_check(&CartanVector(vec![0.0, 0.0]), 0.5, 10, 1).unwrap();
        assert!(!rep.analytic);
    }

    #[test]
    fn contraction_gap_ratio_rank_one() {
        let eps: f64 = 0.2;
        let s = -eps.ln() + 1e-6; // α(a) = 2s just above −2 log ε
        let rep = contraction_check(&CartanVector(vec![s, -s]), eps, 200, 2).unwrap();
        assert!(rep.analytic);
        assert!((rep.gap_ratios[0] - (-2.0 * s).exp()).abs() < 1e-15);
        assert!(rep.gap_ratios[0] < eps * eps);
    }

    #[test]
    fn fitted_constants_are_deterministic() {
        let a = FittedConstants::fit(2, 200, 9).unwrap();
        let b = FittedConstants::fit(2, 200, 9).unwrap();
        assert_eq!(a.c1, b.c1);
        assert_eq!(a.c2, b.c2);
        assert_eq!(a.c3, b.c3);
        assert!(a.c1 > 1.0 && a.c2 >= 1.0 && a.c3 > 1.0 && a.r0 > 0.0 && a.r0 < 1.0);
        assert!((a.c0 - 32.0).abs() < 1e-12);
    }

    #[test]
    fn cx_at_origin_and_doubling() {
        let c = FittedConstants::cached(2).unwrap();
        assert!((cx_constant(&BasePoint::origin(2), c) - 8.0 * c.c1 * c.c2).abs() < 1e-12);
        let y = CartanVector(vec![0.01, -0.01]);
        let e1 = cx_constant(&BasePoint::from_cartan(&y), c) / cx_constant(&BasePoint::origin(2), c);
        let e2 = cx_constant(&BasePoint::from_cartan(&y.scale(2.0)), c) / cx_constant(&BasePoint::origin(2), c);
        assert!((e2 / (e1 * e1) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn diagonal_is_certified_with_zero_error() {
        let c = FittedConstants::cached(3).unwrap();
        let x = BasePoint::origin(3);
        let r = 0.5 * c.r0;
        let eps = 0.5 * (r / cx_constant(&x, c)).min(c.eps0);
        let t = t0(&x, eps, c, DEFAULT_T0_FACTOR);
        let s = t / 3f64.sqrt() + 1.0;
        let g = GroupElement::exp_cartan(&CartanVector(vec![s, 0.0, -s]));
        let cert = certify(&g, &x, r, eps).unwrap();
        assert!(cert.certified, "{cert:?}");
        assert!(cert.verified, "{cert:?}");
        let (ep, em) = cert.fixed_point_errors.unwrap();
        assert!(ep < 1e-12 && em < 1e-12);
    }

    #[test]
    fn unipotent_fails_condition_two() {
        let c = FittedConstants::cached(2).unwrap();
        let x = BasePoint::origin(2);
        let r = 0.5 * c.r0;
        let eps = 0.5 * (r / cx_constant(&x, c)).min(c.eps0);
        let g = GroupElement::from_integer(2, &[1, 1 << 30, 0, 1]).unwrap();
        let cert = certify(&g, &x, r, eps).unwrap();
        assert!(cert.conditions.wall_margin_ok);
        assert!(!cert.certified);
        assert!(cert.failure.unwrap().contains("(ii)"));
    }

    #[test]
    fn parameters_out_of_range() {
        let x = BasePoint::origin(2);
        let g = GroupElement::identity(2);
        assert!(matches!(certify(&g, &x, 2.0, 1e-3), Err(WccError::Parameter(_))));
        assert!(matches!(certify(&g, &x, 0.1, 0.5), Err(WccError::Parameter(_))));
    }

    #[test]
    fn jordan_cartan_gap_diagonal() {
        let g = GroupElement::exp_cartan(&CartanVector(vec![1.0, 0.2, -1.2]));
        let j = jordan_cartan_gap(&g, &BasePoint::origin(3)).unwrap();
        assert!(j.gap < 1e-12 && j.holds);
    }
}
