use proptest::prelude::*;

use wcc_core::flagmetric::{dist_d, dist_delta};
use wcc_core::lattice::{enumerate, EnumOptions, LatticeSpec};
use wcc_core::projections::{int_mul, iwasawa_cocycle, GroupElement};
use wcc_core::quadrature::log_sum_exp;
use wcc_core::rootsys::{iota_of, killing_norm_of, wall_distance_of, CartanVector, RootSystem};
use wcc_core::sampling::{self, haar_so, random_element, uniform_flag};
use wcc_core::survey::{canonical_form, class_id};
use wcc_core::volume::{self, Domain, Integrand};

fn cartan(d: usize) -> impl Strategy<Value = CartanVector> {
    prop::collection::vec(-3.0f64..3.0, d).prop_map(|v| CartanVector(v).centered())
}

/// Words in `U = [[1,1],[0,1]]` and `L = [[1,0],[1,1]]` using both letters are hyperbolic.
fn positive_word() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(any::<bool>(), 2..10).prop_filter_map("needs both letters", |w| {
        if w.iter().all(|&b| b) || w.iter().all(|&b| !b) {
            return None;
        }
        let mut m = vec![1, 0, 0, 1];
        for b in w {
            let g = if b { [1, 1, 0, 1] } else { [1, 0, 1, 1] };
            m = int_mul(2, &m, &g);
        }
        Some(m)
    })
}

fn conjugator() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(0usize..4, 0..8).prop_map(|w| {
        let gens = [[0, -1, 1, 0], [0, 1, -1, 0], [1, 1, 0, 1], [1, -1, 0, 1]];
        w.into_iter().fold(vec![1, 0, 0, 1], |m, i| int_mul(2, &m, &gens[i]))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cartan_of_diagonal_is_chamber_representative(d in 2usize..=3, seed in any::<u64>(), scale in 0.1f64..4.0) {
        let mut rng = sampling::rng(seed);
        let y = wcc_core::sampling::random_cartan(&mut rng, d, scale);
        let a = GroupElement::exp_cartan(&y).cartan().a.clone();
        let rs = RootSystem::cached(d);
        prop_assert!(rs.in_closed_chamber(&a));
        prop_assert!((&a - &rs.to_chamber(&y)).max_abs() < 1e-10);
    }

    #[test]
    fn killing_norm_matches_trace_form(y in cartan(3)) {
        let ss: f64 = y.0.iter().map(|v| v * v).sum();
        prop_assert!((killing_norm_of(&y) - (6.0 * ss).sqrt()).abs() < 1e-12);
        prop_assert!(wall_distance_of(&RootSystem::cached(3).to_chamber(&y)) >= 0.0);
        prop_assert!((killing_norm_of(&iota_of(&y)) - killing_norm_of(&y)).abs() < 1e-12);
    }

    #[test]
    fn cartan_is_k_bi_invariant(d in 2usize..=3, seed in any::<u64>()) {
        let mut rng = sampling::rng(seed);
        let g = random_element(&mut rng, d, 2.0);
        let k1 = GroupElement::from_orthogonal(haar_so(&mut rng, d));
        let k2 = GroupElement::from_orthogonal(haar_so(&mut rng, d));
        let moved = k1.mul(&g).mul(&k2);
        prop_assert!((&moved.cartan().a - &g.cartan().a).max_abs() < 1e-9);
        prop_assert!((&g.inverse().cartan().a - &iota_of(&g.cartan().a)).max_abs() < 1e-9);
    }

    #[test]
    fn iwasawa_cocycle_relation(d in 2usize..=3, seed in any::<u64>()) {
        let mut rng = sampling::rng(seed);
        let g = random_element(&mut rng, d, 1.5);
        let h = random_element(&mut rng, d, 1.5);
        let xi = uniform_flag(&mut rng, d);
        let lhs = iwasawa_cocycle(&g.mul(&h), &xi);
        let rhs = &iwasawa_cocycle(&g, &h.act(&xi)) + &iwasawa_cocycle(&h, &xi);
        prop_assert!((&lhs - &rhs).max_abs() < 1e-9);
    }

    #[test]
    fn flag_metrics_are_symmetric_and_k_invariant(d in 2usize..=3, seed in any::<u64>()) {
        let mut rng = sampling::rng(seed);
        let xi = uniform_flag(&mut rng, d);
        let eta = uniform_flag(&mut rng, d);
        let k = haar_so(&mut rng, d);
        let dd = dist_d(&xi, &eta);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&dd));
        prop_assert!((dd - dist_d(&eta, &xi)).abs() < 1e-12);
        prop_assert!((dd - dist_d(&xi.act(&k), &eta.act(&k))).abs() < 1e-10);
        prop_assert!((dist_delta(&xi, &eta) - dist_delta(&xi.act(&k), &eta.act(&k))).abs() < 1e-10);
    }

    #[test]
    fn ball_volume_is_increasing(d in 2usize..=3, t in 0.2f64..10.0, dt in 0.01f64..2.0) {
        let a = volume::ball_volume(d, t).unwrap().value_log;
        let b = volume::ball_volume(d, t + dt).unwrap().value_log;
        prop_assert!(b > a);
    }

    #[test]
    fn slab_integral_grows_with_width(d in 2usize..=3, t in 2.0f64..10.0, eps in 0.02f64..0.8, grow in 0.01f64..0.15) {
        let dom = Domain::ball(d, t);
        let a = volume::slab_volume(&dom, eps * t).unwrap().slab_log;
        let b = volume::slab_volume(&dom, (eps + grow) * t).unwrap().slab_log;
        let full = volume::polar_volume(&dom, Integrand::TwoRho, volume::QUAD_TOL).unwrap().value_log;
        // the largest wall distance in the ball is t for d = 2 and t/2 for d = 3
        let cover = if d == 2 { t } else { t / 2.0 };
        if (eps + grow) * t < cover {
            prop_assert!(a < b);
        } else {
            prop_assert!(a <= b + 1e-9);
        }
        prop_assert!(b <= full + 1e-9);
    }

    #[test]
    fn box_volume_grows_with_edges(e1 in 0.2f64..2.0, e2 in 0.2f64..2.0, grow in 0.01f64..1.0) {
        let a = volume::box_volume(3, 3.0, &[e1, e2]).unwrap().value_log;
        let b = volume::box_volume(3, 3.0, &[e1 + grow, e2]).unwrap().value_log;
        prop_assert!(b > a);
    }

    #[test]
    fn class_id_is_conjugation_invariant(m in positive_word(), c in conjugator()) {
        let ci = wcc_core::projections::int_adjugate(2, &c);
        let conj = int_mul(2, &int_mul(2, &c, &m), &ci);
        prop_assert_eq!(class_id(&m).unwrap(), class_id(&conj).unwrap());
    }

    #[test]
    fn canonical_form_is_idempotent(m in positive_word()) {
        let f = wcc_core::survey::fixed_point_form(&m);
        let c = canonical_form(f);
        prop_assert_eq!(canonical_form(c), c);
    }

    #[test]
    fn log_sum_exp_bounds(v in prop::collection::vec(-50.0f64..50.0, 1..20)) {
        let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let l = log_sum_exp(&v);
        prop_assert!(l >= m - 1e-12 && l <= m + (v.len() as f64).ln() + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn census_records_are_unimodular_and_inside(t in 0.5f64..7.0, shards in 1usize..6) {
        let e = enumerate(&LatticeSpec::sl2(), &Domain::ball(2, t), &EnumOptions { shards, ..Default::default() }).unwrap();
        let merged = e.merged();
        for r in &merged {
            let m = &r.matrix;
            prop_assert_eq!(m[0] * m[3] - m[1] * m[2], 1);
            prop_assert!(r.norm <= t * (1.0 + 1e-12));
        }
        prop_assert!(merged.windows(2).all(|w| (w[0].norm, &w[0].matrix) <= (w[1].norm, &w[1].matrix)));
        // closed under inversion, since the ball is ι-invariant
        let set: std::collections::BTreeSet<Vec<i64>> = merged.iter().map(|r| r.matrix.clone()).collect();
        for m in &set {
            prop_assert!(set.contains(&vec![m[3], -m[1], -m[2], m[0]]));
        }
    }
}
