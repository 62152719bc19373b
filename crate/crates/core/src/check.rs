//! Self-check suite behind `wcc check`.

use std::time::Instant;

use serde::Serialize;

use crate::error::Result;
use crate::flagmetric::{gromov_product, is_transverse};
use crate::lattice::{enumerate, EnumOptions, LatticeSpec};
use crate::loxodromy::{certify, cx_constant, t0, FittedConstants, DEFAULT_T0_FACTOR};
use crate::projections::{busemann, cartan_at, iwasawa_cocycle, BasePoint, GroupElement};
use crate::rootsys::{iota_of, killing_norm_of, CartanVector, RootSystem};
use crate::sampling::{self, random_element, uniform_flag};
use crate::survey::{conjugacy_classes_sl2, torus_census_sl2};
use crate::volume::{self, Domain, Integrand};

#[derive(Clone, Debug, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

fn row(name: &str, start: Instant, passed: bool, detail: String) -> CheckRow {
    CheckRow { name: name.into(), passed, detail, seconds: start.elapsed().as_secs_f64() }
}

/// Largest violation of the algebraic identities over `n` random instances.
pub fn identity_violations(d: usize, n: usize, seed: u64) -> Result<Vec<(&'static str, f64)>> {
    let rs = RootSystem::cached(d);
    let mut rng = sampling::rng(seed);
    let mut worst = [0.0f64; 7];
    for _ in 0..n {
        let g = random_element(&mut rng, d, 1.0);
        let h = random_element(&mut rng, d, 1.0);
        let xi = uniform_flag(&mut rng, d);
        let eta = uniform_flag(&mut rng, d);

        let lhs = iwasawa_cocycle(&g.mul(&h), &xi);
        let rhs = &iwasawa_cocycle(&g, &h.act(&xi)) + &iwasawa_cocycle(&h, &xi);
        worst[0] = worst[0].max((&lhs - &rhs).max_abs());

        if is_transverse(&xi, &eta, 1e-6) {
            let o = BasePoint::origin(d);
            let moved = gromov_product(&g.act(&xi), &g.act(&eta), &o)?;
            let base = gromov_product(&xi, &eta, &o)?;
            let expect = &iwasawa_cocycle(&g, &xi) + &iota_of(&iwasawa_cocycle(&g, &eta));
            worst[1] = worst[1].max((&(&moved - &base) - &expect).max_abs());
        }

        let x = BasePoint::new(random_element(&mut rng, d, 0.7));
        let y = BasePoint::new(random_element(&mut rng, d, 0.7));
        let z = BasePoint::new(random_element(&mut rng, d, 0.7));
        let add = &(&busemann(&xi, &x, &y) + &busemann(&xi, &y, &z)) - &busemann(&xi, &x, &z);
        worst[2] = worst[2].max(add.max_abs());
        let dxy = killing_norm_of(&x.representative().inverse().mul(y.representative()).cartan().a);
        worst[3] = worst[3].max(killing_norm_of(&busemann(&xi, &x, &y)) - rs.c_a() * dxy);

        let a = |m: &GroupElement| m.cartan().a.clone();
        let ah = killing_norm_of(&a(&h));
        let v1 = killing_norm_of(&(&a(&g.mul(&h)) - &a(&g))) - ah;
        let v2 = killing_norm_of(&(&a(&h.mul(&g)) - &a(&g))) - ah;
        let v3 = killing_norm_of(&(&cartan_at(&g, &x) - &cartan_at(&g, &y))) - 2.0 * dxy;
        worst[4] = worst[4].max(v1).max(v2).max(v3);

        worst[5] = worst[5].max((&a(&g.inverse()) - &iota_of(&a(&g))).max_abs());

        let conj = g.conjugate_by(&h);
        worst[6] = worst[6].max((&conj.jordan().lambda - &g.jordan().lambda).max_abs());
    }
    let names = [
        "cocycle",
        "gromov transformation",
        "busemann additivity",
        "busemann bound",
        "cartan comparison",
        "a(g^-1) = iota a(g)",
        "jordan conjugation invariance",
    ];
    Ok(names.into_iter().zip(worst).collect())
}

/// Runs the suite; `quick` uses small sample sizes.
pub fn run(quick: bool) -> Vec<CheckRow> {
    let mut rows = Vec::new();
    let n = if quick { 300 } else { 10_000 };
    for d in [2, 3] {
        let start = Instant::now();
        match identity_violations(d, n, 17 + d as u64) {
            Ok(v) => {
                let max = v.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
                let detail = v.iter().map(|(k, x)| format!("{k}={x:.1e}")).collect::<Vec<_>>().join(", ");
                rows.push(row(&format!("identities sl{d} (n={n})"), start, max < 1e-7, detail));
            }
            Err(e) => rows.push(row(&format!("identities sl{d}"), start, false, e.to_string())),
        }
    }

    let start = Instant::now();
    let worst = [0.5, 1.0, 4.0, 8.0]
        .iter()
        .map(|&t| {
            let q = volume::ball_volume(2, t).map(|v| v.value).unwrap_or(f64::NAN);
            (q / volume::ball_volume_sl2_closed_form(t) - 1.0).abs()
        })
        .fold(0.0, f64::max);
    rows.push(row("sl2 ball volume vs closed form", start, worst < 1e-6, format!("max rel err {worst:.2e}")));

    let start = Instant::now();
    let dom = Domain::parallelotope(3, if quick { 3.0 } else { 5.0 }, vec![1.0, 1.0]);
    let res = volume::volume(&dom)
        .and_then(|e| Ok((e.value, volume::box_quadrature(&dom, Integrand::HarishChandra, 1e-10)?.value)));
    rows.push(match res {
        Ok((e, q)) => row("sl3 box expansion vs quadrature", start, (e / q - 1.0).abs() < 1e-6, format!("{e:.10e} vs {q:.10e}")),
        Err(err) => row("sl3 box expansion vs quadrature", start, false, err.to_string()),
    });

    let start = Instant::now();
    let res = volume::slab_sweep(&Domain::ball(2, 1.0), 0.1, &[6.0, 8.0, 10.0]);
    rows.push(match res {
        Ok(s) => row(
            "sl2 slab decay",
            start,
            s.strictly_decreasing && s.kappa > 0.0,
            format!("kappa {:.3}", s.kappa),
        ),
        Err(e) => row("sl2 slab decay", start, false, e.to_string()),
    });

    let start = Instant::now();
    rows.push(match certifier_smoke() {
        Ok((ok, detail)) => row("loxodromy certifier", start, ok, detail),
        Err(e) => row("loxodromy certifier", start, false, e.to_string()),
    });

    let start = Instant::now();
    let tiny = enumerate(&LatticeSpec::sl2(), &Domain::ball(2, 1e-9), &EnumOptions::default());
    let shards: Vec<_> = [1, 3, 7]
        .iter()
        .map(|&s| enumerate(&LatticeSpec::sl2(), &Domain::ball(2, 6.0), &EnumOptions { shards: s, ..Default::default() }))
        .collect();
    let ok_tiny = tiny.as_ref().map(|e| e.len() == 4).unwrap_or(false);
    let bytes: Vec<Vec<u8>> = shards.iter().filter_map(|e| e.as_ref().ok()).map(|e| e.merged_bytes()).collect();
    let ok_shards = bytes.len() == 3 && bytes.windows(2).all(|w| w[0] == w[1]);
    rows.push(row(
        "sl2 census exactness",
        start,
        ok_tiny && ok_shards,
        format!("t->0 records ok: {ok_tiny}, shard independence: {ok_shards}"),
    ));

    let start = Instant::now();
    let res = conjugacy_classes_sl2(3).and_then(|c| Ok((c.len(), torus_census_sl2(&[6.0, 8.0, 10.0])?)));
    rows.push(match res {
        Ok((n3, rep)) => row(
            "sl2 classes and torus bookkeeping",
            start,
            n3 == 1 && rep.identity_exact,
            format!("trace-3 classes {n3}, regrouping exact {}", rep.identity_exact),
        ),
        Err(e) => row("sl2 classes and torus bookkeeping", start, false, e.to_string()),
    });
    rows
}

fn certifier_smoke() -> Result<(bool, String)> {
    let c = FittedConstants::cached(2)?;
    let x = BasePoint::origin(2);
    let r = 0.5 * c.r0;
    let eps = 0.5 * (r / cx_constant(&x, c)).min(c.eps0);
    let s = t0(&x, eps, c, DEFAULT_T0_FACTOR) / 2f64.sqrt() + 1.0;
    let diag = certify(&GroupElement::exp_cartan(&CartanVector(vec![s, -s])), &x, r, eps)?;
    let unip = certify(&GroupElement::from_integer(2, &[1, 1 << 30, 0, 1])?, &x, r, eps)?;
    let ok = diag.certified && diag.verified && !unip.certified;
    Ok((ok, format!("diagonal certified {}, unipotent certified {}", diag.certified, unip.certified)))
}

/// Plain-text table of check rows.
pub fn render(rows: &[CheckRow]) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&format!(
            "{:<4} {:<40} {:>7.2}s  {}\n",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.seconds,
            r.detail
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        let rows = run(true);
        assert!(rows.iter().all(|r| r.passed), "{}", render(&rows));
    }
}
