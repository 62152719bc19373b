//! Full flags, their projective metrics, Gromov products and Hopf coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WccError};
use crate::linalg::{self, Mat, Vector};
use crate::projections::{iwasawa_cocycle, BasePoint, GroupElement};
use crate::rootsys::{from_fundamental_weights, killing_norm_of, rho_of, CartanVector, RootSystem};

/// Pairs with `δ` at or below this are treated as non-transverse.
pub const TRANSVERSE_TOL: f64 = 1e-13;

/// A full flag in `R^d`, stored as an SO(d) frame modulo diagonal signs.
#[derive(Clone, Debug)]
pub struct Flag {
    frame: Mat,
}

impl Flag {
    /// Accepts an orthonormal frame of determinant one.
    pub fn from_frame(frame: Mat) -> Result<Self> {
        let d = frame.nrows();
        if !frame.is_square() {
            return Err(WccError::Precondition("flag frame must be square".into()));
        }
        let gram_err = linalg::max_abs_diff(&(frame.transpose() * &frame), &Mat::identity(d, d));
        if gram_err > 1e-8 {
            return Err(WccError::Precondition(format!("frame is not orthonormal (error {gram_err:.2e})")));
        }
        if frame.determinant() < 0.0 {
            return Err(WccError::Precondition("frame has determinant −1".into()));
        }
        Ok(Flag { frame: linalg::so_frame(&frame) })
    }

    /// The flag whose `k`-th subspace is spanned by the first `k` columns.
    pub fn from_columns(m: &Mat) -> Self {
        Flag { frame: linalg::so_frame(m) }
    }

    /// `η₀`: the standard flag `⟨e₁⟩ ⊂ ⟨e₁,e₂⟩ ⊂ …`.
    pub fn standard(d: usize) -> Self {
        Flag { frame: Mat::identity(d, d) }
    }

    /// `ζ₀ = k_ι η₀`: the opposite standard flag `⟨e_d⟩ ⊂ ⟨e_d,e_{d−1}⟩ ⊂ …`.
    pub fn opposite_standard(d: usize) -> Self {
        Flag { frame: linalg::k_iota(d) }
    }

    pub fn frame(&self) -> &Mat {
        &self.frame
    }

    pub fn dim(&self) -> usize {
        self.frame.nrows()
    }

    /// Unit Plücker vector of the `k`-dimensional subspace.
    pub fn line(&self, k: usize) -> Vector {
        linalg::plucker(&self.frame, k)
    }

    pub fn act(&self, g: &Mat) -> Flag {
        Flag::from_columns(&(g * &self.frame))
    }

    /// `η_o^⊥`: the flag opposite to `self` whose flat passes through `o`.
    pub fn opposite_at_origin(&self) -> Flag {
        Flag { frame: &self.frame * linalg::k_iota(self.dim()) }
    }

    /// Same flag with the frame columns multiplied by `signs` (an M-element).
    pub fn regauge(&self, signs: &[f64]) -> Flag {
        let mut f = self.frame.clone();
        for (j, s) in signs.iter().enumerate() {
            f.column_mut(j).scale_mut(*s);
        }
        Flag { frame: f }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        mat_rows(&self.frame)
    }
}

impl Serialize for Flag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Flag {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(de)?;
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(serde::de::Error::custom("flag frame must be square"));
        }
        Flag::from_frame(Mat::from_fn(d, d, |i, j| rows[i][j])).map_err(serde::de::Error::custom)
    }
}

pub fn mat_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// `d(ξ, η) = max_k ‖v_ξ ∧ v_η‖` on unit Plücker vectors.
pub fn dist_d(xi: &Flag, eta: &Flag) -> f64 {
    (1..xi.dim()).map(|k| linalg::wedge_norm(&xi.line(k), &eta.line(k))).fold(0.0, f64::max)
}

/// Per-weight transversality gauges `δ_k(ξ, η) = |⟨x^k(ξ), x^k(η_o^⊥)⟩|`.
pub fn delta_components(xi: &Flag, eta: &Flag) -> Vec<f64> {
    let perp = eta.opposite_at_origin();
    (1..xi.dim()).map(|k| xi.line(k).dot(&perp.line(k)).abs()).collect()
}

/// `δ(ξ, η) = min_k δ_k(ξ, η)`.
pub fn dist_delta(xi: &Flag, eta: &Flag) -> f64 {
    delta_components(xi, eta).into_iter().fold(f64::INFINITY, f64::min)
}

pub fn is_transverse(xi: &Flag, eta: &Flag, tol: f64) -> bool {
    dist_delta(xi, eta) > tol
}

/// Gromov product `(ξ|η)_x`.
pub fn gromov_product(xi: &Flag, eta: &Flag, x: &BasePoint) -> Result<CartanVector> {
    let (xi, eta) = (x.pull_back_flag(xi), x.pull_back_flag(eta));
    let comps = delta_components(&xi, &eta);
    let worst = comps.iter().copied().fold(f64::INFINITY, f64::min);
    if worst.is_nan() || worst <= TRANSVERSE_TOL {
        return Err(WccError::Transversality { delta: worst });
    }
    let c: Vec<f64> = comps.iter().map(|v| -v.ln()).collect();
    Ok(from_fundamental_weights(&c))
}

/// `exp(ρ(ξ|η)_x)`, the density of the BMS measure against `μ_x ⊗ μ_x`.
pub fn bms_weight(xi: &Flag, eta: &Flag, x: &BasePoint) -> Result<f64> {
    Ok(rho_of(&gromov_product(xi, eta, x)?).exp())
}

/// `dg_*μ_o/dμ_o (ξ) = exp(−ρ σ(g⁻¹, ξ))`.
pub fn rn_derivative(g: &GroupElement, xi: &Flag) -> f64 {
    (-rho_of(&iwasawa_cocycle(&g.inverse(), xi))).exp()
}

/// An ordered transverse pair `(ξ⁺, ξ⁻)`.
#[derive(Clone, Debug, Serialize)]
pub struct TransversePair {
    pub xi_plus: Flag,
    pub xi_minus: Flag,
    pub delta_value: f64,
}

impl TransversePair {
    pub fn new(xi_plus: Flag, xi_minus: Flag) -> Result<Self> {
        let delta_value = dist_delta(&xi_plus, &xi_minus);
        if delta_value.is_nan() || delta_value <= TRANSVERSE_TOL {
            return Err(WccError::Transversality { delta: delta_value });
        }
        Ok(TransversePair { xi_plus, xi_minus, delta_value })
    }

    pub fn standard(d: usize) -> Self {
        TransversePair { xi_plus: Flag::standard(d), xi_minus: Flag::opposite_standard(d), delta_value: 1.0 }
    }

    /// `g_{ξ,η}` with `g(η₀, ζ₀) = (ξ⁺, ξ⁻)`, `det g = 1` and `σ(g, η₀) = 0`.
    pub fn flat_map(&self) -> Result<GroupElement> {
        let d = self.xi_plus.dim();
        let xf = self.xi_plus.frame();
        let ef = self.xi_minus.frame();
        let mut c = Mat::zeros(d, d);
        for i in 0..d {
            // column i spans ξ⁺_{i+1} ∩ ξ⁻_{d−i}
            let basis = xf.columns(0, i + 1).clone_owned();
            let v = if i == 0 {
                basis.column(0).clone_owned()
            } else {
                let constraint = ef.columns(d - i, i).transpose() * &basis;
                let mut square = Mat::zeros(i + 1, i + 1);
                square.rows_mut(0, i).copy_from(&constraint);
                &basis * linalg::null_vector(&square)?
            };
            c.set_column(i, &(&v / v.norm()));
        }
        let det = c.determinant();
        if det.abs() < 1e-300 {
            return Err(WccError::Transversality { delta: self.delta_value });
        }
        if det < 0.0 {
            c.column_mut(d - 1).neg_mut();
        }
        let c = c * det.abs().powf(-1.0 / d as f64);
        let g0 = GroupElement::new(c)?;
        let z = iwasawa_cocycle(&g0, &Flag::standard(d));
        Ok(g0.mul(&GroupElement::exp_cartan(&(-&z))))
    }
}

/// Hopf coordinates `(gη₀, gζ₀, σ(g, η₀))` of `gM`.
#[derive(Clone, Debug, Serialize)]
pub struct HopfPoint {
    pub pair: TransversePair,
    pub a_coord: CartanVector,
}

pub fn hopf(g: &GroupElement) -> HopfPoint {
    let d = g.dim();
    let xi = g.act(&Flag::standard(d));
    let eta = g.act(&Flag::opposite_standard(d));
    let delta_value = dist_delta(&xi, &eta);
    HopfPoint {
        pair: TransversePair { xi_plus: xi, xi_minus: eta, delta_value },
        a_coord: iwasawa_cocycle(g, &Flag::standard(d)),
    }
}

/// Reconstructs a representative of `gM` from its Hopf coordinates.
pub fn hopf_inverse(p: &HopfPoint) -> Result<GroupElement> {
    Ok(p.pair.flat_map()?.mul(&GroupElement::exp_cartan(&p.a_coord)))
}

/// `d₂` on Hopf coordinates.
pub fn hopf_distance(p: &HopfPoint, q: &HopfPoint) -> f64 {
    dist_d(&p.pair.xi_plus, &q.pair.xi_plus)
        .max(dist_d(&p.pair.xi_minus, &q.pair.xi_minus))
        .max(killing_norm_of(&(&p.a_coord - &q.a_coord)))
}

/// Attracting and repelling flags `(g⁺, g⁻)` of a loxodromic element.
pub fn fixed_points(g: &GroupElement, tau: f64) -> Result<(Flag, Flag)> {
    let j = g.jordan();
    let ev = match (&j.eigenvalues, j.is_loxodromic(tau)) {
        (Some(ev), true) => ev.clone(),
        _ => return Err(WccError::Loxodromy { gap: j.min_gap }),
    };
    let d = g.dim();
    let top = |m: &Mat, lam: f64| linalg::null_vector(&(m - Mat::identity(d, d) * lam));
    if d == 3 {
        // Only the extreme eigenvectors are computed: the middle one of g
        // is ill-conditioned when the spectrum is wide. The top planes are
        // the kernels of the extreme left eigenvectors.
        let (l1, l3) = (ev[0], ev[2]);
        let v1 = top(g.matrix(), l1)?;
        let v3 = top(g.inverse_matrix(), 1.0 / l3)?;
        let w1 = top(&g.matrix().transpose(), l1)?;
        let w3 = top(&g.inverse_matrix().transpose(), 1.0 / l3)?;
        let frame = |line: &Vector, normal: &Vector| {
            let second = normal.cross(line);
            Mat::from_columns(&[line.clone(), second.clone(), line.cross(&second)])
        };
        return Ok((Flag::from_columns(&frame(&v1, &w3)), Flag::from_columns(&frame(&v3, &w1))));
    }
    let mut basis = Mat::zeros(d, d);
    for (i, &lam) in ev.iter().enumerate() {
        // use whichever of g, g⁻¹ has this eigenvalue at the large end
        let col = if lam.abs() >= 1.0 { top(g.matrix(), lam)? } else { top(g.inverse_matrix(), 1.0 / lam)? };
        basis.set_column(i, &col);
    }
    let plus = Flag::from_columns(&basis);
    let reversed = Mat::from_fn(d, d, |r, c| basis[(r, d - 1 - c)]);
    Ok((plus, Flag::from_columns(&reversed)))
}

/// Result of minimising `d_X(x, g_{ξ,η} exp(Y) o)` over `Y`.
#[derive(Clone, Debug)]
pub struct FlatProjection {
    pub distance: f64,
    /// Minimiser `Y*` in diagonal coordinates.
    pub y: CartanVector,
    pub gradient_norm: f64,
    pub iterations: usize,
}

/// `d_X(x, (ξη)_X)`, the distance from `x` to the maximal flat of the pair.
pub fn flat_distance(x: &BasePoint, pair: &TransversePair) -> Result<f64> {
    Ok(flat_projection(x, pair)?.distance)
}

/// Objective `f(u) = d_X(x, B·exp(Y(u))·o)²` and its gradient in Killing
/// coordinates, where `B = h_x⁻¹ g_{ξ,η}`.
fn flat_objective(rs: &RootSystem, b: &GroupElement, u: &[f64]) -> (f64, Vec<f64>) {
    let y = rs.from_killing_coords(u);
    let m = b.mul(&GroupElement::exp_cartan(&y));
    let cd = m.cartan();
    let a = &cd.a;
    let f = rs.killing_scale() * a.euclid().powi(2);
    // ∂f/∂Y_j = 4d Σ_i V_ji² a_i with M = U e^a Vᵀ
    let d = rs.dim();
    let g: Vec<f64> =
        (0..d).map(|j| 2.0 * rs.killing_scale() * (0..d).map(|i| cd.l[(j, i)].powi(2) * a[i]).sum::<f64>()).collect();
    let gu = rs.killing_basis().iter().map(|e| e.0.iter().zip(&g).map(|(ei, gi)| ei * gi).sum()).collect();
    (f, gu)
}

/// Grid-seeded damped Newton minimisation of the distance to the flat.
pub fn flat_projection(x: &BasePoint, pair: &TransversePair) -> Result<FlatProjection> {
    let d = x.dim();
    let rs = RootSystem::cached(d);
    let r = rs.rank();
    let b = x.representative().inverse().mul(&pair.flat_map()?);
    let norm = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>().sqrt();

    // the foot of the perpendicular is within 2·d_X(x, g·o) of g·o
    let base = killing_norm_of(&b.cartan().a);
    let radius = 2.0 * base + 0.1;
    let per_axis = match r {
        1 => 64,
        2 => 8,
        _ => 4,
    };
    let mut best_u = vec![0.0; r];
    let mut best_f = f64::INFINITY;
    let total = (per_axis as usize).pow(r as u32);
    for idx in 0..total {
        let mut rem = idx;
        let u: Vec<f64> = (0..r)
            .map(|_| {
                let k = rem % per_axis;
                rem /= per_axis;
                -radius + 2.0 * radius * (k as f64 + 0.5) / per_axis as f64
            })
            .collect();
        let (f, _) = flat_objective(rs, &b, &u);
        if f < best_f {
            best_f = f;
            best_u = u;
        }
    }

    let mut u = best_u;
    let (mut f, mut g) = flat_objective(rs, &b, &u);
    let mut iterations = 0;
    let tol = 1e-8;
    while norm(&g) > tol && iterations < 200 {
        iterations += 1;
        // finite-difference Hessian of the analytic gradient
        let h = 1e-5;
        let mut hess = Mat::zeros(r, r);
        for k in 0..r {
            let mut up = u.clone();
            up[k] += h;
            let mut dn = u.clone();
            dn[k] -= h;
            let (_, gp) = flat_objective(rs, &b, &up);
            let (_, gm) = flat_objective(rs, &b, &dn);
            for i in 0..r {
                hess[(i, k)] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        let hess = (&hess + hess.transpose()) * 0.5;
        let gv = Vector::from_vec(g.clone());
        let dir = match hess.clone().cholesky() {
            Some(ch) => -ch.solve(&gv),
            None => -gv.clone(),
        };
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = u.iter().zip(dir.iter()).map(|(a, b)| a + step * b).collect();
            let (fc, gc) = flat_objective(rs, &b, &cand);
            // near the minimum f is flat to rounding, so fall back to
            // requiring a real drop in the gradient norm
            let armijo = fc <= f + 1e-4 * step * gv.dot(&dir);
            let flat = fc <= f + 1e-14 * f.abs() && norm(&gc) < (1.0 - 0.5 * step) * norm(&g);
            if armijo || flat {
                u = cand;
                f = fc;
                g = gc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let gradient_norm = norm(&g);
    // f itself is O(1e-16·f) accurate; accept a slightly larger gradient
    // when no further descent is possible.
    if gradient_norm > tol.max(1e-9 * (1.0 + f)) {
        return Err(WccError::Numeric(format!(
            "flat distance optimiser stalled: |grad| = {gradient_norm:.3e} after {iterations} steps (f = {f:.6e})"
        )));
    }
    Ok(FlatProjection { distance: f.max(0.0).sqrt(), y: rs.from_killing_coords(&u), gradient_norm, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rot2(t: f64) -> Mat {
        Mat::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()])
    }

    #[test]
    fn dist_d_rotation_is_abs_sine() {
        for &t in &[0.0, 0.3, 1.2, 2.9, -0.7] {
            let xi = Flag::standard(2).act(&rot2(t));
            assert!((dist_d(&Flag::standard(2), &xi) - t.sin().abs()).abs() < 1e-14);
        }
        assert!((dist_d(&Flag::standard(2), &Flag::opposite_standard(2)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn delta_of_standard_pair() {
        for d in 2..=4 {
            assert!((dist_delta(&Flag::standard(d), &Flag::opposite_standard(d)) - 1.0).abs() < 1e-14);
            assert!(dist_delta(&Flag::standard(d), &Flag::standard(d)) < 1e-14);
            assert!(is_transverse(&Flag::standard(d), &Flag::opposite_standard(d), 1e-6));
            assert!(!is_transverse(&Flag::standard(d), &Flag::standard(d), 1e-6));
        }
    }

    #[test]
    fn gromov_of_standard_pair_is_zero() {
        let g = gromov_product(&Flag::standard(3), &Flag::opposite_standard(3), &BasePoint::origin(3)).unwrap();
        assert!(g.max_abs() < 1e-14);
        assert!(matches!(
            gromov_product(&Flag::standard(3), &Flag::standard(3), &BasePoint::origin(3)),
            Err(WccError::Transversality { .. })
        ));
        assert!((bms_weight(&Flag::standard(2), &Flag::opposite_standard(2), &BasePoint::origin(2)).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hopf_of_diagonal() {
        let y = CartanVector(vec![0.5, 0.25, -0.75]);
        let h = hopf(&GroupElement::exp_cartan(&y));
        assert!(dist_d(&h.pair.xi_plus, &Flag::standard(3)) < 1e-15);
        assert!(dist_d(&h.pair.xi_minus, &Flag::opposite_standard(3)) < 1e-15);
        assert!((&h.a_coord - &y).max_abs() < 1e-14);
    }

    #[test]
    fn fixed_points_examples() {
        let dg = GroupElement::new(Mat::from_diagonal(&Vector::from_vec(vec![2.0, 1.0, 0.5]))).unwrap();
        let (p, m) = fixed_points(&dg, 1e-9).unwrap();
        assert!(dist_d(&p, &Flag::standard(3)) < 1e-14);
        assert!(dist_d(&m, &Flag::opposite_standard(3)) < 1e-14);

        let g = GroupElement::from_integer(2, &[2, 1, 1, 1]).unwrap();
        let (p, m) = fixed_points(&g, 1e-9).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let want_p = Flag::from_columns(&Mat::from_row_slice(2, 2, &[phi, -1.0, 1.0, phi]));
        let want_m = Flag::from_columns(&Mat::from_row_slice(2, 2, &[1.0, phi, -phi, 1.0]));
        assert!(dist_d(&p, &want_p) < 1e-14);
        assert!(dist_d(&m, &want_m) < 1e-14);

        let u = GroupElement::from_integer(2, &[1, 1, 0, 1]).unwrap();
        assert!(matches!(fixed_points(&u, 1e-9), Err(WccError::Loxodromy { .. })));
    }

    #[test]
    fn fixed_points_wide_spectrum() {
        let mut rng = crate::sampling::rng(31);
        for _ in 0..20 {
            let k = GroupElement::from_orthogonal(crate::sampling::haar_so(&mut rng, 3));
            let y = CartanVector(vec![40.0, 0.3, -40.3]);
            let g = crate::loxodromy::conjugated_diagonal(&k, &y, &[1.0, -1.0, -1.0]);
            let (p, m) = fixed_points(&g, 1e-9).unwrap();
            assert!(dist_d(&p, &Flag::standard(3).act(k.matrix())) < 1e-8);
            assert!(dist_d(&m, &Flag::opposite_standard(3).act(k.matrix())) < 1e-8);
        }
    }

    #[test]
    fn flat_distance_on_standard_flat() {
        let pair = TransversePair::standard(3);
        assert!(flat_distance(&BasePoint::origin(3), &pair).unwrap() < 1e-7);
        let x = BasePoint::from_cartan(&CartanVector(vec![1.0, 0.0, -1.0]));
        assert!(flat_distance(&x, &pair).unwrap() < 1e-7);
    }

    #[test]
    fn flat_map_reconstructs_pair() {
        let xi = Flag::standard(3).act(&Mat::from_row_slice(3, 3, &[1.0, 0.3, -0.2, 0.1, 1.0, 0.4, 0.5, -0.3, 1.0]));
        let eta = Flag::opposite_standard(3).act(&Mat::from_row_slice(3, 3, &[1.0, -0.2, 0.3, 0.6, 1.0, 0.1, 0.2, 0.4, 1.0]));
        let pair = TransversePair::new(xi.clone(), eta.clone()).unwrap();
        let g = pair.flat_map().unwrap();
        assert!(dist_d(&g.act(&Flag::standard(3)), &xi) < 1e-10);
        assert!(dist_d(&g.act(&Flag::opposite_standard(3)), &eta) < 1e-10);
        assert!(iwasawa_cocycle(&g, &Flag::standard(3)).max_abs() < 1e-10);
    }
}
