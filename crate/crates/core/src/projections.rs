//! Cartan, Jordan, Iwasawa and Busemann calculus on concrete matrices.

use std::sync::OnceLock;

use nalgebra::Complex;

use crate::error::{Result, WccError};
use crate::flagmetric::Flag;
use crate::linalg::{self, Mat};
use crate::rootsys::{killing_norm_of, wall_distance_of, CartanVector};

/// Default loxodromy threshold on consecutive Jordan gaps.
pub const TAU_LOX: f64 = 1e-9;

/// Default regularity margin for angular points.
pub const REGULAR_MARGIN: f64 = 1e-9;

/// `g = k · exp(a) · lᵀ` with `k, l ∈ SO(d)` and `a` in the closed chamber.
#[derive(Clone, Debug)]
pub struct CartanDecomposition {
    pub k: Mat,
    pub a: CartanVector,
    pub l: Mat,
}

/// Jordan data: sorted log-moduli of the eigenvalues.
#[derive(Clone, Debug)]
pub struct Jordan {
    pub lambda: CartanVector,
    /// Smallest gap between consecutive coordinates of `lambda`.
    pub min_gap: f64,
    /// Signed eigenvalues in decreasing modulus, present when all are real.
    pub eigenvalues: Option<Vec<f64>>,
    /// Exact verdict from the integer characteristic polynomial, when known.
    pub exact_loxodromic: Option<bool>,
}

impl Jordan {
    pub fn is_loxodromic(&self, tau: f64) -> bool {
        match self.exact_loxodromic {
            Some(v) => v,
            None => self.min_gap > tau && self.eigenvalues.is_some(),
        }
    }
}

/// An element of SL(d, R), optionally with exact integer entries.
///
/// The inverse is kept alongside the matrix so that both ends of the
/// singular spectrum can be computed to full relative accuracy.
#[derive(Clone, Debug)]
pub struct GroupElement {
    m: Mat,
    inv: Mat,
    integer: Option<Vec<i64>>,
    cartan: OnceLock<CartanDecomposition>,
    jordan: OnceLock<Jordan>,
}

impl GroupElement {
    /// Wraps a real matrix; the determinant must be 1 up to a tolerance
    /// relative to the size of the entries.
    pub fn new(m: Mat) -> Result<Self> {
        if !m.is_square() || m.nrows() < 2 {
            return Err(WccError::Precondition(format!("expected a square matrix of size ≥ 2, got {}×{}", m.nrows(), m.ncols())));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(WccError::Precondition("matrix has non-finite entries".into()));
        }
        let det = m.determinant();
        let scale = m.amax().max(1.0).powi(m.nrows() as i32);
        if (det - 1.0).abs() > 1e-9 * scale {
            return Err(WccError::Precondition(format!("determinant is {det}, expected 1")));
        }
        let inv = linalg::inverse(&m)?;
        Ok(Self::from_parts(m, inv, None))
    }

    /// Wraps a matrix together with its exactly known inverse.
    pub fn with_inverse(m: Mat, inv: Mat) -> Self {
        Self::from_parts(m, inv, None)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(WccError::Precondition("matrix rows have inconsistent lengths".into()));
        }
        Self::new(Mat::from_fn(d, d, |i, j| rows[i][j]))
    }

    /// Integer matrix in row-major order; the determinant must be exactly 1.
    pub fn from_integer(d: usize, entries: &[i64]) -> Result<Self> {
        if entries.len() != d * d {
            return Err(WccError::Precondition(format!("expected {} entries, got {}", d * d, entries.len())));
        }
        let det = int_det(d, entries);
        if det != 1 {
            return Err(WccError::Precondition(format!("integer matrix has determinant {det}")));
        }
        let adj = int_adjugate(d, entries);
        let m = Mat::from_fn(d, d, |i, j| entries[i * d + j] as f64);
        let inv = Mat::from_fn(d, d, |i, j| adj[i * d + j] as f64);
        Ok(Self::from_parts(m, inv, Some(entries.to_vec())))
    }

    fn from_parts(m: Mat, inv: Mat, integer: Option<Vec<i64>>) -> Self {
        GroupElement { m, inv, integer, cartan: OnceLock::new(), jordan: OnceLock::new() }
    }

    pub fn identity(d: usize) -> Self {
        let ent: Vec<i64> = (0..d * d).map(|i| i64::from(i % (d + 1) == 0)).collect();
        Self::from_integer(d, &ent).expect("identity is unimodular")
    }

    /// `exp(Y)` for a traceless diagonal `Y`.
    pub fn exp_cartan(y: &CartanVector) -> Self {
        let neg: Vec<f64> = y.0.iter().map(|v| -v).collect();
        Self::with_inverse(linalg::exp_diag(&y.0), linalg::exp_diag(&neg))
    }

    /// Wraps an orthogonal matrix of determinant one.
    pub fn from_orthogonal(k: Mat) -> Self {
        let inv = k.transpose();
        Self::with_inverse(k, inv)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &Mat {
        &self.m
    }

    pub fn inverse_matrix(&self) -> &Mat {
        &self.inv
    }

    pub fn integer_entries(&self) -> Option<&[i64]> {
        self.integer.as_deref()
    }

    pub fn inverse(&self) -> GroupElement {
        let integer = self.integer.as_ref().map(|e| int_adjugate(self.dim(), e));
        Self::from_parts(self.inv.clone(), self.m.clone(), integer)
    }

    /// `self · other`, keeping exact integer entries when both are integral.
    pub fn mul(&self, other: &GroupElement) -> GroupElement {
        let d = self.dim();
        let integer = match (&self.integer, &other.integer) {
            (Some(a), Some(b)) => Some(int_mul(d, a, b)),
            _ => None,
        };
        Self::from_parts(&self.m * &other.m, &other.inv * &self.inv, integer)
    }

    /// `h · self · h⁻¹`.
    pub fn conjugate_by(&self, h: &GroupElement) -> GroupElement {
        h.mul(self).mul(&h.inverse())
    }

    pub fn pow(&self, n: u32) -> GroupElement {
        let mut acc = GroupElement::identity(self.dim());
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    /// Cartan decomposition, computed once.
    pub fn cartan(&self) -> &CartanDecomposition {
        self.cartan.get_or_init(|| cartan_decompose(&self.m, &self.inv))
    }

    /// Jordan data, computed once.
    pub fn jordan(&self) -> &Jordan {
        self.jordan.get_or_init(|| jordan_data(&self.m, &self.inv, self.integer.as_deref()))
    }

    /// Image of a flag under this element.
    pub fn act(&self, xi: &Flag) -> Flag {
        xi.act(&self.m)
    }
}

pub fn int_det(d: usize, e: &[i64]) -> i128 {
    let a = |i: usize, j: usize| e[i * d + j] as i128;
    match d {
        2 => a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0),
        3 => {
            a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
                + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0))
        }
        _ => {
            // Bareiss fraction-free elimination
            let mut m: Vec<i128> = e.iter().map(|&v| v as i128).collect();
            let mut sign = 1i128;
            let mut prev = 1i128;
            for k in 0..d - 1 {
                if m[k * d + k] == 0 {
                    let Some(p) = (k + 1..d).find(|&i| m[i * d + k] != 0) else { return 0 };
                    for j in 0..d {
                        m.swap(k * d + j, p * d + j);
                    }
                    sign = -sign;
                }
                for i in k + 1..d {
                    for j in k + 1..d {
                        m[i * d + j] = (m[i * d + j] * m[k * d + k] - m[i * d + k] * m[k * d + j]) / prev;
                    }
                }
                prev = m[k * d + k];
            }
            sign * m[d * d - 1]
        }
    }
}

/// Adjugate of an integer matrix; equals the inverse when det = 1.
pub fn int_adjugate(d: usize, e: &[i64]) -> Vec<i64> {
    let mut out = vec![0i64; d * d];
    for i in 0..d {
        for j in 0..d {
            let sub: Vec<i64> = (0..d)
                .filter(|&r| r != j)
                .flat_map(|r| (0..d).filter(move |&c| c != i).map(move |c| (r, c)))
                .map(|(r, c)| e[r * d + c])
                .collect();
            let minor = if d == 1 { 1 } else { int_det(d - 1, &sub) };
            let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
            out[i * d + j] = (sign * minor) as i64;
        }
    }
    out
}

pub fn int_mul(d: usize, a: &[i64], b: &[i64]) -> Vec<i64> {
    let mut out = vec![0i64; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = (0..d).map(|k| a[i * d + k] * b[k * d + j]).sum();
        }
    }
    out
}

/// Combine the top half of a spectrum of `g` with the top half of the
/// spectrum of `g⁻¹`, so both ends are accurate; `top` and `top_inv` are
/// log-values sorted in decreasing order.
fn splice_log_spectrum(top: &[f64], top_inv: &[f64]) -> Vec<f64> {
    let d = top.len();
    let half = d / 2;
    let mut a = vec![0.0; d];
    for i in 0..half {
        a[i] = top[i];
        a[d - 1 - i] = -top_inv[i];
    }
    if d % 2 == 1 {
        let rest: f64 = a.iter().sum();
        a[half] = -rest;
    }
    a
}

fn cartan_decompose(m: &Mat, inv: &Mat) -> CartanDecomposition {
    let (k, s, l) = linalg::svd_sorted(m).expect("SVD of an invertible matrix");
    let (_, s_inv, _) = linalg::svd_sorted(inv).expect("SVD of an invertible matrix");
    let logs: Vec<f64> = s.iter().map(|v| v.ln()).collect();
    let logs_inv: Vec<f64> = s_inv.iter().map(|v| v.ln()).collect();
    let mut a = CartanVector(splice_log_spectrum(&logs, &logs_inv)).centered();
    // keep the chamber ordering exact after rounding
    a.0.sort_by(|x, y| y.total_cmp(x));
    CartanDecomposition { k, a, l }
}

/// Roots of `λ² + bλ + c`.
fn quadratic_roots(b: f64, c: f64) -> [Complex<f64>; 2] {
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        if q == 0.0 {
            return [Complex::new(0.0, 0.0), Complex::new(0.0, 0.0)];
        }
        [Complex::new(q, 0.0), Complex::new(c / q, 0.0)]
    } else {
        let re = -0.5 * b;
        let im = 0.5 * (-disc).sqrt();
        [Complex::new(re, im), Complex::new(re, -im)]
    }
}

/// Roots of `λ³ + aλ² + bλ + c`.
fn cubic_roots(a: f64, b: f64, c: f64) -> [Complex<f64>; 3] {
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let shift = -a / 3.0;
    let poly = |x: f64| ((x + a) * x + b) * x + c;
    let dpoly = |x: f64| (3.0 * x + 2.0 * a) * x + b;
    let polish = |mut x: f64| {
        for _ in 0..4 {
            let dp = dpoly(x);
            if dp == 0.0 {
                break;
            }
            let nx = x - poly(x) / dp;
            if !nx.is_finite() || poly(nx).abs() >= poly(x).abs() {
                break;
            }
            x = nx;
        }
        x
    };
    let disc = -(4.0 * p * p * p + 27.0 * q * q);
    let real_root = if disc > 0.0 && p < 0.0 {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        // the root of largest modulus deflates most stably
        let roots = [0, 1, 2].map(|k| m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + shift);
        roots.into_iter().max_by(|x, y| x.abs().total_cmp(&y.abs())).unwrap_or(shift)
    } else {
        let h = (q * q / 4.0 + p * p * p / 27.0).max(0.0).sqrt();
        (-q / 2.0 + h).cbrt() + (-q / 2.0 - h).cbrt() + shift
    };
    let r = polish(real_root);
    let e = a + r;
    let f = b + r * e;
    let [z1, z2] = quadratic_roots(e, f);
    let fix = |z: Complex<f64>| if z.im == 0.0 { Complex::new(polish(z.re), 0.0) } else { z };
    [Complex::new(r, 0.0), fix(z1), fix(z2)]
}

/// Eigenvalues sorted by decreasing modulus.
fn eigenvalues(m: &Mat) -> Vec<Complex<f64>> {
    let d = m.nrows();
    let mut roots: Vec<Complex<f64>> = match d {
        2 => {
            let tr = m[(0, 0)] + m[(1, 1)];
            let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
            quadratic_roots(-tr, det).to_vec()
        }
        3 => {
            let tr = m.trace();
            let c1 = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)] + m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)]
                + m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)];
            let det = m.determinant();
            cubic_roots(-tr, c1, -det).to_vec()
        }
        _ => m.clone().complex_eigenvalues().iter().copied().collect(),
    };
    roots.sort_by(|x, y| y.norm().total_cmp(&x.norm()));
    roots
}

/// Exact loxodromy verdict from the integer characteristic polynomial.
fn exact_loxodromic(d: usize, e: &[i64]) -> Option<bool> {
    let a = |i: usize, j: usize| e[i * d + j] as i128;
    match d {
        2 => Some((a(0, 0) + a(1, 1)).abs() > 2),
        3 => {
            let tr = a(0, 0) + a(1, 1) + a(2, 2);
            let c1 = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0) + a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0) + a(1, 1) * a(2, 2)
                - a(1, 2) * a(2, 1);
            // λ³ + p λ² + q λ + r with p = −tr, q = c1, r = −1
            let (p, q, r) = (-tr, c1, -1i128);
            let disc = 18 * p * q * r - 4 * p * p * p * r + p * p * q * q - 4 * q * q * q - 27 * r * r;
            // three distinct real roots, and no pair of the form ±μ
            Some(disc > 0 && r != p * q)
        }
        _ => None,
    }
}

fn jordan_data(m: &Mat, inv: &Mat, integer: Option<&[i64]>) -> Jordan {
    let d = m.nrows();
    let ev = eigenvalues(m);
    let ev_inv = eigenvalues(inv);
    let logs: Vec<f64> = ev.iter().map(|z| z.norm().ln()).collect();
    let logs_inv: Vec<f64> = ev_inv.iter().map(|z| z.norm().ln()).collect();
    let mut lambda = CartanVector(splice_log_spectrum(&logs, &logs_inv)).centered();
    lambda.0.sort_by(|x, y| y.total_cmp(x));
    let min_gap = lambda.0.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
    let is_real = |z: &Complex<f64>| z.im.abs() <= 1e-12 * z.norm();
    // only the top halves are accurate; with an odd d the leftover root is
    // real as soon as the others are
    let half = d / 2;
    let eigenvalues = if ev[..half].iter().all(is_real) && ev_inv[..half].iter().all(is_real) {
        let mut out = vec![0.0; d];
        for i in 0..half {
            out[i] = ev[i].re;
            out[d - 1 - i] = 1.0 / ev_inv[i].re;
        }
        if d % 2 == 1 {
            let others: f64 = out.iter().enumerate().filter(|&(i, _)| i != half).map(|(_, v)| v).product();
            out[half] = m.determinant() / others;
        }
        Some(out)
    } else {
        None
    };
    let exact_loxodromic = integer.and_then(|e| exact_loxodromic(d, e));
    Jordan { lambda, min_gap, eigenvalues, exact_loxodromic }
}

/// `(k, a, l)` with `g = k·exp(a)·lᵀ`.
pub fn cartan_project(g: &GroupElement) -> &CartanDecomposition {
    g.cartan()
}

/// `(λ(g), loxodromic?)` with loxodromy decided by threshold `tau`.
pub fn jordan_project(g: &GroupElement, tau: f64) -> (CartanVector, bool) {
    let j = g.jordan();
    (j.lambda.clone(), j.is_loxodromic(tau))
}

/// Iwasawa cocycle `σ(g, ξ)`: `g·k_ξ ∈ K·exp(σ)·N`.
pub fn iwasawa_cocycle(g: &GroupElement, xi: &Flag) -> CartanVector {
    let (_, r) = linalg::mgs_qr(&(g.matrix() * xi.frame()));
    CartanVector((0..g.dim()).map(|i| r[(i, i)].ln()).collect()).centered()
}

/// A point `x = h_x·o` of the symmetric space.
#[derive(Clone, Debug)]
pub struct BasePoint {
    h: GroupElement,
}

impl BasePoint {
    pub fn origin(d: usize) -> Self {
        BasePoint { h: GroupElement::identity(d) }
    }

    pub fn new(h: GroupElement) -> Self {
        BasePoint { h }
    }

    /// `exp(Y)·o`.
    pub fn from_cartan(y: &CartanVector) -> Self {
        BasePoint { h: GroupElement::exp_cartan(y) }
    }

    pub fn representative(&self) -> &GroupElement {
        &self.h
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    /// Same point, representative changed to `h_x·k`.
    pub fn rerepresent(&self, k: &Mat) -> Self {
        BasePoint { h: self.h.mul(&GroupElement::from_orthogonal(k.clone())) }
    }

    /// `h_x⁻¹ g h_x`.
    pub fn pull_back(&self, g: &GroupElement) -> GroupElement {
        self.h.inverse().mul(g).mul(&self.h)
    }

    /// `h_x⁻¹ ξ`.
    pub fn pull_back_flag(&self, xi: &Flag) -> Flag {
        xi.act(self.h.inverse_matrix())
    }

    /// `h_x ξ`.
    pub fn push_flag(&self, xi: &Flag) -> Flag {
        xi.act(self.h.matrix())
    }
}

/// `a_x(g) = a(h_x⁻¹ g h_x)`.
pub fn cartan_at(g: &GroupElement, x: &BasePoint) -> CartanVector {
    x.pull_back(g).cartan().a.clone()
}

/// Busemann cocycle `β_ξ(x, y) = σ(h_x⁻¹h_y, h_y⁻¹ξ)`.
pub fn busemann(xi: &Flag, x: &BasePoint, y: &BasePoint) -> CartanVector {
    let g = x.h.inverse().mul(&y.h);
    iwasawa_cocycle(&g, &y.pull_back_flag(xi))
}

/// `(d_𝔞(x, y), d_X(x, y))`.
pub fn cartan_distance(x: &BasePoint, y: &BasePoint) -> (CartanVector, f64) {
    let a = x.h.inverse().mul(&y.h).cartan().a.clone();
    let n = killing_norm_of(&a);
    (a, n)
}

/// Angular points `(g_x⁺, g_x⁻)` of an `x`-Cartan-regular element.
pub fn angular_points(g: &GroupElement, x: &BasePoint, margin: f64) -> Result<(Flag, Flag)> {
    let c = x.pull_back(g);
    let cd = c.cartan();
    let wall = wall_distance_of(&cd.a);
    if wall.is_nan() || wall <= margin {
        return Err(WccError::Regularity { wall_distance: wall, margin });
    }
    let plus = Flag::from_columns(&(x.h.matrix() * &cd.k));
    let minus = Flag::from_columns(&(x.h.matrix() * &cd.l * linalg::k_iota(g.dim())));
    Ok((plus, minus))
}

/// Largest entry of `a⁻ⁿ p aⁿ`, `a = exp(Y)`, for `n = 1..=n_max`.
pub fn conjugation_orbit(y: &CartanVector, p: &Mat, n_max: u32) -> Vec<f64> {
    (1..=n_max)
        .map(|n| {
            let yn: Vec<f64> = y.0.iter().map(|v| v * n as f64).collect();
            let neg: Vec<f64> = yn.iter().map(|v| -v).collect();
            (linalg::exp_diag(&neg) * p * linalg::exp_diag(&yn)).amax()
        })
        .collect()
}

/// Whether `a⁻ⁿ p aⁿ` never exceeds the size of `p` for `n ≤ n_max`.
pub fn conjugation_orbit_bounded(y: &CartanVector, p: &Mat, n_max: u32) -> bool {
    let bound = p.amax() * (1.0 + 1e-9);
    conjugation_orbit(y, p, n_max).iter().all(|&v| v <= bound)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi() -> f64 {
        (1.0 + 5f64.sqrt()) / 2.0
    }

    #[test]
    fn cartan_examples() {
        let g = GroupElement::from_integer(2, &[1, 1, 0, 1]).unwrap();
        let a = &g.cartan().a;
        assert!((a[0] - phi().ln()).abs() < 1e-14 && (a[1] + phi().ln()).abs() < 1e-14);
        let cd = g.cartan();
        let back = &cd.k * linalg::exp_diag(&cd.a.0) * cd.l.transpose();
        assert!(linalg::max_abs_diff(&back, g.matrix()) < 1e-12);
        let t = 0.7f64;
        let rot = GroupElement::new(Mat::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()])).unwrap();
        assert!(rot.cartan().a.max_abs() < 1e-14);
        assert!(GroupElement::identity(3).cartan().a.max_abs() < 1e-15);
    }

    #[test]
    fn jordan_examples() {
        let u = GroupElement::from_integer(2, &[1, 1, 0, 1]).unwrap();
        let (l, lox) = jordan_project(&u, TAU_LOX);
        assert!(l.max_abs() < 1e-12 && !lox);
        let g = GroupElement::from_integer(2, &[2, 1, 1, 1]).unwrap();
        let (l, lox) = jordan_project(&g, TAU_LOX);
        assert!(lox && (l[0] - 2.0 * phi().ln()).abs() < 1e-14);
        let dg = GroupElement::new(Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0, 0.5]))).unwrap();
        let (l, lox) = jordan_project(&dg, TAU_LOX);
        assert!(lox);
        assert!((l[0] - 2f64.ln()).abs() < 1e-14 && l[1].abs() < 1e-14 && (l[2] + 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn exact_loxodromy_for_integer_3x3() {
        let unip = GroupElement::from_integer(3, &[1, 1, 0, 0, 1, 1, 0, 0, 1]).unwrap();
        assert!(!unip.jordan().is_loxodromic(TAU_LOX));
        // eigenvalues 1, −1, −1
        let pm = GroupElement::from_integer(3, &[0, 1, 0, 1, 0, 0, 0, 0, -1]).unwrap();
        assert!(!pm.jordan().is_loxodromic(TAU_LOX));
        let hyp = GroupElement::from_integer(3, &[2, 1, 0, 1, 1, 0, 0, 0, 1]).unwrap();
        assert_eq!(hyp.jordan().exact_loxodromic, Some(true));
    }

    #[test]
    fn cubic_solver_matches_known_roots() {
        // (λ−3)(λ+0.5)(λ−2/3)
        let r = [3.0, -0.5, 2.0 / 3.0];
        let a = -(r[0] + r[1] + r[2]);
        let b = r[0] * r[1] + r[0] * r[2] + r[1] * r[2];
        let c = -(r[0] * r[1] * r[2]);
        let mut got: Vec<f64> = cubic_roots(a, b, c).iter().map(|z| z.re).collect();
        got.sort_by(|x, y| x.total_cmp(y));
        let mut want = r.to_vec();
        want.sort_by(|x, y| x.total_cmp(y));
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-13);
        }
    }

    #[test]
    fn iwasawa_of_diagonal_on_standard_flag() {
        let y = CartanVector(vec![0.4, 0.1, -0.5]);
        let s = iwasawa_cocycle(&GroupElement::exp_cartan(&y), &Flag::standard(3));
        assert!((&s - &y).max_abs() < 1e-14);
    }

    #[test]
    fn busemann_example() {
        let y = CartanVector(vec![0.3, -0.3]);
        let b = busemann(&Flag::standard(2), &BasePoint::origin(2), &BasePoint::from_cartan(&y));
        assert!((&b - &y).max_abs() < 1e-14);
    }

    #[test]
    fn cartan_distance_example() {
        let y = CartanVector(vec![1.0, 0.0, -1.0]);
        let (a, dist) = cartan_distance(&BasePoint::origin(3), &BasePoint::from_cartan(&y));
        assert!((&a - &y).max_abs() < 1e-13 && (dist - 12f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn angular_points_of_regular_diagonal() {
        let g = GroupElement::exp_cartan(&CartanVector(vec![1.0, 0.2, -1.2]));
        let (p, m) = angular_points(&g, &BasePoint::origin(3), REGULAR_MARGIN).unwrap();
        assert!(crate::flagmetric::dist_d(&p, &Flag::standard(3)) < 1e-14);
        assert!(crate::flagmetric::dist_d(&m, &Flag::opposite_standard(3)) < 1e-14);
        let err = angular_points(&GroupElement::identity(3), &BasePoint::origin(3), REGULAR_MARGIN);
        assert!(matches!(err, Err(WccError::Regularity { .. })));
    }

    #[test]
    fn bounded_conjugation_detects_parabolic() {
        let y = CartanVector(vec![1.0, 0.0, -1.0]);
        let upper = Mat::from_row_slice(3, 3, &[1.0, 2.0, -1.0, 0.0, 1.0, 3.0, 0.0, 0.0, 1.0]);
        let lower = upper.transpose();
        assert!(conjugation_orbit_bounded(&y, &upper, 30));
        assert!(!conjugation_orbit_bounded(&y, &lower, 30));
    }
}
