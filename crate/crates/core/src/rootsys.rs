//! Root data for the split Cartan subspace of sl(d, R).
//!
//! 𝔞 is stored as length-`d` coordinate vectors with zero sum, the closed
//! positive chamber is the set of non-increasing vectors, and the Killing
//! form is normalised as `2d·trace(XY)`.

use std::collections::HashMap;
use std::ops::{Add, Index, Mul, Neg, Sub};
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Result, WccError};

/// Relative tolerance used for the zero-sum and chamber preconditions.
const COORD_TOL: f64 = 1e-9;

/// Killing norm `√(2d·Σ y_i²)` of a vector assumed to be traceless.
pub fn killing_norm_of(y: &CartanVector) -> f64 {
    (2.0 * y.dim() as f64).sqrt() * y.euclid()
}

/// Wall distance `min_i α_i(Y)/‖α_i‖_*` for a vector assumed to be in the
/// closed chamber; every simple root has dual norm `1/√d`.
pub fn wall_distance_of(y: &CartanVector) -> f64 {
    let scale = (y.dim() as f64).sqrt();
    let m = y.0.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
    (m * scale).max(0.0)
}

/// `ρ(Y)` for a `d`-coordinate vector.
pub fn rho_of(y: &CartanVector) -> f64 {
    let d = y.dim() as f64;
    0.5 * y.0.iter().enumerate().map(|(i, v)| (d - 1.0 - 2.0 * i as f64) * v).sum::<f64>()
}

/// Opposition involution: reverse and negate.
pub fn iota_of(y: &CartanVector) -> CartanVector {
    CartanVector(y.0.iter().rev().map(|v| -v).collect())
}

/// The traceless vector whose fundamental weights `χ_k`, `k = 1..d`, are `c`.
pub fn from_fundamental_weights(c: &[f64]) -> CartanVector {
    let d = c.len() + 1;
    let mut out = Vec::with_capacity(d);
    let mut prev = 0.0;
    for k in 0..d {
        let ck = if k + 1 < d { c[k] } else { 0.0 };
        out.push(ck - prev);
        prev = ck;
    }
    CartanVector(out)
}

/// An element of the Cartan subspace 𝔞 in diagonal coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CartanVector(pub Vec<f64>);

impl CartanVector {
    pub fn new(coords: Vec<f64>) -> Self {
        CartanVector(coords)
    }

    pub fn zeros(d: usize) -> Self {
        CartanVector(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Subtract the mean so that the coordinates sum to zero.
    pub fn centered(mut self) -> Self {
        let mean = self.sum() / self.0.len() as f64;
        for y in &mut self.0 {
            *y -= mean;
        }
        self
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, y| m.max(y.abs()))
    }

    /// Plain Euclidean norm of the coordinates (not the Killing norm).
    pub fn euclid(&self) -> f64 {
        self.0.iter().map(|y| y * y).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        CartanVector(self.0.iter().map(|y| c * y).collect())
    }
}

impl Index<usize> for CartanVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for &CartanVector {
    type Output = CartanVector;
    fn add(self, rhs: &CartanVector) -> CartanVector {
        CartanVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &CartanVector {
    type Output = CartanVector;
    fn sub(self, rhs: &CartanVector) -> CartanVector {
        CartanVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &CartanVector {
    type Output = CartanVector;
    fn neg(self) -> CartanVector {
        CartanVector(self.0.iter().map(|a| -a).collect())
    }
}

impl Mul<&CartanVector> for f64 {
    type Output = CartanVector;
    fn mul(self, rhs: &CartanVector) -> CartanVector {
        rhs.scale(self)
    }
}

/// The positive root `y_i - y_j` (`i < j`, zero-based). Multiplicity is 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Root {
    pub i: usize,
    pub j: usize,
}

impl Root {
    pub fn eval(&self, y: &[f64]) -> f64 {
        y[self.i] - y[self.j]
    }

    /// Coefficients in the simple-root basis: `y_i - y_j = α_i + … + α_{j-1}`.
    pub fn simple_coefficients(&self, d: usize) -> Vec<u32> {
        (0..d - 1).map(|k| u32::from(k >= self.i && k < self.j)).collect()
    }

    pub fn is_simple(&self) -> bool {
        self.j == self.i + 1
    }

    /// Coordinate covector of the root.
    pub fn covector(&self, d: usize) -> Vec<f64> {
        let mut c = vec![0.0; d];
        c[self.i] = 1.0;
        c[self.j] = -1.0;
        c
    }
}

/// Root system of type A_{d-1} with cached optimisation constants.
#[derive(Clone, Debug)]
pub struct RootSystem {
    d: usize,
    delta0: f64,
    c_a: f64,
    c_g: f64,
}

impl RootSystem {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(WccError::Parameter(format!("dimension must be at least 2, got {d}")));
        }
        let mut rs = RootSystem { d, delta0: 0.0, c_a: 0.0, c_g: 0.0 };
        rs.delta0 = rs.maximize_linear(&rs.two_rho_covector())?;
        rs.c_a = rs.compute_c_a();
        rs.c_g = rs.compute_c_g()?;
        Ok(rs)
    }

    /// Shared instance for dimension `d`, built once per process.
    pub fn cached(d: usize) -> &'static RootSystem {
        static CACHE: OnceLock<Mutex<HashMap<usize, &'static RootSystem>>> = OnceLock::new();
        let mut map = CACHE.get_or_init(|| Mutex::new(HashMap::new())).lock().expect("root system cache poisoned");
        map.entry(d).or_insert_with(|| Box::leak(Box::new(RootSystem::new(d).expect("dimension at least 2"))))
    }

    pub fn sl2() -> Self {
        Self::new(2).expect("rank one root system")
    }

    pub fn sl3() -> Self {
        Self::new(3).expect("rank two root system")
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn rank(&self) -> usize {
        self.d - 1
    }

    pub fn killing_scale(&self) -> f64 {
        2.0 * self.d as f64
    }

    fn check_traceless(&self, y: &CartanVector) -> Result<()> {
        if y.dim() != self.d {
            return Err(WccError::Precondition(format!(
                "expected {} coordinates, got {}",
                self.d,
                y.dim()
            )));
        }
        if y.sum().abs() > COORD_TOL * (1.0 + y.max_abs()) {
            return Err(WccError::Precondition(format!(
                "vector {:?} is not traceless (sum {:.3e})",
                y.0,
                y.sum()
            )));
        }
        Ok(())
    }

    pub fn killing_inner(&self, y: &CartanVector, z: &CartanVector) -> f64 {
        self.killing_scale() * y.0.iter().zip(&z.0).map(|(a, b)| a * b).sum::<f64>()
    }

    /// `√(2d·Σ y_i²)`; errors if `y` is not traceless.
    pub fn killing_norm(&self, y: &CartanVector) -> Result<f64> {
        self.check_traceless(y)?;
        Ok(self.norm(y))
    }

    /// Killing norm without the trace check, for vectors known to be in 𝔞.
    pub fn norm(&self, y: &CartanVector) -> f64 {
        self.killing_scale().sqrt() * y.euclid()
    }

    pub fn positive_roots(&self) -> Vec<Root> {
        let mut out = Vec::with_capacity(self.d * (self.d - 1) / 2);
        for i in 0..self.d {
            for j in i + 1..self.d {
                out.push(Root { i, j });
            }
        }
        out
    }

    pub fn simple_roots(&self) -> Vec<Root> {
        (0..self.d - 1).map(|i| Root { i, j: i + 1 }).collect()
    }

    /// `ρ(Y) = ½ Σ_{α>0} α(Y)`.
    pub fn rho(&self, y: &CartanVector) -> f64 {
        0.5 * self.two_rho_covector().iter().zip(&y.0).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Coordinate covector of `2ρ`: entry `i` is `d - 1 - 2i`.
    pub fn two_rho_covector(&self) -> Vec<f64> {
        (0..self.d).map(|i| (self.d as f64) - 1.0 - 2.0 * i as f64).collect()
    }

    /// `ρ` expanded in the simple roots, doubled so the entries are integers.
    pub fn two_rho_simple_coefficients(&self) -> Vec<u32> {
        let mut n = vec![0u32; self.d - 1];
        for r in self.positive_roots() {
            for (k, c) in r.simple_coefficients(self.d).iter().enumerate() {
                n[k] += c;
            }
        }
        n
    }

    /// Fundamental weight `χ_k(Y) = y_1 + … + y_k`, `k` in `1..d`.
    pub fn chi(&self, k: usize, y: &CartanVector) -> f64 {
        y.0[..k].iter().sum()
    }

    /// Inverse of the fundamental weights: the traceless vector with `χ_k = c[k-1]`.
    pub fn from_fundamental_weights(&self, c: &[f64]) -> CartanVector {
        from_fundamental_weights(&c[..self.d - 1])
    }

    /// Opposition involution: reverse and negate.
    pub fn iota(&self, y: &CartanVector) -> CartanVector {
        iota_of(y)
    }

    /// Weyl group action by a coordinate permutation: `(wY)_i = Y_{perm[i]}`.
    pub fn weyl_act(&self, perm: &[usize], y: &CartanVector) -> CartanVector {
        CartanVector(perm.iter().map(|&p| y.0[p]).collect())
    }

    /// Sorts the coordinates into the closed chamber.
    pub fn to_chamber(&self, y: &CartanVector) -> CartanVector {
        let mut v = y.0.clone();
        v.sort_by(|a, b| b.total_cmp(a));
        CartanVector(v)
    }

    pub fn in_closed_chamber(&self, y: &CartanVector) -> bool {
        let tol = COORD_TOL * (1.0 + y.max_abs());
        y.0.windows(2).all(|w| w[0] - w[1] >= -tol)
    }

    /// Killing dual norm of a linear functional given by a coordinate covector.
    pub fn dual_norm(&self, covector: &[f64]) -> f64 {
        let mean = covector.iter().sum::<f64>() / self.d as f64;
        let e = covector.iter().map(|c| (c - mean).powi(2)).sum::<f64>().sqrt();
        e / self.killing_scale().sqrt()
    }

    /// Distance from `y` to the boundary of the closed chamber.
    pub fn wall_distance(&self, y: &CartanVector) -> Result<f64> {
        self.check_traceless(y)?;
        if !self.in_closed_chamber(y) {
            return Err(WccError::Precondition(format!("vector {:?} lies outside the closed chamber", y.0)));
        }
        Ok(self.wall_distance_unchecked(y))
    }

    /// Wall distance for vectors already known to be in the chamber.
    pub fn wall_distance_unchecked(&self, y: &CartanVector) -> f64 {
        wall_distance_of(y)
    }

    /// Per-wall distances `α_i(Y)/‖α_i‖_*`.
    pub fn wall_distances(&self, y: &CartanVector) -> Vec<f64> {
        let scale = (self.d as f64).sqrt();
        y.0.windows(2).map(|w| (w[0] - w[1]) * scale).collect()
    }

    /// Smallest `c` such that `inf_α α(Y) ≥ wall_distance(Y)/c` in the chamber.
    pub fn wall_root_constant(&self) -> f64 {
        self.simple_roots()
            .iter()
            .map(|r| 1.0 / self.dual_norm(&r.covector(self.d)))
            .fold(0.0, f64::max)
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    pub fn c_a(&self) -> f64 {
        self.c_a
    }

    /// Uniform Levi gap `min_{Θ≠∅} (δ₀ − δ₀(H_Θ))`.
    pub fn c_g(&self) -> f64 {
        self.c_g
    }

    /// Balanced/unbalanced threshold `κ = 2δ₀/c_G`.
    pub fn kappa_balance(&self) -> f64 {
        2.0 * self.delta0 / self.c_g
    }

    /// Growth exponent of the Levi factor `H_Θ`, `Θ` given as simple-root indices.
    pub fn levi_delta0(&self, theta: &[usize]) -> Result<f64> {
        if let Some(bad) = theta.iter().find(|&&k| k >= self.d - 1) {
            return Err(WccError::Parameter(format!("simple root index {bad} out of range")));
        }
        let mut cov = vec![0.0; self.d];
        for r in self.positive_roots() {
            let inside = r.simple_coefficients(self.d).iter().enumerate().all(|(k, &c)| c == 0 || !theta.contains(&k));
            if inside {
                for (c, v) in cov.iter_mut().zip(r.covector(self.d)) {
                    *c += v;
                }
            }
        }
        self.maximize_linear(&cov)
    }

    /// Maximum of `Y ↦ Σ c_i y_i` over the Killing unit ball.
    ///
    /// Projected gradient ascent on the unit sphere from two fixed seeds; the
    /// analytic candidate `(1,0,…,0,−1)` is included as a lower bound.
    fn maximize_linear(&self, covector: &[f64]) -> Result<f64> {
        let d = self.d;
        let grad = {
            let mean = covector.iter().sum::<f64>() / d as f64;
            CartanVector(covector.iter().map(|c| (c - mean) / self.killing_scale()).collect())
        };
        let f = |y: &CartanVector| covector.iter().zip(&y.0).map(|(c, v)| c * v).sum::<f64>();
        let gnorm = self.norm(&grad);
        if gnorm == 0.0 {
            return Ok(0.0);
        }
        let seeds = [
            CartanVector((0..d).map(|i| (d - i) as f64 * 0.7 + (i % 2) as f64).collect()).centered(),
            CartanVector((0..d).map(|i| ((i * 7 + 3) % 5) as f64 - 1.3 * i as f64).collect()).centered(),
        ];
        let mut values = Vec::new();
        for seed in seeds {
            let mut y = seed.scale(1.0 / self.norm(&seed));
            for _ in 0..10_000 {
                let step = &y + &grad.scale(1.0 / gnorm);
                let next = step.scale(1.0 / self.norm(&step));
                let moved = (&next - &y).euclid();
                y = next;
                if moved < 1e-16 {
                    break;
                }
            }
            values.push(f(&y));
        }
        if (values[0] - values[1]).abs() > 1e-9 {
            return Err(WccError::Numeric(format!(
                "linear maximisation seeds disagree: {} vs {}",
                values[0], values[1]
            )));
        }
        let mut cand = vec![0.0; d];
        cand[0] = 1.0;
        cand[d - 1] = -1.0;
        let cand = CartanVector(cand);
        let cand = cand.scale(1.0 / self.norm(&cand));
        Ok(values[0].max(values[1]).max(f(&cand)))
    }

    /// `C_𝔞`: the smallest `C` with `‖v‖/√C ≤ max_k |χ_k(v)| ≤ √C‖v‖`.
    ///
    /// The upper ratio is the largest dual norm of a fundamental weight; the
    /// lower one is attained at a vertex of the cube `{|χ_k| ≤ 1}`.
    fn compute_c_a(&self) -> f64 {
        let r = self.rank();
        let upper = (1..self.d)
            .map(|k| {
                let cov: Vec<f64> = (0..self.d).map(|i| if i < k { 1.0 } else { 0.0 }).collect();
                self.dual_norm(&cov)
            })
            .fold(0.0, f64::max);
        let mut far = 0.0f64;
        for mask in 0..(1u32 << r) {
            let c: Vec<f64> = (0..r).map(|k| if mask >> k & 1 == 1 { 1.0 } else { -1.0 }).collect();
            far = far.max(self.norm(&self.from_fundamental_weights(&c)));
        }
        let lower = 1.0 / far;
        (upper * upper).max(1.0 / (lower * lower))
    }

    fn compute_c_g(&self) -> Result<f64> {
        let r = self.rank();
        let mut gap = f64::INFINITY;
        for mask in 1..(1u32 << r) {
            let theta: Vec<usize> = (0..r).filter(|k| mask >> k & 1 == 1).collect();
            gap = gap.min(self.delta0 - self.levi_delta0(&theta)?);
        }
        Ok(gap)
    }

    /// Dual basis of the simple roots (fundamental coweights): `α_j(ω_k) = δ_jk`.
    pub fn coweights(&self) -> Vec<CartanVector> {
        let d = self.d as f64;
        (1..self.d)
            .map(|k| CartanVector((0..self.d).map(|i| if i < k { (d - k as f64) / d } else { -(k as f64) / d }).collect()))
            .collect()
    }

    /// An orthonormal basis of 𝔞 for the Killing inner product.
    pub fn killing_basis(&self) -> Vec<CartanVector> {
        // Helmert-style basis of the zero-sum hyperplane, rescaled.
        let s = self.killing_scale().sqrt();
        (1..self.d)
            .map(|k| {
                let kf = k as f64;
                let norm = (kf * (kf + 1.0)).sqrt();
                let mut v = vec![0.0; self.d];
                for x in v.iter_mut().take(k) {
                    *x = 1.0 / norm;
                }
                v[k] = -kf / norm;
                CartanVector(v.iter().map(|x| x / s).collect())
            })
            .collect()
    }

    /// `Σ u_k e_k` for the Killing orthonormal basis.
    pub fn from_killing_coords(&self, u: &[f64]) -> CartanVector {
        let mut y = vec![0.0; self.d];
        for (uk, e) in u.iter().zip(self.killing_basis()) {
            for (yi, ei) in y.iter_mut().zip(&e.0) {
                *yi += uk * ei;
            }
        }
        CartanVector(y)
    }

    pub fn to_killing_coords(&self, y: &CartanVector) -> Vec<f64> {
        self.killing_basis().iter().map(|e| self.killing_inner(e, y)).collect()
    }

    /// Volume factor of the simple-root coordinates: `dLeb = J_Π Π dy_β`.
    pub fn jacobian_simple(&self) -> f64 {
        let r = self.rank();
        let w = self.coweights();
        let m = nalgebra::DMatrix::from_fn(r, r, |i, j| self.to_killing_coords(&w[j])[i]);
        m.determinant().abs()
    }
}
