//! Seeded random sampling of frames, flags and group elements.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::flagmetric::Flag;
use crate::linalg::{self, Mat};
use crate::projections::GroupElement;
use crate::rootsys::CartanVector;

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Mat {
    Mat::from_fn(d, d, |_, _| StandardNormal.sample(rng))
}

/// Haar-distributed element of SO(d) (QR of a Gaussian matrix).
pub fn haar_so<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Mat {
    linalg::so_frame(&gaussian_matrix(rng, d))
}

/// A flag distributed according to the K-invariant measure `μ_o`.
pub fn uniform_flag<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Flag {
    Flag::from_columns(&haar_so(rng, d))
}

/// Traceless vector with coordinates uniform in `[-scale, scale]` before centring.
pub fn random_cartan<R: Rng + ?Sized>(rng: &mut R, d: usize, scale: f64) -> CartanVector {
    CartanVector((0..d).map(|_| rng.random_range(-scale..=scale)).collect()).centered()
}

/// `k₁ exp(Y) k₂` with Haar `k_i` and random `Y`.
pub fn random_element<R: Rng + ?Sized>(rng: &mut R, d: usize, scale: f64) -> GroupElement {
    let k1 = GroupElement::from_orthogonal(haar_so(rng, d));
    let k2 = GroupElement::from_orthogonal(haar_so(rng, d));
    k1.mul(&GroupElement::exp_cartan(&random_cartan(rng, d, scale))).mul(&k2)
}

/// `exp(X)` for a random traceless `X` with `‖X‖_F = radius`.
pub fn near_identity<R: Rng + ?Sized>(rng: &mut R, d: usize, radius: f64) -> (GroupElement, Mat) {
    let mut x = gaussian_matrix(rng, d);
    let tr = x.trace() / d as f64;
    for i in 0..d {
        x[(i, i)] -= tr;
    }
    let x = &x * (radius / x.norm());
    let e = x.clone().exp();
    let inv = (-&x).exp();
    (GroupElement::with_inverse(e, inv), x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_is_special_orthogonal() {
        let mut r = rng(7);
        for d in 2..=4 {
            let k = haar_so(&mut r, d);
            assert!(linalg::max_abs_diff(&(k.transpose() * &k), &Mat::identity(d, d)) < 1e-13);
            assert!((k.determinant() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn near_identity_has_unit_determinant() {
        let (g, x) = near_identity(&mut rng(3), 3, 0.2);
        assert!((g.matrix().determinant() - 1.0).abs() < 1e-12);
        assert!((x.norm() - 0.2).abs() < 1e-14);
    }

    #[test]
    fn seeds_are_reproducible() {
        let a = random_cartan(&mut rng(11), 3, 1.0);
        let b = random_cartan(&mut rng(11), 3, 1.0);
        assert_eq!(a.0, b.0);
    }
}
