//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, WccError};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Modified Gram–Schmidt with one re-orthogonalisation pass.
///
/// Returns `(Q, R)` with `A = Q·R`, `Q` orthogonal and `R` upper triangular
/// with a positive diagonal. `A` must be square and invertible.
pub fn mgs_qr(a: &Mat) -> (Mat, Mat) {
    let n = a.ncols();
    let mut q = a.clone();
    let mut r = Mat::zeros(n, n);
    for j in 0..n {
        for _pass in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                r[(i, j)] += proj;
                let qi = q.column(i).clone_owned();
                q.column_mut(j).axpy(-proj, &qi, 1.0);
            }
        }
        let norm = q.column(j).norm();
        r[(j, j)] = norm;
        if norm > 0.0 {
            q.column_mut(j).scale_mut(1.0 / norm);
        }
    }
    (q, r)
}

/// Orthonormal frame with the same nested column spans, forced into SO(d)
/// by flipping the last column if necessary.
pub fn so_frame(a: &Mat) -> Mat {
    let (mut q, _) = mgs_qr(a);
    if q.determinant() < 0.0 {
        let n = q.ncols();
        q.column_mut(n - 1).neg_mut();
    }
    q
}

/// Singular value decomposition with descending singular values and both
/// frames in SO(d): `a = u · diag(s) · vᵀ`.
pub fn svd_sorted(a: &Mat) -> Result<(Mat, Vec<f64>, Mat)> {
    let n = a.nrows();
    let svd = a.clone().svd(true, true);
    let u = svd.u.ok_or_else(|| WccError::Numeric("SVD did not return U".into()))?;
    let vt = svd.v_t.ok_or_else(|| WccError::Numeric("SVD did not return Vᵀ".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let mut uu = Mat::zeros(n, n);
    let mut vv = Mat::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        uu.set_column(dst, &u.column(src));
        vv.set_column(dst, &vt.row(src).transpose());
        s.push(svd.singular_values[src]);
    }
    if uu.determinant() < 0.0 {
        uu.column_mut(n - 1).neg_mut();
        vv.column_mut(n - 1).neg_mut();
    }
    if vv.determinant() < 0.0 {
        // a genuinely negative determinant is an error; when the smallest
        // singular value is at rounding level its sign is noise
        let noise = s[0] * f64::EPSILON * n as f64 * 16.0;
        if s[n - 1] > noise {
            return Err(WccError::Precondition("matrix has negative determinant".into()));
        }
        vv.column_mut(n - 1).neg_mut();
    }
    Ok((uu, s, vv))
}

pub fn inverse(a: &Mat) -> Result<Mat> {
    a.clone().try_inverse().ok_or_else(|| WccError::Numeric(format!("singular matrix {a}")))
}

/// Antidiagonal frame `k_ι` in SO(d) mapping `e_i` to `±e_{d+1-i}`.
pub fn k_iota(d: usize) -> Mat {
    let mut m = Mat::zeros(d, d);
    for i in 0..d {
        m[(d - 1 - i, i)] = 1.0;
    }
    if m.determinant() < 0.0 {
        m.column_mut(0).neg_mut();
    }
    m
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn minor(a: &Mat, rows: &[usize], cols: &[usize]) -> f64 {
    let k = rows.len();
    Mat::from_fn(k, k, |i, j| a[(rows[i], cols[j])]).determinant()
}

/// Plücker coordinates of the span of the first `k` columns of `a`.
pub fn plucker(a: &Mat, k: usize) -> Vector {
    let cols: Vec<usize> = (0..k).collect();
    let rows = subsets(a.nrows(), k);
    Vector::from_iterator(rows.len(), rows.iter().map(|r| minor(a, r, &cols)))
}

/// Plücker coordinates of the span of the given columns of `a`.
pub fn plucker_cols(a: &Mat, cols: &[usize]) -> Vector {
    let rows = subsets(a.nrows(), cols.len());
    Vector::from_iterator(rows.len(), rows.iter().map(|r| minor(a, r, cols)))
}

/// `k`-th compound matrix, i.e. the action of `a` on `Λ^k R^d`.
pub fn compound(a: &Mat, k: usize) -> Mat {
    let idx = subsets(a.nrows(), k);
    let n = idx.len();
    Mat::from_fn(n, n, |i, j| minor(a, &idx[i], &idx[j]))
}

/// Norm of `v ∧ w` via Lagrange's identity, accurate for nearly parallel inputs.
pub fn wedge_norm(v: &Vector, w: &Vector) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let m = v[i] * w[j] - v[j] * w[i];
            s += m * m;
        }
    }
    s.sqrt()
}

/// Matrix exponential of a diagonal vector.
pub fn exp_diag(y: &[f64]) -> Mat {
    Mat::from_diagonal(&Vector::from_iterator(y.len(), y.iter().map(|v| v.exp())))
}

pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    (a - b).amax()
}

/// Unit vector spanning the (numerical) kernel of a square matrix.
pub fn null_vector(a: &Mat) -> Result<Vector> {
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.ok_or_else(|| WccError::Numeric("SVD did not return Vᵀ".into()))?;
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| WccError::Numeric("empty matrix".into()))?;
    Ok(vt.row(imin).transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qr_reconstructs_with_positive_diagonal() {
        let a = Mat::from_row_slice(3, 3, &[2.0, 1.0, 0.5, -1.0, 3.0, 0.2, 0.3, 0.1, 1.5]);
        let (q, r) = mgs_qr(&a);
        assert!(max_abs_diff(&(&q * &r), &a) < 1e-13);
        assert!(max_abs_diff(&(q.transpose() * &q), &Mat::identity(3, 3)) < 1e-14);
        for i in 0..3 {
            assert!(r[(i, i)] > 0.0);
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn svd_sorted_is_special_orthogonal() {
        let a = Mat::from_row_slice(3, 3, &[1.0, 4.0, 0.0, 0.0, 1.0, 2.0, 0.5, 0.0, 1.0]);
        let (u, s, v) = svd_sorted(&a).unwrap();
        assert!(u.determinant() > 0.0 && v.determinant() > 0.0);
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        let back = &u * Mat::from_diagonal(&Vector::from_vec(s)) * v.transpose();
        assert!(max_abs_diff(&back, &a) < 1e-12);
    }

    #[test]
    fn compound_of_product_is_product_of_compounds() {
        let a = Mat::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.5, 1.0, 2.0, 0.0, 1.0, 3.0]);
        let b = Mat::from_row_slice(3, 3, &[0.0, 1.0, 1.0, 1.0, 0.0, 2.0, 3.0, 1.0, 0.0]);
        let lhs = compound(&(&a * &b), 2);
        let rhs = compound(&a, 2) * compound(&b, 2);
        assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn k_iota_is_special_orthogonal() {
        for d in 2..6 {
            assert!((k_iota(d).determinant() - 1.0).abs() < 1e-14);
        }
    }
}
