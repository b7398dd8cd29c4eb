//! Small dense linear-algebra helpers shared by every module.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Complex, ComplexField, DMatrix, DVector, RealField};

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex<f64>>;
pub type C64 = Complex<f64>;

/// Default relative rank tolerance (fraction of the largest singular value).
pub const RANK_TOL: f64 = 1e-9;

pub fn eye(n: usize) -> Mat {
    Mat::identity(n, n)
}

/// Largest absolute entry.
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn cmax_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(ComplexField::modulus(*v)))
}

pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub fn symmetric_defect(m: &Mat) -> f64 {
    max_abs(&(m - m.transpose()))
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Split a `2k×2k` matrix into its `k×k` blocks `(A, B, C, D)`.
pub fn blocks(m: &Mat) -> (Mat, Mat, Mat, Mat) {
    let k = m.nrows() / 2;
    (
        m.view((0, 0), (k, k)).into_owned(),
        m.view((0, k), (k, k)).into_owned(),
        m.view((k, 0), (k, k)).into_owned(),
        m.view((k, k), (k, k)).into_owned(),
    )
}

pub fn from_blocks(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Mat {
    let k = a.nrows();
    let mut m = Mat::zeros(2 * k, 2 * k);
    m.view_mut((0, 0), (k, k)).copy_from(a);
    m.view_mut((0, k), (k, k)).copy_from(b);
    m.view_mut((k, 0), (k, k)).copy_from(c);
    m.view_mut((k, k), (k, k)).copy_from(d);
    m
}

pub fn singular_values(m: &Mat) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(0);
    }
    m.clone().svd(false, false).singular_values
}

/// Numerical rank with singular values below `rel_tol·σ_max` (and below
/// `rel_tol` in absolute terms for tiny matrices) treated as zero.
pub fn rank(m: &Mat, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    let smax = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    let cut = rel_tol * smax.max(1.0);
    sv.iter().filter(|&&s| s > cut).count()
}

/// Dimension of the kernel of a square matrix.
pub fn nullity(m: &Mat, rel_tol: f64) -> usize {
    m.ncols() - rank(m, rel_tol)
}

/// Orthonormal basis (as columns) of the kernel of `m`.
pub fn null_space(m: &Mat, rel_tol: f64) -> Mat {
    let (r, c) = m.shape();
    let sq = if r < c {
        let mut p = Mat::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = sq.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let cut = rel_tol * smax.max(1.0);
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= cut)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    if cols.is_empty() {
        Mat::zeros(c, 0)
    } else {
        Mat::from_columns(&cols)
    }
}

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|v| C64::new(v, 0.0))
}

pub fn c_singular_values(m: &CMat) -> DVector<f64> {
    m.clone().svd(false, false).singular_values
}

pub fn c_nullity(m: &CMat, rel_tol: f64) -> usize {
    let sv = c_singular_values(m);
    let smax = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    let cut = rel_tol * smax.max(1.0);
    sv.iter().filter(|&&s| s <= cut).count()
}

pub fn c_det(m: &CMat) -> C64 {
    m.clone().lu().determinant()
}

/// Eigenvalues of a general complex matrix (via Schur form).
pub fn c_eigenvalues(m: &CMat) -> Vec<C64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    let schur = nalgebra::linalg::Schur::new(m.clone());
    let (_, t) = schur.unpack();
    (0..n).map(|i| t[(i, i)]).collect()
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues(m: &Mat) -> Vec<C64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    m.clone().complex_eigenvalues().iter().copied().collect()
}

pub fn symmetric_eigenvalues(m: &Mat) -> DVector<f64> {
    symmetrize(m).symmetric_eigen().eigenvalues
}

/// Wrap an angle into `(-π, π]`.
pub fn wrap_pi(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut x = a % two_pi;
    if x <= -PI {
        x += two_pi;
    } else if x > PI {
        x -= two_pi;
    }
    x
}

/// Wrap an angle into `[0, 2π)`.
pub fn wrap_2pi(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut x = a % two_pi;
    if x < 0.0 {
        x += two_pi;
    }
    if x >= two_pi {
        x -= two_pi;
    }
    x
}

pub fn cis(theta: f64) -> C64 {
    C64::new(theta.cos(), theta.sin())
}

pub fn arg(z: C64) -> f64 {
    <f64 as RealField>::atan2(z.im, z.re)
}

/// 2×2 rotation matrix.
pub fn rotation(theta: f64) -> Mat {
    let (s, c) = (theta.sin(), theta.cos());
    Mat::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Matrix exponential by scaling and squaring with a Taylor core.
pub fn expm(a: &Mat) -> Mat {
    let n = a.nrows();
    let norm = a.iter().fold(0.0f64, |acc, v| acc + v.abs());
    let mut s = 0i32;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        s += 1;
    }
    let x = a * scale;
    let mut term = eye(n);
    let mut sum = eye(n);
    for k in 1..=20 {
        term = &term * &x / (k as f64);
        sum += &term;
        if max_abs(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

pub fn sqrt(x: f64) -> f64 {
    <f64 as ComplexField>::sqrt(x)
}

pub fn floor(x: f64) -> f64 {
    <f64 as ComplexField>::floor(x)
}

pub fn ceil(x: f64) -> f64 {
    <f64 as ComplexField>::ceil(x)
}

pub fn powi(x: f64, n: i32) -> f64 {
    <f64 as ComplexField>::powi(x, n)
}

pub fn round(x: f64) -> f64 {
    <f64 as ComplexField>::round(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_wide_matrix() {
        let m = Mat::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let ns = null_space(&m, RANK_TOL);
        assert_eq!(ns.ncols(), 2);
        assert!(max_abs(&(&m * &ns)) < 1e-14);
    }

    #[test]
    fn expm_of_rotation_generator() {
        let a = Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]) * 0.7;
        assert!(max_abs(&(expm(&a) - rotation(0.7))) < 1e-14);
    }

    #[test]
    fn angle_wrapping() {
        assert!((wrap_pi(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_2pi(-0.5) - (2.0 * PI - 0.5)).abs() < 1e-12);
    }
}
