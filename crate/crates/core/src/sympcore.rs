//! Symplectic linear algebra on `ℝ^{2k}` with `J_k = [[0, -I], [I, 0]]`.

use alloc::format;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, eye, max_abs, Mat};
use crate::{Error, Result};

/// Default tolerance on `‖MᵀJM − J‖_max`.
pub const SYMPLECTIC_TOL: f64 = 1e-10;

/// `J_k`.
pub fn standard_j(k: usize) -> SymplecticMatrix {
    assert!(k >= 1, "half-dimension must be positive");
    let mut m = Mat::zeros(2 * k, 2 * k);
    for i in 0..k {
        m[(i, k + i)] = -1.0;
        m[(k + i, i)] = 1.0;
    }
    SymplecticMatrix { m }
}

/// `N_k = diag(-I_k, I_k)`.
pub fn standard_n(k: usize) -> Mat {
    assert!(k >= 1, "half-dimension must be positive");
    let mut m = eye(2 * k);
    for i in 0..k {
        m[(i, i)] = -1.0;
    }
    m
}

/// `‖MᵀJ_kM − J_k‖_max` for a square matrix of even size.
pub fn symplectic_defect(m: &Mat) -> Result<f64> {
    let (r, c) = m.shape();
    if r != c || r % 2 != 0 || r == 0 {
        return Err(Error::Dimension(format!("expected an even square matrix, got {r}x{c}")));
    }
    let j = standard_j(r / 2).m;
    Ok(max_abs(&(m.transpose() * &j * m - j)))
}

/// Returns whether `m` is symplectic within `tol`, together with the defect.
pub fn is_symplectic(m: &Mat, tol: f64) -> Result<(bool, f64)> {
    let d = symplectic_defect(m)?;
    Ok((d <= tol, d))
}

/// A `2k×2k` real matrix with `MᵀJ_kM = J_k` (within tolerance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::serde_matrix::MatrixDoc", into = "crate::serde_matrix::MatrixDoc")]
pub struct SymplecticMatrix {
    m: Mat,
}

impl SymplecticMatrix {
    pub fn new(m: Mat) -> Result<Self> {
        Self::with_tol(m, SYMPLECTIC_TOL)
    }

    pub fn with_tol(m: Mat, tol: f64) -> Result<Self> {
        if !linalg::all_finite(&m) {
            return Err(Error::NonFinite("symplectic matrix entries".into()));
        }
        let (ok, defect) = is_symplectic(&m, tol)?;
        if !ok {
            return Err(Error::NotSymplectic { defect });
        }
        Ok(Self { m })
    }

    /// Wraps a matrix known to be symplectic by construction.
    pub fn from_trusted(m: Mat) -> Self {
        debug_assert!(m.nrows() == m.ncols() && m.nrows() % 2 == 0);
        Self { m }
    }

    pub fn identity(k: usize) -> Self {
        Self { m: eye(2 * k) }
    }

    pub fn half_dim(&self) -> usize {
        self.m.nrows() / 2
    }

    pub fn as_mat(&self) -> &Mat {
        &self.m
    }

    pub fn into_mat(self) -> Mat {
        self.m
    }

    /// `M⁻¹ = -J Mᵀ J`.
    pub fn inverse(&self) -> Self {
        Self { m: symplectic_inverse(&self.m) }
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self { m: &self.m * &other.m }
    }

    pub fn defect(&self) -> f64 {
        symplectic_defect(&self.m).unwrap_or(f64::INFINITY)
    }
}

impl From<SymplecticMatrix> for Mat {
    fn from(s: SymplecticMatrix) -> Mat {
        s.m
    }
}

impl TryFrom<Mat> for SymplecticMatrix {
    type Error = Error;
    fn try_from(m: Mat) -> Result<Self> {
        Self::new(m)
    }
}

pub fn symplectic_inverse(m: &Mat) -> Mat {
    let j = standard_j(m.nrows() / 2).m;
    -(&j * m.transpose() * &j)
}

/// The ⋄-product of two even square matrices with the interleaved block layout.
pub fn diamond(m1: &Mat, m2: &Mat) -> Mat {
    let (k1, k2) = (m1.nrows() / 2, m2.nrows() / 2);
    let k = k1 + k2;
    let mut out = Mat::zeros(2 * k, 2 * k);
    for (bi, bj) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1)] {
        for i in 0..k1 {
            for j in 0..k1 {
                out[(bi * k + i, bj * k + j)] = m1[(bi * k1 + i, bj * k1 + j)];
            }
        }
        for i in 0..k2 {
            for j in 0..k2 {
                out[(bi * k + k1 + i, bj * k + k1 + j)] = m2[(bi * k2 + i, bj * k2 + j)];
            }
        }
    }
    out
}

pub fn diamond_product(m1: &SymplecticMatrix, m2: &SymplecticMatrix) -> SymplecticMatrix {
    SymplecticMatrix { m: diamond(&m1.m, &m2.m) }
}

/// `M^{⋄p}`; `p` must be at least one.
pub fn diamond_power(m: &Mat, p: usize) -> Mat {
    assert!(p >= 1);
    let mut out = m.clone();
    for _ in 1..p {
        out = diamond(&out, m);
    }
    out
}

/// Extract the ⋄-factor living on the coordinate planes `planes` of a `2k×2k` matrix.
pub fn diamond_factor(m: &Mat, planes: &[usize]) -> Mat {
    let k = m.nrows() / 2;
    let d = planes.len();
    let mut out = Mat::zeros(2 * d, 2 * d);
    for (bi, bj) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1)] {
        for (i, &pi) in planes.iter().enumerate() {
            for (j, &pj) in planes.iter().enumerate() {
                out[(bi * d + i, bj * d + j)] = m[(bi * k + pi, bj * k + pj)];
            }
        }
    }
    out
}

/// Counts of positive, zero and negative eigenvalues of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Inertia {
    pub plus: usize,
    pub zero: usize,
    pub minus: usize,
}

impl Inertia {
    pub fn signature(&self) -> i64 {
        self.plus as i64 - self.minus as i64
    }

    pub fn dim(&self) -> usize {
        self.plus + self.zero + self.minus
    }
}

/// Inertia of a symmetric matrix; eigenvalues within `±zero_tol` count as zero.
pub fn inertia_of_symmetric(f: &Mat, zero_tol: f64) -> Result<Inertia> {
    if f.nrows() != f.ncols() {
        return Err(Error::Dimension(format!("expected a square matrix, got {:?}", f.shape())));
    }
    let defect = linalg::symmetric_defect(f);
    if defect > 1e-9 * max_abs(f).max(1.0) {
        return Err(Error::NotSymmetric { defect });
    }
    let ev = linalg::symmetric_eigenvalues(f);
    let mut inertia = Inertia { plus: 0, zero: 0, minus: 0 };
    for &l in ev.iter() {
        if l > zero_tol {
            inertia.plus += 1;
        } else if l < -zero_tol {
            inertia.minus += 1;
        } else {
            inertia.zero += 1;
        }
    }
    Ok(inertia)
}

/// Inertia with the zero band scaled by the spectral radius.
pub fn inertia_relative(f: &Mat, rel_tol: f64) -> Result<Inertia> {
    let radius = linalg::symmetric_eigenvalues(&linalg::symmetrize(f))
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    inertia_of_symmetric(f, rel_tol * radius.max(f64::MIN_POSITIVE))
}

/// An orthonormal frame of a Lagrangian subspace of `(ℝ^{2k}, form)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianFrame {
    basis: Mat,
    form: Mat,
}

impl LagrangianFrame {
    /// Frame for the standard form `J_k` on `ℝ^{2k}`; `basis` is `2k×k`.
    pub fn new(basis: Mat, tol: f64) -> Result<Self> {
        let r = basis.nrows();
        if r % 2 != 0 || r == 0 {
            return Err(Error::Dimension(format!("ambient dimension {r} is not even")));
        }
        let form = standard_j(r / 2).m;
        Self::with_form(basis, form, tol)
    }

    /// Frame for an arbitrary non-degenerate skew form.
    pub fn with_form(basis: Mat, form: Mat, tol: f64) -> Result<Self> {
        let (r, c) = basis.shape();
        if form.shape() != (r, r) || 2 * c != r {
            return Err(Error::Dimension(format!(
                "basis {r}x{c} does not fit a Lagrangian of a {}-dimensional form",
                form.nrows()
            )));
        }
        if linalg::rank(&basis, 1e-9) < c {
            return Err(Error::Frame(format!("basis has rank below {c}")));
        }
        let q = basis.qr().q();
        let frame = Self { basis: q, form };
        let defect = frame.isotropy_defect();
        if defect > tol {
            return Err(Error::Frame(format!("subspace is not isotropic (defect {defect:e})")));
        }
        Ok(frame)
    }

    pub fn basis(&self) -> &Mat {
        &self.basis
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn isotropy_defect(&self) -> f64 {
        max_abs(&(self.basis.transpose() * &self.form * &self.basis))
    }

    /// Image of the subspace under `m`.
    pub fn transformed(&self, m: &Mat, tol: f64) -> Result<Self> {
        Self::with_form(m * &self.basis, self.form.clone(), tol)
    }
}

/// `L₀ = {0} × ℝᵏ`.
pub fn lagrangian_l0(k: usize) -> LagrangianFrame {
    let mut b = Mat::zeros(2 * k, k);
    for i in 0..k {
        b[(k + i, i)] = 1.0;
    }
    LagrangianFrame { basis: b, form: standard_j(k).m }
}

/// `L₁ = ℝᵏ × {0}`.
pub fn lagrangian_l1(k: usize) -> LagrangianFrame {
    let mut b = Mat::zeros(2 * k, k);
    for i in 0..k {
        b[(i, i)] = 1.0;
    }
    LagrangianFrame { basis: b, form: standard_j(k).m }
}

/// `dim(span A ∩ span B)` from the rank deficiency of `[A B]`.
pub fn lagrangian_intersection_dim(a: &LagrangianFrame, b: &LagrangianFrame, rank_tol: f64) -> Result<usize> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::Dimension("frames live in different ambient spaces".into()));
    }
    let (r, ca) = a.basis.shape();
    let cb = b.basis.ncols();
    let mut stacked = Mat::zeros(r, ca + cb);
    stacked.view_mut((0, 0), (r, ca)).copy_from(&a.basis);
    stacked.view_mut((0, ca), (r, cb)).copy_from(&b.basis);
    Ok(ca + cb - linalg::rank(&stacked, rank_tol))
}

/// The form `(-J) ⊕ J` on `F = ℝ^{2n} ⊕ ℝ^{2n}`.
pub fn graph_form(n: usize) -> Mat {
    let j = standard_j(n).m;
    let mut f = Mat::zeros(4 * n, 4 * n);
    f.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&(-&j));
    f.view_mut((2 * n, 2 * n), (2 * n, 2 * n)).copy_from(&j);
    f
}

fn graph_basis(m: &Mat) -> Mat {
    let d = m.nrows();
    let mut b = Mat::zeros(2 * d, d);
    b.view_mut((0, 0), (d, d)).copy_from(&eye(d));
    b.view_mut((d, 0), (d, d)).copy_from(m);
    b
}

/// `Gr(M) = {(x, Mx)}` as a Lagrangian frame of `F`.
pub fn graph_lagrangian(m: &SymplecticMatrix) -> LagrangianFrame {
    let basis = graph_basis(&m.m).qr().q();
    LagrangianFrame { basis, form: graph_form(m.half_dim()) }
}

/// Isotropy defect of the graph of an arbitrary even square matrix.
pub fn graph_isotropy_defect(m: &Mat) -> f64 {
    let b = graph_basis(m).qr().q();
    max_abs(&(b.transpose() * graph_form(m.nrows() / 2) * &b))
}

/// A vector `x` reflected by `N`: negates the first half.
pub fn apply_n(x: &DVector<f64>) -> DVector<f64> {
    let n = x.len() / 2;
    let mut y = x.clone();
    for i in 0..n {
        y[i] = -y[i];
    }
    y
}
