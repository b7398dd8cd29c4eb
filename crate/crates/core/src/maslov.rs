//! Index functions of symplectic paths.
//!
//! Every index is a spectral flow of a unitary `W(t)` whose eigenvalues at a
//! reference point mark the intersections with the relevant Lagrangian. The
//! flow is assembled from the winding of `det W` along the path plus
//! endpoint corrections: eigenvalues sitting on the reference at an endpoint
//! are counted as lying a full turn above it. That endpoint rule gives the
//! Cappell–Lee–Miller convention (start counts `m⁺`, end counts `-m⁻` of the
//! crossing form), which is also the lower-semicontinuous choice for
//! degenerate endpoints of `i_ω`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::ComplexField;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, blocks, cis, eye, max_abs, CMat, Mat, C64, RANK_TOL};
use crate::path::MatFn;
pub use crate::path::{GeneratorField, PathKind, SymplecticPath};
use crate::sympcore::{diamond_power, inertia_of_symmetric, Inertia};
use crate::{Error, Result};

/// Largest accepted change of `arg det W` between adjacent evaluations.
const MAX_PHASE_STEP: f64 = 0.5;
/// Bisection depth limit when refining the scan grid.
const MAX_DEPTH: u32 = 48;

/// An index together with the endpoint nullity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexPair {
    pub index: i64,
    pub nullity: usize,
}

impl IndexPair {
    pub fn sum(&self) -> i64 {
        self.index + self.nullity as i64
    }
}

/// Which Lagrangian the index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Lagrangian {
    L0,
    L1,
}

impl Lagrangian {
    pub fn from_index(j: usize) -> Result<Self> {
        match j {
            0 => Ok(Self::L0),
            1 => Ok(Self::L1),
            _ => Err(Error::Domain(format!("Lagrangian index must be 0 or 1, got {j}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Target {
    Lag(Lagrangian),
    Omega(C64),
}

/// The unitary model of one index function in half-dimension `n`.
struct Model {
    target: Target,
    /// Orthonormal eigenbases of `i·diag(-J, J)` for the graph model.
    z_minus: CMat,
    z_plus: CMat,
    /// `conj(det U_ref)` and `U_ref*` for the graph model.
    ref_det_conj: C64,
    ref_adj: CMat,
}

fn graph_bases(n: usize) -> (CMat, CMat) {
    let d = 2 * n;
    let s = 1.0 / linalg::sqrt(2.0);
    let i = C64::new(0.0, 1.0);
    let mut zp = CMat::zeros(2 * d, d);
    let mut zm = CMat::zeros(2 * d, d);
    for k in 0..n {
        // oriented so that positive generators turn eigenvalues counterclockwise
        zp[(k, k)] = C64::new(s, 0.0);
        zp[(n + k, k)] = -i * s;
        zp[(d + k, n + k)] = C64::new(s, 0.0);
        zp[(d + n + k, n + k)] = i * s;
        zm[(k, k)] = C64::new(s, 0.0);
        zm[(n + k, k)] = i * s;
        zm[(d + k, n + k)] = C64::new(s, 0.0);
        zm[(d + n + k, n + k)] = -i * s;
    }
    (zp, zm)
}

fn unit(z: C64) -> C64 {
    let r = ComplexField::modulus(z);
    if r > 0.0 && r.is_finite() {
        z / r
    } else {
        C64::new(f64::NAN, f64::NAN)
    }
}

impl Model {
    fn new(target: Target, n: usize) -> Self {
        let mut m = Self {
            target,
            z_minus: CMat::zeros(0, 0),
            z_plus: CMat::zeros(0, 0),
            ref_det_conj: C64::new(1.0, 0.0),
            ref_adj: CMat::zeros(0, 0),
        };
        if let Target::Omega(w) = target {
            let (zm, zp) = graph_bases(n);
            m.z_minus = zm;
            m.z_plus = zp;
            let u_ref = m.graph_unitary_c(&(CMat::identity(2 * n, 2 * n) * w));
            m.ref_det_conj = unit(linalg::c_det(&u_ref)).conj();
            m.ref_adj = u_ref.adjoint();
        }
        m
    }

    fn graph_parts(&self, m: &CMat) -> (CMat, CMat) {
        let d = m.nrows();
        let mut g = CMat::zeros(2 * d, d);
        g.view_mut((0, 0), (d, d)).copy_from(&CMat::identity(d, d));
        g.view_mut((d, 0), (d, d)).copy_from(m);
        // an orthonormal frame makes both projections unitary up to 1/√2
        let q = g.qr().q();
        (self.z_plus.adjoint() * &q, self.z_minus.adjoint() * &q)
    }

    fn graph_unitary_c(&self, m: &CMat) -> CMat {
        let (pp, pm) = self.graph_parts(m);
        let inv = pm.try_inverse().expect("graph of a symplectic map is transversal to E+");
        pp * inv
    }

    /// Reference angle of the intersection eigenvalue.
    fn reference(&self) -> f64 {
        match self.target {
            Target::Lag(Lagrangian::L0) => PI,
            _ => 0.0,
        }
    }

    /// `det W / |det W|`.
    fn phase(&self, m: &Mat) -> C64 {
        match self.target {
            Target::Lag(l) => {
                let (a, b, c, d) = blocks(m);
                let (x, y) = match l {
                    Lagrangian::L0 => (b, d),
                    Lagrangian::L1 => (a, c),
                };
                let z = unit(linalg::c_det(&lagrangian_unitary(&x, &y)));
                z * z
            }
            Target::Omega(_) => {
                let (pp, pm) = self.graph_parts(&linalg::to_complex(m));
                unit(linalg::c_det(&pp) * linalg::c_det(&pm).conj() * self.ref_det_conj)
            }
        }
    }

    fn w_matrix(&self, m: &Mat) -> CMat {
        match self.target {
            Target::Lag(l) => {
                let (a, b, c, d) = blocks(m);
                let (x, y) = match l {
                    Lagrangian::L0 => (b, d),
                    Lagrangian::L1 => (a, c),
                };
                let u = lagrangian_unitary(&x, &y);
                &u * u.transpose()
            }
            Target::Omega(_) => &self.ref_adj * self.graph_unitary_c(&linalg::to_complex(m)),
        }
    }

    fn nullity(&self, m: &Mat) -> usize {
        match self.target {
            Target::Lag(l) => nu_lagrangian(m, l),
            Target::Omega(w) => nu_omega(m, w),
        }
    }

    /// Sum of eigenvalue angles measured from the reference in `(0, 2π]`,
    /// with the `ν` eigenvalues closest to the reference pinned at `2π`.
    fn endpoint_sum(&self, m: &Mat) -> (f64, usize) {
        let nu = self.nullity(m);
        let reference = self.reference();
        let mut rel: Vec<f64> = linalg::c_eigenvalues(&self.w_matrix(m))
            .into_iter()
            .map(|z| linalg::wrap_2pi(linalg::arg(z) - reference))
            .collect();
        rel.sort_by(|a, b| {
            let da = a.min(2.0 * PI - a);
            let db = b.min(2.0 * PI - b);
            da.partial_cmp(&db).unwrap()
        });
        let nu_eff = nu.min(rel.len());
        for r in rel.iter_mut().take(nu_eff) {
            *r = 2.0 * PI;
        }
        (rel.iter().sum(), nu)
    }
}

/// `X + iY` for an orthonormalized frame `[X; Y]`; unitary for Lagrangian frames.
fn lagrangian_unitary(x: &Mat, y: &Mat) -> CMat {
    let k = x.nrows();
    let mut frame = Mat::zeros(2 * k, x.ncols());
    frame.view_mut((0, 0), x.shape()).copy_from(x);
    frame.view_mut((k, 0), y.shape()).copy_from(y);
    let q = frame.qr().q();
    CMat::from_fn(k, x.ncols(), |i, j| C64::new(q[(i, j)], q[(k + i, j)]))
}

/// Total change of `arg det W` along the path, refining the grid until every
/// step is below [`MAX_PHASE_STEP`] and agrees with its midpoint split.
fn winding(path: &SymplecticPath, model: &Model) -> Result<f64> {
    let grid = path.grid();
    let samples = path.samples();
    let eval = path.evaluator();
    let phases: Vec<C64> = samples.iter().map(|m| model.phase(m)).collect();
    if phases.iter().any(|z| !z.re.is_finite()) {
        return Err(Error::NonFinite("determinant phase along the path".into()));
    }
    let mut total = 0.0;
    for i in 0..grid.len() - 1 {
        let mut stack = alloc::vec![(grid[i], grid[i + 1], phases[i], phases[i + 1], 0u32)];
        while let Some((a, b, za, zb, depth)) = stack.pop() {
            let d = linalg::arg(zb * za.conj());
            let Some(f) = eval.as_ref() else {
                if d.abs() > MAX_PHASE_STEP {
                    return Err(Error::RefinementNeeded {
                        t: a,
                        reason: format!("phase jump {d:.3} rad between samples; supply denser samples"),
                    });
                }
                total += d;
                continue;
            };
            let m = 0.5 * (a + b);
            let zm = model.phase(&f(m));
            let d1 = linalg::arg(zm * za.conj());
            let d2 = linalg::arg(zb * zm.conj());
            let consistent = (d1 + d2 - d).abs() < 1e-9;
            if consistent && d.abs() <= MAX_PHASE_STEP && d1.abs() <= MAX_PHASE_STEP && d2.abs() <= MAX_PHASE_STEP {
                total += d1 + d2;
            } else if depth >= MAX_DEPTH || !zm.re.is_finite() {
                return Err(Error::RefinementNeeded {
                    t: m,
                    reason: "phase of det W does not resolve under bisection".into(),
                });
            } else {
                // push right half first so intervals are processed left to right
                stack.push((m, b, zm, zb, depth + 1));
                stack.push((a, m, za, zm, depth + 1));
            }
        }
    }
    Ok(total)
}

fn spectral_flow(path: &SymplecticPath, model: &Model) -> Result<(i64, usize)> {
    let delta = winding(path, model)?;
    let (start, _) = model.endpoint_sum(path.start());
    let (end, nu) = model.endpoint_sum(path.endpoint());
    let flow = (delta - end + start) / (2.0 * PI);
    let rounded = linalg::round(flow);
    if (flow - rounded).abs() > 1e-6 {
        return Err(Error::RefinementNeeded {
            t: path.duration(),
            reason: format!("spectral flow {flow} is not an integer"),
        });
    }
    Ok((rounded as i64, nu))
}

fn check_omega(omega: C64) -> Result<()> {
    if (ComplexField::modulus(omega) - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("ω = {omega} is not on the unit circle")));
    }
    Ok(())
}

fn check_start(path: &SymplecticPath) -> Result<()> {
    if max_abs(&(path.start() - eye(2 * path.half_dim()))) > 1e-8 {
        return Err(Error::Domain("index functions need paths starting at the identity".into()));
    }
    Ok(())
}

fn is_one(omega: C64) -> bool {
    (omega - C64::new(1.0, 0.0)).norm_sqr() < 1e-24
}

/// `ν_ω(M) = dim_ℂ ker(M − ωI)`.
pub fn nu_omega(m: &Mat, omega: C64) -> usize {
    let d = m.nrows();
    let shifted = linalg::to_complex(m) - CMat::identity(d, d) * omega;
    linalg::c_nullity(&shifted, RANK_TOL)
}

/// `ν_{L_j}(M)`: kernel dimension of the upper-right (`L₀`) or lower-left (`L₁`) block.
pub fn nu_lagrangian(m: &Mat, j: Lagrangian) -> usize {
    let (_, b, c, _) = blocks(m);
    let blk = match j {
        Lagrangian::L0 => b,
        Lagrangian::L1 => c,
    };
    let scale = max_abs(m).max(1.0);
    let sv = linalg::singular_values(&blk);
    sv.iter().filter(|&&s| s <= RANK_TOL * scale).count()
}

/// `(i_ω(γ), ν_ω(γ))`.
pub fn i_omega(path: &SymplecticPath, omega: C64) -> Result<IndexPair> {
    check_omega(omega)?;
    check_start(path)?;
    let n = path.half_dim();
    let (flow, nu) = spectral_flow(path, &Model::new(Target::Omega(omega), n))?;
    let offset = if is_one(omega) { n as i64 } else { 0 };
    Ok(IndexPair { index: flow - offset, nullity: nu })
}

/// `(i_ω, ν_ω)` at `ω = e^{iθ}`.
pub fn i_omega_angle(path: &SymplecticPath, theta: f64) -> Result<IndexPair> {
    if linalg::wrap_pi(theta).abs() < 1e-15 {
        return i_omega(path, C64::new(1.0, 0.0));
    }
    i_omega(path, cis(theta))
}

/// `(i_{L_j}(γ), ν_{L_j}(γ))`.
pub fn i_lagrangian(path: &SymplecticPath, j: Lagrangian) -> Result<IndexPair> {
    check_start(path)?;
    let n = path.half_dim();
    let (flow, nu) = spectral_flow(path, &Model::new(Target::Lag(j), n))?;
    Ok(IndexPair { index: flow - n as i64, nullity: nu })
}

/// Spectral flow of `Gr(γ)` against `Gr(ωI)` with no endpoint offset; works
/// for paths that do not start at the identity.
pub fn omega_flow(path: &SymplecticPath, omega: C64) -> Result<i64> {
    check_omega(omega)?;
    Ok(spectral_flow(path, &Model::new(Target::Omega(omega), path.half_dim()))?.0)
}

/// `ξ_n(t) = diag(2 − t/τ, (2 − t/τ)⁻¹)^{⋄n}`, running from `D(2)^{⋄n}` to `I`.
pub fn xi_special_path(n: usize, tau: f64) -> Result<SymplecticPath> {
    if n == 0 {
        return Err(Error::Dimension("n must be positive".into()));
    }
    let f: MatFn = Arc::new(move |t: f64| {
        let s = 2.0 - t / tau;
        diamond_power(&Mat::from_row_slice(2, 2, &[s, 0.0, 0.0, 1.0 / s]), n)
    });
    SymplecticPath::from_fn_any_start(n, tau, 16, f, None)
}

/// `i_ω` as the intersection number of the concatenation `ξ_n ∗ γ`, whose
/// start `D(2)^{⋄n}` is off every `Sp(2n)⁰_ω`; no endpoint offset is applied.
pub fn i_omega_concatenated(path: &SymplecticPath, omega: C64) -> Result<IndexPair> {
    check_omega(omega)?;
    check_start(path)?;
    let n = path.half_dim();
    let tau = path.duration();
    let xi = xi_special_path(n, tau)?;
    let xf = xi.evaluator().expect("closed form");
    let grid: Vec<f64> = xi.grid().iter().copied().chain(path.grid().iter().skip(1).map(|t| t + tau)).collect();
    let mut samples: Vec<Mat> = xi.samples().to_vec();
    samples.extend(path.samples().iter().skip(1).cloned());
    let eval = path.evaluator().map(|pf| {
        Arc::new(move |t: f64| if t <= tau { xf(t) } else { pf(t - tau) }) as MatFn
    });
    let joined = SymplecticPath::with_grid(n, 2.0 * tau, grid, samples, eval, None);
    let (flow, nu) = spectral_flow(&joined, &Model::new(Target::Omega(omega), n))?;
    Ok(IndexPair { index: flow, nullity: nu })
}

/// `Σ_{0<s<1} ν_{L_j}(γ(sτ))`, valid when the generator block `b₂₂` (for `L₀`)
/// or `b₁₁` (for `L₁`) is positive definite along the path.
pub fn i_lagrangian_convex_oracle(path: &SymplecticPath, j: Lagrangian) -> Result<i64> {
    check_start(path)?;
    let eval = path
        .evaluator()
        .ok_or_else(|| Error::Unsupported("the summation oracle needs an evaluable path".into()))?;
    if !path.has_generator() {
        return Err(Error::Hypothesis("the summation oracle needs a generator field".into()));
    }
    let k = path.half_dim();
    let tau = path.duration();
    let nodes = 64usize.max(path.grid().len());
    for i in 0..=nodes {
        let t = tau * i as f64 / nodes as f64;
        let b = path.generator_at(t).expect("generator present");
        let blk = match j {
            Lagrangian::L0 => b.view((k, k), (k, k)).into_owned(),
            Lagrangian::L1 => b.view((0, 0), (k, k)).into_owned(),
        };
        let min_eig = linalg::symmetric_eigenvalues(&blk).iter().fold(f64::INFINITY, |a, &v| a.min(v));
        if min_eig <= 0.0 {
            return Err(Error::Hypothesis(format!("generator block is not positive definite at t = {t}")));
        }
    }
    let sigma = |t: f64| -> (f64, Mat) {
        let m = eval(t);
        let (_, b, c, _) = blocks(&m);
        let blk = if j == Lagrangian::L0 { b } else { c };
        let sv = linalg::singular_values(&blk);
        (sv.iter().fold(f64::INFINITY, |a, &v| a.min(v)) / max_abs(&m).max(1.0), blk)
    };
    // dense scan, 64× finer wherever σ is small (close crossing pairs share a
    // coarse cell), then golden-section refinement of every local minimum
    let scan = (8 * nodes).max(400);
    let h = tau / scan as f64;
    let coarse: Vec<f64> = (0..=scan).map(|i| sigma(i as f64 * h).0).collect();
    let mut brackets: Vec<(f64, f64)> = Vec::new();
    // `last_is_min`: the final point may be a minimum (a root just before τ)
    let mut push_minima = |xs: &[f64], vals: &[f64], last_is_min: bool| {
        let m = xs.len() - 1;
        for i in 1..=m {
            let right = if i == m { last_is_min } else { vals[i] <= vals[i + 1] };
            if vals[i] <= vals[i - 1] && right {
                brackets.push((xs[i - 1], xs[(i + 1).min(m)]));
            }
        }
    };
    // each fine scan overlaps its neighbours by one step so minima on a cell
    // boundary are interior to some scan
    const FINE: i64 = 64;
    for i in 0..scan {
        if coarse[i].min(coarse[i + 1]) < 0.25 {
            let fx: Vec<f64> = (-1..=FINE + 1).map(|j| ((i as f64 + j as f64 / FINE as f64) * h).clamp(0.0, tau)).collect();
            let fv: Vec<f64> = fx.iter().map(|&t| sigma(t).0).collect();
            push_minima(&fx, &fv, i + 1 == scan);
        }
    }
    // coarse minima last: each only matters where no fine scan ran
    let xs: Vec<f64> = (0..=scan).map(|i| i as f64 * h).collect();
    push_minima(&xs, &coarse, true);
    let det = |t: f64| sigma(t).1.lu().determinant();
    // accepted roots: (time, multiplicity, bracket, multiplicity was inferred)
    let mut roots: Vec<(f64, i64, (f64, f64), bool)> = Vec::new();
    for (a0, b0) in brackets {
        let (mut a, mut b) = (a0, b0);
        let g = (linalg::sqrt(5.0) - 1.0) / 2.0;
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let (mut f1, mut f2) = (sigma(x1).0, sigma(x2).0);
        while b - a > 1e-13 * tau.max(1.0) {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = sigma(x1).0;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = sigma(x2).0;
            }
        }
        let s = 0.5 * (a + b);
        if s <= 1e-9 * tau || s >= tau * (1.0 - 1e-9) {
            continue;
        }
        let (v, blk) = sigma(s);
        let seen = roots
            .iter()
            .any(|r| (r.0 - s).abs() < 1e-8 * tau.max(1.0) || (r.3 && r.2 .0 <= s && s <= r.2 .1));
        if v < 1e-7 && !seen {
            let scale = max_abs(&eval(s)).max(1.0);
            let sv = linalg::singular_values(&blk);
            let mut mult = sv.iter().filter(|&&x| x < 1e-6 * scale).count() as i64;
            // every crossing is positive, so det changes sign across a bracket
            // iff the multiplicity inside is odd; two simple crossings closer
            // than the scan look like one root with a single small singular value
            let prior: i64 = roots.iter().filter(|r| a0 <= r.0 && r.0 <= b0).map(|r| r.1).sum();
            let (da, db) = (det(a0), det(b0));
            let inferred = da != 0.0 && db != 0.0 && ((da < 0.0) != (db < 0.0)) != ((prior + mult) % 2 == 1);
            if inferred {
                mult += 1;
            }
            roots.push((s, mult, (a0, b0), inferred));
        }
    }
    let total = roots.iter().map(|r| r.1).sum();
    Ok(total)
}

/// `M_ε(P)` with its inertia.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MEpsReport {
    pub eps: f64,
    #[serde(with = "crate::serde_matrix")]
    pub matrix: Mat,
    pub signature: i64,
    pub inertia: Inertia,
}

/// The literal `M_ε(P) = Pᵀ[[sI, −cI], [−cI, −sI]]P + [[sI, cI], [cI, −sI]]`, `s = sin 2ε`, `c = cos 2ε`.
pub fn m_eps_raw(p: &Mat, eps: f64) -> Mat {
    let k = p.nrows() / 2;
    let (s, c) = (ComplexField::sin(2.0 * eps), ComplexField::cos(2.0 * eps));
    let i = eye(k);
    let inner = linalg::from_blocks(&(&i * s), &(&i * -c), &(&i * -c), &(&i * -s));
    let outer = linalg::from_blocks(&(&i * s), &(&i * c), &(&i * c), &(&i * -s));
    linalg::symmetrize(&(p.transpose() * inner * p + outer))
}

fn signature_of(m: &Mat) -> Inertia {
    let scale = max_abs(m).max(1.0);
    inertia_of_symmetric(m, 1e-13 * scale).expect("M_eps is symmetric by construction")
}

pub fn m_eps_matrix(p: &Mat, eps: f64) -> MEpsReport {
    let matrix = m_eps_raw(p, eps);
    let inertia = signature_of(&matrix);
    MEpsReport { eps, matrix, signature: inertia.signature(), inertia }
}

/// `M₀(P) = −2[[AᵀC, CᵀB], [BᵀC, BᵀD]]`.
pub fn m_zero_blocks(p: &Mat) -> Mat {
    let (a, b, c, d) = blocks(p);
    linalg::from_blocks(
        &(a.transpose() * &c * -2.0),
        &(c.transpose() * &b * -2.0),
        &(b.transpose() * &c * -2.0),
        &(b.transpose() * &d * -2.0),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Self::Plus => 1.0,
            Self::Minus => -1.0,
        }
    }
}

/// First-order start for the ε ladder: small against the spectral gap of `M₀`
/// relative to `∂M_ε/∂ε` at zero.
fn eps_start(p: &Mat) -> f64 {
    let m0 = m_eps_raw(p, 0.0);
    let k = p.nrows() / 2;
    let i = eye(k);
    let d = linalg::from_blocks(&(&i * 2.0), &Mat::zeros(k, k), &Mat::zeros(k, k), &(&i * -2.0));
    let m1 = p.transpose() * &d * p + &d;
    let m1_norm = linalg::singular_values(&m1).iter().fold(0.0f64, |a, &v| a.max(v)).max(1e-300);
    let ev = linalg::symmetric_eigenvalues(&m0);
    let scale = ev.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let gap = ev.iter().map(|v| v.abs()).filter(|&v| v > 1e-9 * scale).fold(f64::INFINITY, f64::min);
    let base = if gap.is_finite() { 0.05 * gap / m1_norm } else { 1e-2 / (1.0 + scale) };
    base.min(1e-2)
}

/// `sgn M_ε(P)` on one side of zero, shrinking `|ε|` until two consecutive
/// signatures agree and no eigenvalue sits in the zero band.
pub fn m_eps_signature_stable(p: &Mat, side: Side) -> Result<i64> {
    let mut eps = eps_start(p);
    let mut last: Option<i64> = None;
    for _ in 0..60 {
        if eps < 1e-300 {
            break;
        }
        let inertia = signature_of(&m_eps_raw(p, side.sign() * eps));
        if inertia.zero == 0 {
            let s = inertia.signature();
            if last == Some(s) {
                return Ok(s);
            }
            last = Some(s);
        } else {
            last = None;
        }
        eps *= 0.5;
    }
    Err(Error::Instability { last_eps: eps })
}

/// Both identities of the `L₀`/`L₁` index difference formula.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Theorem21Report {
    pub l0: IndexPair,
    pub l1: IndexPair,
    pub sgn_plus: i64,
    pub sgn_minus: i64,
    /// `i_{L0} − i_{L1}` against `½ sgn M_ε`, `ε > 0`.
    pub first: (i64, i64),
    /// `(i_{L0}+ν_{L0}) − (i_{L1}+ν_{L1})` against `½ sgn M_ε`, `ε < 0`.
    pub second: (i64, i64),
    pub pass: bool,
}

pub fn theorem21_check(path: &SymplecticPath) -> Result<Theorem21Report> {
    let l0 = i_lagrangian(path, Lagrangian::L0)?;
    let l1 = i_lagrangian(path, Lagrangian::L1)?;
    let p = path.endpoint();
    let sgn_plus = m_eps_signature_stable(p, Side::Plus)?;
    let sgn_minus = m_eps_signature_stable(p, Side::Minus)?;
    let first = (l0.index - l1.index, sgn_plus / 2);
    let second = (l0.sum() - l1.sum(), sgn_minus / 2);
    let pass = sgn_plus % 2 == 0 && sgn_minus % 2 == 0 && first.0 == first.1 && second.0 == second.1;
    Ok(Theorem21Report { l0, l1, sgn_plus, sgn_minus, first, second, pass })
}

/// Margins of the three signature bounds; every margin is `≥ 0` on pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma25Report {
    pub half_sgn_plus: f64,
    pub half_sgn_minus: f64,
    pub half_sgn_zero: Option<f64>,
    pub nu_l0: usize,
    pub ker_c: usize,
    pub m_plus_atc: usize,
    /// `k − ν_{L0} − ½sgn M_ε`, `ε > 0` (and `−½sgn` when `B = 0`).
    pub margin_i: f64,
    /// `k − m⁺(AᵀC) − ½sgn M_ε` on both sides.
    pub margin_ii: f64,
    /// `−m⁺(AᵀC) − ½sgn M_ε`, `ε < 0`, only when `B = 0`. Kept out of `pass`:
    /// `[[1,0],[b,1]]` already gives a negative margin here.
    pub margin_ii_b_zero: Option<f64>,
    /// `½sgn M_ε − (dim ker C − k)`, `ε > 0` (and `½sgn` when `C = 0`).
    pub margin_iii: f64,
    pub pass: bool,
}

pub fn lemma25_audit(p: &Mat) -> Result<Lemma25Report> {
    let k = p.nrows() / 2;
    let (a, b, c, _) = blocks(p);
    let scale = max_abs(p).max(1.0);
    let plus = m_eps_signature_stable(p, Side::Plus)? as f64 / 2.0;
    let minus = m_eps_signature_stable(p, Side::Minus)? as f64 / 2.0;
    let m0 = m_eps_raw(p, 0.0);
    let i0 = signature_of(&m0);
    let zero = if i0.zero == 0 { Some(i0.signature() as f64 / 2.0) } else { None };
    let nu_l0 = nu_lagrangian(p, Lagrangian::L0);
    let ker_c = nu_lagrangian(p, Lagrangian::L1);
    let atc = linalg::symmetrize(&(a.transpose() * &c));
    let m_plus_atc = inertia_of_symmetric(&atc, 1e-10 * scale * scale)?.plus;
    let b_zero = max_abs(&b) <= 1e-12 * scale;
    let c_zero = max_abs(&c) <= 1e-12 * scale;
    let kf = k as f64;
    let mut margin_i = kf - nu_l0 as f64 - plus;
    if b_zero {
        margin_i = margin_i.min(-plus);
    }
    let bound_ii = kf - m_plus_atc as f64;
    let mut margin_ii = (bound_ii - plus).min(bound_ii - minus);
    if let Some(z) = zero {
        margin_ii = margin_ii.min(bound_ii - z);
    }
    let margin_ii_b_zero = b_zero.then(|| -(m_plus_atc as f64) - minus);
    let mut margin_iii = plus - (ker_c as f64 - kf);
    if c_zero {
        margin_iii = margin_iii.min(plus);
    }
    let pass = margin_i >= 0.0 && margin_ii >= 0.0 && margin_iii >= 0.0;
    Ok(Lemma25Report {
        half_sgn_plus: plus,
        half_sgn_minus: minus,
        half_sgn_zero: zero,
        nu_l0,
        ker_c,
        m_plus_atc,
        margin_i,
        margin_ii,
        margin_ii_b_zero,
        margin_iii,
        pass,
    })
}

/// `i_{L0}(γ^k)/k` for `k = 1..=k_max` over brake iterates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanIndexReport {
    pub mean: f64,
    pub sequence: Vec<f64>,
    /// Largest `|a_k − a_{k_max}|·k` seen; the sequence is Cauchy within `2/k` when this is at most 2.
    pub cauchy_defect: f64,
}

pub fn mean_index_l0(path: &SymplecticPath, k_max: usize) -> Result<MeanIndexReport> {
    if k_max < 4 {
        return Err(Error::Domain(format!("k_max must be at least 4, got {k_max}")));
    }
    let mut sequence = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let it = crate::iteration::brake_iterate(path, k)?;
        sequence.push(i_lagrangian(&it, Lagrangian::L0)?.index as f64 / k as f64);
    }
    let mean = *sequence.last().unwrap();
    let cauchy_defect = sequence
        .iter()
        .enumerate()
        .map(|(i, a)| (a - mean).abs() * (i + 1) as f64)
        .fold(0.0, f64::max);
    Ok(MeanIndexReport { mean, sequence, cauchy_defect })
}

/// One row of the `Sp(2)` signature table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureCase {
    pub label: String,
    #[serde(with = "crate::serde_matrix")]
    pub matrix: Mat,
    pub side: Side,
    pub expected: i64,
    pub computed: i64,
}

/// `sgn M_{±ε}` of `±R(θ)` and the four shear families for a given `b > 0`.
pub fn signature_table(b: f64, theta: f64) -> Result<Vec<SignatureCase>> {
    if !(b > 0.0) {
        return Err(Error::Domain(format!("b must be positive, got {b}")));
    }
    let m = |v: [f64; 4]| Mat::from_row_slice(2, 2, &v);
    let shears: [(&str, Mat, i64); 4] = [
        ("[[1,b],[0,1]]", m([1.0, b, 0.0, 1.0]), 0),
        ("[[1,0],[-b,1]]", m([1.0, 0.0, -b, 1.0]), 0),
        ("[[1,-b],[0,1]]", m([1.0, -b, 0.0, 1.0]), 2),
        ("[[1,0],[b,1]]", m([1.0, 0.0, b, 1.0]), -2),
    ];
    let mut rows = Vec::new();
    for side in [Side::Plus, Side::Minus] {
        let r = linalg::rotation(theta);
        for (sign, mat) in [("", r.clone()), ("-", -r)] {
            let computed = m_eps_signature_stable(&mat, side)?;
            rows.push(SignatureCase { label: format!("{sign}R({theta})"), matrix: mat, side, expected: 0, computed });
        }
    }
    for (label, mat, expected) in shears {
        for (sign, mat) in [("", mat.clone()), ("-", -mat)] {
            let computed = m_eps_signature_stable(&mat, Side::Plus)?;
            rows.push(SignatureCase { label: format!("{sign}{label}"), matrix: mat, side: Side::Plus, expected, computed });
        }
    }
    Ok(rows)
}

/// Short human label used in reports.
pub fn describe(pair: &IndexPair) -> String {
    format!("({}, {})", pair.index, pair.nullity)
}
