//! Hamiltonians on `ℝ²ⁿ` with `x = (p, q)`: gauge Hamiltonians of convex
//! bodies, mechanical lifts `½|p|² + V(q)`, and sampled grid potentials.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, eye, Mat};
use crate::quasirandom::halton;
use crate::sympcore::apply_n;
use crate::{Error, Result};

pub type Vector = DVector<f64>;
pub type ScalarFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&Vector) -> Mat + Send + Sync>;

const SAMPLES: u64 = 24;
const FD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HamiltonianFlags {
    /// `H(Nx) = H(x)`.
    pub reversible: bool,
    /// `H(−x) = H(x)`.
    pub even: bool,
    /// `H″` positive definite away from the origin.
    pub convex: bool,
}

/// Outcome of the randomized construction-time checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleCheck {
    pub samples: usize,
    /// Largest relative mismatch between `H′` and central differences of `H`.
    pub gradient_defect: f64,
    /// Same for `H″` against differences of `H′`.
    pub hessian_defect: f64,
    /// Flags as measured, independent of what was declared.
    pub measured: HamiltonianFlags,
    /// Sampled points of `Σ ∩ {p = 0}`-tangent curvature failures (see [`HamiltonianSpec::new`]).
    pub curvature_failures: usize,
}

/// The evaluators of a Hamiltonian.
#[derive(Clone)]
pub struct Evaluators {
    pub h: ScalarFn,
    pub grad: VectorFn,
    pub hess: MatrixFn,
}

#[derive(Clone)]
pub struct HamiltonianSpec {
    n: usize,
    level: f64,
    eval: Evaluators,
    flags: HamiltonianFlags,
    check: SampleCheck,
    /// Constant Hessian for quadratic Hamiltonians.
    quadratic: Option<Mat>,
    min_radius: f64,
    diameter: f64,
    label: String,
}

impl fmt::Debug for HamiltonianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianSpec")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("level", &self.level)
            .field("flags", &self.flags)
            .finish_non_exhaustive()
    }
}

/// Point `t ∈ [0,1)^d` mapped to the box `[−s, s]^d`.
fn box_point(index: u64, dim: usize, s: f64) -> Vector {
    Vector::from_vec(halton(index, dim).into_iter().map(|u| s * (2.0 * u - 1.0)).collect())
}

fn rel(a: f64, scale: f64) -> f64 {
    a / scale.max(1e-12)
}

impl HamiltonianSpec {
    /// Build and check a Hamiltonian. Every declared flag is verified on
    /// quasi-random samples in `[−sample_box, sample_box]^{2n}`; states
    /// inside `|x| < min_radius` are skipped and rejected by the integrator.
    pub fn new(
        n: usize,
        level: f64,
        eval: Evaluators,
        declared: HamiltonianFlags,
        sample_box: f64,
        min_radius: f64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("n must be positive".into()));
        }
        if !(level > 0.0) || !level.is_finite() {
            return Err(Error::Domain(format!("energy level must be positive, got {level}")));
        }
        let check = sample_check(n, &eval, sample_box, min_radius, declared.convex)?;
        if check.gradient_defect > FD_TOL || check.hessian_defect > FD_TOL {
            return Err(Error::Domain(format!(
                "derivatives disagree with finite differences (gradient {:e}, Hessian {:e})",
                check.gradient_defect, check.hessian_defect
            )));
        }
        let m = check.measured;
        if declared.reversible && !m.reversible {
            return Err(Error::Hypothesis("declared reversible but H(Nx) ≠ H(x) on a sample".into()));
        }
        if declared.even && !m.even {
            return Err(Error::Hypothesis("declared even but H(−x) ≠ H(x) on a sample".into()));
        }
        if declared.convex && !m.convex {
            return Err(Error::Convexity("H″ is not positive definite on a sample".into()));
        }
        let mut spec = Self {
            n,
            level,
            eval,
            flags: declared,
            check,
            quadratic: None,
            min_radius,
            diameter: 0.0,
            label: String::from("custom"),
        };
        spec.diameter = spec.estimate_diameter()?;
        Ok(spec)
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = String::from(label);
        self
    }

    /// Mark `H` as quadratic with constant Hessian `h2`; fundamental solutions
    /// then use the matrix exponential.
    pub fn with_quadratic(mut self, h2: Mat) -> Self {
        self.quadratic = Some(h2);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn flags(&self) -> HamiltonianFlags {
        self.flags
    }

    pub fn check(&self) -> &SampleCheck {
        &self.check
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn quadratic(&self) -> Option<&Mat> {
        self.quadratic.as_ref()
    }

    pub fn min_radius(&self) -> f64 {
        self.min_radius
    }

    /// Estimated diameter of `Σ = H⁻¹(level)`.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn h(&self, x: &Vector) -> f64 {
        (self.eval.h)(x)
    }

    pub fn grad(&self, x: &Vector) -> Vector {
        (self.eval.grad)(x)
    }

    pub fn hess(&self, x: &Vector) -> Mat {
        (self.eval.hess)(x)
    }

    /// `J H′(x)`.
    pub fn vector_field(&self, x: &Vector) -> Vector {
        let g = self.grad(x);
        let n = self.n;
        let mut v = Vector::zeros(2 * n);
        for i in 0..n {
            v[i] = -g[n + i];
            v[n + i] = g[i];
        }
        v
    }

    /// Gradient of `q ↦ H(0, q)`.
    pub fn grad_q(&self, q: &Vector) -> Vector {
        self.grad(&self.lift_q(q)).rows(self.n, self.n).into_owned()
    }

    pub fn lift_q(&self, q: &Vector) -> Vector {
        let mut x = Vector::zeros(2 * self.n);
        x.rows_mut(self.n, self.n).copy_from(q);
        x
    }

    /// Radius `s > 0` with `H(s·d) = level` along the ray through `d`,
    /// assuming `H < level` near the origin and growth along rays.
    pub fn radial_level(&self, d: &Vector) -> Result<f64> {
        let norm = d.norm();
        if !(norm > 0.0) {
            return Err(Error::Domain("ray direction must be nonzero".into()));
        }
        let u = d / norm;
        let f = |s: f64| self.h(&(&u * s)) - self.level;
        let mut hi = 1.0;
        let mut steps = 0;
        while !(f(hi) > 0.0) {
            hi *= 2.0;
            steps += 1;
            if steps > 60 || !f(hi).is_finite() {
                return Err(Error::Domain("energy level not reached along the ray".into()));
            }
        }
        if !(f(0.0) < 0.0) {
            return Err(Error::Domain("the origin must lie below the energy level".into()));
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi) / norm)
    }

    /// Move `q` along `∇_q H(0,q)` until `H(0, q) = level`.
    pub fn project_q(&self, q: &Vector) -> Result<Vector> {
        let mut q = q.clone();
        for _ in 0..50 {
            let x = self.lift_q(&q);
            let r = self.h(&x) - self.level;
            if r.abs() <= 1e-13 * self.level {
                return Ok(q);
            }
            let g = self.grad_q(&q);
            let gg = g.norm_squared();
            if !(gg > 0.0) || !r.is_finite() {
                break;
            }
            q -= &g * (r / gg);
        }
        let x = self.lift_q(&q);
        let r = self.h(&x) - self.level;
        if r.abs() <= 1e-12 * self.level {
            Ok(q)
        } else {
            Err(Error::Domain(format!("projection to the energy level failed (residual {r:e})")))
        }
    }

    fn estimate_diameter(&self) -> Result<f64> {
        let d = 2 * self.n;
        let mut best: f64 = 0.0;
        for i in 0..(4 * d as u64 + 16) {
            let u = box_point(i + 101, d, 1.0);
            if u.norm() < 1e-6 {
                continue;
            }
            best = best.max(self.radial_level(&u)? * u.norm());
        }
        for k in 0..d {
            let mut e = Vector::zeros(d);
            e[k] = 1.0;
            best = best.max(self.radial_level(&e)?);
        }
        Ok(2.0 * best)
    }

    /// Curvature proxy: `H″` restricted to the tangent space `H′(x)^⊥` at the
    /// radial projection of sample directions onto `Σ`.
    pub fn tangent_curvature_failures(&self, samples: u64) -> Result<usize> {
        let d = 2 * self.n;
        let mut failures = 0;
        for i in 0..samples {
            let u = box_point(i + 7, d, 1.0);
            if u.norm() < 1e-6 {
                continue;
            }
            let x = &u * self.radial_level(&u)?;
            let g = self.grad(&x);
            let t = linalg::null_space(&Mat::from_row_slice(1, d, g.as_slice()), 1e-12);
            let h = t.transpose() * self.hess(&x) * &t;
            if linalg::symmetric_eigenvalues(&linalg::symmetrize(&h)).iter().any(|&v| v <= 0.0) {
                failures += 1;
            }
        }
        Ok(failures)
    }
}

fn sample_check(n: usize, e: &Evaluators, sample_box: f64, min_radius: f64, want_convex: bool) -> Result<SampleCheck> {
    let d = 2 * n;
    let mut out = SampleCheck {
        samples: 0,
        gradient_defect: 0.0,
        hessian_defect: 0.0,
        measured: HamiltonianFlags { reversible: true, even: true, convex: true },
        curvature_failures: 0,
    };
    for i in 0..SAMPLES {
        let x = box_point(i, d, sample_box);
        if x.norm() < min_radius.max(1e-3 * sample_box) {
            continue;
        }
        let hx = (e.h)(&x);
        let g = (e.grad)(&x);
        let hm = (e.hess)(&x);
        if !hx.is_finite() || g.iter().any(|v| !v.is_finite()) || !linalg::all_finite(&hm) {
            continue;
        }
        out.samples += 1;
        let delta = 1e-5 * x.norm().max(1.0);
        let gscale = g.norm() + hx.abs();
        let hscale = hm.norm() + g.norm();
        for k in 0..d {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += delta;
            xm[k] -= delta;
            let fd = ((e.h)(&xp) - (e.h)(&xm)) / (2.0 * delta);
            out.gradient_defect = out.gradient_defect.max(rel((fd - g[k]).abs(), gscale));
            let col = ((e.grad)(&xp) - (e.grad)(&xm)) / (2.0 * delta);
            out.hessian_defect = out.hessian_defect.max(rel((col - hm.column(k)).norm(), hscale));
        }
        let scale = hx.abs().max(1e-12);
        if ((e.h)(&apply_n(&x)) - hx).abs() > 1e-10 * scale {
            out.measured.reversible = false;
        }
        if ((e.h)(&-&x) - hx).abs() > 1e-10 * scale {
            out.measured.even = false;
        }
        if want_convex || out.measured.convex {
            let ev = linalg::symmetric_eigenvalues(&linalg::symmetrize(&hm));
            if ev.iter().any(|&v| v <= 0.0) {
                out.measured.convex = false;
            }
        }
    }
    if out.samples == 0 {
        return Err(Error::Domain("no usable sample points for the Hamiltonian checks".into()));
    }
    Ok(out)
}

/// Ellipsoid `𝓔_n(r) = {Σ (p_k² + q_k²)/r_k² = 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidSpec {
    pub radii: Vec<f64>,
}

/// Whether `x` has no convergent `a/b` with `b ≤ 10⁴` within `1e−11·x`.
pub fn looks_irrational(x: f64) -> bool {
    let (mut h0, mut h1) = (0.0f64, 1.0f64);
    let (mut k0, mut k1) = (1.0f64, 0.0f64);
    let mut y = x;
    for _ in 0..24 {
        let a = linalg::floor(y);
        let h2 = a * h1 + h0;
        let k2 = a * k1 + k0;
        if k2 > 1e4 {
            return true;
        }
        if (x - h2 / k2).abs() <= 1e-11 * x.abs().max(1.0) {
            return false;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = y - a;
        if frac <= 0.0 {
            return false;
        }
        y = 1.0 / frac;
    }
    true
}

impl EllipsoidSpec {
    pub fn new(radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::Dimension("an ellipsoid needs at least one radius".into()));
        }
        if let Some(r) = radii.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
            return Err(Error::Domain(format!("radii must be positive and finite, got {r}")));
        }
        Ok(Self { radii })
    }

    pub fn n(&self) -> usize {
        self.radii.len()
    }

    /// `ω_k = 2/r_k²`.
    pub fn rates(&self) -> Vec<f64> {
        self.radii.iter().map(|r| 2.0 / (r * r)).collect()
    }

    /// Minimal periods `π r_k²`.
    pub fn periods(&self) -> Vec<f64> {
        self.radii.iter().map(|r| core::f64::consts::PI * r * r).collect()
    }

    /// Best-effort flag: every ratio `r_j/r_k`, `j ≠ k`, looks irrational.
    pub fn ratios_irrational(&self) -> bool {
        self.pairs_irrational(|r| r)
    }

    /// Same for the period ratios `r_j²/r_k²`, which is what rules out
    /// resonant planes in the linear flow.
    pub fn squared_ratios_irrational(&self) -> bool {
        self.pairs_irrational(|r| r * r)
    }

    fn pairs_irrational(&self, f: impl Fn(f64) -> f64) -> bool {
        let r = &self.radii;
        (0..r.len()).all(|j| (j + 1..r.len()).all(|k| looks_irrational(f(r[j]) / f(r[k]))))
    }
}

/// `H_Σ(x) = Σ (p_k² + q_k²)/r_k²`.
pub fn ellipsoid_hamiltonian(e: &EllipsoidSpec) -> Result<HamiltonianSpec> {
    let n = e.n();
    let w: Vec<f64> = e.radii.iter().map(|r| 1.0 / (r * r)).collect();
    let mut diag = Vector::zeros(2 * n);
    for k in 0..n {
        diag[k] = w[k];
        diag[n + k] = w[k];
    }
    let (d1, d2) = (diag.clone(), diag.clone());
    let h2 = Mat::from_diagonal(&(&diag * 2.0));
    let h2c = h2.clone();
    let eval = Evaluators {
        h: Arc::new(move |x: &Vector| x.iter().zip(d1.iter()).map(|(v, w)| w * v * v).sum()),
        grad: Arc::new(move |x: &Vector| x.component_mul(&d2) * 2.0),
        hess: Arc::new(move |_: &Vector| h2c.clone()),
    };
    let rmax = e.radii.iter().fold(0.0f64, |a, &b| a.max(b));
    let rmin = e.radii.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let flags = HamiltonianFlags { reversible: true, even: true, convex: true };
    Ok(HamiltonianSpec::new(n, 1.0, eval, flags, rmax, 0.1 * rmin)?.with_quadratic(h2).with_label("ellipsoid"))
}

/// A convex body `{F < 1}` with boundary `Σ = {F = 1}` and `F(0) < 1`.
#[derive(Clone)]
pub struct ConvexBody {
    pub dim: usize,
    pub f: ScalarFn,
    pub grad_f: VectorFn,
}

impl fmt::Debug for ConvexBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexBody").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl ConvexBody {
    /// The ellipsoid as an implicit body, for cross-checks of the ray construction.
    pub fn ellipsoid(e: &EllipsoidSpec) -> Self {
        let n = e.n();
        let mut w = Vector::zeros(2 * n);
        for k in 0..n {
            w[k] = 1.0 / (e.radii[k] * e.radii[k]);
            w[n + k] = w[k];
        }
        let w2 = w.clone();
        Self {
            dim: 2 * n,
            f: Arc::new(move |x: &Vector| x.iter().zip(w.iter()).map(|(v, w)| w * v * v).sum()),
            grad_f: Arc::new(move |x: &Vector| x.component_mul(&w2) * 2.0),
        }
    }

    /// Distance from 0 to `Σ` along the unit direction `u`.
    fn ray(&self, u: &Vector) -> f64 {
        let f = |s: f64| (self.f)(&(u * s)) - 1.0;
        let mut hi = 1.0;
        let mut guard = 0;
        while f(hi) < 0.0 {
            hi *= 2.0;
            guard += 1;
            if guard > 60 {
                return f64::NAN;
            }
        }
        let mut lo = 0.0;
        let mut s = hi;
        for _ in 0..100 {
            // safeguarded Newton inside the bracket
            let val = f(s);
            if val > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let slope = (self.grad_f)(&(u * s)).dot(u);
            let mut next = s - val / slope;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() <= 1e-15 * s.abs().max(1e-300) || hi - lo <= 1e-15 * hi {
                return next;
            }
            s = next;
        }
        s
    }

    fn gauge(&self, x: &Vector) -> f64 {
        let r = x.norm();
        if r == 0.0 {
            return 0.0;
        }
        r / self.ray(&(x / r))
    }

    /// Midpoints of boundary chords stay inside; checked on quasi-random pairs.
    fn convexity_check(&self, pairs: u64) -> Result<()> {
        for i in 0..pairs {
            let a = box_point(2 * i + 3, self.dim, 1.0);
            let b = box_point(2 * i + 4, self.dim, 1.0);
            if a.norm() < 1e-6 || b.norm() < 1e-6 {
                continue;
            }
            let ya = &a * (self.ray(&(&a / a.norm())) / a.norm());
            let yb = &b * (self.ray(&(&b / b.norm())) / b.norm());
            let mid = (ya + yb) * 0.5;
            let v = (self.f)(&mid);
            if !(v <= 1.0 + 1e-10) {
                return Err(Error::Convexity(format!("chord midpoint outside the body (F = {v})")));
            }
        }
        Ok(())
    }
}

/// Degree-2 homogeneity defect `max |H(2x) − 4H(x)| / 4H(x)` on samples.
pub fn homogeneity_defect(h: &HamiltonianSpec, samples: u64) -> f64 {
    let d = 2 * h.n();
    (0..samples)
        .map(|i| box_point(i + 31, d, 1.0))
        .filter(|x| x.norm() > 1e-3)
        .map(|x| {
            let a = h.h(&x);
            (h.h(&(&x * 2.0)) - 4.0 * a).abs() / (4.0 * a).max(1e-300)
        })
        .fold(0.0, f64::max)
}

/// `H_Σ = j_Σ²` for a general convex body, with `j_Σ` found by root-finding
/// along rays. `H′ = 2j ∇j` with `∇j(x) = ν/⟨ν, y⟩` at the radial
/// projection `y` (normal `ν = ∇F(y)`); `H″` by central differences of `H′`.
pub fn gauge_hamiltonian(body: &ConvexBody) -> Result<HamiltonianSpec> {
    if body.dim == 0 || body.dim % 2 == 1 {
        return Err(Error::Dimension(format!("body dimension must be even and positive, got {}", body.dim)));
    }
    let f0 = (body.f)(&Vector::zeros(body.dim));
    if !(f0 < 1.0) {
        return Err(Error::Domain("the origin must lie inside the body".into()));
    }
    body.convexity_check(64)?;
    let b1 = body.clone();
    let b2 = body.clone();
    let grad = move |x: &Vector| -> Vector {
        let r = x.norm();
        if r == 0.0 {
            return Vector::zeros(x.len());
        }
        let j = b2.gauge(x);
        let y = x / j;
        let nu = (b2.grad_f)(&y);
        &nu * (2.0 * j / nu.dot(&y))
    };
    let grad = Arc::new(grad);
    let g2 = grad.clone();
    let hess = move |x: &Vector| -> Mat {
        let d = x.len();
        let delta = 1e-6 * x.norm().max(1e-3);
        let mut m = Mat::zeros(d, d);
        for k in 0..d {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += delta;
            xm[k] -= delta;
            m.set_column(k, &((g2(&xp) - g2(&xm)) / (2.0 * delta)));
        }
        linalg::symmetrize(&m)
    };
    let eval = Evaluators {
        h: Arc::new(move |x: &Vector| {
            let j = b1.gauge(x);
            j * j
        }),
        grad,
        hess: Arc::new(hess),
    };
    let n = body.dim / 2;
    // the flags of a gauge Hamiltonian are those of the body; measure them
    let probe = HamiltonianSpec::new(n, 1.0, eval.clone(), HamiltonianFlags::default(), 1.0, 1e-3)?;
    let flags = probe.check().measured;
    let spec = HamiltonianSpec::new(n, 1.0, eval, flags, 1.0, 1e-3)?;
    let rmin = spec.diameter() / 2.0;
    let mut spec = spec.with_label("gauge");
    spec.min_radius = 0.05 * rmin.min(1.0);
    Ok(spec)
}

/// A potential `V(q)` with derivatives.
#[derive(Clone)]
pub struct Potential {
    pub n: usize,
    pub v: ScalarFn,
    pub grad: VectorFn,
    pub hess: MatrixFn,
    /// Half-width of the box where `V` is defined.
    pub domain: f64,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential").field("n", &self.n).field("domain", &self.domain).finish_non_exhaustive()
    }
}

impl Potential {
    /// `V(q) = ½⟨Aq, q⟩`.
    pub fn quadratic(a: Mat) -> Result<Self> {
        let n = a.nrows();
        if a.shape() != (n, n) || n == 0 {
            return Err(Error::Dimension("potential matrix must be square".into()));
        }
        let a = linalg::symmetrize(&a);
        let (a1, a2, a3) = (a.clone(), a.clone(), a);
        Ok(Self {
            n,
            v: Arc::new(move |q: &Vector| 0.5 * q.dot(&(&a1 * q))),
            grad: Arc::new(move |q: &Vector| &a2 * q),
            hess: Arc::new(move |_: &Vector| a3.clone()),
            domain: f64::INFINITY,
        })
    }
}

/// Hypotheses of the mechanical correspondence, measured on samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialFlags {
    pub even: bool,
    pub zero_at_origin: bool,
}

/// `H(p, q) = ½|p|² + V(q)` at energy `h`.
pub fn mechanical_lift(v: &Potential, h: f64) -> Result<(HamiltonianSpec, PotentialFlags)> {
    let n = v.n;
    let box_ = if v.domain.is_finite() { 0.9 * v.domain } else { 2.0 * linalg::sqrt(h.max(1e-12)) };
    let mut even = true;
    for i in 0..SAMPLES {
        let q = box_point(i, n, box_);
        let a = (v.v)(&q);
        if ((v.v)(&-&q) - a).abs() > 1e-10 * a.abs().max(1e-12) {
            even = false;
        }
    }
    let zero_at_origin = (v.v)(&Vector::zeros(n)).abs() <= 1e-12;
    let (p1, p2, p3) = (v.clone(), v.clone(), v.clone());
    let eval = Evaluators {
        h: Arc::new(move |x: &Vector| {
            let p = x.rows(0, n);
            0.5 * p.norm_squared() + (p1.v)(&x.rows(n, n).into_owned())
        }),
        grad: Arc::new(move |x: &Vector| {
            let mut g = Vector::zeros(2 * n);
            g.rows_mut(0, n).copy_from(&x.rows(0, n));
            g.rows_mut(n, n).copy_from(&(p2.grad)(&x.rows(n, n).into_owned()));
            g
        }),
        hess: Arc::new(move |x: &Vector| {
            let mut m = Mat::zeros(2 * n, 2 * n);
            m.view_mut((0, 0), (n, n)).copy_from(&eye(n));
            m.view_mut((n, n), (n, n)).copy_from(&(p3.hess)(&x.rows(n, n).into_owned()));
            m
        }),
    };
    let probe = HamiltonianSpec::new(n, h, eval.clone(), HamiltonianFlags::default(), box_, 0.0)?;
    let mut flags = probe.check().measured;
    flags.reversible = true;
    flags.even = flags.even && even;
    let spec = HamiltonianSpec::new(n, h, eval, flags, box_, 0.0)?.with_label("mechanical");
    Ok((spec, PotentialFlags { even, zero_at_origin }))
}

/// Potential sampled on a uniform grid, interpolated by a tensor-product
/// cubic B-spline with natural end conditions (so `V` is `C²`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPotential {
    pub lower: Vec<f64>,
    pub spacing: Vec<f64>,
    pub counts: Vec<usize>,
    /// Row-major values, last axis fastest.
    pub values: Vec<f64>,
    #[serde(skip)]
    coeffs: Vec<f64>,
}

fn bspline(t: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let s = 1.0 - t;
    let b = [s * s * s / 6.0, (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0, (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0, t * t * t / 6.0];
    let d = [-s * s / 2.0, (3.0 * t * t - 4.0 * t) / 2.0, (-3.0 * t * t + 2.0 * t + 1.0) / 2.0, t * t / 2.0];
    let dd = [s, 3.0 * t - 2.0, -3.0 * t + 1.0, t];
    (b, d, dd)
}

/// Inverse of the `(m+2)×(m+2)` interpolation system for one axis.
fn spline_system(m: usize) -> Mat {
    let k = m + 2;
    let mut a = Mat::zeros(k, k);
    // unknown j is the coefficient at grid index j − 1
    a[(0, 0)] = 1.0;
    a[(0, 1)] = -2.0;
    a[(0, 2)] = 1.0;
    for i in 0..m {
        a[(i + 1, i)] = 1.0 / 6.0;
        a[(i + 1, i + 1)] = 4.0 / 6.0;
        a[(i + 1, i + 2)] = 1.0 / 6.0;
    }
    a[(k - 1, k - 3)] = 1.0;
    a[(k - 1, k - 2)] = -2.0;
    a[(k - 1, k - 1)] = 1.0;
    a.try_inverse().expect("the natural spline system is regular")
}

impl GridPotential {
    pub fn new(lower: Vec<f64>, spacing: Vec<f64>, counts: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let n = counts.len();
        if n == 0 || lower.len() != n || spacing.len() != n {
            return Err(Error::Dimension("grid potential needs matching lower/spacing/counts".into()));
        }
        if counts.iter().any(|&c| c < 4) {
            return Err(Error::Dimension("every grid axis needs at least 4 nodes".into()));
        }
        if spacing.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(Error::Domain("grid spacing must be positive".into()));
        }
        let total: usize = counts.iter().product();
        if values.len() != total {
            return Err(Error::Dimension(format!("grid has {total} nodes but {} values", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid values".into()));
        }
        let mut g = Self { lower, spacing, counts, values, coeffs: Vec::new() };
        g.fit();
        Ok(g)
    }

    /// Sample `f` on the grid `lower + i·spacing`.
    pub fn sample(lower: Vec<f64>, spacing: Vec<f64>, counts: Vec<usize>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let total: usize = counts.iter().product();
        let n = counts.len();
        let mut values = Vec::with_capacity(total);
        let mut idx = alloc::vec![0usize; n];
        let mut q = alloc::vec![0.0; n];
        for _ in 0..total {
            for a in 0..n {
                q[a] = lower[a] + idx[a] as f64 * spacing[a];
            }
            values.push(f(&q));
            for a in (0..n).rev() {
                idx[a] += 1;
                if idx[a] < counts[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        Self::new(lower, spacing, counts, values)
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    fn fit(&mut self) {
        let n = self.n();
        let mut dims: Vec<usize> = self.counts.clone();
        let mut data = self.values.clone();
        for axis in 0..n {
            let m = self.counts[axis];
            let inv = spline_system(m);
            let outer: usize = dims[..axis].iter().product();
            let inner: usize = dims[axis + 1..].iter().product();
            let mut next = alloc::vec![0.0; outer * (m + 2) * inner];
            let mut rhs = Vector::zeros(m + 2);
            for o in 0..outer {
                for i in 0..inner {
                    rhs[0] = 0.0;
                    rhs[m + 1] = 0.0;
                    for j in 0..m {
                        rhs[j + 1] = data[(o * m + j) * inner + i];
                    }
                    let c = &inv * &rhs;
                    for j in 0..m + 2 {
                        next[(o * (m + 2) + j) * inner + i] = c[j];
                    }
                }
            }
            dims[axis] = m + 2;
            data = next;
        }
        self.coeffs = data;
    }

    /// `(V, ∇V, ∇²V)` at `q`; `NaN` outside the grid.
    pub fn eval(&self, q: &[f64]) -> (f64, Vector, Mat) {
        let n = self.n();
        let nan = (f64::NAN, Vector::from_element(n, f64::NAN), Mat::from_element(n, n, f64::NAN));
        if q.len() != n {
            return nan;
        }
        let mut cell = alloc::vec![0usize; n];
        let mut basis = Vec::with_capacity(n);
        for a in 0..n {
            let u = (q[a] - self.lower[a]) / self.spacing[a];
            let last = (self.counts[a] - 1) as f64;
            if !(u >= -1e-12 && u <= last + 1e-12) {
                return nan;
            }
            let i = (linalg::floor(u.clamp(0.0, last)) as usize).min(self.counts[a] - 2);
            cell[a] = i;
            basis.push(bspline(u - i as f64));
        }
        let dims: Vec<usize> = self.counts.iter().map(|c| c + 2).collect();
        let mut v = 0.0;
        let mut g = Vector::zeros(n);
        let mut h = Mat::zeros(n, n);
        let combos = 4usize.pow(n as u32);
        for c in 0..combos {
            let mut flat = 0usize;
            let mut rest = c;
            let mut off = alloc::vec![0usize; n];
            for a in 0..n {
                off[a] = rest % 4;
                rest /= 4;
                // coefficient index j − 1 = cell + off − 1, stored at cell + off
                flat = flat * dims[a] + cell[a] + off[a];
            }
            let coef = self.coeffs[flat];
            let mut prod = 1.0;
            for a in 0..n {
                prod *= basis[a].0[off[a]];
            }
            v += coef * prod;
            for a in 0..n {
                let mut ga = coef;
                for b in 0..n {
                    ga *= if a == b { basis[b].1[off[b]] / self.spacing[b] } else { basis[b].0[off[b]] };
                }
                g[a] += ga;
                for b2 in a..n {
                    let mut hab = coef;
                    for b in 0..n {
                        hab *= if b == a && b == b2 {
                            basis[b].2[off[b]] / (self.spacing[b] * self.spacing[b])
                        } else if b == a || b == b2 {
                            basis[b].1[off[b]] / self.spacing[b]
                        } else {
                            basis[b].0[off[b]]
                        };
                    }
                    h[(a, b2)] += hab;
                    if b2 != a {
                        h[(b2, a)] += hab;
                    }
                }
            }
        }
        (v, g, h)
    }

    /// Half-width of the largest centred box inside the grid.
    pub fn domain(&self) -> f64 {
        (0..self.n())
            .map(|a| {
                let lo = self.lower[a];
                let hi = lo + (self.counts[a] - 1) as f64 * self.spacing[a];
                (-lo).min(hi)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn into_potential(mut self) -> Potential {
        if self.coeffs.is_empty() {
            self.fit();
        }
        let n = self.n();
        let domain = self.domain();
        let g = Arc::new(self);
        let (g1, g2, g3) = (g.clone(), g.clone(), g);
        Potential {
            n,
            v: Arc::new(move |q: &Vector| g1.eval(q.as_slice()).0),
            grad: Arc::new(move |q: &Vector| g2.eval(q.as_slice()).1),
            hess: Arc::new(move |q: &Vector| g3.eval(q.as_slice()).2),
            domain,
        }
    }
}
