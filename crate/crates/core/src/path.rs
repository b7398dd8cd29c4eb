//! Symplectic paths `γ: [0,τ] → Sp(2k)`.
//!
//! A path always carries a scan grid with the matrices at the grid points.
//! Paths built from a generator field or a closed form can also be evaluated
//! at arbitrary times, which the index engine uses for adaptive refinement.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{self, expm, eye, max_abs, Mat};
use crate::sympcore::{self, diamond, standard_j};
use crate::{Error, Result};

pub type MatFn = Arc<dyn Fn(f64) -> Mat + Send + Sync>;

/// Tolerance on symplecticity of stored samples.
pub const SAMPLE_TOL: f64 = 1e-8;

/// Largest `h·‖B‖` allowed in one integration step.
const STEP_BUDGET: f64 = 0.05;

/// Symmetric generator `B(t)` of `γ' = J B(t) γ`.
#[derive(Clone)]
pub enum GeneratorField {
    Constant(Mat),
    /// `B = mats[i]` on `[breaks[i], breaks[i+1])`.
    PiecewiseConstant { breaks: Vec<f64>, mats: Vec<Mat> },
    /// Linear interpolation between nodes.
    PiecewiseLinear { times: Vec<f64>, mats: Vec<Mat> },
    Function(MatFn),
}

impl fmt::Debug for GeneratorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(b) => f.debug_tuple("Constant").field(b).finish(),
            Self::PiecewiseConstant { breaks, .. } => {
                f.debug_struct("PiecewiseConstant").field("breaks", breaks).finish_non_exhaustive()
            }
            Self::PiecewiseLinear { times, .. } => {
                f.debug_struct("PiecewiseLinear").field("times", times).finish_non_exhaustive()
            }
            Self::Function(_) => f.write_str("Function(..)"),
        }
    }
}

fn locate(knots: &[f64], t: f64) -> usize {
    // index i with knots[i] <= t < knots[i+1], clamped to valid pieces
    let n = knots.len();
    match knots.partition_point(|&k| k <= t) {
        0 => 0,
        i if i >= n => n - 2,
        i => i - 1,
    }
}

impl GeneratorField {
    pub fn eval(&self, t: f64) -> Mat {
        match self {
            Self::Constant(b) => b.clone(),
            Self::PiecewiseConstant { breaks, mats } => mats[locate(breaks, t).min(mats.len() - 1)].clone(),
            Self::PiecewiseLinear { times, mats } => {
                if times.len() == 1 {
                    return mats[0].clone();
                }
                let i = locate(times, t);
                let s = ((t - times[i]) / (times[i + 1] - times[i])).clamp(0.0, 1.0);
                &mats[i] * (1.0 - s) + &mats[i + 1] * s
            }
            Self::Function(f) => f(t),
        }
    }

    /// Times where the field may be non-smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::PiecewiseConstant { breaks, .. } => breaks.clone(),
            Self::PiecewiseLinear { times, .. } => times.clone(),
            _ => Vec::new(),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let check = |b: &Mat| -> Result<()> {
            if b.shape() != (dim, dim) {
                return Err(Error::Dimension(format!("generator is {:?}, expected {dim}x{dim}", b.shape())));
            }
            if !linalg::all_finite(b) {
                return Err(Error::NonFinite("generator entries".into()));
            }
            let defect = linalg::symmetric_defect(b);
            if defect > 1e-9 * max_abs(b).max(1.0) {
                return Err(Error::NotSymmetric { defect });
            }
            Ok(())
        };
        match self {
            Self::Constant(b) => check(b),
            Self::PiecewiseConstant { breaks, mats } => {
                if breaks.len() != mats.len() + 1 || mats.is_empty() {
                    return Err(Error::Dimension("piecewise-constant field needs one more break than pieces".into()));
                }
                increasing(breaks)?;
                mats.iter().try_for_each(check)
            }
            Self::PiecewiseLinear { times, mats } => {
                if times.len() != mats.len() || mats.is_empty() {
                    return Err(Error::Dimension("piecewise-linear field needs one matrix per node".into()));
                }
                increasing(times)?;
                mats.iter().try_for_each(check)
            }
            Self::Function(f) => check(&f(0.0)),
        }
    }

    /// Propagate `y(t0) = y0` to `t1 >= t0` along `y' = J B(t) y`.
    pub fn propagate(&self, y0: &Mat, t0: f64, t1: f64) -> Mat {
        let dim = y0.nrows();
        let j = standard_j(dim / 2).into_mat();
        let mut y = y0.clone();
        if t1 <= t0 {
            return y;
        }
        match self {
            Self::Constant(b) => expm(&(&j * b * (t1 - t0))) * y,
            Self::PiecewiseConstant { breaks, mats } => {
                let mut t = t0;
                while t < t1 {
                    let i = locate(breaks, t).min(mats.len() - 1);
                    let end = if i + 1 < mats.len() { breaks[i + 1].min(t1) } else { t1 };
                    let end = if end <= t { t1 } else { end };
                    y = expm(&(&j * &mats[i] * (end - t))) * y;
                    t = end;
                }
                y
            }
            _ => {
                let mut cuts: Vec<f64> = self.breakpoints().into_iter().filter(|&b| b > t0 && b < t1).collect();
                cuts.push(t1);
                let mut t = t0;
                for end in cuts {
                    let norm = self.eval(0.5 * (t + end)).norm().max(self.eval(t).norm()).max(1e-12);
                    let steps = linalg::ceil((end - t) * norm / STEP_BUDGET).max(1.0) as usize;
                    let h = (end - t) / steps as f64;
                    for s in 0..steps {
                        y = gl3_step(self, &j, t + s as f64 * h, h, &y);
                    }
                    t = end;
                }
                y
            }
        }
    }
}

fn increasing(ts: &[f64]) -> Result<()> {
    if ts.windows(2).any(|w| w[1] <= w[0]) || ts.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("node times must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// One step of the three-stage Gauss–Legendre method for a linear system.
fn gl3_step(field: &GeneratorField, j: &Mat, t: f64, h: f64, y: &Mat) -> Mat {
    let r15 = linalg::sqrt(15.0);
    let c = [0.5 - r15 / 10.0, 0.5, 0.5 + r15 / 10.0];
    let a = [
        [5.0 / 36.0, 2.0 / 9.0 - r15 / 15.0, 5.0 / 36.0 - r15 / 30.0],
        [5.0 / 36.0 + r15 / 24.0, 2.0 / 9.0, 5.0 / 36.0 - r15 / 24.0],
        [5.0 / 36.0 + r15 / 30.0, 2.0 / 9.0 + r15 / 15.0, 5.0 / 36.0],
    ];
    let b = [5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0];
    let d = y.nrows();
    let f: [Mat; 3] = core::array::from_fn(|i| j * field.eval(t + c[i] * h));
    let mut lhs = Mat::zeros(3 * d, 3 * d);
    let mut rhs = Mat::zeros(3 * d, y.ncols());
    for i in 0..3 {
        for k in 0..3 {
            let mut blk = &f[i] * (-h * a[i][k]);
            if i == k {
                blk += eye(d);
            }
            lhs.view_mut((i * d, k * d), (d, d)).copy_from(&blk);
        }
        rhs.view_mut((i * d, 0), (d, y.ncols())).copy_from(&(&f[i] * y));
    }
    let stages = lhs.lu().solve(&rhs).expect("Gauss-Legendre stage system is regular for small steps");
    let mut out = y.clone();
    for i in 0..3 {
        out += stages.view((i * d, 0), (d, y.ncols())) * (h * b[i]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    Generator,
    Samples,
    Derived,
}

/// A symplectic path with a scan grid and optional evaluator.
#[derive(Clone)]
pub struct SymplecticPath {
    k: usize,
    tau: f64,
    kind: PathKind,
    grid: Arc<Vec<f64>>,
    samples: Arc<Vec<Mat>>,
    eval: Option<MatFn>,
    generator: Option<MatFn>,
    field: Option<GeneratorField>,
}

impl fmt::Debug for SymplecticPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymplecticPath")
            .field("k", &self.k)
            .field("tau", &self.tau)
            .field("kind", &self.kind)
            .field("samples", &self.grid.len())
            .finish()
    }
}

fn uniform_grid(tau: f64, n: usize, extra: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = (0..=n).map(|i| tau * i as f64 / n as f64).collect();
    g.extend(extra.iter().copied().filter(|&t| t > 0.0 && t < tau));
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    g.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * tau.max(1.0));
    if let Some(last) = g.last_mut() {
        *last = tau;
    }
    g
}

impl SymplecticPath {
    /// Fundamental solution of `γ' = J B(t) γ` on `[0, τ]`.
    pub fn from_generator(k: usize, tau: f64, field: GeneratorField, min_samples: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Dimension("half-dimension must be positive".into()));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Domain(format!("duration must be positive, got {tau}")));
        }
        field.validate(2 * k)?;
        // resolve rotation speed so that neighbouring samples stay close
        let probe = 64usize;
        let mut total = 0.0;
        for i in 0..probe {
            total += field.eval(tau * (i as f64 + 0.5) / probe as f64).norm() * tau / probe as f64;
        }
        let n = min_samples.max(linalg::ceil(total / 0.2) as usize).max(8);
        let grid = uniform_grid(tau, n, &field.breakpoints());
        let mut samples = Vec::with_capacity(grid.len());
        let mut y = eye(2 * k);
        samples.push(y.clone());
        for w in grid.windows(2) {
            y = field.propagate(&y, w[0], w[1]);
            samples.push(y.clone());
        }
        let grid = Arc::new(grid);
        let samples = Arc::new(samples);
        let (g, s, f) = (grid.clone(), samples.clone(), field.clone());
        let eval: MatFn = Arc::new(move |t: f64| {
            let i = g.partition_point(|&x| x <= t).saturating_sub(1).min(g.len() - 1);
            f.propagate(&s[i], g[i], t)
        });
        let f2 = field.clone();
        let generator: MatFn = Arc::new(move |t: f64| f2.eval(t));
        Ok(Self {
            k,
            tau,
            kind: PathKind::Generator,
            grid,
            samples,
            eval: Some(eval),
            generator: Some(generator),
            field: Some(field),
        })
    }

    /// `γ(t) = exp(t J B)` on `[0, τ]`.
    pub fn constant_generator(b: Mat, tau: f64) -> Result<Self> {
        let k = b.nrows() / 2;
        Self::from_generator(k, tau, GeneratorField::Constant(b), 16)
    }

    /// Dense samples; no evaluation between sample times.
    pub fn from_samples(times: Vec<f64>, mats: Vec<Mat>) -> Result<Self> {
        if times.len() != mats.len() || times.len() < 2 {
            return Err(Error::Dimension("a sampled path needs at least two samples and one time per sample".into()));
        }
        increasing(&times)?;
        if times[0] != 0.0 {
            return Err(Error::Domain("sampled paths start at t = 0".into()));
        }
        let dim = mats[0].nrows();
        if dim % 2 != 0 || dim == 0 {
            return Err(Error::Dimension(format!("samples are {dim}x{dim}")));
        }
        for m in &mats {
            if !linalg::all_finite(m) {
                return Err(Error::NonFinite("path sample".into()));
            }
            let d = sympcore::symplectic_defect(m)?;
            if d > SAMPLE_TOL * { let s = max_abs(m).max(1.0); s * s } {
                return Err(Error::NotSymplectic { defect: d });
            }
        }
        if max_abs(&(&mats[0] - eye(dim))) > SAMPLE_TOL {
            return Err(Error::Domain("sampled paths must start at the identity".into()));
        }
        let tau = *times.last().unwrap();
        Ok(Self {
            k: dim / 2,
            tau,
            kind: PathKind::Samples,
            grid: Arc::new(times),
            samples: Arc::new(mats),
            eval: None,
            generator: None,
            field: None,
        })
    }

    /// A closed-form path. `f(0)` must be the identity unless the path is
    /// only used as a reference segment (see [`Self::from_fn_any_start`]).
    pub fn from_fn(k: usize, tau: f64, n: usize, f: MatFn, generator: Option<MatFn>) -> Result<Self> {
        let p = Self::from_fn_any_start(k, tau, n, f, generator)?;
        if max_abs(&(&p.samples[0] - eye(2 * k))) > SAMPLE_TOL {
            return Err(Error::Domain("path must start at the identity".into()));
        }
        Ok(p)
    }

    pub(crate) fn from_fn_any_start(k: usize, tau: f64, n: usize, f: MatFn, generator: Option<MatFn>) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Domain(format!("duration must be positive, got {tau}")));
        }
        Ok(Self::derived(k, tau, uniform_grid(tau, n.max(2), &[]), f, generator))
    }

    fn derived(k: usize, tau: f64, grid: Vec<f64>, f: MatFn, generator: Option<MatFn>) -> Self {
        let samples: Vec<Mat> = grid.iter().map(|&t| f(t)).collect();
        Self {
            k,
            tau,
            kind: PathKind::Derived,
            grid: Arc::new(grid),
            samples: Arc::new(samples),
            eval: Some(f),
            generator,
            field: None,
        }
    }

    /// `R(ωt)^{⋄k}`-style rotation path in `Sp(2)`: `γ(t) = R(rate·t)`.
    pub fn rotation(rate: f64, tau: f64) -> Result<Self> {
        let n = 16usize.max(linalg::ceil(rate.abs() * tau / 0.2) as usize);
        let f: MatFn = Arc::new(move |t| linalg::rotation(rate * t));
        let g: MatFn = Arc::new(move |_| eye(2) * rate);
        Self::from_fn(1, tau, n, f, Some(g))
    }

    /// Constant identity path.
    pub fn identity(k: usize, tau: f64) -> Result<Self> {
        let f: MatFn = Arc::new(move |_| eye(2 * k));
        let g: MatFn = Arc::new(move |_| Mat::zeros(2 * k, 2 * k));
        Self::from_fn(k, tau, 2, f, Some(g))
    }

    pub fn half_dim(&self) -> usize {
        self.k
    }

    pub fn duration(&self) -> f64 {
        self.tau
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn field(&self) -> Option<&GeneratorField> {
        self.field.as_ref()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn samples(&self) -> &[Mat] {
        &self.samples
    }

    pub fn endpoint(&self) -> &Mat {
        self.samples.last().expect("paths have samples")
    }

    pub fn start(&self) -> &Mat {
        &self.samples[0]
    }

    pub fn can_evaluate(&self) -> bool {
        self.eval.is_some()
    }

    pub fn has_generator(&self) -> bool {
        self.generator.is_some()
    }

    /// `γ(t)`; exact at grid points, otherwise requires an evaluator.
    pub fn at(&self, t: f64) -> Result<Mat> {
        let i = self.grid.partition_point(|&x| x < t);
        for c in [i.saturating_sub(1), i] {
            if c < self.grid.len() && (self.grid[c] - t).abs() <= 1e-15 * self.tau.max(1.0) {
                return Ok(self.samples[c].clone());
            }
        }
        match &self.eval {
            Some(f) => Ok(f(t.clamp(0.0, self.tau))),
            None => Err(Error::RefinementNeeded {
                t,
                reason: "sampled path cannot be evaluated between samples".into(),
            }),
        }
    }

    /// `B(t)` when the path carries a generator.
    pub fn generator_at(&self, t: f64) -> Option<Mat> {
        self.generator.as_ref().map(|g| g(t))
    }

    pub(crate) fn evaluator(&self) -> Option<MatFn> {
        self.eval.clone()
    }

    pub(crate) fn generator_fn(&self) -> Option<MatFn> {
        self.generator.clone()
    }

    /// `γ₁ ⋄ γ₂` for paths of equal duration.
    pub fn diamond(&self, other: &Self) -> Result<Self> {
        if (self.tau - other.tau).abs() > 1e-12 * self.tau.max(1.0) {
            return Err(Error::Domain("⋄-product needs paths of equal duration".into()));
        }
        let mut grid: Vec<f64> = self.grid.iter().chain(other.grid.iter()).copied().collect();
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * self.tau.max(1.0));
        let k = self.k + other.k;
        match (&self.eval, &other.eval) {
            (Some(f1), Some(f2)) => {
                let (f1, f2) = (f1.clone(), f2.clone());
                let f: MatFn = Arc::new(move |t| diamond(&f1(t), &f2(t)));
                let generator = match (&self.generator, &other.generator) {
                    (Some(g1), Some(g2)) => {
                        let (g1, g2) = (g1.clone(), g2.clone());
                        Some(Arc::new(move |t| diamond(&g1(t), &g2(t))) as MatFn)
                    }
                    _ => None,
                };
                let mut p = Self::derived(k, self.tau, grid, f, generator);
                p.tau = self.tau;
                Ok(p)
            }
            _ => {
                let mut mats = Vec::with_capacity(grid.len());
                for &t in &grid {
                    mats.push(diamond(&self.at(t)?, &other.at(t)?));
                }
                Self::from_samples(grid, mats)
            }
        }
    }

    /// Conjugate every sample: `t ↦ S γ(t) S⁻¹`.
    pub fn conjugated(&self, s: &Mat) -> Result<Self> {
        let s_inv = sympcore::symplectic_inverse(s);
        let mats: Vec<Mat> = self.samples.iter().map(|m| s * m * &s_inv).collect();
        match &self.eval {
            Some(f) => {
                let (f, s, si) = (f.clone(), s.clone(), s_inv.clone());
                let g: MatFn = Arc::new(move |t| &s * f(t) * &si);
                let generator = self.generator.as_ref().map(|b| {
                    // S J B S⁻¹ = J (S⁻ᵀ B S⁻¹)
                    let (b, si) = (b.clone(), s_inv.clone());
                    Arc::new(move |t: f64| si.transpose() * b(t) * &si) as MatFn
                });
                let mut p = Self::derived(self.k, self.tau, self.grid.to_vec(), g, generator);
                p.samples = Arc::new(mats);
                Ok(p)
            }
            None => Self::from_samples(self.grid.to_vec(), mats),
        }
    }

    /// Reparametrize by a strictly increasing map `φ: [0,τ] → [0,τ]` with fixed ends.
    pub fn reparametrized(&self, phi: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> Result<Self> {
        let f = self.eval.clone().ok_or_else(|| Error::Unsupported("reparametrizing a sampled path".into()))?;
        let g: MatFn = Arc::new(move |t| f(phi(t)));
        Self::from_fn(self.k, self.tau, self.grid.len().max(16) * 2, g, None)
    }

    /// Build a derived path from an evaluator on an explicit grid.
    pub(crate) fn with_grid(k: usize, tau: f64, grid: Vec<f64>, samples: Vec<Mat>, eval: Option<MatFn>, generator: Option<MatFn>) -> Self {
        Self {
            k,
            tau,
            kind: if eval.is_some() { PathKind::Derived } else { PathKind::Samples },
            grid: Arc::new(grid),
            samples: Arc::new(samples),
            eval,
            generator,
            field: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sympcore::symplectic_defect;

    #[test]
    fn generator_paths_match_closed_forms() {
        let p = SymplecticPath::constant_generator(eye(2), 2.0).unwrap();
        assert!(max_abs(&(p.endpoint() - linalg::rotation(2.0))) < 1e-12);
        assert!(max_abs(&(p.at(0.7).unwrap() - linalg::rotation(0.7))) < 1e-12);
        // time-dependent field through the Gauss-Legendre stepper
        let f = GeneratorField::PiecewiseLinear { times: alloc::vec![0.0, 1.0], mats: alloc::vec![eye(2), eye(2)] };
        let q = SymplecticPath::from_generator(1, 1.0, f, 8).unwrap();
        assert!(max_abs(&(q.endpoint() - linalg::rotation(1.0))) < 1e-12);
    }

    #[test]
    fn gauss_legendre_keeps_symplecticity() {
        let f: MatFn = Arc::new(|t: f64| {
            Mat::from_row_slice(4, 4, &[
                1.0 + t, 0.3, 0.0, 0.2, 0.3, -0.5, 0.1, 0.0, 0.0, 0.1, 2.0, t, 0.2, 0.0, t, 0.7,
            ])
        });
        let p = SymplecticPath::from_generator(2, 3.0, GeneratorField::Function(f), 8).unwrap();
        assert!(symplectic_defect(p.endpoint()).unwrap() < 1e-10 * max_abs(p.endpoint()) * max_abs(p.endpoint()));
    }

    #[test]
    fn sampled_paths_validate() {
        assert!(SymplecticPath::from_samples(alloc::vec![0.0, 1.0], alloc::vec![eye(2), linalg::rotation(1.0)]).is_ok());
        assert!(SymplecticPath::from_samples(alloc::vec![0.0], alloc::vec![eye(2)]).is_err());
        let bad = Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            SymplecticPath::from_samples(alloc::vec![0.0, 1.0], alloc::vec![eye(2), bad]),
            Err(Error::NotSymplectic { .. })
        ));
    }
}
