//! Brake iteration of symplectic paths and the identities built on it.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::{self, eye, max_abs, Mat, C64};
use crate::maslov::{i_lagrangian, i_omega, IndexPair, Lagrangian};
use crate::normalforms::{circle_spectrum, plane_components, splitting_numbers, SplittingPair, DEFAULT_CLUSTER_TOL};
use crate::path::{MatFn, SymplecticPath};
use crate::sympcore::{diamond, diamond_factor, standard_j, standard_n, symplectic_inverse, SymplecticMatrix};
use crate::{Error, Result};

const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const MINUS_ONE: C64 = C64 { re: -1.0, im: 0.0 };

/// Tolerance on the continuity of iterates at segment joints.
const JOINT_TOL: f64 = 1e-8;

fn mat_pow(m: &Mat, j: usize) -> Mat {
    let mut out = eye(m.nrows());
    for _ in 0..j {
        out = &out * m;
    }
    out
}

/// `N γ(τ)⁻¹ N γ(τ)`.
pub fn brake_square_endpoint(p: &Mat) -> Mat {
    let n = standard_n(p.nrows() / 2);
    &n * symplectic_inverse(p) * &n * p
}

/// The `k`-th iterate of `γ` in the brake sense, a path on `[0, kτ]`.
pub fn brake_iterate(path: &SymplecticPath, k: usize) -> Result<SymplecticPath> {
    if k == 0 {
        return Err(Error::Domain("iteration count must be positive".into()));
    }
    let n = path.half_dim();
    let tau = path.duration();
    let nm = standard_n(n);
    let p = path.endpoint().clone();
    let m = brake_square_endpoint(&p);
    let powers: Vec<Mat> = (0..=k.div_ceil(2)).map(|j| mat_pow(&m, j)).collect();
    let base_grid = path.grid();
    let base = path.samples();
    let mut grid = Vec::new();
    let mut samples = Vec::new();
    for s in 0..k {
        let j = s / 2;
        let off = s as f64 * tau;
        if s % 2 == 0 {
            for (i, (&g, x)) in base_grid.iter().zip(base.iter()).enumerate() {
                if s > 0 && i == 0 {
                    continue;
                }
                grid.push(off + g);
                samples.push(x * &powers[j]);
            }
        } else {
            let joint_left = samples.last().cloned().expect("even segment precedes");
            let right = &nm * &base[base.len() - 1] * &nm * &powers[j + 1];
            let mismatch = max_abs(&(&joint_left - &right)) / max_abs(&right).max(1.0);
            if mismatch > JOINT_TOL {
                return Err(Error::JointMismatch { segment: s, mismatch });
            }
            for i in (0..base.len() - 1).rev() {
                grid.push(off + tau - base_grid[i]);
                samples.push(&nm * &base[i] * &nm * &powers[j + 1]);
            }
        }
    }
    if let Some(last) = grid.last_mut() {
        *last = k as f64 * tau;
    }
    let eval = path.evaluator().map(|f| {
        let (nm, powers) = (nm.clone(), powers.clone());
        Arc::new(move |t: f64| {
            let s = ((t / tau) as usize).min(k - 1);
            let j = s / 2;
            if s % 2 == 0 {
                f(t - 2.0 * j as f64 * tau) * &powers[j]
            } else {
                &nm * f(2.0 * j as f64 * tau + 2.0 * tau - t) * &nm * &powers[j + 1]
            }
        }) as MatFn
    });
    let generator = path.generator_fn().map(|g| {
        let nm = nm.clone();
        Arc::new(move |t: f64| {
            let s = ((t / tau) as usize).min(k - 1);
            let j = s / 2;
            if s % 2 == 0 {
                g(t - 2.0 * j as f64 * tau)
            } else {
                &nm * g(2.0 * j as f64 * tau + 2.0 * tau - t) * &nm
            }
        }) as MatFn
    });
    Ok(SymplecticPath::with_grid(n, k as f64 * tau, grid, samples, eval, generator))
}

/// `γ²(t) = γ(t − τ)γ(τ)` on `[τ, 2τ]`, the periodic double.
pub fn periodic_square(path: &SymplecticPath) -> Result<SymplecticPath> {
    let n = path.half_dim();
    let tau = path.duration();
    let p = path.endpoint().clone();
    let mut grid: Vec<f64> = path.grid().to_vec();
    let mut samples: Vec<Mat> = path.samples().to_vec();
    for (g, x) in path.grid().iter().zip(path.samples()).skip(1) {
        grid.push(tau + g);
        samples.push(x * &p);
    }
    let eval = path.evaluator().map(|f| {
        let p = p.clone();
        Arc::new(move |t: f64| if t <= tau { f(t) } else { f(t - tau) * &p }) as MatFn
    });
    let generator = path
        .generator_fn()
        .map(|g| Arc::new(move |t: f64| if t <= tau { g(t) } else { g(t - tau) }) as MatFn);
    Ok(SymplecticPath::with_grid(n, 2.0 * tau, grid, samples, eval, generator))
}

/// `i(γ²) = i₁(γ) + i₋₁(γ)`, the matching nullity identity and
/// `S⁺_{P²}(1) = S⁺_P(1) + S⁺_P(−1)`, with `γ²` the periodic double.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BottReport {
    pub square: IndexPair,
    pub one: IndexPair,
    pub minus_one: IndexPair,
    pub s_plus_square: usize,
    pub s_plus_one: usize,
    pub s_plus_minus_one: usize,
    pub pass: bool,
}

pub fn bott_check(path: &SymplecticPath) -> Result<BottReport> {
    let sq = periodic_square(path)?;
    let square = i_omega(&sq, ONE)?;
    let one = i_omega(path, ONE)?;
    let minus_one = i_omega(path, MINUS_ONE)?;
    let p = SymplecticMatrix::from_trusted(path.endpoint().clone());
    let p2 = SymplecticMatrix::from_trusted(sq.endpoint().clone());
    let s_plus_square = splitting_numbers(&p2, ONE)?.s_plus;
    let s_plus_one = splitting_numbers(&p, ONE)?.s_plus;
    let s_plus_minus_one = splitting_numbers(&p, MINUS_ONE)?.s_plus;
    let pass = square.index == one.index + minus_one.index
        && square.nullity == one.nullity + minus_one.nullity
        && s_plus_square == s_plus_one + s_plus_minus_one;
    Ok(BottReport { square, one, minus_one, s_plus_square, s_plus_one, s_plus_minus_one, pass })
}

/// `i_{L0} + i_{L1} = i(γ²) − n` and `ν_{L0} + ν_{L1} = ν(γ²)`, with `γ²` the brake iterate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub n: usize,
    pub l0: IndexPair,
    pub l1: IndexPair,
    pub double: IndexPair,
    pub pass: bool,
}

pub fn decomposition_check(path: &SymplecticPath) -> Result<DecompositionReport> {
    let n = path.half_dim();
    let l0 = i_lagrangian(path, Lagrangian::L0)?;
    let l1 = i_lagrangian(path, Lagrangian::L1)?;
    let double = i_omega(&brake_iterate(path, 2)?, ONE)?;
    let pass = l0.index + l1.index == double.index - n as i64 && l0.nullity + l1.nullity == double.nullity;
    Ok(DecompositionReport { n, l0, l1, double, pass })
}

/// `P² = N P⁻¹ N P` defect, relative to the size of `P²`.
pub fn brake_symmetry_defect(p: &Mat) -> f64 {
    let sq = p * p;
    max_abs(&(&sq - brake_square_endpoint(p))) / max_abs(&sq).max(1.0)
}

fn lift(psi: &Mat) -> Result<(Mat, Mat)> {
    let k = psi.nrows();
    if psi.shape() != (k, k) {
        return Err(Error::Dimension("witness ψ must be square".into()));
    }
    let det = psi.determinant();
    if !(det > 0.0) {
        return Err(Error::WitnessRejected(format!("det ψ = {det} is not positive")));
    }
    let inv = psi.clone().try_inverse().expect("positive determinant");
    let z = Mat::zeros(k, k);
    let left = linalg::from_blocks(&inv, &z, &z, &psi.transpose());
    let right = linalg::from_blocks(psi, &z, &z, &inv.transpose());
    Ok((left, right))
}

/// If `diag(ψ⁻¹, ψᵀ) P diag(ψ, ψ^{-T})` has a decoupled coordinate plane equal
/// to `−I₂`, return that plane and the complementary factor `Q`.
pub fn minus_i2_split(p: &Mat, psi: Option<&Mat>) -> Result<Option<(usize, Mat)>> {
    let k = p.nrows() / 2;
    let x = match psi {
        Some(psi) => {
            let (l, r) = lift(psi)?;
            l * p * r
        }
        None => p.clone(),
    };
    let tol = 1e-9 * max_abs(&x).max(1.0);
    let comps = plane_components(&x);
    for c in &comps {
        if c.len() == 1 && max_abs(&(diamond_factor(&x, c) + eye(2))) <= tol {
            let rest: Vec<usize> = (0..k).filter(|&i| i != c[0]).collect();
            let q = if rest.is_empty() { Mat::zeros(0, 0) } else { diamond_factor(&x, &rest) };
            return Ok(Some((c[0], q)));
        }
    }
    Ok(None)
}

/// Whether `M = S⁻¹(I₂ ⋄ M̃)S` for some symplectic `S`: the fixed space of `M`
/// contains a symplectic plane.
pub fn has_identity_factor(m: &Mat) -> bool {
    let d = m.nrows();
    let kernel = linalg::null_space(&(m - eye(d)), 1e-9);
    if kernel.ncols() < 2 {
        return false;
    }
    let j = standard_j(d / 2);
    let form = kernel.transpose() * j.as_mat() * &kernel;
    max_abs(&form) > 1e-6
}

/// Circle-spectrum and `ν` data of `N P⁻¹ N P` against `I₂ ⋄ N Q⁻¹ N Q`
/// for an endpoint with the `(−I₂) ⋄ Q` structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G4Report {
    pub plane: usize,
    pub matches: bool,
    pub spectrum_p: Vec<crate::normalforms::CircleEigenvalue>,
    pub spectrum_model: Vec<crate::normalforms::CircleEigenvalue>,
}

pub fn g4_check(p: &Mat, psi: Option<&Mat>) -> Result<Option<G4Report>> {
    let Some((plane, q)) = minus_i2_split(p, psi)? else {
        return Ok(None);
    };
    let model = if q.nrows() == 0 { eye(2) } else { diamond(&eye(2), &brake_square_endpoint(&q)) };
    let spectrum_p = circle_spectrum(&SymplecticMatrix::from_trusted(brake_square_endpoint(p)), DEFAULT_CLUSTER_TOL);
    let spectrum_model = circle_spectrum(&SymplecticMatrix::from_trusted(model), DEFAULT_CLUSTER_TOL);
    let matches = spectrum_p.len() == spectrum_model.len()
        && spectrum_p.iter().zip(&spectrum_model).all(|(a, b)| {
            linalg::wrap_pi(a.angle - b.angle).abs() < 1e-6 && a.multiplicity == b.multiplicity && a.nu == b.nu
        });
    Ok(Some(G4Report { plane, matches, spectrum_p, spectrum_model }))
}

/// The gap `i_{L1}(γ) + S⁺_{P²}(1) − ν_{L0}(γ) − (1−n)/2` with hypothesis status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem31Report {
    pub n: usize,
    pub l0: IndexPair,
    pub l1: IndexPair,
    pub periodic: IndexPair,
    pub s_plus_p2: usize,
    /// Twice the gap, an integer.
    pub gap_twice: i64,
    pub gap: f64,
    pub n_odd_ge3: bool,
    pub indices_nonneg: bool,
    pub periodic_ge_n: bool,
    pub brake_symmetric: bool,
    pub minus_i2_structure: bool,
    pub hypotheses_hold: bool,
    /// `gap > 0` whenever the hypotheses hold.
    pub pass: bool,
    pub notes: Vec<String>,
}

/// Evaluate the Theorem 3.1 inequality. `psi` is an optional special-homotopy
/// witness (`det ψ > 0`) bringing the endpoint to `(−I₂) ⋄ Q` block form.
pub fn theorem31_gap(path: &SymplecticPath, psi: Option<&Mat>) -> Result<Theorem31Report> {
    let n = path.half_dim();
    let l0 = i_lagrangian(path, Lagrangian::L0)?;
    let l1 = i_lagrangian(path, Lagrangian::L1)?;
    let periodic = i_omega(path, ONE)?;
    let p = path.endpoint();
    let p2 = SymplecticMatrix::from_trusted(p * p);
    let s_plus_p2 = splitting_numbers(&p2, ONE)?.s_plus;
    let value = l1.index + s_plus_p2 as i64 - l0.nullity as i64;
    let gap_twice = 2 * value - (1 - n as i64);
    let n_odd_ge3 = n >= 3 && n % 2 == 1;
    let indices_nonneg = l0.index >= 0 && l1.index >= 0;
    let periodic_ge_n = periodic.index >= n as i64;
    let brake_symmetric = brake_symmetry_defect(p) <= 1e-8;
    let minus_i2_structure = minus_i2_split(p, psi)?.is_some();
    let mut notes = Vec::new();
    for (ok, what) in [
        (n_odd_ge3, "n is not an odd number >= 3"),
        (indices_nonneg, "i_L0 or i_L1 is negative"),
        (periodic_ge_n, "i(γ) < n"),
        (brake_symmetric, "P² ≠ N P⁻¹ N P"),
        (minus_i2_structure, "no (−I₂) ⋄ Q block form found"),
    ] {
        if !ok {
            notes.push(String::from(what));
        }
    }
    let hypotheses_hold = notes.is_empty();
    Ok(Theorem31Report {
        n,
        l0,
        l1,
        periodic,
        s_plus_p2,
        gap_twice,
        gap: gap_twice as f64 / 2.0,
        n_odd_ge3,
        indices_nonneg,
        periodic_ge_n,
        brake_symmetric,
        minus_i2_structure,
        hypotheses_hold,
        pass: !hypotheses_hold || gap_twice > 0,
        notes,
    })
}

/// Whether the path carries a generator that is positive definite at every
/// grid node and midpoint.
pub fn is_convex_generated(path: &SymplecticPath) -> bool {
    if !path.has_generator() {
        return false;
    }
    let grid = path.grid();
    let mut ts: Vec<f64> = grid.to_vec();
    ts.extend(grid.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    ts.iter().all(|&t| {
        let b = path.generator_at(t).expect("generator present");
        linalg::symmetric_eigenvalues(&b).iter().all(|&v| v > 0.0)
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// `(i_{L0}, ν_{L0})` of `γ^k`.
    pub l0: IndexPair,
    pub l1: IndexPair,
    /// `(i, ν)` and `(i_{−1}, ν_{−1})` of `γ^{2k}`.
    pub periodic: Option<(IndexPair, IndexPair)>,
}

/// Index data of the brake iterates `γ^k`, `k = 1..=k_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationProfile {
    pub n: usize,
    pub k_max: usize,
    pub records: Vec<IterationRecord>,
    /// Splitting numbers at 1 of `γ(τ)²`.
    pub s_p2: SplittingPair,
    /// Splitting numbers at 1 of `M = γ²(2τ) = N γ(τ)⁻¹ N γ(τ)`.
    pub s_m: SplittingPair,
    /// Splitting numbers at 1 of `M²`.
    pub s_m2: SplittingPair,
    pub convex: bool,
    /// `ν_{L1}(γ) ≥ 1`, as for the half-period path of a brake orbit whose
    /// velocity at the turning points lies in `L₁`.
    pub brake_endpoint: bool,
    /// `M` has an `I₂ ⋄ M̃` factor up to symplectic conjugation.
    pub identity_factor: bool,
}

pub const DEFAULT_K_MAX: usize = 16;

impl IterationProfile {
    pub fn build(path: &SymplecticPath, k_max: usize, periodic: bool) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::Domain("k_max must be positive".into()));
        }
        let mut records = Vec::with_capacity(k_max);
        for k in 1..=k_max {
            let it = brake_iterate(path, k)?;
            let l0 = i_lagrangian(&it, Lagrangian::L0)?;
            let l1 = i_lagrangian(&it, Lagrangian::L1)?;
            let per = if periodic {
                let it2 = brake_iterate(path, 2 * k)?;
                Some((i_omega(&it2, ONE)?, i_omega(&it2, MINUS_ONE)?))
            } else {
                None
            };
            records.push(IterationRecord { k, l0, l1, periodic: per });
        }
        let brake_endpoint = records[0].l1.nullity >= 1;
        let p = path.endpoint();
        let m = brake_square_endpoint(p);
        let s1 = |x: Mat| splitting_numbers(&SymplecticMatrix::from_trusted(x), ONE);
        Ok(Self {
            n: path.half_dim(),
            k_max,
            records,
            s_p2: s1(p * p)?,
            s_m: s1(m.clone())?,
            s_m2: s1(&m * &m)?,
            convex: is_convex_generated(path),
            brake_endpoint,
            identity_factor: has_identity_factor(&m),
        })
    }

    pub fn record(&self, k: usize) -> Option<&IterationRecord> {
        k.checked_sub(1).and_then(|i| self.records.get(i))
    }

    /// `i_{L0}(γ^{k_max}) / k_max`, the finite-horizon estimate of the mean index.
    pub fn mean_l0(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.l0.index as f64 / self.k_max as f64)
    }

    pub fn has_periodic(&self) -> bool {
        self.records.iter().all(|r| r.periodic.is_some())
    }
}

/// One tuple `(R, m₁, …, m_q)` with the residuals of (i)–(vi) per profile.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JumpTuple {
    pub r: i64,
    pub m: Vec<usize>,
    /// Residuals of (i)–(vi); `None` where periodic data are absent.
    pub residuals: Vec<[Option<i64>; 6]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchStatus {
    ConfirmedAtHorizon,
    NoneBelowRMax,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JumpSearch {
    pub r_max: i64,
    pub tuples: Vec<JumpTuple>,
    pub status: SearchStatus,
}

fn jump_residuals(p: &IterationProfile, r: i64, m: usize) -> Option<[Option<i64>; 6]> {
    let base = p.record(1)?;
    let lo = p.record(2 * m - 1)?;
    let hi = p.record(2 * m + 1)?;
    let n = p.n as i64;
    let s = p.s_m.s_plus as i64;
    let nu0 = base.l0.nullity as i64;
    let mut res = [None; 6];
    res[0] = Some((lo.l0.nullity as i64 - nu0).abs() + (hi.l0.nullity as i64 - nu0).abs());
    res[1] = Some(lo.l0.sum() - (r - (base.l1.index + n + s - nu0)));
    res[2] = Some(hi.l0.index - (r + base.l0.index));
    if let (Some((b1, _)), Some((lo1, _)), Some((hi1, _))) = (base.periodic, lo.periodic, hi.periodic) {
        let nu = b1.nullity as i64;
        res[3] = Some((lo1.nullity as i64 - nu).abs() + (hi1.nullity as i64 - nu).abs());
        res[4] = Some(lo1.sum() - (2 * r - (b1.index + 2 * s - nu)));
        res[5] = Some(hi1.index - (2 * r + b1.index));
    }
    Some(res)
}

/// Largest `R` whose candidates `m` all fit inside every profile's horizon.
pub fn max_searchable_r(profiles: &[IterationProfile]) -> i64 {
    profiles
        .iter()
        .map(|p| {
            let top = if p.k_max % 2 == 1 { p.k_max } else { p.k_max - 1 };
            p.record(top).map_or(0, |r| r.l0.index) - p.record(1).map_or(0, |r| r.l0.index)
        })
        .min()
        .unwrap_or(i64::MAX)
}

/// Brute-force search for index-jump tuples with `1 ≤ R ≤ r_max`.
pub fn index_jump_search(profiles: &[IterationProfile], r_max: i64) -> Result<JumpSearch> {
    if r_max < 1 {
        return Err(Error::Domain(format!("R_max must be positive, got {r_max}")));
    }
    if profiles.is_empty() {
        let tuples = (1..=r_max).map(|r| JumpTuple { r, m: Vec::new(), residuals: Vec::new() }).collect();
        return Ok(JumpSearch { r_max, tuples, status: SearchStatus::ConfirmedAtHorizon });
    }
    for p in profiles {
        if p.k_max < 3 {
            return Err(Error::Horizon { needed: 3 });
        }
        if !(p.mean_l0() > 0.0) {
            return Err(Error::Hypothesis("mean L0 index of a profile is not positive".into()));
        }
    }
    // (iii) forces i_{L0}(γ^{2m+1}) = R + i_{L0}(γ), so R is bounded by the horizon
    let reach = max_searchable_r(profiles);
    if r_max > reach {
        let needed = profiles
            .iter()
            .map(|p| {
                let need = (r_max + p.record(1).map_or(0, |r| r.l0.index)) as f64 / p.mean_l0();
                linalg::ceil(need) as usize + 3
            })
            .max()
            .unwrap_or(3);
        return Err(Error::Horizon { needed });
    }
    let mut tuples = Vec::new();
    for r in 1..=r_max {
        let mut per: Vec<Vec<(usize, [Option<i64>; 6])>> = Vec::with_capacity(profiles.len());
        for p in profiles {
            let mut ok = Vec::new();
            let mut m = 1;
            while 2 * m + 1 <= p.k_max {
                if let Some(res) = jump_residuals(p, r, m) {
                    if res.iter().all(|x| x.map_or(true, |v| v == 0)) {
                        ok.push((m, res));
                    }
                }
                m += 1;
            }
            per.push(ok);
        }
        if per.iter().any(|v| v.is_empty()) {
            continue;
        }
        // every combination of admissible m_j
        let mut idx = vec![0usize; per.len()];
        loop {
            tuples.push(JumpTuple {
                r,
                m: idx.iter().zip(&per).map(|(&i, v)| v[i].0).collect(),
                residuals: idx.iter().zip(&per).map(|(&i, v)| v[i].1).collect(),
            });
            let mut pos = 0;
            while pos < idx.len() {
                idx[pos] += 1;
                if idx[pos] < per[pos].len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == idx.len() {
                break;
            }
        }
    }
    let status = if tuples.is_empty() { SearchStatus::NoneBelowRMax } else { SearchStatus::ConfirmedAtHorizon };
    Ok(JumpSearch { r_max, tuples, status })
}

/// `𝓐 = i_{L1}(γ²) + S⁺_M(1) − ν_{L0}(γ²)` and `𝓑 = i_{L0}(γ²) + S⁺_M(1) − ν_{L1}(γ²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbReport {
    pub a: i64,
    pub b: i64,
    /// `i(γ, 2) + 2S⁺_M(1) − ν(γ, 2) − n`, which must equal `𝓐 + 𝓑`.
    pub periodic_side: Option<i64>,
    pub sum_identity: Option<bool>,
    /// `|𝓐 − 𝓑| ≤ n`.
    pub difference_bound: bool,
    /// `𝓐 ≥ (2−n)/2`, checked when the `I₂ ⋄ M̃` structure is present.
    pub a_bound: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// Convex generator and brake-type endpoint, the setting of the inequalities.
    pub hypotheses_hold: bool,
    /// `i_{L0}(m+1) − i_{L0}(m)` for `m = 1..k_max−1`.
    pub increments: Vec<i64>,
    pub first_inequality: Vec<bool>,
    pub second_inequality: Vec<bool>,
    /// `i(γ,2) + 2S⁺_{M²}(1) − ν(γ,2)` against `n + 2`, when its hypotheses hold.
    pub lemma34: Option<(i64, i64, bool)>,
    pub ab: Option<AbReport>,
    /// All checked inequalities hold (only meaningful under the hypotheses).
    pub pass: bool,
}

/// Lemma 3.5 inequalities on consecutive iterates, the Lemma 3.4 bound and the
/// `𝓐`/`𝓑` quantities, each reported with its hypothesis status.
pub fn monotonicity_audit(profile: &IterationProfile) -> Result<MonotonicityReport> {
    if profile.k_max < 2 {
        return Err(Error::Horizon { needed: 2 });
    }
    let n = profile.n as i64;
    let mut increments = Vec::new();
    let mut first_inequality = Vec::new();
    let mut second_inequality = Vec::new();
    for w in profile.records.windows(2) {
        let (a, b) = (&w[0].l0, &w[1].l0);
        increments.push(b.index - a.index);
        first_inequality.push(b.index - a.index >= 1);
        second_inequality.push(b.sum() - 1 >= b.index && b.index > a.sum() - 1);
    }
    // the periodic path here is γ² on [0, 2τ], whose own double is γ⁴
    let lemma34 = match (profile.record(1).and_then(|r| r.periodic), profile.record(2).and_then(|r| r.periodic)) {
        (Some((base, _)), Some((double, _))) if profile.identity_factor && base.index >= n => {
            let lhs = double.index + 2 * profile.s_m2.s_plus as i64 - double.nullity as i64;
            Some((lhs, n + 2, lhs >= n + 2))
        }
        _ => None,
    };
    let ab = profile.record(2).map(|r2| {
        let s = profile.s_m.s_plus as i64;
        let a = r2.l1.index + s - r2.l0.nullity as i64;
        let b = r2.l0.index + s - r2.l1.nullity as i64;
        let periodic_side = r2.periodic.map(|(p, _)| p.index + 2 * s - p.nullity as i64 - n);
        AbReport {
            a,
            b,
            periodic_side,
            sum_identity: periodic_side.map(|v| v == a + b),
            difference_bound: (a - b).abs() <= n,
            a_bound: lemma34.map(|_| 2 * a >= 2 - n),
        }
    });
    let pass = first_inequality.iter().chain(&second_inequality).all(|&x| x)
        && lemma34.map_or(true, |l| l.2)
        && ab.as_ref().map_or(true, |r| r.difference_bound && r.a_bound.unwrap_or(true));
    Ok(MonotonicityReport {
        hypotheses_hold: profile.convex && profile.brake_endpoint,
        increments, first_inequality, second_inequality, lemma34, ab, pass })
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rotation;
    use crate::testutil::{generator_path, path_values};
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn rot(rate: f64, tau: f64) -> SymplecticPath {
        SymplecticPath::rotation(rate, tau).unwrap()
    }

    /// `⋄_j R(ω_j t)` on `[0, τ]`.
    fn rotations(rates: &[f64], tau: f64) -> SymplecticPath {
        let mut p = rot(rates[0], tau);
        for &w in &rates[1..] {
            p = p.diamond(&rot(w, tau)).unwrap();
        }
        p
    }

    #[test]
    fn brake_iterate_endpoints() {
        let theta = 0.8;
        let g2 = brake_iterate(&rot(1.0, theta), 2).unwrap();
        assert!(max_abs(&(g2.endpoint() - rotation(2.0 * theta))) < 1e-12);
        assert!((g2.duration() - 2.0 * theta).abs() < 1e-15);
        let id = brake_iterate(&SymplecticPath::identity(2, 1.0).unwrap(), 2).unwrap();
        assert!(max_abs(&(id.endpoint() - eye(4))) < 1e-15);
        let vals: Vec<f64> = (0..30).map(|i| ((i * 7919) % 13) as f64 / 6.5 - 1.0).collect();
        let p = generator_path(2, 3, &vals);
        let m = brake_square_endpoint(p.endpoint());
        assert!(max_abs(&(brake_iterate(&p, 2).unwrap().endpoint() - &m)) <= 1e-10 * max_abs(&m));
        let g6 = brake_iterate(&p, 6).unwrap();
        let m3 = &m * &m * &m;
        assert!(max_abs(&(g6.endpoint() - &m3)) <= 1e-10 * max_abs(&m3));
        assert!(matches!(brake_iterate(&p, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn periodic_square_endpoints() {
        let sq = periodic_square(&rot(1.0, PI)).unwrap();
        assert!(max_abs(&(sq.endpoint() - eye(2))) < 1e-12);
        let vals: Vec<f64> = (0..10).map(|i| (i as f64 * 0.37).sin()).collect();
        let p = generator_path(1, 1, &vals[..3]);
        let sq = periodic_square(&p).unwrap();
        assert!(max_abs(&(sq.endpoint() - p.endpoint() * p.endpoint())) < 1e-12);
        // a rotation is brake symmetric, so both doubles end at the same place
        let r = rot(1.3, 0.9);
        assert!(brake_symmetry_defect(r.endpoint()) < 1e-12);
        assert!(max_abs(&(periodic_square(&r).unwrap().endpoint() - brake_iterate(&r, 2).unwrap().endpoint())) < 1e-12);
    }

    #[test]
    fn bott_and_decomposition_examples() {
        let rep = bott_check(&rot(2.0, 1.0)).unwrap();
        assert!(rep.pass, "{rep:?}");
        let hyp = SymplecticPath::constant_generator(Mat::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]), 1.0).unwrap();
        let rep = bott_check(&hyp).unwrap();
        assert!(rep.pass);
        assert_eq!((rep.square.index, rep.one.index, rep.minus_one.index), (0, 0, 0));
        let rep = decomposition_check(&rot(1.0, PI)).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert_eq!((rep.l0.index, rep.l1.index, rep.double.index), (0, 0, 1));
    }

    #[test]
    fn theorem31_on_ellipsoid_and_gate() {
        let r2: [f64; 3] = [1.0, 2f64.sqrt(), 3f64.sqrt()];
        let rates: Vec<f64> = r2.iter().map(|r| 2.0 / r).collect();
        let rep = theorem31_gap(&rotations(&rates, PI / 2.0), None).unwrap();
        assert!(rep.hypotheses_hold, "{rep:?}");
        assert!(rep.pass && rep.gap > 0.0);
        assert_eq!(rep.gap_twice, 2);
        // backward rotations have i(γ) = −n < n
        let rep = theorem31_gap(&rotations(&[-1.0, -1.1, -1.2], 0.5), None).unwrap();
        assert!(!rep.hypotheses_hold && !rep.periodic_ge_n && rep.pass);
    }

    #[test]
    fn structure_detection() {
        let q = rotation(0.4);
        let p = diamond(&-eye(2), &q);
        let (plane, found) = minus_i2_split(&p, None).unwrap().unwrap();
        assert_eq!(plane, 0);
        assert!(max_abs(&(found - &q)) < 1e-15);
        let psi = Mat::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 1.0]);
        let (l, r) = lift(&psi).unwrap();
        // undo the witness: P' = lift⁻¹ P lift⁻¹ has the block form after ψ
        let p2 = l.clone().try_inverse().unwrap() * &p * r.clone().try_inverse().unwrap();
        assert!(minus_i2_split(&p2, None).unwrap().is_none());
        assert!(minus_i2_split(&p2, Some(&psi)).unwrap().is_some());
        let rep = g4_check(&p2, Some(&psi)).unwrap().unwrap();
        assert!(rep.matches, "{rep:?}");
        assert!(has_identity_factor(&diamond(&eye(2), &rotation(1.0))));
        assert!(!has_identity_factor(&Mat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])));
        assert!(matches!(minus_i2_split(&p, Some(&-eye(2).map(|x| x + 0.0).remove_row(1).remove_column(1))), Err(Error::WitnessRejected(_))));
    }

    #[test]
    fn rotation_profile_and_jump_search() {
        let prof = IterationProfile::build(&rot(1.0, 1.0), DEFAULT_K_MAX, true).unwrap();
        for r in &prof.records {
            let expected = linalg::ceil(r.k as f64 / PI) as i64 - 1;
            assert_eq!(r.l0, IndexPair { index: expected, nullity: 0 });
            let (one, _) = r.periodic.unwrap();
            assert_eq!(one.index, 2 * linalg::floor(r.k as f64 / PI) as i64 + 1);
        }
        assert!(prof.convex && !prof.brake_endpoint);
        let reach = max_searchable_r(&[prof.clone()]);
        assert_eq!(reach, 4);
        let found = index_jump_search(&[prof.clone()], reach).unwrap();
        assert_eq!(found.status, SearchStatus::ConfirmedAtHorizon);
        assert!(found.tuples.iter().any(|t| t.r == 1 && t.m == vec![2]));
        for t in &found.tuples {
            assert!(t.residuals.iter().flatten().all(|x| *x == Some(0)));
        }
        assert!(matches!(index_jump_search(&[prof.clone()], reach + 5), Err(Error::Horizon { .. })));
        let other = IterationProfile::build(&rot(1.0, 2.0), DEFAULT_K_MAX, true).unwrap();
        let both = index_jump_search(&[prof.clone(), other.clone()], max_searchable_r(&[prof.clone(), other])).unwrap();
        for t in &both.tuples {
            assert_eq!(t.m.len(), 2);
            assert!(t.residuals.iter().flatten().all(|x| *x == Some(0)));
        }
        let vacuous = index_jump_search(&[], 5).unwrap();
        assert_eq!(vacuous.tuples.iter().map(|t| t.r).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
        // the rotation on [0, 1] is not a brake half-orbit: increments of 0 occur
        let audit = monotonicity_audit(&prof).unwrap();
        assert!(!audit.hypotheses_hold);
        assert!(audit.increments.iter().any(|&d| d == 0));
        let flat = IterationProfile::build(&SymplecticPath::identity(1, 1.0).unwrap(), 4, false).unwrap();
        assert!(!flat.convex);
        assert!(!monotonicity_audit(&flat).unwrap().hypotheses_hold);
    }

    #[test]
    fn ellipsoid_profiles_are_monotone() {
        for r2 in [vec![1.0, 2f64.sqrt(), 3f64.sqrt()], vec![1.0, 2f64.sqrt()]] {
            let rates: Vec<f64> = r2.iter().map(|r| 2.0 / r).collect();
            for (j, r) in r2.iter().enumerate() {
                let half = PI * r / 2.0;
                let prof = IterationProfile::build(&rotations(&rates, half), 8, true).unwrap();
                let audit = monotonicity_audit(&prof).unwrap();
                assert!(audit.hypotheses_hold, "orbit {j} of {r2:?}");
                assert!(audit.pass, "orbit {j} of {r2:?}: {audit:?}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn iteration_identities_sp2(vals in path_values(1, 3, 3.0)) {
            let p = generator_path(1, 3, &vals);
            prop_assert!(bott_check(&p).unwrap().pass);
            prop_assert!(decomposition_check(&p).unwrap().pass);
        }

        #[test]
        fn iteration_identities_sp4(vals in path_values(2, 3, 2.0)) {
            let p = generator_path(2, 3, &vals);
            prop_assert!(bott_check(&p).unwrap().pass);
            prop_assert!(decomposition_check(&p).unwrap().pass);
            let m = brake_square_endpoint(p.endpoint());
            let g4 = brake_iterate(&p, 4).unwrap();
            let m2 = &m * &m;
            prop_assert!(max_abs(&(g4.endpoint() - &m2)) <= 1e-10 * max_abs(&m2).max(1.0));
        }
    }
}
