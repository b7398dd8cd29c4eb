//! Index reports for orbits and the multistart multiplicity audit.

use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::flow::{flow_states, fundamental_path, FlowConfig};
use super::hamiltonian::{HamiltonianSpec, Vector};
use super::shooting::{shoot_brake_orbit, BrakeOrbit, ShootConfig, ShootReport, ShootStatus};
use crate::iteration::{decomposition_check, theorem31_gap, DecompositionReport, IterationProfile, Theorem31Report};
use crate::maslov::{i_lagrangian, i_lagrangian_convex_oracle, IndexPair, Lagrangian};
use crate::quasirandom::halton;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitIndexReport {
    pub half_period: f64,
    pub l0: IndexPair,
    pub l1: IndexPair,
    /// Root-counting values, present when the diagonal blocks of `H″` are
    /// positive definite along the orbit.
    pub oracle_l0: Option<i64>,
    pub oracle_l1: Option<i64>,
    /// `ν_{L0} = 1`: only the orbit's own direction is degenerate.
    pub nondegenerate: bool,
    /// `(i, ν)` of the periodic square `γ²`.
    pub square: IndexPair,
    pub decomposition: DecompositionReport,
    pub theorem31: Theorem31Report,
    pub profile: Option<IterationProfile>,
}

fn oracle(path: &crate::SymplecticPath, j: Lagrangian) -> Result<Option<i64>> {
    match i_lagrangian_convex_oracle(path, j) {
        Ok(v) => Ok(Some(v)),
        Err(Error::Hypothesis(_)) | Err(Error::Unsupported(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Index data of the half-period path `γ_x` on `[0, τ/2]`. `k_max = 0`
/// skips the iteration profile.
pub fn orbit_index_report(o: &BrakeOrbit, h: &HamiltonianSpec, k_max: usize, cfg: &FlowConfig) -> Result<OrbitIndexReport> {
    let path = fundamental_path(h, &o.trajectory, cfg)?;
    let l0 = i_lagrangian(&path, Lagrangian::L0)?;
    let l1 = i_lagrangian(&path, Lagrangian::L1)?;
    let decomposition = decomposition_check(&path)?;
    let theorem31 = theorem31_gap(&path, None)?;
    let profile = if k_max > 0 { Some(IterationProfile::build(&path, k_max, true)?) } else { None };
    Ok(OrbitIndexReport {
        half_period: o.half_period,
        l0,
        l1,
        oracle_l0: oracle(&path, Lagrangian::L0)?,
        oracle_l1: oracle(&path, Lagrangian::L1)?,
        nondegenerate: l0.nullity == 1,
        square: decomposition.double,
        decomposition,
        theorem31,
        profile,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub starts: usize,
    /// Half-period guesses are taken from `‖p(t)‖` minima on `(0, t_max]`.
    pub t_max: f64,
    pub guesses_per_start: usize,
    pub scan_samples: usize,
}

impl SearchBudget {
    pub fn new(starts: usize, t_max: f64) -> Self {
        Self { starts, t_max, guesses_per_start: 3, scan_samples: 800 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Start {
    pub id: usize,
    pub q: Vec<f64>,
    pub t: f64,
}

/// Quasi-random starts on `Σ ∩ {p = 0}` with half-period guesses.
pub fn multistart_guesses(h: &HamiltonianSpec, budget: &SearchBudget, cfg: &FlowConfig) -> Result<Vec<Start>> {
    if budget.starts == 0 || !(budget.t_max > 0.0) || budget.scan_samples < 8 {
        return Err(Error::Domain("search budget needs starts, a positive t_max and at least 8 scan samples".into()));
    }
    let n = h.n();
    let mut out = Vec::new();
    for i in 0..budget.starts {
        let d = Vector::from_vec(halton(i as u64, n).into_iter().map(|u| 2.0 * u - 1.0).collect());
        if d.norm() < 1e-3 {
            continue;
        }
        let s = h.radial_level(&h.lift_q(&d))?;
        let q = &d * s;
        let tr = flow_states(h, &h.lift_q(&q), budget.t_max, budget.scan_samples, cfg)?;
        let pn: Vec<f64> = tr.states.iter().map(|x| x.rows(0, n).norm()).collect();
        let mut minima: Vec<(f64, f64)> = (2..pn.len() - 1)
            .filter(|&j| pn[j] <= pn[j - 1] && pn[j] <= pn[j + 1])
            .map(|j| (pn[j], tr.times[j]))
            .collect();
        minima.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (_, t) in minima.into_iter().take(budget.guesses_per_start) {
            out.push(Start { id: out.len(), q: q.iter().copied().collect(), t });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSummary {
    pub half_period: f64,
    pub tau: f64,
    pub x0: Vec<f64>,
    pub residual: f64,
    pub symmetric: bool,
    pub dual: bool,
    pub symmetry_defect: f64,
    /// The shooting Jacobian was singular at the solution.
    pub degenerate: bool,
    pub nu_l0: Option<usize>,
    /// Number of converged shots that landed on this orbit.
    pub hits: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuditStatus {
    BoundReached,
    /// Fewer distinct orbits than the lower bound were found; this says
    /// nothing against the bound.
    SearchIncomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityReport {
    pub n: usize,
    /// `[(n+1)/2] + 1`.
    pub bound: usize,
    pub shots: usize,
    pub converged: usize,
    pub failures: usize,
    pub distinct: usize,
    pub symmetric: usize,
    pub degenerate: usize,
    pub orbits: Vec<OrbitSummary>,
    pub status: AuditStatus,
}

/// Audit report together with one representative orbit per class.
#[derive(Debug, Clone)]
pub struct AuditOutcome {
    pub report: MultiplicityReport,
    pub orbits: Vec<BrakeOrbit>,
}

pub fn multiplicity_bound(n: usize) -> usize {
    (n + 1) / 2 + 1
}

fn canonical(a: &(BrakeOrbit, bool), b: &(BrakeOrbit, bool)) -> Ordering {
    a.0.half_period
        .total_cmp(&b.0.half_period)
        .then_with(|| a.0.x0.iter().zip(b.0.x0.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal))
}

/// Deduplicate converged shots by geometric equivalence. The result does
/// not depend on the order of `shots`.
pub fn merge_shots(n: usize, shots: Vec<Result<ShootReport>>) -> AuditOutcome {
    let total = shots.len();
    let mut failures = 0;
    let mut found: Vec<(BrakeOrbit, bool)> = Vec::new();
    for s in shots {
        match s {
            Ok(r) => match (r.status, r.orbit) {
                (ShootStatus::NoConvergence, _) | (_, None) => failures += 1,
                (st, Some(o)) => found.push((o, st == ShootStatus::Degenerate)),
            },
            Err(_) => failures += 1,
        }
    }
    let converged = found.len();
    found.sort_by(canonical);
    let mut classes: Vec<(BrakeOrbit, bool, usize)> = Vec::new();
    for (o, degenerate) in found {
        match classes.iter_mut().find(|c| c.0.equivalent(&o)) {
            Some(c) => {
                c.1 |= degenerate;
                c.2 += 1;
            }
            None => classes.push((o, degenerate, 1)),
        }
    }
    let orbits: Vec<OrbitSummary> = classes
        .iter()
        .map(|(o, deg, hits)| OrbitSummary {
            half_period: o.half_period,
            tau: o.tau,
            x0: o.x0.iter().copied().collect(),
            residual: o.residual,
            symmetric: o.symmetric,
            dual: o.dual,
            symmetry_defect: o.symmetry_defect,
            degenerate: *deg,
            nu_l0: o.nu_l0(),
            hits: *hits,
        })
        .collect();
    let bound = multiplicity_bound(n);
    let distinct = orbits.len();
    let report = MultiplicityReport {
        n,
        bound,
        shots: total,
        converged,
        failures,
        distinct,
        symmetric: orbits.iter().filter(|o| o.symmetric).count(),
        degenerate: orbits.iter().filter(|o| o.degenerate).count(),
        orbits,
        status: if distinct >= bound { AuditStatus::BoundReached } else { AuditStatus::SearchIncomplete },
    };
    AuditOutcome { report, orbits: classes.into_iter().map(|c| c.0).collect() }
}

/// Multistart shooting on `Σ ∩ {p = 0}`, deduplicated by trace.
pub fn multiplicity_audit(h: &HamiltonianSpec, budget: &SearchBudget, cfg: &ShootConfig) -> Result<AuditOutcome> {
    let starts = multistart_guesses(h, budget, &cfg.flow)?;
    let shots = starts
        .iter()
        .map(|s| shoot_brake_orbit(h, &Vector::from_vec(s.q.clone()), s.t, cfg))
        .collect();
    Ok(merge_shots(h.n(), shots))
}
