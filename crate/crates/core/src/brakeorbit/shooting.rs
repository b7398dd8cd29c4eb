//! Newton shooting for brake orbits and geometric classification of orbits.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::flow::{flow_states, flow_with_monodromy, FlowConfig, Trajectory};
use super::hamiltonian::{EllipsoidSpec, HamiltonianSpec, Vector};
use crate::linalg::{self, Mat};
use crate::sympcore::apply_n;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootConfig {
    /// Target for `‖p(T)‖`.
    pub tol: f64,
    pub max_iter: usize,
    /// Output samples on the half period of a converged orbit.
    pub samples: usize,
    /// Singular values below this fraction of the largest are dropped from Newton steps.
    pub sv_rel_tol: f64,
    /// A converged orbit whose Jacobian has `σ_min/σ_max` below this is degenerate.
    pub degenerate_tol: f64,
    /// Largest `m` tried when testing whether `T/m` is already a half period.
    pub max_iterate: usize,
    /// Geometric tolerance as a fraction of the diameter of `Σ`.
    pub geom_rel_tol: f64,
    pub flow: FlowConfig,
}

impl Default for ShootConfig {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: 20,
            samples: 400,
            sv_rel_tol: 1e-9,
            degenerate_tol: 1e-6,
            max_iterate: 8,
            geom_rel_tol: 1e-6,
            flow: FlowConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShootStatus {
    Converged,
    /// Converged, but the shooting Jacobian is singular at the solution.
    Degenerate,
    NoConvergence,
}

/// A closed curve sampled at uniform time steps with velocities, compared
/// through cubic Hermite interpolation between samples.
#[derive(Debug, Clone)]
pub struct OrbitTrace {
    pub points: Vec<Vector>,
    pub velocities: Vec<Vector>,
    pub dt: f64,
}

fn hermite(p0: &Vector, v0: &Vector, p1: &Vector, v1: &Vector, dt: f64, s: f64) -> Vector {
    let s2 = s * s;
    let s3 = s2 * s;
    p0 * (2.0 * s3 - 3.0 * s2 + 1.0) + v0 * (dt * (s3 - 2.0 * s2 + s)) + p1 * (-2.0 * s3 + 3.0 * s2) + v1 * (dt * (s3 - s2))
}

impl OrbitTrace {
    /// Closed loop of a brake orbit from samples `x(t_i)`, `t_i ∈ [0, T]`,
    /// extended by `x(−t) = N x(t)`.
    pub fn from_brake(states: &[Vector], velocities: &[Vector], dt: f64) -> Self {
        let m = states.len() - 1;
        let mut points = Vec::with_capacity(2 * m);
        let mut vel = Vec::with_capacity(2 * m);
        for i in (1..=m).rev() {
            points.push(apply_n(&states[i]));
            vel.push(-apply_n(&velocities[i]));
        }
        for i in 0..m {
            points.push(states[i].clone());
            vel.push(velocities[i].clone());
        }
        Self { points, velocities: vel, dt }
    }

    /// Closed loop from one full period of samples (the last sample, equal to
    /// the first, is dropped if present).
    pub fn from_periodic(states: &[Vector], velocities: &[Vector], dt: f64, closes: bool) -> Self {
        let m = if closes { states.len() - 1 } else { states.len() };
        Self { points: states[..m].to_vec(), velocities: velocities[..m].to_vec(), dt }
    }

    pub fn map(&self, f: impl Fn(&Vector) -> Vector) -> Self {
        Self {
            points: self.points.iter().map(&f).collect(),
            velocities: self.velocities.iter().map(&f).collect(),
            dt: self.dt,
        }
    }

    /// Distance from `y` to the interpolated curve.
    pub fn distance_to(&self, y: &Vector) -> f64 {
        let m = self.points.len();
        let (mut j, mut best) = (0, f64::INFINITY);
        for (i, p) in self.points.iter().enumerate() {
            let d = (p - y).norm_squared();
            if d < best {
                best = d;
                j = i;
            }
        }
        let mut out = linalg::sqrt(best);
        for seg in [(j + m - 1) % m, j] {
            let (a, b) = (seg, (seg + 1) % m);
            let f = |s: f64| {
                (hermite(&self.points[a], &self.velocities[a], &self.points[b], &self.velocities[b], self.dt, s) - y).norm()
            };
            let g = (linalg::sqrt(5.0) - 1.0) / 2.0;
            let (mut lo, mut hi) = (0.0, 1.0);
            let mut x1 = hi - g * (hi - lo);
            let mut x2 = lo + g * (hi - lo);
            let (mut f1, mut f2) = (f(x1), f(x2));
            for _ in 0..60 {
                if f1 <= f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - g * (hi - lo);
                    f1 = f(x1);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + g * (hi - lo);
                    f2 = f(x2);
                }
            }
            out = out.min(f1.min(f2));
        }
        out
    }

    /// Largest distance from a sample of `self` to `other`.
    pub fn directed_distance(&self, other: &Self) -> f64 {
        self.points.iter().map(|p| other.distance_to(p)).fold(0.0, f64::max)
    }

    /// Hausdorff distance between the two traces.
    pub fn hausdorff(&self, other: &Self) -> f64 {
        self.directed_distance(other).max(other.directed_distance(self))
    }

    /// Per-coordinate largest `|x_k|`, a cheap invariant for sorting and pre-filtering.
    pub fn extent(&self) -> Vec<f64> {
        let d = self.points[0].len();
        (0..d).map(|k| self.points.iter().map(|p| p[k].abs()).fold(0.0, f64::max)).collect()
    }
}

/// A brake orbit `x(−t) = Nx(t)` with minimal period `τ`, stored on `[0, τ/2]`.
#[derive(Debug, Clone)]
pub struct BrakeOrbit {
    pub half_period: f64,
    pub tau: f64,
    pub x0: Vector,
    pub trajectory: Trajectory,
    /// `‖p(τ/2)‖` for shot orbits, the pointwise equation defect for analytic ones.
    pub residual: f64,
    pub energy_defect: f64,
    /// `max ‖x(−t) − N x(t)‖` against an independent backward run.
    pub brake_defect: f64,
    /// `max ‖x(t + τ/2) + x(t)‖` over the samples.
    pub symmetry_defect: f64,
    /// Hausdorff distance between the trace and its negation.
    pub symmetry_distance: f64,
    /// Hausdorff distance between the trace and `−N` applied to it.
    pub dual_distance: f64,
    pub symmetric: bool,
    pub dual: bool,
    pub geom_tol: f64,
    pub trace: OrbitTrace,
}

impl BrakeOrbit {
    fn assemble(
        h: &HamiltonianSpec,
        trajectory: Trajectory,
        backward: &[Vector],
        velocities: Vec<Vector>,
        residual: f64,
        geom_tol: f64,
    ) -> Self {
        let states = &trajectory.states;
        let m = states.len() - 1;
        let half_period = trajectory.duration();
        let dt = half_period / m as f64;
        let energy_defect = states.iter().map(|x| (h.h(x) - h.level()).abs()).fold(0.0, f64::max);
        let brake_defect = backward.iter().zip(states).map(|(b, x)| (b - apply_n(x)).norm()).fold(0.0, f64::max);
        let symmetry_defect = (0..=m).map(|i| (apply_n(&states[m - i]) + &states[i]).norm()).fold(0.0, f64::max);
        let trace = OrbitTrace::from_brake(states, &velocities, dt);
        let symmetry_distance = trace.hausdorff(&trace.map(|x| -x));
        let dual_distance = trace.hausdorff(&trace.map(|x| -apply_n(x)));
        Self {
            half_period,
            tau: 2.0 * half_period,
            x0: states[0].clone(),
            residual,
            energy_defect,
            brake_defect,
            symmetry_defect,
            symmetry_distance,
            dual_distance,
            symmetric: symmetry_distance <= geom_tol,
            dual: dual_distance <= geom_tol,
            geom_tol,
            trace,
            trajectory,
        }
    }

    /// Integrate the orbit through `(0, q)` over `[0, T]` and classify it.
    pub fn integrate(h: &HamiltonianSpec, q: &Vector, half_period: f64, residual: f64, cfg: &ShootConfig) -> Result<Self> {
        let x0 = h.lift_q(q);
        let tr = flow_with_monodromy(h, &x0, half_period, cfg.samples, &cfg.flow)?;
        let back = flow_states(h, &x0, -half_period, cfg.samples, &cfg.flow)?;
        let vel = tr.states.iter().map(|x| h.vector_field(x)).collect();
        Ok(Self::assemble(h, tr, &back.states, vel, residual, cfg.geom_rel_tol * h.diameter()))
    }

    /// Trace distance to another orbit.
    pub fn distance(&self, other: &Self) -> f64 {
        self.trace.hausdorff(&other.trace)
    }

    pub fn equivalent(&self, other: &Self) -> bool {
        let tol = self.geom_tol.max(other.geom_tol);
        let (ea, eb) = (self.trace.extent(), other.trace.extent());
        let coarse = ea.iter().zip(&eb).all(|(a, b)| (a - b).abs() <= 1e-3 * (a.abs() + b.abs()) + 10.0 * tol);
        coarse && self.distance(other) <= tol
    }

    /// `ν_{L0}` of the half-period monodromy.
    pub fn nu_l0(&self) -> Option<usize> {
        self.trajectory.end_monodromy().map(|g| crate::maslov::nu_lagrangian(g, crate::maslov::Lagrangian::L0))
    }
}

/// Symmetry and duality flags of an orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitFlags {
    pub symmetric: bool,
    pub dual: bool,
    pub symmetry_distance: f64,
    pub dual_distance: f64,
    pub symmetry_defect: f64,
}

pub fn classify_orbit(o: &BrakeOrbit) -> OrbitFlags {
    OrbitFlags {
        symmetric: o.symmetric,
        dual: o.dual,
        symmetry_distance: o.symmetry_distance,
        dual_distance: o.dual_distance,
        symmetry_defect: o.symmetry_defect,
    }
}

#[derive(Debug, Clone)]
pub struct ShootReport {
    pub status: ShootStatus,
    /// Newton updates taken.
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
    /// Singular values of the shooting Jacobian at the last iterate.
    pub singular_values: Vec<f64>,
    /// Near-kernel directions `(δq, δT)` of that Jacobian.
    pub degenerate_directions: Vec<Vec<f64>>,
    /// `m > 1` when Newton first converged to the `m`-fold iterate.
    pub iterate_of: usize,
    pub q: Vec<f64>,
    pub half_period: f64,
    pub orbit: Option<BrakeOrbit>,
}

struct Eval {
    residual: Vector,
    jac: Mat,
    tangent: Mat,
}

fn evaluate(h: &HamiltonianSpec, q: &Vector, t: f64, cfg: &ShootConfig) -> Result<Eval> {
    let n = h.n();
    let x0 = h.lift_q(q);
    let tr = flow_with_monodromy(h, &x0, t, 1, &cfg.flow)?;
    let xt = tr.end_state();
    let g = tr.end_monodromy().expect("monodromy requested");
    let residual = xt.rows(0, n).into_owned();
    let gq = h.grad_q(q);
    let tangent = linalg::null_space(&Mat::from_row_slice(1, n, gq.as_slice()), 1e-12);
    let b = g.view((0, n), (n, n)).into_owned();
    let pdot = h.vector_field(xt).rows(0, n).into_owned();
    let mut jac = Mat::zeros(n, n);
    if n > 1 {
        jac.view_mut((0, 0), (n, n - 1)).copy_from(&(b * &tangent));
    }
    jac.set_column(n - 1, &pdot);
    Ok(Eval { residual, jac, tangent })
}

fn svd_data(jac: &Mat, rel: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let svd = jac.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let svs: Vec<f64> = svd.singular_values.iter().copied().collect();
    let dirs = svs
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= rel * smax)
        .map(|(i, _)| vt.row(i).iter().copied().collect())
        .collect();
    (svs, dirs)
}

struct Newton {
    q: Vector,
    t: f64,
    iterations: usize,
    residual: f64,
    history: Vec<f64>,
    last: Eval,
    converged: bool,
}

fn newton(h: &HamiltonianSpec, q0: &Vector, t0: f64, cfg: &ShootConfig) -> Result<Newton> {
    let n = h.n();
    let mut q = h.project_q(q0)?;
    let mut t = t0;
    let mut ev = evaluate(h, &q, t, cfg)?;
    let mut r = ev.residual.norm();
    let mut history = alloc::vec![r];
    let mut iterations = 0;
    while r > cfg.tol && iterations < cfg.max_iter {
        let svd = ev.jac.clone().svd(true, true);
        let step = svd
            .solve(&(-&ev.residual), cfg.sv_rel_tol * svd.singular_values.max())
            .map_err(|e| Error::Domain(alloc::format!("shooting step: {e}")))?;
        let dq = &ev.tangent * step.rows(0, n - 1);
        let dt = step[n - 1];
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..8 {
            let t_new = t + alpha * dt;
            if t_new > 0.2 * t {
                if let Ok(q_new) = h.project_q(&(&q + &dq * alpha)) {
                    if let Ok(e) = evaluate(h, &q_new, t_new, cfg) {
                        let r_new = e.residual.norm();
                        if r_new < r || alpha < 0.02 {
                            accepted = Some((q_new, t_new, e, r_new));
                            break;
                        }
                    }
                }
            }
            alpha *= 0.5;
        }
        iterations += 1;
        let Some((q_new, t_new, e, r_new)) = accepted else {
            break;
        };
        q = q_new;
        t = t_new;
        ev = e;
        r = r_new;
        history.push(r);
    }
    Ok(Newton { q, t, iterations, residual: r, history, converged: r <= cfg.tol, last: ev })
}

/// Shoot for a brake orbit through `(0, q)` with half period near `t_guess`:
/// solve `p(T; (0, q)) = 0` on `Σ ∩ {p = 0}` by Newton's method with SVD steps.
pub fn shoot_brake_orbit(h: &HamiltonianSpec, q_guess: &Vector, t_guess: f64, cfg: &ShootConfig) -> Result<ShootReport> {
    let n = h.n();
    if q_guess.len() != n {
        return Err(Error::Dimension(alloc::format!("q has length {}, expected {n}", q_guess.len())));
    }
    if !(t_guess > 0.0) || !t_guess.is_finite() {
        return Err(Error::Domain(alloc::format!("half-period guess must be positive, got {t_guess}")));
    }
    if !h.flags().reversible {
        return Err(Error::Hypothesis("brake orbits need a reversible Hamiltonian".into()));
    }
    let mut run = newton(h, q_guess, t_guess, cfg)?;
    let mut iterate_of = 1;
    if run.converged {
        let x0 = h.lift_q(&run.q);
        for m in (2..=cfg.max_iterate).rev() {
            let tm = run.t / m as f64;
            let tr = flow_states(h, &x0, tm, 1, &cfg.flow)?;
            if tr.end_state().rows(0, n).norm() <= 1e-6 * h.diameter() {
                let again = newton(h, &run.q, tm, cfg)?;
                if again.converged && (again.t - tm).abs() <= 1e-6 * tm {
                    let used = run.iterations;
                    let mut hist = core::mem::take(&mut run.history);
                    hist.extend(again.history.iter().skip(1));
                    run = again;
                    run.iterations += used;
                    run.history = hist;
                    iterate_of = m;
                    break;
                }
            }
        }
    }
    let (singular_values, degenerate_directions) = svd_data(&run.last.jac, cfg.degenerate_tol);
    let status = if !run.converged {
        ShootStatus::NoConvergence
    } else if degenerate_directions.is_empty() {
        ShootStatus::Converged
    } else {
        ShootStatus::Degenerate
    };
    let orbit = if run.converged { Some(BrakeOrbit::integrate(h, &run.q, run.t, run.residual, cfg)?) } else { None };
    Ok(ShootReport {
        status,
        iterations: run.iterations,
        residual: run.residual,
        history: run.history,
        singular_values,
        degenerate_directions,
        iterate_of,
        q: run.q.iter().copied().collect(),
        half_period: run.t,
        orbit,
    })
}

/// The planar orbits `x_k(t) = (−r_k sin ω_k t) e_k ⊕ (r_k cos ω_k t) e_{n+k}`,
/// `ω_k = 2/r_k²`, in closed form with their monodromy.
pub fn ellipsoid_analytic_orbits(e: &EllipsoidSpec, h: &HamiltonianSpec, samples: usize, geom_rel_tol: f64) -> Result<Vec<BrakeOrbit>> {
    let n = e.n();
    if h.n() != n {
        return Err(Error::Dimension("Hamiltonian and ellipsoid dimensions differ".into()));
    }
    if samples < 2 {
        return Err(Error::Domain("need at least two samples".into()));
    }
    let rates = e.rates();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let (r, w) = (e.radii[k], rates[k]);
        let half = core::f64::consts::PI * r * r / 2.0;
        let state = |t: f64| {
            let mut x = Vector::zeros(2 * n);
            let (s, c) = (sin(w * t), cos(w * t));
            x[k] = -r * s;
            x[n + k] = r * c;
            x
        };
        let velocity = |t: f64| {
            let mut v = Vector::zeros(2 * n);
            v[k] = -r * w * cos(w * t);
            v[n + k] = -r * w * sin(w * t);
            v
        };
        let mono = |t: f64| {
            let mut g = Mat::zeros(2 * n, 2 * n);
            for j in 0..n {
                let (s, c) = (sin(rates[j] * t), cos(rates[j] * t));
                g[(j, j)] = c;
                g[(j, n + j)] = -s;
                g[(n + j, j)] = s;
                g[(n + j, n + j)] = c;
            }
            g
        };
        let times: Vec<f64> = (0..=samples).map(|i| half * i as f64 / samples as f64).collect();
        let states: Vec<Vector> = times.iter().map(|&t| state(t)).collect();
        let vel: Vec<Vector> = times.iter().map(|&t| velocity(t)).collect();
        let back: Vec<Vector> = times.iter().map(|&t| state(-t)).collect();
        let mut defect: f64 = 0.0;
        for (x, v) in states.iter().zip(&vel) {
            defect = defect.max((h.h(x) - 1.0).abs()).max((v - h.vector_field(x)).norm());
        }
        defect = defect.max(states[0].rows(0, n).norm()).max(states[samples].rows(0, n).norm());
        let tr = Trajectory {
            monodromy: times.iter().map(|&t| mono(t)).collect(),
            times,
            states,
            energy_drift: 0.0,
            symplectic_drift: 0.0,
            accepted: 0,
            rejected: 0,
        };
        out.push(BrakeOrbit::assemble(h, tr, &back, vel, defect, geom_rel_tol * h.diameter()));
    }
    Ok(out)
}

fn sin(x: f64) -> f64 {
    <f64 as nalgebra::ComplexField>::sin(x)
}

fn cos(x: f64) -> f64 {
    <f64 as nalgebra::ComplexField>::cos(x)
}
