//! Joint integration of `ẋ = J H′(x)` and `γ̇ = J H″(x(t)) γ`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::hamiltonian::{HamiltonianSpec, Vector};
use crate::linalg::{self, eye, Mat};
use crate::path::{MatFn, SymplecticPath};
use crate::sympcore::symplectic_defect;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Relative energy drift allowed over the whole run.
    pub energy_tol: f64,
    pub symplectic_tol: f64,
    pub max_steps: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-14, energy_tol: 1e-10, symplectic_tol: 1e-8, max_steps: 2_000_000 }
    }
}

/// Samples of a trajectory at uniform times `t_i = i·T/steps`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    /// Fundamental solution `γ_x(t_i)`; empty for state-only runs.
    pub monodromy: Vec<Mat>,
    pub energy_drift: f64,
    pub symplectic_drift: f64,
    pub accepted: usize,
    pub rejected: usize,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        *self.times.last().expect("trajectory has samples")
    }

    pub fn end_state(&self) -> &Vector {
        self.states.last().expect("trajectory has samples")
    }

    pub fn end_monodromy(&self) -> Option<&Mat> {
        self.monodromy.last()
    }
}

// Dormand–Prince 5(4); the system is autonomous so the nodes c_i are not needed
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct System<'a> {
    h: &'a HamiltonianSpec,
    with_monodromy: bool,
}

impl System<'_> {
    fn dim(&self) -> usize {
        2 * self.h.n()
    }

    fn rhs(&self, z: &Vector) -> Vector {
        let d = self.dim();
        let n = d / 2;
        let x = z.rows(0, d).into_owned();
        let mut out = Vector::zeros(z.len());
        out.rows_mut(0, d).copy_from(&self.h.vector_field(&x));
        if self.with_monodromy {
            let hx = self.h.hess(&x);
            let g = Mat::from_column_slice(d, d, &z.as_slice()[d..]);
            let hg = hx * g;
            // J·(H″γ): top rows −(lower half), bottom rows +(upper half)
            let mut jg = Mat::zeros(d, d);
            jg.view_mut((0, 0), (n, d)).copy_from(&(-hg.view((n, 0), (n, d))));
            jg.view_mut((n, 0), (n, d)).copy_from(&hg.view((0, 0), (n, d)));
            out.rows_mut(d, d * d).copy_from_slice(jg.as_slice());
        }
        out
    }
}

struct Stepper<'a> {
    sys: System<'a>,
    cfg: FlowConfig,
    h0: f64,
    step: f64,
    accepted: usize,
    rejected: usize,
    energy_drift: f64,
}

impl Stepper<'_> {
    fn energy_error(&self, z: &Vector) -> f64 {
        let d = self.sys.dim();
        let e = self.sys.h.h(&z.rows(0, d).into_owned());
        (e - self.h0).abs() / self.h0.abs().max(1e-300)
    }

    /// Advance `z` from `t0` to `t1` (either direction).
    fn advance(&mut self, z: &mut Vector, t0: f64, t1: f64) -> Result<()> {
        let span = t1 - t0;
        if span == 0.0 {
            return Ok(());
        }
        let dir = span.signum();
        let d = self.sys.dim();
        let min_r = self.sys.h.min_radius();
        let mut t = t0;
        let mut k1 = self.sys.rhs(z);
        while (t1 - t) * dir > 0.0 {
            if self.accepted + self.rejected > self.cfg.max_steps {
                return Err(Error::StepSize { t, reason: format!("more than {} steps", self.cfg.max_steps) });
            }
            let mut h = self.step.min((t1 - t).abs());
            if (t1 - t).abs() - h <= 1e-14 * span.abs() {
                h = (t1 - t).abs();
            }
            let hs = h * dir;
            let mut k: [Vector; 7] = core::array::from_fn(|_| Vector::zeros(0));
            k[0] = k1.clone();
            for s in 1..7 {
                let mut y = z.clone();
                for (j, kj) in k.iter().enumerate().take(s) {
                    if A[s][j] != 0.0 {
                        y.axpy(hs * A[s][j], kj, 1.0);
                    }
                }
                k[s] = self.sys.rhs(&y);
            }
            let mut y5 = z.clone();
            for j in 0..6 {
                if A[6][j] != 0.0 {
                    y5.axpy(hs * A[6][j], &k[j], 1.0);
                }
            }
            let mut err_acc = 0.0;
            for i in 0..z.len() {
                let mut e = 0.0;
                for j in 0..7 {
                    e += E[j] * k[j][i];
                }
                let sc = self.cfg.atol + self.cfg.rtol * z[i].abs().max(y5[i].abs());
                let r = hs * e / sc;
                err_acc += r * r;
            }
            let err = linalg::sqrt(err_acc / z.len() as f64);
            if !err.is_finite() || y5.iter().any(|v| !v.is_finite()) {
                return Err(Error::StepSize { t, reason: "non-finite state".into() });
            }
            let energy_ok = self.energy_error(&y5) <= self.cfg.energy_tol;
            if err <= 1.0 && energy_ok {
                t = if (t1 - (t + hs)) * dir <= 0.0 { t1 } else { t + hs };
                *z = y5;
                k1 = k[6].clone();
                self.accepted += 1;
                self.energy_drift = self.energy_drift.max(self.energy_error(z));
                if z.rows(0, d).norm() < min_r {
                    return Err(Error::StepSize { t, reason: "state approached the origin".into() });
                }
                let fac = if err == 0.0 { 5.0 } else { (0.9 * pow_neg_fifth(err)).clamp(0.2, 5.0) };
                if h == self.step || fac < 1.0 {
                    self.step = h * fac;
                }
            } else {
                self.rejected += 1;
                let fac = if err <= 1.0 { 0.5 } else { (0.9 * pow_neg_fifth(err)).clamp(0.1, 0.5) };
                self.step = h * fac;
                if self.step < 1e-15 * span.abs().max(1.0) {
                    let reason = if energy_ok { "step size underflow" } else { "energy drift above tolerance" };
                    return Err(Error::StepSize { t, reason: reason.into() });
                }
            }
        }
        Ok(())
    }
}

fn pow_neg_fifth(x: f64) -> f64 {
    <f64 as nalgebra::ComplexField>::powf(x, -0.2)
}

fn pack(x: &Vector, g: Option<&Mat>) -> Vector {
    let d = x.len();
    match g {
        Some(g) => {
            let mut z = Vector::zeros(d + d * d);
            z.rows_mut(0, d).copy_from(x);
            z.rows_mut(d, d * d).copy_from_slice(g.as_slice());
            z
        }
        None => x.clone(),
    }
}

fn check_start(h: &HamiltonianSpec, x0: &Vector, t_end: f64, steps: usize) -> Result<()> {
    if x0.len() != 2 * h.n() {
        return Err(Error::Dimension(format!("state has length {}, expected {}", x0.len(), 2 * h.n())));
    }
    if x0.iter().any(|v| !v.is_finite()) || !t_end.is_finite() {
        return Err(Error::NonFinite("initial state or duration".into()));
    }
    if steps == 0 {
        return Err(Error::Domain("at least one output step is required".into()));
    }
    if x0.norm() < h.min_radius() {
        return Err(Error::Domain("initial state is too close to the origin".into()));
    }
    Ok(())
}

fn run(h: &HamiltonianSpec, x0: &Vector, g0: Option<&Mat>, t_end: f64, steps: usize, cfg: &FlowConfig) -> Result<Trajectory> {
    check_start(h, x0, t_end, steps)?;
    let with_monodromy = g0.is_some();
    let d = x0.len();
    let mut st = Stepper {
        sys: System { h, with_monodromy },
        cfg: *cfg,
        h0: h.h(x0),
        step: (t_end.abs() / steps as f64).min(0.01).max(1e-8),
        accepted: 0,
        rejected: 0,
        energy_drift: 0.0,
    };
    let mut z = pack(x0, g0);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut mono = Vec::new();
    let mut sdrift: f64 = 0.0;
    let mut t = 0.0;
    for i in 0..=steps {
        let ti = t_end * i as f64 / steps as f64;
        st.advance(&mut z, t, ti)?;
        t = ti;
        times.push(ti);
        states.push(z.rows(0, d).into_owned());
        if with_monodromy {
            let g = Mat::from_column_slice(d, d, &z.as_slice()[d..]);
            sdrift = sdrift.max(symplectic_defect(&g)?);
            mono.push(g);
        }
    }
    if sdrift > cfg.symplectic_tol {
        return Err(Error::StepSize { t: t_end, reason: format!("symplecticity drift {sdrift:e} above tolerance") });
    }
    Ok(Trajectory {
        times,
        states,
        monodromy: mono,
        energy_drift: st.energy_drift,
        symplectic_drift: sdrift,
        accepted: st.accepted,
        rejected: st.rejected,
    })
}

/// Integrate from `x0` over `[0, t_end]` (or `[t_end, 0]`) with `steps`
/// uniform output samples and the fundamental solution `γ(0) = I`.
pub fn flow_with_monodromy(h: &HamiltonianSpec, x0: &Vector, t_end: f64, steps: usize, cfg: &FlowConfig) -> Result<Trajectory> {
    run(h, x0, Some(&eye(x0.len())), t_end, steps, cfg)
}

/// State-only integration.
pub fn flow_states(h: &HamiltonianSpec, x0: &Vector, t_end: f64, steps: usize, cfg: &FlowConfig) -> Result<Trajectory> {
    run(h, x0, None, t_end, steps, cfg)
}

/// Continue from `(x, γ)` for time `dt`, returning the new pair.
pub fn flow_from(h: &HamiltonianSpec, x: &Vector, g: &Mat, dt: f64, cfg: &FlowConfig) -> Result<(Vector, Mat)> {
    let tr = run(h, x, Some(g), dt, 1, cfg)?;
    Ok((tr.states[1].clone(), tr.monodromy[1].clone()))
}

/// Fixed-step implicit midpoint rule (symplectic) for drift cross-checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidpointRun {
    pub final_state: Vec<f64>,
    pub energy_drift: f64,
}

pub fn flow_midpoint(h: &HamiltonianSpec, x0: &Vector, t_end: f64, steps: usize) -> Result<MidpointRun> {
    check_start(h, x0, t_end, steps)?;
    let d = x0.len();
    let n = d / 2;
    let dt = t_end / steps as f64;
    let e0 = h.h(x0);
    let mut x = x0.clone();
    let mut drift: f64 = 0.0;
    let j_times = |m: &Mat| -> Mat {
        let mut out = Mat::zeros(d, d);
        out.view_mut((0, 0), (n, d)).copy_from(&(-m.view((n, 0), (n, d))));
        out.view_mut((n, 0), (n, d)).copy_from(&m.view((0, 0), (n, d)));
        out
    };
    for s in 0..steps {
        let mut y = &x + h.vector_field(&x) * dt;
        for it in 0..50 {
            let mid = (&x + &y) * 0.5;
            let res = &y - &x - h.vector_field(&mid) * dt;
            if res.norm() <= 1e-15 * x.norm().max(1.0) {
                break;
            }
            let jac = eye(d) - j_times(&h.hess(&mid)) * (0.5 * dt);
            let step = jac
                .lu()
                .solve(&res)
                .ok_or_else(|| Error::StepSize { t: s as f64 * dt, reason: "singular midpoint Newton system".into() })?;
            y -= step;
            if it == 49 {
                return Err(Error::StepSize { t: s as f64 * dt, reason: "midpoint Newton did not converge".into() });
            }
        }
        x = y;
        drift = drift.max((h.h(&x) - e0).abs() / e0.abs().max(1e-300));
    }
    Ok(MidpointRun { final_state: x.iter().copied().collect(), energy_drift: drift })
}

/// The fundamental solution along a trajectory as a [`SymplecticPath`] on
/// `[0, T]`. Quadratic Hamiltonians use the exact exponential; otherwise
/// evaluation between samples re-integrates from the nearest earlier sample.
pub fn fundamental_path(h: &HamiltonianSpec, tr: &Trajectory, cfg: &FlowConfig) -> Result<SymplecticPath> {
    let t_end = tr.duration();
    if !(t_end > 0.0) {
        return Err(Error::Domain("fundamental path needs a forward trajectory".into()));
    }
    if let Some(b) = h.quadratic() {
        return SymplecticPath::constant_generator(b.clone(), t_end);
    }
    if tr.monodromy.len() != tr.states.len() {
        return Err(Error::Domain("trajectory was integrated without the fundamental solution".into()));
    }
    let d = 2 * h.n();
    let steps = tr.times.len() - 1;
    let times = Arc::new(tr.times.clone());
    let states = Arc::new(tr.states.clone());
    let mono = Arc::new(tr.monodromy.clone());
    let locate = {
        let times = times.clone();
        move |t: f64| -> usize {
            let i = linalg::floor(t / t_end * steps as f64).clamp(0.0, steps as f64) as usize;
            if i > 0 && times[i] > t {
                i - 1
            } else {
                i
            }
        }
    };
    let locate = Arc::new(locate);
    let (h1, s1, m1, l1, t1, c1) = (h.clone(), states.clone(), mono, locate.clone(), times.clone(), *cfg);
    let f: MatFn = Arc::new(move |t: f64| {
        let i = l1(t);
        let dt = t - t1[i];
        if dt.abs() <= 1e-15 * t_end {
            return m1[i].clone();
        }
        match flow_from(&h1, &s1[i], &m1[i], dt, &c1) {
            Ok((_, g)) => g,
            Err(_) => Mat::from_element(d, d, f64::NAN),
        }
    });
    let (h2, s2, l2, t2, c2) = (h.clone(), states, locate, times, *cfg);
    let g: MatFn = Arc::new(move |t: f64| {
        let i = l2(t);
        let dt = t - t2[i];
        let x = if dt.abs() <= 1e-15 * t_end {
            s2[i].clone()
        } else {
            match run(&h2, &s2[i], None, dt, 1, &c2) {
                Ok(tr) => tr.states[1].clone(),
                Err(_) => return Mat::from_element(d, d, f64::NAN),
            }
        };
        h2.hess(&x)
    });
    SymplecticPath::from_fn(h.n(), t_end, steps, f, Some(g))
}
