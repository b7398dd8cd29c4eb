//! Run configuration: seed, sweep sizes and the tolerance set.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sympbrake_core::brakeorbit::{FlowConfig, ShootConfig};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSizes {
    /// Random generator paths in `Sp(2)`.
    pub sp2: usize,
    /// Random generator paths in `Sp(4)`; also the size of the matrix sweeps.
    pub sp4: usize,
    /// Random `⋄`-products for the splitting additivity check.
    pub products: usize,
    /// Random symmetric `C` for the unipotent round trip.
    pub unipotent: usize,
    /// Entries of the random generators are drawn from `[-scale, scale]`.
    pub scale: f64,
    /// Constant pieces per random generator path.
    pub pieces: usize,
}

impl Default for SweepSizes {
    fn default() -> Self {
        Self { sp2: 1000, sp4: 200, products: 100, unipotent: 200, scale: 2.0, pieces: 3 }
    }
}

impl SweepSizes {
    /// `--sweep N`: `N` paths in `Sp(2)` and `max(1, N/5)` of everything else.
    pub fn scaled(n: usize) -> Self {
        let m = (n / 5).max(1);
        Self { sp2: n, sp4: m, products: (n / 10).max(1), unipotent: m, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let sizes = [("sp2", self.sp2), ("sp4", self.sp4), ("products", self.products), ("unipotent", self.unipotent)];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(CliError::Input(format!("sweep size `{name}` must be at least 1")));
        }
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(CliError::Input("sweep scale must be positive".into()));
        }
        if self.pieces == 0 {
            return Err(CliError::Input("sweep pieces must be at least 1".into()));
        }
        Ok(())
    }
}

/// Every numerical knob a command reads. Overridable with `--tol KEY=VAL`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Accepted symplectic defect of matrices read from documents.
    pub input_symplectic: f64,
    /// Relative bound on `‖γ²(2τ) − Nγ(τ)⁻¹Nγ(τ)‖`.
    pub brake_square: f64,
    pub rtol: f64,
    pub atol: f64,
    pub energy: f64,
    pub monodromy_symplectic: f64,
    pub max_steps: usize,
    pub shoot: f64,
    pub max_newton: usize,
    pub samples: usize,
    pub sv_rel: f64,
    pub degenerate: f64,
    pub geom_rel: f64,
    /// Multistart starting points.
    pub starts: usize,
    /// Iteration-profile horizon for orbit reports (0 skips it).
    pub k_max: usize,
    pub r_max: i64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let s = ShootConfig::default();
        Self {
            input_symplectic: 1e-9,
            brake_square: 1e-10,
            rtol: s.flow.rtol,
            atol: s.flow.atol,
            energy: s.flow.energy_tol,
            monodromy_symplectic: s.flow.symplectic_tol,
            max_steps: s.flow.max_steps,
            shoot: s.tol,
            max_newton: s.max_iter,
            samples: s.samples,
            sv_rel: s.sv_rel_tol,
            degenerate: s.degenerate_tol,
            geom_rel: s.geom_rel_tol,
            starts: 12,
            k_max: 4,
            r_max: 200,
        }
    }
}

impl Tolerances {
    /// Apply one `KEY=VAL` override.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, val) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("tolerance override `{assignment}` is not KEY=VAL")))?;
        let (key, val) = (key.trim(), val.trim());
        let mut doc = serde_json::to_value(&*self).expect("tolerances serialize");
        let map = doc.as_object_mut().expect("tolerances are an object");
        if !map.contains_key(key) {
            let known: Vec<&str> = map.keys().map(String::as_str).collect();
            return Err(CliError::Input(format!("unknown tolerance `{key}`; known keys: {}", known.join(", "))));
        }
        let parsed = if let Ok(i) = val.parse::<i64>() {
            Value::from(i)
        } else if let Ok(f) = val.parse::<f64>() {
            Value::from(f)
        } else {
            return Err(CliError::Input(format!("tolerance `{key}` needs a number, got `{val}`")));
        };
        map.insert(key.to_string(), parsed);
        *self = serde_json::from_value(doc).map_err(|e| CliError::Input(format!("tolerance `{key}`: {e}")))?;
        self.validate()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("input_symplectic", self.input_symplectic),
            ("brake_square", self.brake_square),
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("energy", self.energy),
            ("monodromy_symplectic", self.monodromy_symplectic),
            ("shoot", self.shoot),
            ("sv_rel", self.sv_rel),
            ("degenerate", self.degenerate),
            ("geom_rel", self.geom_rel),
        ];
        for (k, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CliError::Input(format!("tolerance `{k}` must be positive and finite")));
            }
        }
        if self.samples < 8 || self.starts == 0 || self.max_newton == 0 || self.max_steps == 0 || self.r_max < 1 {
            return Err(CliError::Input("samples >= 8, starts, max_newton, max_steps and r_max >= 1 are required".into()));
        }
        Ok(())
    }

    pub fn flow(&self) -> FlowConfig {
        FlowConfig {
            rtol: self.rtol,
            atol: self.atol,
            energy_tol: self.energy,
            symplectic_tol: self.monodromy_symplectic,
            max_steps: self.max_steps,
        }
    }

    pub fn shoot(&self) -> ShootConfig {
        ShootConfig {
            tol: self.shoot,
            max_iter: self.max_newton,
            samples: self.samples,
            sv_rel_tol: self.sv_rel,
            degenerate_tol: self.degenerate,
            geom_rel_tol: self.geom_rel,
            flow: self.flow(),
            ..ShootConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Negate `sgn M_ε` before comparing it with the index difference.
    SignFlip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub input: Option<PathBuf>,
    pub seed: u64,
    pub sweep: SweepSizes,
    pub tolerances: Tolerances,
    pub output: Option<PathBuf>,
    /// `ω = e^{iθ}` values for `index-path`, as angles `θ`.
    pub omega_angles: Vec<f64>,
    /// Ellipsoid radii given directly instead of through an input document.
    pub radii: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault: Option<Fault>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            input: None,
            seed: 0,
            sweep: SweepSizes::default(),
            tolerances: Tolerances::default(),
            output: None,
            omega_angles: vec![0.0, std::f64::consts::PI],
            radii: None,
            fault: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        cfg.tolerances.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides() {
        let mut t = Tolerances::default();
        t.set("shoot=1e-9").unwrap();
        t.set("starts=20").unwrap();
        assert_eq!((t.shoot, t.starts), (1e-9, 20));
        assert!(t.set("nope=1").is_err());
        assert!(t.set("starts=2.5").is_err());
        assert!(t.set("shoot=-1").is_err());
        assert!(t.set("shoot").is_err());
    }

    #[test]
    fn sweep_sizes() {
        let s = SweepSizes::scaled(50);
        assert_eq!((s.sp2, s.sp4, s.products), (50, 10, 5));
        assert!(SweepSizes::scaled(0).validate().is_err());
        let cfg: RunConfig = serde_json::from_str(r#"{"seed": 7, "sweep": {"sp2": 3}}"#).unwrap();
        assert_eq!((cfg.seed, cfg.sweep.sp2, cfg.sweep.sp4), (7, 3, 200));
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 7}"#).is_err());
    }
}
