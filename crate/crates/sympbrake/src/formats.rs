//! JSON documents: symplectic paths, hypersurfaces and orbit records.

use serde::{Deserialize, Serialize};
use sympbrake_core::brakeorbit::{
    ellipsoid_hamiltonian, mechanical_lift, BrakeOrbit, EllipsoidSpec, GridPotential, HamiltonianSpec, OrbitIndexReport,
    OrbitSummary,
};
use sympbrake_core::path::GeneratorField;
use sympbrake_core::serde_matrix::MatrixDoc;
use sympbrake_core::sympcore::is_symplectic;
use sympbrake_core::{Mat, SymplecticPath};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    /// Nodes carry the symmetric generator `B(t)` of `γ' = J B γ`.
    Generator,
    /// Nodes carry `γ(t)` itself.
    Samples,
}

/// How generator nodes are joined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interp {
    #[default]
    Linear,
    /// `B = B_i` on `[t_i, t_{i+1})`, the last piece running to `τ`.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub t: f64,
    pub matrix: MatrixDoc,
}

/// `{"k", "tau", "kind": "generator" | "samples", "nodes": [{"t", "matrix"}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDoc {
    pub k: usize,
    pub tau: f64,
    pub kind: PathKind,
    #[serde(default, skip_serializing_if = "is_default")]
    pub interp: Interp,
    pub nodes: Vec<NodeDoc>,
}

fn is_default(i: &Interp) -> bool {
    *i == Interp::Linear
}

impl PathDoc {
    /// A piecewise-constant generator path with equal pieces on `[0, τ]`.
    pub fn piecewise_constant(k: usize, tau: f64, mats: &[Mat]) -> Self {
        let h = tau / mats.len() as f64;
        let nodes = mats.iter().enumerate().map(|(i, m)| NodeDoc { t: i as f64 * h, matrix: MatrixDoc::from(m) }).collect();
        Self { k, tau, kind: PathKind::Generator, interp: Interp::Constant, nodes }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("path document: {e}")))
    }

    pub fn build(&self, symplectic_tol: f64) -> Result<SymplecticPath, CliError> {
        if self.k == 0 {
            return Err(CliError::Input("path document: k must be positive".into()));
        }
        if self.nodes.is_empty() {
            return Err(CliError::Input("path document has no nodes".into()));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(CliError::Input(format!("path document: tau must be positive, got {}", self.tau)));
        }
        let dim = 2 * self.k;
        let mut times = Vec::with_capacity(self.nodes.len());
        let mut mats = Vec::with_capacity(self.nodes.len());
        for (i, node) in self.nodes.iter().enumerate() {
            let m = Mat::try_from(node.matrix.clone()).map_err(|e| CliError::Input(format!("node {i}: {e}")))?;
            if m.shape() != (dim, dim) {
                return Err(CliError::Input(format!("node {i}: expected a {dim}x{dim} matrix, got {:?}", m.shape())));
            }
            if !(node.t >= 0.0 && node.t <= self.tau) {
                return Err(CliError::Input(format!("node {i}: t = {} lies outside [0, tau]", node.t)));
            }
            times.push(node.t);
            mats.push(m);
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Input("node times must be strictly increasing".into()));
        }
        let input = |e: sympbrake_core::Error| CliError::Input(format!("path document: {e}"));
        match self.kind {
            PathKind::Generator => {
                let field = if mats.len() == 1 {
                    GeneratorField::Constant(mats.pop().unwrap())
                } else {
                    match self.interp {
                        Interp::Linear => {
                            if times[0] != 0.0 || *times.last().unwrap() != self.tau {
                                return Err(CliError::Input("linear generator nodes must span [0, tau]".into()));
                            }
                            GeneratorField::PiecewiseLinear { times, mats }
                        }
                        Interp::Constant => {
                            if times[0] != 0.0 {
                                return Err(CliError::Input("the first generator piece must start at t = 0".into()));
                            }
                            let mut breaks = times;
                            breaks.push(self.tau);
                            GeneratorField::PiecewiseConstant { breaks, mats }
                        }
                    }
                };
                SymplecticPath::from_generator(self.k, self.tau, field, 16).map_err(input)
            }
            PathKind::Samples => {
                if times[0] != 0.0 || *times.last().unwrap() != self.tau {
                    return Err(CliError::Input("sample nodes must span [0, tau]".into()));
                }
                for (i, m) in mats.iter().enumerate() {
                    let (ok, defect) = is_symplectic(m, symplectic_tol).map_err(input)?;
                    if !ok {
                        return Err(CliError::Input(format!("node {i} is not symplectic (defect {defect:e})")));
                    }
                }
                SymplecticPath::from_samples(times, mats).map_err(input)
            }
        }
    }
}

/// `{"type": "ellipsoid", "radii"}` or `{"type": "potential", "expr-table"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum HypersurfaceDoc {
    Ellipsoid {
        radii: Vec<f64>,
    },
    /// `H = |p|²/2 + V(q)` at level `energy`, with `V` a sampled grid.
    Potential {
        #[serde(rename = "expr-table")]
        table: GridPotential,
        #[serde(default = "one")]
        energy: f64,
        /// Largest half period searched; defaults to `2π`.
        #[serde(default)]
        t_max: Option<f64>,
    },
}

fn one() -> f64 {
    1.0
}

/// A hypersurface ready for the orbit solvers.
pub enum Surface {
    Ellipsoid(EllipsoidSpec, HamiltonianSpec),
    Potential { h: HamiltonianSpec, t_max: f64 },
}

impl Surface {
    pub fn hamiltonian(&self) -> &HamiltonianSpec {
        match self {
            Self::Ellipsoid(_, h) | Self::Potential { h, .. } => h,
        }
    }
}

impl HypersurfaceDoc {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("hypersurface document: {e}")))
    }

    pub fn build(&self) -> Result<Surface, CliError> {
        let input = |e: sympbrake_core::Error| CliError::Input(format!("hypersurface: {e}"));
        match self {
            Self::Ellipsoid { radii } => {
                if radii.is_empty() {
                    return Err(CliError::Input("ellipsoid needs at least one radius".into()));
                }
                if let Some(r) = radii.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
                    return Err(CliError::Input(format!("ellipsoid radii must be positive, got {r}")));
                }
                let e = EllipsoidSpec::new(radii.clone()).map_err(input)?;
                let h = ellipsoid_hamiltonian(&e).map_err(input)?;
                Ok(Surface::Ellipsoid(e, h))
            }
            Self::Potential { table, energy, t_max } => {
                let grid = GridPotential::new(table.lower.clone(), table.spacing.clone(), table.counts.clone(), table.values.clone())
                    .map_err(input)?;
                let (h, flags) = mechanical_lift(&grid.into_potential(), *energy).map_err(input)?;
                if !flags.even {
                    return Err(CliError::Input("potential is not even; brake symmetry needs V(-q) = V(q)".into()));
                }
                let t_max = t_max.unwrap_or(2.0 * std::f64::consts::PI);
                if !(t_max > 0.0) {
                    return Err(CliError::Input("t_max must be positive".into()));
                }
                Ok(Surface::Potential { h, t_max })
            }
        }
    }
}

/// `{"tau", "x0", "residual", "symmetric", "dual", "indices"}` plus diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub tau: f64,
    pub x0: Vec<f64>,
    pub residual: f64,
    pub symmetric: bool,
    pub dual: bool,
    pub indices: Option<OrbitIndexReport>,
    pub half_period: f64,
    pub nu_l0: Option<usize>,
    pub degenerate: bool,
    pub hits: usize,
    pub energy_defect: f64,
    pub brake_defect: f64,
    pub symmetry_defect: f64,
}

impl OrbitRecord {
    pub fn new(o: &BrakeOrbit, summary: Option<&OrbitSummary>, indices: Option<OrbitIndexReport>) -> Self {
        Self {
            tau: o.tau,
            x0: o.x0.iter().copied().collect(),
            residual: o.residual,
            symmetric: o.symmetric,
            dual: o.dual,
            indices,
            half_period: o.half_period,
            nu_l0: o.nu_l0(),
            degenerate: summary.is_some_and(|s| s.degenerate),
            hits: summary.map_or(0, |s| s.hits),
            energy_defect: o.energy_defect,
            brake_defect: o.brake_defect,
            symmetry_defect: o.symmetry_defect,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn rotation_generator_document() {
        let doc = PathDoc::parse(
            r#"{"k": 1, "tau": 3.141592653589793, "kind": "generator",
                "nodes": [{"t": 0, "matrix": {"rows": 2, "cols": 2, "data": [1, 0, 0, 1]}}]}"#,
        )
        .unwrap();
        let path = doc.build(1e-9).unwrap();
        assert!((path.endpoint() + Mat::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn path_validation() {
        let m = json!({"rows": 2, "cols": 2, "data": [1, 0, 0, 1]});
        let bad = [
            json!({"k": 1, "tau": 1.0, "kind": "generator", "nodes": []}),
            json!({"k": 1, "tau": 0.0, "kind": "generator", "nodes": [{"t": 0, "matrix": m}]}),
            json!({"k": 2, "tau": 1.0, "kind": "generator", "nodes": [{"t": 0, "matrix": m}]}),
            json!({"k": 1, "tau": 1.0, "kind": "samples", "nodes": [{"t": 0, "matrix": m}, {"t": 0.5, "matrix": m}]}),
            json!({"k": 1, "tau": 1.0, "kind": "samples", "nodes": [{"t": 0, "matrix": m},
                {"t": 1.0, "matrix": {"rows": 2, "cols": 2, "data": [1, 1, 1, 1]}}]}),
            json!({"k": 1, "tau": 1.0, "kind": "generator", "nodes": [{"t": 0, "matrix": {"rows": 2, "cols": 2, "data": [0, 1, 0, 0]}}]}),
        ];
        for b in bad {
            let doc: PathDoc = serde_json::from_value(b.clone()).unwrap();
            assert!(matches!(doc.build(1e-9), Err(CliError::Input(_))), "{b}");
        }
        assert!(PathDoc::parse(r#"{"k": 1, "tau": 1, "kind": "other", "nodes": []}"#).is_err());
    }

    #[test]
    fn piecewise_constant_round_trip() {
        let mats = [Mat::identity(2, 2), Mat::identity(2, 2) * 2.0];
        let doc = PathDoc::piecewise_constant(1, 1.0, &mats);
        let text = serde_json::to_string(&doc).unwrap();
        let back = PathDoc::parse(&text).unwrap();
        assert_eq!(back, doc);
        let rot = sympbrake_core::linalg::rotation(1.5);
        assert!((back.build(1e-9).unwrap().endpoint() - rot).norm() < 1e-10);
    }

    #[test]
    fn hypersurfaces() {
        assert!(matches!(HypersurfaceDoc::parse(r#"{"type": "ellipsoid", "radii": [1, -1]}"#).unwrap().build(), Err(CliError::Input(_))));
        let s = HypersurfaceDoc::parse(r#"{"type": "ellipsoid", "radii": [1, 2]}"#).unwrap().build().unwrap();
        assert_eq!(s.hamiltonian().n(), 2);
        let grid = GridPotential::sample(vec![-2.0, -2.0], vec![0.25, 0.25], vec![17, 17], |q| q[0] * q[0] + 2.0 * q[1] * q[1]).unwrap();
        let doc = json!({"type": "potential", "expr-table": grid, "energy": 0.5});
        let s = serde_json::from_value::<HypersurfaceDoc>(doc).unwrap().build().unwrap();
        assert!(matches!(s, Surface::Potential { .. }));
    }
}
