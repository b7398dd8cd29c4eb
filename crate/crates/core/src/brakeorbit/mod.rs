//! Brake orbits `x(−t) = Nx(t)` of Hamiltonian systems on convex reversible
//! hypersurfaces: Hamiltonians, flows with monodromy, Newton shooting,
//! classification, index reports and the multistart audit.

mod flow;
mod hamiltonian;
mod report;
mod shooting;

pub use flow::{flow_from, flow_midpoint, flow_states, flow_with_monodromy, fundamental_path, FlowConfig, MidpointRun, Trajectory};
pub use hamiltonian::{
    ellipsoid_hamiltonian, gauge_hamiltonian, homogeneity_defect, looks_irrational, mechanical_lift, ConvexBody,
    EllipsoidSpec, Evaluators, GridPotential, HamiltonianFlags, HamiltonianSpec, MatrixFn, Potential, PotentialFlags,
    SampleCheck, ScalarFn, Vector, VectorFn,
};
pub use report::{
    merge_shots, multiplicity_audit, multiplicity_bound, multistart_guesses, orbit_index_report, AuditOutcome,
    AuditStatus, MultiplicityReport, OrbitIndexReport, OrbitSummary, SearchBudget, Start,
};
pub use shooting::{
    classify_orbit, ellipsoid_analytic_orbits, shoot_brake_orbit, BrakeOrbit, OrbitFlags, OrbitTrace, ShootConfig,
    ShootReport, ShootStatus,
};

#[cfg(test)]
mod tests;
