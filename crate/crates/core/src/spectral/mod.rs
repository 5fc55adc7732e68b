//! Matrix-free spiked operators, their top eigenpairs, and the analytic
//! predictions they are compared against.

mod asymptotics;
mod audit;
mod eigen;
mod moments;
mod operator;
mod oracle;

pub use asymptotics::{
    asymptotic_fixed_points, AsymptoticPrediction, FixedPointEquations, SolverDiagnostics, BISECTION_TOL, POLE_MARGIN,
};
pub use audit::{
    indicator_mass, psd_ordering_check, trajectory_spectral_audit, AuditPoint, AUDIT_MIN_GAP, AUDIT_MIN_OVERLAP,
};
pub use eigen::{overlap, top2_eigs, Prediction, SpectralReport, DEFAULT_MAX_ITERS, DEFAULT_TOL};
pub use moments::moment_coefficients;
pub use operator::{DiagonalOperator, SpikedOperator, SymmetricOperator, WeightRule, WeightedGram};
pub use oracle::{rank_one_overlap_oracle, RankOneOracle, ORACLE_MAX_DIM};
