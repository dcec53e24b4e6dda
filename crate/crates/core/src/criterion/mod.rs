//! Existence criterion for fractional-linear integrals.

pub mod branch;
pub mod decide;
pub mod derive;
pub mod jetpoly;
pub mod phi;
pub mod specialize;
pub mod univariate;

pub use branch::{propagate_branch, reconstruct_cofactor, Branch, BranchCofactor, BranchOptions};
pub use decide::{
    decide, mobius_orbit_check, mobius_transform, psi_factor_check, revolution_fastpath, BranchReport, CofactorPoint, CriterionReport, DecideConfig, Decision,
    Moduli, MobiusReport, BranchStatus, PsiPoint, PsiReport, RevolutionSample, RevolutionWitness, Verdict, VerifyConfig,
};
pub use derive::{build_eq1, build_eq2, derive_eq2, derive_system, DeriveError, DerivedSystem, Eq2};
pub use jetpoly::{Calculus, Dir, JetPolynomial, JetVar, Monomial, Sym};
pub use phi::{candidates_at, flag_degenerate, find_w_candidates, phi_evaluate, phi_grid, phi_stats, phi_stats_with, PhiBands, PhiPoint, PhiStats, PhiVerdict, WCandidate};
pub use specialize::{CompiledSystem, Specialized};

use crate::flow::FlowError;
use crate::geometry::GeometryError;
use crate::killing::KillingError;

#[derive(Debug, thiserror::Error)]
pub enum CriterionError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Killing(#[from] KillingError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Derive(#[from] DeriveError),
    #[error("Eq0 has no real root at ({x}, {y})")]
    NoRealRoot { x: f64, y: f64 },
    #[error("branch lost at ({x}, {y}): EQ1 predicts {predicted}, nearest root {nearest}")]
    BranchLost { x: f64, y: f64, predicted: f64, nearest: f64 },
    #[error("EQ1 denominator vanishes at ({x}, {y}) for w = {w}")]
    Singular { x: f64, y: f64, w: f64 },
    #[error("w is numerically zero on the patch (max |w| = {0:e}); the cofactor is closed")]
    WNearZero(f64),
    #[error("reconstructed cofactor fails a_y = w (relative error {0:e})")]
    Inconsistent(f64),
    #[error("curvature is constant; the revolution obstruction does not apply")]
    ConstantCurvature,
    #[error("matrix is singular (det = {0:e})")]
    SingularMatrix(f64),
}
