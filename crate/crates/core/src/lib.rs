//! Geometric parametrization of quark-mixing matrices.
//!
//! Each sector's unitary `U` is a point of the flag manifold
//! `U(n)/U(1)^n`, written in local complex coordinates through a
//! unit lower-triangular frame and Gram-Schmidt. From two such points the
//! crate builds the CKM matrix `V = U^H U'`, evaluates plaquette Jarlskog
//! invariants, checks them against the commutator determinant of the mass
//! matrices, converts to and from the standard angle parametrization, and
//! fits coordinates to observed `|V_ij|` and `J`.

pub mod ckm;
pub mod error;
pub mod fit;
pub mod flag;
pub mod linalg;
pub mod mass;
pub mod pdg;
pub mod sampling;

pub use ckm::{
    build_ckm, jarlskog_from_coords, jarlskog_invariant, rephase, CkmResult, Jarlskog, Plaquette,
};
pub use error::{Error, Result};
pub use fit::{fit, residuals, FitOptions, FitProblem, FitResult};
pub use flag::{
    closed_form_unitary_n3, closed_form_unitary_n4, coords_from_unitary, gram_schmidt_unitary,
    kahler_data, normalization_factors, unipotent_frame, FlagCoordinates, KahlerData,
    NormalizationFactors,
};
pub use linalg::{Complex, ComplexMatrix};
pub use mass::{
    build_mass_matrix, closed_form_det_n2, closed_form_det_n3, commutator_det, det_parity_check,
    jarlskog_identity_check, MassMatrixPair, MassSpectrum, Parity,
};
pub use pdg::{coords_to_pdg, pdg_to_coords, pdg_unitary, PdgAngles};
