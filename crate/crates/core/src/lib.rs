//! Numerical laboratory for weighted Dirac eigenvalue problems `D psi = lambda A psi`
//! on flat spin model geometries (spin circle, chiral interval, flat 2-torus).
//!
//! The crate discretizes the operator pencil `(D, M_A)` with spectral accuracy on
//! periodic geometries and verifies, at desk scale, the dual min-max characterization
//! of the weighted eigenvalues, eigenvalue comparison under the Loewner order,
//! weak-continuity of eigenvalues / eigenspaces / spectral projectors along weight
//! families, a priori norm diagnostics, and the spectral wave kernel.
//!
//! Inner-product convention used everywhere: sesquilinear forms are
//! **conjugate-linear in the first slot**, `<f, g> = sum conj(f) g`.

pub mod analysis;
pub mod assembly;
pub mod domain;
pub mod error;
pub mod io;
pub mod linalg;
pub mod spectral;
pub mod variational;
pub mod wavekernel;
pub mod weights;

pub use error::{Error, Result};

pub use analysis::{ContinuityReport, NormDiagnostics};
pub use assembly::{assemble_dirac, assemble_mass, BasisMap, OperatorMatrix};
pub use domain::{build_grid, Geometry, Grid, SpinTwist, SpinorField};
pub use spectral::{solve_weighted, SpectralProjector, WeightedSpectrum};
pub use variational::{compare_spectra, MinmaxReport};
pub use wavekernel::Propagator;
pub use weights::{make_family, FamilyKind, WeightField, WeightFamily};
