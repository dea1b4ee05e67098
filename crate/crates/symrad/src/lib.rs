//! Collective density-matrix simulation of identical multi-level atoms.
//!
//! The state of `N` identical `s`-level atoms is represented by one complex
//! number per equivalence class of product transition/projection operators
//! under atom permutations. Each class is labeled by an s×s occupation matrix
//! whose entries sum to `N`, so the state dimension grows polynomially with
//! `N` instead of exponentially. The crate assembles the sparse generator of
//! the collective equation of motion, integrates it with an adaptive
//! Runge-Kutta scheme, and reads out populations, polarizations, emission
//! intensities, angular momentum and steady-state spectra. A brute-force
//! full-Hilbert-space reference lives in [`oracle`] for equivalence testing.

pub mod algebra;
pub mod config;
pub mod dynamics;
pub mod fit;
pub mod generator;
pub mod initial;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod run;
pub mod symindex;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Basis or multiplicity arithmetic exceeds the platform's addressable size.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Malformed input (occupation matrix, probabilities, config fields, ...).
    #[error("validation failed: {0}")]
    Validation(String),

    /// Adiabatic elimination with a lossless cavity is singular.
    #[error("cavity loss rate must be positive for explicit cavity parameters")]
    SingularElimination,

    /// A static generator was requested in a frame where the drive is
    /// time-dependent.
    #[error("lab frame with nonzero drive requires time-dependent evolution")]
    LabFrameDrive,

    /// Step-size underflow in the adaptive integrator.
    #[error("integrator step size underflow at t = {t} (h = {h:.3e}); the generator is too stiff for the explicit scheme")]
    Stiffness { t: f64, h: f64 },

    /// Steady-state iteration did not reach the residual threshold.
    #[error("no steady-state convergence before t_max (final residual {residual:.3e})")]
    NonConvergence { residual: f64 },

    /// Permutation-symmetry check failed in the full-space oracle.
    #[error("symmetry violation in full-space projection: group members disagree by {spread:.3e}")]
    SymmetryViolation { spread: f64 },

    /// Operation defined only for two-level atoms.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Internal invariant violation (numerical consistency).
    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
