//! Unified error type for the whole crate.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, SqgError>;

/// Every failure mode the library can surface.
#[derive(Debug, thiserror::Error)]
pub enum SqgError {
    /// A spectral field fed to an inverse transform was not Hermitian-symmetric:
    /// the reconstructed field had an imaginary residue above tolerance. This
    /// almost always means an upstream multiplier violated conjugate symmetry.
    #[error(
        "non-Hermitian spectral input: imaginary residue {residue:.3e} exceeds \
         {tolerance:.3e} of the field scale"
    )]
    NonHermitianInput { residue: f64, tolerance: f64 },

    /// A Fourier-multiplier symbol evaluated to NaN or infinity at a grid
    /// wavenumber. Symbols singular at the origin must supply their own
    /// regularized value there.
    #[error("multiplier symbol not finite at wavenumber ({xi1:.6}, {xi2:.6})")]
    NonFiniteSymbol { xi1: f64, xi2: f64 },

    /// The periodic box is too small to represent the requested kernel: the
    /// mass inside the centered half-box fell below the adequacy threshold.
    #[error(
        "domain too small: mass in the centered half-box is {mass_in:.6} but \
         at least {required:.6} is needed for t = {t}"
    )]
    DomainTooSmall { mass_in: f64, required: f64, t: f64 },

    /// A slope fit was requested with fewer samples than the minimum.
    #[error("insufficient samples: got {got}, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },

    /// Moment integrals would be polluted by truncation: the outermost ring of
    /// cells carries too large a share of the field's absolute mass.
    #[error(
        "boundary cells hold a {share:.3e} share of the absolute mass \
         (limit {limit:.3e}); moments would be truncation-polluted"
    )]
    BoundaryMass { share: f64, limit: f64 },

    /// An argument fell outside the mathematical domain of an operation.
    #[error("argument out of domain: {0}")]
    DomainError(String),

    /// Time integration blew up (L2 norm grew past the safety factor), even
    /// after adaptive step halving. Usually the step size or aliasing.
    #[error("time integration unstable: L2 norm grew {factor:.3}x over its initial value")]
    Instability { factor: f64 },

    /// Doubling the quadrature nodes moved the result more than the
    /// convergence limit; the node count is too low for this integrand.
    #[error(
        "quadrature not converged: doubling nodes changed the result by \
         {rel_change:.3e} relative (limit {limit:.3e})"
    )]
    QuadratureNotConverged { rel_change: f64, limit: f64 },

    /// Cone-spectrum data could not be built with the requested parameters.
    #[error("cone construction violated: {0}")]
    ConeViolated(String),

    /// The bilinear symbol was evaluated at a singular point (eta = 0 or
    /// xi = eta), where its denominators vanish.
    #[error("bilinear symbol singular: eta = 0 or xi = eta")]
    SingularPoint,

    /// The low-frequency ball over which a restricted norm is taken contains
    /// too few lattice points to be meaningful.
    #[error(
        "frequency ball under-resolved: {points} lattice points inside radius \
         {radius:.3e} (need >= {need}); enlarge the lattice box"
    )]
    UnresolvedBall {
        points: usize,
        radius: f64,
        need: usize,
    },

    /// A dyadic block index fell outside the band representable on the grid.
    #[error("dyadic block index {k} outside representable band [{k_min}, {k_max}]")]
    OutOfBand { k: i32, k_min: i32, k_max: i32 },

    /// Configuration was syntactically or semantically invalid.
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    /// A field file failed to parse; `offset` is the byte position of the
    /// first problem.
    #[error("field file format error at byte {offset}: {message}")]
    FormatError { offset: u64, message: String },

    /// Grid construction constraints (power-of-two size, positive box length)
    /// were violated.
    #[error("grid constraint violated: {0}")]
    GridInvalid(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
