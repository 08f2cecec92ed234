//! Maximum output Schatten p-norms of quantum channels.
//!
//! The crate builds random unitary channels (Haar-sampled or the discrete Weyl
//! family), the Werner–Holevo transpose-depolarizing channel and arbitrary
//! Kraus channels, then estimates
//!
//! ```text
//! nu_p(N) = max_psi || N(|psi><psi|) ||_p
//! ```
//!
//! by multistart ascent on the complex unit sphere. On top of that sit the
//! bounds used to show that `nu_p` fails to be multiplicative for `p > 2`:
//! the maximally entangled lower bound `nu_p(N ⊗ N̄) >= 1/n`, the upper bound
//! `((1 + eps)/d)^(1 - 1/p)` for eps-randomizing channels, and the
//! `(d, eps)` crossover at which the two certify a violation.
//!
//! Modules:
//! - [`linalg`]: dense complex matrices, Hermitian spectra, Schatten norms,
//!   Haar sampling and entropies.
//! - [`rng`]: `(master_seed, stream_id)` addressed random streams.
//! - [`channels`]: channel types, algebra and named constructors.
//! - [`optimize`]: ascent over pure states, grid oracles and eps certification.
//! - [`analysis`]: the quantitative bounds and experiment drivers.

#![forbid(unsafe_code)]

pub mod analysis;
pub mod channels;
pub mod error;
pub mod linalg;
pub mod optimize;
pub(crate) mod pure_map;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, ComplexVector, DensityOperator, PureState};
pub use rng::SeededRng;

/// Largest single-system dimension accepted by the experiment drivers.
pub const MAX_DIM: usize = 64;

/// Largest output dimension of a tensor-product channel that is ever materialized.
pub const MAX_TENSOR_DIM: usize = 4096;
