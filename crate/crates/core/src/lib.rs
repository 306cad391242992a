//! Circuit harmonic matrices of re-uploading parametrised quantum circuits.
//!
//! `f(x;θ) = Σ_{ω,k} C_{ωk} e^{iωx} e^{ik·θ}`. The matrix `C` is built either
//! exactly by Heisenberg Pauli propagation ([`propagation::exact_c`]) or by
//! truncated Monte-Carlo estimation ([`estimation::estimate_c`]); coefficient
//! statistics and training kernels follow from it ([`kernels`]).

pub mod circuit;
pub mod cmatrix;
pub mod error;
pub mod estimation;
pub mod families;
pub mod harmonic;
pub mod io;
pub mod kernels;
pub mod oracle;
pub mod pauli;
pub mod pipeline;
pub mod propagation;
pub mod simulator;
pub mod spectral;

pub use circuit::{Axis, Circuit, Clifford, Encoder, Gate, Layer, Multiplier, ObservableTerm, Rotation};
pub use cmatrix::CMatrix;
pub use error::{Error, Result};
pub use families::{build_family, Family};
pub use harmonic::{enumerate_k, HarmonicIndex, TruncatedK};
pub use pauli::{PauliString, Phase};
pub use propagation::{backpropagate, exact_c, PropNode};
