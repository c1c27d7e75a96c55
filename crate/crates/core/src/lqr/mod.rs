//! Full-order LQR machinery: Hamiltonian, ARE, Gramians, system norms and
//! stability certificates.

pub mod are;
pub mod certificates;
pub mod gramian;
pub mod hamiltonian;
pub mod norms;

pub use are::{solve_are_full, solve_are_with_basis, AreSolution};
pub use certificates::{beta_bound, BetaCertificate, CertificateKind, StabilityCertificate};
pub use gramian::{closed_loop_gramian, gramian_from_basis, GramianFactor, GramianSource};
pub use hamiltonian::{hamiltonian, stable_eigenbasis_dense, StableEigenbasis};
pub use norms::{h2_norm, hinf_norm, model_matching_error, MatchingError};
