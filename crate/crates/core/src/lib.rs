//! Pseudodifferential calculus on noncommutative n-tori.
//!
//! The algebra Aθ is generated by n unitaries U_1, …, U_n subject to
//! U_l U_j = e^{2πiθ_{jl}} U_j U_l for a real antisymmetric matrix θ.
//! Elements are finitely supported Fourier series Σ u_k U^k with
//! U^k = U_1^{k_1} ⋯ U_n^{k_n}.  On top of that the crate builds
//!
//! * a closed term algebra for Aθ-valued classical symbols
//!   Σ_j ρ_{q-j}(ξ) with homogeneous components made of terms
//!   coef · ξ^α · |ξ|^s, plus lattice-sampled smoothing remainders,
//! * quantization P_ρ u = Σ u_k ρ(k) U^k and lazy operator trees for
//!   sums, products and commutators,
//! * the trace functionals: the lattice trace Σ τ[ρ(k)], the
//!   noncommutative residue ∫_{S^{n-1}} τ[ρ_{-n}], the canonical trace
//!   realized as a finite-part integral, and its holomorphic gauging
//!   as explicit Laurent data at z = 0,
//! * constructive commutator decompositions: the τ-projection split,
//!   derivative-to-difference series, an explicit trace-one smoothing
//!   operator presented as generator commutators, and the full
//!   reduction of a symbol to commutators modulo smoothing.
//!
//! Everything is double precision; all operations are pure functions
//! on immutable values, and all summation orders are fixed so results
//! are reproducible bit-for-bit.

pub mod algebra;
pub mod commutators;
pub mod config;
pub mod error;
pub mod formats;
pub mod quadrature;
pub mod quantize;
pub mod report;
pub mod suite;
pub mod symbol;
pub mod traces;
pub mod witness;

pub use algebra::{PhaseCocycle, ThetaMatrix, TorusElement};
pub use commutators::{
    decompose, derivative_to_difference, tau_split, CommutatorDecomposition, DecayCertificate,
    DecompositionParams,
};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use quantize::PsiDO;
pub use report::{LedgerEntry, MeromorphicValue, Report};
pub use symbol::{ClassicalSymbol, Cutoff, HomogeneousComponent, HomogeneousTerm, LatticeRemainder};
pub use traces::{canonical_trace, gauged_trace, lattice_trace, nc_residue, SphereMoments, TraceValue};
pub use witness::{build_smoothing_witness, SmoothingWitness, WitnessParams};

/// Complex scalar used throughout.
pub type Complex = num_complex::Complex64;
