//! Finite-dimensional quantum instruments.
//!
//! States, sharp observables and POVMs; superoperators with natural, Choi
//! and Kraus views; instruments with their POVM, total operation and
//! compatibility structure; indirect measurement models and unitary
//! dilation; and the joint statistics of successive measurements.
//!
//! Conventions fixed crate-wide:
//!
//! - operators are vectorized by stacking columns;
//! - the Choi matrix of `L` is `Σ_ij L(|i⟩⟨j|) ⊗ |i⟩⟨j|`;
//! - composite spaces are ordered system first, ancilla second.

pub mod dilation;
pub mod error;
pub mod instrument;
pub mod matrix;
pub mod observable;
pub mod random;
pub mod schemes;
pub mod state;
pub mod superop;
pub mod wire;

pub use dilation::{dilate, verify_realization, IndirectModel, RealizationReport};
pub use error::{Error, Result};
pub use instrument::{
    is_e_compatible_operation, operation_from_state_family, state_family_of_operation, DecompositionReport,
    IdentityCheck, Instrument, StateFamily,
};
pub use matrix::{is_psd, partial_trace_ancilla, tensor_product, unitary_completion, ComplexMatrix};
pub use observable::{born_distribution, EffectFamily, OutcomeDistribution, OutcomeSpace, Povm, SharpObservable};
pub use schemes::{
    check_mlpd, collective_of, joint_distribution, povm_from_affine_scheme, sample_trajectory, Apparatus,
    CollectiveScheme, JointDistribution, MlpdVerdict, Trajectories,
};
pub use state::DensityOperator;
pub use superop::{KrausSet, PositivityVerdict, Superoperator};

pub use num_complex::Complex64;
