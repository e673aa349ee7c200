//! Exact spin-2 rotation algebra.

mod expm;
mod generators;
mod state;
mod wigner;

pub use expm::{hermiticity_error, matrix_exp_oracle};
pub use generators::{commutator, make_generators, Generators};
pub use state::{
    apply, populations, Matrix5c, PopulationVector, Rotation, SpinState, Sublevel, Vector5c, DIM,
};
pub use wigner::{small_d_entry, wigner_big_d, wigner_small_d};

/// Total spin of the manifold.
pub const SPIN: i32 = 2;
