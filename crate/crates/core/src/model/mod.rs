//! Physical model: system, photon wave packet, collision unitaries and the
//! non-Hermitian no-count generator.

pub mod collision;
pub mod generator;
pub mod profile;
pub mod system;

pub use collision::{
    build_collision, build_collision_exact, build_collision_first_order, collision_hamiltonian,
    BlockMode, CollisionBlocks,
};
pub use generator::{make_generator, propagate, NonHermitianGenerator};
pub use profile::{
    discretize_profile, discretize_profile_with, DiscretizeOptions, DiscretizedProfile, PhotonProfile,
    Sampling,
};
pub use system::{basis_vector, InitialState, SystemModel};
