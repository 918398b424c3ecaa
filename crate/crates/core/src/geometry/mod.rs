//! Crack surfaces, shifted lattices and the bad-cube construction.

pub mod crack;
pub mod lattice;
pub mod predicates;
pub mod projection;

pub use crack::{CrackSurface, Simplex};
pub use lattice::{
    bad_cube_boundary_measure, classify_cubes, classify_with, discrete_jump_energy, in_half_neighborhood, jump_energy_with, segment_hits_crack,
    CubeClassification, Direction, DirectionKind, DirectionSet, HalfNeighborhoods, ShiftedGrid,
};
pub use projection::{bad_boundary_face_pieces, bad_cube_pieces, crack_pieces, projection_difference, projection_measure, ConvexPiece, ProjectionEstimate};
