pub mod action;
pub mod ambient;
pub mod cli;
pub mod dihedral;
pub mod lattice;
pub mod words;
