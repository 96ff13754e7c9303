//! Cooperative data exchange on a fully connected broadcast network.
//!
//! A set of nodes collectively holds all K packets of a file, each node a
//! different subset. The library computes how few coded broadcasts let every
//! node recover everything, and builds the actual transmission matrices:
//!
//! * [`model`]: packet distribution instances and their normal form
//! * [`basis_search`]: greedy search for balanced basis sets at a given slack
//! * [`solver`]: minimum rate, minimum weighted cost, and multi-round variants
//! * [`gf2m`] / [`linalg`]: GF(2^m) arithmetic and exact elimination
//! * [`codegen`]: Vandermonde-seeded MDS coefficient matrices
//! * [`oracle`]: brute-force cut-constraint reference for cross-checking

pub mod basis_search;
pub mod codegen;
pub mod gf2m;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod solver;
