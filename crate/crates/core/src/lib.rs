//! Part-constrained grasp planning from RGB-D frames and an "object, part" prompt.

pub mod eval;
pub mod geometry;
pub mod grasp;
pub mod io;
pub mod pipeline;
pub mod registry;
pub mod sim;
