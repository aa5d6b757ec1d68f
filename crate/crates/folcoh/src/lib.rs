//! Basic and antibasic cohomology of foliated closed manifolds on finite
//! models: periodic grids with monodromy gluing, and a Peter–Weyl truncation
//! of S³ = SU(2) for the Hopf flow.

pub mod blocks;
pub mod catalog;
pub mod cohomology;
pub mod ext;
pub mod foliation;
pub mod grid;
pub mod grid_space;
pub mod identities;
pub mod properties;
pub mod report;
pub mod space;
pub mod su2;
