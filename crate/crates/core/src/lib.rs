//! Bidirectional-GRU text sentiment classification.

pub mod corpus;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod trainer;
pub mod wordstats;
