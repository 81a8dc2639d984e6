pub mod fixture;
pub mod generate;
pub mod intent;
pub mod model;
pub mod pipeline;
pub mod solver;
