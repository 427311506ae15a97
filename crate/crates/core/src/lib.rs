pub mod cutpool;
pub mod engine;
pub mod format;
pub mod lp;
pub mod models;
pub mod program;
pub mod rng;
pub mod stats;
