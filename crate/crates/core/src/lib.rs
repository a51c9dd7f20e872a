pub mod config;
pub mod curvature;
pub mod dynamics;
pub mod entropy;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod harness;
pub mod learning;
pub mod linalg;
pub mod network;
pub mod scalar;
