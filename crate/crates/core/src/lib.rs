pub mod energy;
pub mod error;
pub mod cli;
pub mod game;
pub mod needle;
pub mod parallel;
pub mod scoring;
pub mod tiling;
pub mod torus;
