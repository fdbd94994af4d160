pub mod client;
pub mod formats;
pub mod harness;
pub mod noise;
pub mod scoring;
pub mod seed;
pub mod stats;
pub mod table;
pub mod taskgen;
