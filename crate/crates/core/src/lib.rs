pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod fitting;
pub mod lattice;
pub mod meanfield;
pub mod output;
pub mod rules;
pub mod seed;
