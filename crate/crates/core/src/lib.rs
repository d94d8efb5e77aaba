pub mod classifiers;
pub mod config;
pub mod corpus;
pub mod dsp;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod features;
pub mod pipeline;
pub mod report;
