pub mod autodiff;
pub mod cli;
pub mod chemio;
pub mod featurize;
pub mod fragmenter;
pub mod layers;
pub mod pocket;
pub mod config;
pub mod dataset;
pub mod model;
pub mod pipeline;
