pub mod baselines;
pub mod classify;
pub mod crp;
pub mod dataio;
pub mod dense;
pub mod error;
pub mod experiment;
pub mod kronlin;
pub mod lemmas;
pub mod model;
pub mod stats;
