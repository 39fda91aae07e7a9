pub mod cases;
pub mod comparison;
pub mod config;
pub mod engine;
pub mod error;
pub mod load;
pub mod models;
pub mod moments;
pub mod monte_carlo;
pub mod pipeline;
pub mod stochastic;
pub mod verification;
pub mod voigt;
