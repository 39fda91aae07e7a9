//! Extended material models.

pub mod damage;
pub mod phase;
pub mod viscoplastic;

pub use damage::DamageModel;
pub use phase::PhaseModel;
pub use viscoplastic::ViscoplasticModel;
