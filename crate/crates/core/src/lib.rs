pub mod cone;
pub mod error;
pub mod kv;
pub mod leaves;
pub mod lorenz_map;
pub mod millefeuille;
pub mod report;
pub mod scalar;
pub mod symbolic;
pub mod thermo;

pub use error::{Error, Result};
pub use scalar::Real;

pub type LorenzMap64 = lorenz_map::LorenzMap<f64>;
pub type LorenzMap32 = lorenz_map::LorenzMap<f32>;
pub type MilleFeuilles64 = millefeuille::MilleFeuilles<f64>;
pub type MilleFeuilles32 = millefeuille::MilleFeuilles<f32>;
pub type InducedTable64 = thermo::InducedTable<f64>;
pub type InducedTable32 = thermo::InducedTable<f32>;
pub type Potential64 = thermo::Potential<f64>;
pub type Potential32 = thermo::Potential<f32>;
pub type CaseReport64 = thermo::CaseReport<f64>;
