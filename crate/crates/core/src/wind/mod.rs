//! Wind turbine aerodynamics and drivetrain, the doubly-fed induction
//! generator, its back-to-back converter and a composite turbine model.

mod converter;
mod dfig;
mod plant;
mod turbine;

pub use converter::*;
pub use dfig::*;
pub use plant::*;
pub use turbine::*;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WindError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("reference error: {0}")]
    Reference(String),
    #[error("DC bus collapsed (v_dc ≤ 0) at t = {t} s")]
    BusCollapse { t: f64 },
    #[error("state `{channel}` diverged at t = {t} s")]
    Diverged { channel: &'static str, t: f64 },
}
