//! Privacy accounting with trade-off functions and privacy profiles.

pub mod accountant;
pub mod clt;
pub mod compose;
pub mod counterexample;
pub mod curves;
pub mod error;
pub mod filters;
pub mod grid;
pub mod io;
pub mod normal;
pub mod pair;
pub mod plrv;
pub mod profiles;
pub mod pwl;
pub mod quad;

pub use curves::{BlackwellOrder, TradeoffCurve};
pub use error::{Error, Result};
pub use grid::{GammaGrid, Tolerances};
pub use pair::DensityPair;
pub use profiles::PrivacyProfile;
