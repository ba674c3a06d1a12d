//! Traveling-wave fronts of the bistable equation u_t = Lap u + u - u^3 on
//! infinite channels R x Omega with Dirichlet walls. The library computes
//! cross-section profiles, minimizes the exponentially weighted wave
//! functional on a half-cylinder, glues and polishes the front on a full
//! channel, and certifies the result with independent identities.

pub mod channel;
pub mod config;
pub mod cross_section;
pub mod error;
pub mod field;
pub mod grid;
pub mod linalg;
pub mod pipeline;
pub mod report;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
