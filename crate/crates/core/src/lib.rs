//! Growth-rate bounds and simulation for multitype branching processes in a
//! Markovian random environment.
//!
//! The population grows like `exp(Omega_l t)` while the environment sits in
//! state `l`; the environment itself is a continuous-time chain with
//! generator `Q`. The almost-sure growth rate `omega` is the maximal Lyapunov
//! exponent of the resulting random matrix product, and the population dies
//! out almost surely iff `omega <= 0`.
//!
//! The crate provides:
//!
//! * closed-form bounds [`bounds::omega_upper`], [`bounds::omega_lower`] and
//!   [`bounds::omega_lower_alt`];
//! * a sharper Monte Carlo lower bound for cyclic environments, [`cyclic`];
//! * a direct estimate of `omega` by simulating the product, [`sim`].
//!
//! ```
//! use blyap::{bounds, model, spectral};
//!
//! let doc = r#"{"Q": [[-5, 5], [2, -2]],
//!               "Omega": [[[-15, 12], [9, -29]], [[-13, 16], [23, -12]]]}"#;
//! let model = model::parse_model(doc, true).unwrap();
//! let prep = spectral::prepare(&model).unwrap();
//! let upper = bounds::omega_upper(&prep).unwrap();
//! assert!((upper - 0.6964).abs() < 5e-5);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails positivity checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cyclic;
pub mod error;
pub mod linalg;
pub mod model;
pub mod report;
pub mod sim;
pub mod spectral;
mod stats;

pub use error::{Error, Result};
