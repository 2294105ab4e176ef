//! Independent and Markovian models of human inter-event times.
//!
//! The crate fits three nested models to per-user waiting times between
//! online actions:
//!
//! * **IP**: one power law per user,
//! * **IT**: a uniform/power-law mixture split at a platform-wide threshold,
//! * **MK**: the IT mixture with one-step memory of the previous state,
//!
//! compares them with likelihood-ratio tests, and simulates synthetic data
//! from any of them. All numerics are generic over [`Scalar`] (`f32` or
//! `f64`); the `*64` aliases below fix the common case.
//!
//! ```
//! use intertime::{estimate, model::Threshold, simulate, Model};
//!
//! let cfg = simulate::SimConfig {
//!     params: simulate::ModelParams::Mk(intertime::model::MkParams {
//!         p_s_given_s: 0.7, p_s_given_l: 0.3, gamma_s: 1.8, gamma_l: 1.4,
//!     }),
//!     t_thres: 60.0,
//!     n_users: 2,
//!     pairs_per_user: 500,
//!     seed: 1,
//!     initial_state: simulate::InitialState::Stationary,
//! };
//! let users = simulate::simulate_users(&cfg).unwrap();
//! let t = Some(Threshold::new(60.0).unwrap());
//! let it = estimate::fit_at_threshold(&users, Model::It, t).unwrap();
//! let mk = estimate::fit_at_threshold(&users, Model::Mk, t).unwrap();
//! let mem = intertime::infer::lrt_global(&it, &mk, 0.05).unwrap();
//! assert_eq!(mem.dof, 4);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimate;
pub mod infer;
pub mod ingest;
pub mod model;
pub mod scalar;
pub mod simulate;

pub use error::{Error, Result};
pub use estimate::{FitResult, Model, ThresholdGrid, UserSample};
pub use model::{LogLik, StateLabel, Threshold};
pub use scalar::Scalar;

pub type Threshold64 = model::Threshold<f64>;
pub type IpParams64 = model::IpParams<f64>;
pub type ItParams64 = model::ItParams<f64>;
pub type MkParams64 = model::MkParams<f64>;
pub type UserSample64 = estimate::UserSample<f64>;
pub type FitResult64 = estimate::FitResult<f64>;
pub type ThresholdGrid64 = estimate::ThresholdGrid<f64>;
pub type SimConfig64 = simulate::SimConfig<f64>;
pub type TestReport64 = infer::TestReport<f64>;
