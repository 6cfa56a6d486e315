//! The deptex service: persistence, the PR gate, webhook dispatch, the
//! REST API and the `deptex` command line, built on [`deptex_core`].
//!
//! [`service::Service`] holds every operation; [`api`] and [`cli`] are thin
//! front ends over it, so a read endpoint and its CLI command print the
//! same bytes for the same store.
//!
//! See `examples/` for runnable walkthroughs of each capability.

pub mod api;
pub mod audit;
pub mod channel;
pub mod cli;
pub mod config;
pub mod dispatch;
pub mod error;
pub mod gate;
pub mod http;
pub mod service;
pub mod store;

pub use error::ServiceError;
pub use service::Service;
pub use store::{Store, StoreError, StoreState};
