//! Organization-first dependency risk governance.
//!
//! The crate models an enterprise as a typed property graph and layers
//! four capabilities on top of it:
//!
//! - [`graph`]: the graph store, its typing table and blast-radius queries
//! - [`ingest`]: SBOM, vulnerability-feed and slice parsing
//! - [`reachability`]: execution-path scoring of code slices (EPD / Depscore)
//! - [`risk`]: contextual contribution, unit/org aggregation and leaderboards
//! - [`policy`]: PolicyLang, a bounded policy language evaluated in four contexts
//!
//! [`demo`] builds small example organizations used by the examples and tests.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod demo;
pub mod graph;
pub mod ingest;
pub mod policy;
pub mod purl;
pub mod reachability;
pub mod risk;
pub mod transport;
pub mod version;

pub use graph::{Edge, EdgeKind, GraphError, Node, NodeId, NodeKind, OrgGraph};
