//! Benchmark framework for network configuration repair.
//!
//! The library is organized as a pipeline:
//!
//! 1. [`topo`] ingests network topologies and classifies them into size tiers.
//! 2. [`plan`] builds a logical network design (ASes, IGP areas, BGP sessions,
//!    addressing, policies) that satisfies intra- and inter-device semantic
//!    constraints.
//! 3. [`configtext`] renders plans to IOS-style configuration text, parses
//!    configuration text back into device models, and applies search/replace
//!    edit scripts with fuzzy matching.
//! 4. [`faults`] houses the fault catalog and injects bound faults into a plan.
//! 5. [`sampler`] selects fault sets under pairwise coverage and instantiates
//!    scenarios across topology tiers.
//! 6. [`simulator`] computes the forwarding behaviour table from device models.
//! 7. [`specs`] mines data-plane predicates, computes violation sets, and
//!    scores reconfigurations.
//! 8. [`harness`] drives a solver: prompt construction, solution parsing with
//!    one feedback retry, localization and diagnosis metrics.
//! 9. [`orchestrator`] ties everything together behind dataset generation,
//!    evaluation runs, external scoring, and statistics.

pub mod configtext;
pub mod faults;
pub mod features;
pub mod harness;
pub mod net;
pub mod orchestrator;
pub mod plan;
pub mod sampler;
pub mod simulator;
pub mod specs;
pub mod topo;
pub mod util;

/// Version of the configuration grammar emitted by the renderer. Pinned in
/// scenario metadata so that datasets are reproducible across releases.
pub const GRAMMAR_VERSION: &str = "1.0.0";

/// Version of the fault catalog.
pub const CATALOG_VERSION: &str = "1.0.0";

/// Version of the logical plan builder.
pub const PLAN_VERSION: &str = "1.0.0";

/// Version of the solver prompt contract.
pub const PROMPT_VERSION: &str = "1.0.0";
