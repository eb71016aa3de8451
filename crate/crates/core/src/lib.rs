//! Reflective network tomography from a single transceiver node.
//!
//! The pipeline: parse a [`topology`], enumerate loopy and folded
//! measurement-path candidates ([`paths`]), select a routing matrix whose
//! mutual coherence is below one ([`builder`], [`coherence`]), then recover
//! sparse bottleneck delays from round-trip measurements ([`recovery`]) in
//! seeded Monte-Carlo experiments ([`simulator`]). [`cli`] wires it together.

pub mod builder;
pub mod cli;
pub mod coherence;
pub mod paths;
pub mod recovery;
pub mod simulator;
pub mod topology;

pub use builder::{build_greedy, build_greedy_fp, build_proposed, BuildReport};
pub use coherence::{f_mu, mutual_coherence, RoutingMatrix};
pub use paths::{enumerate_all_fps, enumerate_candidates, CandidateSet, MeasurementPath};
pub use topology::{parse_topology, Topology};
