//! Geospatial environment engine and evaluation toolkit for map-based
//! geospatial instruction following.

pub mod geo;
pub mod s2;
pub mod par;
pub mod osm;
pub mod spatial;
pub mod mapgraph;
pub mod worldgraph;
pub mod embedding;
pub mod quantize;
pub mod taskio;
pub mod synthetic;
pub mod baselines;
pub mod metrics;
pub mod invariants;
