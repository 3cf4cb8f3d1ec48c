//! Decentralized coded caching with heterogeneous cache sizes: placement,
//! delivery, decoding, closed-form rates and bounds, sweeps and a run store.

pub mod analytics;
pub mod bits;
pub mod config;
pub mod decoder;
pub mod delivery;
pub mod demand;
pub mod experiments;
pub mod gf2;
pub mod network;
pub mod partition;
pub mod persistence;
pub mod placement;
pub mod rational;
pub mod subset;
pub mod transcript_io;
