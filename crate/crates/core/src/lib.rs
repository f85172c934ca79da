//! Two-node NDN wireless simulator with link-layer Interest bundling.

pub mod apps;
pub mod channel;
pub mod experiments;
pub mod forwarder;
pub mod kernel;
pub mod link;
pub mod tlv;
pub mod transport;
pub mod world;
pub mod report;
pub mod scenario;
