//! Std side of the edge gateway: MQTT and CoAP adapters, in-process test
//! brokers, the daemon, configuration, file formats and the evaluation
//! harness behind the `gateway` binary.

pub mod coap;
pub mod config;
pub mod daemon;
pub mod files;
pub mod mqtt;
pub mod probe;
pub mod session;
pub mod sim;

pub use daemon::{AdminCommand, Daemon, Handle, Snapshot};
