//! Minimal CoAP over UDP: codec, client with Observe, and a test server.

mod client;
pub mod codec;
mod server;

pub use client::{CoapClient, CoapClientError, Notification};
pub use server::{CoapServer, ServerCounters, ServerFaults};
