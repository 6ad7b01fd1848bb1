//! Minimal MQTT 3.1.1: codec, blocking client and an in-process broker.

pub mod broker;
mod client;
pub mod codec;

pub use broker::{Broker, BrokerCounters, BrokerFaults};
pub use client::{Message, MqttClient, MqttError};
