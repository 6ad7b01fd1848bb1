//! Allocation-only core of an autonomic IoT edge gateway.
//!
//! Everything in this crate is pure: no sockets, files or clocks. The std
//! companion crate (`edge-gateway`) wires these pieces to MQTT/CoAP brokers,
//! the filesystem and the command line.
//!
//! The main building blocks are:
//!
//! * [`dsl`]: small indexed function registries, linear pipeline programs and
//!   enumerative synthesis from input/output examples ordered by a Q-table.
//! * [`device`]: sensor agents clustered by a loaded clustering program.
//! * [`interop`]: learned translation between MQTT client message dialects.
//! * [`logic`]: dual-modal actuator rules learned from example traces.
//! * [`context`]: statistical contexts and the placement DSL.
//! * [`adapter`], [`discovery`], [`controller`]: protocol ranking, resource
//!   dispatch and the unknown-resource to sensor-agent flow.
//! * [`convert`]: XML and JSON conversion with a hard depth guard.
//! * [`stats`]: Spearman correlation, rank-cost model, connection simulation.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod adapter;
pub mod context;
pub mod controller;
pub mod convert;
pub mod device;
pub mod discovery;
pub mod dsl;
pub mod interop;
pub mod logic;
pub mod stats;

pub use dsl::{DslProgram, IoExample, QTable, RegistryId};
