//! Deterministic discrete-event simulation of switched Ethernet networks
//! carrying a request-response readout dataflow.

pub mod config;
pub mod dataflow;
pub mod ether;
pub mod metrics;
pub mod net;
pub mod scenario;
pub mod sim;
pub mod switch;
pub mod traffic;
