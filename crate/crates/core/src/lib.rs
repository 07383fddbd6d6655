//! Service-defined named-service networking: name grammar, packet codec,
//! agent and controller state machines, and a deterministic discrete-event
//! simulator that drives them.

pub mod agent;
pub mod cli;
pub mod controller;
pub mod names;
pub mod packets;
pub mod scenario;
pub mod simnet;
pub mod sweep;
