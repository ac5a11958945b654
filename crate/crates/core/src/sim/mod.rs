//! Discrete-event engine: virtual time, an ordered event queue and seeded
//! random streams.

mod engine;
mod rng;
mod time;

pub use engine::{ActorId, Engine, EventId, Fault, Handler, RunSummary, SimError};
pub use rng::RngStream;
pub use time::SimTime;
