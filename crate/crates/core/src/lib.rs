pub mod engine;
pub mod fixtures;
pub mod inheritance;
pub mod ids;
pub mod model;
pub mod negotiation;
pub mod server;
