//! Command-line tools, oracle benchmark and play server for the panonav
//! environment.

pub mod bench;
pub mod cli;
pub mod client;
pub mod protocol;
pub mod server;
pub mod session;
