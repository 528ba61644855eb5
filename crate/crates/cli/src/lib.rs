//! Command-line front end and HTTP service for crystallization campaigns.

pub mod server;
