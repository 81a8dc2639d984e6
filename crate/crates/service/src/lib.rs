//! Rescheduling service: document store, request handling, HTTP and CLI.

pub mod api;
pub mod cli;
pub mod http;
pub mod store;
