//! Command-line and HTTP front end for the `sld` motion predictor.

pub mod api;
pub mod corpus;
pub mod exit;
pub mod server;

pub use api::{prediction_json, route, Response, Session};
