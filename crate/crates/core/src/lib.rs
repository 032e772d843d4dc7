//! Predicting per-language performance of multilingual models.

pub mod audit;
pub mod cli;
pub mod config;
pub mod datastore;
pub mod evaluation;
pub mod features;
pub mod models;
pub mod pivot;
