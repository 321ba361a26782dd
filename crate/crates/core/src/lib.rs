//! Context-aware mountain rescue engine and environment simulator.

pub mod analytics;
pub mod broker;
pub mod context;
pub mod geo;
pub mod preprocess;
pub mod reasoning;
pub mod repository;
pub mod runner;
pub mod simulator;
pub mod threatlang;
pub mod world;
