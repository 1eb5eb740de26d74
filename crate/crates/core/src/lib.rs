//! Deterministic open-loop pick-and-place benchmark environments.
//!
//! The crate is layered bottom-up:
//!
//! - [`geometry`]: shape primitives, poses, height and footprint queries
//! - [`sim`]: quasi-static world with pick, place, toppling and settling
//! - [`render`]: heightmap and in-hand observations, PNG export
//! - [`tasks`]: the task registry, goal predicates and scripted reactions
//! - [`planners`]: waypoint experts and the deconstruction planner
//! - [`env`], [`runner`]: single and vectorized environments, demo files
//! - [`protocol`], [`server`], [`client`]: the framed wire protocol

pub mod client;
pub mod config;
pub mod demo_file;
pub mod env;
pub mod geometry;
pub mod planners;
pub mod protocol;
pub mod render;
pub mod runner;
pub mod server;
pub mod sim;
pub mod tasks;
