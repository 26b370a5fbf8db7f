//! Destructible room-based urban scenes: fracture, destruction events, rubble
//! physics and sensor dataset export.

pub mod collection;
pub mod events;
pub mod fracture;
pub mod geometry;
pub mod physics;
pub mod rng;
pub mod scene;
pub mod sensors;
pub mod bridge;
pub mod cli;
