//! Camera-LiDAR insulator localization and single-flight inspection
//! planning on synthetic transmission-tower scenes.

pub mod baseline;
pub mod fusion;
pub mod geometry;
pub mod localization;
pub mod mission;
pub mod planner;
pub mod rng;
pub mod scene;
