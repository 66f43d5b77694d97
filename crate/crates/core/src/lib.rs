pub mod agents;
pub mod cli;
pub mod compilesvc;
pub mod geometry;
pub mod params;
pub mod pdl;
pub mod pipeline;
pub mod service;
