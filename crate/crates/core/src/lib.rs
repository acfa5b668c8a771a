pub mod cli;
pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod inversion;
pub mod lp;
pub mod net;
pub mod params;
pub mod privacy;
pub mod protocol;
pub mod rng;
pub mod rvc;
pub mod topology;
