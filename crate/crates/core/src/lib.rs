pub mod blockmodel;
pub mod config;
pub mod error;
pub mod imageops;
pub mod lipschitz;
pub mod problems;
pub mod prox;
pub mod schedules;
pub mod solver;
pub mod synth;
pub mod io;
pub mod verify;
pub mod harness;
