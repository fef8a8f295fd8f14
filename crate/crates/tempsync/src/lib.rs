//! File formats, example scenarios and the command-line front end for the
//! `tempsync-core` synchronization toolkit.

pub mod cli;
pub mod config;
pub mod io;
pub mod scenarios;
