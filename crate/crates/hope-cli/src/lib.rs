//! Library side of the command line tool: the benchmark experiments,
//! exposed so integration tests can run them in-process with reduced
//! trial counts.

pub mod bench;
