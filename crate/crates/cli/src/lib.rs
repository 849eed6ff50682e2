//! Instance files, the instance generator, CSV logs and experiment drivers
//! behind the `sdmgs` binary.

pub mod experiments;
pub mod generator;
pub mod instance_file;
pub mod output;
