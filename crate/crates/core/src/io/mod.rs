//! Configuration files, scattering-matrix containers and report writers.

pub mod config;
pub mod container;
pub mod output;

pub use config::{parse_config, ExperimentConfig};
pub use container::{decode_native, encode_native, load_scattering, read_generic_csv, write_generic_csv, DataFormat};
pub use output::Provenance;
pub use container::write_native;
