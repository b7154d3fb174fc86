//! On-disk formats: array containers, artifact directories, run
//! configurations and CSV tables.

pub mod bundle;
pub mod config;
pub mod container;
pub mod csv;

pub use bundle::{
    load_modes, load_rom, load_trajectory, save_modes, save_report_manifest, save_rom,
    save_trajectory, Provenance,
};
pub use config::{ExperimentConfig, ModesConfig, RunConfig, SystemConfig};
pub use container::{load, read_array, save, write_array, Array, ArrayData};
pub use csv::{Cell, Table};
