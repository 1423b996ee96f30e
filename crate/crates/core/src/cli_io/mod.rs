//! Config files, subcommand dispatch, manifests and output formats.

mod config;
mod dispatch;
mod kernel_test;
mod manifest;
mod output;

pub use config::{parse_config, ExperimentSpec, InitialShape, RunConfig};
pub use dispatch::{
    dispatch, exit_code_for, load_config, run_cli, CliArgs, Subcommand, EXIT_BLOW_UP, EXIT_FAILURE, EXIT_INCONCLUSIVE, EXIT_INVALID, EXIT_OK,
};
pub use kernel_test::{kernel_self_test, random_series, KernelCheck};
pub use manifest::{RunManifest, CODE_VERSION};
pub use output::{fmt_real, read_profiles, trajectory_csv, write_profiles, CsvTable};
