//! Command-line front end: scene directories, run manifests and the
//! `synth` / `sample` / `reconstruct` / `eval` / `sweep` subcommands.

pub mod commands;
pub mod manifest;
pub mod scene_dir;

pub use commands::{run, Cli};
