//! Library surface of the experiment harness; the binary in main.rs is a
//! thin clap wrapper so test suites can drive the same commands in-process.

pub mod commands;
pub mod fitting;
pub mod scenario;
pub mod svg;

pub use commands::{
    cmd_compare, cmd_construct, cmd_decay_probe, cmd_predict, cmd_simulate, cmd_spectrum,
    CmdError, CmdResult,
};
pub use scenario::{PotentialSpec, Scenario};
