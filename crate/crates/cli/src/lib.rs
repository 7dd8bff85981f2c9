//! Library half of the `flexmind` command: script parsing and execution,
//! and the text renderings the subcommands print.

pub mod report;
pub mod script;

pub use script::{parse_script, resolve, RunError, Runner, ScriptLine, ScriptParseError, Step, StepFailure};
