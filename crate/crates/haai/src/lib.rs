//! Interpreter and runtime for the Haai pure-reactive programming language.
//!
//! Haai programs consist of *reactors* (uninstantiated descriptions of signal
//! graphs) and *signal definitions* that deploy them. The runtime propagates
//! values through the deployed graph in glitch-free update turns, toggles
//! conditional branches and dynamic operator deployments as values change, and
//! commits trampoline state at the end of each turn.
//!
//! The crate is organised as follows:
//!
//! - [`syntax`] — S-expression reader, AST, and parser.
//! - [`value`] — the runtime value universe and reactor values.
//! - [`env`] — lexical environments mapping identifiers to signals or reactors.
//! - [`engine`] — the signal graph, update-turn executor, and trace output.
//! - [`stdlib`] — primitive reactors and the prelude.
//! - [`io`] — the event queue, source/sink adapters, and deterministic replay.
//! - [`analysis`] — reactivity-tier classification and reactor graph export.
//! - [`cli`] — the `haai` command-line entry point.

pub mod analysis;
pub mod cli;
pub mod engine;
pub mod env;
pub mod io;
pub mod stdlib;
pub mod syntax;
pub mod value;

pub use engine::Engine;
pub use syntax::{parse_program, read_data, Program};
pub use value::Value;
