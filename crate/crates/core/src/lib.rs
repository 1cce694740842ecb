//! ministra: a self-contained static timing analysis engine.
//!
//! The crate is organized as a pipeline: format parsers ([`liberty`],
//! [`verilog`], [`spef`], [`sdf`]) feed the flat netlist database
//! ([`netlist`]), which is constrained by SDC ([`tcl`], [`sdc`]), annotated
//! with parasitics ([`rc`]), evaluated by the delay calculators ([`delay`],
//! [`arnoldi`]), and propagated ([`tags`], [`propagate`]) into slacks and
//! enumerated paths ([`paths`]). [`run`] drives the whole pipeline.

#[macro_use]
pub mod log;

pub mod boolexpr;
pub mod arnoldi;
pub mod chunk;
pub mod delay;
pub mod error;
pub mod graph;
pub mod intern;
pub mod liberty;
pub mod mode;
pub mod netlist;
pub mod paths;
pub mod propagate;
pub mod rc;
pub mod sdc;
pub mod sdf;
pub mod tags;
pub mod tcl;
pub mod spef;
pub mod verilog;

pub use error::{Error, Result};
