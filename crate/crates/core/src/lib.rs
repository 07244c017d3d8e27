//! Gate-level toolkit for C-testable iterative arrays — ripple-carry adder
//! chains and carry–save array multipliers with a test-mode border
//! modification — covering netlist construction and interchange, stuck-at
//! fault modeling with equivalence collapsing, word-batched fault
//! simulation, constant-count test generation, and a constant-size built-in
//! self-test scheme.
//!
//! The crate is organized as a pipeline:
//!
//! * [`netlist`] — gate-level circuits: primitives, validated assembly, the
//!   adder/multiplier generators, and the test-mode border transform.
//! * [`export`] — lossless JSON interchange and a structural HDL dump.
//! * [`fault`] — single stuck-at fault universes, equivalence collapsing,
//!   and structural redundancy marking for the test-mode configuration.
//! * [`sim`] — test vectors and files, good-machine evaluation, event-driven
//!   word-parallel fault simulation, and coverage reporting.
//! * [`tpg`] — cell pattern tables, closed grid layouts, and the constant
//!   test suites they realize.
//! * [`bist`] — the five-entry decoder ROM, self-test sessions, and
//!   fault-injection sweeps.

pub mod bist;
pub mod export;
pub mod fault;
pub mod netlist;
pub mod sim;
pub mod tpg;
