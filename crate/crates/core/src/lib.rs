//! Linear genetic programming interpreters and a genetic-improvement
//! workbench that searches for cheaper variants of an interpreter.

pub mod batch;
pub mod gi;
pub mod harness;
pub mod lgp;
pub mod par;
pub mod testgen;
pub mod toy;
