//! Parsers, pretty-printers, corpus handling, and report plumbing for the
//! command-line workbench.

pub mod corpus;
pub mod parse;
pub mod pretty;
pub mod report;
