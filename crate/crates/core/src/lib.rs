//! Dependency-aware prompting and API-constrained decoding for
//! repository-level code completion.
//!
//! The pipeline: [`source`] parses a project into a [`source::ProjectIndex`];
//! [`mining`] extracts local and global dependencies for a generation point and
//! renders a prompt; [`constrain`] builds a token prefix trie over the valid
//! APIs and decodes under its mask; [`bench`] builds evaluation samples and
//! [`eval`] scores generations. [`pipeline`] wires it all together.

pub mod bench;
pub mod constrain;
pub mod eval;
pub mod gateway;
pub mod mining;
pub mod pipeline;
pub mod source;
