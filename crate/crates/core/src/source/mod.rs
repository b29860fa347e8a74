//! Parsed model of a Java-subset source project.

pub mod index;
pub mod lexer;
pub mod model;
pub mod parser;

pub use index::{strip_generics, ClassLocation, ClassRef, IndexError, ProjectIndex};
pub use model::*;
pub use parser::{parse_unit, ParseError};
