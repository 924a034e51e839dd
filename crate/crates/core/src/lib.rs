pub mod cli;
pub mod engine;
pub mod error;
pub mod metasql;
pub mod runtime;
pub mod sql;
pub mod value;
pub mod xform;
pub mod xml;
pub mod xpath;

pub use error::Error;
