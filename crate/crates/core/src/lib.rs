pub mod channel;
pub mod edit;
pub mod error;
pub mod experiment;
pub mod index_decoder;
pub mod oracle;
pub mod qubit;
pub mod sim;
pub mod symbols;
pub mod sync_string;

pub use error::{Error, Result};
