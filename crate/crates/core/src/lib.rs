pub mod barrier;
pub mod density;
pub mod error;
pub mod explicit;
pub mod numeric;
pub mod race;
pub mod report;
pub mod residues;
pub mod sieve;
pub mod zeros;

pub use error::{Error, Result};
