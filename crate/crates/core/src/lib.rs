//! Observer-relative quantum state simulation.
//!
//! States are assigned per observer. A measurement collapses the state only
//! in the measuring observer's ledger and logs a relative fact there; other
//! observers keep describing the same interactions unitarily. The
//! [`facts`] module then checks when a fact is *stable* for another observer,
//! i.e. when the classical composition of probabilities holds for it, and how
//! an environment subsystem makes it so.
//!
//! Scenarios are written in a small line-oriented language (see
//! [`scenario`]) and executed deterministically under a seed.

pub mod error;
pub mod facts;
pub mod oracle;
pub mod perspectives;
pub mod qstate;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod tensor;

pub use error::{Error, Result};
