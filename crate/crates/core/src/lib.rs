//! Sample-overlap analysis for evidence syntheses from study-level envelopes.
//!
//! Each study reports a sample size and, for a handful of key
//! characteristics (time, location, setting, ...), the set of values its
//! observations could take. From those envelopes this crate
//!
//! * encodes each envelope as a bit vector over a partition of the global
//!   range ([`model`]),
//! * computes the overlap potential of any study combination
//!   ([`potential`]),
//! * enumerates combinations by potential and finds the maximal overlap-free
//!   combinations ([`enumerate`]),
//! * bounds the deduplicated pooled sample size ([`bound`]),
//! * and validates all of the above against synthetic data with known
//!   memberships ([`oracle`]).
//!
//! A potential of zero rules overlap out. A positive potential only says
//! overlap is compatible with what was reported.

pub mod atoms;
pub mod bitset;
pub mod bound;
pub mod budget;
pub mod bundle;
pub mod enumerate;
pub mod error;
pub mod io;
pub mod model;
pub mod oracle;
pub mod plot;
pub mod potential;
pub mod ratio;

pub use bitset::BitSet;
pub use budget::Budget;
pub use error::{Error, Result};
pub use ratio::Fraction;
