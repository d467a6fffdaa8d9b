//! Exact q-series and high-precision numerics for mock theta functions,
//! their two-sided extensions and their radial limits at roots of unity.

pub mod bilateral;
pub mod catalog;
pub mod error;
pub mod expr;
pub mod forms;
pub mod numeric;
pub mod radial;
pub mod rat;
pub mod series;
pub mod suites;

pub use error::{Error, Result};
pub use series::{pochhammer, Monomial, PochLength, Series};
