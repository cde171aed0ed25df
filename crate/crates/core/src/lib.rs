//! Verification toolkit for inductive systems of dimension-drop and Razak
//! building blocks presented by order-zero generators and relations.
//!
//! The crate is organised around a handful of concrete data types:
//!
//! * [`plfun::PLFunc`]: piecewise-linear functions on `[0,1]` with exact
//!   rational breakpoints, used both as scalar functional-calculus symbols
//!   and as the entries of symbolic connecting data.
//! * [`matfield::MatFun`]: a matrix-valued function on `[0,1]` sampled on a
//!   uniform grid, together with boundary conditions describing membership
//!   in a dimension-drop or Razak block.
//! * [`ordzero::OrderZeroMap`]: a completely positive contractive order-zero
//!   map out of a matrix algebra, stored through its generator row.
//!
//! On top of these sit the block witnesses ([`blocks`]), the tower step with
//! its connecting-map identities ([`tower`]), and trace/simplicity estimates
//! ([`traces`]). Every check reports named residuals through
//! [`report::RelationReport`].

pub mod error;
pub mod linalg;
pub mod matfield;
pub mod ordzero;
pub mod plfun;
pub mod report;

pub mod blocks;
pub mod tower;
pub mod traces;

pub use error::{Error, Result};
