//! Compiles every code listing of the guide in `book/` as a doc-test.
//!
//! mdbook cannot test listings that depend on external crates, so each
//! chapter is pulled in as the docs of an empty module and `cargo test
//! --doc` runs them.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/grid.md")]
pub mod grid {}
#[doc = include_str!("../../../book/src/projection.md")]
pub mod projection {}
#[doc = include_str!("../../../book/src/transport.md")]
pub mod transport {}
#[doc = include_str!("../../../book/src/velocity.md")]
pub mod velocity {}
#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}
#[doc = include_str!("../../../book/src/exact1d.md")]
pub mod exact1d {}
#[doc = include_str!("../../../book/src/ot1d.md")]
pub mod ot1d {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
