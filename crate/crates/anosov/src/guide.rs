//! The book, kept honest: every chapter is included as a doc comment so
//! its code blocks run under `cargo test --doc`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/riccati.md")]
pub mod riccati {}

#[doc = include_str!("../../../book/src/bubbles.md")]
pub mod bubbles {}

#[doc = include_str!("../../../book/src/surface.md")]
pub mod surface {}

#[doc = include_str!("../../../book/src/deformation.md")]
pub mod deformation {}

#[doc = include_str!("../../../book/src/certificates.md")]
pub mod certificates {}
