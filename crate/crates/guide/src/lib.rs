//! The book's chapters as doc-tests, so `cargo test` runs every snippet.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/profiles.md")]
pub mod profiles {}
#[doc = include_str!("../../../book/src/robot.md")]
pub mod robot {}
#[doc = include_str!("../../../book/src/participants.md")]
pub mod participants {}
#[doc = include_str!("../../../book/src/generative.md")]
pub mod generative {}
#[doc = include_str!("../../../book/src/study.md")]
pub mod study {}
#[doc = include_str!("../../../book/src/service.md")]
pub mod service {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
