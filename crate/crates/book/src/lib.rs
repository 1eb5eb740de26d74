//! Compiles the guide's code snippets as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/environment.md")]
pub mod environment {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/observations.md")]
pub mod observations {}

#[doc = include_str!("../../../book/src/tasks.md")]
pub mod tasks {}

#[doc = include_str!("../../../book/src/experts.md")]
pub mod experts {}

#[doc = include_str!("../../../book/src/runner.md")]
pub mod runner {}

#[doc = include_str!("../../../book/src/protocol.md")]
pub mod protocol {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
