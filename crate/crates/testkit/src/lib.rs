//! Test-only oracles and synthetic data.
//!
//! Nothing in here calls into `gpdi-core`; every oracle recomputes its
//! quantity from the textbook definition by a different route than the engine.

pub mod dd;
pub mod oracle;
pub mod synth;
