//! Acceptance checks against the reference simulation results; see `tests/acceptance.rs`.
