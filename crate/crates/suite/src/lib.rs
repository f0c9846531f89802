//! Acceptance suite for `stratmoi`; the checks run from `tests/acceptance.rs`.
