//! Acceptance checks for `taskgroup` live in `tests/acceptance.rs`; run them
//! with `cargo test -p taskgroup-validation --test acceptance`.
