//! Doc-test anchors for the guide.
//!
//! mdBook renders `book/` but cannot run its code fences as tests; including
//! each chapter as a module doc here makes `cargo test --doc` compile and
//! execute every Rust snippet, so the guide can never drift from the API.
#![allow(unused)]
