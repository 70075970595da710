//! Holds the `acceptance` test target; run it with
//! `cargo test -p autolabel-verify --test acceptance`.
