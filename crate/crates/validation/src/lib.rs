//! Holds the `acceptance` test target. Run it with
//! `cargo test -p circdeconv-validation --test acceptance`.
