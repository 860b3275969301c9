//! Holds the `acceptance` test target. Run it with
//! `cargo test -p mk-suite --test acceptance`.
