//! Holds the `acceptance` test target, which exercises the library and the
//! command layer together.
