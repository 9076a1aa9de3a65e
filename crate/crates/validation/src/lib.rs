//! Holds the `acceptance` test target, which runs every end-to-end criterion
//! against the shipped configs and prints one PASS/FAIL line per criterion.
