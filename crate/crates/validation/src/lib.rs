//! Holds the `acceptance` test target only. It lives in its own package so a
//! failing criterion never stops the library test suites from running.
