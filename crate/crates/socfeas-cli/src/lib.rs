//! File formats and command implementations behind the `socfeas` binary,
//! exposed as a library so integration tests can parse what the binary emits.

pub mod commands;
pub mod format;
