//! Command-line front end for `srcomplement`: structure files in, JSON
//! reports out.

pub mod format;
pub mod report;
pub mod run;
