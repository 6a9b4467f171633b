//! Operator front end for the reachability stack: compute and cache value
//! tables, run simulation batches, and emit report tables plus plot data.

pub mod batch;
pub mod config;
pub mod error;
pub mod report;
pub mod table_io;

pub use error::AppError;
