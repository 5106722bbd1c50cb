//! IO companion for the continual-CNN runtime: the JSON network-spec
//! format, the weight-file format, verification against the clip-wise
//! oracle, transient traces, cost reports and synthetic-stream benchmarks.

pub mod bench;
pub mod doc;
pub mod report;
pub mod transient;
pub mod verify;
pub mod weights;
