//! Cluster-then-regress analytics for panel data: DBSCAN on energy-mix
//! features, cluster dummies, penalized linear regression tuned by
//! cross-validation, and chronological forecasting.

pub mod clustering;
pub mod data_model;
pub mod error;
pub mod fmt;
pub mod penalized;
pub mod pipeline;
pub mod report;

pub use error::{DprError, Result};
