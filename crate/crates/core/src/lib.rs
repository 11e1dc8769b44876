//! Numerical Finsler geometry on a single chart.
//!
//! The crate computes fundamental, Cartan, Berwald and Landsberg tensors by
//! finite differences of `F`, integrates the nonlinear Berwald parallel
//! transport together with its differential, averages the fundamental tensor
//! over unit balls into a Riemannian metric, and measures how each of these
//! objects behaves under transport.

pub mod averaging;
pub mod bundle;
pub mod calculus;
pub mod cli;
pub mod connection;
pub mod error;
pub mod gap;
pub mod metric;
pub mod sampling;
pub mod search;
pub mod tensor;
pub mod transport;

pub use averaging::{averaged_metric, pullback_metric, AveragedMetric, QuadConfig};
pub use calculus::{cartan_tensor, euler_check, fundamental_tensor, CartanTensor, FdConfig, FundamentalTensor};
pub use connection::{classify, landsberg_tensor, spray, Classification, LandsbergTensor, SprayData};
pub use error::{FinslerError, Result};
pub use gap::{full_gap_report, GapConfig, GapReport};
pub use metric::{CurveSpec, Family, MetricDoc, MetricSpec, Polynomial};
pub use search::{landscape_scan, nelder_mead, objective, FamilySpec, SearchConfig, SearchTrace};
pub use transport::{parallel_transport, transport_differential_at, unit_ball_residual, OdeConfig, TransportResult};
pub use nalgebra;
