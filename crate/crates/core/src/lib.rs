//! Multiple imputation by chained equations with posterior predictive checks.
//!
//! [`engine::run_fcs`] imputes a [`Dataset`] with per-column models and can
//! also redraw observed cells selected by a [`WhereMask`]. Those replicates feed
//! [`ppc::cell_diagnostics`] (coverage, distance, interval width, deviance) and
//! the plot-data writers in [`plot_emit`]. [`amputation`] and [`harness`]
//! simulate missing data and run the factor-grid studies.
//!
//! Numerics are generic over `f32`/`f64` through [`Scalar`]; the `F64` and
//! `F32` aliases below name the common instantiations.
//!
//! ```
//! use mippc::{amputation::*, engine::EngineConfig, imputers::ImputerSpec, DatasetF64, RngStream};
//! use mippc::harness::gen_scenario1;
//!
//! let complete: DatasetF64 = gen_scenario1(300, &mut RngStream::from_seed(1).rng());
//! let spec = AmputeSpec {
//!     pattern: AmputePattern::new(["y"], [("x", 1.0)]),
//!     mechanism: Mechanism::MarRight,
//!     proportion: 0.3,
//! };
//! let data = ampute(&complete, &spec, RngStream::from_seed(2)).unwrap();
//! let config = EngineConfig::new(20, 1, 3)
//!     .with_method("y", ImputerSpec::norm(&["x", "x2"]))
//!     .replicate_observed(&data);
//! let result = mippc::engine::run_fcs(&data, &config).unwrap();
//! let report = mippc::ppc::cell_diagnostics(&result, 0.95).unwrap();
//! assert!(report.variable("y").unwrap().cov > 0.8);
//! ```

// `!(a > b)` guards are written that way so NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amputation;
pub mod data;
pub mod engine;
pub mod error;
pub mod harness;
pub mod imputers;
pub mod linalg;
pub mod plot_emit;
pub mod ppc;
pub mod scalar;
pub mod stats;

pub use data::{Column, ColumnKind, Dataset, RngStream, WhereMask};
pub use engine::{run_fcs, EngineConfig, MultiplyImputed, PpcMode};
pub use error::{Error, Result};
pub use ppc::{cell_diagnostics, PpcReport};
pub use scalar::Scalar;

pub type DatasetF64 = Dataset<f64>;
pub type DatasetF32 = Dataset<f32>;
pub type ColumnF64 = Column<f64>;
pub type ColumnF32 = Column<f32>;
pub type MultiplyImputedF64 = MultiplyImputed<f64>;
pub type MultiplyImputedF32 = MultiplyImputed<f32>;
