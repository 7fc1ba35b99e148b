//! Platform-portable sparse linear algebra built around executors.
//!
//! Algorithms ([`krylov`]) are written once against a small set of kernels
//! ([`kernels`]); each kernel has one implementation per backend, selected at
//! runtime from the [`executor::Executor`] that owns the operands. The
//! simulated device backend runs its kernels on a lock-step warp model
//! ([`subgroup`]).

pub mod error;
pub mod executor;
pub mod formats;
pub mod kernels;
pub mod krylov;
pub mod subgroup;

pub use error::{Error, Result};
pub use executor::{create_executor, DeviceArray, Executor, ExecutorConfig, ExecutorKind};
pub use formats::{CooMatrix, CsrMatrix, DenseVector, SparseMatrix};
