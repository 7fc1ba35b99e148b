//! Dense and sparse operands.

mod coo;
mod csr;
mod dense;
pub mod generate;
pub mod mtx;

pub use coo::CooMatrix;
pub use csr::CsrMatrix;
pub use dense::{read_vector, write_vector, DenseVector};
pub use mtx::{read_matrix_market, write_matrix_market};

use crate::error::{Error, Result};

fn check_dims(nrows: usize, ncols: usize) -> Result<()> {
    if nrows > i32::MAX as usize || ncols > i32::MAX as usize {
        return Err(Error::Shape(format!(
            "{nrows}x{ncols} exceeds the 32-bit index range"
        )));
    }
    Ok(())
}

/// A sparse operand in either supported format.
#[derive(Debug, Clone)]
pub enum SparseMatrix {
    Coo(CooMatrix),
    Csr(CsrMatrix),
}

impl SparseMatrix {
    pub fn nrows(&self) -> usize {
        match self {
            SparseMatrix::Coo(m) => m.nrows(),
            SparseMatrix::Csr(m) => m.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            SparseMatrix::Coo(m) => m.ncols(),
            SparseMatrix::Csr(m) => m.ncols(),
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            SparseMatrix::Coo(m) => m.nnz(),
            SparseMatrix::Csr(m) => m.nnz(),
        }
    }

    pub fn executor(&self) -> &crate::executor::Executor {
        match self {
            SparseMatrix::Coo(m) => m.executor(),
            SparseMatrix::Csr(m) => m.executor(),
        }
    }
}

impl From<CooMatrix> for SparseMatrix {
    fn from(m: CooMatrix) -> Self {
        SparseMatrix::Coo(m)
    }
}

impl From<CsrMatrix> for SparseMatrix {
    fn from(m: CsrMatrix) -> Self {
        SparseMatrix::Csr(m)
    }
}
