use crate::error::{Error, Result};
use crate::executor::{DeviceArray, Executor};

use super::{check_dims, CooMatrix};

/// Compressed sparse row matrix with strictly increasing column indices in
/// every row.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: DeviceArray<i32>,
    col_idx: DeviceArray<i32>,
    vals: DeviceArray<f64>,
}

impl CsrMatrix {
    pub fn from_parts(
        exec: &Executor,
        nrows: usize,
        ncols: usize,
        row_ptr: &[i32],
        col_idx: &[i32],
        vals: &[f64],
    ) -> Result<Self> {
        check_dims(nrows, ncols)?;
        validate_csr(nrows, ncols, row_ptr, col_idx, vals)?;
        Ok(Self {
            nrows,
            ncols,
            row_ptr: DeviceArray::from_slice(exec, row_ptr)?,
            col_idx: DeviceArray::from_slice(exec, col_idx)?,
            vals: DeviceArray::from_slice(exec, vals)?,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn executor(&self) -> &Executor {
        self.vals.executor()
    }

    pub fn row_ptr(&self) -> &DeviceArray<i32> {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &DeviceArray<i32> {
        &self.col_idx
    }

    pub fn vals(&self) -> &DeviceArray<f64> {
        &self.vals
    }

    pub fn validate(&self) -> Result<()> {
        validate_csr(
            self.nrows,
            self.ncols,
            &self.row_ptr.to_vec()?,
            &self.col_idx.to_vec()?,
            &self.vals.to_vec()?,
        )
    }

    pub fn to_coo(&self) -> Result<CooMatrix> {
        let row_ptr = self.row_ptr.to_vec()?;
        let rows: Vec<i32> = row_ptr
            .windows(2)
            .enumerate()
            .flat_map(|(i, w)| std::iter::repeat_n(i as i32, (w[1] - w[0]) as usize))
            .collect();
        CooMatrix::from_parts(
            self.executor(),
            self.nrows,
            self.ncols,
            &rows,
            &self.col_idx.to_vec()?,
            &self.vals.to_vec()?,
        )
    }

    pub fn to_executor(&self, exec: &Executor) -> Result<Self> {
        Self::from_parts(
            exec,
            self.nrows,
            self.ncols,
            &self.row_ptr.to_vec()?,
            &self.col_idx.to_vec()?,
            &self.vals.to_vec()?,
        )
    }
}

fn validate_csr(
    nrows: usize,
    ncols: usize,
    row_ptr: &[i32],
    col_idx: &[i32],
    vals: &[f64],
) -> Result<()> {
    let bad = |msg: String| Err(Error::Format { line: 0, msg });
    if row_ptr.len() != nrows + 1 {
        return bad(format!(
            "row_ptr has {} entries for {nrows} rows",
            row_ptr.len()
        ));
    }
    if col_idx.len() != vals.len() {
        return Err(Error::Shape(format!(
            "{} column indices for {} values",
            col_idx.len(),
            vals.len()
        )));
    }
    if row_ptr[0] != 0 || row_ptr[nrows] as usize != vals.len() {
        return bad(format!(
            "row_ptr must run from 0 to nnz={}, got {}..{}",
            vals.len(),
            row_ptr[0],
            row_ptr[nrows]
        ));
    }
    if let Some(i) = row_ptr.windows(2).position(|w| w[1] < w[0]) {
        return bad(format!("row_ptr decreases at row {i}"));
    }
    for (i, w) in row_ptr.windows(2).enumerate() {
        let cols = &col_idx[w[0] as usize..w[1] as usize];
        for (k, &c) in cols.iter().enumerate() {
            if c < 0 || c as usize >= ncols {
                return bad(format!("column {c} in row {i} outside {ncols} columns"));
            }
            if k > 0 && cols[k - 1] >= c {
                return bad(format!("columns in row {i} are not strictly increasing"));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expansion_to_coo() {
        let e = Executor::reference();
        let csr =
            CsrMatrix::from_parts(&e, 2, 2, &[0, 2, 3], &[0, 1, 1], &[1.0, 2.0, 3.0]).unwrap();
        let coo = csr.to_coo().unwrap();
        assert_eq!(coo.row_idx().to_vec().unwrap(), vec![0, 0, 1]);
        let empty = CsrMatrix::from_parts(&e, 0, 0, &[0], &[], &[]).unwrap();
        assert_eq!(empty.to_coo().unwrap().nnz(), 0);
    }

    #[test]
    fn invariants_enforced() {
        let e = Executor::reference();
        assert!(CsrMatrix::from_parts(&e, 2, 2, &[1, 2, 3], &[0, 1, 1], &[1.0; 3]).is_err());
        assert!(CsrMatrix::from_parts(&e, 2, 2, &[0, 2, 1], &[0, 1, 1], &[1.0; 3]).is_err());
        assert!(CsrMatrix::from_parts(&e, 2, 2, &[0, 2, 3], &[1, 0, 1], &[1.0; 3]).is_err());
        assert!(CsrMatrix::from_parts(&e, 2, 2, &[0, 2, 3], &[0, 2, 1], &[1.0; 3]).is_err());
        assert!(CsrMatrix::from_parts(&e, 2, 2, &[0, 2], &[0, 1], &[1.0; 2]).is_err());
    }
}
