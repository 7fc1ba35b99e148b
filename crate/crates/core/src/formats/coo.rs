use crate::error::{Error, Result};
use crate::executor::{DeviceArray, Executor};

use super::{check_dims, CsrMatrix};

/// Coordinate-format sparse matrix.
///
/// Entries are kept sorted by `(row, col)` with no duplicates. Explicit
/// zeros are legal entries.
#[derive(Debug, Clone)]
pub struct CooMatrix {
    nrows: usize,
    ncols: usize,
    row_idx: DeviceArray<i32>,
    col_idx: DeviceArray<i32>,
    vals: DeviceArray<f64>,
}

impl CooMatrix {
    /// Assembles a matrix from unsorted triplets, summing duplicates.
    pub fn from_entries(
        exec: &Executor,
        nrows: usize,
        ncols: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<Self> {
        check_dims(nrows, ncols)?;
        if let Some(&(r, c, _)) = entries.iter().find(|&&(r, c, _)| r >= nrows || c >= ncols) {
            return Err(Error::Format {
                line: 0,
                msg: format!("entry ({r}, {c}) outside {nrows}x{ncols} matrix"),
            });
        }
        let mut sorted = entries.to_vec();
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut rows = Vec::with_capacity(sorted.len());
        let mut cols = Vec::with_capacity(sorted.len());
        let mut vals: Vec<f64> = Vec::with_capacity(sorted.len());
        for (r, c, v) in sorted {
            let (r, c) = (r as i32, c as i32);
            if rows.last() == Some(&r) && cols.last() == Some(&c) {
                *vals.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                cols.push(c);
                vals.push(v);
            }
        }
        Self::from_canonical(exec, nrows, ncols, &rows, &cols, &vals)
    }

    /// Builds a matrix from arrays that must already be canonical.
    pub fn from_parts(
        exec: &Executor,
        nrows: usize,
        ncols: usize,
        row_idx: &[i32],
        col_idx: &[i32],
        vals: &[f64],
    ) -> Result<Self> {
        check_dims(nrows, ncols)?;
        validate_coo(nrows, ncols, row_idx, col_idx, vals)?;
        Self::from_canonical(exec, nrows, ncols, row_idx, col_idx, vals)
    }

    fn from_canonical(
        exec: &Executor,
        nrows: usize,
        ncols: usize,
        rows: &[i32],
        cols: &[i32],
        vals: &[f64],
    ) -> Result<Self> {
        if rows.len() > i32::MAX as usize {
            return Err(Error::Shape("nnz exceeds 32-bit index range".into()));
        }
        Ok(Self {
            nrows,
            ncols,
            row_idx: DeviceArray::from_slice(exec, rows)?,
            col_idx: DeviceArray::from_slice(exec, cols)?,
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

    pub fn row_idx(&self) -> &DeviceArray<i32> {
        &self.row_idx
    }

    pub fn col_idx(&self) -> &DeviceArray<i32> {
        &self.col_idx
    }

    pub fn vals(&self) -> &DeviceArray<f64> {
        &self.vals
    }

    /// Checks every format invariant.
    pub fn validate(&self) -> Result<()> {
        validate_coo(
            self.nrows,
            self.ncols,
            &self.row_idx.to_vec()?,
            &self.col_idx.to_vec()?,
            &self.vals.to_vec()?,
        )
    }

    /// Triplets in storage order.
    pub fn entries(&self) -> Result<Vec<(usize, usize, f64)>> {
        let rows = self.row_idx.to_vec()?;
        let cols = self.col_idx.to_vec()?;
        let vals = self.vals.to_vec()?;
        Ok(rows
            .iter()
            .zip(&cols)
            .zip(&vals)
            .map(|((&r, &c), &v)| (r as usize, c as usize, v))
            .collect())
    }

    pub fn transpose(&self) -> Result<Self> {
        let swapped: Vec<_> = self
            .entries()?
            .into_iter()
            .map(|(r, c, v)| (c, r, v))
            .collect();
        Self::from_entries(self.executor(), self.ncols, self.nrows, &swapped)
    }

    pub fn to_csr(&self) -> Result<CsrMatrix> {
        let rows = self.row_idx.to_vec()?;
        let mut row_ptr = vec![0i32; self.nrows + 1];
        for &r in &rows {
            row_ptr[r as usize + 1] += 1;
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix::from_parts(
            self.executor(),
            self.nrows,
            self.ncols,
            &row_ptr,
            &self.col_idx.to_vec()?,
            &self.vals.to_vec()?,
        )
    }

    pub fn to_executor(&self, exec: &Executor) -> Result<Self> {
        Self::from_canonical(
            exec,
            self.nrows,
            self.ncols,
            &self.row_idx.to_vec()?,
            &self.col_idx.to_vec()?,
            &self.vals.to_vec()?,
        )
    }

    /// Dense row-major copy. Intended for small matrices in tests and tools.
    pub fn to_dense(&self) -> Result<Vec<Vec<f64>>> {
        let mut dense = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.entries()? {
            dense[r][c] += v;
        }
        Ok(dense)
    }
}

pub(super) fn validate_coo(
    nrows: usize,
    ncols: usize,
    rows: &[i32],
    cols: &[i32],
    vals: &[f64],
) -> Result<()> {
    if rows.len() != vals.len() || cols.len() != vals.len() {
        return Err(Error::Shape(format!(
            "coo arrays disagree in length: {} rows, {} cols, {} values",
            rows.len(),
            cols.len(),
            vals.len()
        )));
    }
    let mut prev: Option<(i32, i32)> = None;
    for (k, (&r, &c)) in rows.iter().zip(cols).enumerate() {
        if r < 0 || c < 0 || r as usize >= nrows || c as usize >= ncols {
            return Err(Error::Format {
                line: 0,
                msg: format!("entry {k} at ({r}, {c}) outside {nrows}x{ncols} matrix"),
            });
        }
        if prev.is_some_and(|p| p >= (r, c)) {
            return Err(Error::Format {
                line: 0,
                msg: format!("entry {k} at ({r}, {c}) is out of order or duplicated"),
            });
        }
        prev = Some((r, c));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let e = Executor::reference();
        let m = CooMatrix::from_entries(&e, 1, 1, &[(0, 0, 1.0), (0, 0, 2.0)]).unwrap();
        assert_eq!(m.entries().unwrap(), vec![(0, 0, 3.0)]);
    }

    #[test]
    fn empty_and_sorted() {
        let e = Executor::reference();
        let m = CooMatrix::from_entries(&e, 3, 3, &[]).unwrap();
        assert_eq!(m.nnz(), 0);
        let m =
            CooMatrix::from_entries(&e, 2, 2, &[(1, 1, 3.0), (0, 1, 2.0), (0, 0, 1.0)]).unwrap();
        assert_eq!(
            m.entries().unwrap(),
            vec![(0, 0, 1.0), (0, 1, 2.0), (1, 1, 3.0)]
        );
        m.validate().unwrap();
    }

    #[test]
    fn explicit_zero_kept() {
        let e = Executor::reference();
        let m = CooMatrix::from_entries(&e, 2, 2, &[(1, 0, 0.0)]).unwrap();
        assert_eq!(m.nnz(), 1);
    }

    #[test]
    fn out_of_range_entry() {
        let e = Executor::reference();
        let err = CooMatrix::from_entries(&e, 2, 2, &[(2, 0, 1.0)]).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }

    #[test]
    fn non_canonical_parts_rejected() {
        let e = Executor::reference();
        assert!(CooMatrix::from_parts(&e, 2, 2, &[1, 0], &[0, 0], &[1.0, 1.0]).is_err());
        assert!(CooMatrix::from_parts(&e, 2, 2, &[0, 0], &[1, 1], &[1.0, 1.0]).is_err());
        assert!(CooMatrix::from_parts(&e, 2, 2, &[0], &[0, 1], &[1.0]).is_err());
    }

    #[test]
    fn to_csr_counts_rows() {
        let e = Executor::reference();
        let m = CooMatrix::from_parts(&e, 2, 2, &[0, 0, 1], &[0, 1, 1], &[1.0, 2.0, 3.0]).unwrap();
        let csr = m.to_csr().unwrap();
        assert_eq!(csr.row_ptr().to_vec().unwrap(), vec![0, 2, 3]);
        let empty = CooMatrix::from_entries(&e, 3, 2, &[])
            .unwrap()
            .to_csr()
            .unwrap();
        assert_eq!(empty.row_ptr().to_vec().unwrap(), vec![0, 0, 0, 0]);
    }
}
