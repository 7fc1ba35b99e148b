use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::executor::{DeviceArray, Executor};

/// A dense float64 vector owned by one executor.
///
/// Like [`DeviceArray`], cloning yields a second handle to the same storage.
#[derive(Debug, Clone)]
pub struct DenseVector {
    values: DeviceArray<f64>,
}

impl DenseVector {
    pub fn zeros(exec: &Executor, size: usize) -> Result<Self> {
        Ok(Self {
            values: DeviceArray::allocate(exec, size)?,
        })
    }

    pub fn filled(exec: &Executor, size: usize, value: f64) -> Result<Self> {
        Ok(Self {
            values: DeviceArray::filled(exec, size, value)?,
        })
    }

    pub fn from_slice(exec: &Executor, data: &[f64]) -> Result<Self> {
        Ok(Self {
            values: DeviceArray::from_slice(exec, data)?,
        })
    }

    pub fn from_array(values: DeviceArray<f64>) -> Self {
        Self { values }
    }

    pub fn size(&self) -> usize {
        self.values.len()
    }

    pub fn executor(&self) -> &Executor {
        self.values.executor()
    }

    pub fn values(&self) -> &DeviceArray<f64> {
        &self.values
    }

    pub fn to_vec(&self) -> Result<Vec<f64>> {
        self.values.to_vec()
    }

    pub fn duplicate(&self) -> Result<Self> {
        Ok(Self {
            values: self.values.duplicate()?,
        })
    }

    /// Deep copy onto another executor.
    pub fn to_executor(&self, exec: &Executor) -> Result<Self> {
        let out = Self::zeros(exec, self.size())?;
        crate::executor::copy(&self.values, &out.values)?.wait()?;
        Ok(out)
    }

    pub fn same_storage(&self, other: &Self) -> bool {
        self.values.same_storage(&other.values)
    }
}

/// Parses whitespace-separated float64 values. When `expected` is given the
/// token count must match it.
pub fn read_vector<R: BufRead>(
    exec: &Executor,
    reader: R,
    expected: Option<usize>,
) -> Result<DenseVector> {
    let mut values = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        for token in line.split_whitespace() {
            let v: f64 = token.parse().map_err(|_| Error::Format {
                line: idx + 1,
                msg: format!("'{token}' is not a number"),
            })?;
            values.push(v);
        }
    }
    if let Some(n) = expected {
        if n != values.len() {
            return Err(Error::Format {
                line: 0,
                msg: format!("expected {n} values, found {}", values.len()),
            });
        }
    }
    DenseVector::from_slice(exec, &values)
}

/// Writes one value per line using the shortest representation that reads
/// back to the same float64.
pub fn write_vector<W: Write>(vector: &DenseVector, mut writer: W) -> Result<()> {
    for v in vector.to_vec()? {
        writeln!(writer, "{v:?}")?;
    }
    Ok(())
}
