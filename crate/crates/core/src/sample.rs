//! Observation matrices.
//!
//! A [`Sample`] is an `n x d` matrix whose rows are i.i.d. observations; it
//! stands for the empirical measure putting mass `1/n` on every row.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    data: Array2<f64>,
    unit_box: bool,
}

impl Sample {
    /// Wraps an `n x d` matrix. Requires `n, d >= 1` and finite entries.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (n, d) = data.dim();
        if n == 0 || d == 0 {
            return Err(Error::Input(format!(
                "sample must be non-empty, got {n}x{d}"
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite entry at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self {
            data,
            unit_box: false,
        })
    }

    /// Builds a sample from row vectors of equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut flat = Vec::with_capacity(n * d);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::Shape(format!(
                    "row {i} has {} columns, expected {d}",
                    row.len()
                )));
            }
            flat.extend_from_slice(row);
        }
        let data = Array2::from_shape_vec((n, d), flat).map_err(|e| Error::Shape(e.to_string()))?;
        Self::new(data)
    }

    /// Univariate convenience constructor.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let data = Array2::from_shape_vec((values.len(), 1), values.to_vec())
            .map_err(|e| Error::Shape(e.to_string()))?;
        Self::new(data)
    }

    /// Wraps data that is claimed to live in `[0,1]^d`, checking the claim.
    pub fn new_unit_box(data: Array2<f64>) -> Result<Self> {
        Self::new(data)?.into_unit_box()
    }

    /// Flags the sample as unit-box data after checking every entry is in `[0, 1]`.
    pub fn into_unit_box(mut self) -> Result<Self> {
        if let Some(v) = self.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Input(format!("entry {v} lies outside [0, 1]")));
        }
        self.unit_box = true;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_unit_box(&self) -> bool {
        self.unit_box
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }

    /// Column `j` as an owned vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.column(j).to_vec()
    }

    pub fn column_means(&self) -> Vec<f64> {
        self.data
            .mean_axis(Axis(0))
            .map(|m| m.to_vec())
            .unwrap_or_default()
    }

    /// Stacks `self` on top of `other` (rows of `self` first).
    pub fn stack(&self, other: &Sample) -> Result<Array2<f64>> {
        if self.d() != other.d() {
            return Err(Error::Shape(format!(
                "dimension mismatch: {} vs {}",
                self.d(),
                other.d()
            )));
        }
        ndarray::concatenate(Axis(0), &[self.data.view(), other.data.view()])
            .map_err(|e| Error::Shape(e.to_string()))
    }
}

pub(crate) fn ensure_same_dim(x: &Sample, y: &Sample) -> Result<()> {
    if x.d() != y.d() {
        return Err(Error::Shape(format!(
            "samples have dimensions {} and {}",
            x.d(),
            y.d()
        )));
    }
    Ok(())
}
