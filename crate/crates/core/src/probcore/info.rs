use alloc::vec::Vec;

use super::{Distribution, ProbError, NORMALIZATION_TOL};

/// A row-major joint probability table `p(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    rows: usize,
    cols: usize,
    cells: Vec<f64>,
}

impl JointTable {
    /// Builds a table from nested rows. Rows must be rectangular, entries
    /// non-negative and the total within [`NORMALIZATION_TOL`] of one.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ProbError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map(Vec::len).ok_or(ProbError::Empty)?;
        if n_cols == 0 {
            return Err(ProbError::Empty);
        }
        let mut cells = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(ProbError::DimensionMismatch {
                    expected: n_cols,
                    actual: row.len(),
                });
            }
            cells.extend_from_slice(row);
        }
        for (index, &value) in cells.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(ProbError::InvalidEntry { index, value });
            }
        }
        let total: f64 = cells.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(ProbError::NotNormalized(total));
        }
        Ok(Self {
            rows: n_rows,
            cols: n_cols,
            cells,
        })
    }

    pub(crate) fn from_cells_unchecked(rows: usize, cols: usize, cells: Vec<f64>) -> Self {
        debug_assert_eq!(cells.len(), rows * cols);
        Self { rows, cols, cells }
    }

    /// Product table `p(x) q(y)`.
    pub fn outer(p: &Distribution, q: &Distribution) -> Self {
        let cells = p
            .probs()
            .iter()
            .flat_map(|a| q.probs().iter().map(move |b| a * b))
            .collect();
        Self::from_cells_unchecked(p.len(), q.len(), cells)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[row * self.cols + col]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn transpose(&self) -> Self {
        let mut cells = Vec::with_capacity(self.cells.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                cells.push(self.get(r, c));
            }
        }
        Self::from_cells_unchecked(self.cols, self.rows, cells)
    }

    pub fn row_marginal(&self) -> Vec<f64> {
        self.cells
            .chunks(self.cols)
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_marginal(&self) -> Vec<f64> {
        let mut m = alloc::vec![0.0; self.cols];
        for row in self.cells.chunks(self.cols) {
            for (acc, v) in m.iter_mut().zip(row) {
                *acc += v;
            }
        }
        m
    }
}

fn entropy_of(probs: &[f64]) -> f64 {
    let sum: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * libm::log2(p))
        .sum();
    // Subtracting from zero keeps point masses at +0 rather than -0.
    0.0 - sum
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn entropy(d: &Distribution) -> f64 {
    entropy_of(d.probs())
}

/// Mutual information between the row and column variables, in bits.
pub fn mutual_information(joint: &JointTable) -> f64 {
    let px = joint.row_marginal();
    let py = joint.col_marginal();
    let mut mi = 0.0;
    for (r, &pr) in px.iter().enumerate() {
        for (c, &pc) in py.iter().enumerate() {
            let pxy = joint.get(r, c);
            if pxy > 0.0 {
                mi += pxy * libm::log2(pxy / (pr * pc));
            }
        }
    }
    // Cancellation can leave a tiny negative residue for independent tables.
    mi.max(0.0)
}

#[cfg(test)]
fn entropy_bits(probs: &[f64]) -> f64 {
    entropy_of(probs)
}
