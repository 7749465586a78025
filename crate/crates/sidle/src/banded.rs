//! Banded linear systems: compact storage, in-place LU, and solves against
//! both the matrix and its transpose.
//!
//! The piecewise-polynomial constraint matrices this crate builds are
//! square with a fixed band; factorizing in band storage keeps the solve
//! linear in the number of segments. No pivoting is performed: the
//! constraint ordering used by the trajectory builder puts dominant basis
//! terms on the diagonal, and a vanishing pivot is reported as an error
//! rather than repaired.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BandedError {
    #[error("matrix is singular to working precision at pivot {row} ({value:e})")]
    SingularPivot { row: usize, value: f64 },
    #[error("right-hand side length {got} does not match dimension {expected}")]
    DimensionMismatch { got: usize, expected: usize },
}

/// Pivots with magnitude at or below this abort the factorization.
const PIVOT_TOL: f64 = 1e-12;

/// Square banded matrix with `lower` sub-diagonals and `upper`
/// super-diagonals, stored row-compact.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    // Row i holds columns i-lower ..= i+upper at data[i*stride + (j-i+lower)].
    data: Vec<f64>,
    factored: bool,
}

impl BandedMatrix {
    pub fn zero(n: usize, lower: usize, upper: usize) -> Self {
        Self {
            n,
            lower,
            upper,
            data: vec![0.0; n * (lower + upper + 1)],
            factored: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn stride(&self) -> usize {
        self.lower + self.upper + 1
    }

    #[inline]
    fn idx(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.n && col < self.n);
        debug_assert!(col + self.lower >= row && col <= row + self.upper);
        row * self.stride() + (col + self.lower - row)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        if col + self.lower < row || col > row + self.upper {
            return 0.0;
        }
        self.data[self.idx(row, col)]
    }

    /// Write an in-band entry. Panics outside the band.
    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let i = self.idx(row, col);
        self.data[i] = value;
    }

    /// y = A x, for factor-free matrices (used by tests and diagnostics).
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert!(!self.factored, "matrix already factored");
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.lower);
            let hi = (i + self.upper).min(self.n - 1);
            let mut acc = 0.0;
            for j in lo..=hi {
                acc += self.data[self.idx(i, j)] * x[j];
            }
            y[i] = acc;
        }
        y
    }

    /// In-place LU factorization without pivoting. L's unit diagonal is
    /// implicit; multipliers overwrite the sub-diagonal band.
    pub fn factorize(&mut self) -> Result<(), BandedError> {
        assert!(!self.factored, "matrix already factored");
        for k in 0..self.n {
            let pivot = self.data[self.idx(k, k)];
            if pivot.abs() <= PIVOT_TOL {
                return Err(BandedError::SingularPivot {
                    row: k,
                    value: pivot,
                });
            }
            let i_end = (k + self.lower).min(self.n - 1);
            let j_end = (k + self.upper).min(self.n - 1);
            for i in k + 1..=i_end {
                let ik = self.idx(i, k);
                let m = self.data[ik] / pivot;
                self.data[ik] = m;
                if m != 0.0 {
                    for j in k + 1..=j_end {
                        let u = self.data[self.idx(k, j)];
                        if u != 0.0 {
                            let ij = self.idx(i, j);
                            self.data[ij] -= m * u;
                        }
                    }
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solve A x = b in place using the stored factors.
    pub fn solve(&self, b: &mut [f64]) -> Result<(), BandedError> {
        assert!(self.factored, "factorize before solving");
        if b.len() != self.n {
            return Err(BandedError::DimensionMismatch {
                got: b.len(),
                expected: self.n,
            });
        }
        // L y = b (unit diagonal).
        for k in 0..self.n {
            let i_end = (k + self.lower).min(self.n - 1);
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=i_end {
                    b[i] -= self.data[self.idx(i, k)] * bk;
                }
            }
        }
        // U x = y.
        for k in (0..self.n).rev() {
            let j_end = (k + self.upper).min(self.n - 1);
            let mut acc = b[k];
            for j in k + 1..=j_end {
                acc -= self.data[self.idx(k, j)] * b[j];
            }
            b[k] = acc / self.data[self.idx(k, k)];
        }
        Ok(())
    }

    /// Solve Aᵀ x = b in place: Aᵀ = Uᵀ Lᵀ, so forward-substitute through
    /// Uᵀ then back-substitute through Lᵀ.
    pub fn solve_transpose(&self, b: &mut [f64]) -> Result<(), BandedError> {
        assert!(self.factored, "factorize before solving");
        if b.len() != self.n {
            return Err(BandedError::DimensionMismatch {
                got: b.len(),
                expected: self.n,
            });
        }
        // Uᵀ y = b: Uᵀ is lower triangular, row k of Uᵀ is column k of U.
        for k in 0..self.n {
            let j_start = k.saturating_sub(self.upper);
            let mut acc = b[k];
            for j in j_start..k {
                acc -= self.data[self.idx(j, k)] * b[j];
            }
            b[k] = acc / self.data[self.idx(k, k)];
        }
        // Lᵀ x = y: unit diagonal, (Lᵀ)[k][m] = L[m][k] for m > k.
        for k in (0..self.n).rev() {
            let m_end = (k + self.lower).min(self.n - 1);
            let mut acc = b[k];
            for m in k + 1..=m_end {
                acc -= self.data[self.idx(m, k)] * b[m];
            }
            b[k] = acc;
        }
        Ok(())
    }
}
