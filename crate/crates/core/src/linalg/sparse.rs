use std::io::Write;

use num_traits::{Float, Zero};

use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// Sparse Hermitian matrix stored as a real diagonal plus the strict upper
/// triangle in coordinate form.
///
/// A full (both triangles) CSR copy of the off-diagonal part is kept for
/// matrix-vector products and for the graph traversals of the orderings.
/// Optional integer grid coordinates enable geometric nested dissection.
#[derive(Clone, Debug)]
pub struct SparseHermitian<S: Scalar> {
    dim: usize,
    diagonal: Vec<S::Real>,
    upper: Vec<(usize, usize, S)>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<S>,
    coords: Option<Vec<[i32; 2]>>,
}

impl<S: Scalar> SparseHermitian<S> {
    /// Builds the matrix from its diagonal and strict-upper entries
    /// `(row, col, value)` with `row < col`. Duplicate positions are summed.
    pub fn new(diagonal: Vec<S::Real>, upper: Vec<(usize, usize, S)>) -> Result<Self> {
        let dim = diagonal.len();
        for &(r, c, v) in &upper {
            if r >= c || c >= dim {
                return Err(Error::InvalidParameter(format!(
                    "upper entry ({r}, {c}) outside the strict upper triangle of a {dim}x{dim} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("non-finite entry at ({r}, {c})")));
            }
        }
        if let Some(i) = diagonal.iter().position(|d| !d.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite diagonal at {i}")));
        }

        let mut upper = upper;
        upper.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, S)> = Vec::with_capacity(upper.len());
        for (r, c, v) in upper {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }

        let mut counts = vec![0usize; dim + 1];
        for &(r, c, _) in &merged {
            counts[r + 1] += 1;
            counts[c + 1] += 1;
        }
        for i in 0..dim {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut fill = counts;
        let nnz = row_ptr[dim];
        let mut col_idx = vec![0usize; nnz];
        let mut values = vec![S::zero(); nnz];
        for &(r, c, v) in &merged {
            col_idx[fill[r]] = c;
            values[fill[r]] = v;
            fill[r] += 1;
            col_idx[fill[c]] = r;
            values[fill[c]] = v.conj();
            fill[c] += 1;
        }
        // Rows come out column-sorted for the lower part then the upper part; sort each row.
        for i in 0..dim {
            let (a, b) = (row_ptr[i], row_ptr[i + 1]);
            let mut row: Vec<(usize, S)> = col_idx[a..b].iter().copied().zip(values[a..b].iter().copied()).collect();
            row.sort_by_key(|&(c, _)| c);
            for (k, (c, v)) in row.into_iter().enumerate() {
                col_idx[a + k] = c;
                values[a + k] = v;
            }
        }

        Ok(Self { dim, diagonal, upper: merged, row_ptr, col_idx, values, coords: None })
    }

    /// Attaches integer grid coordinates (one per unknown) used by the
    /// geometric ordering.
    pub fn with_coords(mut self, coords: Vec<[i32; 2]>) -> Result<Self> {
        if coords.len() != self.dim {
            return Err(Error::DimensionMismatch(format!("{} coordinates for dimension {}", coords.len(), self.dim)));
        }
        self.coords = Some(coords);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diagonal(&self) -> &[S::Real] {
        &self.diagonal
    }

    pub fn upper_entries(&self) -> &[(usize, usize, S)] {
        &self.upper
    }

    pub fn coords(&self) -> Option<&[[i32; 2]]> {
        self.coords.as_deref()
    }

    /// Off-diagonal neighbours of row `i` with their values `A[i, j]`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, S)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Off-diagonal pattern in CSR form `(row_ptr, col_idx)`, both triangles.
    pub fn pattern(&self) -> (&[usize], &[usize]) {
        (&self.row_ptr, &self.col_idx)
    }

    /// `y = A x`
    pub fn matvec(&self, x: &[S], y: &mut [S]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for i in 0..self.dim {
            let mut acc = x[i].scale(self.diagonal[i]);
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            for k in a..b {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    /// Upper bound on the spectral radius (maximum absolute row sum).
    pub fn norm_bound(&self) -> S::Real {
        let mut best = S::Real::zero();
        for i in 0..self.dim {
            let mut s = self.diagonal[i].abs();
            for (_, v) in self.row(i) {
                s += v.abs();
            }
            best = best.max(s);
        }
        best
    }

    /// Gershgorin lower bound on the smallest eigenvalue.
    pub fn gershgorin_lower(&self) -> S::Real {
        let mut best = S::Real::infinity();
        for i in 0..self.dim {
            let mut s = self.diagonal[i];
            for (_, v) in self.row(i) {
                s -= v.abs();
            }
            best = best.min(s);
        }
        if self.dim == 0 {
            S::Real::zero()
        } else {
            best
        }
    }

    /// Gershgorin upper bound on the largest eigenvalue.
    pub fn gershgorin_upper(&self) -> S::Real {
        let mut best = S::Real::neg_infinity();
        for i in 0..self.dim {
            let mut s = self.diagonal[i];
            for (_, v) in self.row(i) {
                s += v.abs();
            }
            best = best.max(s);
        }
        if self.dim == 0 {
            S::Real::zero()
        } else {
            best
        }
    }

    /// Largest `|A - A^H|` entry over the stored pattern; zero by construction.
    pub fn hermiticity_defect(&self) -> S::Real {
        let mut worst = S::Real::zero();
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                let back = self.row(j).find(|&(c, _)| c == i).map(|(_, w)| w).unwrap_or_else(S::zero);
                worst = worst.max((v - back.conj()).abs());
            }
        }
        worst
    }

    /// Dense copy (column-major, full storage).
    pub fn to_dense(&self) -> crate::linalg::dense::Mat<S> {
        let mut m = crate::linalg::dense::Mat::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            m[(i, i)] = S::from_real(self.diagonal[i]);
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Writes the upper triangle including the diagonal as `row col re im`
    /// lines, 0-indexed, sorted by row then column.
    pub fn write_coordinate<W: Write>(&self, mut out: W) -> Result<()> {
        let mut lines: Vec<(usize, usize, S)> = self.upper.clone();
        lines.extend((0..self.dim).map(|i| (i, i, S::from_real(self.diagonal[i]))));
        lines.sort_by_key(|&(r, c, _)| (r, c));
        for (r, c, v) in lines {
            writeln!(out, "{} {} {:e} {:e}", r, c, v.re().as_f64(), v.im().as_f64())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn small() -> SparseHermitian<Complex64> {
        SparseHermitian::new(
            vec![2.0, 3.0, 4.0],
            vec![(0, 1, Complex64::new(0.0, 1.0)), (1, 2, Complex64::new(1.0, 0.0))],
        )
        .unwrap()
    }

    #[test]
    fn matvec_matches_dense() {
        let a = small();
        let d = a.to_dense();
        let x = vec![Complex64::new(1.0, 0.5), Complex64::new(-1.0, 2.0), Complex64::new(0.3, 0.0)];
        let mut y = vec![Complex64::zero(); 3];
        a.matvec(&x, &mut y);
        for i in 0..3 {
            let mut acc = Complex64::zero();
            for j in 0..3 {
                acc += d[(i, j)] * x[j];
            }
            assert!((acc - y[i]).norm() < 1e-14);
        }
        assert_eq!(d[(1, 0)], Complex64::new(0.0, -1.0));
    }

    #[test]
    fn structurally_hermitian() {
        assert_eq!(small().hermiticity_defect(), 0.0);
    }

    #[test]
    fn rejects_lower_triangle_entries() {
        let r = SparseHermitian::<f64>::new(vec![1.0, 1.0], vec![(1, 0, 1.0)]);
        assert!(r.is_err());
    }

    #[test]
    fn duplicates_are_summed() {
        let a = SparseHermitian::<f64>::new(vec![0.0, 0.0], vec![(0, 1, 1.0), (0, 1, 2.0)]).unwrap();
        assert_eq!(a.upper_entries(), &[(0, 1, 3.0)]);
    }

    #[test]
    fn coordinate_export_lists_upper_triangle_with_diagonal() {
        let mut buf = Vec::new();
        small().write_coordinate(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "0 0 2e0 0e0");
        assert_eq!(lines[1], "0 1 0e0 1e0");
    }

    #[test]
    fn gershgorin_brackets() {
        let a = small();
        assert!(a.gershgorin_lower() <= 1.0);
        assert!(a.gershgorin_upper() >= 5.0);
    }
}
