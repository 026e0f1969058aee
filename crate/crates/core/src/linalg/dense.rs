//! Small dense matrices and the Hermitian eigensolver used for reference
//! computations and Rayleigh-Ritz projections.

use std::ops::{Index, IndexMut};

use num_traits::{Float, One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// Column-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m.data[i + rows * j] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, j: usize) -> &[S] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [S] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    /// `self * other`
    pub fn mul(&self, other: &Mat<S>) -> Mat<S> {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            for k in 0..self.cols {
                let b = other[(k, j)];
                if b == S::zero() {
                    continue;
                }
                let src = self.col(k);
                let dst = out.col_mut(j);
                for i in 0..src.len() {
                    dst[i] += src[i] * b;
                }
            }
        }
        out
    }

    /// `self^H * other`
    pub fn adjoint_mul(&self, other: &Mat<S>) -> Mat<S> {
        assert_eq!(self.rows, other.rows);
        Mat::from_fn(self.cols, other.cols, |i, j| crate::scalar::dot(self.col(i), other.col(j)))
    }

    /// Largest `|A[i,j] - conj(A[j,i])|`.
    pub fn hermiticity_defect(&self) -> S::Real {
        let mut worst = S::Real::zero();
        for j in 0..self.cols {
            for i in 0..self.rows {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).abs());
            }
        }
        worst
    }
}

impl<S> Index<(usize, usize)> for Mat<S> {
    type Output = S;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i + self.rows * j]
    }
}

impl<S> IndexMut<(usize, usize)> for Mat<S> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i + self.rows * j]
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen<S: Scalar> {
    pub values: Vec<S::Real>,
    /// Orthonormal eigenvectors as columns, present when requested.
    pub vectors: Option<Mat<S>>,
}

/// Householder reduction to a real symmetric tridiagonal matrix followed by
/// implicit QL. Only the lower triangle of `a` is read.
pub fn hermitian_eigen<S: Scalar>(a: &Mat<S>, want_vectors: bool) -> Result<HermitianEigen<S>> {
    let n = a.rows;
    if a.cols != n {
        return Err(Error::DimensionMismatch(format!("{}x{} matrix is not square", a.rows, a.cols)));
    }
    if n == 0 {
        return Ok(HermitianEigen { values: Vec::new(), vectors: want_vectors.then(|| Mat::zeros(0, 0)) });
    }
    let mut w = a.clone();
    // Mirror the lower triangle so the reduction sees an exactly Hermitian matrix.
    for j in 0..n {
        w[(j, j)] = S::from_real(w[(j, j)].re());
        for i in j + 1..n {
            w[(j, i)] = w[(i, j)].conj();
        }
    }

    let two = S::Real::one() + S::Real::one();
    let mut reflectors: Vec<Vec<S>> = Vec::with_capacity(n.saturating_sub(2));
    let mut sub = vec![S::zero(); n.saturating_sub(1)];
    let mut p = vec![S::zero(); n];
    for k in 0..n.saturating_sub(1) {
        let m = n - k - 1;
        let x: Vec<S> = (0..m).map(|i| w[(k + 1 + i, k)]).collect();
        let xnorm = crate::scalar::norm(&x);
        let x0 = x[0];
        let x0abs = x0.abs();
        if m == 1 || xnorm == S::Real::zero() || xnorm == x0abs && (x.iter().skip(1).all(|&v| v == S::zero())) {
            sub[k] = x0;
            reflectors.push(Vec::new());
            continue;
        }
        let phase = if x0abs > S::Real::zero() { x0.scale(S::Real::one() / x0abs) } else { S::one() };
        let alpha = -phase.scale(xnorm);
        let mut v = x;
        v[0] -= alpha;
        let vn = crate::scalar::norm(&v);
        for vi in &mut v {
            *vi = vi.scale(S::Real::one() / vn);
        }
        // Trailing block update A -= 2 (v w^H + w v^H), w = A v - (v^H A v) v.
        let off = k + 1;
        for i in 0..m {
            let mut acc = S::zero();
            for j in 0..m {
                acc += w[(off + i, off + j)] * v[j];
            }
            p[i] = acc;
        }
        let kk = crate::scalar::dot(&v, &p[..m]).re();
        for i in 0..m {
            p[i] -= v[i].scale(kk);
        }
        for j in 0..m {
            let vj = v[j].conj().scale(two);
            let pj = p[j].conj().scale(two);
            for i in 0..m {
                let upd = v[i] * pj + p[i] * vj;
                w[(off + i, off + j)] -= upd;
            }
        }
        sub[k] = alpha;
        reflectors.push(v);
    }

    // Phase scaling to a real tridiagonal matrix.
    let mut diag: Vec<S::Real> = (0..n).map(|i| w[(i, i)].re()).collect();
    let mut phases = vec![S::one(); n];
    let mut e = vec![S::Real::zero(); n];
    for k in 0..n - 1 {
        let b = sub[k];
        let babs = b.abs();
        e[k] = babs;
        phases[k + 1] = if babs > S::Real::zero() { (b * phases[k]).scale(S::Real::one() / babs) } else { phases[k] };
    }

    let mut z = want_vectors.then(|| vec![S::Real::zero(); n * n]);
    if let Some(z) = z.as_mut() {
        for i in 0..n {
            z[i + n * i] = S::Real::one();
        }
    }
    tridiagonal_ql(&mut diag, &mut e, z.as_deref_mut())?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).expect("finite eigenvalues"));
    let values: Vec<S::Real> = order.iter().map(|&i| diag[i]).collect();

    let vectors = z.map(|z| {
        let mut out = Mat::zeros(n, n);
        for (c, &src) in order.iter().enumerate() {
            let col = out.col_mut(c);
            for i in 0..n {
                col[i] = phases[i].scale(z[i + n * src]);
            }
            // Apply H_0 H_1 ... H_{n-2} from the right end inwards.
            for k in (0..reflectors.len()).rev() {
                let v = &reflectors[k];
                if v.is_empty() {
                    continue;
                }
                let seg = &mut col[k + 1..];
                let s = crate::scalar::dot(v, seg).scale(two);
                for (x, &vi) in seg.iter_mut().zip(v) {
                    *x -= vi * s;
                }
            }
        }
        out
    });
    Ok(HermitianEigen { values, vectors })
}

/// Eigenvalues only, ascending. Panics if QL fails to converge, which does
/// not happen for finite input.
pub fn hermitian_eigenvalues<S: Scalar>(a: &Mat<S>) -> Vec<S::Real> {
    hermitian_eigen(a, false).expect("dense Hermitian eigensolver").values
}

/// Implicit QL with Wilkinson shifts on a real symmetric tridiagonal matrix.
/// `e[i]` is the coupling between `i` and `i + 1`; `z` (column-major `n x n`)
/// is updated with the rotations when present.
pub fn tridiagonal_ql<R: Real>(d: &mut [R], e: &mut [R], mut z: Option<&mut [R]>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = R::zero();
    let two = R::one() + R::one();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= R::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NotConverged {
                    requested: n,
                    converged: l,
                    iterations: iter,
                    partial: Box::default(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(R::one());
            g = d[m] - d[l] + e[l] / (g + if g >= R::zero() { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (R::one(), R::one(), R::zero());
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == R::zero() {
                    d[i + 1] -= p;
                    e[m] = R::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    let (lo, hi) = z.split_at_mut((i + 1) * n);
                    let zi = &mut lo[i * n..];
                    let zi1 = &mut hi[..n];
                    for k in 0..n {
                        let f = zi1[k];
                        zi1[k] = s * zi[k] + c * f;
                        zi[k] = c * zi[k] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = R::zero();
        }
    }
    Ok(())
}

/// Cholesky factor `L` (lower, `A = L L^H`) of a Hermitian positive definite
/// matrix; `None` if a pivot is not positive.
pub fn cholesky<S: Scalar>(a: &Mat<S>) -> Option<Mat<S>> {
    let n = a.rows;
    let mut l = Mat::<S>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re();
        for k in 0..j {
            d -= l[(j, k)].abs_sqr();
        }
        if !(d > S::Real::zero()) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = S::from_real(djj);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s.scale(S::Real::one() / djj);
        }
    }
    Some(l)
}

/// Solves `L x = b` in place for lower-triangular `L`.
pub fn solve_lower<S: Scalar>(l: &Mat<S>, b: &mut [S]) {
    for i in 0..l.rows {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s.scale(S::Real::one() / l[(i, i)].re());
    }
}

/// Solves `L^H x = b` in place for lower-triangular `L`.
pub fn solve_lower_adjoint<S: Scalar>(l: &Mat<S>, b: &mut [S]) {
    for i in (0..l.rows).rev() {
        let mut s = b[i];
        for k in i + 1..l.rows {
            s -= l[(k, i)].conj() * b[k];
        }
        b[i] = s.scale(S::Real::one() / l[(i, i)].re());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> Mat<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Mat::zeros(n, n);
        for j in 0..n {
            m[(j, j)] = Complex64::new(rng.random_range(-1.0..1.0), 0.0);
            for i in j + 1..n {
                let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn eigenpairs_satisfy_definition() {
        for n in [1, 2, 3, 7, 40] {
            let a = random_hermitian(n, n as u64);
            let eig = hermitian_eigen(&a, true).unwrap();
            let v = eig.vectors.unwrap();
            let av = a.mul(&v);
            for j in 0..n {
                for i in 0..n {
                    let r = av[(i, j)] - v[(i, j)] * eig.values[j];
                    assert!(r.norm() < 1e-11, "n={n} residual {}", r.norm());
                }
            }
            let g = v.adjoint_mul(&v);
            for j in 0..n {
                for i in 0..n {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((g[(i, j)] - expect).norm() < 1e-12);
                }
            }
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn cholesky_reconstructs_and_solves() {
        let b = random_hermitian(12, 8);
        let a = b.adjoint_mul(&b);
        let mut a = a;
        for i in 0..12 {
            a[(i, i)] += Complex64::new(0.5, 0.0);
        }
        let l = cholesky(&a).unwrap();
        let back = l.mul(&Mat::from_fn(12, 12, |i, j| l[(j, i)].conj()));
        for j in 0..12 {
            for i in 0..12 {
                assert!((back[(i, j)] - a[(i, j)]).norm() < 1e-12);
            }
        }
        let x: Vec<Complex64> = (0..12).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let mut rhs = vec![Complex64::zero(); 12];
        for i in 0..12 {
            for j in 0..12 {
                rhs[i] += a[(i, j)] * x[j];
            }
        }
        solve_lower(&l, &mut rhs);
        solve_lower_adjoint(&l, &mut rhs);
        for (u, v) in rhs.iter().zip(&x) {
            assert!((u - v).norm() < 1e-10);
        }
        assert!(cholesky(&Mat::<f64>::from_fn(2, 2, |i, j| if i == j { -1.0 } else { 0.0 })).is_none());
    }

    #[test]
    fn trace_is_preserved() {
        let a = random_hermitian(25, 5);
        let tr: f64 = (0..25).map(|i| a[(i, i)].re).sum();
        let s: f64 = hermitian_eigenvalues(&a).iter().sum();
        assert!((tr - s).abs() < 1e-12);
    }

    #[test]
    fn known_tridiagonal_spectrum() {
        // Dirichlet Laplacian: 2 - 2 cos(k pi / (n + 1)).
        let n = 30;
        let mut d = vec![2.0; n];
        let mut e = vec![-1.0; n];
        tridiagonal_ql(&mut d, &mut e, None).unwrap();
        d.sort_by(f64::total_cmp);
        for (k, &l) in d.iter().enumerate() {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert!((l - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn real_symmetric_in_single_precision() {
        let a = Mat::<f32>::from_fn(3, 3, |i, j| if i == j { 2.0 } else { -1.0 });
        let ev = hermitian_eigenvalues(&a);
        assert!((ev[0] - 0.0).abs() < 1e-5);
        assert!((ev[2] - 3.0).abs() < 1e-5);
    }
}
