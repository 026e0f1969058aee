//! Multifrontal `LDL^H` factorization of sparse Hermitian matrices.
//!
//! The elimination order comes from a nested-dissection separator tree; every
//! tree node is eliminated as one dense front. No pivoting is performed, so
//! the factorization of `A - sigma I` exists whenever all leading principal
//! minors in elimination order are nonsingular. A pivot that is tiny relative
//! to the matrix scale is reported as [`Error::Breakdown`]; the caller decides
//! whether to perturb the shift and retry.
//!
//! The number of negative pivots equals the number of eigenvalues below the
//! shift (Sylvester's law of inertia).

use std::sync::Arc;

use num_traits::{Float, One, Zero};

use crate::error::{Error, Result};
use crate::linalg::ordering::{graph_nested_dissection, grid_nested_dissection, SeparatorTree};
use crate::linalg::sparse::SparseHermitian;
use crate::scalar::{Real, Scalar};

/// Pattern-only analysis, reusable across shifts and across matrices with the
/// same sparsity structure.
#[derive(Debug)]
pub struct Symbolic {
    tree: SeparatorTree,
    /// For each tree node: elimination positions of the rows below its own
    /// block (the front's update rows), ascending.
    structs: Vec<Vec<usize>>,
    dim: usize,
    nnz_factor: usize,
}

impl Symbolic {
    pub fn analyze<S: Scalar>(a: &SparseHermitian<S>) -> Arc<Self> {
        let tree = match a.coords() {
            Some(c) => grid_nested_dissection(c),
            None => {
                let (rp, ci) = a.pattern();
                graph_nested_dissection(rp, ci)
            }
        };
        let dim = a.dim();
        let mut structs: Vec<Vec<usize>> = Vec::with_capacity(tree.nodes.len());
        let mut mark = vec![usize::MAX; dim];
        let mut nnz_factor = 0usize;
        for (id, node) in tree.nodes.iter().enumerate() {
            let first = tree.first[id];
            let last = first + node.vars.len();
            let mut rows = Vec::new();
            for &v in &node.vars {
                for &u in a.neighbors(v) {
                    let q = tree.iperm[u];
                    if q >= last && mark[q] != id {
                        mark[q] = id;
                        rows.push(q);
                    }
                }
            }
            for &c in &node.children {
                for &q in &structs[c] {
                    if q >= last && mark[q] != id {
                        mark[q] = id;
                        rows.push(q);
                    }
                }
            }
            rows.sort_unstable();
            let k = node.vars.len();
            nnz_factor += k * (k + 1) / 2 + k * rows.len();
            structs.push(rows);
        }
        Arc::new(Self { tree, structs, dim, nnz_factor })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entries of the unit lower factor including the diagonal.
    pub fn factor_nnz(&self) -> usize {
        self.nnz_factor
    }

    pub fn tree(&self) -> &SeparatorTree {
        &self.tree
    }
}

/// Dense panel kept for solves: the front's first `k` columns, `f x k`
/// column-major, unit lower triangular on top.
#[derive(Clone, Debug)]
struct Panel<S> {
    f: usize,
    k: usize,
    l: Vec<S>,
}

#[derive(Clone, Debug, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub negative: usize,
    pub positive: usize,
}

/// Numeric factorization `P (A - shift I) P^T = L D L^H`.
#[derive(Debug)]
pub struct LdlFactor<S: Scalar> {
    symbolic: Arc<Symbolic>,
    shift: S::Real,
    d: Vec<S::Real>,
    panels: Option<Vec<Panel<S>>>,
    inertia: Inertia,
    min_abs_pivot: S::Real,
}

impl<S: Scalar> LdlFactor<S> {
    /// Factorizes `a - shift I`. With `keep_factors == false` only the pivots
    /// (and hence the inertia) are retained.
    pub fn factorize(
        symbolic: &Arc<Symbolic>,
        a: &SparseHermitian<S>,
        shift: S::Real,
        keep_factors: bool,
    ) -> Result<Self> {
        if a.dim() != symbolic.dim {
            return Err(Error::DimensionMismatch(format!(
                "matrix dimension {} vs analysed dimension {}",
                a.dim(),
                symbolic.dim
            )));
        }
        let tree = &symbolic.tree;
        let scale = a.norm_bound().max(shift.abs()).max(S::Real::min_positive_value());
        let breakdown_tol = S::Real::epsilon() * S::Real::of(64.0) * scale;

        let n_nodes = tree.nodes.len();
        let mut updates: Vec<Option<Vec<S>>> = (0..n_nodes).map(|_| None).collect();
        let mut panels = keep_factors.then(|| Vec::with_capacity(n_nodes));
        let mut d = vec![S::Real::zero(); symbolic.dim];
        let mut local = vec![usize::MAX; symbolic.dim];
        let mut inertia = Inertia { negative: 0, positive: 0 };
        let mut min_abs_pivot = S::Real::infinity();

        for (id, node) in tree.nodes.iter().enumerate() {
            let first = tree.first[id];
            let k = node.vars.len();
            let rows = &symbolic.structs[id];
            let b = rows.len();
            let f = k + b;
            for i in 0..k {
                local[first + i] = i;
            }
            for (i, &q) in rows.iter().enumerate() {
                local[q] = k + i;
            }

            let mut front = vec![S::zero(); f * f];
            // Original entries whose earlier-eliminated index is in this node.
            for (i, &v) in node.vars.iter().enumerate() {
                let p = first + i;
                front[i + f * i] += S::from_real(a.diagonal()[v] - shift);
                for (u, val) in a.row(v) {
                    let q = tree.iperm[u];
                    if q > p {
                        // lower entry (q, p) = A[u, v] = conj(A[v, u])
                        front[local[q] + f * i] += val.conj();
                    }
                }
            }
            // Extend-add the children's update matrices.
            for &c in &node.children {
                let upd = updates[c].take().expect("child update consumed twice");
                let crow = &symbolic.structs[c];
                let bc = crow.len();
                for cc in 0..bc {
                    let lc = local[crow[cc]];
                    let col = &upd[cc * bc..(cc + 1) * bc];
                    let dst = lc * f;
                    for ii in cc..bc {
                        front[local[crow[ii]] + dst] += col[ii];
                    }
                }
            }

            // Partial factorization of the first k columns.
            for j in 0..k {
                let djj = front[j + f * j].re();
                let mag = djj.abs();
                if !djj.is_finite() || mag <= breakdown_tol {
                    return Err(Error::Breakdown { pivot: first + j, magnitude: mag.as_f64(), shift: shift.as_f64() });
                }
                min_abs_pivot = min_abs_pivot.min(mag);
                if djj < S::Real::zero() {
                    inertia.negative += 1;
                } else {
                    inertia.positive += 1;
                }
                d[first + j] = djj;
                let inv = S::Real::one() / djj;
                let (head, tail) = front.split_at_mut(f * (j + 1));
                let colj = &mut head[f * j..f * j + f];
                colj[j] = S::one();
                for x in &mut colj[j + 1..f] {
                    *x = x.scale(inv);
                }
                // Update the remaining own columns j+1..k (rows >= column).
                for c in j + 1..k {
                    let s = colj[c].conj().scale(djj);
                    if s == S::zero() {
                        continue;
                    }
                    let dst = &mut tail[f * (c - j - 1)..f * (c - j)];
                    for i in c..f {
                        dst[i] -= colj[i] * s;
                    }
                }
            }

            // Schur complement on the update block: F22 -= L21 D L21^H.
            if b > 0 {
                let mut upd = vec![S::zero(); b * b];
                for cc in 0..b {
                    let src = &front[(k + cc) * f + k..(k + cc) * f + f];
                    upd[cc * b + cc..cc * b + b].copy_from_slice(&src[cc..b]);
                }
                for p in 0..k {
                    let lp = &front[p * f + k..p * f + f];
                    let dp = d[first + p];
                    for cc in 0..b {
                        let s = lp[cc].conj().scale(dp);
                        if s == S::zero() {
                            continue;
                        }
                        let dst = &mut upd[cc * b..cc * b + b];
                        for i in cc..b {
                            dst[i] -= lp[i] * s;
                        }
                    }
                }
                updates[id] = Some(upd);
            }
            if let Some(p) = panels.as_mut() {
                front.truncate(f * k);
                p.push(Panel { f, k, l: front });
            }
        }

        Ok(Self { symbolic: symbolic.clone(), shift, d, panels, inertia, min_abs_pivot })
    }

    /// Convenience: analyse and factorize in one go.
    pub fn new(a: &SparseHermitian<S>, shift: S::Real, keep_factors: bool) -> Result<Self> {
        let sym = Symbolic::analyze(a);
        Self::factorize(&sym, a, shift, keep_factors)
    }

    pub fn inertia(&self) -> Inertia {
        self.inertia
    }

    pub fn shift(&self) -> S::Real {
        self.shift
    }

    pub fn min_abs_pivot(&self) -> S::Real {
        self.min_abs_pivot
    }

    pub fn pivots(&self) -> &[S::Real] {
        &self.d
    }

    /// Solves `(A - shift I) x = b` in place.
    pub fn solve_in_place(&self, b: &mut [S]) -> Result<()> {
        let panels = self
            .panels
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("factorization was computed without keeping factors".into()))?;
        let sym = &self.symbolic;
        if b.len() != sym.dim {
            return Err(Error::DimensionMismatch(format!("rhs length {} vs {}", b.len(), sym.dim)));
        }
        let tree = &sym.tree;
        let mut y: Vec<S> = tree.perm.iter().map(|&v| b[v]).collect();
        let mut buf: Vec<S> = Vec::new();

        // Forward: L z = y
        for (id, panel) in panels.iter().enumerate() {
            let first = tree.first[id];
            let (f, k) = (panel.f, panel.k);
            let rows = &sym.structs[id];
            for j in 0..k {
                let yj = y[first + j];
                if yj == S::zero() {
                    continue;
                }
                let col = &panel.l[j * f..j * f + f];
                for i in j + 1..k {
                    y[first + i] -= col[i] * yj;
                }
                for (r, &q) in rows.iter().enumerate() {
                    y[q] -= col[k + r] * yj;
                }
            }
        }
        // Diagonal
        for (yi, &di) in y.iter_mut().zip(&self.d) {
            *yi = yi.scale(S::Real::one() / di);
        }
        // Backward: L^H x = z
        for (id, panel) in panels.iter().enumerate().rev() {
            let first = tree.first[id];
            let (f, k) = (panel.f, panel.k);
            let rows = &sym.structs[id];
            buf.clear();
            buf.extend(rows.iter().map(|&q| y[q]));
            for j in (0..k).rev() {
                let col = &panel.l[j * f..j * f + f];
                let mut acc = y[first + j];
                for i in j + 1..k {
                    acc -= col[i].conj() * y[first + i];
                }
                for (r, &yq) in buf.iter().enumerate() {
                    acc -= col[k + r].conj() * yq;
                }
                y[first + j] = acc;
            }
        }
        for (p, &v) in tree.perm.iter().enumerate() {
            b[v] = y[p];
        }
        Ok(())
    }
}

/// Number of eigenvalues of `a` strictly below `shift`, from the inertia of
/// `a - shift I`.
pub fn inertia_count<S: Scalar>(symbolic: &Arc<Symbolic>, a: &SparseHermitian<S>, shift: S::Real) -> Result<usize> {
    LdlFactor::factorize(symbolic, a, shift, false).map(|f| f.inertia().negative)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::hermitian_eigenvalues;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid_operator(w: i32, h: i32, seed: u64, with_coords: bool) -> SparseHermitian<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idx = |i: i32, j: i32| (i + w * j) as usize;
        let n = (w * h) as usize;
        let diag: Vec<f64> = (0..n).map(|_| 4.0 + rng.random_range(-1.0..1.0)).collect();
        let mut up = Vec::new();
        let mut coords = Vec::new();
        for j in 0..h {
            for i in 0..w {
                coords.push([i, j]);
                let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                if i + 1 < w {
                    up.push((idx(i, j), idx(i + 1, j), Complex64::from_polar(-1.0, th)));
                }
                if j + 1 < h {
                    up.push((idx(i, j), idx(i, j + 1), Complex64::from_polar(-1.0, 0.3 * th)));
                }
            }
        }
        let a = SparseHermitian::new(diag, up).unwrap();
        if with_coords {
            a.with_coords(coords).unwrap()
        } else {
            a
        }
    }

    #[test]
    fn solve_matches_matvec() {
        for with_coords in [true, false] {
            let a = random_grid_operator(23, 17, 3, with_coords);
            let f = LdlFactor::new(&a, -1.5, true).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let x: Vec<Complex64> = (0..a.dim())
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let mut b = vec![Complex64::zero(); a.dim()];
            a.matvec(&x, &mut b);
            for (bi, xi) in b.iter_mut().zip(&x) {
                *bi += xi * 1.5;
            }
            f.solve_in_place(&mut b).unwrap();
            let err: f64 = b.iter().zip(&x).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
            assert!(err < 1e-10, "solve error {err}");
        }
    }

    #[test]
    fn inertia_matches_dense_eigenvalues() {
        let a = random_grid_operator(15, 14, 11, true);
        let ev = hermitian_eigenvalues(&a.to_dense());
        let sym = Symbolic::analyze(&a);
        for shift in [-0.5, 1.0, 2.2, 3.3, 4.0, 5.1, 7.5, 9.0] {
            let expected = ev.iter().filter(|&&l| l < shift).count();
            assert_eq!(inertia_count(&sym, &a, shift).unwrap(), expected, "shift {shift}");
        }
    }

    #[test]
    fn real_spd_factorization_has_no_negative_pivots() {
        // 1D Laplacian, no coordinates.
        let n = 200;
        let up: Vec<(usize, usize, f64)> = (0..n - 1).map(|i| (i, i + 1, -1.0)).collect();
        let a = SparseHermitian::new(vec![2.0; n], up).unwrap();
        let f = LdlFactor::new(&a, 0.0, true).unwrap();
        assert_eq!(f.inertia(), Inertia { negative: 0, positive: n });
        let mut b = vec![1.0; n];
        f.solve_in_place(&mut b).unwrap();
        // Exact solution of -u'' = 1 with u_0 = u_{n+1} = 0 on the unit lattice.
        for (i, &x) in b.iter().enumerate() {
            let t = (i + 1) as f64;
            let exact = t * ((n + 1) as f64 - t) / 2.0;
            assert!((x - exact).abs() < 1e-8 * exact.max(1.0));
        }
    }

    #[test]
    fn exact_eigenvalue_shift_reports_breakdown() {
        // diag(1, 2): shifting by 1 makes the first pivot exactly zero.
        let a = SparseHermitian::<f64>::new(vec![1.0, 2.0], vec![]).unwrap();
        let err = LdlFactor::new(&a, 1.0, false).unwrap_err();
        assert!(matches!(err, Error::Breakdown { .. }));
    }

    #[test]
    fn single_precision_factorization() {
        let n = 50;
        let up: Vec<(usize, usize, f32)> = (0..n - 1).map(|i| (i, i + 1, -1.0)).collect();
        let a = SparseHermitian::new(vec![2.5f32; n], up).unwrap();
        let f = LdlFactor::new(&a, 0.0f32, true).unwrap();
        let x: Vec<f32> = (0..n).map(|i| (i as f32 * 0.1).sin()).collect();
        let mut b = vec![0.0f32; n];
        a.matvec(&x, &mut b);
        f.solve_in_place(&mut b).unwrap();
        let err = b.iter().zip(&x).map(|(u, v)| (u - v).abs()).fold(0.0f32, f32::max);
        assert!(err < 1e-4);
    }
}
