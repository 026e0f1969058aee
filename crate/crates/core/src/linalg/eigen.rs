//! Extremal and interior eigenpairs of sparse Hermitian matrices.
//!
//! The sparse path is a shift-invert block Krylov method: each sweep builds
//! the basis `orth[X, Op X, Op^2 X]` with `Op = (A - sigma)^{-1}`, performs
//! Rayleigh-Ritz with `A` itself and keeps the block of Ritz vectors nearest
//! the target. Blocks handle the highly degenerate Landau clusters that defeat
//! single-vector Lanczos. Convergence is judged on true residuals
//! `|A v - theta v| <= tol * |A|_est`.
//!
//! Many eigenvalues are computed by spectrum slicing: inertia counts split
//! the wanted range into windows, each solved around its midpoint.

use std::sync::Arc;

use num_traits::{Float, One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, PartialSpectrum, Result};
use crate::linalg::dense::{cholesky, hermitian_eigen, solve_lower, solve_lower_adjoint, Mat};
use crate::linalg::ldl::{LdlFactor, Symbolic};
use crate::linalg::sparse::SparseHermitian;
use crate::scalar::{dot, norm, Real, Scalar};

/// Above this many wanted eigenvalues the solver slices the spectrum.
const DIRECT_MAX: usize = 48;
/// Target number of eigenvalues per slice.
const SLICE_WIDTH: usize = 36;

#[derive(Clone, Debug)]
pub struct EigenOptions {
    /// Relative residual tolerance, scaled by the matrix norm bound.
    pub tol: f64,
    pub max_iter: usize,
    /// Seed of the random starting block.
    pub seed: u64,
    /// Matrices of at most this dimension are diagonalized densely.
    pub dense_threshold: usize,
    pub want_vectors: bool,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200, seed: 0x5eed_1a4d, dense_threshold: 600, want_vectors: false }
    }
}

/// Converged eigenpairs in ascending eigenvalue order.
#[derive(Clone, Debug)]
pub struct Eigenpairs<S: Scalar> {
    pub values: Vec<S::Real>,
    /// Unit eigenvectors; empty unless requested.
    pub vectors: Vec<Vec<S>>,
    pub residuals: Vec<S::Real>,
    pub iterations: usize,
}

impl<S: Scalar> Eigenpairs<S> {
    fn empty() -> Self {
        Self { values: Vec::new(), vectors: Vec::new(), residuals: Vec::new(), iterations: 0 }
    }
}

/// Factorizes `a - sigma`, nudging the shift by relative `1e-8` steps when
/// the factorization breaks down on a (near-)singular pivot.
pub fn factor_with_retry<S: Scalar>(
    sym: &Arc<Symbolic>,
    a: &SparseHermitian<S>,
    sigma: S::Real,
    keep: bool,
) -> Result<LdlFactor<S>> {
    let scale = a.norm_bound().max(S::Real::min_positive_value());
    let d = S::Real::of(1e-8) * sigma.abs().max(S::Real::of(1e-6) * scale);
    let mut last = None;
    for k in [0.0, 1.0, -1.0, 3.0, -3.0, 10.0] {
        match LdlFactor::factorize(sym, a, sigma + d * S::Real::of(k), keep) {
            Ok(f) => return Ok(f),
            Err(e @ Error::Breakdown { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Number of eigenvalues strictly below `e`, by inertia (shift perturbed on
/// breakdown).
pub fn count_by_inertia<S: Scalar>(sym: &Arc<Symbolic>, a: &SparseHermitian<S>, e: S::Real) -> Result<usize> {
    factor_with_retry(sym, a, e, false).map(|f| f.inertia().negative)
}

/// The `k` smallest eigenvalues (and optionally eigenvectors).
pub fn lowest<S: Scalar>(a: &SparseHermitian<S>, k: usize, opts: &EigenOptions) -> Result<Eigenpairs<S>> {
    let n = a.dim();
    if k == 0 {
        return Ok(Eigenpairs::empty());
    }
    if k > n {
        return Err(Error::InvalidParameter(format!("requested {k} eigenvalues of a {n}-dimensional matrix")));
    }
    if n <= opts.dense_threshold {
        return dense_select(a, opts, |vals| (0..k.min(vals.len())).collect());
    }
    let sym = Symbolic::analyze(a);
    if k <= DIRECT_MAX {
        return block_solve(&sym, a, Target::Lowest, k, opts);
    }
    sliced_lowest(&sym, a, k, opts)
}

/// The `k` eigenvalues nearest `sigma`, returned in ascending order.
pub fn nearest<S: Scalar>(
    a: &SparseHermitian<S>,
    sigma: S::Real,
    k: usize,
    opts: &EigenOptions,
) -> Result<Eigenpairs<S>> {
    let n = a.dim();
    if k == 0 {
        return Ok(Eigenpairs::empty());
    }
    if k > n {
        return Err(Error::InvalidParameter(format!("requested {k} eigenvalues of a {n}-dimensional matrix")));
    }
    if n <= opts.dense_threshold {
        return dense_select(a, opts, |vals| {
            let mut idx: Vec<usize> = (0..vals.len()).collect();
            idx.sort_by(|&i, &j| (vals[i] - sigma).abs().partial_cmp(&(vals[j] - sigma).abs()).unwrap());
            idx.truncate(k);
            idx.sort_unstable();
            idx
        });
    }
    let sym = Symbolic::analyze(a);
    block_solve(&sym, a, Target::Near(sigma), k, opts)
}

/// All eigenvalues in `[lo, hi)`, located by inertia and solved slice by slice.
pub fn in_interval<S: Scalar>(
    a: &SparseHermitian<S>,
    lo: S::Real,
    hi: S::Real,
    opts: &EigenOptions,
) -> Result<Eigenpairs<S>> {
    if !(lo < hi) {
        return Err(Error::InvalidParameter("empty energy interval".into()));
    }
    if a.dim() <= opts.dense_threshold {
        return dense_select(a, opts, |vals| (0..vals.len()).filter(|&i| vals[i] >= lo && vals[i] < hi).collect());
    }
    let sym = Symbolic::analyze(a);
    let c_lo = count_by_inertia(&sym, a, lo)?;
    let c_hi = count_by_inertia(&sym, a, hi)?;
    solve_slices(&sym, a, lo, c_lo, hi, c_hi, usize::MAX, opts)
}

fn dense_select<S: Scalar>(
    a: &SparseHermitian<S>,
    opts: &EigenOptions,
    pick: impl FnOnce(&[S::Real]) -> Vec<usize>,
) -> Result<Eigenpairs<S>> {
    let eig = hermitian_eigen(&a.to_dense(), true)?;
    let z = eig.vectors.expect("vectors requested");
    let idx = pick(&eig.values);
    let n = a.dim();
    let mut out = Eigenpairs::empty();
    let mut av = vec![S::zero(); n];
    for &i in &idx {
        let v = z.col(i).to_vec();
        a.matvec(&v, &mut av);
        let theta = eig.values[i];
        let r = av.iter().zip(&v).map(|(&x, &y)| (x - y.scale(theta)).abs_sqr()).sum::<S::Real>().sqrt();
        out.values.push(theta);
        out.residuals.push(r);
        if opts.want_vectors {
            out.vectors.push(v);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
enum Target<R> {
    Lowest,
    Near(R),
}

fn random_block<S: Scalar>(n: usize, p: usize, seed: u64) -> Vec<Vec<S>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..p)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    S::from_parts(S::Real::of(re), S::Real::of(im))
                })
                .collect()
        })
        .collect()
}

/// Orthonormalizes `cols` in place with classical Gram-Schmidt applied
/// twice, dropping columns that become numerically dependent.
fn orthonormalize<S: Scalar>(cols: Vec<Vec<S>>) -> Vec<Vec<S>> {
    let mut basis: Vec<Vec<S>> = Vec::with_capacity(cols.len());
    let drop_tol = S::Real::of(1e-10);
    for mut v in cols {
        let n0 = norm(&v);
        if n0 == S::Real::zero() || !n0.is_finite() {
            continue;
        }
        for _ in 0..2 {
            let coef: Vec<S> = basis.iter().map(|q| dot(q, &v)).collect();
            for (q, c) in basis.iter().zip(coef) {
                for (x, &qi) in v.iter_mut().zip(q) {
                    *x -= qi * c;
                }
            }
        }
        let n1 = norm(&v);
        if n1 <= drop_tol * n0 {
            continue;
        }
        let inv = S::Real::one() / n1;
        for x in &mut v {
            *x = x.scale(inv);
        }
        basis.push(v);
    }
    basis
}

fn block_solve<S: Scalar>(
    sym: &Arc<Symbolic>,
    a: &SparseHermitian<S>,
    target: Target<S::Real>,
    k: usize,
    opts: &EigenOptions,
) -> Result<Eigenpairs<S>> {
    let n = a.dim();
    let guard = (k / 2).max(8);
    let p = (k + guard).min(n);
    let anorm = a.norm_bound().max(S::Real::min_positive_value());
    let tol = S::Real::of(opts.tol) * anorm;

    let mut sigma = match target {
        Target::Lowest => a.gershgorin_lower() - S::Real::of(1e-3) * anorm,
        Target::Near(s) => s,
    };
    let mut factor = factor_with_retry(sym, a, sigma, true)?;
    let mut x = orthonormalize(random_block::<S>(n, p, opts.seed));
    let mut best: Option<(Vec<S::Real>, Vec<S::Real>)> = None;
    let mut prev_lo: Option<S::Real> = None;

    for iter in 1..=opts.max_iter {
        // Basis [X, Op X, Op^2 X].
        let mut cols = x.clone();
        let mut prev = x.clone();
        for _ in 0..2 {
            let mut next = Vec::with_capacity(prev.len());
            for v in &prev {
                let mut w = v.clone();
                factor.solve_in_place(&mut w)?;
                next.push(w);
            }
            cols.extend(next.iter().cloned());
            prev = next;
        }
        let basis = orthonormalize(cols);
        let m = basis.len();
        let mut hb: Vec<Vec<S>> = Vec::with_capacity(m);
        for v in &basis {
            let mut w = vec![S::zero(); n];
            a.matvec(v, &mut w);
            hb.push(w);
        }
        let t = Mat::from_fn(m, m, |i, j| dot(&basis[i], &hb[j]));
        let coeffs = match target {
            Target::Lowest => {
                let eig = hermitian_eigen(&t, true)?;
                let z = eig.vectors.expect("vectors requested");
                (0..p.min(m)).map(|c| z.col(c).to_vec()).collect::<Vec<_>>()
            }
            Target::Near(s) => harmonic_coefficients(&basis, &hb, &t, s, p.min(m))?,
        };

        let mut pairs: Vec<(S::Real, S::Real, Vec<S>)> = Vec::with_capacity(coeffs.len());
        for y in &coeffs {
            let mut v = vec![S::zero(); n];
            let mut hv = vec![S::zero(); n];
            for (j, &yj) in y.iter().enumerate() {
                if yj == S::zero() {
                    continue;
                }
                for (i, (vi, hvi)) in v.iter_mut().zip(hv.iter_mut()).enumerate() {
                    *vi += basis[j][i] * yj;
                    *hvi += hb[j][i] * yj;
                }
            }
            let vn = norm(&v);
            let inv = S::Real::one() / vn;
            for (vi, hvi) in v.iter_mut().zip(hv.iter_mut()) {
                *vi = vi.scale(inv);
                *hvi = hvi.scale(inv);
            }
            let theta = dot(&v, &hv).re();
            let r = hv.iter().zip(&v).map(|(&h, &x)| (h - x.scale(theta)).abs_sqr()).sum::<S::Real>().sqrt();
            pairs.push((theta, r, v));
        }
        pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite Ritz values"));
        let thetas: Vec<S::Real> = pairs.iter().map(|q| q.0).collect();
        let resid: Vec<S::Real> = pairs.iter().map(|q| q.1).collect();
        let new_x: Vec<Vec<S>> = pairs.into_iter().map(|q| q.2).collect();

        // The k wanted pairs among the kept block.
        let wanted: Vec<usize> = match target {
            Target::Lowest => (0..k.min(thetas.len())).collect(),
            Target::Near(s) => {
                let mut idx: Vec<usize> = (0..thetas.len()).collect();
                idx.sort_by(|&i, &j| (thetas[i] - s).abs().partial_cmp(&(thetas[j] - s).abs()).unwrap());
                idx.truncate(k);
                idx.sort_unstable();
                idx
            }
        };
        let done = wanted.len() == k && wanted.iter().all(|&i| resid[i] <= tol);
        best = Some((wanted.iter().map(|&i| thetas[i]).collect(), wanted.iter().map(|&i| resid[i]).collect()));
        if done {
            let mut out = Eigenpairs::empty();
            out.iterations = iter;
            match target {
                Target::Lowest => {
                    for &i in &wanted {
                        out.values.push(thetas[i]);
                        out.residuals.push(resid[i]);
                        if opts.want_vectors {
                            out.vectors.push(new_x[i].clone());
                        }
                    }
                }
                Target::Near(_) => {
                    // Harmonic Ritz vectors are only nearly orthogonal; a
                    // final Rayleigh-Ritz on their span restores that.
                    let span = orthonormalize(wanted.iter().map(|&i| new_x[i].clone()).collect());
                    let (vals, res, vecs) = rayleigh_ritz(a, &span)?;
                    if vals.len() != k || res.iter().any(|&r| r > tol) {
                        x = orthonormalize(new_x);
                        continue;
                    }
                    out.values = vals;
                    out.residuals = res;
                    if opts.want_vectors {
                        out.vectors = vecs;
                    }
                }
            }
            return Ok(out);
        }

        // Move the pole just below the current bottom estimate. The last
        // drop of the lowest Ritz value guesses its remaining error; inertia
        // certifies that no eigenvalue lies below the pole, widening the gap
        // otherwise.
        if matches!(target, Target::Lowest) {
            let lo = thetas[0];
            let floor = S::Real::of(1e-11) * anorm;
            let mut delta = match prev_lo {
                Some(p) if p > lo => (p - lo).max(floor),
                Some(_) => floor,
                None => (S::Real::of(1e-3) * (lo.abs() + anorm)).max(floor),
            };
            prev_lo = Some(lo);
            while lo - delta > sigma {
                match factor_with_retry(sym, a, lo - delta, true) {
                    Ok(f) if f.inertia().negative == 0 => {
                        sigma = lo - delta;
                        factor = f;
                        break;
                    }
                    Ok(_) => delta *= S::Real::of(10.0),
                    Err(e) if e.is_numerical() => delta *= S::Real::of(10.0),
                    Err(e) => return Err(e),
                }
            }
        }
        x = orthonormalize(new_x);
        if x.len() < p.min(n) {
            // Refill a collapsed block with fresh random directions.
            let extra = random_block::<S>(n, p - x.len(), opts.seed.wrapping_add(iter as u64));
            x.extend(extra);
            x = orthonormalize(x);
        }
    }

    let (vals, res) = best.unwrap_or_default();
    let converged: Vec<bool> = res.iter().map(|&r| r <= tol).collect();
    Err(Error::NotConverged {
        requested: k,
        converged: converged.iter().filter(|&&c| c).count(),
        iterations: opts.max_iter,
        partial: Box::new(PartialSpectrum {
            eigenvalues: vals.iter().map(|v| v.as_f64()).collect(),
            residual_norms: res.iter().map(|v| v.as_f64()).collect(),
            converged,
        }),
    })
}

/// Harmonic Ritz extraction around `sigma`: solves
/// `G^H G y = nu (T - sigma) y` with `G = (A - sigma) Q` and returns the
/// coefficient vectors of the `p` pairs with smallest `|nu|`. Unlike
/// standard Rayleigh-Ritz this does not produce spurious interior values.
fn harmonic_coefficients<S: Scalar>(
    basis: &[Vec<S>],
    hb: &[Vec<S>],
    t: &Mat<S>,
    sigma: S::Real,
    p: usize,
) -> Result<Vec<Vec<S>>> {
    let m = basis.len();
    let g: Vec<Vec<S>> =
        basis.iter().zip(hb).map(|(q, h)| h.iter().zip(q).map(|(&hi, &qi)| hi - qi.scale(sigma)).collect()).collect();
    let mut gg = Mat::from_fn(m, m, |i, j| dot(&g[i], &g[j]));
    let trace: S::Real = (0..m).map(|i| gg[(i, i)].re()).sum();
    let jitter = S::Real::epsilon() * S::Real::of(16.0) * trace.max(S::Real::min_positive_value());
    for i in 0..m {
        gg[(i, i)] += S::from_real(jitter);
    }
    let l = cholesky(&gg).ok_or_else(|| Error::Breakdown { pivot: 0, magnitude: 0.0, shift: sigma.as_f64() })?;
    // C = L^{-1} (T - sigma) L^{-H}
    let mut w = Mat::from_fn(m, m, |i, j| if i == j { t[(i, j)] - S::from_real(sigma) } else { t[(i, j)] });
    for j in 0..m {
        solve_lower(&l, w.col_mut(j));
    }
    let mut c = Mat::from_fn(m, m, |i, j| w[(j, i)].conj());
    for j in 0..m {
        solve_lower(&l, c.col_mut(j));
    }
    let eig = hermitian_eigen(&c, true)?;
    let z = eig.vectors.expect("vectors requested");
    // Eigenvalues of C are 1/nu: largest magnitude is nearest sigma.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.values[j].abs().partial_cmp(&eig.values[i].abs()).expect("finite"));
    order.truncate(p);
    Ok(order
        .into_iter()
        .map(|c| {
            let mut y = z.col(c).to_vec();
            solve_lower_adjoint(&l, &mut y);
            y
        })
        .collect())
}

/// Standard Rayleigh-Ritz of `a` on an orthonormal basis: ascending values,
/// residual norms and unit Ritz vectors.
#[allow(clippy::type_complexity)]
fn rayleigh_ritz<S: Scalar>(
    a: &SparseHermitian<S>,
    basis: &[Vec<S>],
) -> Result<(Vec<S::Real>, Vec<S::Real>, Vec<Vec<S>>)> {
    let n = a.dim();
    let m = basis.len();
    let hb: Vec<Vec<S>> = basis
        .iter()
        .map(|v| {
            let mut w = vec![S::zero(); n];
            a.matvec(v, &mut w);
            w
        })
        .collect();
    let t = Mat::from_fn(m, m, |i, j| dot(&basis[i], &hb[j]));
    let eig = hermitian_eigen(&t, true)?;
    let z = eig.vectors.expect("vectors requested");
    let mut res = Vec::with_capacity(m);
    let mut vecs = Vec::with_capacity(m);
    for c in 0..m {
        let mut v = vec![S::zero(); n];
        let mut hv = vec![S::zero(); n];
        for (j, &zj) in z.col(c).iter().enumerate() {
            for i in 0..n {
                v[i] += basis[j][i] * zj;
                hv[i] += hb[j][i] * zj;
            }
        }
        let theta = eig.values[c];
        res.push(hv.iter().zip(&v).map(|(&h, &x)| (h - x.scale(theta)).abs_sqr()).sum::<S::Real>().sqrt());
        vecs.push(v);
    }
    Ok((eig.values, res, vecs))
}

fn sliced_lowest<S: Scalar>(
    sym: &Arc<Symbolic>,
    a: &SparseHermitian<S>,
    k: usize,
    opts: &EigenOptions,
) -> Result<Eigenpairs<S>> {
    let anorm = a.norm_bound().max(S::Real::min_positive_value());
    let lo = a.gershgorin_lower() - S::Real::of(1e-3) * anorm;
    let top = a.gershgorin_upper() + S::Real::of(1e-3) * anorm;
    let n = a.dim();
    let mut width = (top - lo) * S::Real::of(k as f64 / n as f64);
    let mut hi;
    let mut c_hi;
    loop {
        hi = (lo + width).min(top);
        c_hi = count_by_inertia(sym, a, hi)?;
        if c_hi >= k || hi >= top {
            break;
        }
        width *= S::Real::of(2.0);
    }
    let mut out = solve_slices(sym, a, lo, 0, hi, c_hi, k, opts)?;
    out.values.truncate(k);
    out.residuals.truncate(k);
    out.vectors.truncate(k);
    Ok(out)
}

/// Solves the windows of `[lo, hi)` in ascending order, stopping once
/// `limit` eigenvalues are collected.
#[allow(clippy::too_many_arguments)]
fn solve_slices<S: Scalar>(
    sym: &Arc<Symbolic>,
    a: &SparseHermitian<S>,
    lo: S::Real,
    c_lo: usize,
    hi: S::Real,
    c_hi: usize,
    limit: usize,
    opts: &EigenOptions,
) -> Result<Eigenpairs<S>> {
    let anorm = a.norm_bound().max(S::Real::min_positive_value());
    let min_width = S::Real::of(1e-9) * anorm;
    // Bisect until every window holds at most SLICE_WIDTH eigenvalues (or is
    // too narrow to split, as for a degenerate cluster).
    let mut stack = vec![(lo, c_lo, hi, c_hi)];
    let mut windows = Vec::new();
    while let Some((a0, c0, a1, c1)) = stack.pop() {
        if c1 == c0 {
            continue;
        }
        if c1 - c0 <= SLICE_WIDTH || a1 - a0 <= min_width {
            windows.push((a0, c0, a1, c1));
            continue;
        }
        let mid = (a0 + a1) * S::Real::of(0.5);
        let cm = count_by_inertia(sym, a, mid)?;
        // Push the upper half first so the lower half is processed first.
        stack.push((mid, cm, a1, c1));
        stack.push((a0, c0, mid, cm));
    }
    windows.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

    let mut out = Eigenpairs::empty();
    for (a0, c0, a1, c1) in windows {
        if out.values.len() >= limit {
            break;
        }
        let centre = (a0 + a1) * S::Real::of(0.5);
        let part = block_solve(sym, a, Target::Near(centre), c1 - c0, opts)?;
        out.iterations = out.iterations.max(part.iterations);
        out.values.extend(part.values);
        out.residuals.extend(part.residuals);
        out.vectors.extend(part.vectors);
    }
    Ok(out)
}
