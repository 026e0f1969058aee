//! Low-lying eigenvalues, eigenvalue counts and truncated heat traces.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::eigen::{self, EigenOptions};
use crate::linalg::ldl::Symbolic;
use crate::linalg::sparse::SparseHermitian;
use crate::operator::{assemble_hamiltonian, Gauge, MagneticGrid};
use crate::scalar::{Real, Scalar};

/// Eigenvalues above this many are only counted, never cross-checked by an
/// eigensolve in [`count_below_checked`].
pub const CROSS_CHECK_MAX: usize = 32;

/// Half-width, in magnetic lengths, of the box used to measure the free
/// lattice bottom. Edge effects there are far below double precision.
pub const BOTTOM_BOX_MAGNETIC_LENGTHS: f64 = 8.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample<R> {
    /// Ascending.
    pub eigenvalues: Vec<R>,
    pub residual_norms: Vec<R>,
    pub k_requested: usize,
    pub k_converged: usize,
    pub count_threshold: Option<R>,
    pub count: Option<usize>,
}

impl<R: Real> SpectrumSample<R> {
    pub fn from_values(eigenvalues: Vec<R>, residual_norms: Vec<R>) -> Self {
        let k = eigenvalues.len();
        Self { eigenvalues, residual_norms, k_requested: k, k_converged: k, count_threshold: None, count: None }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Every eigenvalue shifted by `-offset`.
    pub fn shifted(&self, offset: R) -> Self {
        let mut out = self.clone();
        for v in &mut out.eigenvalues {
            *v -= offset;
        }
        if let Some(e) = out.count_threshold.as_mut() {
            *e -= offset;
        }
        out
    }

    /// `index,eigenvalue,residual`
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,eigenvalue,residual")?;
        for (i, (v, r)) in self.eigenvalues.iter().zip(&self.residual_norms).enumerate() {
            writeln!(out, "{i},{:e},{:e}", v.as_f64(), r.as_f64())?;
        }
        Ok(())
    }
}

/// The `k` smallest eigenvalues with residuals `|Hv - lambda v| <= tol * |H|_est`.
pub fn lowest_eigenvalues<S: Scalar>(
    h: &SparseHermitian<S>,
    k: usize,
    opts: &EigenOptions,
) -> Result<SpectrumSample<S::Real>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let pairs = eigen::lowest(h, k, opts)?;
    Ok(SpectrumSample::from_values(pairs.values, pairs.residuals))
}

/// Reusable inertia counter: the symbolic analysis is shared by all
/// energies.
pub struct SpectralCounter<'a, S: Scalar> {
    h: &'a SparseHermitian<S>,
    symbolic: Arc<Symbolic>,
}

impl<'a, S: Scalar> SpectralCounter<'a, S> {
    pub fn new(h: &'a SparseHermitian<S>) -> Self {
        Self { h, symbolic: Symbolic::analyze(h) }
    }

    /// Number of eigenvalues below `e` from the inertia of `H - e`. A
    /// factorization breakdown is retried with `e` nudged by relative `1e-8`.
    pub fn count_below(&self, e: S::Real) -> Result<usize> {
        if !e.is_finite() {
            return Err(Error::InvalidParameter("energy must be finite".into()));
        }
        eigen::count_by_inertia(&self.symbolic, self.h, e)
    }

    /// Counts at each energy; the result is made nondecreasing only if the
    /// energies are ascending.
    pub fn count_many(&self, energies: &[S::Real]) -> Result<Vec<usize>> {
        energies.iter().map(|&e| self.count_below(e)).collect()
    }
}

/// Number of eigenvalues `<= e` (for `e` off the spectrum), by inertia.
pub fn count_below<S: Scalar>(h: &SparseHermitian<S>, e: S::Real) -> Result<usize> {
    SpectralCounter::new(h).count_below(e)
}

/// [`count_below`], plus an independent eigensolve when the count is at most
/// [`CROSS_CHECK_MAX`]. Disagreement is reported as an error.
pub fn count_below_checked<S: Scalar>(h: &SparseHermitian<S>, e: S::Real, opts: &EigenOptions) -> Result<usize> {
    let c = count_below(h, e)?;
    if c > CROSS_CHECK_MAX || c + 1 > h.dim() {
        return Ok(c);
    }
    let pairs = eigen::lowest(h, c + 1, opts)?;
    let by_solve = pairs.values.iter().filter(|&&v| v < e).count();
    if by_solve != c {
        return Err(Error::InvalidParameter(format!(
            "inertia count {c} and eigensolve count {by_solve} disagree at E = {e}"
        )));
    }
    Ok(c)
}

/// Truncated trace `sum_i exp(-t lambda_i)` with the remainder bound
/// `dimension * exp(-t e_cutoff)`.
pub fn heat_trace<R: Real>(spectrum: &SpectrumSample<R>, t: R, dimension: usize, e_cutoff: R) -> Result<(R, R)> {
    if !(t > R::zero()) {
        return Err(Error::InvalidParameter(format!("heat trace needs t > 0, got {t}")));
    }
    let value = spectrum.eigenvalues.iter().fold(R::zero(), |acc, &l| acc + (-t * l).exp());
    let bound = R::of(dimension as f64) * (-t * e_cutoff).exp();
    Ok((value, bound))
}

/// Which energy is called zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyReference {
    /// Energies exactly as assembled.
    Raw,
    /// Energies relative to the measured bottom of the free lattice operator,
    /// which removes the `O(h^2 B^2)` discretization offset of the lowest
    /// Landau level.
    #[default]
    LatticeBottom,
}

/// Lowest eigenvalue of the free operator on a box of
/// [`BOTTOM_BOX_MAGNETIC_LENGTHS`] magnetic lengths (never larger than
/// `max_half_width`) with the given spacing: the bulk lattice value of the
/// lowest Landau level. Zero for `b = 0`.
pub fn free_lattice_bottom<R: Real>(h: R, b: R, max_half_width: R, opts: &EigenOptions) -> Result<R>
where
    Complex<R>: Scalar<Real = R>,
{
    if b == R::zero() {
        return Ok(R::zero());
    }
    let ell = (R::one() / b).sqrt();
    let want = (R::of(BOTTOM_BOX_MAGNETIC_LENGTHS) * ell).min(max_half_width);
    // Whole number of cells so the node set matches a sub-box of the caller's grid.
    let m = (want / h).ceil() * h;
    let grid = MagneticGrid::new(m, h, b, Gauge::Symmetric)?;
    let op = assemble_hamiltonian(&grid, &vec![R::zero(); grid.dim()])?;
    let opts = EigenOptions { tol: opts.tol.min(1e-11), ..opts.clone() };
    Ok(eigen::lowest(&op, 1, &opts)?.values[0])
}

/// The offset to subtract under `reference`.
pub fn reference_offset<R: Real>(reference: EnergyReference, grid: &MagneticGrid<R>, opts: &EigenOptions) -> Result<R>
where
    Complex<R>: Scalar<Real = R>,
{
    match reference {
        EnergyReference::Raw => Ok(R::zero()),
        EnergyReference::LatticeBottom => free_lattice_bottom(grid.h, grid.b, grid.m, opts),
    }
}

/// Free-operator validation: bottom of the spectrum and the first excited
/// Landau cluster.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FreeSpectrumReport {
    pub b: f64,
    pub lowest: Vec<f64>,
    /// `lowest[0]`: the lattice value of the `n = 0` level.
    pub lambda0: f64,
    /// Eigenvalues nearest `B`.
    pub excited: Vec<f64>,
    /// Median of `excited`.
    pub excited_center: f64,
    /// `|excited_center - lambda0 - B| / B`.
    pub gap_relative_error: f64,
    /// `|excited_center - B| / B`.
    pub excited_relative_error: f64,
}

/// Lowest `k_low` eigenvalues and the `k_excited` eigenvalues nearest `B`
/// of the free operator on `grid`.
pub fn free_spectrum<R: Real>(
    grid: &MagneticGrid<R>,
    k_low: usize,
    k_excited: usize,
    opts: &EigenOptions,
) -> Result<FreeSpectrumReport>
where
    Complex<R>: Scalar<Real = R>,
{
    if !(grid.b > R::zero()) || k_low == 0 || k_excited == 0 {
        return Err(Error::InvalidParameter("free spectrum needs B > 0 and k_low, k_excited >= 1".into()));
    }
    let op = assemble_hamiltonian(grid, &vec![R::zero(); grid.dim()])?;
    let low = eigen::lowest(&op, k_low, opts)?;
    let ex = eigen::nearest(&op, grid.b, k_excited, opts)?;
    let lowest: Vec<f64> = low.values.iter().map(|v| v.as_f64()).collect();
    let mut excited: Vec<f64> = ex.values.iter().map(|v| v.as_f64()).collect();
    excited.sort_by(f64::total_cmp);
    let mid = excited.len() / 2;
    let excited_center = if excited.len() % 2 == 1 { excited[mid] } else { 0.5 * (excited[mid - 1] + excited[mid]) };
    let b = grid.b.as_f64();
    Ok(FreeSpectrumReport {
        b,
        lambda0: lowest[0],
        gap_relative_error: (excited_center - lowest[0] - b).abs() / b,
        excited_relative_error: (excited_center - b).abs() / b,
        lowest,
        excited,
        excited_center,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::hermitian_eigenvalues;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_operator(n: usize, seed: u64) -> SparseHermitian<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = (n as f64).sqrt() as usize;
        let diag: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut upper = Vec::new();
        for i in 0..n {
            for j in [i + 1, i + w] {
                if j < n {
                    upper.push((i, j, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))));
                }
            }
        }
        SparseHermitian::new(diag, upper).unwrap()
    }

    #[test]
    fn inertia_counts_match_dense_on_random_operator() {
        let a = random_operator(500, 3);
        let vals = hermitian_eigenvalues(&a.to_dense());
        let counter = SpectralCounter::new(&a);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let e: f64 = rng.random_range(-4.0..4.0);
            let dense = vals.iter().filter(|&&v| v <= e).count();
            assert_eq!(counter.count_below(e).unwrap(), dense);
        }
    }

    #[test]
    fn diagonal_operator_eigenvalues_are_sorted_diagonal() {
        let d = vec![3.0, -1.0, 2.5, 0.0, 7.0];
        let a = SparseHermitian::<f64>::new(d, vec![]).unwrap();
        let s = lowest_eigenvalues(&a, 3, &EigenOptions::default()).unwrap();
        assert_eq!(s.eigenvalues, vec![-1.0, 0.0, 2.5]);
        assert_eq!(count_below(&a, -2.0).unwrap(), 0);
        assert_eq!(count_below(&a, 2.6).unwrap(), 3);
    }

    #[test]
    fn dirichlet_laplacian_ground_state() {
        // [0, pi]^2 is the centred box of half-width pi/2.
        let m = std::f64::consts::FRAC_PI_2;
        let h = 2.0 * m / 64.0;
        let g = MagneticGrid::new(m, h, 0.0, Gauge::Symmetric).unwrap();
        let op = assemble_hamiltonian(&g, &vec![0.0; g.dim()]).unwrap();
        let s = lowest_eigenvalues(&op, 1, &EigenOptions::default()).unwrap();
        assert!((s.eigenvalues[0] - 1.0).abs() < 0.02, "{}", s.eigenvalues[0]);
    }

    #[test]
    fn checked_count_agrees_with_eigensolve() {
        let g = MagneticGrid::new(3.0, 0.1, 1.0, Gauge::Symmetric).unwrap();
        let op = assemble_hamiltonian(&g, &vec![0.0; g.dim()]).unwrap();
        for e in [-0.1, 0.01, 0.4, 0.9] {
            let c = count_below_checked(&op, e, &EigenOptions::default()).unwrap();
            assert_eq!(c, count_below(&op, e).unwrap());
        }
        assert_eq!(count_below(&op, -0.1).unwrap(), 0);
    }

    #[test]
    fn heat_trace_against_dense_full_trace() {
        let g = MagneticGrid::new(1.5, 0.1, 1.0, Gauge::Symmetric).unwrap();
        let op = assemble_hamiltonian(&g, &vec![0.0; g.dim()]).unwrap();
        let all = hermitian_eigenvalues(&op.to_dense());
        let k = 60;
        let s = SpectrumSample::from_values(all[..k].to_vec(), vec![0.0; k]);
        let t = 5.0;
        let full: f64 = all.iter().map(|l| (-t * l).exp()).sum();
        let (value, bound) = heat_trace(&s, t, op.dim(), all[k - 1]).unwrap();
        assert!((full - value) / full <= bound / full + 1e-15);
        assert!(value <= full);
    }

    #[test]
    fn empty_truncation() {
        let s = SpectrumSample::<f64>::from_values(vec![], vec![]);
        let (v, b) = heat_trace(&s, 2.0, 100, 1.0).unwrap();
        assert_eq!(v, 0.0);
        assert!((b - 100.0 * (-2.0f64).exp()).abs() < 1e-12);
        assert!(heat_trace(&s, 0.0, 100, 1.0).is_err());
    }

    #[test]
    fn heat_trace_decreasing_and_log_convex() {
        let s = SpectrumSample::from_values(vec![0.1, 0.5, 0.5, 1.2, 3.0], vec![0.0; 5]);
        let ts: Vec<f64> = (1..40).map(|i| 0.25 * i as f64).collect();
        let logs: Vec<f64> = ts.iter().map(|&t| heat_trace(&s, t, 5, 3.0).unwrap().0.ln()).collect();
        for w in logs.windows(3) {
            assert!(w[1] < w[0]);
            assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-12);
        }
    }

    #[test]
    fn potential_raises_counts() {
        let g = MagneticGrid::new(3.0, 0.1, 1.0, Gauge::Symmetric).unwrap();
        let free = assemble_hamiltonian(&g, &vec![0.0; g.dim()]).unwrap();
        let bump: Vec<f64> = g.points().iter().map(|p: &[f64; 2]| (-(p[0] * p[0] + p[1] * p[1])).exp()).collect();
        let pert = assemble_hamiltonian(&g, &bump).unwrap();
        for e in [0.001, 0.05, 0.5, 1.2] {
            assert!(count_below(&pert, e).unwrap() <= count_below(&free, e).unwrap());
        }
    }

    #[test]
    fn lattice_bottom_is_small_and_negative() {
        let b = free_lattice_bottom(0.1, 1.0, 100.0, &EigenOptions::default()).unwrap();
        assert!(b < 0.0 && b > -1e-3, "{b}");
        assert_eq!(free_lattice_bottom(0.1, 0.0, 10.0, &EigenOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn csv_export() {
        let s = SpectrumSample::from_values(vec![0.5, 1.0], vec![1e-12, 2e-12]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("index,eigenvalue,residual"));
        assert_eq!(text.lines().nth(1), Some("0,5e-1,1e-12"));
    }
}
