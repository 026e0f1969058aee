//! Finite-difference magnetic Hamiltonian `1/2 [(-i grad - A)^2 - B] + V` on
//! a Dirichlet grid, with the vector potential entering through link phases.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::eigen::{self, EigenOptions};
use crate::linalg::sparse::SparseHermitian;
use crate::scalar::{Real, Scalar};

/// Largest admissible flux per plaquette `B h^2`.
pub const MAX_PLAQUETTE_FLUX: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    /// `A = (B/2) (-x2, x1)`.
    Symmetric,
    /// `A = (-B x2, 0)`.
    Landau,
}

/// Interior nodes `x_i = -(n+1)h/2 + (i+1)h`, `i < n`, of a centred square
/// grid with `n = floor(2m/h) - 1`. The Dirichlet boundary sits at
/// `+-(n+1)h/2`, which equals `m` when `2m/h` is an integer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagneticGrid<R> {
    pub m: R,
    pub h: R,
    pub b: R,
    pub gauge: Gauge,
    n: usize,
}

impl<R: Real> MagneticGrid<R> {
    /// `b = 0` is allowed and gives the plain Dirichlet Laplacian.
    pub fn new(m: R, h: R, b: R, gauge: Gauge) -> Result<Self> {
        if !(m > R::zero() && h > R::zero()) || !m.is_finite() || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("grid needs m > 0 and h > 0, got m={m}, h={h}")));
        }
        if !(b >= R::zero()) || !b.is_finite() {
            return Err(Error::InvalidParameter(format!("field strength must be nonnegative, got {b}")));
        }
        if b * h * h >= R::of(MAX_PLAQUETTE_FLUX) {
            return Err(Error::InvalidParameter(format!(
                "flux per plaquette B h^2 = {} must stay below {MAX_PLAQUETTE_FLUX}",
                b * h * h
            )));
        }
        // The small slack keeps 2m/h = integer from rounding down.
        let cells = (R::of(2.0) * m / h + R::of(1e-9)).floor().to_usize().unwrap_or(0);
        if cells < 2 {
            return Err(Error::EmptyDomain);
        }
        Ok(Self { m, h, b, gauge, n: cells - 1 })
    }

    /// Interior points per side.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n * self.n
    }

    /// Half-width of the Dirichlet square actually represented.
    pub fn effective_half_width(&self) -> R {
        R::of((self.n + 1) as f64) * self.h / R::of(2.0)
    }

    /// Area of the Dirichlet square actually represented.
    pub fn area(&self) -> R {
        let s = R::of(2.0) * self.effective_half_width();
        s * s
    }

    pub fn coord(&self, i: usize) -> R {
        -self.effective_half_width() + R::of((i + 1) as f64) * self.h
    }

    pub fn point(&self, i: usize, j: usize) -> [R; 2] {
        [self.coord(i), self.coord(j)]
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.n * j
    }

    /// Node coordinates in index order (`i` fastest).
    pub fn points(&self) -> Vec<[R; 2]> {
        let mut out = Vec::with_capacity(self.dim());
        for j in 0..self.n {
            for i in 0..self.n {
                out.push(self.point(i, j));
            }
        }
        out
    }

    pub fn with_gauge(&self, gauge: Gauge) -> Self {
        Self { gauge, ..*self }
    }

    /// Magnetic length `B^{-1/2}`.
    pub fn magnetic_length(&self) -> R {
        self.b.sqrt().recip()
    }

    /// `int_x^y A . dl` by the midpoint rule (exact for linear gauges).
    pub fn link_integral(&self, x: [R; 2], y: [R; 2]) -> R {
        let mid = [(x[0] + y[0]) / R::of(2.0), (x[1] + y[1]) / R::of(2.0)];
        let a = self.vector_potential(mid);
        a[0] * (y[0] - x[0]) + a[1] * (y[1] - x[1])
    }

    pub fn vector_potential(&self, x: [R; 2]) -> [R; 2] {
        let b = self.b;
        match self.gauge {
            Gauge::Symmetric => [-b / R::of(2.0) * x[1], b / R::of(2.0) * x[0]],
            Gauge::Landau => [-b * x[1], R::zero()],
        }
    }

    /// Counter-clockwise sum of link integrals around the plaquette with lower
    /// left corner at node `(i, j)`.
    pub fn plaquette_phase(&self, i: usize, j: usize) -> R {
        let p00 = self.point(i, j);
        let h = self.h;
        let p10 = [p00[0] + h, p00[1]];
        let p11 = [p00[0] + h, p00[1] + h];
        let p01 = [p00[0], p00[1] + h];
        self.link_integral(p00, p10)
            + self.link_integral(p10, p11)
            + self.link_integral(p11, p01)
            + self.link_integral(p01, p00)
    }
}

/// Assembles the Hamiltonian on all interior nodes. `potential[k]` is the
/// value at node `k` in index order.
pub fn assemble_hamiltonian<R: Real>(grid: &MagneticGrid<R>, potential: &[R]) -> Result<SparseHermitian<Complex<R>>>
where
    Complex<R>: Scalar<Real = R>,
{
    assemble_masked(grid, None, potential)
}

/// Assembles the Hamiltonian on the nodes where `mask` is true; all other
/// nodes are treated as Dirichlet (deleted). `potential` is indexed like the
/// full grid. Unknowns are numbered by increasing grid index.
pub fn assemble_masked<R: Real>(
    grid: &MagneticGrid<R>,
    mask: Option<&[bool]>,
    potential: &[R],
) -> Result<SparseHermitian<Complex<R>>>
where
    Complex<R>: Scalar<Real = R>,
{
    let n = grid.n;
    let full = grid.dim();
    if potential.len() != full {
        return Err(Error::DimensionMismatch(format!("potential has {} values for {full} nodes", potential.len())));
    }
    if let Some(m) = mask {
        if m.len() != full {
            return Err(Error::DimensionMismatch(format!("mask has {} entries for {full} nodes", m.len())));
        }
    }
    if let Some(k) = potential.iter().position(|v| !(*v >= R::zero()) || !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "potential must be finite and nonnegative, node {k} has {}",
            potential[k]
        )));
    }
    let keep = |k: usize| mask.is_none_or(|m| m[k]);
    let mut number = vec![usize::MAX; full];
    let mut coords = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let k = grid.index(i, j);
            if keep(k) {
                number[k] = coords.len();
                coords.push([i as i32, j as i32]);
            }
        }
    }
    if coords.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let h2 = grid.h * grid.h;
    let hop = R::one() / (R::of(2.0) * h2);
    let base = R::of(2.0) / h2 - grid.b / R::of(2.0);
    let mut diagonal = Vec::with_capacity(coords.len());
    let mut upper = Vec::with_capacity(2 * coords.len());
    for j in 0..n {
        for i in 0..n {
            let k = grid.index(i, j);
            if number[k] == usize::MAX {
                continue;
            }
            diagonal.push(base + potential[k]);
            let x = grid.point(i, j);
            let mut link = |k2: usize, y: [R; 2]| {
                if number[k2] != usize::MAX {
                    let theta = grid.link_integral(x, y);
                    upper.push((number[k], number[k2], Complex::new(-hop * theta.cos(), hop * theta.sin())));
                }
            };
            if i + 1 < n {
                link(grid.index(i + 1, j), grid.point(i + 1, j));
            }
            if j + 1 < n {
                link(grid.index(i, j + 1), grid.point(i, j + 1));
            }
        }
    }
    SparseHermitian::new(diagonal, upper)?.with_coords(coords)
}

/// Maximum relative difference of the `k` lowest eigenvalues between the
/// symmetric-gauge and Landau-gauge assemblies of the same grid and potential.
pub fn gauge_transform_check<R: Real>(
    grid: &MagneticGrid<R>,
    potential: &[R],
    k: usize,
    opts: &EigenOptions,
) -> Result<f64>
where
    Complex<R>: Scalar<Real = R>,
{
    if k == 0 {
        return Ok(0.0);
    }
    let hs = assemble_hamiltonian(&grid.with_gauge(Gauge::Symmetric), potential)?;
    let hl = assemble_hamiltonian(&grid.with_gauge(Gauge::Landau), potential)?;
    let a = eigen::lowest(&hs, k, opts)?;
    let b = eigen::lowest(&hl, k, opts)?;
    let floor = R::epsilon().as_f64() * hs.norm_bound().as_f64();
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| {
            let (x, y) = (x.as_f64(), y.as_f64());
            (x - y).abs() / x.abs().max(y.abs()).max(floor)
        })
        .fold(0.0, f64::max))
}

/// Outcome of the lowest-Landau-level multiplicity check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LandauDegeneracy {
    /// Number of eigenvalues in `[-B/4, B/4]` on the whole box.
    pub count_in_window: usize,
    /// Weight of those eigenstates inside the inner half-box
    /// `[-s/2, s/2]^2`: the bulk multiplicity.
    pub bulk_count: f64,
    /// `(B / 2 pi) * s^2`, the bulk density times the inner area.
    pub expected: f64,
    pub relative_error: f64,
}

/// Boxes narrower than this many magnetic lengths are edge dominated and
/// skipped.
pub const LANDAU_CHECK_MIN_HALF_WIDTH: f64 = 4.0;

/// Bulk multiplicity of the lowest Landau level of the free operator,
/// measured on the inner half-box. `None` for boxes too small to have a bulk.
pub fn landau_degeneracy_check<R: Real>(grid: &MagneticGrid<R>, opts: &EigenOptions) -> Result<Option<LandauDegeneracy>>
where
    Complex<R>: Scalar<Real = R>,
{
    let b = grid.b;
    if !(b > R::zero()) {
        return Err(Error::InvalidParameter("the Landau check needs B > 0".into()));
    }
    let s = grid.effective_half_width();
    if s < R::of(LANDAU_CHECK_MIN_HALF_WIDTH) * grid.magnetic_length() {
        return Ok(None);
    }
    let h = assemble_hamiltonian(grid, &vec![R::zero(); grid.dim()])?;
    let quarter = b / R::of(4.0);
    let opts = EigenOptions { want_vectors: true, ..opts.clone() };
    let pairs = eigen::in_interval(&h, -quarter, quarter, &opts)?;
    let inner = s / R::of(2.0);
    let mut bulk = 0.0;
    for v in &pairs.vectors {
        for j in 0..grid.n {
            for i in 0..grid.n {
                let p = grid.point(i, j);
                if p[0].abs() <= inner && p[1].abs() <= inner {
                    bulk += v[grid.index(i, j)].abs_sqr().as_f64();
                }
            }
        }
    }
    let expected = b.as_f64() / (2.0 * std::f64::consts::PI) * (2.0 * inner.as_f64()).powi(2);
    Ok(Some(LandauDegeneracy {
        count_in_window: pairs.values.len(),
        bulk_count: bulk,
        expected,
        relative_error: (bulk - expected).abs() / expected,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::hermitian_eigenvalues;
    use proptest::prelude::*;

    #[test]
    fn grid_geometry() {
        let g = MagneticGrid::<f64>::new(12.0, 0.1, 1.0, Gauge::Symmetric).unwrap();
        assert_eq!(g.n(), 239);
        assert!((g.effective_half_width() - 12.0).abs() < 1e-12);
        assert!((g.coord(0) + 11.9).abs() < 1e-12);
        assert!((g.coord(238) - 11.9).abs() < 1e-12);
        assert!(MagneticGrid::<f64>::new(12.0, 1.0, 0.5, Gauge::Symmetric).is_err());
        assert!(MagneticGrid::<f64>::new(0.05, 0.1, 1.0, Gauge::Landau).is_err());
    }

    #[test]
    fn plaquette_phase_equals_flux() {
        for gauge in [Gauge::Symmetric, Gauge::Landau] {
            let g = MagneticGrid::<f64>::new(3.0, 0.25, 1.3, gauge).unwrap();
            for j in 0..g.n() - 1 {
                for i in 0..g.n() - 1 {
                    assert!((g.plaquette_phase(i, j) - 1.3 * 0.0625).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn hopping_modulus_and_hermiticity() {
        let g = MagneticGrid::<f64>::new(2.0, 0.25, 1.0, Gauge::Symmetric).unwrap();
        let h = assemble_hamiltonian(&g, &vec![0.0; g.dim()]).unwrap();
        for &(_, _, v) in h.upper_entries() {
            assert!((v.norm() - 1.0 / (2.0 * 0.0625)).abs() < 1e-12);
        }
        assert_eq!(h.hermiticity_defect(), 0.0);
        assert!((h.diagonal()[0] - (2.0 / 0.0625 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_potential() {
        let g = MagneticGrid::<f64>::new(1.0, 0.25, 1.0, Gauge::Symmetric).unwrap();
        let mut v = vec![0.0; g.dim()];
        v[3] = -1.0;
        assert!(assemble_hamiltonian(&g, &v).is_err());
        assert!(assemble_hamiltonian(&g, &[0.0; 2]).is_err());
    }

    #[test]
    fn masked_assembly_deletes_nodes() {
        let g = MagneticGrid::<f64>::new(1.0, 0.25, 1.0, Gauge::Landau).unwrap();
        let mask: Vec<bool> = (0..g.dim()).map(|k| k % 3 != 0).collect();
        let h = assemble_masked(&g, Some(&mask), &vec![0.0; g.dim()]).unwrap();
        assert_eq!(h.dim(), mask.iter().filter(|&&b| b).count());
        assert!(matches!(
            assemble_masked(&g, Some(&vec![false; g.dim()]), &vec![0.0; g.dim()]),
            Err(Error::EmptyDomain)
        ));
    }

    #[test]
    fn dirichlet_laplacian_matches_separable_spectrum() {
        // B = 0 on [-pi/2, pi/2]^2: 1/2 (j^2 + k^2) in the continuum; the
        // five-point stencil gives (2/h^2) (sin^2(j h/2) + sin^2(k h/2)).
        let h = std::f64::consts::PI / 16.0;
        let g = MagneticGrid::<f64>::new(std::f64::consts::FRAC_PI_2, h, 0.0, Gauge::Symmetric).unwrap();
        assert_eq!(g.n(), 15);
        let op = assemble_hamiltonian(&g, &vec![0.0; g.dim()]).unwrap();
        let ev = hermitian_eigenvalues(&op.to_dense());
        let lam = |j: f64| (2.0 / (h * h)) * (j * h / 2.0).sin().powi(2);
        assert!((ev[0] - (lam(1.0) + lam(1.0))).abs() < 1e-10);
        assert!((ev[1] - (lam(1.0) + lam(2.0))).abs() < 1e-10);
        assert!((ev[0] - 1.0).abs() < 0.02);
    }

    #[test]
    fn gauge_choice_does_not_change_spectrum_small() {
        let g = MagneticGrid::<f64>::new(2.5, 0.125, 1.0, Gauge::Symmetric).unwrap();
        let v: Vec<f64> = g.points().iter().map(|p| (-(p[0] - 0.3).powi(2) - p[1].powi(2)).exp()).collect();
        let d = gauge_transform_check(&g, &v, 5, &EigenOptions::default()).unwrap();
        assert!(d <= 1e-8, "{d}");
        assert_eq!(gauge_transform_check(&g, &v, 0, &EigenOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn free_spectrum_bounded_below() {
        let g = MagneticGrid::<f64>::new(3.0, 0.2, 1.0, Gauge::Symmetric).unwrap();
        let h = assemble_hamiltonian(&g, &vec![0.0; g.dim()]).unwrap();
        let ev = hermitian_eigenvalues(&h.to_dense());
        assert!(ev[0] >= -0.02);
    }

    #[test]
    fn tiny_box_skips_landau_check() {
        let g = MagneticGrid::<f64>::new(2.0, 0.2, 1.0, Gauge::Symmetric).unwrap();
        assert_eq!(landau_degeneracy_check(&g, &EigenOptions::default()).unwrap(), None);
    }

    #[test]
    fn coordinate_export_format() {
        let g = MagneticGrid::<f64>::new(0.75, 0.5, 1.0, Gauge::Symmetric).unwrap();
        let h = assemble_hamiltonian(&g, &vec![0.0; g.dim()]).unwrap();
        let mut out = Vec::new();
        h.write_coordinate(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        // 4 nodes: 4 diagonal + 4 links.
        assert_eq!(text.lines().count(), 8);
        let first: Vec<&str> = text.lines().next().unwrap().split(' ').collect();
        assert_eq!(first[..2], ["0", "0"]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn nonnegative_potential_raises_bottom(seed in 0u64..500, amp in 0.0f64..2.0) {
            let g = MagneticGrid::<f64>::new(1.5, 0.25, 1.0, Gauge::Symmetric).unwrap();
            let free = assemble_hamiltonian(&g, &vec![0.0; g.dim()]).unwrap();
            let v: Vec<f64> = (0..g.dim())
                .map(|k| amp * (((k as u64).wrapping_mul(2654435761).wrapping_add(seed)) % 97) as f64 / 97.0)
                .collect();
            let pert = assemble_hamiltonian(&g, &v).unwrap();
            let e0 = hermitian_eigenvalues(&free.to_dense())[0];
            let e1 = hermitian_eigenvalues(&pert.to_dense())[0];
            prop_assert!(e1 >= e0 - 1e-12);
        }

        #[test]
        fn sub_box_bottom_not_lower(b in 0.2f64..2.0) {
            let g = MagneticGrid::<f64>::new(2.0, 0.25, b, Gauge::Symmetric).unwrap();
            let full = assemble_hamiltonian(&g, &vec![0.0; g.dim()]).unwrap();
            let mask: Vec<bool> = g.points().iter().map(|p| p[0].abs() < 1.2 && p[1].abs() < 1.2).collect();
            let sub = assemble_masked(&g, Some(&mask), &vec![0.0; g.dim()]).unwrap();
            let e_full = hermitian_eigenvalues(&full.to_dense())[0];
            let e_sub = hermitian_eigenvalues(&sub.to_dense())[0];
            prop_assert!(e_sub >= e_full - 1e-12);
        }

        #[test]
        fn hermitian_for_any_field(b in 0.0f64..7.9, gauge in prop_oneof![Just(Gauge::Symmetric), Just(Gauge::Landau)]) {
            let g = MagneticGrid::<f64>::new(1.0, 0.25, b, gauge).unwrap();
            let h = assemble_hamiltonian(&g, &vec![0.1; g.dim()]).unwrap();
            prop_assert_eq!(h.hermiticity_defect(), 0.0);
            let d = h.to_dense();
            prop_assert_eq!(d.hermiticity_defect(), 0.0);
        }
    }
}
