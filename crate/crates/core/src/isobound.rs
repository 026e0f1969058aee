//! Lower bound on the magnetic Dirichlet ground state energy of a region with
//! the smooth boundary potential, via symmetric rearrangement.
//!
//! The chain reduces any region `Omega` to the disc `D` of equal area, the
//! boundary potential to the radial comparison potential `W_eta`, and the
//! constant-field operator on radial functions to the oscillator
//! `H_osc = 1/2 [-Delta + B^2 |x|^2 / 4 - B]` with kernel `phi_0`.
//! Only the constant-field gauge `a(r) = B r / 2` is implemented; every other
//! radial gauge obeying the flux constraint gives a larger infimum.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex;
use quadrature::double_exponential;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greens::{Obstacle, ObstacleDomain};
use crate::linalg::eigen::{self, EigenOptions};
use crate::linalg::sparse::SparseHermitian;
use crate::operator::{assemble_hamiltonian, assemble_masked, Gauge, MagneticGrid};
use crate::potential::{Region, Square};
use crate::scalar::Real;

/// Integration stops at `|y - x| = 6 L`; the neglected mass is `e^-36`.
const CUTOFF_U: f64 = 36.0;
/// Absolute target per quadrature piece.
const PIECE_TOL: f64 = 1e-13;
/// Documented accuracy of [`smoothed_boundary_potential`].
pub const SMOOTHED_POTENTIAL_ERROR: f64 = 1e-8;
/// Magnetic lengths of free box used for the lattice bottom.
const BOTTOM_BOX_MAGNETIC_LENGTHS: f64 = 8.0;

/// A radial profile stored on annuli of equal area `h^2`: `values[k]` is the
/// value on `k h^2 <= pi r^2 < (k + 1) h^2`, sampled at `radii[k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile<R> {
    pub radii: Vec<R>,
    pub values: Vec<R>,
    /// Radius of the disc with the same node area.
    pub r_omega: R,
    pub h: R,
}

impl<R: Real> RadialProfile<R> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at radius `r`; zero outside `r_omega`.
    pub fn evaluate(&self, r: R) -> R {
        let k = (R::PI() * r * r / (self.h * self.h)).floor().to_usize().unwrap_or(usize::MAX);
        self.values.get(k).copied().unwrap_or(R::zero())
    }

    /// `(sum h^2 |v|^p)^(1/p)`.
    pub fn lp_norm(&self, p: R) -> R {
        lp_norm(&self.values, self.h, p)
    }

    /// Area of `{f* >= c}`.
    pub fn level_area(&self, c: R) -> R {
        level_area(&self.values, self.h, c)
    }
}

/// `(sum h^2 |v|^p)^(1/p)` over grid values.
pub fn lp_norm<R: Real>(values: &[R], h: R, p: R) -> R {
    let s: R = values.iter().map(|v| v.abs().powf(p)).sum();
    (s * h * h).powf(R::one() / p)
}

/// Node count of `{f >= c}` times `h^2`.
pub fn level_area<R: Real>(values: &[R], h: R, c: R) -> R {
    R::of(values.iter().filter(|&&v| v >= c).count() as f64) * h * h
}

/// Symmetric decreasing rearrangement of nonnegative node values on a grid
/// of spacing `h`. Values are sorted (stable, so ties keep their order) and
/// laid out on concentric annuli of area `h^2` each, so every super-level set
/// keeps its node area.
pub fn symmetric_rearrangement<R: Real>(values: &[R], h: R) -> Result<RadialProfile<R>> {
    if !(h > R::zero()) {
        return Err(Error::InvalidParameter(format!("spacing must be positive, got {h}")));
    }
    if let Some(k) = values.iter().position(|v| !(*v >= R::zero()) || !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("rearrangement needs finite f >= 0, node {k} has {}", values[k])));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let cell = h * h / R::PI();
    let radii = (0..sorted.len()).map(|k| (cell * (R::of(k as f64) + R::of(0.5))).sqrt()).collect();
    let r_omega = (cell * R::of(sorted.len() as f64)).sqrt();
    Ok(RadialProfile { radii, values: sorted, r_omega, h })
}

/// Rearrangement of a grid function on the interior nodes of `domain`;
/// values off the mask are ignored.
pub fn rearrange_on_domain<R: Real>(domain: &ObstacleDomain<R>, f: &[R]) -> Result<RadialProfile<R>> {
    let mask = domain.mask();
    if f.len() != mask.len() {
        return Err(Error::DimensionMismatch(format!("{} values for {} nodes", f.len(), mask.len())));
    }
    let inside: Vec<R> = f.iter().zip(&mask).filter(|(_, &m)| m).map(|(v, _)| *v).collect();
    symmetric_rearrangement(&inside, domain.h)
}

/// Union of arcs on the unit circle, as `(start, end)` angle pairs.
struct Arcs(Vec<(f64, f64)>);

impl Arcs {
    fn full(&mut self) {
        self.0.push((0.0, 2.0 * PI));
    }

    /// Angles with `cos(theta - phi) >= c`.
    fn cap(&mut self, phi: f64, c: f64) {
        if c <= -1.0 {
            self.full();
        } else if c < 1.0 {
            let beta = c.acos();
            self.0.push((phi - beta, phi + beta));
        }
    }

    /// Angles with `cos(theta - phi) <= c`.
    fn anticap(&mut self, phi: f64, c: f64) {
        if c >= 1.0 {
            self.full();
        } else if c > -1.0 {
            let beta = c.acos();
            self.0.push((phi + beta, phi + 2.0 * PI - beta));
        }
    }

    /// Fraction of the circle covered.
    fn fraction(mut self) -> f64 {
        let tau = 2.0 * PI;
        let mut pieces = Vec::with_capacity(self.0.len() + 2);
        for (a, b) in self.0.drain(..) {
            let len = b - a;
            if len >= tau {
                return 1.0;
            }
            let s = a.rem_euclid(tau);
            if s + len > tau {
                pieces.push((s, tau));
                pieces.push((0.0, s + len - tau));
            } else {
                pieces.push((s, s + len));
            }
        }
        pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut covered = 0.0;
        let mut cur: Option<(f64, f64)> = None;
        for (a, b) in pieces {
            match cur {
                Some((ca, cb)) if a <= cb => cur = Some((ca, cb.max(b))),
                Some((ca, cb)) => {
                    covered += cb - ca;
                    cur = Some((a, b));
                }
                None => cur = Some((a, b)),
            }
        }
        if let Some((ca, cb)) = cur {
            covered += cb - ca;
        }
        (covered / tau).min(1.0)
    }
}

/// The region in `f64`, for quadrature.
struct Geometry {
    s: f64,
    obstacles: Vec<Obstacle<f64>>,
}

impl Geometry {
    fn of<R: Real>(domain: &ObstacleDomain<R>) -> Self {
        let p = |c: [R; 2]| [c[0].as_f64(), c[1].as_f64()];
        let obstacles = domain
            .obstacles
            .iter()
            .map(|o| match *o {
                Obstacle::Disc { center, radius } => Obstacle::Disc { center: p(center), radius: radius.as_f64() },
                Obstacle::Annulus { center, r_in, r_out } => {
                    Obstacle::Annulus { center: p(center), r_in: r_in.as_f64(), r_out: r_out.as_f64() }
                }
                Obstacle::Exterior { center, radius } => {
                    Obstacle::Exterior { center: p(center), radius: radius.as_f64() }
                }
            })
            .collect();
        Self { s: domain.half_width.as_f64(), obstacles }
    }

    /// Fraction of the circle `|y - x| = rho` lying outside the region.
    fn outside_fraction(&self, x: [f64; 2], rho: f64) -> f64 {
        if rho <= 0.0 {
            let inside = x[0].abs() < self.s && x[1].abs() < self.s && !self.obstacles.iter().any(|o| o.removes(x));
            return if inside { 0.0 } else { 1.0 };
        }
        let mut arcs = Arcs(Vec::with_capacity(4 + 2 * self.obstacles.len()));
        let s = self.s;
        arcs.cap(0.0, (s - x[0]) / rho);
        arcs.cap(PI, (s + x[0]) / rho);
        arcs.cap(0.5 * PI, (s - x[1]) / rho);
        arcs.cap(-0.5 * PI, (s + x[1]) / rho);
        for o in &self.obstacles {
            let (c, radii): ([f64; 2], [f64; 2]) = match *o {
                Obstacle::Disc { center, radius } | Obstacle::Exterior { center, radius } => (center, [radius, radius]),
                Obstacle::Annulus { center, r_in, r_out } => (center, [r_in, r_out]),
            };
            let (dx, dy) = (c[0] - x[0], c[1] - x[1]);
            let d = dx.hypot(dy);
            let phi = dy.atan2(dx);
            // cos(theta - phi) >= this  <=>  |y - c| <= a.
            let thr = |a: f64| {
                if d == 0.0 {
                    if rho <= a {
                        -2.0
                    } else {
                        2.0
                    }
                } else {
                    (rho * rho + d * d - a * a) / (2.0 * rho * d)
                }
            };
            match *o {
                Obstacle::Disc { radius, .. } => arcs.cap(phi, thr(radius)),
                Obstacle::Exterior { radius, .. } => arcs.anticap(phi, thr(radius)),
                Obstacle::Annulus { .. } => {
                    let (t_in, t_out) = (thr(radii[0]), thr(radii[1]));
                    if t_out >= 1.0 {
                        continue;
                    }
                    let b_out = if t_out <= -1.0 { PI } else { t_out.acos() };
                    let b_in = if t_in >= 1.0 {
                        0.0
                    } else if t_in <= -1.0 {
                        PI
                    } else {
                        t_in.acos()
                    };
                    if b_in < b_out {
                        arcs.0.push((phi - b_out, phi - b_in));
                        arcs.0.push((phi + b_in, phi + b_out));
                    }
                }
            }
        }
        arcs.fraction()
    }

    /// Radii about `x` at which the outside fraction is not smooth.
    fn critical_radii(&self, x: [f64; 2]) -> Vec<f64> {
        let s = self.s;
        let mut out = vec![(s - x[0]).abs(), (s + x[0]).abs(), (s - x[1]).abs(), (s + x[1]).abs()];
        for cx in [-s, s] {
            for cy in [-s, s] {
                out.push((cx - x[0]).hypot(cy - x[1]));
            }
        }
        for o in &self.obstacles {
            let (c, a, b) = match *o {
                Obstacle::Disc { center, radius } | Obstacle::Exterior { center, radius } => (center, radius, radius),
                Obstacle::Annulus { center, r_in, r_out } => (center, r_in, r_out),
            };
            let d = (c[0] - x[0]).hypot(c[1] - x[1]);
            out.extend([(d - a).abs(), d + a, (d - b).abs(), d + b]);
        }
        out
    }
}

/// `V^_Omega(x) = (1 / pi L^2) int_{Omega^c} exp(-|x - y|^2 / L^2) dy`.
///
/// In polar coordinates about `x` this is `int_0^inf e^-u F(L sqrt(u)) du`
/// with `F(rho)` the exact fraction of the circle of radius `rho` outside
/// `Omega`. The `u` integral is split at the radii where `F` has kinks,
/// integrated by double-exponential quadrature and cut at `u = 36`; the total
/// error stays below [`SMOOTHED_POTENTIAL_ERROR`].
pub fn smoothed_boundary_potential<R: Real>(domain: &ObstacleDomain<R>, l: R, x: [R; 2]) -> R {
    let geom = Geometry::of(domain);
    R::of(smoothed_f64(&geom, l.as_f64(), [x[0].as_f64(), x[1].as_f64()]))
}

fn smoothed_f64(geom: &Geometry, l: f64, x: [f64; 2]) -> f64 {
    let mut cuts: Vec<f64> =
        geom.critical_radii(x).into_iter().map(|r| (r / l) * (r / l)).filter(|&u| u > 0.0 && u < CUTOFF_U).collect();
    cuts.push(0.0);
    cuts.push(CUTOFF_U);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let integrand = |u: f64| (-u).exp() * geom.outside_fraction(x, l * u.max(0.0).sqrt());
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        // F is constant between the first two critical radii.
        let mid = geom.outside_fraction(x, l * (0.5 * (a + b)).sqrt());
        let lo = geom.outside_fraction(x, l * (a + 1e-9 * (b - a)).sqrt());
        let hi = geom.outside_fraction(x, l * (b - 1e-9 * (b - a)).sqrt());
        if lo == mid && hi == mid && (mid == 0.0 || mid == 1.0) {
            total += mid * ((-a).exp() - (-b).exp());
        } else {
            total += double_exponential::integrate(integrand, a, b, PIECE_TOL).integral;
        }
    }
    total.clamp(0.0, 1.0)
}

/// `V^_Omega` at every node of the domain's grid.
pub fn smoothed_boundary_field<R: Real>(domain: &ObstacleDomain<R>, l: R) -> Vec<R> {
    use rayon::prelude::*;
    let geom = Geometry::of(domain);
    let n = domain.nodes_per_side();
    let lf = l.as_f64();
    (0..n * n)
        .into_par_iter()
        .map(|k| {
            let x = domain.node(k % n, k / n);
            R::of(smoothed_f64(&geom, lf, [x[0].as_f64(), x[1].as_f64()]))
        })
        .collect()
}

/// Both sides of the Riesz step
/// `<f, (1 - V^_Omega) f>  <=  int (|f|^2)* (1 - V^_D)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RieszComparison {
    pub lhs: f64,
    pub rhs: f64,
    /// Quadrature allowance: `lhs <= rhs + tolerance` is the contract.
    pub tolerance: f64,
}

impl RieszComparison {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + self.tolerance
    }
}

/// Evaluates both sides for a nonnegative grid function `f` on the interior
/// nodes of `domain`. `D` is the disc with the domain's node area; the
/// rearranged side samples `1 - V^_D` at the annulus radii of `(f^2)*`.
pub fn riesz_comparison_check<R: Real>(domain: &ObstacleDomain<R>, f: &[R], l: R) -> Result<RieszComparison> {
    let mask = domain.mask();
    if f.len() != mask.len() {
        return Err(Error::DimensionMismatch(format!("{} values for {} nodes", f.len(), mask.len())));
    }
    let squares: Vec<R> = f.iter().map(|v| *v * *v).collect();
    let star = rearrange_on_domain(domain, &squares)?;
    let h2 = (domain.h * domain.h).as_f64();
    let geom = Geometry::of(domain);
    let lf = l.as_f64();
    let n = domain.nodes_per_side();
    let mut lhs = 0.0;
    for (k, (&v, &m)) in squares.iter().zip(&mask).enumerate() {
        let v = v.as_f64();
        if m && v != 0.0 {
            let x = domain.node(k % n, k / n);
            lhs += h2 * v * (1.0 - smoothed_f64(&geom, lf, [x[0].as_f64(), x[1].as_f64()]));
        }
    }
    let r_d = star.r_omega.as_f64();
    let disc =
        Geometry { s: 2.0 * r_d + 6.0 * lf, obstacles: vec![Obstacle::Exterior { center: [0.0; 2], radius: r_d }] };
    let mut rhs = 0.0;
    for (r, v) in star.radii.iter().zip(&star.values) {
        let v = v.as_f64();
        if v == 0.0 {
            break;
        }
        rhs += h2 * v * (1.0 - smoothed_f64(&disc, lf, [r.as_f64(), 0.0]));
    }
    let mass: f64 = squares.iter().map(|v| v.as_f64()).sum::<f64>() * h2;
    Ok(RieszComparison { lhs, rhs, tolerance: 2.0 * SMOOTHED_POTENTIAL_ERROR * mass })
}

/// `W_eta(r) = 1/2 exp(-(1 + 1/eta) - (R - r)^2 (1 + eta) / L^2)` for
/// `0 <= r <= R`.
pub fn w_eta<R: Real>(r_omega: R, l: R, eta: R, r: R) -> Result<R> {
    if !(eta > R::zero()) || !(l > R::zero()) {
        return Err(Error::InvalidParameter(format!("W_eta needs eta > 0 and L > 0, got eta={eta}, L={l}")));
    }
    if !(r >= R::zero() && r <= r_omega) {
        return Err(Error::InvalidParameter(format!("W_eta is defined for 0 <= |x| <= {r_omega}, got {r}")));
    }
    let gap = (r_omega - r) / l;
    Ok(R::of(0.5) * (-(R::one() + R::one() / eta) - gap * gap * (R::one() + eta)).exp())
}

/// `phi_0(x) = sqrt(B / 2 pi) exp(-B |x|^2 / 4)`.
pub fn oscillator_ground_state<R: Real>(b: R, x: [R; 2]) -> R {
    (b / (R::of(2.0) * R::PI())).sqrt() * (-b * (x[0] * x[0] + x[1] * x[1]) / R::of(4.0)).exp()
}

/// Confining term of the oscillator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OscillatorForm {
    /// `B |x|^2 / 4`, as the operator is sometimes written.
    AsPrinted,
    /// `B^2 |x|^2 / 4`, the radial part of `(-i grad - A)^2` for `A = B x^perp / 2`.
    Corrected,
}

/// `||H_osc phi_0||_2` with the five-point Laplacian on `[-s, s]^2`,
/// spacing `h`, `phi_0` set to zero outside. Vanishes like `h^2` exactly when
/// `phi_0` spans the kernel.
pub fn oscillator_residual<R: Real>(b: R, h: R, half_width: R, form: OscillatorForm) -> Result<R> {
    if !(b > R::zero() && h > R::zero() && half_width > h) {
        return Err(Error::InvalidParameter(format!("need B > 0 and 0 < h < s, got B={b}, h={h}, s={half_width}")));
    }
    let n = (R::of(2.0) * half_width / h).round().to_usize().unwrap_or(0) + 1;
    let c = |i: usize| -half_width + R::of(i as f64) * h;
    let phi = |i: isize, j: isize| {
        if i < 0 || j < 0 || i as usize >= n || j as usize >= n {
            R::zero()
        } else {
            oscillator_ground_state(b, [c(i as usize), c(j as usize)])
        }
    };
    let h2 = h * h;
    let mut acc = R::zero();
    for j in 0..n as isize {
        for i in 0..n as isize {
            let p = phi(i, j);
            let lap = (phi(i + 1, j) + phi(i - 1, j) + phi(i, j + 1) + phi(i, j - 1) - R::of(4.0) * p) / h2;
            let (x, y) = (c(i as usize), c(j as usize));
            let r2 = x * x + y * y;
            let conf = match form {
                OscillatorForm::AsPrinted => b * r2 / R::of(4.0),
                OscillatorForm::Corrected => b * b * r2 / R::of(4.0),
            };
            let v = R::of(0.5) * (-lap + (conf - b) * p);
            acc += v * v;
        }
    }
    Ok((acc * h2).sqrt())
}

/// `exp[-|Omega| (1 + kappa) / (pi (L^2 + 2/B))]`.
pub fn iso_lower_bound<R: Real>(area: R, b: R, l: R, kappa: R) -> R {
    let scale = R::PI() * (l * l + R::of(2.0) / b);
    (-(area * (R::one() + kappa) / scale)).exp()
}

/// `2 R / (B L^2 + 2)`: where the `W_eta phi_0^2` integral concentrates.
pub fn contribution_radius<R: Real>(b: R, l: R, r_omega: R) -> R {
    R::of(2.0) * r_omega / (b * l * l + R::of(2.0))
}

/// Maximizer of `r exp(-(1 + eta) (R - r)^2 / L^2 - B r^2 / 2)` on `[0, R]`,
/// by scanning `samples + 1` equispaced radii.
pub fn contribution_maximizer<R: Real>(b: R, l: R, r_omega: R, eta: R, samples: usize) -> R {
    let log_w = |r: R| r.ln() - (R::one() + eta) * (r_omega - r) * (r_omega - r) / (l * l) - b * r * r / R::of(2.0);
    let step = r_omega / R::of(samples.max(1) as f64);
    (1..=samples.max(1))
        .map(|k| R::of(k as f64) * step)
        .fold((R::zero(), R::neg_infinity()), |(arg, best), r| {
            let v = log_w(r);
            if v > best {
                (r, v)
            } else {
                (arg, best)
            }
        })
        .0
}

/// `B^2 / (16 pi (B + 1)) e^-(1 + 1/eta) int_D e^-(1+eta)(R-|x|)^2/L^2 e^-B|x|^2/2 dx`,
/// the last explicit lower bound on the comparison eigenvalue before the
/// Gaussian integral is estimated.
pub fn chain_integral_bound<R: Real>(r_omega: R, b: R, l: R, eta: R) -> R {
    let (rr, bf, lf, ef) = (r_omega.as_f64(), b.as_f64(), l.as_f64(), eta.as_f64());
    let integrand = |r: f64| 2.0 * PI * r * (-(1.0 + ef) * (rr - r) * (rr - r) / (lf * lf) - bf * r * r / 2.0).exp();
    let integral = double_exponential::integrate(integrand, 0.0, rr, 1e-14).integral;
    R::of(bf * bf / (16.0 * PI * (bf + 1.0)) * (-(1.0 + 1.0 / ef)).exp() * integral)
}

/// Region on which the bound is checked.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum IsoShape {
    Disc { radius: f64 },
    Square { half_width: f64 },
}

/// Result of one bound check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsoCheck {
    pub shape: IsoShape,
    /// Radius of the disc of equal area.
    pub r_omega: f64,
    pub area: f64,
    pub b: f64,
    pub l: f64,
    pub kappa: f64,
    pub h: f64,
    /// Ground state energy relative to the free lattice bottom.
    pub lambda_computed: f64,
    pub lambda_raw: f64,
    pub lattice_bottom: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Writes `R_Omega,B,L,kappa,lambda_computed,bound,pass`.
pub fn write_iso_csv<W: Write>(rows: &[IsoCheck], mut out: W) -> Result<()> {
    writeln!(out, "R_Omega,B,L,kappa,lambda_computed,bound,pass")?;
    for r in rows {
        writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{:e},{}",
            r.r_omega, r.b, r.l, r.kappa, r.lambda_computed, r.bound, r.pass
        )?;
    }
    Ok(())
}

/// Largest spacing accepted by [`verify_iso_bound`].
pub fn iso_resolution(b: f64, l: f64) -> f64 {
    (1.0 / b).sqrt().min(l) / 8.0
}

/// Whole number of cells covering `[-w, w]`.
fn cells_half_width(w: f64, h: f64) -> f64 {
    (w / h - 1e-9).ceil() * h
}

/// Lowest eigenvalue of the free operator on a centred box. Its nodes contain
/// those of every smaller centred box with the same spacing, so by interlacing
/// it lies below the ground state of any region inside it.
fn free_box_bottom(h: f64, b: f64, half_width: f64, opts: &EigenOptions) -> Result<f64> {
    let grid = MagneticGrid::new(cells_half_width(half_width, h), h, b, Gauge::Symmetric)?;
    let op = assemble_hamiltonian(&grid, &vec![0.0; grid.dim()])?;
    let opts = EigenOptions { tol: opts.tol.min(1e-11), want_vectors: false, ..opts.clone() };
    Ok(eigen::lowest(&op, 1, &opts)?.values[0])
}

/// The masked operator `1/2[(-i grad - A)^2 - B] + V` on the nodes inside
/// `shape`, with `V` given as a function of the node, on a grid of spacing `h`.
fn shape_operator(
    shape: IsoShape,
    b: f64,
    h: f64,
    potential: impl Fn([f64; 2]) -> f64,
) -> Result<(MagneticGrid<f64>, Vec<bool>, SparseHermitian<Complex<f64>>)> {
    let extent = match shape {
        IsoShape::Disc { radius } => radius + h,
        IsoShape::Square { half_width } => half_width,
    };
    let grid = MagneticGrid::new(cells_half_width(extent, h), h, b, Gauge::Symmetric)?;
    let points = grid.points();
    let mask: Vec<bool> = match shape {
        IsoShape::Disc { radius } => points.iter().map(|x| x[0].hypot(x[1]) < radius).collect(),
        IsoShape::Square { .. } => vec![true; points.len()],
    };
    let v: Vec<f64> = points.iter().zip(&mask).map(|(x, &m)| if m { potential(*x) } else { 0.0 }).collect();
    let op = assemble_masked(&grid, Some(&mask), &v)?;
    Ok((grid, mask, op))
}

/// Computes the ground state energy of `1/2[(-i grad - A)^2 - B] + V_Omega`
/// on a disc or square with Dirichlet conditions and compares it with
/// [`iso_lower_bound`].
///
/// The energy is measured from the free lattice bottom, computed on a centred
/// box containing `Omega` (at least 8 magnetic lengths wide), so the lattice
/// offset of order `h^2 B^2` cannot masquerade as a violation. `h` defaults
/// to `min(l_B, L) / 8`; coarser spacings are rejected.
pub fn verify_iso_bound(
    shape: IsoShape,
    b: f64,
    l: f64,
    kappa: f64,
    h: Option<f64>,
    opts: &EigenOptions,
) -> Result<IsoCheck> {
    if !(b > 0.0 && l > 0.0 && kappa >= 0.0) || !(b.is_finite() && l.is_finite() && kappa.is_finite()) {
        return Err(Error::InvalidParameter(format!("need B > 0, L > 0, kappa >= 0; got B={b}, L={l}, kappa={kappa}")));
    }
    let h_max = iso_resolution(b, l);
    let h = h.unwrap_or(h_max);
    if !(h > 0.0) || h > h_max * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "spacing {h} does not resolve min(l_B, L) = {}; need h <= {h_max}",
            8.0 * h_max
        )));
    }
    let (area, extent) = match shape {
        IsoShape::Disc { radius } if radius > 2.0 * h => (PI * radius * radius, radius),
        IsoShape::Square { half_width } if half_width > 2.0 * h => (4.0 * half_width * half_width, half_width),
        _ => return Err(Error::InvalidParameter(format!("{shape:?} is not resolved at h = {h}"))),
    };
    let v_omega = |x: [f64; 2]| match shape {
        IsoShape::Disc { radius } => {
            let d = radius - x[0].hypot(x[1]);
            (-(d * d) / (l * l)).exp()
        }
        IsoShape::Square { half_width } => {
            let d = Square { half_width }.boundary_distance(x);
            (-(d * d) / (l * l)).exp()
        }
    };
    let (_, _, op) = shape_operator(shape, b, h, v_omega)?;
    let raw = eigen::lowest(&op, 1, &EigenOptions { want_vectors: false, ..opts.clone() })?.values[0];
    let ell = (1.0 / b).sqrt();
    let bottom = free_box_bottom(h, b, extent.max(BOTTOM_BOX_MAGNETIC_LENGTHS * ell) + h, opts)?;
    let lambda = raw - bottom;
    let bound = iso_lower_bound(area, b, l, kappa);
    Ok(IsoCheck {
        shape,
        r_omega: (area / PI).sqrt(),
        area,
        b,
        l,
        kappa,
        h,
        lambda_computed: lambda,
        lambda_raw: raw,
        lattice_bottom: bottom,
        bound,
        pass: lambda >= bound,
    })
}

/// Runs [`verify_iso_bound`] over every `(R, B, L)` combination with discs of
/// radius `R l_B`, in parallel and in input order.
pub fn iso_sweep(
    radii_in_lb: &[f64],
    fields: &[f64],
    lengths: &[f64],
    kappa: f64,
    opts: &EigenOptions,
) -> Result<Vec<IsoCheck>> {
    use rayon::prelude::*;
    let mut jobs = Vec::new();
    for &b in fields {
        for &l in lengths {
            for &r in radii_in_lb {
                jobs.push((r * (1.0 / b).sqrt(), b, l));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(r, b, l)| verify_iso_bound(IsoShape::Disc { radius: r }, b, l, kappa, None, opts))
        .collect()
}

/// Quantities of the projection step for the ground state `f` of
/// `H_osc + W_eta` on a disc, with `P` the projection onto `phi_0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectionChain {
    /// Lowest eigenvalue, measured from the free lattice bottom.
    pub lambda_eta: f64,
    /// `||(I - P) f||^2`.
    pub orthogonal_weight: f64,
    /// `<f, W_eta f>`.
    pub w_expectation: f64,
    /// `||P f||^2`.
    pub projected_weight: f64,
    /// `lambda_eta - B ||(I-P)f||^2 - <f, W_eta f>`; nonnegative in the continuum.
    pub gap_slack: f64,
    /// Value of [`chain_integral_bound`] for the same parameters.
    pub integral_bound: f64,
}

impl ProjectionChain {
    /// Both chain inequalities up to `tol`: the gap inequality, and
    /// `||Pf||^2 >= 1 - lambda/B` whenever `lambda < B/2`.
    pub fn holds(&self, b: f64, tol: f64) -> bool {
        let gap = self.gap_slack >= -tol;
        let proj = self.lambda_eta >= b / 2.0 || self.projected_weight >= 1.0 - self.lambda_eta / b - tol;
        gap && proj
    }
}

/// Default `eta` for a given `kappa`: `kappa / 2`. The free parameter is
/// otherwise left to the caller.
pub fn default_eta<R: Real>(kappa: R) -> R {
    kappa / R::of(2.0)
}

/// Solves the constant-field comparison problem `H_osc + W_eta` on the disc
/// of radius `r_omega` (as the magnetic operator in symmetric gauge, whose
/// radial sector is `H_osc`) and evaluates the projection step.
pub fn projection_chain(
    r_omega: f64,
    b: f64,
    l: f64,
    eta: f64,
    h: f64,
    opts: &EigenOptions,
) -> Result<ProjectionChain> {
    if !(b > 0.0) {
        return Err(Error::InvalidParameter(format!("need B > 0, got {b}")));
    }
    w_eta(r_omega, l, eta, 0.0)?;
    let w = |x: [f64; 2]| w_eta(r_omega, l, eta, x[0].hypot(x[1]).min(r_omega)).unwrap_or(0.0);
    let shape = IsoShape::Disc { radius: r_omega };
    let (grid, mask, op) = shape_operator(shape, b, h, w)?;
    let pairs = eigen::lowest(&op, 1, &EigenOptions { want_vectors: true, ..opts.clone() })?;
    let raw = pairs.values[0];
    let f = &pairs.vectors[0];
    let bottom = free_box_bottom(h, b, r_omega.max(BOTTOM_BOX_MAGNETIC_LENGTHS * (1.0 / b).sqrt()) + h, opts)?;
    let points: Vec<[f64; 2]> = grid.points().into_iter().zip(&mask).filter(|(_, &m)| m).map(|(p, _)| p).collect();
    let phi: Vec<f64> = points.iter().map(|&x| oscillator_ground_state(b, x)).collect();
    let phi_norm = phi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let overlap: Complex<f64> = phi.iter().zip(f).map(|(p, z)| z * (p / phi_norm)).sum();
    let projected = overlap.norm_sqr();
    let total: f64 = f.iter().map(|z| z.norm_sqr()).sum();
    let w_exp: f64 = points.iter().zip(f).map(|(&x, z)| w(x) * z.norm_sqr()).sum::<f64>() / total;
    let projected = projected / total;
    let orth = (1.0 - projected).max(0.0);
    let lambda = raw - bottom;
    Ok(ProjectionChain {
        lambda_eta: lambda,
        orthogonal_weight: orth,
        w_expectation: w_exp,
        projected_weight: projected,
        gap_slack: lambda - b * orth - w_exp,
        integral_bound: chain_integral_bound(r_omega, b, l, eta),
    })
}
