//! Torsion function `Delta g = -1`, `g = 0` on the boundary, on a square with
//! obstacles removed, and the clearing heuristics built on it.
//!
//! Curved boundaries use the symmetric ghost-fluid treatment: a node whose
//! grid link to a neighbour crosses the boundary at fraction `theta` of the
//! spacing sees a ghost value `g (1 - 1/theta)`, which keeps the matrix
//! symmetric positive definite and the solution second order accurate.

use std::io::Write;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ldl::LdlFactor;
use crate::linalg::sparse::SparseHermitian;
use crate::potential::Region;
use crate::scalar::Real;

/// Link fractions below this are clamped to keep the diagonal finite.
const MIN_THETA: f64 = 1e-6;

/// A closed set removed from the square.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Obstacle<R> {
    /// The closed disc `|x - center| <= radius`.
    Disc { center: [R; 2], radius: R },
    /// The closed annulus `r_in <= |x - center| <= r_out`; the inner open disc
    /// stays in the domain.
    Annulus { center: [R; 2], r_in: R, r_out: R },
    /// Everything outside the open disc `|x - center| < radius`.
    Exterior { center: [R; 2], radius: R },
}

fn dist<R: Real>(x: [R; 2], c: [R; 2]) -> R {
    (x[0] - c[0]).hypot(x[1] - c[1])
}

/// Positive roots `t` of `|x + t e - c| = r` for a unit axis direction `e`.
fn circle_roots<R: Real>(x: [R; 2], e: [R; 2], c: [R; 2], r: R) -> Option<(R, R)> {
    let d = [x[0] - c[0], x[1] - c[1]];
    let b = d[0] * e[0] + d[1] * e[1];
    let cc = d[0] * d[0] + d[1] * d[1] - r * r;
    let disc = b * b - cc;
    if disc < R::zero() {
        return None;
    }
    let s = disc.sqrt();
    Some((-b - s, -b + s))
}

impl<R: Real> Obstacle<R> {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Obstacle::Disc { radius, .. } | Obstacle::Exterior { radius, .. } => radius > R::zero(),
            Obstacle::Annulus { r_in, r_out, .. } => r_in > R::zero() && r_in < r_out,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("degenerate obstacle {self:?}")))
        }
    }

    /// Whether `x` lies in the removed (closed) set.
    pub fn removes(&self, x: [R; 2]) -> bool {
        match *self {
            Obstacle::Disc { center, radius } => dist(x, center) <= radius,
            Obstacle::Annulus { center, r_in, r_out } => {
                let d = dist(x, center);
                d >= r_in && d <= r_out
            }
            Obstacle::Exterior { center, radius } => dist(x, center) >= radius,
        }
    }

    /// Distance from a point outside the removed set to that set.
    fn distance_outside(&self, x: [R; 2]) -> R {
        match *self {
            Obstacle::Disc { center, radius } => (dist(x, center) - radius).max(R::zero()),
            Obstacle::Annulus { center, r_in, r_out } => {
                let d = dist(x, center);
                if d < r_in {
                    r_in - d
                } else {
                    (d - r_out).max(R::zero())
                }
            }
            Obstacle::Exterior { center, radius } => (radius - dist(x, center)).max(R::zero()),
        }
    }

    /// First `t > 0` at which the ray `x + t e` enters the removed set.
    fn entry(&self, x: [R; 2], e: [R; 2]) -> Option<R> {
        let first_positive = |(a, b): (R, R)| {
            if a > R::zero() {
                Some(a)
            } else if b > R::zero() {
                Some(b)
            } else {
                None
            }
        };
        match *self {
            Obstacle::Disc { center, radius } => circle_roots(x, e, center, radius).and_then(first_positive),
            Obstacle::Annulus { center, r_in, r_out } => {
                if dist(x, center) < r_in {
                    circle_roots(x, e, center, r_in).map(|(_, b)| b)
                } else {
                    circle_roots(x, e, center, r_out).and_then(first_positive)
                }
            }
            Obstacle::Exterior { center, radius } => circle_roots(x, e, center, radius).map(|(_, b)| b),
        }
    }

    /// The obstacle after enlarging the domain by `w`: removed sets shrink.
    fn shrunk(&self, w: R) -> Option<Self> {
        match *self {
            Obstacle::Disc { center, radius } => (radius > w).then_some(Obstacle::Disc { center, radius: radius - w }),
            Obstacle::Annulus { center, r_in, r_out } => (r_out - r_in > R::of(2.0) * w).then_some(Obstacle::Annulus {
                center,
                r_in: r_in + w,
                r_out: r_out - w,
            }),
            Obstacle::Exterior { center, radius } => Some(Obstacle::Exterior { center, radius: radius + w }),
        }
    }
}

/// `[-s, s]^2` minus a union of obstacles, discretized with spacing `h`.
/// Nodes are `(-s + i h, -s + j h)` for `0 <= i, j <= 2s/h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "R: Real + Serialize", deserialize = "R: Real + Deserialize<'de>"))]
pub struct ObstacleDomain<R: Real> {
    pub half_width: R,
    pub obstacles: Vec<Obstacle<R>>,
    pub h: R,
}

impl<R: Real> ObstacleDomain<R> {
    pub fn new(half_width: R, obstacles: Vec<Obstacle<R>>, h: R) -> Result<Self> {
        if !(half_width > R::zero() && h > R::zero() && h < half_width) {
            return Err(Error::InvalidParameter(format!("need 0 < h < s, got s={half_width}, h={h}")));
        }
        for o in &obstacles {
            o.validate()?;
        }
        Ok(Self { half_width, obstacles, h })
    }

    /// The domain `Omega = S \ U [closed B(x_i, 2R) \ B(x_i, R)]` around the
    /// given centres.
    pub fn annular(half_width: R, centers: &[[R; 2]], r: R, h: R) -> Result<Self> {
        let obstacles =
            centers.iter().map(|&c| Obstacle::Annulus { center: c, r_in: r, r_out: R::of(2.0) * r }).collect();
        Self::new(half_width, obstacles, h)
    }

    /// `S \ U closed B(x_i, a)`: the full-disc variant.
    pub fn discs(half_width: R, centers: &[[R; 2]], a: R, h: R) -> Result<Self> {
        let obstacles = centers.iter().map(|&c| Obstacle::Disc { center: c, radius: a }).collect();
        Self::new(half_width, obstacles, h)
    }

    /// The open disc of radius `radius` about the origin inside a square just
    /// large enough to hold it.
    pub fn disc(radius: R, h: R) -> Result<Self> {
        let s = ((radius / h).ceil() + R::one()) * h;
        Self::new(s, vec![Obstacle::Exterior { center: [R::zero(); 2], radius }], h)
    }

    /// Nodes per side.
    pub fn nodes_per_side(&self) -> usize {
        (R::of(2.0) * self.half_width / self.h + R::of(1e-9)).floor().to_usize().unwrap_or(0) + 1
    }

    pub fn node(&self, i: usize, j: usize) -> [R; 2] {
        let s = self.half_width;
        [-s + R::of(i as f64) * self.h, -s + R::of(j as f64) * self.h]
    }

    /// Row-major node index `i + j * nodes_per_side`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + j * self.nodes_per_side()
    }

    /// Interior mask: nodes strictly inside the open domain. Nodes within
    /// rounding distance (`1e-6 h`) of the boundary count as boundary nodes.
    pub fn mask(&self) -> Vec<bool> {
        let n = self.nodes_per_side();
        let mut mask = vec![false; n * n];
        for j in 0..n {
            for i in 0..n {
                let x = self.node(i, j);
                mask[self.index(i, j)] = self.contains(x) && self.boundary_distance(x) > R::of(MIN_THETA) * self.h;
            }
        }
        mask
    }

    /// `dist(x, boundary)` at every node (zero outside the domain).
    pub fn distance_field(&self) -> Vec<R> {
        let n = self.nodes_per_side();
        let mut out = vec![R::zero(); n * n];
        for j in 0..n {
            for i in 0..n {
                let x = self.node(i, j);
                if self.contains(x) {
                    out[self.index(i, j)] = self.boundary_distance(x);
                }
            }
        }
        out
    }

    /// Distance along `+-e_axis` from an interior point to the first boundary
    /// crossing, capped at `cap`.
    fn exit_distance(&self, x: [R; 2], axis: usize, sign: R, cap: R) -> R {
        let mut e = [R::zero(); 2];
        e[axis] = sign;
        let mut t = self.half_width - sign * x[axis];
        for o in &self.obstacles {
            if let Some(te) = o.entry(x, e) {
                t = t.min(te);
            }
        }
        t.min(cap)
    }

    /// The domain grown by `w`: obstacles shrink by `w` and the square grows
    /// to `s + w`. Contains the Minkowski sum `Omega + B(0, w)`.
    pub fn enlarged(&self, w: R) -> Result<Self> {
        let obstacles = self.obstacles.iter().filter_map(|o| o.shrunk(w)).collect();
        Self::new(self.half_width + w, obstacles, self.h)
    }

    /// `2 delta` for `delta = R/100`, the standard enlargement for clearings
    /// bounded by annuli of inner radius `r`.
    pub fn standard_enlargement(r: R) -> R {
        R::of(2.0) * r / R::of(100.0)
    }
}

impl<R: Real> Region<R> for ObstacleDomain<R> {
    fn contains(&self, x: [R; 2]) -> bool {
        let s = self.half_width;
        x[0].abs() < s && x[1].abs() < s && !self.obstacles.iter().any(|o| o.removes(x))
    }

    fn boundary_distance(&self, x: [R; 2]) -> R {
        let sq = crate::potential::Square { half_width: self.half_width };
        let mut d = sq.boundary_distance(x);
        if self.contains(x) {
            for o in &self.obstacles {
                d = d.min(o.distance_outside(x));
            }
        }
        d
    }

    /// Node count of the mask times `h^2`.
    fn area(&self) -> R {
        let count = self.mask().iter().filter(|&&m| m).count();
        R::of(count as f64) * self.h * self.h
    }
}

/// A solved grid function on the nodes of an [`ObstacleDomain`].
#[derive(Clone, Debug, PartialEq)]
pub struct GreenField<R: Real> {
    pub domain: ObstacleDomain<R>,
    /// Row-major values, zero off the mask.
    pub values: Vec<R>,
    pub mask: Vec<bool>,
    /// `h^2 |A g - 1|_inf` of the final solve.
    pub residual: R,
}

/// Solves `-Delta_h g = 1` on the mask with `g = 0` on the boundary.
pub fn solve_green<R>(domain: &ObstacleDomain<R>) -> Result<GreenField<R>>
where
    R: Real + crate::scalar::Scalar<Real = R>,
{
    let mask = domain.mask();
    let n = domain.nodes_per_side();
    let mut number = vec![usize::MAX; n * n];
    let mut coords = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if mask[domain.index(i, j)] {
                number[domain.index(i, j)] = coords.len();
                coords.push([i as i32, j as i32]);
            }
        }
    }
    if coords.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let h = domain.h;
    let inv_h2 = R::one() / (h * h);
    let mut diag = vec![R::zero(); coords.len()];
    let mut upper = Vec::new();
    for (u, &[i, j]) in coords.iter().enumerate() {
        let (i, j) = (i as usize, j as usize);
        let x = domain.node(i, j);
        for (axis, sign) in [(0usize, R::one()), (0, -R::one()), (1, R::one()), (1, -R::one())] {
            let t = domain.exit_distance(x, axis, sign, h);
            let neighbor = match (axis, sign > R::zero()) {
                (0, true) if i + 1 < n => Some(domain.index(i + 1, j)),
                (0, false) if i > 0 => Some(domain.index(i - 1, j)),
                (1, true) if j + 1 < n => Some(domain.index(i, j + 1)),
                (1, false) if j > 0 => Some(domain.index(i, j - 1)),
                _ => None,
            };
            let linked = t >= h && neighbor.is_some_and(|k| number[k] != usize::MAX);
            if linked {
                diag[u] += inv_h2;
                let v = number[neighbor.expect("checked")];
                if u < v {
                    upper.push((u, v, -inv_h2));
                }
            } else {
                let theta = (t / h).max(R::of(MIN_THETA));
                diag[u] += inv_h2 / theta;
            }
        }
    }
    let a = SparseHermitian::new(diag, upper)?.with_coords(coords)?;
    let factor = LdlFactor::new(&a, R::zero(), true)?;
    let dim = a.dim();
    let mut g = vec![R::one(); dim];
    factor.solve_in_place(&mut g)?;
    // One step of iterative refinement.
    let mut ag = vec![R::zero(); dim];
    a.matvec(&g, &mut ag);
    let mut r: Vec<R> = ag.iter().map(|&v| R::one() - v).collect();
    factor.solve_in_place(&mut r)?;
    for (gi, ri) in g.iter_mut().zip(&r) {
        *gi += *ri;
    }
    a.matvec(&g, &mut ag);
    let residual = ag.iter().fold(R::zero(), |acc, &v| acc.max(Float::abs(v - R::one()))) * h * h;
    let mut values = vec![R::zero(); n * n];
    for (k, &u) in number.iter().enumerate() {
        if u != usize::MAX {
            values[k] = g[u];
        }
    }
    Ok(GreenField { domain: domain.clone(), values, mask, residual })
}

impl<R: Real> GreenField<R> {
    /// `G = max g` and a maximizing node.
    pub fn g_max(&self) -> (R, [R; 2]) {
        let n = self.domain.nodes_per_side();
        let mut best = (R::neg_infinity(), [R::zero(); 2]);
        for j in 0..n {
            for i in 0..n {
                let v = self.values[self.domain.index(i, j)];
                if v > best.0 {
                    best = (v, self.domain.node(i, j));
                }
            }
        }
        best
    }

    /// `i,j,x,y,g`
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "i,j,x,y,g")?;
        let n = self.domain.nodes_per_side();
        for j in 0..n {
            for i in 0..n {
                let x = self.domain.node(i, j);
                writeln!(
                    out,
                    "{i},{j},{},{},{:e}",
                    x[0].as_f64(),
                    x[1].as_f64(),
                    self.values[self.domain.index(i, j)].as_f64()
                )?;
            }
        }
        Ok(())
    }
}

/// `G_U` of a domain.
pub fn g_max<R: Real>(field: &GreenField<R>) -> (R, [R; 2]) {
    field.g_max()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DominantTerm {
    Kinetic,
    Classical,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeuristicEigenvalue {
    /// `exp(-2 B G)`.
    pub kinetic: f64,
    /// `<V_Omega>` in the density `exp(2 B g) / |exp(B g)|^2`.
    pub classical: f64,
    pub total: f64,
    pub dominant: DominantTerm,
}

/// Clearing heuristic `exp(-2BG) + int V_Omega |exp(Bg)|^2 / |exp(Bg)|^2`
/// with `V_Omega = exp(-dist(x, boundary)^2 / L^2)`. Weights are shifted by
/// `G` to avoid overflow.
pub fn heuristic_eigenvalue<R: Real>(field: &GreenField<R>, b: R, l: R) -> Result<HeuristicEigenvalue> {
    if !(b > R::zero() && l >= R::zero()) {
        return Err(Error::InvalidParameter("heuristic needs B > 0 and L >= 0".into()));
    }
    let (g_top, _) = field.g_max();
    let dom = &field.domain;
    let n = dom.nodes_per_side();
    let (b, l, g_top) = (b.as_f64(), l.as_f64(), g_top.as_f64());
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..n {
        for i in 0..n {
            let k = dom.index(i, j);
            if !field.mask[k] {
                continue;
            }
            let w = (2.0 * b * (field.values[k].as_f64() - g_top)).exp();
            let d = dom.boundary_distance(dom.node(i, j)).as_f64();
            let v = if l > 0.0 { (-(d * d) / (l * l)).exp() } else { 0.0 };
            num += v * w;
            den += w;
        }
    }
    let kinetic = (-2.0 * b * g_top).exp();
    let classical = if den > 0.0 { num / den } else { 0.0 };
    Ok(HeuristicEigenvalue {
        kinetic,
        classical,
        total: kinetic + classical,
        dominant: if classical > kinetic { DominantTerm::Classical } else { DominantTerm::Kinetic },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Centre value of the torsion function of `[-a, a]^2` from its Fourier
    /// series.
    fn square_torsion_center(a: f64) -> f64 {
        let mut sum = 0.0;
        for k in 0..50 {
            let n = (2 * k + 1) as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign / (n.powi(3) * (n * PI / 2.0).cosh());
        }
        a * a / 2.0 - 16.0 * a * a / PI.powi(3) * sum
    }

    #[test]
    fn disc_torsion_closed_form() {
        let r = 2.0;
        let d = ObstacleDomain::disc(r, r / 64.0).unwrap();
        let f = solve_green(&d).unwrap();
        let (g, at) = f.g_max();
        assert!((g - r * r / 4.0).abs() / (r * r / 4.0) < 1e-3, "{g}");
        assert!(at[0].abs() < 1e-12 && at[1].abs() < 1e-12);
        assert!(f.residual < 1e-10);
        // Pointwise against (R^2 - |x|^2) / 4.
        let n = d.nodes_per_side();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                if f.mask[d.index(i, j)] {
                    let x = d.node(i, j);
                    let exact = (r * r - x[0] * x[0] - x[1] * x[1]) / 4.0;
                    worst = worst.max((f.values[d.index(i, j)] - exact).abs());
                } else {
                    assert_eq!(f.values[d.index(i, j)], 0.0);
                }
            }
        }
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn square_torsion_series() {
        let s = 1.0;
        let d = ObstacleDomain::new(s, vec![], s / 64.0).unwrap();
        let f = solve_green(&d).unwrap();
        let exact = square_torsion_center(s);
        assert!((exact - 0.294_685_3).abs() < 1e-6, "{exact}");
        assert!((f.g_max().0 - exact).abs() / exact < 2e-3);
    }

    #[test]
    fn second_order_convergence_on_disc() {
        let r = 1.3;
        let err = |h: f64| {
            let f = solve_green(&ObstacleDomain::disc(r, h).unwrap()).unwrap();
            (f.g_max().0 - r * r / 4.0).abs()
        };
        let (e1, e2) = (err(r / 12.3), err(r / 24.6));
        assert!((e1 / e2).log2() >= 1.8 || e2 < 1e-12, "{e1} {e2}");
    }

    #[test]
    fn maximum_principle_and_domain_monotonicity() {
        let base = ObstacleDomain::new(3.0, vec![], 0.1).unwrap();
        let more = ObstacleDomain::new(3.0, vec![Obstacle::Disc { center: [0.7, -0.4], radius: 0.8 }], 0.1).unwrap();
        let fb = solve_green(&base).unwrap();
        let fm = solve_green(&more).unwrap();
        assert!(fb.values.iter().all(|&v| v >= 0.0));
        assert!(fm.values.iter().all(|&v| v >= 0.0));
        for k in 0..fb.values.len() {
            assert!(fm.values[k] <= fb.values[k] + 1e-12);
        }
        assert!(fm.g_max().0 <= fb.g_max().0);
    }

    #[test]
    fn annulus_keeps_inner_disc() {
        let d = ObstacleDomain::annular(4.0, &[[0.0, 0.0]], 1.0, 0.05).unwrap();
        assert!(d.contains([0.0, 0.0]));
        assert!(!d.contains([1.5, 0.0]));
        assert!(d.contains([2.5, 0.0]));
        let f = solve_green(&d).unwrap();
        // The inner disc is a separate component: a unit disc torsion bump.
        let centre = f.values[d.index(80, 80)];
        assert!((centre - 0.25).abs() < 2e-3, "{centre}");
        let full = ObstacleDomain::discs(4.0, &[[0.0, 0.0]], 2.0, 0.05).unwrap();
        assert!(!full.contains([0.0, 0.0]));
    }

    #[test]
    fn enlargement_increases_g() {
        let r = 1.0;
        let d = ObstacleDomain::annular(5.0, &[[1.0, 0.5], [-2.0, -2.0]], r, 0.05).unwrap();
        let e = d.enlarged(ObstacleDomain::<f64>::standard_enlargement(r)).unwrap();
        let g = solve_green(&d).unwrap().g_max().0;
        let ge = solve_green(&e).unwrap().g_max().0;
        assert!(ge >= g, "{ge} < {g}");
    }

    #[test]
    fn distance_to_primitives() {
        let d = ObstacleDomain::new(
            5.0,
            vec![
                Obstacle::Disc { center: [2.0, 0.0], radius: 1.0 },
                Obstacle::Annulus { center: [-2.0, 0.0], r_in: 0.5, r_out: 1.0 },
            ],
            0.1,
        )
        .unwrap();
        assert!((d.boundary_distance([0.0, 0.0]) - 1.0).abs() < 1e-14);
        assert!((d.boundary_distance([-2.0, 0.0]) - 0.5).abs() < 1e-14);
        assert!((d.boundary_distance([0.0, 4.5]) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn heuristic_limits() {
        let d = ObstacleDomain::disc(4.0, 0.1).unwrap();
        let f = solve_green(&d).unwrap();
        let tiny = heuristic_eigenvalue(&f, 1.0, 1e-6).unwrap();
        assert!(tiny.classical < 1e-12);
        assert!((tiny.total - tiny.kinetic).abs() < 1e-12);
        let h = heuristic_eigenvalue(&f, 1.0, 1.0).unwrap();
        assert_eq!(h.dominant, DominantTerm::Classical);
        assert!((h.kinetic - (-2.0 * f.g_max().0).exp()).abs() < 1e-15);
    }

    #[test]
    fn csv_and_json() {
        let d = ObstacleDomain::annular(1.0, &[[0.0, 0.0]], 0.2, 0.5).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        let back: ObstacleDomain<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
        assert!(json.contains("\"kind\":\"annulus\""));
        let f = solve_green(&ObstacleDomain::<f64>::new(1.0, vec![], 0.5).unwrap()).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("i,j,x,y,g"));
        assert_eq!(text.lines().count(), 26);
    }

    #[test]
    fn empty_interior_rejected() {
        let d = ObstacleDomain::new(1.0, vec![Obstacle::Disc { center: [0.0, 0.0], radius: 5.0 }], 0.1).unwrap();
        assert!(matches!(solve_green(&d), Err(Error::EmptyDomain)));
    }
}
