//! Single-site impurity profiles, Poisson impurity configurations and the
//! random and boundary potentials built from them.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative magnitude below which single-site contributions are dropped.
pub const TRUNCATION: f64 = 1e-14;

/// Closed-form impurity shapes. Lengths are in units of the magnetic length
/// when `B = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind<R> {
    /// `exp(-|x|^2 / lambda^2)`.
    Gaussian { lambda: R },
    /// `mu / (1 + |x|^alpha)`, `alpha > 2`.
    Algebraic { alpha: R, mu: R },
    /// `exp(-(|x| / lambda)^alpha)`, `0 < alpha < 2`.
    StretchedGaussian { alpha: R, lambda: R },
    /// `v` on the disc of radius `a` about `x0`, falling smoothly (C-infinity)
    /// to zero at radius `2a`.
    SuperGaussianCompact { v: R, a: R, x0: [R; 2] },
    /// `v` times the indicator of the closed disc of radius `a` about `x0`.
    CompactDisc { v: R, a: R, x0: [R; 2] },
}

/// Asymptotic class of `log V(x) / |x|^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayClass {
    /// Ratio tends to 0: classical regime.
    SubGaussian,
    /// Ratio tends to `-1/lambda^2`.
    Gaussian,
    /// Ratio tends to `-inf`: quantum regime.
    SuperGaussian,
}

/// A validated single-site profile `V0 >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileKind<R>", into = "ProfileKind<R>")]
#[serde(bound(serialize = "R: Real + Serialize", deserialize = "R: Real + Deserialize<'de>"))]
pub struct SingleSiteProfile<R: Real> {
    kind: ProfileKind<R>,
}

impl<R: Real> TryFrom<ProfileKind<R>> for SingleSiteProfile<R> {
    type Error = Error;
    fn try_from(kind: ProfileKind<R>) -> Result<Self> {
        Self::new(kind)
    }
}

impl<R: Real> From<SingleSiteProfile<R>> for ProfileKind<R> {
    fn from(p: SingleSiteProfile<R>) -> Self {
        p.kind
    }
}

fn positive<R: Real>(name: &str, x: R) -> Result<()> {
    if x > R::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {x}")))
    }
}

/// Smooth step: 1 for `t <= 0`, 0 for `t >= 1`, C-infinity in between.
fn smooth_step<R: Real>(t: R) -> R {
    let f = |s: R| if s > R::zero() { (-s.recip()).exp() } else { R::zero() };
    if t <= R::zero() {
        return R::one();
    }
    if t >= R::one() {
        return R::zero();
    }
    let a = f(R::one() - t);
    a / (a + f(t))
}

impl<R: Real> SingleSiteProfile<R> {
    pub fn new(kind: ProfileKind<R>) -> Result<Self> {
        match kind {
            ProfileKind::Gaussian { lambda } => positive("lambda", lambda)?,
            ProfileKind::Algebraic { alpha, mu } => {
                positive("mu", mu)?;
                if !(alpha > R::of(2.0)) || !alpha.is_finite() {
                    return Err(Error::InvalidParameter(format!("algebraic exponent must exceed 2, got {alpha}")));
                }
            }
            ProfileKind::StretchedGaussian { alpha, lambda } => {
                positive("lambda", lambda)?;
                if !(alpha > R::zero() && alpha < R::of(2.0)) {
                    return Err(Error::InvalidParameter(format!("stretched exponent must lie in (0, 2), got {alpha}")));
                }
            }
            ProfileKind::SuperGaussianCompact { v, a, x0 } | ProfileKind::CompactDisc { v, a, x0 } => {
                positive("v", v)?;
                positive("a", a)?;
                if !x0[0].is_finite() || !x0[1].is_finite() {
                    return Err(Error::InvalidParameter("profile centre must be finite".into()));
                }
            }
        }
        Ok(Self { kind })
    }

    pub fn gaussian(lambda: R) -> Result<Self> {
        Self::new(ProfileKind::Gaussian { lambda })
    }

    pub fn compact_disc(v: R, a: R) -> Result<Self> {
        Self::new(ProfileKind::CompactDisc { v, a, x0: [R::zero(); 2] })
    }

    /// The same profile in double precision.
    pub fn to_f64(&self) -> SingleSiteProfile<f64> {
        let f = |x: R| x.as_f64();
        let kind = match self.kind {
            ProfileKind::Gaussian { lambda } => ProfileKind::Gaussian { lambda: f(lambda) },
            ProfileKind::Algebraic { alpha, mu } => ProfileKind::Algebraic { alpha: f(alpha), mu: f(mu) },
            ProfileKind::StretchedGaussian { alpha, lambda } => {
                ProfileKind::StretchedGaussian { alpha: f(alpha), lambda: f(lambda) }
            }
            ProfileKind::SuperGaussianCompact { v, a, x0 } => {
                ProfileKind::SuperGaussianCompact { v: f(v), a: f(a), x0: [f(x0[0]), f(x0[1])] }
            }
            ProfileKind::CompactDisc { v, a, x0 } => {
                ProfileKind::CompactDisc { v: f(v), a: f(a), x0: [f(x0[0]), f(x0[1])] }
            }
        };
        SingleSiteProfile { kind }
    }

    pub fn kind(&self) -> &ProfileKind<R> {
        &self.kind
    }

    /// `V0(x)`.
    pub fn evaluate(&self, x: [R; 2]) -> R {
        match self.kind {
            ProfileKind::Gaussian { lambda } => (-(x[0] * x[0] + x[1] * x[1]) / (lambda * lambda)).exp(),
            ProfileKind::Algebraic { alpha, mu } => mu / (R::one() + x[0].hypot(x[1]).powf(alpha)),
            ProfileKind::StretchedGaussian { alpha, lambda } => (-(x[0].hypot(x[1]) / lambda).powf(alpha)).exp(),
            ProfileKind::SuperGaussianCompact { v, a, x0 } => {
                let r = (x[0] - x0[0]).hypot(x[1] - x0[1]);
                v * smooth_step((r - a) / a)
            }
            ProfileKind::CompactDisc { v, a, x0 } => {
                let r = (x[0] - x0[0]).hypot(x[1] - x0[1]);
                if r <= a {
                    v
                } else {
                    R::zero()
                }
            }
        }
    }

    /// `(v, a, x0)` with `V0 >= v * 1(|x - x0| <= a)`.
    pub fn positivity_witness(&self) -> (R, R, [R; 2]) {
        let o = [R::zero(); 2];
        match self.kind {
            ProfileKind::Gaussian { lambda } => ((-R::one()).exp(), lambda, o),
            ProfileKind::Algebraic { mu, .. } => (mu / R::of(2.0), R::one(), o),
            ProfileKind::StretchedGaussian { lambda, .. } => ((-R::one()).exp(), lambda, o),
            ProfileKind::SuperGaussianCompact { v, a, x0 } | ProfileKind::CompactDisc { v, a, x0 } => (v, a, x0),
        }
    }

    pub fn peak(&self) -> R {
        match self.kind {
            ProfileKind::Algebraic { mu, .. } => mu,
            ProfileKind::SuperGaussianCompact { v, .. } | ProfileKind::CompactDisc { v, .. } => v,
            _ => R::one(),
        }
    }

    pub fn decay_class(&self) -> DecayClass {
        match self.kind {
            ProfileKind::Gaussian { .. } => DecayClass::Gaussian,
            ProfileKind::Algebraic { .. } | ProfileKind::StretchedGaussian { .. } => DecayClass::SubGaussian,
            ProfileKind::SuperGaussianCompact { .. } | ProfileKind::CompactDisc { .. } => DecayClass::SuperGaussian,
        }
    }

    /// Characteristic length: `lambda` for the decaying kinds, `a` for the
    /// compact ones, 1 for the algebraic kind.
    pub fn length_scale(&self) -> R {
        match self.kind {
            ProfileKind::Gaussian { lambda } | ProfileKind::StretchedGaussian { lambda, .. } => lambda,
            ProfileKind::SuperGaussianCompact { a, .. } | ProfileKind::CompactDisc { a, .. } => a,
            ProfileKind::Algebraic { .. } => R::one(),
        }
    }

    /// Radius (about the impurity) beyond which `V0 < TRUNCATION * peak`;
    /// `None` for the algebraic kind, which is summed without truncation.
    pub fn truncation_radius(&self) -> Option<R> {
        let log_inv_tau = R::of(-TRUNCATION.ln());
        match self.kind {
            ProfileKind::Gaussian { lambda } => Some(lambda * log_inv_tau.sqrt()),
            ProfileKind::StretchedGaussian { alpha, lambda } => Some(lambda * log_inv_tau.powf(alpha.recip())),
            ProfileKind::SuperGaussianCompact { a, x0, .. } => Some(R::of(2.0) * a + x0[0].hypot(x0[1])),
            ProfileKind::CompactDisc { a, x0, .. } => Some(a + x0[0].hypot(x0[1])),
            ProfileKind::Algebraic { .. } => None,
        }
    }

    /// Default sampling margin outside the box: the truncation radius for
    /// decaying kinds (so that omitted impurities contribute below the
    /// truncation level), `5a` for compact kinds and 10 for the algebraic kind.
    pub fn default_padding(&self) -> R {
        match self.kind {
            ProfileKind::Gaussian { .. } | ProfileKind::StretchedGaussian { .. } => {
                self.truncation_radius().expect("decaying kinds truncate")
            }
            ProfileKind::SuperGaussianCompact { a, x0, .. } | ProfileKind::CompactDisc { a, x0, .. } => {
                R::of(5.0) * a + x0[0].hypot(x0[1])
            }
            ProfileKind::Algebraic { .. } => R::of(10.0),
        }
    }

    /// `log V0(x) / |x|^2` at distance `r` along the first axis; `-inf` where
    /// `V0` vanishes.
    pub fn decay_ratio(&self, r: R) -> R {
        let v = self.evaluate([r, R::zero()]);
        if v > R::zero() {
            v.ln() / (r * r)
        } else {
            R::neg_infinity()
        }
    }
}

/// One realization of the Poisson impurity process on the padded box
/// `[-m - padding, m + padding]^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "R: Real + Serialize", deserialize = "R: Real + Deserialize<'de>"))]
pub struct ImpurityConfiguration<R: Real> {
    pub points: Vec<[R; 2]>,
    pub m: R,
    pub padding: R,
    pub nu: R,
    pub seed: u64,
}

#[derive(Serialize)]
struct ConfigurationSidecar {
    m: f64,
    padding: f64,
    nu: f64,
    seed: u64,
    count: usize,
}

/// Draws a Poisson count with mean `nu * (2m + 2 padding)^2`, then places the
/// points independently and uniformly on the padded box.
pub fn sample_poisson<R: Real>(m: R, padding: R, nu: R, seed: u64) -> Result<ImpurityConfiguration<R>> {
    positive("m", m)?;
    positive("nu", nu)?;
    if !(padding >= R::zero()) || !padding.is_finite() {
        return Err(Error::InvalidParameter(format!("padding must be nonnegative, got {padding}")));
    }
    let half = (m + padding).as_f64();
    let mean = nu.as_f64() * (2.0 * half) * (2.0 * half);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poisson = Poisson::new(mean).map_err(|e| Error::InvalidParameter(format!("Poisson mean {mean}: {e}")))?;
    let count = poisson.sample(&mut rng) as usize;
    let points = (0..count)
        .map(|_| {
            let x: f64 = rng.random_range(-half..half);
            let y: f64 = rng.random_range(-half..half);
            [R::of(x), R::of(y)]
        })
        .collect();
    Ok(ImpurityConfiguration { points, m, padding, nu, seed })
}

impl<R: Real> ImpurityConfiguration<R> {
    pub fn empty(m: R, nu: R, seed: u64) -> Self {
        Self { points: Vec::new(), m, padding: R::zero(), nu, seed }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV with header `x,y`, one point per row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,y")?;
        for p in &self.points {
            writeln!(out, "{},{}", p[0].as_f64(), p[1].as_f64())?;
        }
        Ok(())
    }

    /// JSON sidecar `{m, padding, nu, seed, count}`.
    pub fn sidecar_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ConfigurationSidecar {
            m: self.m.as_f64(),
            padding: self.padding.as_f64(),
            nu: self.nu.as_f64(),
            seed: self.seed,
            count: self.points.len(),
        })?)
    }
}

/// `sum_i V0(x - x_i)`, skipping impurities beyond the truncation radius.
pub fn evaluate_random_potential<R: Real>(
    config: &ImpurityConfiguration<R>,
    profile: &SingleSiteProfile<R>,
    x: [R; 2],
) -> R {
    let cut = profile.truncation_radius();
    let mut acc = R::zero();
    for p in &config.points {
        let d = [x[0] - p[0], x[1] - p[1]];
        if let Some(c) = cut {
            if d[0].abs() > c || d[1].abs() > c {
                continue;
            }
        }
        acc += profile.evaluate(d);
    }
    acc
}

/// The random potential at many points, using a cell list for truncated
/// profiles. Agrees with [`evaluate_random_potential`] point by point.
pub fn random_potential_field<R: Real>(
    config: &ImpurityConfiguration<R>,
    profile: &SingleSiteProfile<R>,
    xs: &[[R; 2]],
) -> Vec<R> {
    let Some(cut) = profile.truncation_radius() else {
        return xs.iter().map(|&x| evaluate_random_potential(config, profile, x)).collect();
    };
    if config.points.is_empty() {
        return vec![R::zero(); xs.len()];
    }
    let cell = cut.max(R::of(1e-3));
    let key = |p: [R; 2]| -> (i64, i64) {
        ((p[0] / cell).floor().to_i64().unwrap_or(0), (p[1] / cell).floor().to_i64().unwrap_or(0))
    };
    let mut bins: std::collections::HashMap<(i64, i64), Vec<usize>> = std::collections::HashMap::new();
    for (i, &p) in config.points.iter().enumerate() {
        bins.entry(key(p)).or_default().push(i);
    }
    xs.iter()
        .map(|&x| {
            let (cx, cy) = key(x);
            // Gather candidates, then sum in original index order so the result
            // is bitwise identical to the direct sum.
            let mut idx: Vec<usize> = Vec::new();
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if let Some(b) = bins.get(&(cx + dx, cy + dy)) {
                        idx.extend_from_slice(b);
                    }
                }
            }
            idx.sort_unstable();
            let mut acc = R::zero();
            for i in idx {
                let p = config.points[i];
                let d = [x[0] - p[0], x[1] - p[1]];
                if d[0].abs() > cut || d[1].abs() > cut {
                    continue;
                }
                acc += profile.evaluate(d);
            }
            acc
        })
        .collect()
}

/// A planar region with a computable distance to its boundary.
pub trait Region<R: Real> {
    fn contains(&self, x: [R; 2]) -> bool;
    /// Euclidean distance from `x` to the boundary.
    fn boundary_distance(&self, x: [R; 2]) -> R;
    /// Area of the region.
    fn area(&self) -> R;
}

/// The square `[-s, s]^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Square<R> {
    pub half_width: R,
}

impl<R: Real> Region<R> for Square<R> {
    fn contains(&self, x: [R; 2]) -> bool {
        x[0].abs() < self.half_width && x[1].abs() < self.half_width
    }

    fn boundary_distance(&self, x: [R; 2]) -> R {
        let s = self.half_width;
        let (ax, ay) = (x[0].abs(), x[1].abs());
        if ax <= s && ay <= s {
            (s - ax).min(s - ay)
        } else {
            (ax - s).max(R::zero()).hypot((ay - s).max(R::zero()))
        }
    }

    fn area(&self) -> R {
        R::of(4.0) * self.half_width * self.half_width
    }
}

/// `exp(-dist(x, dS)^2 / Lbar^2)` on the square `S = [-s, s]^2`, cut off in
/// the collar `dist < R` and outside `S`.
pub fn boundary_potential_bar<R: Real>(s: R, l_bar: R, r: R, x: [R; 2]) -> R {
    let sq = Square { half_width: s };
    if !sq.contains(x) {
        return R::zero();
    }
    let d = sq.boundary_distance(x);
    if d < r {
        return R::zero();
    }
    (-(d * d) / (l_bar * l_bar)).exp()
}

/// `exp(-dist(x, dOmega)^2 / L^2)` inside the region, 0 outside. The boundary
/// itself gets the inside limit 1.
pub fn boundary_potential<R: Real, D: Region<R> + ?Sized>(domain: &D, l: R, x: [R; 2]) -> R {
    let d = domain.boundary_distance(x);
    if domain.contains(x) || d == R::zero() {
        (-(d * d) / (l * l)).exp()
    } else {
        R::zero()
    }
}
