//! Monte-Carlo integrated density of states, its Laplace transform, and
//! Lifschitz-tail fitting.
//!
//! Every trial is an independent Poisson configuration with seed
//! `base_seed + trial`. Trials run on the rayon pool and are folded in trial
//! order, so results do not depend on the number of threads.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::eigen::EigenOptions;
use crate::operator::{assemble_hamiltonian, Gauge, MagneticGrid};
use crate::potential::{random_potential_field, sample_poisson, ProfileKind, SingleSiteProfile};
use crate::scalar::{Real, Scalar};
use crate::spectral::{heat_trace, lowest_eigenvalues, reference_offset, EnergyReference, SpectralCounter};

/// Physical and discretization parameters shared by all trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "R: Real + Serialize", deserialize = "R: Real + Deserialize<'de>"))]
pub struct IdsSetup<R: Real> {
    pub b: R,
    pub nu: R,
    pub profile: SingleSiteProfile<R>,
    pub m: R,
    pub h: R,
    /// Sampling margin beyond the box; the profile default when absent.
    pub padding: Option<R>,
    pub gauge: Gauge,
    pub reference: EnergyReference,
}

impl<R: Real> IdsSetup<R> {
    pub fn new(b: R, nu: R, profile: SingleSiteProfile<R>, m: R, h: R) -> Self {
        Self { b, nu, profile, m, h, padding: None, gauge: Gauge::Symmetric, reference: EnergyReference::default() }
    }

    pub fn grid(&self) -> Result<MagneticGrid<R>> {
        if !(self.nu > R::zero()) {
            return Err(Error::InvalidParameter(format!("intensity must be positive, got {}", self.nu)));
        }
        MagneticGrid::new(self.m, self.h, self.b, self.gauge)
    }

    pub fn padding(&self) -> R {
        self.padding.unwrap_or_else(|| self.profile.default_padding())
    }

    fn descriptor(&self) -> String {
        serde_json::to_string(&self.profile.to_f64()).unwrap_or_default()
    }
}

/// A discarded trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedTrial {
    pub seed: u64,
    pub error: String,
}

/// Trial means with standard errors `std / sqrt(trials)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdsEstimate {
    pub energies: Vec<f64>,
    pub mean_count_per_area: Vec<f64>,
    pub stderr: Vec<f64>,
    pub trials: usize,
    pub m: f64,
    pub h: f64,
    pub b: f64,
    pub nu: f64,
    /// JSON of the single-site profile.
    pub profile: String,
    /// Energy subtracted from every eigenvalue (the lattice bottom or 0).
    pub offset: f64,
    /// Area of the Dirichlet box.
    pub area: f64,
    pub failed: Vec<FailedTrial>,
}

impl IdsEstimate {
    /// `E,N_mean,N_stderr,trials`
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "E,N_mean,N_stderr,trials")?;
        for i in 0..self.energies.len() {
            writeln!(
                out,
                "{:e},{:e},{:e},{}",
                self.energies[i], self.mean_count_per_area[i], self.stderr[i], self.trials
            )?;
        }
        Ok(())
    }

    /// An estimate from bare curve data (e.g. read back from CSV); physical
    /// fields are left at zero.
    pub fn from_curve(energies: Vec<f64>, mean: Vec<f64>, stderr: Vec<f64>, trials: usize) -> Result<Self> {
        if mean.len() != energies.len() || stderr.len() != energies.len() {
            return Err(Error::DimensionMismatch("energy, mean and stderr columns differ in length".into()));
        }
        Ok(Self {
            energies,
            mean_count_per_area: mean,
            stderr,
            trials,
            m: 0.0,
            h: 0.0,
            b: 0.0,
            nu: 0.0,
            profile: String::new(),
            offset: 0.0,
            area: 0.0,
            failed: Vec::new(),
        })
    }
}

/// Per-`t` Monte-Carlo heat trace per unit area.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplaceEstimate {
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Trial mean of `dim * exp(-t lambda_k) / area`.
    pub truncation_bound: Vec<f64>,
    pub trials: usize,
    pub k: usize,
    pub offset: f64,
    pub area: f64,
    pub failed: Vec<FailedTrial>,
}

impl LaplaceEstimate {
    /// `t,L_mean,L_stderr,truncation_bound,trials`
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,L_mean,L_stderr,truncation_bound,trials")?;
        for i in 0..self.t.len() {
            writeln!(
                out,
                "{:e},{:e},{:e},{:e},{}",
                self.t[i], self.mean[i], self.stderr[i], self.truncation_bound[i], self.trials
            )?;
        }
        Ok(())
    }
}

fn mean_and_stderr(rows: &[Vec<f64>], j: usize) -> (f64, f64) {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
    let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs `trials` seeded jobs in parallel and returns the successes and the
/// numerically failed trials, both in trial order.
fn run_trials<T: Send>(
    trials: usize,
    base_seed: u64,
    job: impl Fn(u64) -> Result<T> + Sync,
) -> Result<(Vec<T>, Vec<FailedTrial>)> {
    let outcomes: Vec<(u64, Result<T>)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i as u64);
            (seed, job(seed))
        })
        .collect();
    let mut ok = Vec::with_capacity(trials);
    let mut failed = Vec::new();
    for (seed, r) in outcomes {
        match r {
            Ok(v) => ok.push(v),
            Err(e) if e.is_numerical() => failed.push(FailedTrial { seed, error: e.to_string() }),
            Err(e) => return Err(e),
        }
    }
    if ok.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} of {trials} trials succeeded; at least 2 are needed",
            ok.len()
        )));
    }
    Ok((ok, failed))
}

/// Samples one configuration and assembles its Hamiltonian.
pub fn trial_operator<R: Real>(
    setup: &IdsSetup<R>,
    grid: &MagneticGrid<R>,
    seed: u64,
) -> Result<crate::linalg::SparseHermitian<Complex<R>>>
where
    Complex<R>: Scalar<Real = R>,
{
    let config = sample_poisson(setup.m, setup.padding(), setup.nu, seed)?;
    let v = random_potential_field(&config, &setup.profile, &grid.points());
    assemble_hamiltonian(grid, &v)
}

/// Eigenvalue counts of one trial at `energies` (relative to `offset`).
pub fn trial_counts<R: Real>(
    setup: &IdsSetup<R>,
    grid: &MagneticGrid<R>,
    offset: R,
    energies: &[R],
    seed: u64,
) -> Result<Vec<usize>>
where
    Complex<R>: Scalar<Real = R>,
{
    let op = trial_operator(setup, grid, seed)?;
    let counter = SpectralCounter::new(&op);
    let mut counts = Vec::with_capacity(energies.len());
    for &e in energies {
        let c = counter.count_below(e + offset)?;
        if counts.last().is_some_and(|&prev| c < prev) {
            return Err(Error::InvalidParameter(format!("count decreased at E = {e}")));
        }
        counts.push(c);
    }
    Ok(counts)
}

fn validate_ascending_positive(values: &[f64], name: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidParameter(format!("{name} list is empty")));
    }
    if values.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidParameter(format!("{name} values must be positive and finite")));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(format!("{name} values must be strictly ascending")));
    }
    Ok(())
}

/// Monte-Carlo estimate of `N(E)` per unit area at each energy.
pub fn estimate_ids<R: Real>(
    setup: &IdsSetup<R>,
    energies: &[R],
    trials: usize,
    base_seed: u64,
    opts: &EigenOptions,
) -> Result<IdsEstimate>
where
    Complex<R>: Scalar<Real = R>,
{
    let e64: Vec<f64> = energies.iter().map(|e| e.as_f64()).collect();
    validate_ascending_positive(&e64, "energy")?;
    if trials < 2 {
        return Err(Error::InvalidParameter("at least 2 trials are needed".into()));
    }
    let grid = setup.grid()?;
    let offset = reference_offset(setup.reference, &grid, opts)?;
    let area = grid.area().as_f64();
    let (rows, failed) = run_trials(trials, base_seed, |seed| {
        trial_counts(setup, &grid, offset, energies, seed)
            .map(|c| c.into_iter().map(|x| x as f64 / area).collect::<Vec<f64>>())
    })?;
    let (mean, stderr) = (0..energies.len()).map(|j| mean_and_stderr(&rows, j)).unzip();
    Ok(IdsEstimate {
        energies: e64,
        mean_count_per_area: mean,
        stderr,
        trials: rows.len(),
        m: setup.m.as_f64(),
        h: setup.h.as_f64(),
        b: setup.b.as_f64(),
        nu: setup.nu.as_f64(),
        profile: setup.descriptor(),
        offset: offset.as_f64(),
        area,
        failed,
    })
}

/// Monte-Carlo heat trace per unit area from the `k` lowest eigenvalues of
/// each trial, with the truncation remainder bound.
pub fn estimate_laplace<R: Real>(
    setup: &IdsSetup<R>,
    t_list: &[f64],
    trials: usize,
    base_seed: u64,
    k: usize,
    opts: &EigenOptions,
) -> Result<LaplaceEstimate>
where
    Complex<R>: Scalar<Real = R>,
{
    validate_ascending_positive(t_list, "t")?;
    if k == 0 || trials < 2 {
        return Err(Error::InvalidParameter("need k >= 1 and at least 2 trials".into()));
    }
    let grid = setup.grid()?;
    let offset = reference_offset(setup.reference, &grid, opts)?;
    let area = grid.area().as_f64();
    let dim = grid.dim();
    let (rows, failed) = run_trials(trials, base_seed, |seed| {
        let op = trial_operator(setup, &grid, seed)?;
        let s = lowest_eigenvalues(&op, k, opts)?.shifted(offset);
        let cutoff = *s.eigenvalues.last().expect("k >= 1");
        let mut row = Vec::with_capacity(2 * t_list.len());
        for &t in t_list {
            let (v, bound) = heat_trace(&s, R::of(t), dim, cutoff)?;
            row.push(v.as_f64() / area);
            row.push(bound.as_f64() / area);
        }
        Ok(row)
    })?;
    let n = rows.len() as f64;
    let mut out = LaplaceEstimate {
        t: t_list.to_vec(),
        mean: Vec::new(),
        stderr: Vec::new(),
        truncation_bound: Vec::new(),
        trials: rows.len(),
        k,
        offset: offset.as_f64(),
        area,
        failed,
    };
    for j in 0..t_list.len() {
        let (m, s) = mean_and_stderr(&rows, 2 * j);
        out.mean.push(m);
        out.stderr.push(s);
        out.truncation_bound.push(rows.iter().map(|r| r[2 * j + 1]).sum::<f64>() / n);
    }
    Ok(out)
}

/// One `t` of the Tauberian comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauberianPoint {
    pub t: f64,
    /// `sum_j exp(-t E_j) (N(E_j) - N(E_{j-1}))`: the Stieltjes integral of
    /// the right-continuous step curve.
    pub stieltjes: f64,
    /// The same sum evaluated at left bin ends (an upper bracket).
    pub stieltjes_left: f64,
    pub laplace: f64,
    /// `|laplace - stieltjes| / laplace`.
    pub deviation: f64,
    pub combined_stderr: f64,
    pub truncation_share: f64,
    /// Bound on the mass beyond the energy window relative to the Stieltjes
    /// sum, from the total state density `1/h^2`.
    pub window_share: f64,
    pub tolerance: f64,
    /// `None` when the window misses too much mass.
    pub verdict: Option<bool>,
}

/// Compares `int exp(-Et) dN(E)` of the counting estimate with the heat-trace
/// estimate. The tolerance at each `t` is
/// `max(base_tolerance, 3 * combined relative stderr + truncation share)`;
/// `t` values whose out-of-window share exceeds `window_limit` are flagged.
pub fn tauberian_crosscheck(
    ids: &IdsEstimate,
    laplace: &LaplaceEstimate,
    base_tolerance: f64,
    window_limit: f64,
) -> Result<Vec<TauberianPoint>> {
    if ids.energies.is_empty() || !(ids.h > 0.0) {
        return Err(Error::InsufficientData("IDS estimate carries no grid data".into()));
    }
    if (ids.area - laplace.area).abs() > 1e-9 * ids.area || (ids.offset - laplace.offset).abs() > 1e-12 {
        return Err(Error::InvalidParameter("IDS and Laplace estimates use different boxes or references".into()));
    }
    let e = &ids.energies;
    let n = &ids.mean_count_per_area;
    let last = e.len() - 1;
    let total_density = 1.0 / (ids.h * ids.h);
    let mut out = Vec::with_capacity(laplace.t.len());
    for (i, &t) in laplace.t.iter().enumerate() {
        let mut s = 0.0;
        let mut s_left = 0.0;
        let mut var_bound = 0.0;
        let mut prev_n = 0.0;
        let mut prev_e = 0.0f64;
        for j in 0..=last {
            let jump = n[j] - prev_n;
            s += (-t * e[j]).exp() * jump;
            s_left += (-t * prev_e.min(e[j])).exp() * jump;
            prev_n = n[j];
            prev_e = e[j];
            // S = sum_j N_j (w_j - w_{j+1}) with w_{last+1} = 0.
            let w_next = if j < last { (-t * e[j + 1]).exp() } else { 0.0 };
            var_bound += ids.stderr[j] * ((-t * e[j]).exp() - w_next).abs();
        }
        let l = laplace.mean[i];
        let deviation = (l - s).abs() / l.abs().max(f64::MIN_POSITIVE);
        let combined_stderr = ((var_bound / s.max(f64::MIN_POSITIVE)).powi(2) + (laplace.stderr[i] / l).powi(2)).sqrt();
        let truncation_share = laplace.truncation_bound[i] / l;
        let window_share = (-t * e[last]).exp() * (total_density - n[last]).max(0.0) / s.max(f64::MIN_POSITIVE);
        let tolerance = base_tolerance.max(3.0 * combined_stderr + truncation_share);
        let verdict = (window_share <= window_limit).then_some(deviation <= tolerance);
        out.push(TauberianPoint {
            t,
            stieltjes: s,
            stieltjes_left: s_left,
            laplace: l,
            deviation,
            combined_stderr,
            truncation_share,
            window_share,
            tolerance,
            verdict,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum FitForm {
    /// `log N = p log E + c`.
    PowerLaw,
    /// `log N = -p |log E|^exponent + c`.
    StretchedForm { exponent: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub form: FitForm,
    pub p: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub window: [f64; 2],
    pub points: usize,
    pub predicted: Option<f64>,
    pub bracket: Option<[f64; 2]>,
}

impl TailFit {
    /// Whether `p` lies in the bracket widened by `sigmas` standard errors.
    pub fn in_bracket(&self, sigmas: f64) -> Option<bool> {
        self.bracket.map(|[lo, hi]| self.p >= lo - sigmas * self.stderr && self.p <= hi + sigmas * self.stderr)
    }
}

/// Least-squares fit of `form` over the estimate points in `window` with a
/// positive count. Points are weighted by `(N / stderr)^2` when every
/// stderr is positive, otherwise unweighted. The reported stderr is the
/// parameter standard error, inflated by the reduced chi-square when that
/// exceeds one.
pub fn fit_tail(ids: &IdsEstimate, window: [f64; 2], form: FitForm) -> Result<TailFit> {
    if !(window[0] > 0.0 && window[0] < window[1]) {
        return Err(Error::InvalidParameter(format!("bad fit window {window:?}")));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut sig = Vec::new();
    for i in 0..ids.energies.len() {
        let (e, n) = (ids.energies[i], ids.mean_count_per_area[i]);
        if e < window[0] || e > window[1] || !(n > 0.0) {
            continue;
        }
        let x = match form {
            FitForm::PowerLaw => e.ln(),
            FitForm::StretchedForm { exponent } => -e.ln().abs().powf(exponent),
        };
        xs.push(x);
        ys.push(n.ln());
        sig.push(ids.stderr[i] / n);
    }
    if xs.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} points with positive counts in the window; at least 4 are needed",
            xs.len()
        )));
    }
    let weighted = sig.iter().all(|&s| s > 0.0);
    let w: Vec<f64> = if weighted { sig.iter().map(|s| 1.0 / (s * s)).collect() } else { vec![1.0; xs.len()] };
    let sw: f64 = w.iter().sum();
    let xm = w.iter().zip(&xs).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = w.iter().zip(&ys).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(&xs).map(|(w, x)| w * (x - xm).powi(2)).sum();
    let sxy: f64 = w.iter().zip(xs.iter().zip(&ys)).map(|(w, (x, y))| w * (x - xm) * (y - ym)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("fit abscissae are degenerate".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let dof = (xs.len() - 2) as f64;
    let chi2: f64 = w.iter().zip(xs.iter().zip(&ys)).map(|(w, (x, y))| w * (y - intercept - slope * x).powi(2)).sum();
    let stderr = if weighted { (1.0 / sxx).sqrt() * (chi2 / dof).sqrt().max(1.0) } else { (chi2 / dof / sxx).sqrt() };
    Ok(TailFit { form, p: slope, stderr, intercept, window, points: xs.len(), predicted: None, bracket: None })
}

/// Closed-form prediction of the tail constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum Prediction {
    /// `N(E) ~ E^coefficient`.
    PowerLaw { coefficient: f64 },
    /// `log N(E) ~ -coefficient |log E|^exponent`.
    Stretched { exponent: f64, coefficient: f64 },
    /// Algebraic impurities: `log N(E)` scales like `E^{-scale_exponent}`;
    /// the constant is not available in closed form.
    DifferentUniversality { scale_exponent: f64, note: String },
}

impl Prediction {
    pub fn coefficient(&self) -> Option<f64> {
        match *self {
            Prediction::PowerLaw { coefficient } | Prediction::Stretched { coefficient, .. } => Some(coefficient),
            Prediction::DifferentUniversality { .. } => None,
        }
    }

    pub fn form(&self) -> Option<FitForm> {
        match *self {
            Prediction::PowerLaw { .. } => Some(FitForm::PowerLaw),
            Prediction::Stretched { exponent, .. } => Some(FitForm::StretchedForm { exponent }),
            Prediction::DifferentUniversality { .. } => None,
        }
    }
}

/// Gaussian: `pi nu (lambda^2 + 2/B)`; compact: `2 pi nu / B`; stretched:
/// `pi nu lambda^2` on `|log E|^{2/alpha}`; algebraic: flagged.
pub fn predicted_exponent<R: Real>(b: R, nu: R, profile: &SingleSiteProfile<R>) -> Result<Prediction> {
    let (b, nu) = (b.as_f64(), nu.as_f64());
    if !(b > 0.0 && nu > 0.0) {
        return Err(Error::InvalidParameter("prediction needs B > 0 and nu > 0".into()));
    }
    Ok(match *profile.kind() {
        ProfileKind::Gaussian { lambda } => {
            let l = lambda.as_f64();
            Prediction::PowerLaw { coefficient: PI * nu * (l * l + 2.0 / b) }
        }
        ProfileKind::SuperGaussianCompact { .. } | ProfileKind::CompactDisc { .. } => {
            Prediction::PowerLaw { coefficient: 2.0 * PI * nu / b }
        }
        ProfileKind::StretchedGaussian { alpha, lambda } => {
            let l = lambda.as_f64();
            Prediction::Stretched { exponent: 2.0 / alpha.as_f64(), coefficient: PI * nu * l * l }
        }
        ProfileKind::Algebraic { alpha, .. } => Prediction::DifferentUniversality {
            scale_exponent: 2.0 / (alpha.as_f64() - 2.0),
            note: "different universality: E^{2/(alpha-2)} scale, constant not implemented".into(),
        },
    })
}

/// Two-sided bound on the Gaussian tail constant:
/// `[pi nu max(lambda^2, 2/B), pi nu (lambda^2 + 2/B)]`. `None` for other kinds.
pub fn bracket<R: Real>(b: R, nu: R, profile: &SingleSiteProfile<R>) -> Option<[f64; 2]> {
    match *profile.kind() {
        ProfileKind::Gaussian { lambda } => {
            let (b, nu, l2) = (b.as_f64(), nu.as_f64(), lambda.as_f64().powi(2));
            Some([PI * nu * l2.max(2.0 / b), PI * nu * (l2 + 2.0 / b)])
        }
        _ => None,
    }
}

/// Log-spaced energies from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || points < 2 {
        return Err(Error::InvalidParameter(format!("bad geometric grid [{lo}, {hi}] with {points} points")));
    }
    let r = (hi / lo).ln() / (points - 1) as f64;
    Ok((0..points).map(|i| if i + 1 == points { hi } else { lo * (r * i as f64).exp() }).collect())
}

/// Density of one Landau level per unit area, `B / 2 pi`.
pub fn landau_level_density(b: f64) -> f64 {
    b / (2.0 * PI)
}
