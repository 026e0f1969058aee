//! Experiment configuration, read from TOML.
//!
//! ```toml
//! [physics]
//! b = 1.0
//! nu = 0.05
//! profile = { kind = "gaussian", lambda = 1.0 }
//!
//! [numerics]
//! m = 12.0
//! h = 0.1
//! k_eigs = 10
//! tol = 1e-10
//! trials = 20
//! base_seed = 1
//!
//! [outputs]
//! energies = { lo = 1e-4, hi = 1e-1, points = 8 }
//! t_grid = [2.0, 5.0, 10.0, 20.0]
//! fit_window = [1e-4, 1e-3]
//! dir = "out"
//! ```
//!
//! Every section and field has a default; `green`, `iso`, `tauberian`,
//! `free` and `regimes` only matter to their subcommands.

use std::path::{Path, PathBuf};

use lifschitz::greens::ObstacleDomain;
use lifschitz::ids::{geometric_grid, FitForm, IdsSetup};
use lifschitz::isobound::iso_resolution;
use lifschitz::linalg::eigen::EigenOptions;
use lifschitz::operator::Gauge;
use lifschitz::potential::{ProfileKind, SingleSiteProfile};
use lifschitz::spectral::EnergyReference;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub physics: Physics,
    pub numerics: Numerics,
    pub outputs: Outputs,
    pub free: FreeSection,
    pub tauberian: TauberianSection,
    pub green: GreenSection,
    pub iso: IsoSection,
    pub regimes: RegimesSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Physics {
    pub b: f64,
    pub nu: f64,
    pub profile: ProfileKind<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub m: f64,
    pub h: f64,
    /// Sampling margin; the profile's default when absent.
    pub padding: Option<f64>,
    pub k_eigs: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub gauge: Gauge,
    pub reference: EnergyReference,
}

/// Either explicit values or `points` log-spaced values from `lo` to `hi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Geometric { lo: f64, hi: f64, points: usize },
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        match self {
            GridSpec::List(v) => Ok(v.clone()),
            GridSpec::Geometric { lo, hi, points } => Ok(geometric_grid(*lo, *hi, *points)?),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub energies: GridSpec,
    pub t_grid: GridSpec,
    pub fit_window: [f64; 2],
    /// Fit form; the predicted form of the profile when absent.
    pub fit_form: Option<FitForm>,
    pub dir: PathBuf,
    /// IDS CSV read by `tail-fit`; computed afresh when absent.
    pub input: Option<PathBuf>,
    /// Turn failed checks into exit status 4.
    pub assert: bool,
    pub plots: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FreeSection {
    pub k_excited: usize,
    pub gauge_check: bool,
    /// Accepted `|lambda_0|`.
    pub bottom_tolerance: f64,
    /// Accepted relative distance of the first excited cluster from `B`.
    pub gap_tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TauberianSection {
    pub base_tolerance: f64,
    /// `t` values whose out-of-window mass share exceeds this are flagged.
    pub window_limit: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    /// Closed annuli `R <= |x - x_i| <= 2R`.
    Annuli,
    /// Closed discs `|x - x_i| <= R`.
    Discs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreenSection {
    pub half_width: f64,
    pub h: f64,
    pub obstacles: ObstacleKind,
    pub radius: f64,
    /// Obstacle centres; a Poisson sample of intensity `physics.nu` when absent.
    pub centers: Option<Vec<[f64; 2]>>,
    pub enlarge: bool,
    /// Boundary-potential length for the clearing heuristic.
    pub l: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsoShapeKind {
    Disc,
    Square,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IsoSection {
    pub shape: IsoShapeKind,
    /// Disc radii (square half-widths) in magnetic lengths.
    pub radii_lb: Vec<f64>,
    pub fields: Vec<f64>,
    pub lengths: Vec<f64>,
    pub kappa: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegimesSection {
    pub profiles: Vec<ProfileKind<f64>>,
}

impl Default for Physics {
    fn default() -> Self {
        Self { b: 1.0, nu: 0.05, profile: ProfileKind::Gaussian { lambda: 1.0 } }
    }
}

impl Default for Numerics {
    fn default() -> Self {
        let eig = EigenOptions::default();
        Self {
            m: 12.0,
            h: 0.1,
            padding: None,
            k_eigs: 10,
            tol: eig.tol,
            max_iter: eig.max_iter,
            trials: 20,
            base_seed: 1,
            gauge: Gauge::Symmetric,
            reference: EnergyReference::default(),
        }
    }
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            energies: GridSpec::Geometric { lo: 1e-4, hi: 1e-1, points: 8 },
            t_grid: GridSpec::Geometric { lo: 2.0, hi: 20.0, points: 6 },
            fit_window: [1e-4, 1e-3],
            fit_form: None,
            dir: PathBuf::from("out"),
            input: None,
            assert: false,
            plots: true,
        }
    }
}

impl Default for FreeSection {
    fn default() -> Self {
        Self { k_excited: 4, gauge_check: false, bottom_tolerance: 0.02, gap_tolerance: 0.03 }
    }
}

impl Default for TauberianSection {
    fn default() -> Self {
        Self { base_tolerance: 0.05, window_limit: 0.01 }
    }
}

impl Default for GreenSection {
    fn default() -> Self {
        Self {
            half_width: 4.0,
            h: 0.05,
            obstacles: ObstacleKind::Annuli,
            radius: 0.25,
            centers: None,
            enlarge: false,
            l: 1.0,
        }
    }
}

impl Default for IsoSection {
    fn default() -> Self {
        Self {
            shape: IsoShapeKind::Disc,
            radii_lb: vec![4.0, 5.0, 6.0, 7.0],
            fields: vec![0.5, 1.0, 2.0],
            lengths: vec![0.5, 1.0],
            kappa: 0.3,
        }
    }
}

impl Default for RegimesSection {
    fn default() -> Self {
        Self {
            profiles: vec![
                ProfileKind::Gaussian { lambda: 1.0 },
                ProfileKind::CompactDisc { v: 1.0, a: 1.0, x0: [0.0, 0.0] },
                ProfileKind::StretchedGaussian { alpha: 1.0, lambda: 1.0 },
            ],
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// SHA-256 of the canonical TOML serialization. The output directory is
    /// left out so a replay elsewhere carries the same hash.
    pub fn hash(&self) -> Result<String, CliError> {
        let mut c = self.clone();
        c.outputs.dir = PathBuf::new();
        let digest = Sha256::digest(c.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn profile(&self) -> Result<SingleSiteProfile<f64>, CliError> {
        Ok(SingleSiteProfile::new(self.physics.profile)?)
    }

    /// Physical parameters positive; `h` at most an eighth of the magnetic
    /// length and of the profile length.
    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.physics;
        let n = &self.numerics;
        positive("physics.b", p.b)?;
        positive("physics.nu", p.nu)?;
        positive("numerics.m", n.m)?;
        positive("numerics.h", n.h)?;
        positive("numerics.tol", n.tol)?;
        let profile = self.profile()?;
        let ell = (1.0 / p.b).sqrt();
        let finest = ell.min(profile.length_scale());
        if n.h > finest / 8.0 * (1.0 + 1e-12) {
            return Err(CliError::Config(format!(
                "numerics.h = {} does not resolve min(l_B, profile length) = {finest}; need h <= {}",
                n.h,
                finest / 8.0
            )));
        }
        if n.k_eigs == 0 {
            return Err(CliError::Config("numerics.k_eigs must be at least 1".into()));
        }
        // TOML integers are signed.
        if n.base_seed > i64::MAX as u64 {
            return Err(CliError::Config(format!("numerics.base_seed must be at most {}", i64::MAX)));
        }
        if n.trials < 2 {
            return Err(CliError::Config("numerics.trials must be at least 2".into()));
        }
        if let Some(pad) = n.padding {
            if !(pad >= 0.0 && pad.is_finite()) {
                return Err(CliError::Config(format!("numerics.padding must be nonnegative, got {pad}")));
            }
        }
        let [lo, hi] = self.outputs.fit_window;
        if !(lo > 0.0 && hi > lo) {
            return Err(CliError::Config(format!("outputs.fit_window must satisfy 0 < lo < hi, got [{lo}, {hi}]")));
        }
        for k in &self.regimes.profiles {
            SingleSiteProfile::new(*k)?;
        }
        Ok(())
    }

    pub fn setup(&self) -> Result<IdsSetup<f64>, CliError> {
        self.setup_with(self.profile()?)
    }

    pub fn setup_with(&self, profile: SingleSiteProfile<f64>) -> Result<IdsSetup<f64>, CliError> {
        let n = &self.numerics;
        let mut s = IdsSetup::new(self.physics.b, self.physics.nu, profile, n.m, n.h);
        s.padding = n.padding;
        s.gauge = n.gauge;
        s.reference = n.reference;
        Ok(s)
    }

    pub fn eigen_options(&self) -> EigenOptions {
        EigenOptions {
            tol: self.numerics.tol,
            max_iter: self.numerics.max_iter,
            seed: self.numerics.base_seed,
            ..EigenOptions::default()
        }
    }

    pub fn green_domain(&self, centers: &[[f64; 2]]) -> Result<ObstacleDomain<f64>, CliError> {
        let g = &self.green;
        let d = match g.obstacles {
            ObstacleKind::Annuli => ObstacleDomain::annular(g.half_width, centers, g.radius, g.h)?,
            ObstacleKind::Discs => ObstacleDomain::discs(g.half_width, centers, g.radius, g.h)?,
        };
        Ok(if g.enlarge { d.enlarged(ObstacleDomain::<f64>::standard_enlargement(g.radius))? } else { d })
    }

    /// Checks specific to the iso sweep.
    pub fn validate_iso(&self) -> Result<(), CliError> {
        let iso = &self.iso;
        if iso.radii_lb.is_empty() || iso.fields.is_empty() || iso.lengths.is_empty() {
            return Err(CliError::Config("iso sweep needs radii_lb, fields and lengths".into()));
        }
        for &v in iso.radii_lb.iter().chain(&iso.fields).chain(&iso.lengths) {
            positive("iso parameter", v)?;
        }
        if iso.kappa.is_nan() || iso.kappa < 0.0 {
            return Err(CliError::Config(format!("iso.kappa must be nonnegative, got {}", iso.kappa)));
        }
        for &b in &iso.fields {
            for &l in &iso.lengths {
                positive("iso resolution", iso_resolution(b, l))?;
            }
        }
        Ok(())
    }
}
