//! Subcommand bodies. Each writes its artifacts and returns named checks.

use std::path::Path;

use lifschitz::greens::{heuristic_eigenvalue, solve_green};
use lifschitz::ids::{
    bracket, estimate_ids, estimate_laplace, fit_tail, predicted_exponent, tauberian_crosscheck, FitForm, IdsEstimate,
    LaplaceEstimate,
};
use lifschitz::isobound::{iso_sweep, verify_iso_bound, write_iso_csv, IsoCheck, IsoShape};
use lifschitz::operator::{gauge_transform_check, MagneticGrid};
use lifschitz::potential::{sample_poisson, ProfileKind, SingleSiteProfile};
use lifschitz::spectral::free_spectrum as free_spectrum_report;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::artifact::Artifacts;
use crate::config::{ExperimentConfig, IsoShapeKind};
use crate::error::CliError;
use crate::svg::{Plot, Series};

/// A named pass/fail outcome.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, detail: detail.into() }
    }
}

fn ids_plot(title: &str, curves: &[(&str, &IdsEstimate)]) -> String {
    Plot {
        title: title.into(),
        x_label: "E".into(),
        y_label: "N(E) per unit area".into(),
        log_x: true,
        log_y: true,
        series: curves
            .iter()
            .map(|(name, e)| Series {
                name: name.to_string(),
                points: e.energies.iter().copied().zip(e.mean_count_per_area.iter().copied()).collect(),
            })
            .collect(),
    }
    .render()
}

fn run_ids(cfg: &ExperimentConfig, profile: SingleSiteProfile<f64>) -> Result<IdsEstimate, CliError> {
    let setup = cfg.setup_with(profile)?;
    let energies = cfg.outputs.energies.values()?;
    Ok(estimate_ids(&setup, &energies, cfg.numerics.trials, cfg.numerics.base_seed, &cfg.eigen_options())?)
}

fn run_laplace(cfg: &ExperimentConfig) -> Result<LaplaceEstimate, CliError> {
    let setup = cfg.setup()?;
    let t = cfg.outputs.t_grid.values()?;
    let n = &cfg.numerics;
    Ok(estimate_laplace(&setup, &t, n.trials, n.base_seed, n.k_eigs, &cfg.eigen_options())?)
}

fn write_ids(art: &mut Artifacts, cfg: &ExperimentConfig, name: &str, est: &IdsEstimate) -> Result<(), CliError> {
    art.csv(&format!("{name}.csv"), |buf| Ok(est.write_csv(buf)?))?;
    art.json(&format!("{name}.json"), &json!({ "estimate": est }))?;
    if cfg.outputs.plots {
        art.svg(&format!("{name}.svg"), ids_plot("Integrated density of states", &[(name, est)]))?;
    }
    Ok(())
}

pub fn free_spectrum(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Vec<Check>, CliError> {
    let n = &cfg.numerics;
    let grid = MagneticGrid::new(n.m, n.h, cfg.physics.b, n.gauge)?;
    let opts = cfg.eigen_options();
    let report = free_spectrum_report(&grid, n.k_eigs, cfg.free.k_excited, &opts)?;
    let gauge = if cfg.free.gauge_check {
        Some(gauge_transform_check(&grid, &vec![0.0; grid.dim()], n.k_eigs, &opts)?)
    } else {
        None
    };
    let checks = vec![
        Check::new(
            "lambda0",
            report.lambda0.abs() <= cfg.free.bottom_tolerance,
            format!("lambda0 = {:e}, tolerance {}", report.lambda0, cfg.free.bottom_tolerance),
        ),
        Check::new(
            "first_excited",
            report.excited_relative_error <= cfg.free.gap_tolerance,
            format!("relative error {:e}, tolerance {}", report.excited_relative_error, cfg.free.gap_tolerance),
        ),
    ];
    art.csv("free_spectrum.csv", |buf| {
        use std::io::Write;
        writeln!(buf, "set,index,eigenvalue")?;
        for (i, v) in report.lowest.iter().enumerate() {
            writeln!(buf, "lowest,{i},{v:e}")?;
        }
        for (i, v) in report.excited.iter().enumerate() {
            writeln!(buf, "near_b,{i},{v:e}")?;
        }
        Ok(())
    })?;
    art.json("free_spectrum.json", &json!({ "report": report, "gauge_relative_difference": gauge, "checks": checks }))?;
    Ok(checks)
}

pub fn ids(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Vec<Check>, CliError> {
    let est = run_ids(cfg, cfg.profile()?)?;
    write_ids(art, cfg, "ids", &est)?;
    Ok(vec![Check::new("trials", est.failed.is_empty(), format!("{} discarded trials", est.failed.len()))])
}

pub fn laplace(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Vec<Check>, CliError> {
    let est = run_laplace(cfg)?;
    art.csv("laplace.csv", |buf| Ok(est.write_csv(buf)?))?;
    art.json("laplace.json", &json!({ "estimate": est }))?;
    if cfg.outputs.plots {
        let plot = Plot {
            title: "Heat trace per unit area".into(),
            x_label: "t".into(),
            y_label: "L(t)".into(),
            log_x: true,
            log_y: true,
            series: vec![Series {
                name: "L(t)".into(),
                points: est.t.iter().copied().zip(est.mean.iter().copied()).collect(),
            }],
        };
        art.svg("laplace.svg", plot.render())?;
    }
    Ok(vec![Check::new("trials", est.failed.is_empty(), format!("{} discarded trials", est.failed.len()))])
}

#[derive(Deserialize)]
struct IdsRow {
    #[serde(rename = "E")]
    e: f64,
    #[serde(rename = "N_mean")]
    mean: f64,
    #[serde(rename = "N_stderr")]
    stderr: f64,
    trials: usize,
}

/// Reads an `E,N_mean,N_stderr,trials` file; `#` lines are skipped.
pub fn read_ids_csv(path: &Path) -> Result<IdsEstimate, CliError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_path(path)?;
    let (mut e, mut n, mut s, mut trials) = (Vec::new(), Vec::new(), Vec::new(), 0);
    for row in rdr.deserialize() {
        let row: IdsRow = row?;
        e.push(row.e);
        n.push(row.mean);
        s.push(row.stderr);
        trials = row.trials;
    }
    Ok(IdsEstimate::from_curve(e, n, s, trials)?)
}

pub fn tail_fit(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Vec<Check>, CliError> {
    let profile = cfg.profile()?;
    let est = match &cfg.outputs.input {
        Some(path) => read_ids_csv(path)?,
        None => {
            let est = run_ids(cfg, profile)?;
            write_ids(art, cfg, "ids", &est)?;
            est
        }
    };
    let prediction = predicted_exponent(cfg.physics.b, cfg.physics.nu, &profile)?;
    let form = cfg.outputs.fit_form.or_else(|| prediction.form()).unwrap_or(FitForm::PowerLaw);
    let mut fit = fit_tail(&est, cfg.outputs.fit_window, form)?;
    fit.predicted = prediction.coefficient();
    fit.bracket = bracket(cfg.physics.b, cfg.physics.nu, &profile);
    let verdict = fit.in_bracket(3.0);
    let checks = match verdict {
        Some(ok) => {
            vec![Check::new("bracket", ok, format!("p = {} +- {}, bracket {:?}", fit.p, fit.stderr, fit.bracket))]
        }
        None => Vec::new(),
    };
    art.json(
        "tail_fit.json",
        &json!({ "fit": fit, "prediction": prediction, "in_bracket_3sigma": verdict, "checks": checks }),
    )?;
    Ok(checks)
}

pub fn tauberian(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Vec<Check>, CliError> {
    let est = run_ids(cfg, cfg.profile()?)?;
    let lap = run_laplace(cfg)?;
    let points = tauberian_crosscheck(&est, &lap, cfg.tauberian.base_tolerance, cfg.tauberian.window_limit)?;
    write_ids(art, cfg, "ids", &est)?;
    art.csv("laplace.csv", |buf| Ok(lap.write_csv(buf)?))?;
    art.csv("tauberian.csv", |buf| {
        use std::io::Write;
        writeln!(buf, "t,stieltjes,stieltjes_left,laplace,deviation,combined_stderr,truncation_share,window_share,tolerance,verdict")?;
        for p in &points {
            let verdict = match p.verdict {
                Some(true) => "pass",
                Some(false) => "fail",
                None => "flagged",
            };
            writeln!(
                buf,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{verdict}",
                p.t, p.stieltjes, p.stieltjes_left, p.laplace, p.deviation, p.combined_stderr, p.truncation_share, p.window_share, p.tolerance
            )?;
        }
        Ok(())
    })?;
    let checks: Vec<Check> = points
        .iter()
        .filter_map(|p| {
            p.verdict.map(|ok| {
                Check::new(
                    format!("t={}", p.t),
                    ok,
                    format!("deviation {:e}, tolerance {:e}", p.deviation, p.tolerance),
                )
            })
        })
        .collect();
    art.json("tauberian.json", &json!({ "points": points, "checks": checks }))?;
    if cfg.outputs.plots {
        let plot = Plot {
            title: "Laplace transform vs Stieltjes sum".into(),
            x_label: "t".into(),
            y_label: "per unit area".into(),
            log_x: true,
            log_y: true,
            series: vec![
                Series { name: "heat trace".into(), points: points.iter().map(|p| (p.t, p.laplace)).collect() },
                Series { name: "Stieltjes".into(), points: points.iter().map(|p| (p.t, p.stieltjes)).collect() },
            ],
        };
        art.svg("tauberian.svg", plot.render())?;
    }
    Ok(checks)
}

pub fn green(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Vec<Check>, CliError> {
    let g = &cfg.green;
    let centers = match &g.centers {
        Some(c) => c.clone(),
        None => sample_poisson(g.half_width, 0.0, cfg.physics.nu, cfg.numerics.base_seed)?.points,
    };
    let domain = cfg.green_domain(&centers)?;
    let field = solve_green(&domain)?;
    let (g_max, argmax) = field.g_max();
    let heuristic = heuristic_eigenvalue(&field, cfg.physics.b, g.l)?;
    art.csv("green.csv", |buf| Ok(field.write_csv(buf)?))?;
    art.json(
        "green.json",
        &json!({
            "g_max": g_max,
            "argmax": argmax,
            "residual": field.residual,
            "obstacle_count": centers.len(),
            "centers": centers,
            "heuristic": heuristic,
        }),
    )?;
    Ok(vec![Check::new("residual", field.residual < 1e-8, format!("scaled residual {:e}", field.residual))])
}

fn iso_rows(cfg: &ExperimentConfig) -> Result<Vec<IsoCheck>, CliError> {
    cfg.validate_iso()?;
    let iso = &cfg.iso;
    let opts = cfg.eigen_options();
    Ok(match iso.shape {
        IsoShapeKind::Disc => iso_sweep(&iso.radii_lb, &iso.fields, &iso.lengths, iso.kappa, &opts)?,
        IsoShapeKind::Square => {
            let mut jobs = Vec::new();
            for &b in &iso.fields {
                for &l in &iso.lengths {
                    for &r in &iso.radii_lb {
                        jobs.push((r / b.sqrt(), b, l));
                    }
                }
            }
            jobs.into_par_iter()
                .map(|(s, b, l)| verify_iso_bound(IsoShape::Square { half_width: s }, b, l, iso.kappa, None, &opts))
                .collect::<lifschitz::Result<Vec<_>>>()?
        }
    })
}

pub fn iso_check(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Vec<Check>, CliError> {
    let rows = iso_rows(cfg)?;
    art.csv("iso.csv", |buf| Ok(write_iso_csv(&rows, buf)?))?;
    let checks: Vec<Check> = rows
        .iter()
        .map(|r| {
            Check::new(
                format!("R={:.4},B={},L={}", r.r_omega, r.b, r.l),
                r.pass,
                format!("lambda {:e} vs bound {:e}", r.lambda_computed, r.bound),
            )
        })
        .collect();
    art.json("iso.json", &json!({ "rows": rows, "checks": checks }))?;
    if cfg.outputs.plots {
        let mut series: Vec<Series> = Vec::new();
        for r in &rows {
            let name = format!("B={} L={}", r.b, r.l);
            let point = (r.r_omega * r.b.sqrt(), r.lambda_computed / r.bound);
            match series.iter_mut().find(|s| s.name == name) {
                Some(s) => s.points.push(point),
                None => series.push(Series { name, points: vec![point] }),
            }
        }
        let plot = Plot {
            title: "Ground state over the rearrangement bound".into(),
            x_label: "R / l_B".into(),
            y_label: "lambda / bound".into(),
            log_x: false,
            log_y: true,
            series,
        };
        art.svg("iso.svg", plot.render())?;
    }
    Ok(checks)
}

fn kind_name(k: &ProfileKind<f64>) -> &'static str {
    match k {
        ProfileKind::Gaussian { .. } => "gaussian",
        ProfileKind::Algebraic { .. } => "algebraic",
        ProfileKind::StretchedGaussian { .. } => "stretched_gaussian",
        ProfileKind::SuperGaussianCompact { .. } => "super_gaussian_compact",
        ProfileKind::CompactDisc { .. } => "compact_disc",
    }
}

pub fn regimes(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Vec<Check>, CliError> {
    let mut runs = Vec::new();
    for kind in &cfg.regimes.profiles {
        let profile = SingleSiteProfile::new(*kind)?;
        let est = run_ids(cfg, profile)?;
        let prediction = predicted_exponent(cfg.physics.b, cfg.physics.nu, &profile)?;
        let form = prediction.form().unwrap_or(FitForm::PowerLaw);
        let fit = fit_tail(&est, cfg.outputs.fit_window, form).map_err(|e| e.to_string());
        runs.push((kind_name(kind), *kind, est, prediction, fit));
    }
    art.csv("regimes.csv", |buf| {
        use std::io::Write;
        writeln!(buf, "profile,E,N_mean,N_stderr,trials")?;
        for (name, _, est, _, _) in &runs {
            for i in 0..est.energies.len() {
                writeln!(
                    buf,
                    "{name},{:e},{:e},{:e},{}",
                    est.energies[i], est.mean_count_per_area[i], est.stderr[i], est.trials
                )?;
            }
        }
        Ok(())
    })?;
    let fits: Vec<_> = runs
        .iter()
        .map(|(name, kind, _, prediction, fit)| match fit {
            Ok(f) => json!({ "profile": name, "parameters": kind, "prediction": prediction, "fit": f }),
            Err(e) => json!({ "profile": name, "parameters": kind, "prediction": prediction, "fit_error": e }),
        })
        .collect();
    art.json("regimes.json", &json!({ "runs": fits }))?;
    if cfg.outputs.plots {
        let curves: Vec<(&str, &IdsEstimate)> = runs.iter().map(|(n, _, e, _, _)| (*n, e)).collect();
        art.svg("regimes.svg", ids_plot("Tail regimes", &curves))?;
    }
    Ok(Vec::new())
}
