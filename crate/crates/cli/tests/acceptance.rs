//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always shown.
//! Positional arguments select criteria by number, e.g.
//! `cargo test --test acceptance -- 1 4`.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use lifschitz::greens::{solve_green, Obstacle, ObstacleDomain};
use lifschitz::ids::{
    bracket, estimate_ids, estimate_laplace, fit_tail, geometric_grid, tauberian_crosscheck, FitForm, IdsSetup,
};
use lifschitz::isobound::{
    contribution_maximizer, contribution_radius, iso_sweep, level_area, lp_norm, rearrange_on_domain,
    riesz_comparison_check, smoothed_boundary_field, SMOOTHED_POTENTIAL_ERROR,
};
use lifschitz::linalg::EigenOptions;
use lifschitz::operator::{gauge_transform_check, Gauge, MagneticGrid};
use lifschitz::potential::{boundary_potential, random_potential_field, sample_poisson, SingleSiteProfile};
use lifschitz::spectral::free_spectrum;
use lifschitz_cli::artifact::embedded_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, name: "free Landau spectrum", budget: Duration::from_secs(60), run: free_landau },
    Criterion { id: 2, name: "gauge invariance", budget: Duration::from_secs(120), run: gauge_invariance },
    Criterion { id: 3, name: "torsion function", budget: Duration::from_secs(30), run: torsion },
    Criterion { id: 4, name: "rearrangement inequalities", budget: Duration::from_secs(120), run: inequality_suite },
    Criterion { id: 5, name: "isoperimetric bound sweep", budget: Duration::from_secs(30 * 60), run: iso_bound_sweep },
    Criterion { id: 6, name: "contribution radius", budget: Duration::from_secs(10), run: contribution },
    Criterion { id: 7, name: "tail exponent bracket", budget: Duration::from_secs(4 * 3600), run: tail_bracket },
    Criterion { id: 8, name: "Tauberian cross-check", budget: Duration::from_secs(30 * 60), run: tauberian },
    Criterion { id: 9, name: "seeded replay determinism", budget: Duration::from_secs(30 * 60), run: determinism },
];

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for c in CRITERIA.iter().filter(|c| selected.is_empty() || selected.contains(&c.id)) {
        let start = Instant::now();
        let mut o = (c.run)();
        let elapsed = start.elapsed();
        if elapsed > c.budget {
            o.pass = false;
            o.detail += &format!("; over the {} s budget", c.budget.as_secs());
        }
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {} [{}] {verdict} ({:.1} s): {}", c.id, c.name, elapsed.as_secs_f64(), o.detail);
        if !o.pass {
            failures += 1;
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn opts() -> EigenOptions {
    EigenOptions::default()
}

fn free_landau() -> Outcome {
    const BOTTOM_TOL: f64 = 0.02;
    const EXCITED_TOL: f64 = 0.03;
    let grid = MagneticGrid::new(12.0, 0.1, 1.0, Gauge::Symmetric).unwrap();
    let r = free_spectrum(&grid, 10, 4, &opts()).unwrap();
    let pass = r.lambda0.abs() <= BOTTOM_TOL && r.excited_relative_error <= EXCITED_TOL;
    outcome(
        pass,
        format!(
            "lambda0 = {:.3e} (|.| <= {BOTTOM_TOL}), excited cluster {:.5} off B by {:.2e} (<= {EXCITED_TOL})",
            r.lambda0, r.excited_center, r.excited_relative_error
        ),
    )
}

fn gauge_invariance() -> Outcome {
    const TOL: f64 = 1e-8;
    let grid = MagneticGrid::new(12.0, 0.1, 1.0, Gauge::Symmetric).unwrap();
    let profile = SingleSiteProfile::gaussian(1.0).unwrap();
    let config = sample_poisson(12.0, profile.default_padding(), 0.05, 7).unwrap();
    let v = random_potential_field(&config, &profile, &grid.points());
    let worst = gauge_transform_check(&grid, &v, 10, &opts()).unwrap();
    outcome(worst <= TOL, format!("{} impurities, max relative difference {worst:.2e} (<= {TOL:e})", config.len()))
}

fn torsion() -> Outcome {
    const DISC_TOL: f64 = 0.01;
    const SQUARE_TOL: f64 = 0.02;
    let r: f64 = 2.0;
    let disc = solve_green(&ObstacleDomain::disc(r, r / 64.0).unwrap()).unwrap().g_max().0;
    let disc_err = (disc - r * r / 4.0).abs() / (r * r / 4.0);
    // Second-order scheme: Richardson extrapolation of two finer solves.
    let s = 1.0;
    let g = |h: f64| solve_green(&ObstacleDomain::new(s, vec![], h).unwrap()).unwrap().g_max().0;
    let (g64, g128, g256) = (g(s / 64.0), g(s / 128.0), g(s / 256.0));
    let oracle = (4.0 * g256 - g128) / 3.0;
    let square_err = (g64 - oracle).abs() / oracle;
    outcome(
        disc_err <= DISC_TOL && square_err <= SQUARE_TOL,
        format!(
            "disc G = {disc:.6} vs R^2/4 = {:.6} (rel {disc_err:.1e} <= {DISC_TOL}); square G = {g64:.6} vs extrapolated {oracle:.6} (rel {square_err:.1e} <= {SQUARE_TOL})",
            r * r / 4.0
        ),
    )
}

fn random_domain(rng: &mut ChaCha8Rng) -> ObstacleDomain<f64> {
    let s = rng.random_range(1.0..2.5);
    let mut obstacles = Vec::new();
    for _ in 0..rng.random_range(0..5) {
        let c = [rng.random_range(-s..s), rng.random_range(-s..s)];
        let r = rng.random_range(0.1..0.5);
        if rng.random_bool(0.5) {
            obstacles.push(Obstacle::Disc { center: c, radius: r });
        } else {
            obstacles.push(Obstacle::Annulus { center: c, r_in: r, r_out: 2.0 * r });
        }
    }
    ObstacleDomain::new(s, obstacles, 0.1).unwrap()
}

fn inequality_suite() -> Outcome {
    const NORM_TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut smoothed_violations = 0;
    let mut smoothed_worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let d = random_domain(&mut rng);
        let l = rng.random_range(0.3..1.5);
        let field = smoothed_boundary_field(&d, l);
        let mask = d.mask();
        let n = d.nodes_per_side();
        for (k, v) in field.iter().enumerate() {
            let cap = if mask[k] { boundary_potential(&d, l, d.node(k % n, k / n)).min(1.0) } else { 1.0 };
            smoothed_worst = smoothed_worst.max(v - cap);
            if *v > cap + SMOOTHED_POTENTIAL_ERROR {
                smoothed_violations += 1;
            }
        }
    }
    let mut riesz_failures = 0;
    let mut riesz_worst: f64 = 0.0;
    let mut measure_failures = 0;
    let mut norm_worst: f64 = 0.0;
    for _ in 0..50 {
        let d = random_domain(&mut rng);
        let l = rng.random_range(0.3..1.5);
        let mask = d.mask();
        let f: Vec<f64> = mask.iter().map(|&m| if m { rng.random_range(0.0..1.0) } else { 0.0 }).collect();
        let c = riesz_comparison_check(&d, &f, l).unwrap();
        riesz_worst = riesz_worst.max(c.lhs / c.rhs);
        if !c.holds() {
            riesz_failures += 1;
        }
        let h = d.h;
        let inside: Vec<f64> = f.iter().zip(&mask).filter(|(_, &m)| m).map(|(v, _)| *v).collect();
        let star = rearrange_on_domain(&d, &f).unwrap();
        if inside.iter().any(|&c| star.level_area(c) != level_area(&inside, h, c)) {
            measure_failures += 1;
        }
        let l2 = lp_norm(&inside, h, 2.0);
        norm_worst = norm_worst.max((star.lp_norm(2.0) - l2).abs() / l2);
    }
    let pass = smoothed_violations == 0 && riesz_failures == 0 && measure_failures == 0 && norm_worst <= NORM_TOL;
    outcome(
        pass,
        format!(
            "smoothed potential: {smoothed_violations} violations on 20 domains (max excess {smoothed_worst:.1e}, allowance {SMOOTHED_POTENTIAL_ERROR:e}); \
             Riesz: {riesz_failures}/50 failures (max lhs/rhs {riesz_worst:.4}); level areas: {measure_failures} mismatches; \
             L2 drift {norm_worst:.1e} (<= {NORM_TOL:e})"
        ),
    )
}

fn iso_bound_sweep() -> Outcome {
    let rows = iso_sweep(&[4.0, 5.0, 6.0, 7.0], &[0.5, 1.0, 2.0], &[0.5, 1.0], 0.3, &opts()).unwrap();
    let passed = rows.iter().filter(|r| r.pass).count();
    let tightest = rows.iter().map(|r| r.lambda_computed / r.bound).fold(f64::INFINITY, f64::min);
    outcome(
        passed == rows.len(),
        format!("{passed}/{} cases with lambda >= bound; smallest lambda/bound {tightest:.2}", rows.len()),
    )
}

fn contribution() -> Outcome {
    const TOL: f64 = 0.05;
    let (b, l, r) = (1.0f64, 1.0, 10.0);
    let predicted = contribution_radius(b, l, r);
    let found = contribution_maximizer(b, l, r, 1e-3, 100_000);
    let err = (found - predicted).abs() / predicted;
    outcome(err <= TOL, format!("maximizer {found:.4} vs 2R/(BL^2+2) = {predicted:.4} (rel {err:.1e} <= {TOL})"))
}

fn tail_bracket() -> Outcome {
    const SIGMAS_BRACKET: f64 = 3.0;
    const SIGMAS_ORDER: f64 = 2.0;
    const TRIALS: usize = 200;
    const WINDOW: [f64; 2] = [1e-5, 1e-4];
    const NEIGHBOUR: [f64; 2] = [1e-6, 1e-5];
    let energies = geometric_grid(1e-6, 1e-4, 9).unwrap();
    let run = |profile: SingleSiteProfile<f64>| {
        let setup = IdsSetup::new(1.0, 0.05, profile, 20.0, 0.125);
        estimate_ids(&setup, &energies, TRIALS, 1, &opts()).unwrap()
    };
    let gauss_profile = SingleSiteProfile::gaussian(1.0).unwrap();
    let gauss = run(gauss_profile);
    let compact = run(SingleSiteProfile::compact_disc(1.0, 1.0).unwrap());
    let populated = gauss
        .energies
        .iter()
        .zip(&gauss.mean_count_per_area)
        .filter(|(e, n)| **e >= WINDOW[0] && **e <= WINDOW[1] && **n > 0.0)
        .count();
    let fg = fit_tail(&gauss, WINDOW, FitForm::PowerLaw).unwrap();
    let fc = fit_tail(&compact, WINDOW, FitForm::PowerLaw).unwrap();
    let [lo, hi] = bracket(1.0, 0.05, &gauss_profile).unwrap();
    let in_bracket = fg.p >= lo - SIGMAS_BRACKET * fg.stderr && fg.p <= hi + SIGMAS_BRACKET * fg.stderr;
    let combined = fg.stderr.hypot(fc.stderr);
    let ordered = fc.p < fg.p + SIGMAS_ORDER * combined;
    let side = fit_tail(&gauss, NEIGHBOUR, FitForm::PowerLaw).unwrap();
    outcome(
        in_bracket && ordered && populated >= 4 && gauss.failed.is_empty() && compact.failed.is_empty(),
        format!(
            "{} trials, window {WINDOW:?} with {populated} populated points; p_gauss = {:.3} +- {:.3} vs [{lo:.3}, {hi:.3}] +- {SIGMAS_BRACKET} sigma; \
             p_compact = {:.3} +- {:.3} (< p_gauss + {SIGMAS_ORDER} sigma = {:.3}); decade below: p_gauss = {:.3} +- {:.3}",
            gauss.trials,
            fg.p,
            fg.stderr,
            fc.p,
            fc.stderr,
            fg.p + SIGMAS_ORDER * combined,
            side.p,
            side.stderr
        ),
    )
}

fn tauberian() -> Outcome {
    const FREE_TOL: f64 = 0.05;
    const RANDOM_TOL: f64 = 0.10;
    const WINDOW_LIMIT: f64 = 0.01;
    const K: usize = 90;
    let b = 1.0;
    let t: Vec<f64> = [2.0, 3.0, 5.0, 7.0, 10.0, 14.0, 20.0].iter().map(|x| x / b).collect();
    // Ratio-1.03 energy grid up to well past the heat-trace cutoff.
    let energies = geometric_grid(1e-6, 7.0, 535).unwrap();
    let gauss = SingleSiteProfile::gaussian(1.0).unwrap();

    let mut free = IdsSetup::new(b, 1e-9, gauss, 4.0, 0.125);
    free.padding = Some(0.0);
    let ids = estimate_ids(&free, &energies, 2, 1, &opts()).unwrap();
    let lap = estimate_laplace(&free, &t, 2, 1, K, &opts()).unwrap();
    let free_points = tauberian_crosscheck(&ids, &lap, FREE_TOL, WINDOW_LIMIT).unwrap();
    let free_worst = free_points.iter().map(|p| p.deviation).fold(0.0, f64::max);
    let free_ok = free_points.iter().all(|p| p.verdict.is_some() && p.deviation <= FREE_TOL);

    let random = IdsSetup::new(b, 0.2, gauss, 4.0, 0.125);
    let ids = estimate_ids(&random, &energies, 20, 5, &opts()).unwrap();
    let lap = estimate_laplace(&random, &t, 20, 5, K, &opts()).unwrap();
    let points = tauberian_crosscheck(&ids, &lap, RANDOM_TOL, WINDOW_LIMIT).unwrap();
    let windowed: Vec<_> = points.iter().filter(|p| p.verdict.is_some()).collect();
    let random_ok = !windowed.is_empty() && windowed.iter().all(|p| p.deviation <= RANDOM_TOL + p.truncation_share);
    let random_worst = windowed.iter().map(|p| p.deviation - p.truncation_share).fold(0.0, f64::max);
    outcome(
        free_ok && random_ok,
        format!(
            "free: max deviation {free_worst:.2e} over t in [{}, {}] (<= {FREE_TOL}); random: {} of {} t windowed, max deviation beyond truncation {random_worst:.2e} (<= {RANDOM_TOL})",
            t[0],
            t[t.len() - 1],
            windowed.len(),
            points.len()
        ),
    )
}

const REPLAY_CONFIG: &str = r#"
[physics]
b = 1.0
nu = 0.1
profile = { kind = "gaussian", lambda = 1.0 }

[numerics]
m = 4.0
h = 0.125
k_eigs = 40
trials = 8
base_seed = 41

[outputs]
energies = { lo = 1e-3, hi = 1.0, points = 8 }
t_grid = [2.0, 5.0, 10.0]
fit_window = [1e-2, 1.0]

[green]
half_width = 2.0
h = 0.05
radius = 0.2
"#;

fn lifschitz(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_lifschitz")).args(args).output().map(|o| o.status.success()).unwrap_or(false)
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, REPLAY_CONFIG).unwrap();
    // The replay config carries a different base seed; the embedded seed must win.
    let replay_cfg = tmp.path().join("replay.toml");
    fs::write(&replay_cfg, REPLAY_CONFIG.replace("base_seed = 41", "base_seed = 999")).unwrap();
    let cfg = cfg.to_str().unwrap();
    let mut mismatched = Vec::new();
    let mut compared = 0;
    for command in ["tauberian", "regimes", "green"] {
        let first = tmp.path().join(format!("{command}-1"));
        if !lifschitz(&[command, "--config", cfg, "--out", first.to_str().unwrap(), "--threads", "1"]) {
            return outcome(false, format!("{command} run failed"));
        }
        let original = csv_files(&first);
        let seed = embedded_seed(&String::from_utf8_lossy(&original[0].1)).expect("embedded seed").to_string();
        for threads in ["2", "4"] {
            let again = tmp.path().join(format!("{command}-{threads}"));
            let args = [
                command,
                "--config",
                replay_cfg.to_str().unwrap(),
                "--out",
                again.to_str().unwrap(),
                "--threads",
                threads,
                "--seed",
                &seed,
            ];
            if !lifschitz(&args) {
                return outcome(false, format!("{command} replay failed"));
            }
            let replay = csv_files(&again);
            for ((name, a), (_, b)) in original.iter().zip(&replay) {
                compared += 1;
                if a != b {
                    mismatched.push(format!("{command}/{name}@{threads}"));
                }
            }
            if replay.len() != original.len() {
                mismatched.push(format!("{command}: file set differs at {threads} threads"));
            }
        }
    }
    outcome(
        mismatched.is_empty(),
        format!("{compared} CSV comparisons across 1, 2 and 4 threads; mismatches: {mismatched:?}"),
    )
}
