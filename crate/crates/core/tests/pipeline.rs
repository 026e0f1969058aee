use lifschitz::greens::{solve_green, Obstacle};
use lifschitz::ids::{estimate_ids, estimate_laplace, trial_operator};
use lifschitz::isobound::{verify_iso_bound, IsoShape};
use lifschitz::linalg::EigenOptions;
use lifschitz::operator::{assemble_hamiltonian, landau_degeneracy_check, Gauge};
use lifschitz::potential::{random_potential_field, sample_poisson};
use lifschitz::spectral::{count_below, lowest_eigenvalues};
use lifschitz::{Domain, Grid, Hamiltonian, Impurities, Profile, Setup};

fn setup() -> Setup {
    Setup::new(1.0, 0.2, Profile::gaussian(0.8).unwrap(), 3.0, 0.125)
}

#[test]
fn counts_agree_with_eigenvalues() {
    let s = setup();
    let grid: Grid = s.grid().unwrap();
    let op: Hamiltonian = trial_operator(&s, &grid, 17).unwrap();
    let spec = lowest_eigenvalues(&op, 25, &EigenOptions::default()).unwrap();
    for w in spec.eigenvalues.windows(2).step_by(3) {
        if w[1] - w[0] > 1e-9 {
            let mid = 0.5 * (w[0] + w[1]);
            let below = spec.eigenvalues.iter().filter(|&&e| e < mid).count();
            assert_eq!(count_below(&op, mid).unwrap(), below);
        }
    }
}

#[test]
fn potential_is_gauge_independent_input() {
    let s = setup();
    let config: Impurities = sample_poisson(s.m, s.padding(), s.nu, 3).unwrap();
    let grid = s.grid().unwrap();
    let v = random_potential_field(&config, &s.profile, &grid.points());
    let sym = lowest_eigenvalues(&assemble_hamiltonian(&grid, &v).unwrap(), 6, &EigenOptions::default()).unwrap();
    let landau = grid.with_gauge(Gauge::Landau);
    let lan = lowest_eigenvalues(&assemble_hamiltonian(&landau, &v).unwrap(), 6, &EigenOptions::default()).unwrap();
    for (a, b) in sym.eigenvalues.iter().zip(&lan.eigenvalues) {
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-3), "{a} vs {b}");
    }
}

#[test]
fn ids_and_heat_trace_are_consistent_curves() {
    let s = setup();
    let opts = EigenOptions::default();
    let ids = estimate_ids(&s, &[1e-3, 1e-2, 0.1, 0.5, 1.5], 6, 4, &opts).unwrap();
    assert!(ids.mean_count_per_area.windows(2).all(|w| w[0] <= w[1]));
    assert!(ids.failed.is_empty());
    let t = [1.0, 2.0, 3.0, 4.0];
    let lap = estimate_laplace(&s, &t, 6, 4, 30, &opts).unwrap();
    assert!(lap.mean.windows(2).all(|w| w[0] > w[1]));
    // Log-convexity on equally spaced t.
    let l: Vec<f64> = lap.mean.iter().map(|v| v.ln()).collect();
    for w in l.windows(3) {
        assert!(w[1] <= 0.5 * (w[0] + w[2]) + 1e-12);
    }
}

#[test]
fn obstacles_lower_the_torsion_maximum() {
    let base = Domain::new(2.0, vec![], 0.05).unwrap();
    let mut obstacles = vec![Obstacle::Annulus { center: [0.5, 0.3], r_in: 0.2, r_out: 0.4 }];
    let one = Domain::new(2.0, obstacles.clone(), 0.05).unwrap();
    obstacles.push(Obstacle::Disc { center: [-0.8, -0.6], radius: 0.3 });
    let two = Domain::new(2.0, obstacles, 0.05).unwrap();
    let g: Vec<f64> = [&base, &one, &two].iter().map(|d| solve_green(d).unwrap().g_max().0).collect();
    assert!(g[0] >= g[1] && g[1] >= g[2], "{g:?}");
    let grown = solve_green(&two.enlarged(0.1).unwrap()).unwrap().g_max().0;
    assert!(grown >= g[2]);
}

#[test]
fn iso_bound_holds_on_a_square() {
    let c =
        verify_iso_bound(IsoShape::Square { half_width: 3.0 }, 1.0, 1.0, 0.3, None, &EigenOptions::default()).unwrap();
    assert!(c.pass && c.lambda_computed >= c.bound, "{c:?}");
    assert!((c.area - 36.0).abs() < 1e-12);
}

#[test]
fn lowest_landau_level_multiplicity() {
    let opts = EigenOptions::default();
    let mut bulk = Vec::new();
    for b in [1.0, 2.0] {
        let grid = Grid::new(6.0, 0.125, b, Gauge::Symmetric).unwrap();
        let d = landau_degeneracy_check(&grid, &opts).unwrap().expect("box is wide enough");
        assert!(d.relative_error <= 0.15, "{d:?}");
        // Cross-oracle: inertia count at the window edge.
        let op = assemble_hamiltonian(&grid, &vec![0.0; grid.dim()]).unwrap();
        assert_eq!(count_below(&op, b / 4.0).unwrap(), d.count_in_window);
        bulk.push(d.bulk_count);
    }
    assert!((bulk[1] / bulk[0] - 2.0).abs() <= 0.4, "{bulk:?}");
}
