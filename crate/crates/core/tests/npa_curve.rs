use locrand::npa::{build_instance, chsh_curve, default_grid, lower_bound_p2, write_curve_csv, NpaOptions, SequentialStrategy};
use locrand::sdp::{min_eigenvalue, SolverOptions};
use locrand::strategies::{chsh_lower_line, chsh_mixed, tsirelson_score};

#[test]
fn tsirelson_at_levels_one_and_two() {
    let t = (2.0 + 2f64.sqrt()) / 4.0;
    for level in [1, 2] {
        let got = build_instance(level).unwrap().max_p1(&SolverOptions::default()).unwrap();
        assert!((got - t).abs() < 1e-6, "level {level}: {got}");
    }
    assert!((tsirelson_score() - t).abs() < 1e-15);
}

#[test]
fn mixing_line_endpoints() {
    let (p1, p2) = chsh_mixed(0.0).unwrap();
    assert!((p1 - tsirelson_score()).abs() < 1e-12 && (p2 - p1).abs() < 1e-12);
    let (p1, p2) = chsh_mixed(1.0).unwrap();
    assert!((p1 - 0.75).abs() < 1e-12 && (p2 - 1.0).abs() < 1e-12);
    assert!(chsh_mixed(1.5).is_err());
}

#[test]
fn optimal_strategy_moments_are_feasible() {
    // The Tsirelson strategy followed by Bob's guess is a point of every
    // level, so its moment matrix must be PSD.
    let s = SequentialStrategy::chsh_optimal_guess();
    for level in 1..=2 {
        let inst = build_instance(level).unwrap();
        let m = s.moment_matrix(&inst);
        assert!(min_eigenvalue(&m) > -1e-9, "level {level}");
    }
}

#[test]
fn level_two_curve_is_a_sandwich() {
    let points = chsh_curve(&default_grid(), 2, &NpaOptions::default()).unwrap();
    assert_eq!(points.len(), 9);
    for p in &points {
        assert!(p.converged(), "P1 = {}", p.p1);
        assert!(p.lower_bound <= p.upper_bound + 1e-9, "P1 = {}", p.p1);
        assert!(p.upper_bound - p.lower_bound < 0.02, "P1 = {}", p.p1);
        assert!((p.lower_bound - chsh_lower_line(p.p1)).abs() < 1e-12);
    }
    let mut csv = Vec::new();
    write_curve_csv(&points, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 10);
    assert!(text.starts_with("p1,upper_bound,lower_bound,level,gap,dual_residual\n"));
}

#[test]
fn lower_bound_rejects_out_of_range() {
    assert!(lower_bound_p2(0.7).is_err());
    assert!(lower_bound_p2(0.9).is_err());
    assert!(chsh_curve(&[], 2, &NpaOptions::default()).is_err());
}
