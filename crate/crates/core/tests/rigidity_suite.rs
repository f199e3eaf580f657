use locrand::rigidity::{
    adversary_guess_exact, anticommutation_chain, check_anticommutation, check_consistency, depolarization_sweep,
    guess_bound, losing_probabilities, post_measurement_pair, write_sweep_csv, RigidityReport,
};
use locrand::qsim::trace_distance;
use locrand::strategies::{depolarize, magic_square_canonical};
use proptest::prelude::*;

#[test]
fn sweep_satisfies_inequalities() {
    let ps: Vec<f64> = (0..=20).map(|k| 0.01 * f64::from(k)).collect();
    let rows = depolarization_sweep(&ps).unwrap();
    for row in &rows {
        let r = &row.report;
        let s = r.delta.sqrt();
        assert!((r.delta - row.p / 2.0).abs() < 1e-12);
        assert!(r.max_anticomm_norm() <= 6.0 * s + 1e-9);
        assert!(r.max_prop_distance() <= 18.0 * s + 1e-9);
        assert!(r.guess_exact <= r.guess_bound + 1e-9);
        assert_eq!(r.anticomm_norms.len(), 36);
        assert_eq!(r.prop_distances.len(), 72);
    }
    let mut csv = Vec::new();
    write_sweep_csv(&rows, &mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), ps.len() + 1);
}

#[test]
fn canonical_report() {
    let r = RigidityReport::compute(&magic_square_canonical()).unwrap();
    assert!(r.delta.abs() < 1e-12);
    assert!(r.consistency_norms.iter().all(|&x| x < 1e-9));
    assert!((r.guess_exact - 0.5).abs() < 1e-9);
    assert_eq!(r.guess_bound, 0.5);
    let chain = anticommutation_chain(&magic_square_canonical()).unwrap();
    assert!(chain.norm < 1e-9);
}

#[test]
fn clashing_indices_are_rejected() {
    let rs = magic_square_canonical();
    assert!(check_anticommutation(&rs, 0, 0, 0, 1).is_err());
    assert!(post_measurement_pair(&rs, 1, 1, 2, 1, 0).is_err());
    assert!(adversary_guess_exact(&rs, 0, 2, 2).is_err());
    assert!(guess_bound(1.5).is_err());
}

#[test]
fn empty_sweep_is_an_error() {
    assert!(depolarization_sweep(&[]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn depolarized_strategies_obey_bounds(p in 0.0f64..0.3, a in 0usize..3, b in 0usize..3, da in 1usize..3, db in 1usize..3, z in 0u8..2) {
        let rs = depolarize(&magic_square_canonical(), p).unwrap();
        let dij = losing_probabilities(&rs).unwrap();
        let delta = dij.iter().flatten().sum::<f64>() / 9.0;
        let (a2, b2) = ((a + da) % 3, (b + db) % 3);
        prop_assert!((check_consistency(&rs, a, b).unwrap() - 2.0 * dij[a][b].sqrt()).abs() < 1e-9);
        prop_assert!(check_anticommutation(&rs, a, b, a2, b2).unwrap() <= 6.0 * delta.sqrt() + 1e-9);
        let (p0, p1) = post_measurement_pair(&rs, a, b, a2, b2, z).unwrap();
        prop_assert!(trace_distance(&p0, &p1).unwrap() <= 18.0 * delta.sqrt() + 1e-9);
        let g = adversary_guess_exact(&rs, a, b, b2).unwrap();
        prop_assert!((0.5 - 1e-9..=guess_bound(delta).unwrap() + 1e-9).contains(&g));
    }
}
