mod common;

use common::*;
use lowrank_rsaa::problems::*;
use lowrank_rsaa::spectral::{eig_sym, numerical_rank, DEFAULT_RANK_TOL};
use lowrank_rsaa::SymMatrix;

fn inst(family: Family, p: usize, s: usize, noise: f64, seed: u64) -> ProblemInstance {
    let mut cfg = ProblemConfig::new(family, p, s, 3.0, noise, seed);
    cfg.pilot_samples = 500;
    make_problem_with(&cfg).unwrap()
}

#[test]
fn truth_is_feasible_rank_s() {
    for family in [Family::Denoising, Family::Sensing] {
        for (p, s) in [(3, 1), (6, 2), (10, 3)] {
            let i = inst(family, p, s, 0.1, 5);
            let d = eig_sym(&i.true_solution).unwrap();
            assert_eq!(numerical_rank(&d, DEFAULT_RANK_TOL), s);
            assert!(d.max_eigenvalue() <= 3.0 + 1e-12);
            assert!(d.min_eigenvalue() >= -1e-12);
        }
    }
    assert!(make_problem(Family::Denoising, 3, 4, 1.0, 0.1, 0).is_err());
    assert!(make_problem(Family::Denoising, 3, 1, -1.0, 0.1, 0).is_err());
}

#[test]
fn sampling_is_deterministic_and_normalized() {
    let i = inst(Family::Sensing, 5, 1, 0.2, 9);
    let a = sample(&i, 30, 4).unwrap();
    let b = sample(&i, 30, 4).unwrap();
    let c = sample(&i, 30, 5).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    for z in &a.scenarios {
        let Scenario::Sensing { a, .. } = z else { panic!("family") };
        assert!((a.frobenius_norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn gradients_match_finite_differences() {
    let mut r = rng(20);
    for family in [Family::Denoising, Family::Sensing] {
        let i = inst(family, 5, 1, 0.3, 21);
        let batch = sample(&i, 40, 1).unwrap();
        for _ in 0..5 {
            let x = random_psd(&mut r, 5, 2, 2.0);
            let g = empirical_gradient(&i, &x, &batch).unwrap();
            let f = |y: &SymMatrix| empirical_objective(&i, y, &batch).unwrap();
            for _ in 0..3 {
                let dir = unit_direction(&mut r, 5);
                let fd = central_difference(&f, &x, &dir, 1e-5);
                let an = g.inner(&dir);
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "{family:?}: {fd} vs {an}");
            }
        }
    }
}

#[test]
fn objective_agrees_with_per_scenario_cost() {
    let mut r = rng(22);
    for family in [Family::Denoising, Family::Sensing] {
        let i = inst(family, 4, 1, 0.5, 23);
        let batch = sample(&i, 25, 2).unwrap();
        let x = random_psd(&mut r, 4, 2, 1.0);
        let direct: f64 = batch.scenarios.iter().map(|z| cost(&i, &x, z)).sum::<f64>() / 25.0;
        let obj = Objective::new(&i, &batch).unwrap();
        assert!((obj.value(&x) - direct).abs() < 1e-12 * direct.max(1.0));
        assert!((empirical_objective(&i, &x, &batch).unwrap() - direct).abs() < 1e-12 * direct.max(1.0));
    }
}

#[test]
fn denoising_excess_risk_is_half_squared_distance() {
    let mut r = rng(24);
    let i = inst(Family::Denoising, 6, 2, 0.7, 25);
    for _ in 0..5 {
        let x = random_psd(&mut r, 6, 3, 2.0);
        let d = &x - &i.true_solution;
        let e = excess_risk(&i, &x).unwrap();
        assert!((e.value - 0.5 * d.inner(&d)).abs() < 1e-12);
        assert_eq!(e.std_error, 0.0);
        let t = true_risk(&i, &x).unwrap().value - true_risk(&i, &i.true_solution).unwrap().value;
        assert!((t - e.value).abs() < 1e-10);
    }
    assert_eq!(excess_risk(&i, &i.true_solution).unwrap().value, 0.0);
}

#[test]
fn sensing_excess_risk_is_nonnegative_and_consistent() {
    let i = inst(Family::Sensing, 4, 1, 0.2, 26);
    let x = SymMatrix::identity(4).scale(0.3);
    let e = excess_risk_with(&i, &x, 20_000).unwrap();
    assert!(e.value >= 0.0);
    // E⟨A, Δ⟩² for a Frobenius-normalized symmetric Gaussian A is close to ‖Δ‖²/dim, never larger than ‖Δ‖².
    let d = &x - &i.true_solution;
    assert!(e.value <= 0.5 * d.inner(&d));
    let diff = true_risk_with(&i, &x, 20_000).unwrap().value - true_risk_with(&i, &i.true_solution, 20_000).unwrap().value;
    assert!((diff - e.value).abs() < 5.0 * e.std_error.max(1e-6) + 0.05 * e.value);
}

#[test]
fn constants_are_sane() {
    let d = inst(Family::Denoising, 5, 1, 0.5, 27);
    assert_eq!(d.constants.u_l, 1.0);
    let s = inst(Family::Sensing, 5, 1, 0.5, 27);
    assert!(s.constants.u_l >= 1.0);
    for c in [d.constants, s.constants] {
        assert!(c.k >= 1.0 && c.k_c > 0.0 && c.c_mu > 0.0);
        assert!(c.validate().is_ok());
    }
}

#[test]
fn documents_round_trip() {
    let i = inst(Family::Sensing, 3, 1, 0.1, 28);
    let text = serde_json::to_string(&ProblemDocument::from(&i)).unwrap();
    let back = serde_json::from_str::<ProblemDocument>(&text).unwrap().into_instance().unwrap();
    assert_eq!(back.true_solution, i.true_solution);
    assert_eq!(back.constants, i.constants);
    let batch = sample(&i, 7, 3).unwrap();
    let text = serde_json::to_string(&BatchDocument::from(&batch)).unwrap();
    let back = serde_json::from_str::<BatchDocument>(&text).unwrap().into_batch().unwrap();
    assert_eq!(back, batch);
}

#[test]
fn psi1_estimate_of_exponential_tail() {
    let mut r = rng(29);
    use rand::Rng;
    let w: Vec<f64> = (0..200_000).map(|_| -(1.0 - r.gen::<f64>()).ln() - 1.0).collect();
    let k = psi1_moment_estimate(&w);
    // sup_q q⁻¹ (E|W|^q)^{1/q} for a centered Exp(1) is attained at q = 1: E|W| = 2/e.
    assert!((k - 2.0 / std::f64::consts::E).abs() < 0.02, "{k}");
}
