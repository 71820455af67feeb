mod common;

use common::*;
use lowrank_rsaa::penalty::*;
use lowrank_rsaa::spectral::eig_sym;
use lowrank_rsaa::McpParams;
use proptest::prelude::*;
use rand::Rng;

fn prm(a: f64, lambda: f64) -> McpParams {
    McpParams::new(a, lambda, 0.5 / a).unwrap()
}

#[test]
fn value_matches_integral() {
    let mut r = rng(10);
    for _ in 0..300 {
        let (a, l) = (r.gen_range(0.1..5.0), r.gen_range(0.0..3.0));
        let t = r.gen_range(0.0..3.0 * a * l + 0.5);
        let got = mcp_value(t, &prm(a, l)).unwrap();
        assert!((got - mcp_by_quadrature(t, a, l)).abs() < 1e-9, "a={a} l={l} t={t}");
    }
}

#[test]
fn derivative_matches_difference_quotient() {
    let mut r = rng(11);
    for _ in 0..200 {
        let (a, l) = (r.gen_range(0.1..5.0), r.gen_range(0.1..3.0));
        let q = prm(a, l);
        let t = r.gen_range(0.01..2.0 * a * l);
        if (t - a * l).abs() < 1e-4 {
            continue;
        }
        let h = 1e-6;
        let fd = (mcp_value(t + h, &q).unwrap() - mcp_value(t - h, &q).unwrap()) / (2.0 * h);
        assert!((fd - mcp_derivative(t, &q).unwrap()).abs() < 1e-7);
    }
}

#[test]
fn scalar_prox_matches_grid_search() {
    let mut r = rng(12);
    for _ in 0..100 {
        let (a, l) = (r.gen_range(0.3..3.0), r.gen_range(0.05..2.0));
        let step = r.gen_range(0.01..0.99) * a;
        let v = r.gen_range(-1.0..(2.0 * a * l + 1.0));
        let got = mcp_prox_scalar(v, step, &prm(a, l)).unwrap();
        let want = grid_prox(v, step, a, l, 100_000);
        assert!((got - want).abs() < 1e-4, "v={v} step={step} a={a} l={l}: {got} vs {want}");
    }
}

#[test]
fn prox_rejects_large_steps() {
    let q = prm(1.0, 1.0);
    assert!(mcp_prox_scalar(0.5, 1.0, &q).is_err());
    assert!(mcp_prox_scalar(0.5, 1.5, &q).is_err());
}

#[test]
fn spectral_prox_matches_matrix_oracle() {
    let mut r = rng(13);
    for _ in 0..10 {
        let p = r.gen_range(2..6);
        let (a, l) = (r.gen_range(0.5..2.0), r.gen_range(0.1..1.0));
        let step = r.gen_range(0.1..0.9) * a;
        let v = random_sym(&mut r, p, 1.5);
        let got = mcp_spectral_prox(&v, step, &prm(a, l)).unwrap();
        let want = matrix_prox_oracle(&v, step, a, l, f64::INFINITY);
        assert!((&got - &want).frobenius_norm() < 1e-6);
        let radius = 0.4;
        let got = mcp_spectral_prox_ball(&v, step, &prm(a, l), radius).unwrap();
        let want = matrix_prox_oracle(&v, step, a, l, radius);
        assert!((&got - &want).frobenius_norm() < 1e-6);
    }
}

#[test]
fn spectral_value_and_gradient() {
    let mut r = rng(14);
    let q = prm(1.0, 0.8);
    for _ in 0..10 {
        let x = random_psd(&mut r, 5, 5, 5.0);
        let (vals, _) = na_eig(&x);
        let want: f64 = vals.iter().map(|&w| mcp_direct(w, 1.0, 0.8)).sum();
        assert!((mcp_spectral_value(&x, &q).unwrap() - want).abs() < 1e-10);
        // Full-rank PSD point away from the kink: the penalty is differentiable.
        let g = mcp_spectral_gradient(&x, &q).unwrap();
        let dir = unit_direction(&mut r, 5);
        let f = |y: &lowrank_rsaa::SymMatrix| mcp_spectral_value(y, &q).unwrap();
        let fd = central_difference(&f, &x, &dir, 1e-6);
        let min_gap = eig_sym(&x).unwrap().eigenvalues.iter().map(|w| (w - 0.8).abs().min(*w)).fold(f64::INFINITY, f64::min);
        if min_gap > 1e-3 {
            assert!((fd - g.inner(&dir)).abs() < 1e-6);
        }
    }
}

#[test]
fn rejects_indefinite_input() {
    let x = lowrank_rsaa::SymMatrix::from_diag(&[1.0, -0.5]);
    assert!(mcp_spectral_value(&x, &prm(1.0, 1.0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn value_bounds(a in 0.01f64..10.0, l in 0.0f64..5.0, t in 0.0f64..50.0) {
        let q = prm(a, l);
        let v = mcp_value(t, &q).unwrap();
        prop_assert!(v >= 0.0);
        prop_assert!(v <= l * t);
        prop_assert!(v <= a * l * l / 2.0);
    }

    #[test]
    fn prox_is_monotone_and_thresholds(a in 0.1f64..5.0, l in 0.0f64..3.0, frac in 0.01f64..0.99, v1 in -5.0f64..20.0, dv in 0.0f64..5.0) {
        let q = prm(a, l);
        let step = frac * a;
        let x1 = mcp_prox_scalar(v1, step, &q).unwrap();
        let x2 = mcp_prox_scalar(v1 + dv, step, &q).unwrap();
        prop_assert!(x2 >= x1 - 1e-12);
        prop_assert!(x1 >= 0.0);
        if v1 <= step * l { prop_assert_eq!(x1, 0.0); }
        if v1 >= a * l { prop_assert_eq!(x1, v1); }
    }
}
