//! Independent oracles shared by the integration tests.
//!
//! Nothing here calls the closed forms under test: integrals are done by
//! adaptive quadrature, proxes by brute-force search or plain projected
//! gradient, eigen-decompositions by nalgebra.

#![allow(dead_code)]

use lowrank_rsaa::SymMatrix;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rule(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = rule(fa, flm, fm, a, m);
        let right = rule(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    recurse(f, a, b, fa, fm, fb, rule(fa, fm, fb, a, b), tol, 50)
}

/// `P_λ(t) = ∫₀ᵗ [aλ − s]₊ / a ds` by quadrature, split at the kink.
pub fn mcp_by_quadrature(t: f64, a: f64, lambda: f64) -> f64 {
    let g = |s: f64| (a * lambda - s).max(0.0) / a;
    let kink = a * lambda;
    if t <= kink {
        simpson(&g, 0.0, t, 1e-13)
    } else {
        simpson(&g, 0.0, kink, 1e-13) + simpson(&g, kink, t, 1e-13)
    }
}

/// Piecewise MCP written out directly (used as the objective of search oracles).
pub fn mcp_direct(t: f64, a: f64, lambda: f64) -> f64 {
    let t = t.abs();
    if t >= a * lambda {
        a * lambda * lambda / 2.0
    } else {
        lambda * t - t * t / (2.0 * a)
    }
}

/// `argmin_{x ≥ 0} ½(x − v)² + step·P_λ(x)` by scanning `points` grid values
/// on `[0, max(v, 0) + 1e-3]`, then refining with golden-section search in
/// the winning cell.
pub fn grid_prox(v: f64, step: f64, a: f64, lambda: f64, points: usize) -> f64 {
    let obj = |x: f64| 0.5 * (x - v).powi(2) + step * mcp_direct(x, a, lambda);
    let hi = v.max(0.0) + 1e-3;
    let h = hi / points as f64;
    let mut best = (0.0, obj(0.0));
    for k in 1..=points {
        let x = k as f64 * h;
        let fx = obj(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best.0
}

/// Central difference `(f(x + h·d) − f(x − h·d)) / 2h`.
pub fn central_difference(f: &dyn Fn(&SymMatrix) -> f64, x: &SymMatrix, dir: &SymMatrix, h: f64) -> f64 {
    let mut xp = x.clone();
    xp.axpy(h, dir);
    let mut xm = x.clone();
    xm.axpy(-h, dir);
    (f(&xp) - f(&xm)) / (2.0 * h)
}

pub fn to_na(x: &SymMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(x.dim(), x.dim(), x.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> SymMatrix {
    let p = m.nrows();
    SymMatrix::from_upper_fn(p, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

/// Eigenvalues (descending) and eigenvectors from nalgebra.
pub fn na_eig(x: &SymMatrix) -> (Vec<f64>, DMatrix<f64>) {
    let e = SymmetricEigen::new(to_na(x));
    let mut idx: Vec<usize> = (0..x.dim()).collect();
    idx.sort_by(|&i, &j| e.eigenvalues[j].partial_cmp(&e.eigenvalues[i]).unwrap());
    let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(x.dim(), x.dim(), |r, c| e.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

/// `U·diag(g(σ))·Uᵀ` through nalgebra.
pub fn na_spectral(x: &SymMatrix, g: impl Fn(f64) -> f64) -> SymMatrix {
    let (vals, vecs) = na_eig(x);
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(vals.len(), vals.iter().map(|&w| g(w))));
    from_na(&(&vecs * d * vecs.transpose()))
}

/// `argmin_{X ⪰ 0, σ_max ≤ R} ½‖X − V‖² + step·Σ P_λ(σⱼ(X))` by projected
/// gradient with unit step. With `step < a` the objective is strongly convex
/// with curvature in `[1 − step/a, 1]`, so the iteration contracts by `step/a`.
pub fn matrix_prox_oracle(v: &SymMatrix, step: f64, a: f64, lambda: f64, radius: f64) -> SymMatrix {
    let mut x = na_spectral(v, |w| w.clamp(0.0, radius));
    for _ in 0..100_000 {
        // right derivative of P at σ ≥ 0
        let grad_pen = na_spectral(&x, |w| (a * lambda - w.max(0.0)).max(0.0) / a);
        let mut y = v.clone();
        y.axpy(-step, &grad_pen);
        let next = na_spectral(&y, |w| w.clamp(0.0, radius));
        let diff = (&next - &x).frobenius_norm();
        x = next;
        if diff < 1e-13 {
            break;
        }
    }
    x
}

pub fn random_sym(rng: &mut ChaCha8Rng, p: usize, scale: f64) -> SymMatrix {
    SymMatrix::from_upper_fn(p, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// `Σⱼ dⱼ uⱼuⱼᵀ` with Gaussian (not orthogonalized) directions.
pub fn random_psd(rng: &mut ChaCha8Rng, p: usize, rank: usize, scale: f64) -> SymMatrix {
    let mut x = SymMatrix::zeros(p);
    for _ in 0..rank {
        let u: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let w = scale * rng.gen_range(0.2..1.0) / p as f64;
        x.axpy(w, &SymMatrix::from_upper_fn(p, |i, j| u[i] * u[j]));
    }
    x
}

pub fn unit_direction(rng: &mut ChaCha8Rng, p: usize) -> SymMatrix {
    let d = random_sym(rng, p, 1.0);
    let n = d.frobenius_norm();
    d.scale(1.0 / n)
}

pub mod theory_oracle;
