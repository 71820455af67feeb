//! Second implementation of the theory formulas, factored differently from
//! the library (log-space powers, grouped terms) so shared slips are unlikely.

use lowrank_rsaa::theory::TheoryInputs;

fn logs(i: &TheoryInputs) -> (f64, f64, f64) {
    ((i.p as f64).ln(), (i.n as f64).ln(), (i.s as f64).ln())
}

/// `ln(n^{1/3}p) + ln(18R(K_C + C_μ))`
pub fn ell(i: &TheoryInputs) -> f64 {
    let (lp, ln, _) = logs(i);
    ln / 3.0 + lp + 18f64.ln() + i.radius.ln() + (i.constants.k_c + i.constants.c_mu).ln()
}

pub fn lambda(i: &TheoryInputs) -> f64 {
    let a = 0.5 / i.constants.u_l;
    let (_, ln, _) = logs(i);
    let log_sq = 8f64.ln() + i.constants.k.ln() + (2.0 / 3.0) * (2.0 * i.p as f64 + 1.0).ln()
        - i.constants.bernstein_c.ln()
        - a.ln()
        - (2.0 / 3.0) * ln
        + ell(i).ln();
    (0.5 * log_sq).exp()
}

pub fn condition_i(i: &TheoryInputs) -> f64 {
    let g = i.gamma / i.constants.k;
    i.universal.c1 * (i.p as f64 * (1.0 + g * g * g) + i.s as f64 * ell(i))
}

pub fn bound_i(i: &TheoryInputs) -> f64 {
    let (lp, ln, ls) = logs(i);
    let l = ell(i);
    let k = i.constants.k;
    let g = i.gamma;
    let t0 = if g > 0.0 { (0.5 * (k.ln() + lp / 3.0 + g.ln() - ln / 3.0)).exp() } else { 0.0 };
    let t1 = (ls + 2.0 * lp / 3.0 + l.ln() - 2.0 * ln / 3.0).exp();
    let t2 = (0.5 * (ls + l.ln() - ln)).exp();
    let t3 = ((lp - ln) / 3.0).exp();
    t0 + g + i.universal.c1 * k * (t1 + t2 + t3)
}

pub fn condition_ii(i: &TheoryInputs) -> f64 {
    let (lp, _, ls) = logs(i);
    (i.universal.c2.ln() + lp + i.constants.u_l.ln() + ell(i).ln() + 1.5 * (ls + i.radius.ln())).exp()
}

pub fn bound_ii(i: &TheoryInputs) -> f64 {
    let (lp, ln, _) = logs(i);
    let l = ell(i);
    // p^{1/3}√L/n^{1/3} · (p^{1/3}√L/n^{1/3} + R√U_L)
    let common = ((lp - ln) / 3.0 + 0.5 * l.ln()).exp();
    i.universal.c2 * i.s as f64 * i.constants.k * common * (common + i.radius * i.constants.u_l.sqrt())
}

/// `p̃_u` before the ceiling.
pub fn rank_bound_raw(i: &TheoryInputs, eps: f64) -> f64 {
    let d1 = 18f64.ln() + (i.constants.k_c + i.constants.c_mu).ln() + (i.p as f64).ln() + i.radius.ln() - eps.ln();
    let c = i.constants.bernstein_c;
    let r = (i.n as f64 / (2.0 * i.p as f64 + 1.0)).cbrt();
    2.0 * c * r / d1 * (1.0 + r * (i.gamma + 2.0 * eps) / i.constants.k) + 8.0 * i.s as f64
}

pub fn covering_log(r: usize, radius: f64, eps: f64, p: usize) -> f64 {
    let base = 9.0 * (r as f64).sqrt() * radius / eps;
    if base <= 1.0 {
        0.0
    } else {
        ((2 * p + 1) * r) as f64 * (9f64.ln() + 0.5 * (r as f64).ln() + radius.ln() - eps.ln())
    }
}

pub fn saa_bound(p: usize, n: usize, scale: f64) -> f64 {
    scale * p as f64 * ((n as f64).ln() / n as f64).sqrt()
}
