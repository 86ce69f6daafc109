//! Numerical-integration oracles shared by the integration tests.
#![allow(dead_code)]

use basket_core::model::{HyperPrior, PriorSpec};

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn binom_loglik(eta: f64, n: u32, x: u32) -> f64 {
    let softplus = if eta > 0.0 { eta + (-eta).exp().ln_1p() } else { eta.exp().ln_1p() };
    x as f64 * eta - n as f64 * softplus
}

/// Log prior density of u = log σ² (Jacobian included), up to a constant.
pub fn log_prior_u(prior: &PriorSpec, u: f64) -> f64 {
    let s2 = u.exp();
    match *prior {
        PriorSpec::ScaledInvChiSq { .. } => {
            let (a, b) = prior.to_inverse_gamma().unwrap();
            -a * u - b / s2
        }
        // p(σ) dσ with σ = e^{u/2}, dσ = σ/2 du.
        PriorSpec::HalfCauchy { scale_a } => 0.5 * u - (s2 / (scale_a * scale_a)).ln_1p(),
    }
}

pub fn log_normal(x: f64, var: f64) -> f64 {
    -0.5 * (x * x / var + var.ln())
}

pub struct Moments {
    pub mean_p: f64,
    pub futility: f64,
    pub efficacy: f64,
}

/// Posterior of arm 1 in a two-arm hierarchy with θ ~ N(0, τ0²).
///
/// θ is integrated analytically: with m = (θ1+θ2)/2 and d = θ1−θ2,
/// m | σ² ~ N(0, σ²/2 + τ0²) and d | σ² ~ N(0, 2σ²) independently. The d grid
/// is rescaled per σ² so both the prior width and the likelihood width stay
/// resolved; m and log σ² use fixed trapezoid grids.
pub fn two_arm_quadrature(p0: [f64; 2], n: [u32; 2], x: [u32; 2], p1: f64, prior: &PriorSpec) -> Moments {
    let tau2 = HyperPrior::default().tau0_sq;
    let (c1, c2) = (logit(p0[0]), logit(p0[1]));
    let grid = |lo: f64, hi: f64, k: usize| -> Vec<f64> {
        (0..=k).map(|i| lo + (hi - lo) * i as f64 / k as f64).collect()
    };
    let us = grid(-16.0, 12.0, 280);
    let ms = grid(-8.0, 9.0, 340);
    let (mut z, mut sp, mut sf, mut se) = (0.0, 0.0, 0.0, 0.0);
    let mut log_terms = Vec::new();
    // First pass finds the log-scale maximum so the exponentials stay finite.
    for pass in 0..2 {
        let shift = if pass == 1 { log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max) } else { 0.0 };
        for &u in &us {
            let s2 = u.exp();
            let half = (8.0 * (2.0 * s2).sqrt()).min(16.0);
            let ds = grid(-half, half, 240);
            let dstep = 2.0 * half / 240.0;
            let lp = log_prior_u(prior, u);
            for &m in &ms {
                let lm = log_normal(m, s2 / 2.0 + tau2);
                for &d in &ds {
                    let (t1, t2) = (m + d / 2.0, m - d / 2.0);
                    let l = lp + lm + log_normal(d, 2.0 * s2)
                        + binom_loglik(t1 + c1, n[0], x[0])
                        + binom_loglik(t2 + c2, n[1], x[1])
                        + dstep.ln();
                    if pass == 0 {
                        log_terms.push(l);
                        continue;
                    }
                    let w = (l - shift).exp();
                    let p = expit(t1 + c1);
                    z += w;
                    sp += w * p;
                    if t1 <= 0.0 {
                        sf += w;
                    }
                    if p >= p1 {
                        se += w;
                    }
                }
            }
        }
    }
    Moments {
        mean_p: sp / z,
        futility: sf / z,
        efficacy: se / z,
    }
}

/// Pr(θ1 ≤ 0 | x) for a one-arm hierarchy, θ1 | σ² ~ N(0, τ0² + σ²).
pub fn one_arm_futility(p0: f64, n: u32, x: u32, prior: &PriorSpec) -> f64 {
    let tau2 = HyperPrior::default().tau0_sq;
    let c = logit(p0);
    let (mut z, mut below) = (0.0, 0.0);
    for iu in 0..=400 {
        let u = -16.0 + 28.0 * iu as f64 / 400.0;
        let var = tau2 + u.exp();
        let lp = log_prior_u(prior, u);
        for it in 0..=4000 {
            let t = -30.0 + 60.0 * it as f64 / 4000.0;
            let w = (lp + log_normal(t, var) + binom_loglik(t + c, n, x)).exp();
            z += w;
            if t <= 0.0 {
                below += w;
            }
        }
    }
    below / z
}

/// ∫ f over [a, b] by adaptive Simpson.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            left + right + diff / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// ∫_0^t p^(a-1) (1-p)^(b-1) dp for t ≤ 1/2, through p = v^(1/a) so the
/// endpoint singularity at zero disappears. A coarse pass sets the scale for
/// a relative tolerance, since the mass can be tiny for large shapes.
pub fn lower_mass(a: f64, b: f64, t: f64) -> f64 {
    let f = |v: f64| (1.0 - v.powf(1.0 / a)).powf(b - 1.0) / a;
    let upper = t.powf(a);
    let rough = simpson(&f, 0.0, upper, 1e-6 * upper / a);
    simpson(&f, 0.0, upper, 1e-11 * rough)
}

/// Regularized incomplete beta I_t(a, b) from two half-range integrals.
pub fn beta_cdf_quadrature(a: f64, b: f64, t: f64) -> f64 {
    let total = lower_mass(a, b, 0.5) + lower_mass(b, a, 0.5);
    let below = if t <= 0.5 { lower_mass(a, b, t) } else { total - lower_mass(b, a, 1.0 - t) };
    below / total
}
