// SPDX-License-Identifier: Apache-2.0

//! Filon-type rule on [−1, 1]: expand the amplitude in Legendre polynomials
//! and integrate each P_n(u) e^{iλu} exactly, ∫₋₁¹ P_n e^{iλu} du = 2 iⁿ j_n(λ).

use num_complex::Complex64;

use std::sync::OnceLock;

use super::gauss::gauss_legendre;
use super::{Estimate, QuadratureSettings, Trig};
use crate::error::{Error, Result};

const DEGREES: [usize; 4] = [32, 64, 128, 256];

type Rule = (Vec<f64>, Vec<f64>);

fn rule(level: usize) -> &'static Rule {
    static RULES: [OnceLock<Rule>; 4] = [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    RULES[level].get_or_init(|| gauss_legendre(DEGREES[level] + 1))
}

/// Spherical Bessel j_0..=j_n(x) by upward recurrence; stable for x > n.
fn spherical_bessel_upward(n: usize, x: f64) -> Vec<f64> {
    let (s, c) = x.sin_cos();
    let mut j = Vec::with_capacity(n + 1);
    j.push(s / x);
    if n >= 1 {
        j.push(s / (x * x) - c / x);
    }
    for k in 1..n {
        let next = (2 * k + 1) as f64 / x * j[k] - j[k - 1];
        j.push(next);
    }
    j
}

/// ∫₋₁¹ A(u) trig(λu + φ) du for an amplitude A analytic on a neighbourhood
/// of [−1, 1]. Requires |λ| > 258 so the Bessel recurrence stays stable.
pub fn filon_legendre<A: Fn(f64) -> f64>(
    amplitude: A,
    lambda: f64,
    phase: f64,
    kind: Trig,
    s: &QuadratureSettings,
) -> Result<Estimate> {
    if !(lambda.abs() > (DEGREES[DEGREES.len() - 1] + 2) as f64) {
        return Err(Error::invalid(format!("filon_legendre needs |lambda| > 258, got {lambda}")));
    }
    // A(u) trig(λu + φ) with λ < 0 equals A(−w) trig(|λ|w + φ) after u = −w
    let (lam, sign) = if lambda < 0.0 { (-lambda, -1.0) } else { (lambda, 1.0) };
    let rot = Complex64::from_polar(1.0, phase);
    let mut last = None;
    for (level, &deg) in DEGREES.iter().enumerate() {
        let (x, w) = rule(level);
        let vals: Vec<f64> = x.iter().map(|&u| amplitude(sign * u)).collect();
        let scale: f64 = vals.iter().zip(w).map(|(v, w)| v.abs() * w).sum();
        let mut coef = vec![0.0; deg + 1];
        for (k, (&u, &wk)) in x.iter().zip(w).enumerate() {
            let fw = vals[k] * wk;
            let mut p0 = 1.0;
            let mut p1 = u;
            coef[0] += fw;
            coef[1] += fw * u;
            for n in 2..=deg {
                let nf = n as f64;
                let p2 = ((2.0 * nf - 1.0) * u * p1 - (nf - 1.0) * p0) / nf;
                coef[n] += fw * p2;
                p0 = p1;
                p1 = p2;
            }
        }
        for (n, c) in coef.iter_mut().enumerate() {
            *c *= (2 * n + 1) as f64 / 2.0;
        }
        let j = spherical_bessel_upward(deg, lam);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut ipow = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        for n in 0..=deg {
            acc += ipow * (2.0 * coef[n] * j[n]);
            ipow *= i;
        }
        acc *= rot;
        let value = match kind {
            Trig::Cos => acc.re,
            Trig::Sin => acc.im,
        };
        let tail: f64 = coef[deg - 3..].iter().map(|c| c.abs()).sum();
        let roundoff = 4.0 * deg as f64 * f64::EPSILON * scale;
        let err = 2.0 * tail / lam + roundoff / lam;
        let tol = (s.rel_tol * value.abs()).max(s.abs_tol * scale);
        if err <= tol {
            return Ok(Estimate { value, err_est: err });
        }
        last = Some(Estimate { value, err_est: err });
    }
    let e = last.expect("at least one degree tried");
    Err(Error::Quadrature { estimate: e.value, err_est: e.err_est })
}
